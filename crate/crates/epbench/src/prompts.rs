//! All prompt templates used by the pipeline, plus their renderers.
//!
//! Templates are stored verbatim as constants and filled by plain string
//! substitution of named `{slot}` placeholders. Literal braces that belong
//! to JSON format instructions inside the templates are left untouched
//! because only known slot names are ever substituted.

use crate::eventgen::{Event, EventMeta};

/// System prompt for chapter generation.
pub const CHAPTER_SYSTEM_PROMPT: &str = "You are a creative fiction writer specializing in detailed, atmospheric novel excerpts. Your task is to generate vivid, immersive scenes based on specific prompts.";

/// User prompt template for chapter generation.
pub const CHAPTER_USER_TEMPLATE: &str = "Write a detailed novel excerpt in a {style} style about {entity} attending a {content}.
The story takes place on {date}, at {location}, where {entity} {content_single_detail}.
Follow these guidelines:

Structure and Information Reveal:
1. Divide the text into {nb_paragraphs} paragraph(s). Number each paragraph (1), (2), etc., while maintaining novel-appropriate paragraph lengths.
2. Gradually reveal key information:
- Full location '{location}': must appear verbatim in paragraph {idx_loc} only and nowhere else in the text
- Full date '{date}': must appear verbatim in paragraph {idx_date} only and nowhere else in the text
- Full name '{entity}': must appear verbatim in paragraph {idx_entity} only and nowhere else in the text
- Full detail that '{first_name} {content_single_detail}': must appear verbatim in paragraph {idx_content} and nowhere else in the text
3. Subtly distribute details about location, date, main character, and event across all paragraphs.

Content and Setting:
1. Focus on {first_name}'s experiences, observations, and interactions during the {content}.
2. Vividly describe surroundings, atmosphere, and {first_name}'s emotions.
3. Include the detail that {first_name} {content_single_detail}.
4. Limit the timeframe to a single day and confine all action to {location}.

Characters:
1. Refer to other characters as $entity_X (where X is a number).
2. Omit background information about {first_name} and other characters.

Style and Tone:
1. Use vivid, sensory details to bring the scene to life.
2. Incorporate elements of the {style} style, including {style_description}.
3. Maintain a consistent narrative voice throughout the excerpt.

Restrictions:
1. Only mention {location} and {date}; avoid other locations or dates.
2. Exclude explicit introductions, conclusions, or character backgrounds.
3. Focus exclusively on the events of this particular {content}.

Craft a seamless narrative that gradually reveals information while maintaining reader engagement throughout the excerpt.";

/// System prompt for the chapter semantic verifier.
pub const VERIFY_SYSTEM_PROMPT: &str = "You are a content checker AI. Your tasks:
1. Read the given text carefully.
2. Answer true/false questions about the text.
3. Respond in JSON format.
Be accurate and concise. Only use information explicitly stated in the text.";

/// User prompt template for the chapter semantic verifier.
pub const VERIFY_USER_TEMPLATE: &str = "Please analyze the following text enclosed between [TEXT START] and [TEXT END] markers, and answer the four questions below with a simple true or false. Provide your answers in a JSON format with the question numbers as keys and the boolean answers as values.

[TEXT START]
{generated_chapter_candidate}
[TEXT END]

Questions:
1. Does the following text takes place in a single geographical (longitude, latitude)?
2. Does the following text takes place in a single temporal day?
3. Does the following text has a single main character?
4. Does the following text has a single main event happening at that location that day (further cut into the events of the day)?

Your response should be in this JSON format:
{
    \"1\": [boolean],
    \"2\": [boolean],
    \"3\": [boolean],
    \"4\": [boolean]
}";

/// Answer-scoring judge prompt (items and per-ground-truth matching scores).
pub const EVAL_JUDGE_TEMPLATE: &str = "You are an expert judge evaluating the accuracy of an AI-generated answer against a known groundtruth. Questions can probe for different types or aspects, like what actions or events took place, what people were involved, what were the dates, or what were the locations or spaces.


Question type: {retrieval_type}
Groundtruth: {correct_answer}
AI-generated answer: {llm_answer}


Your task:
- Identify all unique items in the AI-generated answer that are relevant to the question type. Answer an empty list [] for this field in case of at least one negative information (e.g., when the answer begins by telling there is no information, or cannot answer)
- Determine a matching score between 0 and 1 for each ground truth item. Give 1 if the item has been found in the relevant items of the AI-generated answer, considering synonyms, paraphrases, or close meanings. Give 0.5 if the item could be considered related to any AI-generated item but without being explicitly stated as such. Give 0 if the item missed mentioning a specific AI-generated item.
- Provide a brief explanation of the evaluation

Provide your evaluation in the following JSON format:
{
    \"identified_items_in_AI_answer\": [\"AI_answer_item_1\", \"AI_answer_item_2\", ...],
    \"matching_score\": [{\"{correct_answer_0}\": \"score_between_0_and_1\"},
                                    {\"{correct_answer_1}\": \"score_between_0_and_1\", ...}],
    \"explanation\": \"Brief explanation of your evaluation\"
}";

/// Chronological index-matching judge prompt.
pub const CHRONO_JUDGE_TEMPLATE: &str = "You are an expert judge evaluating the alignment between an AI-generated list and a known groundtruth list. Your task is to match items from the predicted list to the groundtruth list, considering their order and uniqueness.

    Given:
    Groundtruth list: {groundtruth_items}
    Groundtruth indexes: {groundtruth_indexes}
    Predicted list: {predicted_items}

    Instructions:
    1. For each item in the predicted list, find the first corresponding index from the groundtruth list that hasn't been used yet.
    2. Assign indexes based on these rules:
    a. If a match is found and the groundtruth index hasn't been used, assign that index.
    b. If no match is found, or if all matching indexes have already been used, assign -1.
    3. Always use the earliest matching index from the groundtruth list, even if there's an exact match later.
    4. Provide a brief explanation of your index assignments.

    Output your evaluation in the following JSON format:
    {
        \"groundtruth_indexes\": {groundtruth_indexes},
        \"predicted_indexes\": [index1, index2, ...],
        \"explanation\": \"Concise explanation of index assignments\"
    }

    Consider these examples:

    Example 1:
    Groundtruth list: ['Ice Preservation Discussions', 'Theater Show', 'Parkour Workshop']
    Predicted list: ['Theater Performance', 'Tech Hackathon', 'Ice Preservation Talks']
    {
        \"groundtruth_indexes\": [0, 1, 2],
        \"predicted_indexes\": [1, -1, 0],
        \"explanation\": \"Theater Performance matches Theater Show (index 1), Tech Hackathon has no match (-1), Ice Preservation Talks matches Ice Preservation Discussions (index 0).\"
    }

    Example 2:
    Groundtruth list: ['Ice Preservation Discussions', 'Theater Show', 'Parkour Workshop', 'Theater Performance']
    Predicted list: ['Theater Performance', 'Tech Hackathon', 'Ice Preservation Talks']
    {
        \"groundtruth_indexes\": [0, 1, 2, 3],
        \"predicted_indexes\": [1, -1, 0],
        \"explanation\": \"Theater Performance matches Theater Show (index 1, first available match), Tech Hackathon has no match (-1), Ice Preservation Talks matches Ice Preservation Discussions (index 0).\"
    }

    Now, please provide your evaluation for the given lists:";

/// System prompt shared by the three answer-generation modes.
pub const ANSWER_SYSTEM_PROMPT: &str = "You are an expert in memory tests.";

/// User prompt template for the in-context answering mode.
pub const ANSWER_IN_CONTEXT_TEMPLATE: &str = "# Episodic Memory Benchmark

You are participating in an episodic memory test. You will be presented with a text to read and internalize as if you had personally experienced the events described. After the text, you will find a question about the content. Please answer this question based solely on the information provided in the text.

## The Text to Memorize:

{book_content}

## Question:

{question}

Please answer the question to the best of your ability, based only on the information provided in the text above. If you are unsure about an answer, it's okay to say so. Do not invent or assume information that was not explicitly stated in the text.";

/// User prompt template for the retrieval-augmented answering mode.
pub const ANSWER_RAG_TEMPLATE: &str = "# Episodic Memory Benchmark

You are participating in an episodic memory test, based on the data below, which was retrieved from a book. You need to read it and internalize as if you had personally experienced the events described. After the text, you will find a question about the content. Please answer this question based solely on the information provided in the retrieved data.

## Retrieved Relevant Chunks from the Book:

{book_chunks}

## Question:

{question}

Please answer the question to the best of your ability, based only on the information provided in the relevant chunks above. If you are unsure about an answer, it's okay to say so. Do not invent or assume information that was not explicitly stated in the text.";

/// User prompt template for the fine-tuned answering mode.
pub const ANSWER_FINETUNED_TEMPLATE: &str = "This question is about the book \"Synaptic Echoes 2026: The Neuro-Temporal Paradox of Episodic Precognition\". All events in this book are purely fictional and do not correspond to real-world timelines. Please answer based solely on the content of this fictional story.

Question: {question}";

fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (name, value) in slots {
        out = out.replace(&format!("{{{name}}}"), value);
    }
    out
}

/// First name of a "First Last" entity string.
pub fn first_name(entity: &str) -> &str {
    entity.split_whitespace().next().unwrap_or(entity)
}

/// Fill the chapter-generation template; returns (system, user).
pub fn render_chapter_prompt(
    event: &Event,
    meta: &EventMeta,
    style_adjectives: &[String],
) -> (String, String) {
    let style_description = style_adjectives.join(", ");
    let user = fill(
        CHAPTER_USER_TEMPLATE,
        &[
            ("style", &meta.style),
            ("entity", &event.ent),
            ("content", &event.c),
            ("date", &event.t),
            ("location", &event.s),
            ("content_single_detail", &event.d),
            ("nb_paragraphs", &meta.nb_paragraphs.to_string()),
            ("idx_loc", &meta.idx_paragraph.location.to_string()),
            ("idx_date", &meta.idx_paragraph.date.to_string()),
            ("idx_entity", &meta.idx_paragraph.entity.to_string()),
            ("idx_content", &meta.idx_paragraph.content.to_string()),
            ("first_name", first_name(&event.ent)),
            ("style_description", &style_description),
        ],
    );
    (CHAPTER_SYSTEM_PROMPT.to_string(), user)
}

/// Fill the semantic-verification template; returns (system, user).
pub fn render_verify_prompt(chapter_text: &str) -> (String, String) {
    let user = fill(
        VERIFY_USER_TEMPLATE,
        &[("generated_chapter_candidate", chapter_text)],
    );
    (VERIFY_SYSTEM_PROMPT.to_string(), user)
}

/// Render a list of items the way the judge prompts display them:
/// a Python-style list of single-quoted strings.
pub fn render_item_list(items: &[String]) -> String {
    let quoted: Vec<String> = items.iter().map(|i| format!("'{i}'")).collect();
    format!("[{}]", quoted.join(", "))
}

/// Fill the answer-scoring judge template with the trace type, rendered
/// ground truth and the raw model answer.
pub fn render_eval_judge_prompt(
    retrieval_type: &str,
    ground_truth: &[String],
    llm_answer: &str,
) -> String {
    fill(
        EVAL_JUDGE_TEMPLATE,
        &[
            ("retrieval_type", retrieval_type),
            ("correct_answer", &render_item_list(ground_truth)),
            ("llm_answer", llm_answer),
        ],
    )
}

/// Fill the chronological matching template. Ground-truth indexes are
/// always 0..N-1 with N the ground truth length.
pub fn render_chrono_judge_prompt(
    groundtruth_items: &[String],
    predicted_items: &[String],
) -> String {
    let indexes: Vec<String> = (0..groundtruth_items.len()).map(|i| i.to_string()).collect();
    let indexes = format!("[{}]", indexes.join(", "));
    fill(
        CHRONO_JUDGE_TEMPLATE,
        &[
            ("groundtruth_items", &render_item_list(groundtruth_items)),
            ("groundtruth_indexes", &indexes),
            ("predicted_items", &render_item_list(predicted_items)),
        ],
    )
}

pub fn render_in_context_prompt(book_content: &str, question: &str) -> String {
    fill(
        ANSWER_IN_CONTEXT_TEMPLATE,
        &[("book_content", book_content), ("question", question)],
    )
}

pub fn render_rag_prompt(book_chunks: &str, question: &str) -> String {
    fill(
        ANSWER_RAG_TEMPLATE,
        &[("book_chunks", book_chunks), ("question", question)],
    )
}

pub fn render_finetuned_prompt(question: &str) -> String {
    fill(ANSWER_FINETUNED_TEMPLATE, &[("question", question)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eventgen::{EventMeta, ParagraphPlacement};

    fn sample_event() -> Event {
        Event {
            index: 0,
            t: "September 13, 2025".into(),
            s: "Bethpage Black Course".into(),
            ent: "Ezra Edwards".into(),
            c: "Parkour Workshop".into(),
            d: "demonstrated cat leaps at the training rig".into(),
        }
    }

    fn sample_meta() -> EventMeta {
        EventMeta {
            nb_paragraphs: 7,
            idx_paragraph: ParagraphPlacement {
                date: 7,
                location: 2,
                entity: 2,
                content: 2,
            },
            style: "thriller".into(),
        }
    }

    #[test]
    fn chapter_prompt_carries_placement_clauses() {
        let (system, user) =
            render_chapter_prompt(&sample_event(), &sample_meta(), &["tension".into(), "pace".into(), "danger".into()]);
        assert!(system.starts_with("You are a creative fiction writer"));
        assert!(user.contains("'Bethpage Black Course': must appear verbatim in paragraph 2 only and nowhere else"));
        assert!(user.contains("'September 13, 2025': must appear verbatim in paragraph 7 only and nowhere else"));
        assert!(user.contains("Full detail that 'Ezra demonstrated cat leaps at the training rig'"));
        assert!(user.contains("Divide the text into 7 paragraph(s)."));
        assert!(user.contains("including tension, pace, danger."));
        assert!(!user.contains('{'));
    }

    #[test]
    fn rendering_is_pure() {
        let a = render_chapter_prompt(&sample_event(), &sample_meta(), &["x".into()]);
        let b = render_chapter_prompt(&sample_event(), &sample_meta(), &["x".into()]);
        assert_eq!(a, b);
    }

    #[test]
    fn verify_prompt_wraps_text_in_markers() {
        let (_, user) = render_verify_prompt("(1) Some chapter.");
        assert!(user.contains("[TEXT START]\n(1) Some chapter.\n[TEXT END]"));
        assert!(user.contains("single temporal day"));
    }

    #[test]
    fn eval_judge_prompt_renders_ground_truth_list() {
        let prompt =
            render_eval_judge_prompt("Contents", &["Tech Hackathon".into()], "some answer");
        assert!(prompt.contains("Question type: Contents"));
        assert!(prompt.contains("Groundtruth: ['Tech Hackathon']"));
        assert!(prompt.contains("Answer an empty list []"));
    }

    #[test]
    fn chrono_prompt_indexes_run_from_zero() {
        let prompt = render_chrono_judge_prompt(
            &["A".into(), "B".into(), "C".into()],
            &["B".into()],
        );
        assert!(prompt.contains("Groundtruth indexes: [0, 1, 2]"));
        assert!(prompt.contains("Predicted list: ['B']"));
        assert!(prompt.contains("\"predicted_indexes\": [1, -1, 0],"));
    }

    #[test]
    fn finetuned_prompt_is_book_scoped() {
        let prompt = render_finetuned_prompt("Who was there?");
        assert!(prompt.starts_with("This question is about the book \"Synaptic Echoes 2026"));
        assert!(prompt.ends_with("Question: Who was there?"));
    }
}
