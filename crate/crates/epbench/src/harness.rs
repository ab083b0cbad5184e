//! Answer generation under the three memory strategies.
//!
//! In-context puts the whole assembled book in the prompt; RAG chunks the
//! book (by paragraph or chapter), embeds the chunks, and retrieves the
//! top-k by cosine similarity to the question embedding; the fine-tuned
//! mode sends only the question wrapped in the book-scoped template, on
//! the assumption the target model was trained on the exported dataset.

use crate::bookgen::Book;
use crate::gateway::{ChatBackend, ChatRequest, EmbedBackend, EmbedRequest, GatewayError, ModelSpec};
use crate::prompts;
use crate::qagen::Question;
use crate::verifier::parse_paragraphs;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("book chapter {0} failed to re-parse: {1}")]
    UnparseableChapter(usize, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Paragraph,
    Chapter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum MemoryMode {
    InContext,
    Rag {
        granularity: Granularity,
        top_k: usize,
    },
    FineTuned {
        model_id: String,
    },
}

impl MemoryMode {
    /// Short stable label used in artifact records.
    pub fn label(&self) -> String {
        match self {
            MemoryMode::InContext => "in_context".into(),
            MemoryMode::Rag { granularity, top_k } => match granularity {
                Granularity::Paragraph => format!("rag_paragraph_k{top_k}"),
                Granularity::Chapter => format!("rag_chapter_k{top_k}"),
            },
            MemoryMode::FineTuned { .. } => "fine_tuned".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub label: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
}

/// Split the book into labeled retrieval chunks.
///
/// Paragraph granularity yields one chunk per numbered paragraph with the
/// "(X) " marker stripped (the label carries the position); chapter
/// granularity yields one chunk per chapter.
pub fn chunk_book(book: &Book, granularity: Granularity) -> Result<Vec<Chunk>, HarnessError> {
    let mut chunks = Vec::new();
    for chapter in &book.chapters {
        match granularity {
            Granularity::Chapter => chunks.push(Chunk {
                label: format!("Chapter {}", chapter.chapter_number),
                text: chapter.text.clone(),
                embedding: None,
            }),
            Granularity::Paragraph => {
                let paragraphs = parse_paragraphs(&chapter.text).map_err(|e| {
                    HarnessError::UnparseableChapter(chapter.chapter_number, e.to_string())
                })?;
                for (number, body) in paragraphs {
                    chunks.push(Chunk {
                        label: format!(
                            "Chapter {}, Paragraph {}",
                            chapter.chapter_number, number
                        ),
                        text: body,
                        embedding: None,
                    });
                }
            }
        }
    }
    Ok(chunks)
}

fn cosine(a: &[f64], b: &[f64]) -> Result<f64, GatewayError> {
    if a.len() != b.len() {
        return Err(GatewayError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (na * nb))
}

/// Embed all chunks in place with one batched request.
pub fn embed_chunks(
    backend: &dyn EmbedBackend,
    embedder: &ModelSpec,
    chunks: &mut [Chunk],
) -> Result<(), HarnessError> {
    if chunks.is_empty() {
        return Ok(());
    }
    let vectors = backend.embed(&EmbedRequest {
        provider_id: embedder.provider_id.clone(),
        model: embedder.model.clone(),
        texts: chunks.iter().map(|c| c.text.clone()).collect(),
    })?;
    for (chunk, vector) in chunks.iter_mut().zip(vectors) {
        chunk.embedding = Some(vector);
    }
    Ok(())
}

/// Top-k chunks by descending cosine similarity to the question embedding,
/// ties broken by ascending chunk position.
pub fn retrieve_context<'a>(
    backend: &dyn EmbedBackend,
    embedder: &ModelSpec,
    question_text: &str,
    chunks: &'a [Chunk],
    top_k: usize,
) -> Result<Vec<&'a Chunk>, HarnessError> {
    assert!(top_k >= 1);
    let question_vec = backend
        .embed(&EmbedRequest {
            provider_id: embedder.provider_id.clone(),
            model: embedder.model.clone(),
            texts: vec![question_text.to_string()],
        })?
        .remove(0);
    let mut scored: Vec<(usize, f64)> = Vec::with_capacity(chunks.len());
    for (position, chunk) in chunks.iter().enumerate() {
        let embedding = chunk
            .embedding
            .as_ref()
            .expect("chunks must be embedded before retrieval");
        scored.push((position, cosine(&question_vec, embedding).map_err(HarnessError::Gateway)?));
    }
    scored.sort_by(|(pa, sa), (pb, sb)| {
        sb.partial_cmp(sa).unwrap_or(std::cmp::Ordering::Equal).then(pa.cmp(pb))
    });
    Ok(scored.into_iter().take(top_k).map(|(p, _)| &chunks[p]).collect())
}

/// Render retrieved chunks into the prompt context block.
pub fn render_chunks(chunks: &[&Chunk]) -> String {
    chunks
        .iter()
        .map(|c| format!("### {}\n\n{}", c.label, c.text))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Everything answer generation needs besides the question.
pub struct AnswerContext<'a> {
    pub chat: &'a dyn ChatBackend,
    pub embed: &'a dyn EmbedBackend,
    pub answerer: ModelSpec,
    pub embedder: ModelSpec,
    pub max_output_tokens: u32,
    pub temperature: f64,
}

/// Produce the raw model answer for one question under a memory mode.
///
/// The answer text is returned untruncated, including any spurious
/// trailing content, so scoring sees exactly what the model produced.
pub fn answer_question(
    ctx: &AnswerContext,
    mode: &MemoryMode,
    question: &Question,
    book: &Book,
    chunks: &[Chunk],
) -> Result<String, HarnessError> {
    let (model, user_prompt) = match mode {
        MemoryMode::InContext => (
            ctx.answerer.clone(),
            prompts::render_in_context_prompt(&book.assembled_text, &question.question_text),
        ),
        MemoryMode::Rag { top_k, .. } => {
            let retrieved =
                retrieve_context(ctx.embed, &ctx.embedder, &question.question_text, chunks, *top_k)?;
            (
                ctx.answerer.clone(),
                prompts::render_rag_prompt(&render_chunks(&retrieved), &question.question_text),
            )
        }
        MemoryMode::FineTuned { model_id } => (
            ModelSpec::new(&ctx.answerer.provider_id, model_id),
            prompts::render_finetuned_prompt(&question.question_text),
        ),
    };
    let answer = ctx.chat.chat(&ChatRequest {
        provider_id: model.provider_id,
        model: model.model,
        system_prompt: prompts::ANSWER_SYSTEM_PROMPT.to_string(),
        user_prompt,
        max_output_tokens: ctx.max_output_tokens,
        temperature: ctx.temperature,
        seed: None,
    })?;
    Ok(answer)
}

/// One produced answer, keyed for joining with scores.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub qid: String,
    pub mode: String,
    pub model: String,
    /// None when the gateway failed for this question (Unanswered).
    pub answer_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bookgen::{assemble_text, BookChapter};
    use crate::gateway::testing::UnitEmbedProvider;
    use crate::gateway::{EmbedRequest, GatewayError, Provider, ProviderFailure};

    struct DirectEmbed(UnitEmbedProvider);

    impl EmbedBackend for DirectEmbed {
        fn embed(&self, request: &EmbedRequest) -> Result<Vec<Vec<f64>>, GatewayError> {
            self.0.embed_once(request).map_err(|e| match e {
                ProviderFailure::Fatal(err) => err,
                ProviderFailure::Retryable(msg) => GatewayError::Provider(msg),
            })
        }
    }

    fn book() -> Book {
        let texts = vec![
            "(1) First paragraph.\n\n(2) Second paragraph.\n\n(3) Third paragraph.".to_string(),
            "(1) Lone opener.\n\n(2) Final closer.\n\n(3) Extra body.\n\n(4) Tail end.".to_string(),
        ];
        let chapters = texts
            .iter()
            .enumerate()
            .map(|(i, text)| BookChapter {
                chapter_number: i + 1,
                event_index: i,
                text: text.clone(),
                paragraph_count: 0,
                secondary_names: Vec::new(),
                iterations_used: 1,
            })
            .collect();
        Book {
            chapters,
            discarded_events: Vec::new(),
            assembled_text: assemble_text(&texts).unwrap(),
        }
    }

    #[test]
    fn paragraph_chunking_counts_and_labels() {
        let chunks = chunk_book(&book(), Granularity::Paragraph).unwrap();
        assert_eq!(chunks.len(), 7);
        assert_eq!(chunks[0].label, "Chapter 1, Paragraph 1");
        assert_eq!(chunks[0].text, "First paragraph.");
        assert_eq!(chunks[6].label, "Chapter 2, Paragraph 4");
    }

    #[test]
    fn chapter_chunking_is_one_per_chapter() {
        let chunks = chunk_book(&book(), Granularity::Chapter).unwrap();
        assert_eq!(chunks.len(), 2);
        assert_eq!(chunks[1].label, "Chapter 2");
        assert!(chunks[1].text.starts_with("(1) Lone opener."));
    }

    #[test]
    fn chunking_is_lossless_over_paragraph_bodies() {
        let b = book();
        let chunks = chunk_book(&b, Granularity::Paragraph).unwrap();
        for chapter in &b.chapters {
            let bodies: Vec<String> = parse_paragraphs(&chapter.text)
                .unwrap()
                .into_iter()
                .map(|(_, body)| body)
                .collect();
            let prefix = format!("Chapter {},", chapter.chapter_number);
            let chunk_bodies: Vec<String> = chunks
                .iter()
                .filter(|c| c.label.starts_with(&prefix))
                .map(|c| c.text.clone())
                .collect();
            assert_eq!(bodies, chunk_bodies);
        }
    }

    #[test]
    fn retrieval_ranks_by_hand_set_cosines() {
        let chunks = vec![
            Chunk { label: "a".into(), text: "a".into(), embedding: Some(vec![0.9, (1.0f64 - 0.81).sqrt()]) },
            Chunk { label: "b".into(), text: "b".into(), embedding: Some(vec![0.5, 0.75f64.sqrt()]) },
            Chunk { label: "c".into(), text: "c".into(), embedding: Some(vec![0.1, 0.99f64.sqrt()]) },
        ];
        struct FixedEmbed;
        impl EmbedBackend for FixedEmbed {
            fn embed(&self, request: &EmbedRequest) -> Result<Vec<Vec<f64>>, GatewayError> {
                Ok(request.texts.iter().map(|_| vec![1.0, 0.0]).collect())
            }
        }
        let top = retrieve_context(&FixedEmbed, &ModelSpec::new("m", "e"), "q", &chunks, 2).unwrap();
        let labels: Vec<&str> = top.iter().map(|c| c.label.as_str()).collect();
        assert_eq!(labels, vec!["a", "b"]);
    }

    #[test]
    fn ties_break_by_position_and_full_k_returns_all() {
        let chunks: Vec<Chunk> = (0..4)
            .map(|i| Chunk {
                label: format!("c{i}"),
                text: "same".into(),
                embedding: Some(vec![1.0, 0.0]),
            })
            .collect();
        struct FixedEmbed;
        impl EmbedBackend for FixedEmbed {
            fn embed(&self, request: &EmbedRequest) -> Result<Vec<Vec<f64>>, GatewayError> {
                Ok(request.texts.iter().map(|_| vec![1.0, 0.0]).collect())
            }
        }
        let top = retrieve_context(&FixedEmbed, &ModelSpec::new("m", "e"), "q", &chunks, 10).unwrap();
        let labels: Vec<&str> = top.iter().map(|c| c.label.as_str()).collect();
        assert_eq!(labels, vec!["c0", "c1", "c2", "c3"]);
    }

    #[test]
    fn deterministic_embedder_retrieval_is_stable() {
        let backend = DirectEmbed(UnitEmbedProvider::new(16));
        let mut chunks = chunk_book(&book(), Granularity::Paragraph).unwrap();
        embed_chunks(&backend, &ModelSpec::new("m", "e"), &mut chunks).unwrap();
        let a = retrieve_context(&backend, &ModelSpec::new("m", "e"), "Final closer?", &chunks, 3).unwrap();
        let b = retrieve_context(&backend, &ModelSpec::new("m", "e"), "Final closer?", &chunks, 3).unwrap();
        let la: Vec<&str> = a.iter().map(|c| c.label.as_str()).collect();
        let lb: Vec<&str> = b.iter().map(|c| c.label.as_str()).collect();
        assert_eq!(la, lb);
    }
}
