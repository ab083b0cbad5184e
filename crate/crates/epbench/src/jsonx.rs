//! Extraction of JSON payloads from model responses.
//!
//! Judge models often wrap their JSON verdict in prose or code fences, so
//! parsers in this crate work on the first balanced top-level JSON object
//! found in the response rather than the raw text.

/// Return the first balanced top-level JSON object in `text`, if any.
///
/// Balancing respects string literals and escapes, so braces inside quoted
/// values do not confuse the scan.
pub fn first_json_object(text: &str) -> Option<&str> {
    let bytes = text.as_bytes();
    let start = text.find('{')?;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (offset, &b) in bytes[start..].iter().enumerate() {
        if escaped {
            escaped = false;
            continue;
        }
        match b {
            b'\\' if in_string => escaped = true,
            b'"' => in_string = !in_string,
            b'{' if !in_string => depth += 1,
            b'}' if !in_string => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..start + offset + 1]);
                }
            }
            _ => {}
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extracts_plain_object() {
        assert_eq!(first_json_object(r#"{"a": 1}"#), Some(r#"{"a": 1}"#));
    }

    #[test]
    fn skips_leading_prose_and_trailing_text() {
        let text = "Sure, here is my verdict:\n{\"1\": true}\nHope that helps.";
        assert_eq!(first_json_object(text), Some("{\"1\": true}"));
    }

    #[test]
    fn handles_braces_inside_strings() {
        let text = r#"{"msg": "a { tricky } value", "n": {"k": 2}}"#;
        assert_eq!(first_json_object(text), Some(text));
    }

    #[test]
    fn none_when_unbalanced_or_absent() {
        assert_eq!(first_json_object("no json here"), None);
        assert_eq!(first_json_object("{\"open\": true"), None);
    }
}
