use super::protocol::{ErrorCode, ResponseMetadata, ToolResponse};

/// Max sentences returned by the mock summarizer.
pub const DEFAULT_SUMMARY_SENTENCES: usize = 5;

/// Mock extractive summarizer tool.
///
/// Returns the sentences of `content` containing at least one keyword of
/// `intent`, in document order, capped at `max_sentences`. The original
/// question is withheld unless `include_question` is set, in which case
/// `question` must be supplied.
pub fn summarize_tool(
    content: &str,
    intent: &str,
    include_question: bool,
    question: Option<&str>,
    max_sentences: usize,
) -> ToolResponse {
    if intent.trim().is_empty() {
        return ToolResponse::failure(
            ErrorCode::InvalidParams,
            "invalid_params",
            "intent must be non-empty",
            ResponseMetadata::default(),
        );
    }
    if include_question && question.is_none() {
        return ToolResponse::failure(
            ErrorCode::InvalidParams,
            "invalid_params",
            "include_question set but no question provided",
            ResponseMetadata::default(),
        );
    }

    let keywords: Vec<String> = intent
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect();

    let matched: Vec<&str> = split_sentences(content)
        .into_iter()
        .filter(|sentence| {
            let lower = sentence.to_lowercase();
            keywords.iter().any(|kw| lower.contains(kw))
        })
        .collect();
    let matched_count = matched.len();

    let mut summary = matched
        .into_iter()
        .take(max_sentences)
        .collect::<Vec<_>>()
        .join(" ");
    if include_question {
        if let Some(q) = question {
            summary = format!("question: {q}\n{summary}");
        }
    }

    ToolResponse::success(
        summary,
        ResponseMetadata {
            matched: Some(matched_count),
            ..Default::default()
        },
    )
}

/// Split on sentence terminators, keeping the terminator with its sentence.
fn split_sentences(text: &str) -> Vec<&str> {
    let mut sentences = Vec::new();
    let mut start = 0;
    for (i, c) in text.char_indices() {
        if matches!(c, '.' | '!' | '?') {
            let end = i + c.len_utf8();
            let s = text[start..end].trim();
            if !s.is_empty() {
                sentences.push(s);
            }
            start = end;
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        sentences.push(tail);
    }
    sentences
}
