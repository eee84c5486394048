//! Free-text response interpretation: find which configured class the
//! backend named, or recognize a refusal.

use serde::{Deserialize, Serialize};

/// Refusal wordings observed from hosted models on this task.
pub const DEFAULT_REFUSAL_PHRASES: &[&str] = &[
    "as an AI",
    "not able to classify",
    "not possible to accurately determine",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "class", rename_all = "lowercase")]
pub enum ResponseOutcome {
    Label(String),
    Refusal,
    Ambiguous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub outcome: ResponseOutcome,
    /// The text span that decided the outcome (class mention or refusal
    /// phrase); absent for ambiguous responses.
    pub matched_span: Option<String>,
    pub raw_text: String,
}

/// Lowercases and maps underscores to spaces so "walking_upstairs" and
/// "Walking upstairs" compare equal.
fn normalize(text: &str) -> String {
    text.chars()
        .map(|c| match c {
            '_' => ' ',
            other => other.to_ascii_lowercase(),
        })
        .collect()
}

fn is_word_char(c: u8) -> bool {
    c.is_ascii_alphanumeric()
}

/// Byte ranges where `needle` occurs in `haystack` on word boundaries.
fn word_occurrences(haystack: &str, needle: &str) -> Vec<(usize, usize)> {
    let hay = haystack.as_bytes();
    let mut found = Vec::new();
    let mut from = 0;
    while let Some(pos) = haystack[from..].find(needle) {
        let start = from + pos;
        let end = start + needle.len();
        let left_ok = start == 0 || !is_word_char(hay[start - 1]);
        let right_ok = end == hay.len() || !is_word_char(hay[end]);
        if left_ok && right_ok {
            found.push((start, end));
        }
        from = start + 1;
    }
    found
}

/// Case-insensitive class-name search with underscore/space equivalence.
/// A class mention nested inside a longer class's mention (e.g. "walking"
/// inside "walking upstairs") does not count. Exactly one distinct class
/// gives a label; otherwise refusal phrases are checked; anything else is
/// ambiguous.
pub fn parse_response_with(
    text: &str,
    class_names: &[String],
    refusal_phrases: &[&str],
) -> ParsedResponse {
    let normalized = normalize(text);
    // Longest names first so their matches can suppress nested shorter ones.
    let mut by_length: Vec<(usize, String)> = class_names
        .iter()
        .enumerate()
        .map(|(i, c)| (i, normalize(c)))
        .collect();
    by_length.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(&b.0)));

    let mut claimed: Vec<(usize, usize)> = Vec::new();
    let mut matched: Vec<(usize, (usize, usize))> = Vec::new();
    for (class_idx, needle) in &by_length {
        if needle.is_empty() {
            continue;
        }
        for (start, end) in word_occurrences(&normalized, needle) {
            let nested = claimed
                .iter()
                .any(|&(cs, ce)| cs <= start && end <= ce && (cs, ce) != (start, end));
            if !nested {
                matched.push((*class_idx, (start, end)));
            }
        }
        claimed.extend(word_occurrences(&normalized, needle));
    }

    let mut distinct: Vec<usize> = matched.iter().map(|&(c, _)| c).collect();
    distinct.sort_unstable();
    distinct.dedup();

    if distinct.len() == 1 {
        let class_idx = distinct[0];
        let span = matched
            .iter()
            .filter(|&&(c, _)| c == class_idx)
            .map(|&(_, range)| range)
            .min()
            .expect("at least one match");
        return ParsedResponse {
            outcome: ResponseOutcome::Label(class_names[class_idx].clone()),
            matched_span: Some(text[span.0..span.1].to_string()),
            raw_text: text.to_string(),
        };
    }

    for phrase in refusal_phrases {
        let needle = normalize(phrase);
        if let Some(pos) = normalized.find(&needle) {
            return ParsedResponse {
                outcome: ResponseOutcome::Refusal,
                matched_span: Some(text[pos..pos + needle.len()].to_string()),
                raw_text: text.to_string(),
            };
        }
    }

    ParsedResponse {
        outcome: ResponseOutcome::Ambiguous,
        matched_span: None,
        raw_text: text.to_string(),
    }
}

pub fn parse_response(text: &str, class_names: &[String]) -> ParsedResponse {
    parse_response_with(text, class_names, DEFAULT_REFUSAL_PHRASES)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn single_word_label_round_trips() {
        let classes = names(&["walking", "running"]);
        let parsed = parse_response("walking", &classes);
        assert_eq!(parsed.outcome, ResponseOutcome::Label("walking".into()));
        assert_eq!(parsed.matched_span.as_deref(), Some("walking"));
    }

    #[test]
    fn underscores_and_case_are_interchangeable() {
        let classes = names(&["walking upstairs", "jogging"]);
        let text = "The embedding [ 14.239516 , 7.1703763 ] is classified as \
                    \"walking_upstairs\" based on the minimum distance to the example \
                    embeddings, using the Euclidean distance metric.";
        let parsed = parse_response(text, &classes);
        assert_eq!(
            parsed.outcome,
            ResponseOutcome::Label("walking upstairs".into())
        );
        assert_eq!(parsed.matched_span.as_deref(), Some("walking_upstairs"));
    }

    #[test]
    fn nested_class_mention_is_suppressed() {
        let classes = names(&["walking", "walking upstairs"]);
        let parsed = parse_response("classified as walking upstairs", &classes);
        assert_eq!(
            parsed.outcome,
            ResponseOutcome::Label("walking upstairs".into())
        );
        // The bare class still matches when it stands alone.
        let parsed = parse_response("definitely walking here", &classes);
        assert_eq!(parsed.outcome, ResponseOutcome::Label("walking".into()));
    }

    #[test]
    fn refusal_phrases_are_detected() {
        let classes = names(&["walking", "running"]);
        let text = "Sorry, as an AI model, I'm not able to classify real-time \
                    activities based on raw accelerometer data instantly.";
        let parsed = parse_response(text, &classes);
        assert_eq!(parsed.outcome, ResponseOutcome::Refusal);
        assert_eq!(parsed.matched_span.as_deref(), Some("as an AI"));
    }

    /// A hedged answer that names both classes and a refusal wording counts
    /// as a refusal, not a label.
    #[test]
    fn hedged_multi_class_answer_is_refusal() {
        let classes = names(&["walking", "running"]);
        let text = "Based on the provided data, it is not possible to accurately \
                    determine the activity (running or walking) directly, although we \
                    might say the data could be closer to 'walking'.";
        let parsed = parse_response(text, &classes);
        assert_eq!(parsed.outcome, ResponseOutcome::Refusal);
    }

    #[test]
    fn multiple_distinct_classes_are_ambiguous() {
        let classes = names(&["walking", "running"]);
        let parsed = parse_response("either walking or running fits", &classes);
        assert_eq!(parsed.outcome, ResponseOutcome::Ambiguous);
        assert_eq!(parsed.matched_span, None);
    }

    #[test]
    fn no_class_mention_is_ambiguous() {
        let classes = names(&["walking", "running"]);
        let parsed = parse_response("The data looks like some activity.", &classes);
        assert_eq!(parsed.outcome, ResponseOutcome::Ambiguous);
    }

    #[test]
    fn word_boundaries_prevent_substring_hits() {
        let classes = names(&["run", "walk"]);
        let parsed = parse_response("the runner kept walking", &classes);
        // "run" inside "runner" does not count; "walk" inside "walking"
        // does not count either.
        assert_eq!(parsed.outcome, ResponseOutcome::Ambiguous);
        let parsed = parse_response("they walk daily", &classes);
        assert_eq!(parsed.outcome, ResponseOutcome::Label("walk".into()));
    }

    #[test]
    fn repeated_mentions_of_one_class_still_label() {
        let classes = names(&["jogging", "sitting"]);
        let parsed = parse_response("jogging, clearly jogging", &classes);
        assert_eq!(parsed.outcome, ResponseOutcome::Label("jogging".into()));
    }

    #[test]
    fn custom_refusal_phrases() {
        let classes = names(&["a", "b"]);
        let parsed = parse_response_with("cannot help with that", &classes, &["cannot help"]);
        assert_eq!(parsed.outcome, ResponseOutcome::Refusal);
    }
}
