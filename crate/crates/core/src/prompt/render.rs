//! Text rendering for the two query templates. Rendering is a pure
//! function of the spec: identical specs yield identical bytes, and all
//! number formatting uses a period decimal separator regardless of locale.

use super::{EmbeddingPromptSpec, PromptError, RawPromptSpec};

fn fmt(value: f64, places: usize) -> String {
    format!("{value:.places$}")
}

fn alternatives(class_names: &[String]) -> String {
    class_names.join(" or ")
}

fn quoted_alternatives(class_names: &[String]) -> String {
    class_names
        .iter()
        .map(|c| format!("\"{c}\""))
        .collect::<Vec<_>>()
        .join(" or ")
}

/// Instantiates the raw-reading query: an optional per-class example block
/// followed by the classification sentence. The example sentences keep the
/// source template's wording exactly, including "meter per second square"
/// (singular) against "meters per second square" in the final sentence.
pub fn render_raw_prompt(spec: &RawPromptSpec) -> Result<String, PromptError> {
    spec.validate()?;
    let p = spec.decimal_places;
    let mut out = String::new();
    if spec.examples.iter().any(|g| !g.is_empty()) {
        for (class, group) in spec.class_names.iter().zip(&spec.examples) {
            out.push_str(&format!(
                "Given the following triaxial accelerometer data in meter per second \
                 square coming from {} corresponds to {} : \n",
                spec.body_position_text, class
            ));
            for &[x, y, z] in group {
                out.push_str(&format!(
                    "[{}  {}  {}]\n",
                    fmt(x, p),
                    fmt(y, p),
                    fmt(z, p)
                ));
            }
        }
    }
    let metric_clause = match spec.metric {
        Some(metric) => format!(
            " considering the minimum distance to the example triaxial accelerometer \
             readings provided that the distance metric chosen is {} distance",
            metric.name()
        ),
        None => String::new(),
    };
    let [qx, qy, qz] = spec.query;
    out.push_str(&format!(
        "Classify the following triaxial accelerometer data in meters per second \
         square as either {alts} provided that this data is coming from {body}: \
         [{x} {y} {z}]{metric_clause}. Answer in one word, either {alts}.",
        alts = alternatives(&spec.class_names),
        body = spec.body_position_text,
        x = fmt(qx, p),
        y = fmt(qy, p),
        z = fmt(qz, p),
    ));
    Ok(out)
}

fn embedding_matrix(examples: &[Vec<f64>], places: usize) -> String {
    let vectors: Vec<String> = examples
        .iter()
        .map(|e| {
            let vals: Vec<String> = e.iter().map(|&v| fmt(v, places)).collect();
            format!("[{}]", vals.join(" "))
        })
        .collect();
    format!("[{}]", vectors.join(" "))
}

/// Instantiates the embedding query. Class blocks appear in spec order,
/// the last joined with "and"; the closing block's verb becomes
/// "corresponds" once there are three or more classes, matching how the
/// source template words its final clause.
pub fn render_embedding_prompt(spec: &EmbeddingPromptSpec) -> Result<String, PromptError> {
    spec.validate()?;
    let p = spec.decimal_places;
    let n = spec.class_names.len();
    let mut blocks = Vec::with_capacity(n);
    for (c, (class, group)) in spec.class_names.iter().zip(&spec.examples).enumerate() {
        let article = if c == 0 { "The" } else { "the" };
        let verb = if c == n - 1 && n >= 3 {
            "corresponds"
        } else {
            "correspond"
        };
        blocks.push(format!(
            "{article} following given embeddings {verb} to \"{class}\": {matrix}",
            matrix = embedding_matrix(group, p)
        ));
    }
    let joined = if n == 2 {
        format!("{} and {}", blocks[0], blocks[1])
    } else {
        format!(
            "{} and {}",
            blocks[..n - 1].join(", "),
            blocks[n - 1]
        )
    };
    let query_vals: Vec<String> = spec.query.iter().map(|&v| fmt(v, p)).collect();
    let suffix = if spec.answer_in_one_word {
        " Answer in one word."
    } else {
        ""
    };
    Ok(format!(
        "{joined}; classify the embedding [{query}] as either {alts} considering the \
         minimum distance to the example embeddings provided that the distance metric \
         chosen is {metric} distance.{suffix}",
        query = query_vals.join(" "),
        alts = quoted_alternatives(&spec.class_names),
        metric = spec.metric.name(),
    ))
}

#[cfg(test)]
mod tests {
    use super::super::DEFAULT_DECIMAL_PLACES;
    use super::*;
    use crate::numeric::DistanceMetric;

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    fn raw_fixture(with_examples: bool, metric: Option<DistanceMetric>) -> RawPromptSpec {
        RawPromptSpec {
            class_names: names(&["walking", "running"]),
            examples: if with_examples {
                vec![
                    vec![[0.1, 0.2, 0.3], [0.4, 0.5, 0.6]],
                    vec![[1.1, 1.2, 1.3]],
                ]
            } else {
                vec![vec![], vec![]]
            },
            query: [9.81, -0.25, 3.5],
            body_position_text: "the wearable worn by the user on their dominant hand".into(),
            metric,
            decimal_places: 4,
        }
    }

    #[test]
    fn zero_shot_raw_prompt_has_single_sentence() {
        let text = render_raw_prompt(&raw_fixture(false, None)).unwrap();
        assert!(text.starts_with("Classify the following triaxial accelerometer data"));
        assert!(text.contains("in meters per second square as either walking or running"));
        assert!(text.contains(
            "provided that this data is coming from the wearable worn by the user on \
             their dominant hand: [9.8100 -0.2500 3.5000]."
        ));
        assert!(text.ends_with("Answer in one word, either walking or running."));
        assert!(!text.contains("Given the following"));
    }

    #[test]
    fn examples_prepend_per_class_blocks() {
        let text = render_raw_prompt(&raw_fixture(true, None)).unwrap();
        assert!(text.starts_with(
            "Given the following triaxial accelerometer data in meter per second square"
        ));
        assert!(text.contains("corresponds to walking : \n[0.1000  0.2000  0.3000]\n"));
        assert!(text.contains("[0.4000  0.5000  0.6000]\n"));
        assert!(text.contains("corresponds to running : \n[1.1000  1.2000  1.3000]\n"));
        let classify_at = text.find("Classify the following").unwrap();
        let running_block = text.find("corresponds to running").unwrap();
        assert!(running_block < classify_at);
    }

    #[test]
    fn raw_metric_clause_is_optional() {
        let without = render_raw_prompt(&raw_fixture(false, None)).unwrap();
        assert!(!without.contains("distance metric"));
        let with = render_raw_prompt(&raw_fixture(false, Some(DistanceMetric::Manhattan)))
            .unwrap();
        assert!(with.contains(
            "considering the minimum distance to the example triaxial accelerometer \
             readings provided that the distance metric chosen is manhattan distance. \
             Answer in one word"
        ));
    }

    fn embedding_fixture(n: usize) -> EmbeddingPromptSpec {
        let class_names: Vec<String> = ["walking upstairs", "jogging", "sitting"]
            [..n]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let examples = (0..n)
            .map(|c| {
                vec![
                    vec![c as f64 + 0.5, -1.25],
                    vec![10.0 * c as f64, 2.0],
                ]
            })
            .collect();
        EmbeddingPromptSpec {
            class_names,
            examples,
            query: vec![14.239516, 7.1703763],
            metric: DistanceMetric::Euclidean,
            decimal_places: DEFAULT_DECIMAL_PLACES,
            answer_in_one_word: true,
        }
    }

    #[test]
    fn two_class_embedding_prompt_structure() {
        let text = render_embedding_prompt(&embedding_fixture(2)).unwrap();
        assert!(text.starts_with(
            "The following given embeddings correspond to \"walking upstairs\": \
             [[0.5000000 -1.2500000] [0.0000000 2.0000000]] and the following given \
             embeddings correspond to \"jogging\":"
        ));
        assert!(text.contains(
            "; classify the embedding [14.2395160 7.1703763] as either \
             \"walking upstairs\" or \"jogging\" considering the minimum distance to \
             the example embeddings provided that the distance metric chosen is \
             euclidean distance."
        ));
        assert!(text.ends_with(" Answer in one word."));
        // Two classes keep the plural verb in both blocks.
        assert!(!text.contains("corresponds"));
    }

    #[test]
    fn three_class_final_block_changes_verb() {
        let text = render_embedding_prompt(&embedding_fixture(3)).unwrap();
        assert_eq!(text.matches("correspond to").count(), 2);
        assert!(text.contains(
            "and the following given embeddings corresponds to \"sitting\":"
        ));
        assert!(text.contains(
            "as either \"walking upstairs\" or \"jogging\" or \"sitting\" considering"
        ));
        // Blocks before the final one are comma-separated.
        assert!(text.contains("2.0000000]], the following given embeddings correspond"));
    }

    #[test]
    fn answer_directive_is_toggleable() {
        let mut spec = embedding_fixture(2);
        spec.answer_in_one_word = false;
        let text = render_embedding_prompt(&spec).unwrap();
        assert!(text.ends_with("euclidean distance."));
    }

    #[test]
    fn rendering_is_pure() {
        let spec = embedding_fixture(3);
        assert_eq!(
            render_embedding_prompt(&spec).unwrap(),
            render_embedding_prompt(&spec).unwrap()
        );
        let raw = raw_fixture(true, Some(DistanceMetric::Cosine));
        assert_eq!(
            render_raw_prompt(&raw).unwrap(),
            render_raw_prompt(&raw).unwrap()
        );
    }

    #[test]
    fn all_values_appear_verbatim() {
        let spec = embedding_fixture(3);
        let text = render_embedding_prompt(&spec).unwrap();
        for value in spec.examples.iter().flatten().flatten().chain(&spec.query) {
            let formatted = format!("{value:.7}");
            assert!(text.contains(&formatted), "missing {formatted}");
        }
    }
}
