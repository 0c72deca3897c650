//! Prompt assembly for the zero-shot methods.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::catalog::{AnswerKind, QueryInstance};
use crate::compress::{tdtr_compress, CompressionConfig};
use crate::model::DatasetBundle;
use crate::scoring::Method;
use crate::semantics::{render_events, to_semantic_events, SemanticConfig};
use crate::table;

pub const PREAMBLE: &str = "You are a maritime data analyst. The files below describe the AIS traffic of a set of \
ships in Danish waters during a single day (2024-11-20). Times are HH:MM, speeds (sog) are in knots, \
dimensions in meters, annual_co2 in metric tonnes and co2_per_nm in kg of CO2 per nautical mile. \
Answer the question using only this data.";

pub const DEFAULT_MAX_CONTEXT_TOKENS: usize = 2_000_000;

/// Documented heuristic: one token per four characters, rounded up.
pub fn estimate_tokens(chars: usize) -> usize {
    chars.div_ceil(4)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataBlock {
    pub label: &'static str,
    pub text: Arc<str>,
}

/// The data blocks for one method and one vessel subset, shared by every
/// question asked about that subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptData {
    pub method: Method,
    pub blocks: Vec<DataBlock>,
}

impl PromptData {
    fn from_parts(method: Method, bundle: &DatasetBundle, middle: DataBlock) -> Self {
        let blocks = alloc::vec![
            DataBlock { label: "static.csv", text: table::render_static(&bundle.statics).into() },
            middle,
            DataBlock { label: "ports.csv", text: table::render_ports(bundle).into() },
        ];
        Self { method, blocks }
    }

    /// Uncompressed resampled trajectories.
    pub fn raw(bundle: &DatasetBundle) -> Self {
        let dynamic = table::render_dynamic(&bundle.trajectories);
        Self::from_parts(Method::Zsa1, bundle, DataBlock { label: "dynamic.csv", text: dynamic.into() })
    }

    pub fn compressed(bundle: &DatasetBundle, cfg: CompressionConfig) -> Self {
        let compressed: Vec<_> = bundle.trajectories.iter().map(|t| tdtr_compress(t, cfg)).collect();
        let dynamic = table::render_dynamic(&compressed);
        Self::from_parts(Method::Zsa2, bundle, DataBlock { label: "dynamic.csv", text: dynamic.into() })
    }

    /// Per-vessel semantic event listings, one vessel after another.
    pub fn semantic(bundle: &DatasetBundle, cfg: &SemanticConfig) -> Self {
        let mut text = String::new();
        for (t, s) in bundle.trajectories.iter().zip(&bundle.statics) {
            if !text.is_empty() {
                text.push('\n');
            }
            text.push_str(&render_events(&to_semantic_events(&t.points, cfg), s));
        }
        Self::from_parts(Method::Zsa3, bundle, DataBlock { label: "semantic_events.txt", text: text.into() })
    }
}

/// The closing instruction that pins the answer format.
pub fn answer_instruction(kind: AnswerKind, unit: &str) -> String {
    match kind {
        AnswerKind::Numeric => match unit {
            "" => String::from("Answer with a single number."),
            "count" => String::from("Answer with a single whole number."),
            u => format!("Answer with a single value in {}.", unit_words(u)),
        },
        AnswerKind::Text => match unit {
            "mmsi" => String::from("Answer with the MMSI of the ship only."),
            "port" => String::from("Answer with the port name only."),
            _ => String::from("Answer with the name only."),
        },
        AnswerKind::EntitySet => String::from("Answer with the list of MMSIs, or \"none\" if there are none."),
        AnswerKind::Boolean => String::from("Answer yes or no."),
        AnswerKind::Location => String::from("Answer with the latitude and longitude in decimal degrees."),
    }
}

pub fn unit_words(unit: &str) -> &str {
    match unit {
        "km" => "kilometers (km)",
        "min" => "minutes",
        "kn" => "knots",
        "km/h" => "kilometers per hour (km/h)",
        "t" => "metric tonnes (t)",
        "kg" => "kilograms of CO2 (kg)",
        "kg/nm" => "kilograms of CO2 per nautical mile (kg/nm)",
        "m3" => "cubic meters (m3)",
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub preamble: &'static str,
    pub blocks: Vec<DataBlock>,
    pub question: String,
    pub instruction: String,
    pub token_estimate: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("context overflow at block {block}: about {tokens} tokens against a limit of {limit}")]
    ContextOverflow { block: String, tokens: usize, limit: usize },
    #[error("method {0:?} does not prompt with data blocks")]
    NotZeroShot(Method),
}

impl Prompt {
    /// Pieces in rendering order, each with the label used in overflow errors.
    fn pieces(&self) -> Vec<(&str, String)> {
        let mut v = alloc::vec![("preamble", format!("{}\n\n", self.preamble))];
        for b in &self.blocks {
            v.push((b.label, format!("### {}\n", b.label)));
            v.push((b.label, String::from(&*b.text)));
            v.push((b.label, String::from("\n")));
        }
        v.push(("question", format!("Question: {}\n{}\n", self.question, self.instruction)));
        v
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (_, p) in self.pieces() {
            out.push_str(&p);
        }
        out
    }

    /// Feeds the rendered text to `sink` piece by piece, without building
    /// the whole string.
    pub fn write_to(&self, mut sink: impl FnMut(&str)) {
        sink(self.preamble);
        sink("\n\n");
        for b in &self.blocks {
            sink("### ");
            sink(b.label);
            sink("\n");
            sink(&b.text);
            sink("\n");
        }
        sink("Question: ");
        sink(&self.question);
        sink("\n");
        sink(&self.instruction);
        sink("\n");
    }

    pub fn char_len(&self) -> usize {
        let mut n = 0;
        self.write_to(|s| n += s.chars().count());
        n
    }
}

/// Data blocks in order, then the question and its answer instruction.
/// Fails when the estimate exceeds `max_tokens`, naming the block where the
/// running total first crossed it.
pub fn build_prompt(data: &PromptData, instance: &QueryInstance, max_tokens: usize) -> Result<Prompt, PromptError> {
    if data.method == Method::Nlidb {
        return Err(PromptError::NotZeroShot(data.method));
    }
    let mut prompt = Prompt {
        preamble: PREAMBLE,
        blocks: data.blocks.clone(),
        question: instance.question.clone(),
        instruction: answer_instruction(instance.spec.kind, &instance.spec.unit),
        token_estimate: 0,
    };
    let mut chars = 0;
    for (label, text) in prompt.pieces() {
        chars += text.chars().count();
        if estimate_tokens(chars) > max_tokens {
            return Err(PromptError::ContextOverflow {
                block: String::from(label),
                tokens: estimate_tokens(prompt.char_len()),
                limit: max_tokens,
            });
        }
    }
    prompt.token_estimate = estimate_tokens(chars);
    Ok(prompt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{instantiate, Applicability, Bindings, Category, OracleMode, Params, QueryId, QuerySpec};
    use crate::geo::{BoundingBox, GeoPoint, Zone};
    use crate::model::{Mmsi, Port, ShipStatic, TimeOfDay, TrackPoint, Trajectory};
    use alloc::string::ToString;
    use alloc::vec;

    fn bundle(n: u32) -> DatasetBundle {
        let trajectories = (0..n)
            .map(|i| {
                let pts = (0..100u16)
                    .map(|k| {
                        TrackPoint::new(
                            TimeOfDay::from_minutes(k * 5).unwrap(),
                            GeoPoint { lat: 56.0 + f64::from(k) * 0.001, lon: 10.0 + f64::from(i) * 0.01 },
                            7.5,
                        )
                    })
                    .collect();
                Trajectory::new(Mmsi::new(219000000 + i).unwrap(), pts)
            })
            .collect();
        let statics = (0..n).map(|i| ShipStatic::new(Mmsi::new(219000000 + i).unwrap())).collect();
        let ports = vec![Port::new("Aarhus", GeoPoint { lat: 56.15, lon: 10.22 }, 2000.0)];
        DatasetBundle::assemble(trajectories, statics, ports).0
    }

    fn q4() -> QueryInstance {
        let spec = QuerySpec {
            id: QueryId::new(4).unwrap(),
            category: Category::Attribute,
            template: "How many ships are in the dataset?".to_string(),
            kind: AnswerKind::Numeric,
            unit: "count".to_string(),
            oracle_mode: OracleMode::Computed,
            applicability: Applicability::default(),
            params: Params::default(),
            tolerance: 0.0,
        };
        instantiate(&spec, Bindings::default(), 5).unwrap()
    }

    #[test]
    fn raw_prompt_has_three_blocks_in_order() {
        let p = build_prompt(&PromptData::raw(&bundle(5)), &q4(), DEFAULT_MAX_CONTEXT_TOKENS).unwrap();
        let labels: Vec<&str> = p.blocks.iter().map(|b| b.label).collect();
        assert_eq!(labels, ["static.csv", "dynamic.csv", "ports.csv"]);
        let text = p.render();
        assert!(text.ends_with("Question: How many ships are in the dataset?\nAnswer with a single whole number.\n"));
        assert_eq!(p.token_estimate, estimate_tokens(text.chars().count()));
    }

    #[test]
    fn prompt_is_byte_stable() {
        let b = bundle(5);
        let a = build_prompt(&PromptData::raw(&b), &q4(), DEFAULT_MAX_CONTEXT_TOKENS).unwrap().render();
        let c = build_prompt(&PromptData::raw(&b), &q4(), DEFAULT_MAX_CONTEXT_TOKENS).unwrap().render();
        assert_eq!(a, c);
        let mut streamed = String::new();
        build_prompt(&PromptData::raw(&b), &q4(), DEFAULT_MAX_CONTEXT_TOKENS).unwrap().write_to(|s| streamed.push_str(s));
        assert_eq!(streamed, a);
    }

    #[test]
    fn overflow_names_the_dynamic_block() {
        let err = build_prompt(&PromptData::raw(&bundle(300)), &q4(), 4000).unwrap_err();
        match err {
            PromptError::ContextOverflow { block, tokens, limit } => {
                assert_eq!(block, "dynamic.csv");
                assert_eq!(limit, 4000);
                assert!(tokens > 4000);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semantic_prompt_swaps_the_middle_block() {
        let zones = vec![Zone::new("Kattegat", BoundingBox::new(55.5, 9.5, 57.5, 12.0).unwrap(), 1)];
        let cfg = SemanticConfig::new(zones, 500.0).unwrap();
        let p = build_prompt(&PromptData::semantic(&bundle(2), &cfg), &q4(), DEFAULT_MAX_CONTEXT_TOKENS).unwrap();
        assert_eq!(p.blocks[1].label, "semantic_events.txt");
        assert!(p.blocks[1].text.starts_with("Vessel 219000000:\n"));
    }

    #[test]
    fn tokens_grow_with_size() {
        let est: Vec<usize> = [1, 2, 5, 9]
            .iter()
            .map(|&n| build_prompt(&PromptData::raw(&bundle(n)), &q4(), DEFAULT_MAX_CONTEXT_TOKENS).unwrap().token_estimate)
            .collect();
        assert!(est.windows(2).all(|w| w[0] <= w[1]));
    }
}
