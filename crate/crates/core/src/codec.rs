//! JSON instance files. Rationals travel as `"p/q"` strings so a save/load
//! cycle is bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::instance::{AdSlot, Advertiser, Edge, Instance, InstanceError, InstanceMeta, Recipe};
use crate::oracle::OptKind;
use crate::rational::Ratio;

#[derive(Debug, thiserror::Error)]
pub enum CodecError {
    #[error("parse error at line {line}, column {column} (field `{path}`): {message}")]
    Parse {
        line: usize,
        column: usize,
        path: String,
        message: String,
    },
    #[error("invalid instance: {0}")]
    Invalid(#[from] InstanceError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileInstance {
    advertisers: Vec<FileAdvertiser>,
    slots: Vec<FileSlot>,
    #[serde(default)]
    meta: FileMeta,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileAdvertiser {
    id: usize,
    budget: Ratio,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSlot {
    id: usize,
    edges: Vec<FileEdge>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileEdge {
    adv: usize,
    bid: Ratio,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    known_opt: Option<Ratio>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    opt_kind: Option<OptKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    generator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    epsilon: Option<Ratio>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    notes: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    recipe: Option<Recipe>,
}

fn to_file(instance: &Instance) -> FileInstance {
    let m = instance.meta();
    FileInstance {
        advertisers: instance
            .advertisers()
            .iter()
            .map(|a| FileAdvertiser {
                id: a.id,
                budget: Ratio(a.budget.clone()),
            })
            .collect(),
        slots: instance
            .slots()
            .iter()
            .map(|s| FileSlot {
                id: s.id,
                edges: s
                    .edges
                    .iter()
                    .map(|e| FileEdge {
                        adv: e.adv,
                        bid: Ratio(e.bid.clone()),
                    })
                    .collect(),
            })
            .collect(),
        meta: FileMeta {
            k: m.claimed_k,
            d: m.claimed_d,
            known_opt: m.known_opt.clone().map(Ratio),
            opt_kind: m.opt_kind,
            generator: m.generator_tag.clone(),
            epsilon: m.epsilon.clone().map(Ratio),
            notes: m.notes.clone(),
            recipe: m.recipe.clone(),
        },
    }
}

fn from_file(f: FileInstance) -> Result<Instance, InstanceError> {
    let advertisers = f
        .advertisers
        .into_iter()
        .map(|a| Advertiser {
            id: a.id,
            budget: a.budget.0,
        })
        .collect();
    let slots = f
        .slots
        .into_iter()
        .map(|s| AdSlot {
            id: s.id,
            edges: s
                .edges
                .into_iter()
                .map(|e| Edge {
                    adv: e.adv,
                    bid: e.bid.0,
                })
                .collect(),
        })
        .collect();
    let meta = InstanceMeta {
        claimed_k: f.meta.k,
        claimed_d: f.meta.d,
        known_opt: f.meta.known_opt.map(|r| r.0),
        opt_kind: f.meta.opt_kind,
        generator_tag: f.meta.generator,
        epsilon: f.meta.epsilon.map(|r| r.0),
        notes: f.meta.notes,
        recipe: f.meta.recipe,
    };
    Instance::new(advertisers, slots, meta)
}

pub fn to_json(instance: &Instance) -> String {
    serde_json::to_string_pretty(&to_file(instance)).expect("instance serializes")
}

pub fn from_json(text: &str) -> Result<Instance, CodecError> {
    let parsed: FileInstance = parse_json(text)?;
    Ok(from_file(parsed)?)
}

/// Deserializes with the offending field path attached to errors.
pub(crate) fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, CodecError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        CodecError::Parse {
            line: inner.line(),
            column: inner.column(),
            path,
            message: inner.to_string(),
        }
    })
}

pub fn save(instance: &Instance, path: &Path) -> Result<(), CodecError> {
    std::fs::write(path, to_json(instance) + "\n").map_err(|source| CodecError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load(path: &Path) -> Result<Instance, CodecError> {
    let text = read_text(path)?;
    from_json(&text)
}

pub(crate) fn read_text(path: &Path) -> Result<String, CodecError> {
    std::fs::read_to_string(path).map_err(|source| CodecError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Save-then-load.
pub fn codec_roundtrip(instance: &Instance) -> Result<Instance, CodecError> {
    from_json(&to_json(instance))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TieScriptFile {
    choices: Vec<Option<usize>>,
}

/// Per-arrival advertiser choices, `null` where the default rule applies.
pub fn tie_script_to_json(choices: &[Option<usize>]) -> String {
    serde_json::to_string_pretty(&TieScriptFile {
        choices: choices.to_vec(),
    })
    .expect("script serializes")
}

pub fn tie_script_from_json(text: &str) -> Result<Vec<Option<usize>>, CodecError> {
    parse_json::<TieScriptFile>(text).map(|f| f.choices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::InstanceBuilder;
    use crate::rational::{frac, int, pow};

    #[test]
    fn empty_roundtrip() {
        let e = Instance::empty();
        assert_eq!(codec_roundtrip(&e).unwrap(), e);
    }

    #[test]
    fn large_denominators_and_meta_survive() {
        let mut b = InstanceBuilder::new();
        let big = pow(&frac(4, 3), 30);
        let a = b.add_advertiser(big.clone());
        b.add_slot(vec![Edge {
            adv: a,
            bid: &big / int(7),
        }]);
        let meta = InstanceMeta {
            claimed_k: Some(1),
            claimed_d: Some(1),
            known_opt: Some(&big / int(7)),
            opt_kind: Some(OptKind::Exact),
            generator_tag: Some("hand".into()),
            epsilon: Some(frac(1, 1000)),
            notes: Some("n".into()),
            recipe: None,
        };
        let inst = b.build(meta).unwrap();
        assert_eq!(codec_roundtrip(&inst).unwrap(), inst);
    }

    #[test]
    fn bid_over_budget_rejected() {
        let text = r#"{"advertisers":[{"id":0,"budget":"1/1"}],
            "slots":[{"id":0,"edges":[{"adv":0,"bid":"3/2"}]}]}"#;
        assert!(matches!(
            from_json(text),
            Err(CodecError::Invalid(InstanceError::BidOutOfRange { .. }))
        ));
    }

    #[test]
    fn dangling_reference_rejected() {
        let text = r#"{"advertisers":[{"id":0,"budget":"1/1"}],
            "slots":[{"id":0,"edges":[{"adv":3,"bid":"1/2"}]}]}"#;
        assert!(matches!(
            from_json(text),
            Err(CodecError::Invalid(InstanceError::DanglingReference { adv: 3, .. }))
        ));
    }

    #[test]
    fn parse_error_names_field_and_line() {
        let text = "{\"advertisers\":[{\"id\":0,\"budget\":\"1/1\"}],\n\"slots\":[{\"id\":0,\"edges\":[{\"adv\":0,\"bid\":\"0.5\"}]}]}";
        match from_json(text) {
            Err(CodecError::Parse { line, path, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(path, "slots[0].edges[0].bid");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tie_script_roundtrip() {
        let s = vec![Some(3), None, Some(0)];
        assert_eq!(tie_script_from_json(&tie_script_to_json(&s)).unwrap(), s);
    }
}
