//! Symbolic instructions and user "styles".
//!
//! An instruction is a sequence of landmark cues, one per node of the
//! ground-truth shortest path. A style rewrites landmark tokens into
//! style-specific synonyms, which is the linguistic shift the adaptation
//! loop has to absorb.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envgraph::{astar_path, EnvGraph, NodeIdx};
use crate::error::{Error, Result};
use crate::seeds::{derive_seed, rng_for};

/// Number of synonym variants each landmark token can be rewritten into.
pub const SYNONYM_VARIANTS: usize = 3;

/// Default accepted ground-truth path lengths, in nodes.
pub const DEFAULT_LEN_RANGE: (usize, usize) = (5, 7);

const MAX_ATTEMPTS: usize = 5000;

pub fn synonym_token(landmark: &str, variant: usize) -> String {
    format!("{landmark}~{variant}")
}

/// Every token a style can emit for `base_vocab`: the base tokens plus all
/// synonym variants, sorted.
pub fn instruction_vocab(base_vocab: &[String]) -> Vec<String> {
    let mut out: Vec<String> = base_vocab.to_vec();
    for lm in base_vocab {
        out.extend((1..=SYNONYM_VARIANTS).map(|k| synonym_token(lm, k)));
    }
    out.sort();
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleMap {
    pub id: String,
    pub seed: u64,
    pub synonym_rate: f64,
    pub map: BTreeMap<String, String>,
}

impl StyleMap {
    pub fn translate(&self, landmark: &str) -> Option<&str> {
        self.map.get(landmark).map(String::as_str)
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().all(|(k, v)| k == v)
    }
}

/// Builds a style over `base_vocab`: each landmark independently maps to one
/// of its synonym variants with probability `synonym_rate`, else to itself.
pub fn make_style(id: impl Into<String>, seed: u64, base_vocab: &[String], synonym_rate: f64) -> Result<StyleMap> {
    if base_vocab.is_empty() {
        return Err(Error::InvalidArgument("base vocabulary is empty".into()));
    }
    if !(0.0..=1.0).contains(&synonym_rate) {
        return Err(Error::InvalidArgument(format!(
            "synonym_rate {synonym_rate} outside [0, 1]"
        )));
    }
    if let Some(bad) = base_vocab.iter().find(|t| t.contains('~')) {
        return Err(Error::InvalidArgument(format!(
            "base token `{bad}` collides with synonym syntax"
        )));
    }
    let mut sorted = base_vocab.to_vec();
    sorted.sort();
    sorted.dedup();
    let mut rng = rng_for(seed, "style");
    let map = sorted
        .into_iter()
        .map(|lm| {
            // Draw both values every time so the stream does not depend on the rate.
            let coin: f64 = rng.gen();
            let variant = rng.gen_range(1..=SYNONYM_VARIANTS);
            let token = if coin < synonym_rate {
                synonym_token(&lm, variant)
            } else {
                lm.clone()
            };
            (lm, token)
        })
        .collect();
    Ok(StyleMap {
        id: id.into(),
        seed,
        synonym_rate,
        map,
    })
}

/// The identity ("Basic") style.
pub fn basic_style(base_vocab: &[String]) -> StyleMap {
    make_style("basic", 0, base_vocab, 0.0).expect("non-empty vocabulary")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    pub id: String,
    pub style: String,
    pub tokens: Vec<String>,
    pub start: String,
    pub goal: String,
    pub gt_path: Vec<String>,
}

impl Instruction {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Samples a start/goal pair whose shortest path has a node count inside
/// `len_range` and verbalizes it under `style`.
pub fn generate_instruction(
    g: &EnvGraph,
    style: &StyleMap,
    seed: u64,
    len_range: (usize, usize),
) -> Result<Instruction> {
    let (min, max) = len_range;
    if min < 2 || min > max {
        return Err(Error::InvalidArgument(format!("invalid len_range [{min}, {max}]")));
    }
    let mut rng = rng_for(seed, "instruction");
    for _ in 0..MAX_ATTEMPTS {
        let start = rng.gen_range(0..g.len());
        let goal = rng.gen_range(0..g.len());
        if start == goal {
            continue;
        }
        let path = astar_path(g, start, goal)?.expect("environment is connected");
        if !(min..=max).contains(&path.len()) {
            continue;
        }
        let tokens = verbalize(g, style, &path, &mut rng)?;
        return Ok(Instruction {
            id: format!("{}-{seed:016x}", style.id),
            style: style.id.clone(),
            tokens,
            start: g.id(start).to_string(),
            goal: g.id(goal).to_string(),
            gt_path: g.ids_of(&path),
        });
    }
    Err(Error::GenerationExhausted {
        min,
        max,
        attempts: MAX_ATTEMPTS,
    })
}

fn verbalize(g: &EnvGraph, style: &StyleMap, path: &[NodeIdx], rng: &mut impl Rng) -> Result<Vec<String>> {
    path.iter()
        .map(|&u| {
            let lm = g.node(u).landmarks.choose(rng).expect("landmarks are non-empty");
            style
                .translate(lm)
                .map(str::to_string)
                .ok_or_else(|| Error::InvalidArgument(format!("style `{}` has no entry for `{lm}`", style.id)))
        })
        .collect()
}

/// `count` instructions with ids `{style}/{split}/{k}`; each draws from its own
/// seed stream so corpora of different sizes share prefixes.
pub fn generate_corpus(
    g: &EnvGraph,
    style: &StyleMap,
    seed: u64,
    split: &str,
    count: usize,
    len_range: (usize, usize),
) -> Result<Vec<Instruction>> {
    (0..count)
        .map(|k| {
            let mut instr = generate_instruction(g, style, derive_seed(seed, &format!("{split}/{k}")), len_range)?;
            instr.id = format!("{}/{split}/{k:04}", style.id);
            Ok(instr)
        })
        .collect()
}
