//! Knowledge base, retrieval, semantic slot generation and parsing, and
//! instantiation of meta-scenarios from the parsed slots.

mod generate;
mod instantiate;
mod kb;
mod parse;
mod retrieve;
mod scenic;

use thiserror::Error;

pub use generate::{
    generate_semantics, parse_reply, reply_text, typology_options, GeneratorBackend, RemoteConfig, SemanticTuple,
    INSTRUCTION_PROMPT, TEMPLATE_OFFSETS, TOKEN_ENV,
};
pub use instantiate::{crossing_arc, instantiate_meta, instantiate_meta_with, InstantiateParams, TRIGGER_DISTANCE};
pub use kb::{bundled_kb, parse_kb, KnowledgeEntry, Placement, Source, Typology};
pub use parse::{parse_offset, parse_semantics, parse_semantics_with, Slot, Structured, SynonymTable, DEFAULT_OFFSET};
pub use retrieve::{retrieve, retrieve_context, score_entries, tokenize};
pub use scenic::{emit_scenic, emit_with, scenic_slots, unfilled_slots, SCENIC_TEMPLATE};

use crate::model::MetaScenario;
use crate::roads::RoadLibrary;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KnowledgeError {
    #[error("knowledge file line {line}: {msg}")]
    Kb { line: usize, msg: String },
    #[error("cannot map {slot} `{value}`; nearest: {}", nearest.join(", "))]
    Parse { slot: &'static str, value: String, nearest: Vec<String> },
    #[error("reply is missing slot {0}")]
    MissingSlot(&'static str),
    #[error("generator backend: {0}")]
    Backend(String),
    #[error("cannot instantiate: {0}")]
    Instantiate(String),
    #[error("domain error: {0}")]
    Domain(String),
}

/// Named base prompts, one per scenario family in the shipped suite.
pub const BASE_PROMPTS: [(&str, &str); 8] = [
    ("straight-obstacle", "On a straight road a pedestrian darts out from behind a parked truck into the lane"),
    ("turning-obstacle", "While driving through a curve an e-scooter rider emerges from behind a parked vehicle"),
    ("lane-changing", "A vehicle in the adjacent lane changes lanes and cuts in close in front of the ego vehicle"),
    ("vehicle-passing", "An oncoming vehicle drifts over the centre line while passing"),
    ("red-light-running", "A crossing vehicle runs the red light and enters the intersection"),
    ("unprotected-left-turn", "An oncoming vehicle makes an unprotected left turn across the ego path at the intersection"),
    ("right-turn", "A vehicle from the side road on the right enters and crosses the main road"),
    ("crossing-negotiation", "A pedestrian crosses the road in front of the ego vehicle against the signal"),
];

/// Entries handed to the generator for each prompt.
pub const CONTEXT_SIZE: usize = 5;

/// Everything produced for one prompt.
#[derive(Clone, Debug)]
pub struct Generated {
    pub retrieved: Vec<KnowledgeEntry>,
    pub tuple: SemanticTuple,
    pub structured: Structured,
    pub meta: MetaScenario,
}

/// retrieve, generate, parse, instantiate.
pub fn generate_meta(
    kb: &[KnowledgeEntry],
    base_prompt: &str,
    backend: &GeneratorBackend,
    lib: &RoadLibrary,
) -> Result<Generated, KnowledgeError> {
    if base_prompt.trim().is_empty() {
        return Err(KnowledgeError::Domain("empty base prompt".into()));
    }
    let retrieved = retrieve_context(kb, base_prompt, CONTEXT_SIZE)?;
    let tuple = generate_semantics(base_prompt, &retrieved, backend)?;
    let structured = parse_semantics(&tuple)?;
    let meta = instantiate_meta(&structured, lib)?;
    Ok(Generated { retrieved, tuple, structured, meta })
}
