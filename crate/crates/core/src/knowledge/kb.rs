use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::knowledge::KnowledgeError;
use crate::model::agent::vocabulary;
use crate::model::{AgentClass, Behavior, LightState, RoadType};

/// Knowledge source. The declaration order is the retrieval tie-break order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Source {
    /// Pre-crash typologies.
    #[serde(rename = "D_c")]
    Crash,
    /// Driving regulations.
    #[serde(rename = "D_r")]
    Regulation,
    /// Licence test questions.
    #[serde(rename = "D_l")]
    License,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Crash => "D_c",
            Source::Regulation => "D_r",
            Source::License => "D_l",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "D_c" => Ok(Source::Crash),
            "D_r" => Ok(Source::Regulation),
            "D_l" => Ok(Source::License),
            other => Err(format!("unknown source `{other}`")),
        }
    }
}

vocabulary!(
    /// Where the adversary starts relative to the ego route.
    Placement {
        AheadSameLane => "ahead-same-lane",
        AheadAdjacentLane => "ahead-adjacent-lane",
        OccludedRoadside => "occluded-roadside",
        Oncoming => "oncoming",
        CrossingLeft => "crossing-left",
        CrossingRight => "crossing-right",
    }
);

/// Slot set of a pre-crash typology.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Typology {
    pub class: AgentClass,
    pub placement: Placement,
    pub maneuver: Behavior,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeEntry {
    pub source: Source,
    pub id: String,
    pub tags: Vec<String>,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub typology: Option<Typology>,
}

impl KnowledgeEntry {
    /// Road types named in the tags.
    pub fn road_tags(&self) -> Vec<RoadType> {
        RoadType::ALL.into_iter().filter(|r| self.tags.iter().any(|t| t == r.as_str())).collect()
    }

    /// Light states named in the tags.
    pub fn light_tags(&self) -> Vec<LightState> {
        LightState::ALL.into_iter().filter(|l| self.tags.iter().any(|t| t == l.as_str())).collect()
    }
}

fn parse_typology(field: &str) -> Result<Typology, String> {
    let parts: Vec<&str> = field.split(';').map(str::trim).collect();
    let [c, p, b] = parts.as_slice() else {
        return Err(format!("slot set `{field}` needs class;placement;maneuver"));
    };
    Ok(Typology { class: c.parse()?, placement: p.parse()?, maneuver: b.parse()? })
}

/// Parses `source|id|tags|text[|class;placement;maneuver]` records. Blank lines
/// and lines starting with `#` are skipped.
pub fn parse_kb(text: &str) -> Result<Vec<KnowledgeEntry>, KnowledgeError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| KnowledgeError::Kb { line: n + 1, msg };
        let fields: Vec<&str> = line.split('|').collect();
        if !(4..=5).contains(&fields.len()) {
            return Err(err(format!("expected 4 or 5 fields, found {}", fields.len())));
        }
        let source: Source = fields[0].trim().parse().map_err(err)?;
        let id = fields[1].trim().to_owned();
        if id.is_empty() {
            return Err(err("empty id".into()));
        }
        let tags = fields[2].split(',').map(|t| t.trim().to_lowercase()).filter(|t| !t.is_empty()).collect();
        let body = fields[3].trim().to_owned();
        if body.is_empty() {
            return Err(err("empty text".into()));
        }
        let typology = match fields.get(4) {
            Some(f) => Some(parse_typology(f).map_err(err)?),
            None => None,
        };
        if source == Source::Crash && typology.is_none() {
            return Err(err(format!("crash entry {id} lacks a slot set")));
        }
        out.push(KnowledgeEntry { source, id, tags, text: body, typology });
    }
    Ok(out)
}

const REGULATIONS: &str = include_str!("../../data/kb/regulations.kb");
const LICENSE: &str = include_str!("../../data/kb/license.kb");
const CRASHES: &str = include_str!("../../data/kb/crashes.kb");

/// The knowledge base shipped with the crate.
pub fn bundled_kb() -> Vec<KnowledgeEntry> {
    [REGULATIONS, LICENSE, CRASHES]
        .iter()
        .flat_map(|t| parse_kb(t).expect("bundled knowledge base parses"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_counts() {
        let kb = bundled_kb();
        let count = |s| kb.iter().filter(|e| e.source == s).count();
        assert_eq!(count(Source::Regulation), 27);
        assert_eq!(count(Source::License), 100);
        assert_eq!(count(Source::Crash), 14);
        assert!(kb.iter().filter(|e| e.source == Source::Crash).all(|e| e.typology.is_some()));
    }

    #[test]
    fn malformed_lines_rejected() {
        assert!(parse_kb("D_x|a|t|text").is_err());
        assert!(parse_kb("D_r|a|t|").is_err());
        assert!(parse_kb("D_c|c1|t|text").is_err());
        assert!(parse_kb("D_c|c1|t|text|car;nowhere;crossing").is_err());
        let ok = parse_kb("# c\n\nD_c|c1|a, B|text|car;oncoming;left-turn").unwrap();
        assert_eq!(ok[0].tags, vec!["a", "b"]);
        assert_eq!(ok[0].typology.unwrap().maneuver, Behavior::LeftTurn);
    }
}
