use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::knowledge::generate::SemanticTuple;
use crate::knowledge::kb::Placement;
use crate::knowledge::KnowledgeError;
use crate::model::{AgentClass, Behavior, LightState, RoadType};

/// Longitudinal offset used when the position text names no distance (m).
pub const DEFAULT_OFFSET: f64 = 25.0;

/// Closed-vocabulary values `(c, p, b, R, L)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Structured {
    pub class: AgentClass,
    pub placement: Placement,
    /// Distance past the road template's placement anchor (m).
    pub offset: f64,
    pub behavior: Behavior,
    pub road: RoadType,
    pub light: LightState,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Class,
    Placement,
    Behavior,
    Road,
    Light,
}

impl Slot {
    pub fn as_str(self) -> &'static str {
        match self {
            Slot::Class => "class",
            Slot::Placement => "placement",
            Slot::Behavior => "behavior",
            Slot::Road => "road",
            Slot::Light => "light",
        }
    }

    fn parse(s: &str) -> Option<Slot> {
        [Slot::Class, Slot::Placement, Slot::Behavior, Slot::Road, Slot::Light]
            .into_iter()
            .find(|x| x.as_str() == s)
    }
}

#[derive(Clone, Debug)]
struct SynonymRow {
    slot: Slot,
    canonical: String,
    phrases: Vec<String>,
}

/// Phrase table mapping free text onto the closed vocabularies.
#[derive(Clone, Debug)]
pub struct SynonymTable {
    rows: Vec<SynonymRow>,
}

/// Lowercase, punctuation other than `-` and `/` turned into spaces, padded
/// with single spaces so whole-word matching is a substring test.
fn normalize(text: &str) -> String {
    let cleaned: String = text
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '/' { c } else { ' ' })
        .collect();
    let words: Vec<&str> = cleaned.split_whitespace().collect();
    format!(" {} ", words.join(" "))
}

const BUNDLED: &str = include_str!("../../data/synonyms.txt");

impl SynonymTable {
    /// Reads `slot|canonical|phrase,phrase,...` lines.
    pub fn parse(text: &str) -> Result<Self, KnowledgeError> {
        let mut rows = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| KnowledgeError::Kb { line: n + 1, msg };
            let fields: Vec<&str> = line.split('|').collect();
            let [slot, canonical, phrases] = fields.as_slice() else {
                return Err(err("expected slot|canonical|phrases".into()));
            };
            let slot = Slot::parse(slot.trim()).ok_or_else(|| err(format!("unknown slot `{slot}`")))?;
            let phrases = phrases.split(',').map(normalize).filter(|p| p.trim() != "").collect();
            rows.push(SynonymRow { slot, canonical: canonical.trim().to_owned(), phrases });
        }
        Ok(SynonymTable { rows })
    }

    pub fn bundled() -> &'static SynonymTable {
        static TABLE: OnceLock<SynonymTable> = OnceLock::new();
        TABLE.get_or_init(|| SynonymTable::parse(BUNDLED).expect("bundled synonym table parses"))
    }

    /// Canonical value whose longest phrase occurs in `text`; earlier rows win
    /// ties.
    pub fn lookup(&self, slot: Slot, text: &str) -> Option<&str> {
        let norm = normalize(text);
        let mut best: Option<(usize, &str)> = None;
        for row in self.rows.iter().filter(|r| r.slot == slot) {
            for p in &row.phrases {
                if norm.contains(p.as_str()) && best.map_or(true, |(len, _)| p.len() > len) {
                    best = Some((p.len(), row.canonical.as_str()));
                }
            }
        }
        best.map(|(_, c)| c)
    }

    /// Up to three canonical values closest to `text` by Jaro-Winkler
    /// similarity against every phrase.
    pub fn nearest(&self, slot: Slot, text: &str) -> Vec<String> {
        let norm = normalize(text);
        let needle = norm.trim();
        let mut scored: Vec<(f64, &str)> = self
            .rows
            .iter()
            .filter(|r| r.slot == slot)
            .map(|r| {
                let s = r.phrases.iter().map(|p| strsim::jaro_winkler(needle, p.trim())).fold(0.0, f64::max);
                (s, r.canonical.as_str())
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
        scored.into_iter().take(3).map(|(_, c)| c.to_owned()).collect()
    }

    fn resolve<T: std::str::FromStr>(&self, slot: Slot, text: &str) -> Result<T, KnowledgeError> {
        let unmapped = || KnowledgeError::Parse {
            slot: slot.as_str(),
            value: text.to_owned(),
            nearest: self.nearest(slot, text),
        };
        let canonical = self.lookup(slot, text).ok_or_else(unmapped)?;
        canonical.parse().map_err(|_| unmapped())
    }
}

/// First `<number> m` (or `<number>m`, `meters`, `metres`) in the text.
pub fn parse_offset(text: &str) -> Option<f64> {
    let lower = text.to_lowercase();
    let tokens: Vec<&str> = lower
        .split(|c: char| !(c.is_alphanumeric() || c == '.'))
        .map(|t| t.trim_end_matches('.'))
        .filter(|t| !t.is_empty())
        .collect();
    const UNITS: [&str; 5] = ["m", "meter", "meters", "metre", "metres"];
    for (i, t) in tokens.iter().enumerate() {
        let value = if let Ok(v) = t.parse::<f64>() {
            tokens.get(i + 1).filter(|u| UNITS.contains(u)).map(|_| v)
        } else {
            t.strip_suffix('m').and_then(|n| n.parse::<f64>().ok())
        };
        if let Some(v) = value.filter(|v| v.is_finite() && *v >= 0.0) {
            return Some(v);
        }
    }
    None
}

pub fn parse_semantics(t: &SemanticTuple) -> Result<Structured, KnowledgeError> {
    parse_semantics_with(t, SynonymTable::bundled())
}

pub fn parse_semantics_with(t: &SemanticTuple, table: &SynonymTable) -> Result<Structured, KnowledgeError> {
    Ok(Structured {
        class: table.resolve(Slot::Class, &t.phi_c)?,
        placement: table.resolve(Slot::Placement, &t.phi_p)?,
        offset: parse_offset(&t.phi_p).unwrap_or(DEFAULT_OFFSET),
        behavior: table.resolve(Slot::Behavior, &t.phi_b)?,
        road: table.resolve(Slot::Road, &t.phi_r)?,
        light: table.resolve(Slot::Light, &t.phi_l)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tuple(c: &str, p: &str, b: &str, r: &str, l: &str) -> SemanticTuple {
        SemanticTuple::new(c, p, b, r, l).unwrap()
    }

    #[test]
    fn flagship_tuple() {
        let s = parse_semantics(&tuple("pedestrian", "behind parked truck on right", "steps into lane", "straight", "none")).unwrap();
        assert_eq!(
            s,
            Structured {
                class: AgentClass::Pedestrian,
                placement: Placement::OccludedRoadside,
                offset: 25.0,
                behavior: Behavior::SuddenEmergence,
                road: RoadType::Straight,
                light: LightState::None,
            }
        );
    }

    #[test]
    fn vocabulary_words_map_to_themselves() {
        let table = SynonymTable::bundled();
        for c in AgentClass::ALL {
            assert_eq!(table.lookup(Slot::Class, c.as_str()), Some(c.as_str()));
        }
        for p in Placement::ALL {
            assert_eq!(table.lookup(Slot::Placement, p.as_str()), Some(p.as_str()));
        }
        for b in Behavior::ALL {
            assert_eq!(table.lookup(Slot::Behavior, b.as_str()), Some(b.as_str()));
        }
        for r in RoadType::ALL {
            assert_eq!(table.lookup(Slot::Road, r.as_str()), Some(r.as_str()));
        }
        for l in LightState::ALL {
            assert_eq!(table.lookup(Slot::Light, l.as_str()), Some(l.as_str()));
        }
    }

    #[test]
    fn synonyms_and_offsets() {
        let s = parse_semantics(&tuple("a jaywalker", "crossing from the left, 30 m ahead", "walks across", "crossroads", "amber")).unwrap();
        assert_eq!(s.class, AgentClass::Pedestrian);
        assert_eq!(s.placement, Placement::CrossingLeft);
        assert_eq!(s.offset, 30.0);
        assert_eq!(s.behavior, Behavior::Crossing);
        assert_eq!(s.road, RoadType::Intersection);
        assert_eq!(s.light, LightState::Yellow);
        assert_eq!(parse_offset("occluded-roadside 12.5m"), Some(12.5));
        assert_eq!(parse_offset("in 40 metres."), Some(40.0));
        assert_eq!(parse_offset("no distance"), None);
    }

    #[test]
    fn unknown_class_lists_nearest() {
        match parse_semantics(&tuple("hovercraft", "oncoming", "crossing", "straight", "none")) {
            Err(KnowledgeError::Parse { slot, nearest, .. }) => {
                assert_eq!(slot, "class");
                assert_eq!(nearest.len(), 3);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(
            parse_semantics(&tuple("car", "oncoming", "crossing", "motorway", "none")),
            Err(KnowledgeError::Parse { slot: "road", .. })
        ));
    }
}
