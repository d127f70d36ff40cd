use std::time::Duration;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::knowledge::instantiate::instantiate_meta;
use crate::knowledge::kb::{KnowledgeEntry, Source, Typology};
use crate::knowledge::parse::Structured;
use crate::knowledge::KnowledgeError;
use crate::model::{LightState, RoadType};
use crate::roads::RoadLibrary;

/// Free-text slots for class, position, behavior, road type and light state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticTuple {
    pub phi_c: String,
    pub phi_p: String,
    pub phi_b: String,
    pub phi_r: String,
    pub phi_l: String,
}

impl SemanticTuple {
    pub fn new(c: &str, p: &str, b: &str, r: &str, l: &str) -> Result<Self, KnowledgeError> {
        for (slot, v) in [("C", c), ("P", p), ("B", b), ("R", r), ("L", l)] {
            if v.trim().is_empty() {
                return Err(KnowledgeError::MissingSlot(slot));
            }
        }
        Ok(SemanticTuple {
            phi_c: c.trim().into(),
            phi_p: p.trim().into(),
            phi_b: b.trim().into(),
            phi_r: r.trim().into(),
            phi_l: l.trim().into(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub url: String,
    pub model: String,
    pub timeout_secs: u64,
    /// Environment variable holding the bearer token.
    pub token_env: String,
}

pub const TOKEN_ENV: &str = "SCENEVO_API_TOKEN";

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            url: "http://127.0.0.1:8080/v1/chat/completions".into(),
            model: "default".into(),
            timeout_secs: 30,
            token_env: TOKEN_ENV.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum GeneratorBackend {
    Template { seed: u64 },
    Remote(RemoteConfig),
}

pub const INSTRUCTION_PROMPT: &str = "You write one safety-critical driving scenario for an autonomous \
vehicle test. Use the driving knowledge provided. Reply with exactly five lines and nothing else:\n\
C: <class of the adversarial agent: car, truck, pedestrian, cyclist or scooter>\n\
P: <where it starts relative to the ego vehicle, e.g. 'behind parked truck on right, 25 m'>\n\
B: <what it does, e.g. 'steps into lane', 'runs the red light', 'cuts in'>\n\
R: <road type: straight, intersection, t-junction, roundabout or curve>\n\
L: <traffic light facing the adversary: red, yellow, green or none>";

/// Offsets the template backend chooses from (m past the anchor).
pub const TEMPLATE_OFFSETS: [f64; 3] = [20.0, 25.0, 30.0];

pub fn generate_semantics(
    base_prompt: &str,
    retrieved: &[KnowledgeEntry],
    backend: &GeneratorBackend,
) -> Result<SemanticTuple, KnowledgeError> {
    match backend {
        GeneratorBackend::Template { seed } => template_semantics(retrieved, *seed),
        GeneratorBackend::Remote(cfg) => {
            let user = user_message(base_prompt, retrieved);
            match remote_once(cfg, &user) {
                Ok(t) => Ok(t),
                Err(first) => {
                    log::warn!("remote generation failed ({first}); retrying once");
                    remote_once(cfg, &user)
                }
            }
        }
    }
}

fn user_message(base_prompt: &str, retrieved: &[KnowledgeEntry]) -> String {
    let mut msg = format!("Scenario: {base_prompt}\n\nKnowledge:\n");
    for e in retrieved {
        msg.push_str(&format!("- [{} {}] {}\n", e.source, e.id, e.text));
    }
    msg
}

/// Roads and lights a typology can be staged on with the shipped templates.
pub fn typology_options(entry: &KnowledgeEntry, lib: &RoadLibrary) -> Vec<(RoadType, Vec<LightState>)> {
    let Some(ty) = entry.typology else {
        return Vec::new();
    };
    let tagged = entry.road_tags();
    let roads: Vec<RoadType> = if tagged.is_empty() { RoadType::ALL.to_vec() } else { tagged };
    let tagged_lights = entry.light_tags();
    roads
        .into_iter()
        .filter_map(|road| {
            let tpl = lib.get(road)?;
            let lights = if tpl.signalized && !tagged_lights.is_empty() { tagged_lights.clone() } else { vec![LightState::None] };
            let ok = lights.iter().all(|&light| instantiate_meta(&structured(ty, road, light, 25.0), lib).is_ok());
            ok.then_some((road, lights))
        })
        .collect()
}

fn structured(ty: Typology, road: RoadType, light: LightState, offset: f64) -> Structured {
    Structured { class: ty.class, placement: ty.placement, offset, behavior: ty.maneuver, road, light }
}

fn template_semantics(retrieved: &[KnowledgeEntry], seed: u64) -> Result<SemanticTuple, KnowledgeError> {
    let entry = retrieved
        .iter()
        .find(|e| e.source == Source::Crash && e.typology.is_some())
        .ok_or_else(|| KnowledgeError::Backend("template backend needs a retrieved pre-crash typology".into()))?;
    let ty = entry.typology.expect("checked above");
    let lib = RoadLibrary::standard();
    let options = typology_options(entry, &lib);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (road, lights) = options
        .choose(&mut rng)
        .ok_or_else(|| KnowledgeError::Backend(format!("typology {} fits no shipped road", entry.id)))?;
    let light = *lights.choose(&mut rng).expect("non-empty light list");
    let offset = *TEMPLATE_OFFSETS.choose(&mut rng).expect("non-empty offsets");
    SemanticTuple::new(
        ty.class.as_str(),
        &format!("{} {offset} m", ty.placement),
        ty.maneuver.as_str(),
        road.as_str(),
        light.as_str(),
    )
}

fn remote_once(cfg: &RemoteConfig, user: &str) -> Result<SemanticTuple, KnowledgeError> {
    let body = serde_json::json!({
        "model": cfg.model,
        "temperature": 0,
        "messages": [
            {"role": "system", "content": INSTRUCTION_PROMPT},
            {"role": "user", "content": user},
        ],
    });
    let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs(cfg.timeout_secs)).build();
    let mut req = agent.post(&cfg.url).set("Content-Type", "application/json");
    if let Ok(token) = std::env::var(&cfg.token_env) {
        req = req.set("Authorization", &format!("Bearer {token}"));
    }
    let reply = req
        .send_string(&body.to_string())
        .map_err(|e| KnowledgeError::Backend(format!("POST {}: {e}", cfg.url)))?
        .into_string()
        .map_err(|e| KnowledgeError::Backend(format!("reading reply: {e}")))?;
    parse_reply(&reply_text(&reply))
}

/// Message text from an OpenAI-style, Anthropic-style or plain-text reply.
pub fn reply_text(body: &str) -> String {
    let Ok(v) = serde_json::from_str::<serde_json::Value>(body) else {
        return body.to_owned();
    };
    let candidates = [
        v.pointer("/choices/0/message/content"),
        v.pointer("/content/0/text"),
        v.pointer("/text"),
    ];
    let text = candidates.into_iter().flatten().find_map(|x| x.as_str().map(str::to_owned));
    text.unwrap_or_else(|| body.to_owned())
}

/// Extracts the five `C:`/`P:`/`B:`/`R:`/`L:` lines.
pub fn parse_reply(text: &str) -> Result<SemanticTuple, KnowledgeError> {
    let mut slots: [Option<String>; 5] = Default::default();
    for line in text.lines() {
        let line = line.trim().trim_start_matches(['-', '*', ' ']);
        let Some((key, value)) = line.split_once(':') else {
            continue;
        };
        let idx = match key.trim().to_ascii_uppercase().as_str() {
            "C" => 0,
            "P" => 1,
            "B" => 2,
            "R" => 3,
            "L" => 4,
            _ => continue,
        };
        if slots[idx].is_none() && !value.trim().is_empty() {
            slots[idx] = Some(value.trim().to_owned());
        }
    }
    const NAMES: [&str; 5] = ["C", "P", "B", "R", "L"];
    for (i, s) in slots.iter().enumerate() {
        if s.is_none() {
            return Err(KnowledgeError::MissingSlot(NAMES[i]));
        }
    }
    let [c, p, b, r, l] = slots.map(Option::unwrap_or_default);
    SemanticTuple::new(&c, &p, &b, &r, &l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::kb::bundled_kb;

    fn crash(id: &str) -> KnowledgeEntry {
        bundled_kb().into_iter().find(|e| e.id == id).unwrap()
    }

    #[test]
    fn template_is_seeded() {
        let ctx = vec![crash("c01")];
        let a = generate_semantics("x", &ctx, &GeneratorBackend::Template { seed: 7 }).unwrap();
        let b = generate_semantics("x", &ctx, &GeneratorBackend::Template { seed: 7 }).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.phi_c, "pedestrian");
        assert_eq!(a.phi_b, "sudden-emergence");
        assert!(a.phi_p.starts_with("occluded-roadside"));
    }

    #[test]
    fn template_needs_a_typology() {
        let reg = bundled_kb().into_iter().find(|e| e.source == Source::Regulation).unwrap();
        assert!(generate_semantics("x", &[reg], &GeneratorBackend::Template { seed: 1 }).is_err());
    }

    #[test]
    fn reply_slots() {
        let t = parse_reply("Sure.\nC: pedestrian\nP: behind parked truck on right\nB: steps into lane\nR: straight\nL: none\n").unwrap();
        assert_eq!(t, SemanticTuple::new("pedestrian", "behind parked truck on right", "steps into lane", "straight", "none").unwrap());
        assert_eq!(parse_reply("C: car\nP: x\nB: y\nL: red"), Err(KnowledgeError::MissingSlot("R")));
        let wrapped = serde_json::json!({"choices": [{"message": {"content": "C: car"}}]}).to_string();
        assert_eq!(reply_text(&wrapped), "C: car");
        assert_eq!(reply_text("C: car"), "C: car");
    }

    #[test]
    fn unreachable_endpoint_is_a_backend_error() {
        let cfg = RemoteConfig { url: "http://127.0.0.1:9/none".into(), timeout_secs: 1, ..RemoteConfig::default() };
        assert!(matches!(
            generate_semantics("x", &[], &GeneratorBackend::Remote(cfg)),
            Err(KnowledgeError::Backend(_))
        ));
    }
}
