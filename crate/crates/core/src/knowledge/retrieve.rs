use std::collections::BTreeMap;

use crate::knowledge::kb::{KnowledgeEntry, Source};
use crate::knowledge::KnowledgeError;

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn entry_tokens(e: &KnowledgeEntry) -> Vec<String> {
    e.tags.iter().flat_map(|t| tokenize(t)).chain(tokenize(&e.text)).collect()
}

fn counts(tokens: &[String]) -> BTreeMap<&str, f64> {
    let mut m = BTreeMap::new();
    for t in tokens {
        *m.entry(t.as_str()).or_insert(0.0) += 1.0;
    }
    m
}

/// TF-IDF cosine between `prompt` and every entry (tags and text), in input
/// order. Term frequency is the raw count and
/// `idf(t) = ln((1 + N) / (1 + df(t))) + 1`.
pub fn score_entries(kb: &[KnowledgeEntry], prompt: &str) -> Vec<f64> {
    let docs: Vec<Vec<String>> = kb.iter().map(entry_tokens).collect();
    let doc_counts: Vec<BTreeMap<&str, f64>> = docs.iter().map(|d| counts(d)).collect();
    let mut df: BTreeMap<&str, f64> = BTreeMap::new();
    for c in &doc_counts {
        for t in c.keys() {
            *df.entry(t).or_insert(0.0) += 1.0;
        }
    }
    let n = kb.len() as f64;
    let idf = |t: &str| ((1.0 + n) / (1.0 + df.get(t).copied().unwrap_or(0.0))).ln() + 1.0;
    let query_tokens = tokenize(prompt);
    let query: BTreeMap<&str, f64> = counts(&query_tokens).into_iter().map(|(t, c)| (t, c * idf(t))).collect();
    let q_norm = query.values().map(|w| w * w).sum::<f64>().sqrt();
    doc_counts
        .iter()
        .map(|c| {
            let mut dot = 0.0;
            let mut norm = 0.0;
            for (t, tf) in c {
                let w = tf * idf(t);
                norm += w * w;
                if let Some(q) = query.get(t) {
                    dot += w * q;
                }
            }
            if dot == 0.0 {
                0.0
            } else {
                dot / (norm.sqrt() * q_norm)
            }
        })
        .collect()
}

/// Top `k` entries by score; ties go to the earlier source (`D_c`, `D_r`,
/// `D_l`) and then the smaller id, so input order never matters.
pub fn retrieve(kb: &[KnowledgeEntry], prompt: &str, k: usize) -> Result<Vec<KnowledgeEntry>, KnowledgeError> {
    if k == 0 {
        return Err(KnowledgeError::Domain("retrieve needs k >= 1".into()));
    }
    let scores = score_entries(kb, prompt);
    let mut order: Vec<usize> = (0..kb.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then(kb[a].source.cmp(&kb[b].source))
            .then_with(|| kb[a].id.cmp(&kb[b].id))
    });
    Ok(order.into_iter().take(k).map(|i| kb[i].clone()).collect())
}

/// Top `k` entries plus the best pre-crash typology when none made the cut,
/// so a template backend always has a slot set to work from.
pub fn retrieve_context(kb: &[KnowledgeEntry], prompt: &str, k: usize) -> Result<Vec<KnowledgeEntry>, KnowledgeError> {
    let mut top = retrieve(kb, prompt, k)?;
    if !top.iter().any(|e| e.source == Source::Crash) {
        let crashes: Vec<KnowledgeEntry> = kb.iter().filter(|e| e.source == Source::Crash).cloned().collect();
        if let Some(best) = retrieve(&crashes, prompt, 1)?.into_iter().next() {
            top.push(best);
        }
    }
    Ok(top)
}
