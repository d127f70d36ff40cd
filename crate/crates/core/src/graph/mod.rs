//! Adversarial collaborator graph: frame-wise attention from the ego and the
//! adversary onto background agents, and the collaborator set derived from it.

mod relevance;

use serde::Serialize;
use thiserror::Error;

use crate::scalar::Scalar;

pub use relevance::{build_relevance, build_relevance_with, decay_logit, RelevanceMatrix, RelevanceOptions, FEATURE_DIM};

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("domain error: {0}")]
    Domain(String),
}

/// `score_i = Σ_{q,t,s} w[q,t,i,s]`.
pub fn aggregate_relevance<S: Scalar>(m: &RelevanceMatrix<S>) -> Vec<S> {
    let n = m.backgrounds();
    let frames = m.frames();
    let mut scores = vec![S::zero(); n];
    for q in 0..2 {
        for t in 0..frames {
            for (i, chunk) in m.row(q, t).chunks(frames.max(1)).enumerate() {
                scores[i] = chunk.iter().fold(scores[i], |acc, &w| acc + w);
            }
        }
    }
    scores
}

/// Indices of the `k` largest scores in descending order, lower index first
/// on ties.
pub fn select_collaborators<S: Scalar>(scores: &[S], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Per-key-frame attention received by background `i`, summed over both
/// queries and all query frames.
pub fn keyframe_profile<S: Scalar>(m: &RelevanceMatrix<S>, i: usize) -> Vec<S> {
    let frames = m.frames();
    let mut col = vec![S::zero(); frames];
    for q in 0..2 {
        for t in 0..frames {
            let row = m.row(q, t);
            for (s, c) in col.iter_mut().enumerate() {
                *c = *c + row[i * frames + s];
            }
        }
    }
    col
}

/// Key frame with the largest column sum; earliest frame on ties.
pub fn find_keyframe<S: Scalar>(m: &RelevanceMatrix<S>, i: usize) -> usize {
    let col = keyframe_profile(m, i);
    let mut best = 0;
    for (s, &v) in col.iter().enumerate() {
        if v > col[best] {
            best = s;
        }
    }
    best
}

/// Window of `round(ratio·T)` frames centred on `keyframe`, shifted to fit
/// inside `[0, T)`.
pub fn extract_window(frames: usize, keyframe: usize, ratio: f64) -> Result<(usize, usize), GraphError> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(GraphError::Domain(format!("window ratio must lie in (0, 1], got {ratio}")));
    }
    let len = ((ratio * frames as f64).round() as usize).min(frames);
    let start = keyframe.saturating_sub(len / 2).min(frames - len);
    Ok((start, start + len))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Collaborator {
    pub index: usize,
    pub keyframe: usize,
    pub window: (usize, usize),
    pub score: f64,
}

/// Top-`k` collaborators with their keyframes and windows.
pub fn collaborator_set<S: Scalar>(m: &RelevanceMatrix<S>, k: usize, ratio: f64) -> Result<Vec<Collaborator>, GraphError> {
    let scores = aggregate_relevance(m);
    select_collaborators(&scores, k)
        .into_iter()
        .map(|index| {
            let keyframe = find_keyframe(m, index);
            Ok(Collaborator {
                index,
                keyframe,
                window: extract_window(m.frames(), keyframe, ratio)?,
                score: scores[index].to_f64_lossy(),
            })
        })
        .collect()
}

/// Debug report written by `--dump-graph`.
#[derive(Debug, Serialize)]
pub struct GraphDump {
    pub gamma: f64,
    pub d: usize,
    pub frames: usize,
    pub backgrounds: usize,
    pub scores: Vec<f64>,
    pub keyframes: Vec<usize>,
    pub collaborators: Vec<Collaborator>,
    /// `[q][t][i][s]`.
    pub weights: Vec<Vec<Vec<Vec<f64>>>>,
}

impl GraphDump {
    pub fn new<S: Scalar>(m: &RelevanceMatrix<S>, collaborators: Vec<Collaborator>) -> Self {
        let frames = m.frames();
        let n = m.backgrounds();
        let weights = (0..2)
            .map(|q| {
                (0..frames)
                    .map(|t| (0..n).map(|i| (0..frames).map(|s| m.weight(q, t, i, s).to_f64_lossy()).collect()).collect())
                    .collect()
            })
            .collect();
        GraphDump {
            gamma: m.gamma.to_f64_lossy(),
            d: m.d,
            frames,
            backgrounds: n,
            scores: aggregate_relevance(m).into_iter().map(|s| s.to_f64_lossy()).collect(),
            keyframes: (0..n).map(|i| find_keyframe(m, i)).collect(),
            collaborators,
            weights,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec2;
    use crate::model::Trajectory;

    fn traj(points: &[(f64, f64)]) -> Trajectory {
        Trajectory::new(0.1, points.iter().map(|&(x, y)| Vec2::new(x, y)).collect())
    }

    #[test]
    fn window_examples() {
        assert_eq!(extract_window(100, 50, 0.6).unwrap(), (20, 80));
        assert_eq!(extract_window(100, 0, 0.6).unwrap(), (0, 60));
        assert_eq!(extract_window(100, 99, 0.6).unwrap(), (40, 100));
        assert_eq!(extract_window(100, 37, 1.0).unwrap(), (0, 100));
        assert!(extract_window(100, 5, 0.0).is_err());
        assert!(extract_window(100, 5, 1.5).is_err());
    }

    #[test]
    fn select_tie_break() {
        assert_eq!(select_collaborators(&[3.0, 1.0, 4.0, 4.0, 2.0], 2), vec![2, 3]);
        assert_eq!(select_collaborators(&[3.0, 1.0, 4.0, 4.0, 2.0], 9), vec![2, 3, 0, 4, 1]);
        let ten: Vec<f64> = (0..10).map(|i| (i * 7 % 10) as f64).collect();
        assert_eq!(select_collaborators(&ten, 4).len(), 4);
    }

    #[test]
    fn single_background_takes_all_mass() {
        let e = traj(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]);
        let a = traj(&[(9.0, -4.0), (9.0, -3.0), (9.0, -2.0), (9.0, -1.0)]);
        let b = traj(&[(4.0, -3.5), (5.0, -3.5), (6.0, -3.5), (7.0, -3.5)]);
        let m = build_relevance(&e, &a, &[b], 0.8).unwrap();
        assert!((aggregate_relevance(&m)[0] - 8.0).abs() < 1e-12);
    }

    #[test]
    fn mirrored_backgrounds_score_equally() {
        let e = traj(&[(0.0, 0.0), (2.0, 0.0), (4.0, 0.0)]);
        let a = traj(&[(20.0, 0.0), (20.0, 0.0), (20.0, 0.0)]);
        let up = traj(&[(5.0, 3.5), (6.0, 3.5), (7.0, 3.5)]);
        let down = traj(&[(5.0, -3.5), (6.0, -3.5), (7.0, -3.5)]);
        let m = build_relevance(&e, &a, &[up, down], 0.8).unwrap();
        let s = aggregate_relevance(&m);
        assert!((s[0] - s[1]).abs() < 1e-12, "{s:?}");
    }

    #[test]
    fn uniform_weights_pick_frame_zero() {
        let p = traj(&[(0.0, 0.0), (0.0, 0.0), (0.0, 0.0)]);
        let m = build_relevance_with(&p, &p, &[p.clone()], RelevanceOptions { gamma: 0.8, causal_mask: false, decay: false }).unwrap();
        assert_eq!(find_keyframe(&m, 0), 0);
        let one = traj(&[(1.0, 2.0)]);
        let m1 = build_relevance(&one, &one, &[one.clone()], 0.8).unwrap();
        assert_eq!(find_keyframe(&m1, 0), 0);
    }

    #[test]
    fn dump_shape() {
        let e = traj(&[(0.0, 0.0), (1.0, 0.0)]);
        let m = build_relevance(&e, &e, &[e.clone(), e.clone(), e.clone()], 0.8).unwrap();
        let c = collaborator_set(&m, 2, 0.6).unwrap();
        let d = GraphDump::new(&m, c);
        assert_eq!(d.weights.len(), 2);
        assert_eq!(d.weights[0].len(), 2);
        assert_eq!(d.weights[0][0].len(), 3);
        assert_eq!(d.collaborators.len(), 2);
    }
}
