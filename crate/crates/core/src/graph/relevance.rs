use serde::Serialize;

use crate::geom::Vec2;
use crate::graph::GraphError;
use crate::model::Trajectory;
use crate::scalar::Scalar;

/// Feature dimension: one centred 2D position per frame.
pub const FEATURE_DIM: usize = 2;

/// Switches for the ablation study. Both are on by default.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelevanceOptions<S = f64> {
    pub gamma: S,
    pub causal_mask: bool,
    pub decay: bool,
}

impl<S: Scalar> RelevanceOptions<S> {
    pub fn new(gamma: S) -> Self {
        RelevanceOptions { gamma, causal_mask: true, decay: true }
    }
}

/// Normalised attention weights indexed `[q][t][i][s]`: query agent
/// (0 = ego, 1 = adversary), query frame, background agent, key frame.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RelevanceMatrix<S = f64> {
    weights: Vec<S>,
    frames: usize,
    backgrounds: usize,
    pub gamma: S,
    pub d: usize,
}

impl<S: Scalar> RelevanceMatrix<S> {
    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn backgrounds(&self) -> usize {
        self.backgrounds
    }

    #[inline]
    fn index(&self, q: usize, t: usize, i: usize, s: usize) -> usize {
        ((q * self.frames + t) * self.backgrounds + i) * self.frames + s
    }

    #[inline]
    pub fn weight(&self, q: usize, t: usize, i: usize, s: usize) -> S {
        self.weights[self.index(q, t, i, s)]
    }

    /// Weights of the `(q, t)` row, laid out `[i][s]`.
    pub fn row(&self, q: usize, t: usize) -> &[S] {
        let start = self.index(q, t, 0, 0);
        &self.weights[start..start + self.backgrounds * self.frames]
    }

    pub fn as_slice(&self) -> &[S] {
        &self.weights
    }
}

/// Additive decay logit `lag · ln γ`.
pub fn decay_logit<S: Scalar>(gamma: S, lag: usize) -> S {
    S::from_usize_lossy(lag) * gamma.ln()
}

fn check_inputs<S: Scalar>(ego: &Trajectory<S>, adv: &Trajectory<S>, backgrounds: &[Trajectory<S>]) -> Result<(), GraphError> {
    let frames = ego.len();
    let dt = ego.dt;
    let tol = S::lit(1e-12) * dt.abs().max(S::one());
    for (name, t) in std::iter::once(("adversary".to_string(), adv))
        .chain(backgrounds.iter().enumerate().map(|(i, b)| (format!("background {i}"), b)))
    {
        if t.len() != frames {
            return Err(GraphError::Dimension(format!("{name} has {} frames, ego has {frames}", t.len())));
        }
        if (t.dt - dt).abs() > tol {
            return Err(GraphError::Dimension(format!("{name} has dt {}, ego has dt {dt}", t.dt)));
        }
    }
    if frames == 0 {
        return Err(GraphError::Dimension("trajectories are empty".into()));
    }
    Ok(())
}

/// `c[t]`: mean position over every agent and the frames `0..=t`. Centring
/// query frame `t` on `c[t]` keeps the logits translation invariant without
/// letting later frames leak into earlier rows.
fn prefix_centroids<S: Scalar>(all: &[&Trajectory<S>], frames: usize) -> Vec<Vec2<S>> {
    let mut out = Vec::with_capacity(frames);
    let mut sum = Vec2::zero();
    for t in 0..frames {
        for tr in all {
            sum += tr.points[t];
        }
        let n = S::from_usize_lossy(all.len() * (t + 1));
        out.push(sum * (S::one() / n));
    }
    out
}

pub fn build_relevance<S: Scalar>(
    ego: &Trajectory<S>,
    adv: &Trajectory<S>,
    backgrounds: &[Trajectory<S>],
    gamma: S,
) -> Result<RelevanceMatrix<S>, GraphError> {
    build_relevance_with(ego, adv, backgrounds, RelevanceOptions::new(gamma))
}

pub fn build_relevance_with<S: Scalar>(
    ego: &Trajectory<S>,
    adv: &Trajectory<S>,
    backgrounds: &[Trajectory<S>],
    opts: RelevanceOptions<S>,
) -> Result<RelevanceMatrix<S>, GraphError> {
    check_inputs(ego, adv, backgrounds)?;
    let gamma = opts.gamma;
    if !(gamma > S::zero() && gamma < S::one()) {
        return Err(GraphError::Domain(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    let frames = ego.len();
    let n = backgrounds.len();

    let mut all: Vec<&Trajectory<S>> = vec![ego, adv];
    all.extend(backgrounds.iter());
    let centroids = prefix_centroids(&all, frames);
    let queries = [&ego.points, &adv.points];

    let scale = S::one() / S::from_usize_lossy(FEATURE_DIM).sqrt();
    let ln_gamma = gamma.ln();
    let mut weights = vec![S::zero(); 2 * frames * n * frames];
    let mut logits = vec![S::neg_infinity(); n * frames];

    for (qi, q) in queries.iter().enumerate() {
        for t in 0..frames {
            let c = centroids[t];
            let qt = q[t] - c;
            let visible = if opts.causal_mask { t + 1 } else { frames };
            let mut max = S::neg_infinity();
            for (i, k) in backgrounds.iter().enumerate() {
                for s in 0..frames {
                    let slot = &mut logits[i * frames + s];
                    if s >= visible {
                        *slot = S::neg_infinity();
                        continue;
                    }
                    let mut l = qt.dot(k.points[s] - c) * scale;
                    if opts.decay {
                        let lag = if s <= t { t - s } else { s - t };
                        l = l + S::from_usize_lossy(lag) * ln_gamma;
                    }
                    *slot = l;
                    max = max.max(l);
                }
            }
            if n == 0 {
                continue;
            }
            let row_start = (qi * frames + t) * n * frames;
            let row = &mut weights[row_start..row_start + n * frames];
            let mut total = S::zero();
            for (w, &l) in row.iter_mut().zip(&logits) {
                *w = if l == S::neg_infinity() { S::zero() } else { (l - max).exp() };
                total = total + *w;
            }
            for w in row.iter_mut() {
                *w = *w / total;
            }
        }
    }
    Ok(RelevanceMatrix { weights, frames, backgrounds: n, gamma, d: FEATURE_DIM })
}
