//! Kullback-Leibler divergence and its minimization over the local polytope.
//!
//! The fit runs multiplicative EM updates on the vertex weights,
//! `w_k <- w_k * sum_i q_i V_{k,i} / p_i`. The same per-vertex score is the
//! optimality certificate: the current local model `p` is the global minimizer
//! of `D(q || .)` over the polytope iff every vertex scores at most 1, and in
//! general
//!
//! ```text
//! D(q||p) - log2(max score) <= min_L D(q||.) <= D(q||p)
//! ```
//!
//! so a certificate gap of `tol` bounds the divergence error by `log2(1 + tol)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::local::{mixture_probs, CopyVertexSpace, LocalModel, VertexSpace, DEFAULT_VERTEX_CAP};
use crate::quantum::Behavior;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

const PRUNE_THRESHOLD: f64 = 1e-15;
const WEIGHT_FLOOR: f64 = 1e-280;
const PARALLEL_MIN_VERTICES: usize = 1 << 14;
const CHUNK: usize = 4096;

/// `sum_i q_i log2(q_i / p_i)`; `+inf` when `p` misses part of `q`'s support.
pub fn kl_divergence(q: &[f64], p: &[f64]) -> f64 {
    assert_eq!(q.len(), p.len(), "distributions must share an index set");
    let mut total = 0.0;
    for (&qi, &pi) in q.iter().zip(p) {
        if qi <= 0.0 {
            continue;
        }
        if pi <= 0.0 {
            return f64::INFINITY;
        }
        total += qi * (qi / pi).log2();
    }
    total
}

/// [`kl_divergence`] between two behaviors on the same index set.
pub fn behavior_divergence(q: &Behavior, p: &Behavior) -> Result<f64> {
    if q.len() != p.len() || q.num_settings() != p.num_settings() {
        return Err(Error::Shape("behaviors have different index sets".into()));
    }
    Ok(kl_divergence(q.probs(), p.probs()))
}

/// Solver knobs for [`min_kl_local_with`].
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Target certificate gap.
    pub tol: f64,
    pub max_iter: usize,
    pub vertex_cap: u128,
    /// Drop vertices whose weight falls below 1e-15 from the update loop.
    /// The final certificate is still taken over every vertex.
    pub prune: bool,
    /// Strictly positive starting weights; uniform when `None`.
    pub warm_start: Option<Vec<f64>>,
    /// Keep the divergence after every iteration in [`StrengthResult::trace`].
    pub record_trace: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            vertex_cap: DEFAULT_VERTEX_CAP,
            prune: false,
            warm_start: None,
            record_trace: false,
        }
    }
}

impl FitOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

/// Best local fit of a behavior.
#[derive(Debug, Clone)]
pub struct StrengthResult {
    /// `min_L D(q || p)` in bits.
    pub divergence_bits: f64,
    pub local_model: LocalModel,
    pub local_behavior: Behavior,
    /// Max vertex score minus one.
    pub certificate_gap: f64,
    pub iterations: usize,
    /// Divergence after each iteration, when requested.
    pub trace: Vec<f64>,
}

impl StrengthResult {
    /// Lower bound on the true minimum implied by the certificate.
    pub fn lower_bound(&self) -> f64 {
        self.divergence_bits - (1.0 + self.certificate_gap.max(0.0)).log2()
    }
}

/// Statistical strength of `q`: `min_{p local} D(q || p)`.
pub fn min_kl_local(q: &Behavior, tol: f64) -> Result<StrengthResult> {
    min_kl_local_with(q, &FitOptions::with_tol(tol))
}

pub fn min_kl_local_with(q: &Behavior, opts: &FitOptions) -> Result<StrengthResult> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {} must be > 0", opts.tol)));
    }
    let space = VertexSpace::for_behavior(q, opts.vertex_cap)?;
    let fit = EmFit::new(q, &space);
    fit.run(opts)
}

/// Strength of a `copies`-fold product behavior against local models in
/// which each copy's outcomes depend only on that copy's settings.
///
/// Weights of the returned model follow the order of [`CopyVertexSpace`].
pub fn min_kl_copy_local(q: &Behavior, copies: &CopyVertexSpace, opts: &FitOptions) -> Result<StrengthResult> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {} must be > 0", opts.tol)));
    }
    if copies.num_settings() != q.num_settings() || copies.num_outcomes() != q.num_outcomes() {
        return Err(Error::Shape(format!(
            "copy space is {} x {}, behavior is {} x {}",
            copies.num_settings(),
            copies.num_outcomes(),
            q.num_settings(),
            q.num_outcomes()
        )));
    }
    EmFit::with_table(q, copies.cell_table(), copies.len()).run(opts)
}

struct EmFit<'a> {
    q: &'a Behavior,
    table: Vec<u32>,
    vertices: usize,
    mm: usize,
}

impl<'a> EmFit<'a> {
    fn new(q: &'a Behavior, space: &VertexSpace) -> Self {
        Self::with_table(q, space.cell_table(), space.len())
    }

    fn with_table(q: &'a Behavior, table: Vec<u32>, vertices: usize) -> Self {
        let m = q.num_settings();
        Self {
            q,
            table,
            vertices,
            mm: m * m,
        }
    }

    fn probs(&self, weights: &[f64]) -> Vec<f64> {
        let settings = self.q.settings();
        let len = self.q.len();
        if self.vertices < PARALLEL_MIN_VERTICES {
            return mixture_probs(weights, &self.table, settings, len);
        }
        // Fixed chunking keeps the reduction order deterministic.
        let partials: Vec<Vec<f64>> = weights
            .par_chunks(CHUNK)
            .zip(self.table.par_chunks(CHUNK * self.mm))
            .map(|(w, t)| mixture_probs(w, t, settings, len))
            .collect();
        let mut probs = vec![0.0; len];
        for part in partials {
            for (p, x) in probs.iter_mut().zip(part) {
                *p += x;
            }
        }
        probs
    }

    /// `q_i / p_i` on the support of `q`, zero elsewhere.
    fn ratios(&self, p: &[f64]) -> Vec<f64> {
        self.q
            .probs()
            .iter()
            .zip(p)
            .map(|(&qi, &pi)| {
                if qi <= 0.0 {
                    0.0
                } else if pi <= 0.0 {
                    f64::INFINITY
                } else {
                    qi / pi
                }
            })
            .collect()
    }

    fn score_of(&self, k: usize, ratio: &[f64]) -> f64 {
        let pm = self.q.settings().probs();
        self.table[k * self.mm..(k + 1) * self.mm]
            .iter()
            .zip(pm)
            .map(|(&c, w)| w * ratio[c as usize])
            .sum()
    }

    fn scores(&self, ratio: &[f64], out: &mut [f64]) {
        if self.vertices < PARALLEL_MIN_VERTICES {
            for (k, s) in out.iter_mut().enumerate() {
                *s = self.score_of(k, ratio);
            }
        } else {
            out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
                for (o, s) in chunk.iter_mut().enumerate() {
                    *s = self.score_of(c * CHUNK + o, ratio);
                }
            });
        }
    }

    fn initial_weights(&self, opts: &FitOptions) -> Result<Vec<f64>> {
        match &opts.warm_start {
            None => Ok(vec![1.0 / self.vertices as f64; self.vertices]),
            Some(w) => {
                if w.len() != self.vertices {
                    return Err(Error::Shape(format!(
                        "warm start has {} weights for {} vertices",
                        w.len(),
                        self.vertices
                    )));
                }
                if w.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
                    return Err(Error::InvalidParameter(
                        "warm start weights must be strictly positive".into(),
                    ));
                }
                let total: f64 = w.iter().sum();
                Ok(w.iter().map(|x| x / total).collect())
            }
        }
    }

    fn run(&self, opts: &FitOptions) -> Result<StrengthResult> {
        let q = self.q.probs();
        let mut weights = self.initial_weights(opts)?;
        let mut scores = vec![0.0; self.vertices];
        let mut trace = Vec::new();
        let mut active: Vec<usize> = (0..self.vertices).collect();
        let mut prev = f64::INFINITY;
        let mut iterations = 0;
        loop {
            let p = self.probs(&weights);
            let divergence = kl_divergence(q, &p);
            // EM never increases the divergence; allow for rounding only.
            debug_assert!(
                divergence <= prev + 1e-12 * prev.abs().max(1.0),
                "EM step increased divergence: {prev} -> {divergence}"
            );
            prev = divergence;
            if opts.record_trace {
                trace.push(divergence);
            }
            let ratio = self.ratios(&p);
            if opts.prune && active.len() < self.vertices {
                for &k in &active {
                    scores[k] = self.score_of(k, &ratio);
                }
            } else {
                self.scores(&ratio, &mut scores);
            }
            let mut gap = active.iter().map(|&k| scores[k]).fold(f64::NEG_INFINITY, f64::max) - 1.0;
            let finished = gap <= opts.tol || iterations >= opts.max_iter;
            if finished && opts.prune && active.len() < self.vertices {
                // Certificate over the full vertex set before returning.
                self.scores(&ratio, &mut scores);
                gap = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max) - 1.0;
                if gap > opts.tol && iterations < opts.max_iter {
                    let floor = PRUNE_THRESHOLD * 10.0;
                    for (k, w) in weights.iter_mut().enumerate() {
                        if scores[k] > 1.0 && *w < floor {
                            *w = floor;
                        }
                    }
                    active = (0..self.vertices).collect();
                    prev = f64::INFINITY;
                    continue;
                }
            }
            if finished {
                let local_behavior = Behavior::new_unchecked(
                    self.q.num_outcomes(),
                    p,
                    self.q.settings().clone(),
                )?;
                let result = StrengthResult {
                    divergence_bits: divergence.max(0.0),
                    local_model: LocalModel::from_normalized(weights),
                    local_behavior,
                    certificate_gap: gap,
                    iterations,
                    trace,
                };
                return if gap <= opts.tol {
                    Ok(result)
                } else {
                    Err(Error::NotConverged(Box::new(result)))
                };
            }
            let mut total = 0.0;
            for &k in &active {
                weights[k] *= scores[k];
                total += weights[k];
            }
            for &k in &active {
                // Subnormal weights stall the loop; the floor is far below any resolvable mass.
                weights[k] = (weights[k] / total).max(WEIGHT_FLOOR);
            }
            if opts.prune {
                active.retain(|&k| {
                    if weights[k] < PRUNE_THRESHOLD {
                        weights[k] = 0.0;
                        false
                    } else {
                        true
                    }
                });
            }
            iterations += 1;
        }
    }
}

/// `max_k sum_i q_i V_{k,i} / p_i` over all vertices of the polytope.
///
/// A value of at most `1 + tol` certifies that `p` minimizes `D(q || .)` over
/// the local polytope to within `log2(1 + tol)` bits.
pub fn kkt_certificate(q: &Behavior, p: &Behavior, vertices: &VertexSpace) -> Result<f64> {
    if q.len() != p.len() {
        return Err(Error::Shape("behaviors have different index sets".into()));
    }
    if vertices.num_settings() != q.num_settings() || vertices.num_outcomes() != q.num_outcomes() {
        return Err(Error::Shape("vertex space does not match the behavior".into()));
    }
    let fit = EmFit::new(q, vertices);
    let ratio = fit.ratios(p.probs());
    let mut scores = vec![0.0; fit.vertices];
    fit.scores(&ratio, &mut scores);
    Ok(scores.into_iter().fold(f64::NEG_INFINITY, f64::max))
}
