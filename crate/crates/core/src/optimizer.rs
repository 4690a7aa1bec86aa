//! Maximizing statistical strength over states for the fixed CGLMP
//! measurements.
//!
//! Two routes are provided. The exact route maximizes `min_kl_local` directly
//! over Schmidt coefficients and is limited by vertex enumeration. The
//! conjectured route assumes the optimal likelihood ratios are a tilted CGLMP
//! functional, `r = a - b c`, and reduces the problem to a scan over `b` of
//! top eigenvalues. For every `b` the eigenvalue is a lower bound on the true
//! optimum, so the two routes agree exactly when the conjecture holds.

use std::fmt;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bell::{
    log_ratio_operator, projector_operator, schmidt_subspace_operator, tilted_cglmp_max_b,
    tilted_cglmp_ratios, top_eigenpair, Eigenpair,
};
use crate::error::{Error, Result};
use crate::local::{CopyVertexSpace, VertexSpace, DEFAULT_VERTEX_CAP};
use crate::quantum::{
    cglmp_measurements, entropy_of_entanglement, maximally_entangled, quantum_behavior,
    schmidt_decompose, tensor_copies, Behavior, MeasurementSettings, Party, PureState,
    SchmidtState, SettingsDistribution, C64, DEFAULT_COPY_DIM_CAP,
};
use crate::strength::{
    kl_divergence, min_kl_copy_local, min_kl_local, min_kl_local_with, FitOptions, StrengthResult,
};

/// Largest `d` handled by the exact route when the mode is chosen automatically.
pub const EXACT_MAX_DIM: usize = 6;

/// Largest `d` for which the conjectured route diagonalizes the full `d^2`
/// operator; above it the operator is compressed to `span{|xx>}`.
pub const FULL_OPERATOR_MAX_DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Conjectured,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Exact => "exact",
            Mode::Conjectured => "conjectured",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Mode::Exact),
            "conjectured" => Ok(Mode::Conjectured),
            _ => Err(Error::InvalidParameter(format!("unknown mode {s:?}"))),
        }
    }
}

/// Outcome of one state optimization.
#[derive(Debug, Clone)]
pub struct OptimizationReport {
    pub dim: usize,
    pub mode: Mode,
    /// Schmidt coefficients of the optimum, descending.
    pub best_state: SchmidtState,
    /// The optimal state itself, in the frame the measurements act on.
    pub state: PureState,
    pub divergence_bits: f64,
    pub entanglement_bits: f64,
    /// Tilt `b` of the conjectured route.
    pub parameter: Option<f64>,
    /// Conjectured route: `|sum_i q_i / r_i - 1|`, plus `|D - min_kl_local(q)|`
    /// when the latter was computed. Exact route: the inner certificate gap.
    pub consistency_residual: f64,
    /// Certificate gap of the local fit at the optimum, when one was run.
    pub certificate_gap: Option<f64>,
    pub converged: bool,
    /// Best divergence after each outer step.
    pub trace: Vec<f64>,
}

impl OptimizationReport {
    #[allow(clippy::too_many_arguments)]
    fn new(
        mode: Mode,
        state: PureState,
        divergence_bits: f64,
        parameter: Option<f64>,
        consistency_residual: f64,
        certificate_gap: Option<f64>,
        converged: bool,
        trace: Vec<f64>,
    ) -> Result<Self> {
        let best_state = schmidt_decompose(&state)?.state;
        Ok(Self {
            dim: state.dim(),
            mode,
            entanglement_bits: entropy_of_entanglement(&best_state),
            best_state,
            state,
            divergence_bits,
            parameter,
            consistency_residual,
            certificate_gap,
            converged,
            trace,
        })
    }

    /// Coefficients `c_x` when the optimum is `sum_x c_x |xx>` with real
    /// nonnegative `c_x`, in the computational order the measurements see.
    pub fn frame_state(&self) -> Option<SchmidtState> {
        let d = self.dim;
        let m = self.state.matrix();
        let mut coeffs = Vec::with_capacity(d);
        for x in 0..d {
            for y in 0..d {
                let z = m[(x, y)];
                if x == y {
                    if z.im.abs() > 1e-9 || z.re < -1e-9 {
                        return None;
                    }
                    coeffs.push(z.re.max(0.0));
                } else if z.norm() > 1e-9 {
                    return None;
                }
            }
        }
        let total: f64 = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
        coeffs.iter_mut().for_each(|c| *c /= total);
        SchmidtState::new(coeffs).ok()
    }
}

fn frame_pure_state(coeffs: &[f64]) -> Result<PureState> {
    let d = coeffs.len();
    let mut amps = DVector::from_element(d * d, C64::new(0.0, 0.0));
    for (x, c) in coeffs.iter().enumerate() {
        amps[x * d + x] = C64::new(*c, 0.0);
    }
    PureState::normalized(d, amps)
}

fn check_frame(d: usize, alice: &MeasurementSettings, bob: &MeasurementSettings) -> Result<()> {
    if alice.dim() != d || bob.dim() != d {
        return Err(Error::Shape(format!(
            "measurements act on d = {} and {}, expected {d}",
            alice.dim(),
            bob.dim()
        )));
    }
    Ok(())
}

/// Knobs for [`optimize_state_exact`].
#[derive(Debug, Clone)]
pub struct ExactOptions {
    /// Certificate gap of every inner local fit.
    pub inner_tol: f64,
    /// Stop once a full sweep gains less than this many bits.
    pub outer_tol: f64,
    /// Golden-section resolution in the softmax coordinates.
    pub xtol: f64,
    pub max_sweeps: usize,
    /// Starting squared coefficients; maximally entangled when `None`.
    pub initial: Option<Vec<f64>>,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self {
            inner_tol: 1e-10,
            outer_tol: 1e-9,
            xtol: 1e-6,
            max_sweeps: 60,
            initial: None,
        }
    }
}

/// Memoizing objective for the exact route. Each local fit starts from the
/// previous optimum, which is close because successive states are close.
struct ExactObjective<'a> {
    alice: &'a MeasurementSettings,
    bob: &'a MeasurementSettings,
    settings: &'a SettingsDistribution,
    tol: f64,
    warm: Option<Vec<f64>>,
}

impl ExactObjective<'_> {
    fn fit(&mut self, coeffs: &[f64]) -> Result<(Behavior, StrengthResult)> {
        let state = frame_pure_state(coeffs)?;
        let q = quantum_behavior(&state, self.alice, self.bob, self.settings)?;
        let opts = FitOptions {
            warm_start: self.warm.clone(),
            ..FitOptions::with_tol(self.tol)
        };
        let fit = min_kl_local_with(&q, &opts)?;
        let floor = 1e-9 / fit.local_model.weights().len() as f64;
        let warm: Vec<f64> = fit.local_model.weights().iter().map(|w| w.max(floor)).collect();
        let total: f64 = warm.iter().sum();
        self.warm = Some(warm.into_iter().map(|w| w / total).collect());
        Ok((q, fit))
    }

    fn value(&mut self, theta: &[f64]) -> Result<f64> {
        Ok(self.fit(&softmax_coeffs(theta))?.1.divergence_bits)
    }
}

/// Schmidt coefficients from unconstrained coordinates: squared coefficients
/// are `softmax(0, theta)`.
fn softmax_coeffs(theta: &[f64]) -> Vec<f64> {
    let top = theta.iter().copied().fold(0.0, f64::max);
    let mut w: Vec<f64> = std::iter::once(0.0)
        .chain(theta.iter().copied())
        .map(|t| (t - top).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x = (*x / total).sqrt());
    w
}

fn softmax_inverse(squared: &[f64]) -> Result<Vec<f64>> {
    if squared.len() < 2 || squared.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::InvalidCoefficient(
            "initial squared coefficients must all be > 0".into(),
        ));
    }
    Ok(squared[1..].iter().map(|w| (w / squared[0]).ln()).collect())
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Maximizes `f` on `[lo, hi]`; returns the best point seen and its value.
/// `start` (with its known value) competes with the bracket's points.
fn golden_max<F>(mut f: F, lo: f64, hi: f64, xtol: f64, start: (f64, f64)) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (lo, hi);
    let mut best = start;
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for (x, v) in [(x1, f1), (x2, f2)] {
        if v > best.1 {
            best = (x, v);
        }
    }
    while b - a > xtol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = f(x1)?;
            if f1 > best.1 {
                best = (x1, f1);
            }
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = f(x2)?;
            if f2 > best.1 {
                best = (x2, f2);
            }
        }
    }
    Ok(best)
}

/// Maximizes `min_kl_local` over states `sum_x c_x |xx>` for fixed
/// measurements, by coordinate-wise golden-section search.
pub fn optimize_state_exact(
    alice: &MeasurementSettings,
    bob: &MeasurementSettings,
    settings: &SettingsDistribution,
    opts: &ExactOptions,
) -> Result<OptimizationReport> {
    let d = alice.dim();
    check_frame(d, alice, bob)?;
    let mut theta = match &opts.initial {
        Some(w) if w.len() == d => softmax_inverse(w)?,
        Some(w) => {
            return Err(Error::Shape(format!("{} initial weights for d = {d}", w.len())));
        }
        None => vec![0.0; d - 1],
    };
    let mut obj = ExactObjective {
        alice,
        bob,
        settings,
        tol: opts.inner_tol,
        warm: None,
    };
    let ctx = |e: Error| e.context(format!("exact optimization at d = {d}"));
    let mut best = obj.value(&theta).map_err(ctx)?;
    let mut trace = vec![best];
    let mut step = 1.0f64;
    let mut converged = false;
    for _ in 0..opts.max_sweeps {
        let before = best;
        let mut moved = 0.0f64;
        for k in 0..theta.len() {
            let t0 = theta[k];
            let mut probe = theta.clone();
            let (t, v) = golden_max(
                |t| {
                    probe[k] = t;
                    obj.value(&probe)
                },
                t0 - step,
                t0 + step,
                opts.xtol,
                (t0, best),
            )
            .map_err(ctx)?;
            theta[k] = t;
            best = v;
            moved = moved.max((t - t0).abs());
        }
        trace.push(best);
        let gain = best - before;
        step = (4.0 * moved).clamp(10.0 * opts.xtol, 1.0);
        if gain < opts.outer_tol && moved < 10.0 * opts.xtol.max(1e-9) {
            converged = true;
            break;
        }
        if gain < opts.outer_tol && step <= 10.0 * opts.xtol {
            converged = true;
            break;
        }
    }
    let coeffs = softmax_coeffs(&theta);
    let (_, fit) = obj.fit(&coeffs).map_err(ctx)?;
    OptimizationReport::new(
        Mode::Exact,
        frame_pure_state(&coeffs)?,
        fit.divergence_bits,
        None,
        fit.certificate_gap,
        Some(fit.certificate_gap),
        converged,
        trace,
    )
}

/// [`optimize_state_exact`] for the CGLMP test of dimension `d` with uniform settings.
pub fn optimize_cglmp_exact(d: usize, opts: &ExactOptions) -> Result<OptimizationReport> {
    optimize_state_exact(
        &cglmp_measurements(d, Party::Alice)?,
        &cglmp_measurements(d, Party::Bob)?,
        &SettingsDistribution::uniform(2),
        opts,
    )
}

/// Knobs for [`seesaw`].
#[derive(Debug, Clone)]
pub struct SeesawOptions {
    /// Certificate gap of every local fit.
    pub inner_tol: f64,
    /// Stop when the divergence gain or the state change drops below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SeesawOptions {
    fn default() -> Self {
        Self {
            inner_tol: 1e-10,
            tol: 1e-9,
            max_iter: 500,
        }
    }
}

/// Alternates the best local fit with the top eigenvector of the log-ratio
/// operator. Steps toward the eigenvector are halved until the divergence
/// increases; a step that cannot be made to increase it ends the run.
pub fn seesaw(
    initial: &PureState,
    alice: &MeasurementSettings,
    bob: &MeasurementSettings,
    settings: &SettingsDistribution,
    opts: &SeesawOptions,
) -> Result<OptimizationReport> {
    let d = initial.dim();
    check_frame(d, alice, bob)?;
    let ctx = |e: Error| e.context(format!("seesaw at d = {d}"));
    let fit_state = |s: &PureState| -> Result<(Behavior, StrengthResult)> {
        let q = quantum_behavior(s, alice, bob, settings)?;
        let fit = min_kl_local(&q, opts.inner_tol)?;
        Ok((q, fit))
    };
    let mut state = initial.clone();
    let (mut q, mut fit) = fit_state(&state).map_err(ctx)?;
    let mut trace = vec![fit.divergence_bits];
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let op = log_ratio_operator(&q, &fit.local_behavior, alice, bob).map_err(ctx)?;
        let target = top_eigenpair(&op).map_err(ctx)?.vector;
        let overlap = target.dotc(state.amplitudes());
        let align = if overlap.norm() > 0.0 {
            overlap / overlap.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        let target = target * align;
        let mut accepted = None;
        let mut t = 1.0;
        while t > 1.0 / 1024.0 {
            let mixed = state.amplitudes() * C64::new(1.0 - t, 0.0) + &target * C64::new(t, 0.0);
            if let Ok(candidate) = PureState::normalized(d, mixed) {
                let (cq, cfit) = fit_state(&candidate).map_err(ctx)?;
                if cfit.divergence_bits > fit.divergence_bits {
                    accepted = Some((candidate, cq, cfit));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((candidate, cq, cfit)) = accepted else {
            converged = true;
            break;
        };
        let gain = cfit.divergence_bits - fit.divergence_bits;
        let change = (candidate.amplitudes() - state.amplitudes()).norm();
        state = candidate;
        q = cq;
        fit = cfit;
        trace.push(fit.divergence_bits);
        if gain < opts.tol || change < opts.tol {
            converged = true;
            break;
        }
    }
    OptimizationReport::new(
        Mode::Exact,
        state,
        fit.divergence_bits,
        None,
        fit.certificate_gap,
        Some(fit.certificate_gap),
        converged,
        trace,
    )
}

/// Knobs for [`conjectured_optimum`].
#[derive(Debug, Clone)]
pub struct ConjecturedOptions {
    /// Points of the coarse scan over `(0, b_max)`.
    pub grid: usize,
    /// Golden-section rounds after the scan; each shrinks the bracket by
    /// `0.618^20`.
    pub refine_rounds: usize,
    /// Run `min_kl_local` on the resulting behavior up to this dimension.
    pub verify_max_dim: usize,
    pub inner_tol: f64,
}

impl Default for ConjecturedOptions {
    fn default() -> Self {
        Self {
            grid: 64,
            refine_rounds: 3,
            verify_max_dim: EXACT_MAX_DIM,
            inner_tol: 1e-10,
        }
    }
}

struct TiltProbe {
    b: f64,
    value: f64,
    pair: Eigenpair,
    full: bool,
}

fn tilt_probe(
    d: usize,
    b: f64,
    alice: &MeasurementSettings,
    bob: &MeasurementSettings,
) -> Result<TiltProbe> {
    let mut b = b;
    for _ in 0..4 {
        let ratios = tilted_cglmp_ratios(d, b)?;
        let pm = 0.25;
        let weights: Vec<f64> = ratios.iter().map(|r| r.log2() * pm).collect();
        let full = d <= FULL_OPERATOR_MAX_DIM;
        let op = if full {
            projector_operator(&weights, alice, bob)?
        } else {
            schmidt_subspace_operator(&weights, alice, bob)?
        };
        let pair = top_eigenpair(&op)?;
        if !pair.degenerate {
            return Ok(TiltProbe {
                b,
                value: pair.value,
                pair,
                full,
            });
        }
        b *= 1.0 + 1e-6;
    }
    Err(Error::InvalidParameter(format!(
        "top eigenvalue stays degenerate near b = {b} at d = {d}"
    )))
}

/// Best state under the tilted-CGLMP assumption on the optimal likelihood
/// ratios. The reported divergence is the top eigenvalue at the best tilt.
pub fn conjectured_optimum(d: usize, opts: &ConjecturedOptions) -> Result<OptimizationReport> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if opts.grid < 3 {
        return Err(Error::InvalidParameter("b grid needs at least 3 points".into()));
    }
    let alice = cglmp_measurements(d, Party::Alice)?;
    let bob = cglmp_measurements(d, Party::Bob)?;
    let ctx = |e: Error| e.context(format!("conjectured optimum at d = {d}"));
    let b_max = tilted_cglmp_max_b(d);
    let grid: Vec<f64> = (1..=opts.grid)
        .map(|k| b_max * k as f64 / (opts.grid + 1) as f64)
        .collect();
    let probes: Vec<TiltProbe> = grid
        .par_iter()
        .map(|&b| tilt_probe(d, b, &alice, &bob))
        .collect::<Result<_>>()
        .map_err(ctx)?;
    let k = (0..probes.len())
        .max_by(|&i, &j| probes[i].value.total_cmp(&probes[j].value))
        .expect("non-empty grid");
    let mut trace: Vec<f64> = vec![probes[k].value];
    let mut lo = if k == 0 { 0.0 } else { grid[k - 1] };
    let mut hi = if k + 1 == grid.len() { b_max } else { grid[k + 1] };
    let mut best = probes.into_iter().nth(k).expect("index in range");
    for _ in 0..opts.refine_rounds {
        let xtol = (hi - lo) * GOLDEN.powi(20);
        let mut found: Option<TiltProbe> = None;
        let (b, _) = golden_max(
            |b| {
                let p = tilt_probe(d, b, &alice, &bob)?;
                let v = p.value;
                if found.as_ref().is_none_or(|f| v > f.value) {
                    found = Some(p);
                }
                Ok(v)
            },
            lo.max(xtol),
            hi.min(b_max - xtol),
            xtol,
            (best.b, best.value),
        )
        .map_err(ctx)?;
        if let Some(p) = found.filter(|p| p.value > best.value) {
            best = p;
        }
        trace.push(best.value);
        let half = (hi - lo) * 0.5 * GOLDEN.powi(10);
        lo = (b - half).max(0.0);
        hi = (b + half).min(b_max);
    }
    let state = if best.full {
        best.pair.state(d)?
    } else {
        best.pair.schmidt_pure_state()?
    };
    let settings = SettingsDistribution::uniform(2);
    let q = quantum_behavior(&state, &alice, &bob, &settings)?;
    let ratios = tilted_cglmp_ratios(d, best.b)?;
    let divergence: f64 = q
        .probs()
        .iter()
        .zip(&ratios)
        .map(|(qi, r)| qi * r.log2())
        .sum();
    let normalization: f64 = q.probs().iter().zip(&ratios).map(|(qi, r)| qi / r).sum();
    let mut residual = (normalization - 1.0).abs();
    let mut gap = None;
    if d <= opts.verify_max_dim {
        let fit = min_kl_local(&q, opts.inner_tol).map_err(ctx)?;
        residual += (fit.divergence_bits - divergence).abs();
        gap = Some(fit.certificate_gap);
    }
    OptimizationReport::new(
        Mode::Conjectured,
        state,
        divergence,
        Some(best.b),
        residual,
        gap,
        true,
        trace,
    )
}

/// Exact route up to [`EXACT_MAX_DIM`], conjectured above.
pub fn optimize_auto(d: usize, tol: f64) -> Result<OptimizationReport> {
    if d <= EXACT_MAX_DIM {
        optimize_cglmp_exact(
            d,
            &ExactOptions {
                inner_tol: tol.min(1e-10),
                ..ExactOptions::default()
            },
        )
    } else {
        conjectured_optimum(d, &ConjecturedOptions::default())
    }
}

/// Strength of a configuration as the settings distribution is perturbed
/// away from uniform.
#[derive(Debug, Clone)]
pub struct SettingsReport {
    pub uniform_bits: f64,
    /// Every probed distribution with its strength.
    pub samples: Vec<(Vec<f64>, f64)>,
    /// Probe with the largest strength.
    pub worst_direction: Vec<f64>,
    /// Its strength minus the uniform strength.
    pub worst_excess: f64,
    pub is_local_max: bool,
}

/// Moves probability `eps` between every ordered pair of setting pairs and
/// compares strengths with the uniform choice.
pub fn verify_uniform_settings(
    state: &PureState,
    alice: &MeasurementSettings,
    bob: &MeasurementSettings,
    epsilons: &[f64],
    tol: f64,
) -> Result<SettingsReport> {
    let m = alice.num_settings();
    let mm = m * m;
    let uniform = SettingsDistribution::uniform(m);
    let strength = |pm: &SettingsDistribution| -> Result<f64> {
        let q = quantum_behavior(state, alice, bob, pm)?;
        Ok(min_kl_local(&q, 1e-11)?.divergence_bits)
    };
    let uniform_bits = strength(&uniform)?;
    let mut probes = Vec::new();
    for &eps in epsilons {
        if !(eps > 0.0 && eps < 1.0 / mm as f64) {
            return Err(Error::InvalidParameter(format!(
                "perturbation {eps} must lie in (0, {})",
                1.0 / mm as f64
            )));
        }
        for s in 0..mm {
            for t in 0..mm {
                if s != t {
                    let mut p = uniform.probs().to_vec();
                    p[s] -= eps;
                    p[t] += eps;
                    probes.push(p);
                }
            }
        }
    }
    let samples: Vec<(Vec<f64>, f64)> = probes
        .into_par_iter()
        .map(|p| {
            let v = strength(&SettingsDistribution::new(m, p.clone())?)?;
            Ok((p, v))
        })
        .collect::<Result<_>>()?;
    let (worst_direction, worst) = samples
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .cloned()
        .unwrap_or_else(|| (uniform.probs().to_vec(), uniform_bits));
    let worst_excess = worst - uniform_bits;
    Ok(SettingsReport {
        uniform_bits,
        samples,
        worst_direction,
        worst_excess,
        is_local_max: worst_excess <= tol,
    })
}

/// `k` independent runs of an optimal test compared with a single test of
/// the same total outcome count.
#[derive(Debug, Clone)]
pub struct AdditivityReport {
    pub d_base: usize,
    pub copies: usize,
    pub single_bits: f64,
    /// `copies * single_bits`.
    pub product_bits: f64,
    /// Explicit strength of the product behavior against local models whose
    /// outcomes for each copy depend only on that copy's settings.
    pub verified_bits: Option<f64>,
    pub verified_certificate_gap: Option<f64>,
    /// `D(q^k || p^k)` for the product of the single-copy local optimum.
    pub product_model_bits: Option<f64>,
    /// Strength against every local model of the product test read as one
    /// `m^k x n^k` test. Smaller than `product_bits` in general.
    pub unrestricted_bits: Option<f64>,
    /// `d_base^copies`.
    pub comparison_dim: usize,
    /// Conjectured strength of the single `2 x comparison_dim` test.
    pub comparison_bits: Option<f64>,
    pub product_wins: Option<bool>,
}

pub fn additivity_comparison(d_base: usize, copies: usize, tol: f64) -> Result<AdditivityReport> {
    if copies == 0 {
        return Err(Error::InvalidParameter("number of copies must be >= 1".into()));
    }
    let comparison_dim = (d_base as u128)
        .checked_pow(copies as u32)
        .filter(|n| *n <= DEFAULT_COPY_DIM_CAP as u128)
        .ok_or(Error::ResourceLimit {
            what: "tensor-copy local dimension",
            needed: (d_base as u128).saturating_pow(copies as u32),
            cap: DEFAULT_COPY_DIM_CAP as u128,
        })? as usize;
    let single = optimize_auto(d_base, tol)?;
    let mut report = AdditivityReport {
        d_base,
        copies,
        single_bits: single.divergence_bits,
        product_bits: copies as f64 * single.divergence_bits,
        verified_bits: None,
        verified_certificate_gap: None,
        product_model_bits: None,
        unrestricted_bits: None,
        comparison_dim,
        comparison_bits: None,
        product_wins: None,
    };
    if copies == 1 {
        return Ok(report);
    }
    let space = CopyVertexSpace::new(2, d_base, copies, DEFAULT_VERTEX_CAP);
    if let (Ok(space), Some(frame)) = (space, single.frame_state()) {
        let ctx = |e: Error| e.context(format!("{copies} copies of the d = {d_base} test"));
        let alice = cglmp_measurements(d_base, Party::Alice)?;
        let bob = cglmp_measurements(d_base, Party::Bob)?;
        let base_q = quantum_behavior(&frame.to_pure(), &alice, &bob, &SettingsDistribution::uniform(2))?;
        let (state, ak, bk) = tensor_copies(&frame, &alice, &bob, copies, DEFAULT_COPY_DIM_CAP)?;
        let q = quantum_behavior(&state.to_pure(), &ak, &bk, &SettingsDistribution::uniform(space.num_settings()))?;
        let base_fit = min_kl_local(&base_q, tol).map_err(ctx)?;
        let mut p = base_fit.local_behavior.clone();
        for _ in 1..copies {
            p = p.tensor(&base_fit.local_behavior);
        }
        report.product_model_bits = Some(kl_divergence(q.probs(), p.probs()));
        let fit = min_kl_copy_local(&q, &space, &FitOptions::with_tol(tol)).map_err(ctx)?;
        report.verified_bits = Some(fit.divergence_bits);
        report.verified_certificate_gap = Some(fit.certificate_gap);
        if VertexSpace::for_behavior(&q, DEFAULT_VERTEX_CAP).is_ok() {
            let opts = FitOptions {
                prune: true,
                ..FitOptions::with_tol(tol)
            };
            report.unrestricted_bits = Some(min_kl_local_with(&q, &opts).map_err(ctx)?.divergence_bits);
        }
    }
    if comparison_dim != d_base {
        let single_test = conjectured_optimum(
            comparison_dim,
            &ConjecturedOptions {
                verify_max_dim: 0,
                ..ConjecturedOptions::default()
            },
        )?;
        report.comparison_bits = Some(single_test.divergence_bits);
        report.product_wins = Some(report.product_bits > single_test.divergence_bits);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// Exact up to [`EXACT_MAX_DIM`], conjectured above.
    Auto,
    Exact,
    Conjectured,
}

impl std::str::FromStr for SweepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(SweepMode::Auto),
            "exact" => Ok(SweepMode::Exact),
            "conjectured" => Ok(SweepMode::Conjectured),
            _ => Err(Error::InvalidParameter(format!("unknown mode {s:?}"))),
        }
    }
}

/// One dimension of a sweep; failures are kept instead of aborting the sweep.
#[derive(Debug)]
pub struct SweepRow {
    pub d: usize,
    pub result: Result<OptimizationReport>,
}

/// Optimal strength and entanglement for every `d` in `d_min..=d_max`.
pub fn figure1_sweep(d_min: usize, d_max: usize, mode: SweepMode, tol: f64) -> Result<Vec<SweepRow>> {
    if d_min < 2 || d_max < d_min {
        return Err(Error::InvalidParameter(format!("bad dimension range {d_min}..={d_max}")));
    }
    Ok((d_min..=d_max)
        .into_par_iter()
        .map(|d| {
            let result = match mode {
                SweepMode::Auto => optimize_auto(d, tol),
                SweepMode::Exact => optimize_cglmp_exact(
                    d,
                    &ExactOptions {
                        inner_tol: tol.min(1e-10),
                        ..ExactOptions::default()
                    },
                ),
                SweepMode::Conjectured => conjectured_optimum(d, &ConjecturedOptions::default()),
            };
            SweepRow { d, result }
        })
        .collect())
}

/// `|Phi_d>` strength for the CGLMP test, the baseline every optimum must beat.
pub fn maximally_entangled_strength(d: usize, tol: f64) -> Result<f64> {
    let q = quantum_behavior(
        &maximally_entangled(d)?.to_pure(),
        &cglmp_measurements(d, Party::Alice)?,
        &cglmp_measurements(d, Party::Bob)?,
        &SettingsDistribution::uniform(2),
    )?;
    Ok(min_kl_local(&q, tol)?.divergence_bits)
}
