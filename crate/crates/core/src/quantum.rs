//! Bipartite pure states, projective measurement families and the quantum
//! behaviors they induce.
//!
//! Behaviors are stored as joint probabilities `q(i_A, i_B, j_A, j_B)` that
//! already include the settings distribution, flattened with the outcome of
//! Bob varying fastest.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

const NORM_TOL: f64 = 1e-12;
const UNITARY_TOL: f64 = 1e-10;
const BEHAVIOR_TOL: f64 = 1e-10;

/// Default cap on the local dimension produced by [`tensor_copies`].
pub const DEFAULT_COPY_DIM_CAP: usize = 4096;

/// Bipartite pure state in Schmidt form over the computational basis,
/// `sum_i c_i |ii>`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtState {
    coeffs: Vec<f64>,
}

impl SchmidtState {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::InvalidDimension(coeffs.len()));
        }
        if let Some(c) = coeffs.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(Error::InvalidCoefficient(format!(
                "Schmidt coefficient {c} is negative or not finite"
            )));
        }
        let norm2: f64 = coeffs.iter().map(|c| c * c).sum();
        if (norm2 - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidCoefficient(format!(
                "squared Schmidt coefficients sum to {norm2}, expected 1"
            )));
        }
        Ok(Self { coeffs })
    }

    /// Builds a state from (unnormalized, nonnegative) squared coefficients.
    pub fn from_squared(weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidCoefficient(
                "squared coefficients must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidCoefficient("all weights are zero".into()));
        }
        let mut coeffs: Vec<f64> = weights.iter().map(|w| (w / total).sqrt()).collect();
        renormalize(&mut coeffs);
        Self::new(coeffs)
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn squared(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c * c).collect()
    }

    /// Same coefficients in descending order.
    pub fn sorted_descending(&self) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.sort_by(|a, b| b.total_cmp(a));
        Self { coeffs }
    }

    /// Embeds the state as a full amplitude vector over `H_A (x) H_B`.
    pub fn to_pure(&self) -> PureState {
        let d = self.dim();
        let mut amps = DVector::from_element(d * d, C64::new(0.0, 0.0));
        for (i, c) in self.coeffs.iter().enumerate() {
            amps[i * d + i] = C64::new(*c, 0.0);
        }
        PureState { dim: d, amplitudes: amps }
    }
}

fn renormalize(coeffs: &mut [f64]) {
    let norm = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
    coeffs.iter_mut().for_each(|c| *c /= norm);
}

/// `|Phi_d> = d^{-1/2} sum_i |ii>`.
pub fn maximally_entangled(d: usize) -> Result<SchmidtState> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let c = 1.0 / (d as f64).sqrt();
    SchmidtState::new(vec![c; d])
}

/// `gamma (|00> + |11>) + sqrt(1 - 2 gamma^2) |22>`.
pub fn three_level_state(gamma: f64) -> Result<SchmidtState> {
    let max = std::f64::consts::FRAC_1_SQRT_2;
    if !(0.0..=max).contains(&gamma) {
        return Err(Error::InvalidCoefficient(format!(
            "gamma = {gamma} outside [0, 1/sqrt(2)]"
        )));
    }
    let last = (1.0 - 2.0 * gamma * gamma).max(0.0).sqrt();
    let mut coeffs = vec![gamma, gamma, last];
    renormalize(&mut coeffs);
    SchmidtState::new(coeffs)
}

/// Entropy of entanglement `S(rho_A)` in bits.
pub fn entropy_of_entanglement(state: &SchmidtState) -> f64 {
    state
        .coeffs
        .iter()
        .map(|c| c * c)
        .filter(|l| *l > 0.0)
        .map(|l| -l * l.log2())
        .sum()
}

/// General bipartite pure state; amplitude `(i, j)` sits at `i * dim + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    dim: usize,
    amplitudes: DVector<C64>,
}

impl PureState {
    pub fn new(dim: usize, amplitudes: DVector<C64>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        if amplitudes.len() != dim * dim {
            return Err(Error::Shape(format!(
                "expected {} amplitudes for d = {dim}, got {}",
                dim * dim,
                amplitudes.len()
            )));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidCoefficient(format!("state norm {norm}, expected 1")));
        }
        Ok(Self { dim, amplitudes })
    }

    /// Normalizes `amplitudes` before validating.
    pub fn normalized(dim: usize, mut amplitudes: DVector<C64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidCoefficient("zero or non-finite state".into()));
        }
        amplitudes.unscale_mut(norm);
        Self::new(dim, amplitudes)
    }

    /// `|a> (x) |b>`.
    pub fn product(a: &DVector<C64>, b: &DVector<C64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::Shape("product factors differ in dimension".into()));
        }
        let d = a.len();
        let amps = DVector::from_fn(d * d, |k, _| a[k / d] * b[k % d]);
        Self::normalized(d, amps)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    /// `d x d` amplitude matrix `Psi[i, j] = <ij|Psi>`.
    pub fn matrix(&self) -> DMatrix<C64> {
        let d = self.dim;
        DMatrix::from_fn(d, d, |i, j| self.amplitudes[i * d + j])
    }

    pub fn with_global_phase(&self, theta: f64) -> Self {
        let phase = C64::from_polar(1.0, theta);
        Self {
            dim: self.dim,
            amplitudes: self.amplitudes.map(|a| a * phase),
        }
    }
}

/// Which side of the experiment a measurement family belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Party {
    Alice,
    Bob,
}

/// Projective measurements for one party: column `j` of basis `a` is the
/// eigenvector for outcome `j` of setting `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSettings {
    dim: usize,
    bases: Vec<DMatrix<C64>>,
}

impl MeasurementSettings {
    pub fn new(dim: usize, bases: Vec<DMatrix<C64>>) -> Result<Self> {
        if bases.is_empty() {
            return Err(Error::Shape("measurement family has no settings".into()));
        }
        for (a, basis) in bases.iter().enumerate() {
            if basis.nrows() != dim || basis.ncols() != dim {
                return Err(Error::Shape(format!(
                    "basis {a} is {}x{}, expected {dim}x{dim}",
                    basis.nrows(),
                    basis.ncols()
                )));
            }
            let dev = unitarity_defect(basis);
            if dev > UNITARY_TOL {
                return Err(Error::InvalidCoefficient(format!(
                    "basis {a} deviates from unitary by {dev:e}"
                )));
            }
        }
        Ok(Self { dim, bases })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_settings(&self) -> usize {
        self.bases.len()
    }

    pub fn num_outcomes(&self) -> usize {
        self.dim
    }

    pub fn basis(&self, setting: usize) -> &DMatrix<C64> {
        &self.bases[setting]
    }

    pub fn bases(&self) -> &[DMatrix<C64>] {
        &self.bases
    }
}

/// Max-abs entry of `U^dagger U - 1`.
pub fn unitarity_defect(u: &DMatrix<C64>) -> f64 {
    let g = u.adjoint() * u;
    g.iter()
        .enumerate()
        .map(|(k, z)| {
            let (i, j) = (k % g.nrows(), k / g.nrows());
            let target = if i == j { 1.0 } else { 0.0 };
            (z - C64::new(target, 0.0)).norm()
        })
        .fold(0.0, f64::max)
}

/// The two-setting CGLMP measurements.
///
/// Alice applies `diag(e^{i phi_a(j)})` with `phi_1 = 0`, `phi_2 = pi j / d`,
/// then the Fourier transform `U_FT[j, k] = e^{2 pi i jk/d} / sqrt(d)`; Bob
/// applies phases `+-pi j / (2d)` followed by the conjugate transform. Both
/// then read out the computational basis, so the returned eigenvectors are
/// the columns of `(U_FT D_a)^dagger`.
///
/// The phases are evaluated at label `j - 1 mod d`. This fixes which Schmidt
/// slot the measurements single out: for d = 3 it is `|22>`, matching the
/// ordering produced by [`three_level_state`].
pub fn cglmp_measurements(d: usize, party: Party) -> Result<MeasurementSettings> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let df = d as f64;
    let phases: [fn(f64, f64) -> f64; 2] = match party {
        Party::Alice => [|_, _| 0.0, |j, d| PI * j / d],
        Party::Bob => [|j, d| PI * j / (2.0 * d), |j, d| -PI * j / (2.0 * d)],
    };
    let sign = match party {
        Party::Alice => 1.0,
        Party::Bob => -1.0,
    };
    let norm = 1.0 / df.sqrt();
    let bases = phases
        .iter()
        .map(|phase| {
            // U[k, j] = F[k, j] e^{i phase(j)}; eigenvector for outcome k is row k of U, conjugated.
            // The phase ramp is read on labels shifted by one, so it wraps between |0> and |1>.
            DMatrix::from_fn(d, d, |j, k| {
                let label = ((j + d - 1) % d) as f64;
                let angle = sign * 2.0 * PI * (j * k) as f64 / df + phase(label, df);
                C64::from_polar(norm, -angle)
            })
        })
        .collect();
    MeasurementSettings::new(d, bases)
}

/// Distribution `p_M(i_A, i_B)` over setting pairs, row-major in `i_A`.
#[derive(Debug, Clone, PartialEq)]
pub struct SettingsDistribution {
    m: usize,
    probs: Vec<f64>,
}

impl SettingsDistribution {
    pub fn new(m: usize, probs: Vec<f64>) -> Result<Self> {
        if m == 0 || probs.len() != m * m {
            return Err(Error::Shape(format!(
                "settings distribution needs {} entries, got {}",
                m * m,
                probs.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidBehavior("negative settings probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidBehavior(format!(
                "settings distribution sums to {total}"
            )));
        }
        Ok(Self { m, probs })
    }

    pub fn uniform(m: usize) -> Self {
        let p = 1.0 / (m * m) as f64;
        Self { m, probs: vec![p; m * m] }
    }

    pub fn num_settings(&self) -> usize {
        self.m
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, ia: usize, ib: usize) -> f64 {
        self.probs[ia * self.m + ib]
    }

    /// Joint distribution of two independent setting choices, with the first
    /// factor's index most significant.
    pub fn tensor(&self, other: &Self) -> Self {
        let (m1, m2) = (self.m, other.m);
        let m = m1 * m2;
        let mut probs = vec![0.0; m * m];
        for a1 in 0..m1 {
            for b1 in 0..m1 {
                for a2 in 0..m2 {
                    for b2 in 0..m2 {
                        probs[(a1 * m2 + a2) * m + (b1 * m2 + b2)] =
                            self.get(a1, b1) * other.get(a2, b2);
                    }
                }
            }
        }
        Self { m, probs }
    }
}

/// Joint probability vector `q(i_A, i_B, j_A, j_B)` of an `m x n` Bell test.
#[derive(Debug, Clone, PartialEq)]
pub struct Behavior {
    m: usize,
    n: usize,
    probs: Vec<f64>,
    settings: SettingsDistribution,
}

impl Behavior {
    /// Validates nonnegativity, total mass and the settings marginals.
    pub fn new(n: usize, probs: Vec<f64>, settings: SettingsDistribution) -> Result<Self> {
        let b = Self::new_unchecked(n, probs, settings)?;
        b.validate()?;
        Ok(b)
    }

    pub(crate) fn new_unchecked(
        n: usize,
        probs: Vec<f64>,
        settings: SettingsDistribution,
    ) -> Result<Self> {
        let m = settings.num_settings();
        if probs.len() != m * m * n * n {
            return Err(Error::Shape(format!(
                "behavior for m = {m}, n = {n} needs {} entries, got {}",
                m * m * n * n,
                probs.len()
            )));
        }
        Ok(Self { m, n, probs, settings })
    }

    fn validate(&self) -> Result<()> {
        if let Some(p) = self.probs.iter().find(|p| !p.is_finite() || **p < -BEHAVIOR_TOL) {
            return Err(Error::InvalidBehavior(format!("entry {p} is negative")));
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > BEHAVIOR_TOL {
            return Err(Error::InvalidBehavior(format!("entries sum to {total}")));
        }
        let nn = self.n * self.n;
        for (s, cell) in self.probs.chunks(nn).enumerate() {
            let marginal: f64 = cell.iter().sum();
            let expect = self.settings.probs[s];
            if (marginal - expect).abs() > BEHAVIOR_TOL {
                return Err(Error::InvalidBehavior(format!(
                    "settings pair {s} carries mass {marginal}, settings distribution says {expect}"
                )));
            }
        }
        Ok(())
    }

    pub fn num_settings(&self) -> usize {
        self.m
    }

    pub fn num_outcomes(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn settings(&self) -> &SettingsDistribution {
        &self.settings
    }

    pub fn index(&self, ia: usize, ib: usize, ja: usize, jb: usize) -> usize {
        ((ia * self.m + ib) * self.n + ja) * self.n + jb
    }

    pub fn get(&self, ia: usize, ib: usize, ja: usize, jb: usize) -> f64 {
        self.probs[self.index(ia, ib, ja, jb)]
    }

    /// `p(j_A, j_B | i_A, i_B)`; zero when the setting pair is never chosen.
    pub fn conditional(&self, ia: usize, ib: usize, ja: usize, jb: usize) -> f64 {
        let pm = self.settings.get(ia, ib);
        if pm > 0.0 {
            self.get(ia, ib, ja, jb) / pm
        } else {
            0.0
        }
    }

    /// Conditional distributions for every setting pair, same layout as `probs`.
    pub fn conditionals(&self) -> Vec<f64> {
        let nn = self.n * self.n;
        self.probs
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let pm = self.settings.probs[k / nn];
                if pm > 0.0 {
                    p / pm
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Same conditional distributions under a different settings distribution.
    pub fn with_settings(&self, settings: SettingsDistribution) -> Result<Self> {
        if settings.num_settings() != self.m {
            return Err(Error::Shape("settings count differs".into()));
        }
        let nn = self.n * self.n;
        let mut probs = self.conditionals();
        for (k, p) in probs.iter_mut().enumerate() {
            *p *= settings.probs[k / nn];
        }
        Behavior::new(self.n, probs, settings)
    }

    /// Largest violation of no-signaling over both parties.
    pub fn no_signaling_violation(&self) -> f64 {
        let (m, n) = (self.m, self.n);
        let mut worst: f64 = 0.0;
        // Alice's marginal p(j_A | i_A, i_B) must not depend on i_B.
        for ia in 0..m {
            for ja in 0..n {
                let marginals: Vec<f64> = (0..m)
                    .filter(|&ib| self.settings.get(ia, ib) > 0.0)
                    .map(|ib| (0..n).map(|jb| self.conditional(ia, ib, ja, jb)).sum())
                    .collect();
                worst = worst.max(spread(&marginals));
            }
        }
        for ib in 0..m {
            for jb in 0..n {
                let marginals: Vec<f64> = (0..m)
                    .filter(|&ia| self.settings.get(ia, ib) > 0.0)
                    .map(|ia| (0..n).map(|ja| self.conditional(ia, ib, ja, jb)).sum())
                    .collect();
                worst = worst.max(spread(&marginals));
            }
        }
        worst
    }

    /// Behavior of two independent runs, read as one `m1 m2 x n1 n2` test.
    pub fn tensor(&self, other: &Self) -> Self {
        let settings = self.settings.tensor(&other.settings);
        let (m1, n1, m2, n2) = (self.m, self.n, other.m, other.n);
        let (m, n) = (m1 * m2, n1 * n2);
        let mut probs = vec![0.0; m * m * n * n];
        for a1 in 0..m1 {
            for b1 in 0..m1 {
                for x1 in 0..n1 {
                    for y1 in 0..n1 {
                        let p1 = self.get(a1, b1, x1, y1);
                        if p1 == 0.0 {
                            continue;
                        }
                        for a2 in 0..m2 {
                            for b2 in 0..m2 {
                                for x2 in 0..n2 {
                                    for y2 in 0..n2 {
                                        let ia = a1 * m2 + a2;
                                        let ib = b1 * m2 + b2;
                                        let ja = x1 * n2 + x2;
                                        let jb = y1 * n2 + y2;
                                        probs[((ia * m + ib) * n + ja) * n + jb] =
                                            p1 * other.get(a2, b2, x2, y2);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Self { m, n, probs, settings }
    }
}

fn spread(xs: &[f64]) -> f64 {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if xs.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// `q(i_A,i_B,j_A,j_B) = |<a^{i_A}_{j_A} b^{i_B}_{j_B}|Psi>|^2 p_M(i_A,i_B)`.
pub fn quantum_behavior(
    state: &PureState,
    alice: &MeasurementSettings,
    bob: &MeasurementSettings,
    settings: &SettingsDistribution,
) -> Result<Behavior> {
    let d = state.dim();
    if alice.dim() != d || bob.dim() != d {
        return Err(Error::Shape(format!(
            "state has d = {d}, measurements have {} and {}",
            alice.dim(),
            bob.dim()
        )));
    }
    let m = alice.num_settings();
    if bob.num_settings() != m || settings.num_settings() != m {
        return Err(Error::Shape(format!(
            "setting counts differ: Alice {m}, Bob {}, distribution {}",
            bob.num_settings(),
            settings.num_settings()
        )));
    }
    let n = d;
    let psi = state.matrix();
    let mut probs = vec![0.0; m * m * n * n];
    for ia in 0..m {
        let left = alice.basis(ia).adjoint() * &psi;
        for ib in 0..m {
            // amplitude[j_A, j_B] = sum_xy conj(A[x, j_A]) Psi[x, y] conj(B[y, j_B])
            let amp = &left * bob.basis(ib).conjugate();
            let pm = settings.get(ia, ib);
            let base = (ia * m + ib) * n * n;
            for ja in 0..n {
                for jb in 0..n {
                    probs[base + ja * n + jb] = amp[(ja, jb)].norm_sqr() * pm;
                }
            }
        }
    }
    Behavior::new(n, probs, settings.clone())
}

/// Quantum behavior of a Schmidt state under the CGLMP measurements and
/// uniformly random settings.
pub fn cglmp_behavior(state: &SchmidtState) -> Result<Behavior> {
    let d = state.dim();
    quantum_behavior(
        &state.to_pure(),
        &cglmp_measurements(d, Party::Alice)?,
        &cglmp_measurements(d, Party::Bob)?,
        &SettingsDistribution::uniform(2),
    )
}

/// Schmidt form of a pure state: `|Psi> = sum_k s_k |u_k> |v_k>`.
#[derive(Debug, Clone)]
pub struct SchmidtDecomposition {
    /// Coefficients in descending order.
    pub state: SchmidtState,
    /// Column `k` is `|u_k>`.
    pub basis_a: DMatrix<C64>,
    /// Column `k` is `|v_k>`.
    pub basis_b: DMatrix<C64>,
}

impl SchmidtDecomposition {
    pub fn reconstruct(&self) -> DVector<C64> {
        let d = self.state.dim();
        DVector::from_fn(d * d, |idx, _| {
            let (i, j) = (idx / d, idx % d);
            self.state
                .coeffs()
                .iter()
                .enumerate()
                .map(|(k, s)| self.basis_a[(i, k)] * self.basis_b[(j, k)] * *s)
                .sum()
        })
    }
}

pub fn schmidt_decompose(state: &PureState) -> Result<SchmidtDecomposition> {
    let d = state.dim();
    let svd = state.matrix().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^dagger");
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut coeffs: Vec<f64> = order.iter().map(|&k| svd.singular_values[k].max(0.0)).collect();
    renormalize(&mut coeffs);
    // Psi = U S V^dagger, so |v_k> has components conj(V[j, k]) = V^dagger[k, j].
    let basis_a = DMatrix::from_fn(d, d, |i, k| u[(i, order[k])]);
    let basis_b = DMatrix::from_fn(d, d, |j, k| v_t[(order[k], j)]);
    Ok(SchmidtDecomposition {
        state: SchmidtState::new(coeffs)?,
        basis_a,
        basis_b,
    })
}

fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

fn tensor_measurements(base: &MeasurementSettings, k: usize) -> Result<MeasurementSettings> {
    let mut bases = base.bases().to_vec();
    let mut dim = base.dim();
    for _ in 1..k {
        bases = bases
            .iter()
            .flat_map(|acc| base.bases().iter().map(move |b| kron(acc, b)))
            .collect();
        dim *= base.dim();
    }
    MeasurementSettings::new(dim, bases)
}

/// `k` independent copies of a test, read as one test with `m^k` settings and
/// `n^k` outcomes per party.
pub fn tensor_copies(
    state: &SchmidtState,
    alice: &MeasurementSettings,
    bob: &MeasurementSettings,
    k: usize,
    dim_cap: usize,
) -> Result<(SchmidtState, MeasurementSettings, MeasurementSettings)> {
    if k == 0 {
        return Err(Error::InvalidParameter("number of copies must be >= 1".into()));
    }
    if alice.dim() != state.dim() || bob.dim() != state.dim() {
        return Err(Error::Shape("measurement and state dimensions differ".into()));
    }
    let needed = (state.dim() as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
    if needed > dim_cap as u128 {
        return Err(Error::ResourceLimit {
            what: "tensor-copy local dimension",
            needed,
            cap: dim_cap as u128,
        });
    }
    if k == 1 {
        return Ok((state.clone(), alice.clone(), bob.clone()));
    }
    let mut coeffs = state.coeffs().to_vec();
    for _ in 1..k {
        coeffs = coeffs
            .iter()
            .flat_map(|a| state.coeffs().iter().map(move |b| a * b))
            .collect();
    }
    renormalize(&mut coeffs);
    Ok((
        SchmidtState::new(coeffs)?,
        tensor_measurements(alice, k)?,
        tensor_measurements(bob, k)?,
    ))
}
