//! Bell functionals, the compact CGLMP family and Bell operators.
//!
//! A [`BellFunctional`] acts on conditional probabilities `p(j_A, j_B | i_A, i_B)`.
//! A [`BellOperator`] is `sum_i w_i A^{i_A}_{j_A} (x) B^{i_B}_{j_B}` for a weight
//! vector laid out like a [`Behavior`], so its expectation on a state is the
//! weighted sum of that state's joint probabilities.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::local::{VertexSpace, DEFAULT_VERTEX_CAP};
use crate::quantum::{
    quantum_behavior, Behavior, MeasurementSettings, PureState, SchmidtState, SettingsDistribution,
    C64,
};

/// Whether local models satisfy `value >= bound` (`Min`) or `value <= bound` (`Max`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BellFunctional {
    m: usize,
    n: usize,
    coeffs: Vec<f64>,
    bound: f64,
    direction: Direction,
}

impl BellFunctional {
    /// Builds a functional and computes its exact local bound by vertex enumeration.
    pub fn new(m: usize, n: usize, coeffs: Vec<f64>, direction: Direction) -> Result<Self> {
        if coeffs.len() != m * m * n * n {
            return Err(Error::Shape(format!(
                "functional for m = {m}, n = {n} needs {} coefficients, got {}",
                m * m * n * n,
                coeffs.len()
            )));
        }
        let mut f = Self {
            m,
            n,
            coeffs,
            bound: 0.0,
            direction,
        };
        f.bound = local_bound(&f)?;
        Ok(f)
    }

    pub fn num_settings(&self) -> usize {
        self.m
    }

    pub fn num_outcomes(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn coeff(&self, ia: usize, ib: usize, ja: usize, jb: usize) -> f64 {
        self.coeffs[((ia * self.m + ib) * self.n + ja) * self.n + jb]
    }

    /// Value on the conditional distributions of `b`.
    pub fn evaluate(&self, b: &Behavior) -> Result<f64> {
        if b.num_settings() != self.m || b.num_outcomes() != self.n {
            return Err(Error::Shape("behavior does not match functional".into()));
        }
        Ok(self.coeffs.iter().zip(b.conditionals()).map(|(c, p)| c * p).sum())
    }

    /// Whether `value` lies outside the local region.
    pub fn violated_by(&self, value: f64, tol: f64) -> bool {
        match self.direction {
            Direction::Min => value < self.bound - tol,
            Direction::Max => value > self.bound + tol,
        }
    }
}

/// `[x] = x mod d` in `0..d`.
fn bracket(x: i64, d: usize) -> f64 {
    x.rem_euclid(d as i64) as f64
}

/// The CGLMP functional in compact modular form,
/// `<[A1 - B1] + [B1 - A2] + [A2 - B2] + [B2 - A1 - 1]> >= d - 1`,
/// with `<X> = sum_k k p(X = k)`.
pub fn cglmp_functional(d: usize) -> Result<BellFunctional> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let (m, n) = (2, d);
    let mut coeffs = vec![0.0; m * m * n * n];
    for ja in 0..n {
        for jb in 0..n {
            let (a, b) = (ja as i64, jb as i64);
            // Term labels A1/A2, B1/B2 name our settings 2/1 of each party;
            // this is the labeling under which the CGLMP measurements
            // attain the quantum minimum.
            let terms = [
                ((1, 1), bracket(a - b, d)),     // [A1 - B1]
                ((0, 1), bracket(b - a, d)),     // [B1 - A2]
                ((0, 0), bracket(a - b, d)),     // [A2 - B2]
                ((1, 0), bracket(b - a - 1, d)), // [B2 - A1 - 1]
            ];
            for ((ia, ib), value) in terms {
                coeffs[((ia * m + ib) * n + ja) * n + jb] = value;
            }
        }
    }
    BellFunctional::new(m, n, coeffs, Direction::Min)
}

/// Exact local optimum of `f` (min or max per its direction) over all
/// deterministic strategies.
pub fn local_bound(f: &BellFunctional) -> Result<f64> {
    let space = VertexSpace::with_cap(f.m, f.n, DEFAULT_VERTEX_CAP)?;
    let mm = f.m * f.m;
    let table = space.cell_table();
    let values = table
        .chunks_exact(mm)
        .map(|cells| cells.iter().map(|&c| f.coeffs[c as usize]).sum::<f64>());
    Ok(match f.direction {
        Direction::Min => values.fold(f64::INFINITY, f64::min),
        Direction::Max => values.fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Value of `f` on the conditional quantum probabilities of `state`.
pub fn quantum_value(
    f: &BellFunctional,
    state: &PureState,
    alice: &MeasurementSettings,
    bob: &MeasurementSettings,
) -> Result<f64> {
    let q = quantum_behavior(state, alice, bob, &SettingsDistribution::uniform(alice.num_settings()))?;
    f.evaluate(&q)
}

/// Hermitian operator on `C^d (x) C^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct BellOperator {
    matrix: DMatrix<C64>,
}

impl BellOperator {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::Shape("Bell operator must be square".into()));
        }
        let op = Self { matrix };
        let defect = op.hermiticity_defect();
        let scale = op.matrix.iter().map(|z| z.norm()).fold(1.0, f64::max);
        if defect > 1e-10 * scale {
            return Err(Error::InvalidParameter(format!(
                "operator is not Hermitian (defect {defect:e})"
            )));
        }
        Ok(op)
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// `<v|M|v>` for a normalized vector.
    pub fn expectation(&self, v: &DVector<C64>) -> f64 {
        v.dotc(&(&self.matrix * v)).re
    }
}

fn check_weight_layout(weights: &[f64], alice: &MeasurementSettings, bob: &MeasurementSettings) -> Result<(usize, usize)> {
    let (m, n) = (alice.num_settings(), alice.num_outcomes());
    if bob.num_settings() != m || bob.dim() != alice.dim() {
        return Err(Error::Shape("Alice and Bob measurement families differ in shape".into()));
    }
    if weights.len() != m * m * n * n {
        return Err(Error::Shape(format!(
            "{} weights for a {m} x {n} test",
            weights.len()
        )));
    }
    Ok((m, n))
}

/// `M = sum_i w_i A^{i_A}_{j_A} (x) B^{i_B}_{j_B}` on the full `d^2` space.
pub fn projector_operator(
    weights: &[f64],
    alice: &MeasurementSettings,
    bob: &MeasurementSettings,
) -> Result<BellOperator> {
    let (m, n) = check_weight_layout(weights, alice, bob)?;
    let dd = alice.dim() * bob.dim();
    let mut matrix = DMatrix::from_element(dd, dd, C64::new(0.0, 0.0));
    for ia in 0..m {
        for ib in 0..m {
            let base = (ia * m + ib) * n * n;
            let w = &weights[base..base + n * n];
            if w.iter().all(|x| *x == 0.0) {
                continue;
            }
            // Columns of A (x) B are the product eigenvectors, ordered (j_A, j_B).
            let k = alice.basis(ia).kronecker(bob.basis(ib));
            let mut scaled = k.clone();
            for (col, wk) in w.iter().enumerate() {
                scaled.column_mut(col).scale_mut(*wk);
            }
            matrix += scaled * k.adjoint();
        }
    }
    let matrix = (&matrix + matrix.adjoint()).scale(0.5);
    BellOperator::new(matrix)
}

/// The same operator compressed to `span{|xx>}`: `M[x, y] = <xx|M|yy>`.
///
/// Its top eigenvector is the best state whose Schmidt basis is the
/// computational one.
pub fn schmidt_subspace_operator(
    weights: &[f64],
    alice: &MeasurementSettings,
    bob: &MeasurementSettings,
) -> Result<BellOperator> {
    let (m, n) = check_weight_layout(weights, alice, bob)?;
    let d = alice.dim();
    let mut matrix = DMatrix::from_element(d, d, C64::new(0.0, 0.0));
    for ia in 0..m {
        for ib in 0..m {
            let base = (ia * m + ib) * n * n;
            let a = alice.basis(ia);
            let b = bob.basis(ib);
            // v_{j_A j_B}(x) = a_{j_A}(x) b_{j_B}(x)
            let mut v = DMatrix::from_element(d, n * n, C64::new(0.0, 0.0));
            let mut scaled = v.clone();
            for ja in 0..n {
                for jb in 0..n {
                    let w = weights[base + ja * n + jb];
                    for x in 0..d {
                        let z = a[(x, ja)] * b[(x, jb)];
                        v[(x, ja * n + jb)] = z;
                        scaled[(x, ja * n + jb)] = z * w;
                    }
                }
            }
            matrix += scaled * v.adjoint();
        }
    }
    let matrix = (&matrix + matrix.adjoint()).scale(0.5);
    BellOperator::new(matrix)
}

/// Bell operator of the log-likelihood ratio,
/// `M = sum_i log2(q_i / p_i) p_M(i_A, i_B) A (x) B`, in bits.
///
/// Its expectation on the state that generated `q` is `D(q || p)`.
pub fn log_ratio_operator(
    q: &Behavior,
    p: &Behavior,
    alice: &MeasurementSettings,
    bob: &MeasurementSettings,
) -> Result<BellOperator> {
    let weights = log_ratio_weights(q, p)?;
    projector_operator(&weights, alice, bob)
}

/// `log2(q_i / p_i) p_M(i_A, i_B)` for every cell of a chosen setting pair.
pub fn log_ratio_weights(q: &Behavior, p: &Behavior) -> Result<Vec<f64>> {
    if q.len() != p.len() || q.num_settings() != p.num_settings() {
        return Err(Error::Shape("behaviors have different index sets".into()));
    }
    let nn = q.num_outcomes() * q.num_outcomes();
    let pm = q.settings().probs();
    let qc = q.conditionals();
    let pc = p.conditionals();
    qc.iter()
        .zip(&pc)
        .enumerate()
        .map(|(i, (&qi, &pi))| {
            let w = pm[i / nn];
            if w == 0.0 {
                Ok(0.0)
            } else if qi <= 0.0 || pi <= 0.0 {
                Err(Error::SingularRatio {
                    index: i,
                    q: q.probs()[i],
                    p: p.probs()[i],
                })
            } else {
                Ok((qi / pi).log2() * w)
            }
        })
        .collect()
}

/// Dominant eigenpair of a Hermitian operator.
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub value: f64,
    /// Unit eigenvector.
    pub vector: DVector<C64>,
    /// `||M v - lambda v||`.
    pub residual: f64,
    /// Gap to the next eigenvalue fell below 1e-10; any unit vector in the
    /// top eigenspace is an equally valid answer.
    pub degenerate: bool,
}

impl Eigenpair {
    /// Interprets the eigenvector of a full `d^2` operator as a state.
    pub fn state(&self, d: usize) -> Result<PureState> {
        PureState::normalized(d, self.vector.clone())
    }

    /// Interprets the eigenvector of a Schmidt-subspace operator as
    /// `sum_x v_x |xx>`, with phases rotated away.
    ///
    /// The phases only matter for fixed measurements, so callers that keep
    /// the measurements should use [`Eigenpair::schmidt_pure_state`].
    pub fn schmidt_state(&self) -> Result<SchmidtState> {
        let coeffs: Vec<f64> = self.vector.iter().map(|z| z.norm()).collect();
        SchmidtState::from_squared(&coeffs.iter().map(|c| c * c).collect::<Vec<_>>())
    }

    /// `sum_x v_x |xx>` as a full pure state, phases kept.
    pub fn schmidt_pure_state(&self) -> Result<PureState> {
        let d = self.vector.len();
        let mut amps = DVector::from_element(d * d, C64::new(0.0, 0.0));
        for x in 0..d {
            amps[x * d + x] = self.vector[x];
        }
        PureState::normalized(d, amps)
    }
}

pub const DENSE_EIGEN_MAX_DIM: usize = 512;
const EIGEN_RESIDUAL_TOL: f64 = 1e-9;
const POWER_MAX_ITER: usize = 100_000;
const DEGENERACY_GAP: f64 = 1e-10;

/// Largest eigenvalue and its eigenvector.
///
/// Dense Hermitian decomposition up to [`DENSE_EIGEN_MAX_DIM`], shifted power
/// iteration above.
pub fn top_eigenpair(op: &BellOperator) -> Result<Eigenpair> {
    if op.dim() <= DENSE_EIGEN_MAX_DIM {
        dense_top(op)
    } else {
        power_top(op)
    }
}

fn residual(op: &BellOperator, v: &DVector<C64>, value: f64) -> f64 {
    (op.matrix() * v - v.scale(value)).norm()
}

fn dense_top(op: &BellOperator) -> Result<Eigenpair> {
    let eig = op.matrix().clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..op.dim()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = order[0];
    let value = eig.eigenvalues[top];
    let vector = fix_phase(eig.eigenvectors.column(top).into_owned());
    let degenerate = order
        .get(1)
        .is_some_and(|&k| value - eig.eigenvalues[k] < DEGENERACY_GAP);
    let res = residual(op, &vector, value);
    let scale = value.abs().max(1.0);
    if res > EIGEN_RESIDUAL_TOL * scale {
        return Err(Error::EigenNotConverged {
            iterations: 0,
            residual: res,
        });
    }
    Ok(Eigenpair {
        value,
        vector,
        residual: res,
        degenerate,
    })
}

fn power_top(op: &BellOperator) -> Result<Eigenpair> {
    let m = op.matrix();
    let dim = op.dim();
    // Gershgorin bound: M + shift is positive semidefinite, so the top
    // eigenvalue of M becomes the dominant one.
    let shift = (0..dim)
        .map(|i| m.row(i).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut v = DVector::from_fn(dim, |i, _| C64::new(1.0 + (i as f64 * 0.618_033_988_7).fract(), 0.0));
    v.unscale_mut(v.norm());
    let mut value = op.expectation(&v);
    let mut res = f64::INFINITY;
    for it in 1..=POWER_MAX_ITER {
        let w = m * &v + v.scale(shift);
        let norm = w.norm();
        if norm == 0.0 {
            break;
        }
        v = w.unscale(norm);
        if it % 10 == 0 {
            value = op.expectation(&v);
            res = residual(op, &v, value);
            if res <= EIGEN_RESIDUAL_TOL * value.abs().max(1.0) {
                return Ok(Eigenpair {
                    value,
                    vector: fix_phase(v),
                    residual: res,
                    degenerate: false,
                });
            }
        }
    }
    let _ = value;
    Err(Error::EigenNotConverged {
        iterations: POWER_MAX_ITER,
        residual: res,
    })
}

/// Rotates the global phase so the largest component is real and positive.
fn fix_phase(mut v: DVector<C64>) -> DVector<C64> {
    if let Some(big) = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())) {
        if big.norm() > 0.0 {
            let phase = big.conj() / big.norm();
            v.iter_mut().for_each(|z| *z *= phase);
        }
    }
    v
}

/// Offset `a` in `r = a - b c` that makes the local maximum of
/// `sum_i r_i p_i` exactly one, for uniformly chosen settings.
pub fn tilted_cglmp_offset(d: usize, b: f64) -> f64 {
    // min over vertices of sum_i c_i V_i = (d - 1) / 4 with p_M = 1/4.
    1.0 + b * (d as f64 - 1.0) / 4.0
}

/// Largest `b` keeping every tilted ratio positive.
pub fn tilted_cglmp_max_b(d: usize) -> f64 {
    // a - b (d - 1) > 0  <=>  b < 4 / (3 (d - 1))
    4.0 / (3.0 * (d as f64 - 1.0))
}

/// One-parameter family of likelihood ratios `r_i = a - b c_i` built from the
/// CGLMP coefficients, normalized so that `max_L sum_i r_i p_i = 1` under
/// uniform settings.
pub fn tilted_cglmp_ratios(d: usize, b: f64) -> Result<Vec<f64>> {
    let f = cglmp_functional(d)?;
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::InvalidParameter(format!("tilt b = {b} must be > 0")));
    }
    let a = tilted_cglmp_offset(d, b);
    let ratios: Vec<f64> = f.coeffs().iter().map(|c| a - b * c).collect();
    if let Some(r) = ratios.iter().find(|r| **r <= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tilt b = {b} gives ratio {r} <= 0 (need b < {})",
            tilted_cglmp_max_b(d)
        )));
    }
    Ok(ratios)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{cglmp_measurements, maximally_entangled, Party};
    use approx::assert_abs_diff_eq;

    #[test]
    fn cglmp_bounds_small_d() {
        assert_eq!(cglmp_functional(2).unwrap().bound(), 1.0);
        assert_eq!(cglmp_functional(3).unwrap().bound(), 2.0);
        assert_eq!(local_bound(&cglmp_functional(4).unwrap()).unwrap(), 3.0);
        assert!(matches!(cglmp_functional(1), Err(Error::InvalidDimension(1))));
    }

    #[test]
    fn zero_functional_bound() {
        let f = BellFunctional::new(2, 3, vec![0.0; 36], Direction::Max).unwrap();
        assert_eq!(f.bound(), 0.0);
    }

    #[test]
    fn chsh_quantum_value() {
        let f = cglmp_functional(2).unwrap();
        let v = quantum_value(
            &f,
            &maximally_entangled(2).unwrap().to_pure(),
            &cglmp_measurements(2, Party::Alice).unwrap(),
            &cglmp_measurements(2, Party::Bob).unwrap(),
        )
        .unwrap();
        assert_abs_diff_eq!(v, 2.0 - 2f64.sqrt(), epsilon = 1e-12);
        assert!(f.violated_by(v, 1e-9));
    }

    #[test]
    fn identity_and_diagonal_eigenpairs() {
        let id = BellOperator::new(DMatrix::identity(4, 4)).unwrap();
        let e = top_eigenpair(&id).unwrap();
        assert_abs_diff_eq!(e.value, 1.0, epsilon = 1e-14);
        assert!(e.degenerate);

        let mut diag = DMatrix::from_element(4, 4, C64::new(0.0, 0.0));
        for (k, x) in [3.0, 1.0, 0.5, -2.0].iter().enumerate() {
            diag[(k, k)] = C64::new(*x, 0.0);
        }
        let e = top_eigenpair(&BellOperator::new(diag).unwrap()).unwrap();
        assert_abs_diff_eq!(e.value, 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.vector[0].re, 1.0, epsilon = 1e-12);
        assert!(!e.degenerate);
    }

    #[test]
    fn power_iteration_agrees_with_dense() {
        // Random Hermitian matrix with a clear top gap.
        let n = 40;
        let mut m = DMatrix::from_fn(n, n, |i, j| {
            C64::new(((i * 7 + j * 13) % 11) as f64 / 11.0, ((i * 3 + j * 5) % 7) as f64 / 7.0)
        });
        m = (&m + m.adjoint()).scale(0.5);
        m[(0, 0)] += C64::new(10.0, 0.0);
        let op = BellOperator::new(m).unwrap();
        let dense = dense_top(&op).unwrap();
        let power = power_top(&op).unwrap();
        assert_abs_diff_eq!(dense.value, power.value, epsilon = 1e-9);
        assert!(power.residual <= 1e-9 * power.value.abs().max(1.0));
        let overlap = dense.vector.dotc(&power.vector).norm();
        assert_abs_diff_eq!(overlap, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut m = DMatrix::from_element(2, 2, C64::new(0.0, 0.0));
        m[(0, 1)] = C64::new(1.0, 0.0);
        assert!(BellOperator::new(m).is_err());
    }

    #[test]
    fn tilted_ratios_limits() {
        let r = tilted_cglmp_ratios(3, 1e-12).unwrap();
        assert!(r.iter().all(|x| (x - 1.0).abs() < 1e-11));
        assert!(tilted_cglmp_ratios(3, 0.0).is_err());
        assert!(tilted_cglmp_ratios(3, tilted_cglmp_max_b(3) * 1.01).is_err());
        assert!(tilted_cglmp_ratios(3, tilted_cglmp_max_b(3) * 0.99).is_ok());
    }

    #[test]
    fn singular_ratio_rejected() {
        let pm = SettingsDistribution::uniform(2);
        let q = crate::quantum::cglmp_behavior(&maximally_entangled(2).unwrap()).unwrap();
        let v = crate::local::vertex_behavior(&VertexSpace::new(2, 2).unwrap().get(0), &pm).unwrap();
        let err = log_ratio_weights(&q, &v).unwrap_err();
        assert!(matches!(err, Error::SingularRatio { .. }));
    }
}
