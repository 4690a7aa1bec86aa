//! Deterministic local strategies (vertices of the local polytope) and
//! convex mixtures over them.

use crate::error::{Error, Result};
use crate::quantum::{Behavior, SettingsDistribution};

/// Default cap on `n^{2m}`.
pub const DEFAULT_VERTEX_CAP: u128 = 10_000_000;

/// One vertex: each party answers setting `i` with a fixed outcome.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DeterministicStrategy {
    pub alice: Vec<usize>,
    pub bob: Vec<usize>,
    pub outcomes: usize,
}

/// The `n^{2m}` deterministic strategies of an `m x n` test in canonical
/// order: digits base `n`, Alice's setting 0 fastest, then the rest of
/// Alice's map, then Bob's.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VertexSpace {
    m: usize,
    n: usize,
    count: usize,
}

impl VertexSpace {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        Self::with_cap(m, n, DEFAULT_VERTEX_CAP)
    }

    pub fn with_cap(m: usize, n: usize, cap: u128) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::Shape(format!("empty vertex space m = {m}, n = {n}")));
        }
        let needed = (n as u128).checked_pow(2 * m as u32).unwrap_or(u128::MAX);
        if needed > cap {
            return Err(Error::ResourceLimit {
                what: "local polytope vertices",
                needed,
                cap,
            });
        }
        Ok(Self {
            m,
            n,
            count: needed as usize,
        })
    }

    pub fn for_behavior(q: &Behavior, cap: u128) -> Result<Self> {
        Self::with_cap(q.num_settings(), q.num_outcomes(), cap)
    }

    pub fn num_settings(&self) -> usize {
        self.m
    }

    pub fn num_outcomes(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn get(&self, mut index: usize) -> DeterministicStrategy {
        let mut digits = Vec::with_capacity(2 * self.m);
        for _ in 0..2 * self.m {
            digits.push(index % self.n);
            index /= self.n;
        }
        let bob = digits.split_off(self.m);
        DeterministicStrategy {
            alice: digits,
            bob,
            outcomes: self.n,
        }
    }

    pub fn index_of(&self, v: &DeterministicStrategy) -> usize {
        v.alice
            .iter()
            .chain(&v.bob)
            .rev()
            .fold(0, |acc, &digit| acc * self.n + digit)
    }

    pub fn iter(&self) -> impl Iterator<Item = DeterministicStrategy> + '_ {
        (0..self.count).map(|k| self.get(k))
    }

    /// Flat behavior indices hit by every vertex: entry `k * m^2 + s` is the
    /// cell of vertex `k` under setting pair `s = i_A m + i_B`.
    pub fn cell_table(&self) -> Vec<u32> {
        let (m, n) = (self.m, self.n);
        let mm = m * m;
        let mut table = Vec::with_capacity(self.count * mm);
        let mut digits = vec![0usize; 2 * m];
        for _ in 0..self.count {
            for ia in 0..m {
                for ib in 0..m {
                    let cell = ((ia * m + ib) * n + digits[ia]) * n + digits[m + ib];
                    table.push(cell as u32);
                }
            }
            for d in digits.iter_mut() {
                *d += 1;
                if *d < n {
                    break;
                }
                *d = 0;
            }
        }
        table
    }
}

/// Deterministic strategies of a `copies`-fold product test in which each
/// copy's outcome depends only on that copy's setting.
///
/// Settings and outcomes of the product test are mixed-radix numbers with the
/// first copy most significant. A vertex is `2 * copies` single-copy maps,
/// Alice's copies first, each map `m` digits base `n` with setting 0 fastest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CopyVertexSpace {
    m: usize,
    n: usize,
    copies: usize,
    count: usize,
}

impl CopyVertexSpace {
    pub fn new(m: usize, n: usize, copies: usize, cap: u128) -> Result<Self> {
        if m == 0 || n == 0 || copies == 0 {
            return Err(Error::Shape(format!(
                "empty copy space m = {m}, n = {n}, copies = {copies}"
            )));
        }
        let needed = (n as u128)
            .checked_pow((2 * m * copies) as u32)
            .unwrap_or(u128::MAX);
        let cells = (m as u128)
            .checked_pow(2 * copies as u32)
            .and_then(|s| s.checked_mul((n as u128).checked_pow(2 * copies as u32)?))
            .unwrap_or(u128::MAX);
        if needed > cap {
            return Err(Error::ResourceLimit {
                what: "copy-respecting vertices",
                needed,
                cap,
            });
        }
        if cells > u32::MAX as u128 {
            return Err(Error::ResourceLimit {
                what: "product behavior entries",
                needed: cells,
                cap: u32::MAX as u128,
            });
        }
        Ok(Self {
            m,
            n,
            copies,
            count: needed as usize,
        })
    }

    /// Settings per party of the product test.
    pub fn num_settings(&self) -> usize {
        self.m.pow(self.copies as u32)
    }

    /// Outcomes per party of the product test.
    pub fn num_outcomes(&self) -> usize {
        self.n.pow(self.copies as u32)
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Same layout as [`VertexSpace::cell_table`], for the product test.
    pub fn cell_table(&self) -> Vec<u32> {
        let (m, n, k) = (self.m, self.n, self.copies);
        let (big_m, big_n) = (self.num_settings(), self.num_outcomes());
        let mm = big_m * big_m;
        // Single-copy digits of every product setting, first copy first.
        let split: Vec<Vec<usize>> = (0..big_m)
            .map(|mut s| {
                let mut d = vec![0; k];
                for c in (0..k).rev() {
                    d[c] = s % m;
                    s /= m;
                }
                d
            })
            .collect();
        let outcome = |maps: &[usize], s: usize| -> usize {
            split[s]
                .iter()
                .enumerate()
                .fold(0, |acc, (c, &sc)| acc * n + maps[c * m + sc])
        };
        let mut table = Vec::with_capacity(self.count * mm);
        let mut digits = vec![0usize; 2 * m * k];
        for _ in 0..self.count {
            let (alice, bob) = digits.split_at(m * k);
            for sa in 0..big_m {
                let ja = outcome(alice, sa);
                for sb in 0..big_m {
                    let jb = outcome(bob, sb);
                    table.push((((sa * big_m + sb) * big_n + ja) * big_n + jb) as u32);
                }
            }
            for d in digits.iter_mut() {
                *d += 1;
                if *d < n {
                    break;
                }
                *d = 0;
            }
        }
        table
    }
}

/// All deterministic strategies for `m` settings and `n` outcomes.
pub fn enumerate_vertices(m: usize, n: usize) -> Result<Vec<DeterministicStrategy>> {
    Ok(VertexSpace::new(m, n)?.iter().collect())
}

/// `p_M(i_A, i_B) [j_A = alice(i_A)] [j_B = bob(i_B)]`.
pub fn vertex_behavior(v: &DeterministicStrategy, settings: &SettingsDistribution) -> Result<Behavior> {
    let m = settings.num_settings();
    let n = v.outcomes;
    if v.alice.len() != m || v.bob.len() != m {
        return Err(Error::Shape(format!(
            "strategy has {}/{} settings, distribution has {m}",
            v.alice.len(),
            v.bob.len()
        )));
    }
    if v.alice.iter().chain(&v.bob).any(|&j| j >= n) {
        return Err(Error::Shape("strategy outcome out of range".into()));
    }
    let mut probs = vec![0.0; m * m * n * n];
    for ia in 0..m {
        for ib in 0..m {
            probs[((ia * m + ib) * n + v.alice[ia]) * n + v.bob[ib]] = settings.get(ia, ib);
        }
    }
    Behavior::new(n, probs, settings.clone())
}

/// Convex weights over a list of vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalModel {
    weights: Vec<f64>,
}

impl LocalModel {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Shape("local model has no weights".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidCoefficient("negative mixture weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidCoefficient(format!("weights sum to {total}")));
        }
        Ok(Self { weights })
    }

    pub(crate) fn from_normalized(weights: Vec<f64>) -> Self {
        Self { weights }
    }

    pub fn uniform(len: usize) -> Self {
        Self {
            weights: vec![1.0 / len as f64; len],
        }
    }

    pub fn point_mass(len: usize, index: usize) -> Self {
        let mut weights = vec![0.0; len];
        weights[index] = 1.0;
        Self { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Vertex indices with weight above `threshold`, heaviest first.
    pub fn support(&self, threshold: f64) -> Vec<(usize, f64)> {
        let mut s: Vec<(usize, f64)> = self
            .weights
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, w)| *w > threshold)
            .collect();
        s.sort_by(|a, b| b.1.total_cmp(&a.1));
        s
    }
}

/// Behavior of a mixture of vertices.
pub fn model_behavior(
    model: &LocalModel,
    vertices: &[DeterministicStrategy],
    settings: &SettingsDistribution,
) -> Result<Behavior> {
    if model.weights.len() != vertices.len() {
        return Err(Error::Shape(format!(
            "{} weights for {} vertices",
            model.weights.len(),
            vertices.len()
        )));
    }
    let first = vertices
        .first()
        .ok_or_else(|| Error::Shape("no vertices".into()))?;
    let (m, n) = (settings.num_settings(), first.outcomes);
    let mut probs = vec![0.0; m * m * n * n];
    for (w, v) in model.weights.iter().zip(vertices) {
        if *w == 0.0 {
            continue;
        }
        let vb = vertex_behavior(v, settings)?;
        for (p, x) in probs.iter_mut().zip(vb.probs()) {
            *p += w * x;
        }
    }
    Behavior::new(n, probs, settings.clone())
}

/// Mixture behavior over a whole vertex space given its cell table.
pub(crate) fn mixture_probs(
    weights: &[f64],
    table: &[u32],
    settings: &SettingsDistribution,
    len: usize,
) -> Vec<f64> {
    let pm = settings.probs();
    let mm = pm.len();
    let mut probs = vec![0.0; len];
    for (w, cells) in weights.iter().zip(table.chunks_exact(mm)) {
        if *w == 0.0 {
            continue;
        }
        for (s, &c) in cells.iter().enumerate() {
            probs[c as usize] += w * pm[s];
        }
    }
    probs
}
