//! Persistent Betti numbers by explicit Z/2 linear algebra, and diagrams
//! recovered from them by inclusion–exclusion. Independent of [`super::reduce`].

use super::{DiagramPoint, PersistenceDiagram, PersistenceError, HOMOLOGY_DIMS};
use crate::filtration::FilteredComplex;

#[derive(Clone, Debug, PartialEq, Eq)]
struct BitVec(Vec<u64>);

impl BitVec {
    fn zeros(n: usize) -> Self {
        Self(vec![0; n.div_ceil(64)])
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    fn xor(&mut self, other: &Self) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a ^= b;
        }
    }

    fn highest(&self) -> Option<usize> {
        self.0
            .iter()
            .enumerate()
            .rev()
            .find(|(_, w)| **w != 0)
            .map(|(k, w)| k * 64 + 63 - w.leading_zeros() as usize)
    }
}

/// Rank over Z/2 of a set of vectors.
fn rank(mut vectors: Vec<BitVec>) -> usize {
    let mut pivots: Vec<(usize, BitVec)> = Vec::new();
    let mut r = 0;
    for v in vectors.iter_mut() {
        while let Some(h) = v.highest() {
            match pivots.iter().find(|(p, _)| *p == h) {
                Some((_, pv)) => v.xor(pv),
                None => {
                    pivots.push((h, v.clone()));
                    r += 1;
                    break;
                }
            }
        }
    }
    r
}

/// Basis of the kernel of the linear map sending basis vector `k` of the
/// domain to `images[k]`.
fn kernel_basis(images: &[BitVec], domain_size: usize) -> Vec<BitVec> {
    let mut reduced: Vec<(BitVec, BitVec)> = Vec::new();
    let mut kernel = Vec::new();
    for (k, img) in images.iter().enumerate() {
        let mut v = img.clone();
        let mut combo = BitVec::zeros(domain_size);
        combo.set(k);
        loop {
            let Some(h) = v.highest() else {
                kernel.push(combo);
                break;
            };
            match reduced.iter().find(|(r, _)| r.highest() == Some(h)) {
                Some((r, c)) => {
                    v.xor(r);
                    combo.xor(c);
                }
                None => {
                    reduced.push((v, combo));
                    break;
                }
            }
        }
    }
    kernel
}

struct Chains<'a> {
    fc: &'a FilteredComplex,
    /// index of each cell among cells of its dimension
    local: Vec<usize>,
    per_dim: [usize; 3],
}

impl<'a> Chains<'a> {
    fn new(fc: &'a FilteredComplex) -> Self {
        let mut per_dim = [0usize; 3];
        let local = fc
            .cells()
            .iter()
            .map(|c| {
                let k = per_dim[c.dim];
                per_dim[c.dim] += 1;
                k
            })
            .collect();
        Self { fc, local, per_dim }
    }

    /// Boundary vectors of the `dim`-cells with value ≤ `t`, over `(dim-1)`-cells.
    fn boundaries(&self, dim: usize, t: f64) -> Vec<BitVec> {
        let faces = if dim == 0 { 0 } else { self.per_dim[dim - 1] };
        self.fc
            .cells()
            .iter()
            .filter(|c| c.dim == dim && c.value <= t)
            .map(|c| {
                let mut v = BitVec::zeros(faces);
                for &f in &c.boundary {
                    v.set(self.local[f]);
                }
                v
            })
            .collect()
    }

    fn cells_in(&self, dim: usize, t: f64) -> Vec<usize> {
        self.fc
            .cells()
            .iter()
            .enumerate()
            .filter(|(_, c)| c.dim == dim && c.value <= t)
            .map(|(id, _)| self.local[id])
            .collect()
    }

    /// n-cycles of the subcomplex at threshold `t`, as vectors over all n-cells.
    fn cycles(&self, n: usize, t: f64) -> Vec<BitVec> {
        let ids = self.cells_in(n, t);
        let size = self.per_dim[n];
        if n == 0 {
            return ids
                .into_iter()
                .map(|k| {
                    let mut v = BitVec::zeros(size);
                    v.set(k);
                    v
                })
                .collect();
        }
        let images = self.boundaries(n, t);
        kernel_basis(&images, ids.len())
            .into_iter()
            .map(|combo| {
                let mut v = BitVec::zeros(size);
                for (slot, &k) in ids.iter().enumerate() {
                    if combo.get(slot) {
                        v.set(k);
                    }
                }
                v
            })
            .collect()
    }

    fn betti(&self, n: usize, ti: Option<f64>, tj: Option<f64>) -> usize {
        let Some(ti) = ti else { return 0 };
        let tj = tj.expect("j >= i");
        let z = self.cycles(n, ti);
        let b = if n < 2 {
            self.boundaries(n + 1, tj)
        } else {
            Vec::new()
        };
        let rank_b = rank(b.clone());
        let mut all = b;
        all.extend(z);
        rank(all) - rank_b
    }
}

fn threshold(values: &[f64], i: usize) -> Option<f64> {
    if i == 0 {
        None
    } else {
        Some(values[i - 1])
    }
}

/// Rank of `H_n(K_i) → H_n(K_j)` where `K_i` holds the cells with value at
/// most the `i`-th smallest distinct filtration value (`K_0 = ∅`).
pub fn persistent_betti(
    fc: &FilteredComplex,
    n: usize,
    i: usize,
    j: usize,
) -> Result<usize, PersistenceError> {
    let values = fc.distinct_values();
    let d = values.len();
    if i > j || j > d || n > 2 {
        return Err(PersistenceError::IndexOutOfRange { i, j, d });
    }
    let chains = Chains::new(fc);
    Ok(chains.betti(n, threshold(&values, i), threshold(&values, j)))
}

/// All persistent Betti numbers `β[n][i][j]` for `n` in `0..=1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BettiTable {
    values: Vec<f64>,
    beta: Vec<Vec<Vec<usize>>>,
}

impl BettiTable {
    pub fn compute(fc: &FilteredComplex) -> Self {
        let values = fc.distinct_values();
        let d = values.len();
        let chains = Chains::new(fc);
        let beta = (0..HOMOLOGY_DIMS)
            .map(|n| {
                (0..=d)
                    .map(|i| {
                        (0..=d)
                            .map(|j| {
                                if j < i {
                                    0
                                } else {
                                    chains.betti(n, threshold(&values, i), threshold(&values, j))
                                }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self { values, beta }
    }

    /// Table from explicit ranks, indexed `[n][i][j]`, each of size `(d+1)²`.
    pub fn from_raw(values: Vec<f64>, beta: Vec<Vec<Vec<usize>>>) -> Self {
        Self { values, beta }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of distinct filtration values `d`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, n: usize, i: usize, j: usize) -> usize {
        self.beta[n][i][j]
    }
}

/// Multiplicity `μ_n^{i,j}` by inclusion–exclusion on the Betti table.
/// `j = None` stands for `∞` (essential classes).
pub fn multiplicity_ie(
    bt: &BettiTable,
    n: usize,
    i: usize,
    j: Option<usize>,
) -> Result<usize, PersistenceError> {
    let d = bt.len();
    let b = |i: usize, j: usize| bt.get(n, i, j) as i64;
    let (value, jj) = match j {
        Some(j) => {
            if i == 0 || i >= j || j > d {
                return Err(PersistenceError::IndexOutOfRange { i, j, d });
            }
            (b(i, j - 1) - b(i - 1, j - 1) - b(i, j) + b(i - 1, j), j)
        }
        None => {
            if i == 0 || i > d {
                return Err(PersistenceError::IndexOutOfRange { i, j: d, d });
            }
            (b(i, d) - b(i - 1, d), usize::MAX)
        }
    };
    if value < 0 {
        return Err(PersistenceError::NegativeMultiplicity {
            dim: n,
            i,
            j: jj,
            value,
        });
    }
    Ok(value as usize)
}

/// Diagram `{(a_i, a_j) with multiplicity μ_n^{i,j}}` for `n` in `0..=1`.
pub fn diagram_from_betti(bt: &BettiTable) -> Result<PersistenceDiagram, PersistenceError> {
    let d = bt.len();
    let a = bt.values();
    let mut points = Vec::new();
    for n in 0..HOMOLOGY_DIMS {
        for i in 1..=d {
            for j in (i + 1)..=d {
                let mu = multiplicity_ie(bt, n, i, Some(j))?;
                points.push(DiagramPoint::new(n, a[i - 1], a[j - 1]).with_multiplicity(mu));
            }
            let mu = multiplicity_ie(bt, n, i, None)?;
            points.push(DiagramPoint::essential(n, a[i - 1]).with_multiplicity(mu));
        }
    }
    Ok(PersistenceDiagram::new(points).canonical())
}
