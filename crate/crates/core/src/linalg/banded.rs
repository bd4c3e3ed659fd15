use super::{reverse_cuthill_mckee, CsrMatrix};
use crate::{Error, Result};

/// LU factorization with partial pivoting of a banded matrix.
///
/// Row `i` stores columns `i - kl ..= i + kl + ku`; the extra `kl` upper
/// diagonals hold fill created by row interchanges.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    /// Factors `a` (square) using its own lower/upper bandwidths.
    pub fn factor(a: &CsrMatrix, what: &str) -> Result<Self> {
        let n = a.nrows();
        let (mut kl, mut ku) = (0usize, 0usize);
        for r in 0..n {
            for (c, _) in a.row(r) {
                if c < r {
                    kl = kl.max(r - c);
                } else {
                    ku = ku.max(c - r);
                }
            }
        }
        let width = 2 * kl + ku + 1;
        let mut lu = BandedLu {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
            pivots: vec![0; n],
        };
        for r in 0..n {
            for (c, v) in a.row(r) {
                *lu.at_mut(r, c) += v;
            }
        }
        lu.eliminate(what)?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        debug_assert!(c + self.kl >= r && c <= r + self.kl + self.ku);
        r * self.width + (c + self.kl - r)
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[self.idx(r, c)]
    }

    #[inline]
    fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        let i = self.idx(r, c);
        &mut self.data[i]
    }

    fn eliminate(&mut self, what: &str) -> Result<()> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.at(k, k).abs();
            for i in k + 1..=last_row {
                let v = self.at(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= scale * 1e-30 {
                return Err(Error::Singular {
                    what: what.to_string(),
                    row: k,
                });
            }
            self.pivots[k] = p;
            let last_col = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a = self.idx(k, j);
                    let b = self.idx(p, j);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.at(k, k);
            for i in k + 1..=last_row {
                let l = self.at(i, k) / pivot;
                if l == 0.0 {
                    continue;
                }
                *self.at_mut(i, k) = l;
                let base_i = self.idx(i, k + 1);
                let base_k = self.idx(k, k + 1);
                for off in 0..last_col - k {
                    let u = self.data[base_k + off];
                    self.data[base_i + off] -= l * u;
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        assert_eq!(b.len(), n);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + kl).min(n.saturating_sub(1)) {
                    b[i] -= self.at(i, k) * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..=(k + kl + ku).min(n - 1) {
                s -= self.at(k, j) * b[j];
            }
            b[k] = s / self.at(k, k);
        }
    }

    /// Solves `A^T x = b` in place.
    pub fn solve_transpose_in_place(&self, b: &mut [f64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        assert_eq!(b.len(), n);
        for k in 0..n {
            b[k] /= self.at(k, k);
            let yk = b[k];
            if yk != 0.0 {
                for j in k + 1..=(k + kl + ku).min(n - 1) {
                    b[j] -= self.at(k, j) * yk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                s -= self.at(i, k) * b[i];
            }
            b[k] = s;
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
        }
    }
}

/// Sparse direct solver: reverse Cuthill-McKee reordering followed by a
/// banded LU with partial pivoting.
#[derive(Debug, Clone)]
pub struct SparseLu {
    perm: Vec<usize>,
    lu: BandedLu,
}

impl SparseLu {
    pub fn factor(a: &CsrMatrix, what: &str) -> Result<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "SparseLu needs a square matrix");
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let col_map: Vec<Option<usize>> = inv.iter().map(|&i| Some(i)).collect();
        let permuted = a.extract(&perm, &col_map, n);
        let lu = BandedLu::factor(&permuted, what)?;
        Ok(Self { perm, lu })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let mut pb: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        self.lu.solve_in_place(&mut pb);
        for (new, &old) in self.perm.iter().enumerate() {
            b[old] = pb[new];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let mut pb: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        self.lu.solve_transpose_in_place(&mut pb);
        let mut x = vec![0.0; b.len()];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = pb[new];
        }
        x
    }
}
