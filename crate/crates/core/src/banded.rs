//! Band-stored square matrices and a partially pivoted banded LU.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BandedError {
    #[error("entry ({row}, {col}) lies outside the band")]
    OutsideBand { row: usize, col: usize },
    #[error("zero pivot at column {0}")]
    SingularPivot(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Square `n × n` matrix with `kl` sub- and `ku` super-diagonals.
///
/// Each row stores its `kl + ku + 1` band entries contiguously; entry
/// `(i, j)` sits at offset `j + kl - i` within row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedOp {
    n: usize,
    kl: usize,
    ku: usize,
    bands: Vec<f64>,
}

impl BandedOp {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            bands: vec![0.0; n * (kl + ku + 1)],
        }
    }

    pub fn identity(n: usize, kl: usize, ku: usize) -> Self {
        let mut m = Self::zeros(n, kl, ku);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    pub fn in_band(&self, row: usize, col: usize) -> bool {
        row < self.n && col < self.n && col + self.kl >= row && row + self.ku >= col
    }

    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    fn slot(&self, row: usize, col: usize) -> usize {
        row * self.width() + col + self.kl - row
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        if self.in_band(row, col) {
            self.bands[self.slot(row, col)]
        } else {
            0.0
        }
    }

    /// Panics if `(row, col)` lies outside the band.
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.try_set(row, col, value).unwrap()
    }

    pub fn try_set(&mut self, row: usize, col: usize, value: f64) -> Result<(), BandedError> {
        if !self.in_band(row, col) {
            return Err(BandedError::OutsideBand { row, col });
        }
        let k = self.slot(row, col);
        self.bands[k] = value;
        Ok(())
    }

    /// Panics if `(row, col)` lies outside the band.
    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        assert!(self.in_band(row, col), "({row}, {col}) outside band");
        let k = self.slot(row, col);
        self.bands[k] += value;
    }

    pub fn scale(&mut self, alpha: f64) {
        self.bands.iter_mut().for_each(|x| *x *= alpha);
    }

    /// Returns `alpha * self + beta * I`.
    pub fn shifted(&self, alpha: f64, beta: f64) -> Self {
        let mut m = self.clone();
        m.scale(alpha);
        for i in 0..self.n {
            m.add(i, i, beta);
        }
        m
    }

    /// Column range touched by row `i`.
    pub fn row_span(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        let w = self.width();
        for (i, (yi, row)) in y.iter_mut().zip(self.bands.chunks_exact(w)).enumerate() {
            let span = self.row_span(i);
            let off = span.start + self.kl - i;
            let len = span.len();
            *yi = row[off..off + len]
                .iter()
                .zip(&x[span])
                .map(|(a, b)| a * b)
                .sum();
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn factor(&self) -> Result<BandedLu, BandedError> {
        BandedLu::new(self)
    }
}

/// LU factors with partial pivoting in LAPACK `gbtrf` layout: the upper
/// factor gains up to `kl` extra super-diagonals from row interchanges.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn new(a: &BandedOp) -> Result<Self, BandedError> {
        let (n, kl, ku) = (a.n, a.kl, a.ku);
        let ldab = 2 * kl + ku + 1;
        let kv = kl + ku;
        let mut ab = vec![0.0; ldab * n];
        let idx = |i: usize, j: usize| kv + i - j + j * ldab;
        for j in 0..n {
            for i in j.saturating_sub(ku)..(j + kl + 1).min(n) {
                ab[idx(i, j)] = a.get(i, j);
            }
        }
        let mut pivots = vec![0; n];
        for j in 0..n {
            let last = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = ab[idx(j, j)].abs();
            for i in j + 1..=last {
                let v = ab[idx(i, j)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            pivots[j] = p;
            if best == 0.0 {
                return Err(BandedError::SingularPivot(j));
            }
            let col_end = (j + kv + 1).min(n);
            if p != j {
                for c in j..col_end {
                    ab.swap(idx(j, c), idx(p, c));
                }
            }
            let piv = ab[idx(j, j)];
            for i in j + 1..=last {
                ab[idx(i, j)] /= piv;
            }
            for c in j + 1..col_end {
                let ujc = ab[idx(j, c)];
                if ujc != 0.0 {
                    for i in j + 1..=last {
                        ab[idx(i, c)] -= ab[idx(i, j)] * ujc;
                    }
                }
            }
        }
        Ok(Self {
            n,
            kl,
            ku,
            ldab,
            ab,
            pivots,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<(), BandedError> {
        if b.len() != self.n {
            return Err(BandedError::DimensionMismatch {
                expected: self.n,
                got: b.len(),
            });
        }
        let (n, kl, kv, ldab) = (self.n, self.kl, self.kl + self.ku, self.ldab);
        for j in 0..n {
            let p = self.pivots[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            if bj != 0.0 {
                let end = (j + kl + 1).min(n);
                let col = &self.ab[j * ldab + kv + 1..j * ldab + kv + 1 + (end - j - 1)];
                for (bi, l) in b[j + 1..end].iter_mut().zip(col) {
                    *bi -= l * bj;
                }
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.ab[j * ldab + kv];
            let bj = b[j];
            if bj != 0.0 {
                let start = j.saturating_sub(kv);
                let col = &self.ab[j * ldab + kv - (j - start)..j * ldab + kv];
                for (bi, u) in b[start..j].iter_mut().zip(col) {
                    *bi -= u * bj;
                }
            }
        }
        Ok(())
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, BandedError> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }
}
