//! Dense and banded linear-algebra helpers.
//!
//! Most solver-facing code uses `nalgebra`; the pieces here are the ones that
//! must stay generic over the scalar type (Cholesky for the dual-number
//! log-determinant) or that have no good off-the-shelf fit (banded symmetric
//! Cholesky for the interpolation normal equations, the Lanczos probe used to
//! cheaply screen Hessians before the eigen-repair fallback).

use crate::error::{Error, Result};
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};

/// Row-major square matrix over a generic scalar.
#[derive(Clone, Debug)]
pub struct SqMat<S> {
    pub n: usize,
    pub data: Vec<S>,
}

impl<S: Real> SqMat<S> {
    pub fn zeros(n: usize) -> Self {
        SqMat {
            n,
            data: vec![S::zero(); n * n],
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> S {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut S {
        &mut self.data[i * self.n + j]
    }

    /// In-place lower Cholesky factorization. Fails if a pivot is not
    /// strictly positive (primal part for dual scalars).
    pub fn cholesky(mut self) -> Result<SqMat<S>> {
        let n = self.n;
        for j in 0..n {
            let mut d = self.at(j, j);
            for k in 0..j {
                let l = self.at(j, k);
                d = d - l * l;
            }
            if !(d.value() > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite("cholesky pivot"));
            }
            let dj = d.sqrt();
            *self.at_mut(j, j) = dj;
            for i in (j + 1)..n {
                let mut s = self.at(i, j);
                for k in 0..j {
                    s = s - self.at(i, k) * self.at(j, k);
                }
                *self.at_mut(i, j) = s / dj;
            }
            for i in 0..j {
                *self.at_mut(i, j) = S::zero();
            }
        }
        Ok(self)
    }

    /// `2 * sum(log diag(L))` for a Cholesky factor `L`.
    pub fn logdet_from_chol(&self) -> S {
        let mut s = S::zero();
        for i in 0..self.n {
            s = s + self.at(i, i).ln();
        }
        s + s
    }
}

pub fn dmatrix_to_sq(m: &DMatrix<f64>) -> SqMat<f64> {
    let n = m.nrows();
    let mut out = SqMat::zeros(n);
    for i in 0..n {
        for j in 0..n {
            *out.at_mut(i, j) = m[(i, j)];
        }
    }
    out
}

/// Symmetric banded matrix stored by diagonals: `data[d][i] = A[i+d][i]` for
/// sub-diagonal offset `d = 0..=bw`.
pub struct BandedSym {
    pub n: usize,
    pub bw: usize,
    pub data: Vec<Vec<f64>>,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedSym {
            n,
            bw,
            data: (0..=bw).map(|d| vec![0.0; n - d.min(n)]).collect(),
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let d = r - c;
        debug_assert!(d <= self.bw);
        self.data[d][c] += v;
    }

    /// In-place banded Cholesky (lower factor, same band layout). O(n * bw^2).
    pub fn cholesky_in_place(&mut self) -> Result<()> {
        let n = self.n;
        let bw = self.bw;
        for j in 0..n {
            let k0 = j.saturating_sub(bw);
            let mut d = self.data[0][j];
            for k in k0..j {
                let l = self.data[j - k][k];
                d -= l * l;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite("banded cholesky pivot"));
            }
            let dj = d.sqrt();
            self.data[0][j] = dj;
            let imax = (j + bw).min(n - 1);
            for i in (j + 1)..=imax {
                let mut s = self.data[i - j][j];
                let k1 = i.saturating_sub(bw).max(k0);
                for k in k1..j {
                    s -= self.data[i - k][k] * self.data[j - k][k];
                }
                self.data[i - j][j] = s / dj;
            }
        }
        Ok(())
    }

    /// Solves `L L^T x = b` given the factored band.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let bw = self.bw;
        let mut y = b.to_vec();
        for i in 0..n {
            let k0 = i.saturating_sub(bw);
            let mut s = y[i];
            for k in k0..i {
                s -= self.data[i - k][k] * y[k];
            }
            y[i] = s / self.data[0][i];
        }
        for i in (0..n).rev() {
            let kmax = (i + bw).min(n - 1);
            let mut s = y[i];
            for k in (i + 1)..=kmax {
                s -= self.data[k - i][i] * y[k];
            }
            y[i] = s / self.data[0][i];
        }
        y
    }
}

/// Orthonormal basis of the null space of a single row vector `c`, as the
/// trailing `d-1` columns of the Householder reflection mapping `c` onto
/// `e_1`. Used for sum-to-zero reparameterizations.
pub fn householder_null_basis(c: &[f64]) -> DMatrix<f64> {
    let d = c.len();
    let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(norm > 0.0, "constraint row must be nonzero");
    let mut v: Vec<f64> = c.to_vec();
    // v = c + sign(c1) * ||c|| e1, chosen for stability
    v[0] += if c[0] >= 0.0 { norm } else { -norm };
    let vtv: f64 = v.iter().map(|x| x * x).sum();
    let mut h = DMatrix::<f64>::identity(d, d);
    for i in 0..d {
        for j in 0..d {
            h[(i, j)] -= 2.0 * v[i] * v[j] / vtv;
        }
    }
    h.columns(1, d - 1).into_owned()
}

/// Gauss–Legendre nodes/weights on [-1, 1].
pub const GL2: [(f64, f64); 2] = [
    (-0.577_350_269_189_625_8, 1.0),
    (0.577_350_269_189_625_8, 1.0),
];

pub const GL4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_2),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_2),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];

pub const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
];

/// Fixed-rule Gauss–Legendre integral of `f` over `[a, b]`.
pub fn gauss_legendre<F: FnMut(f64) -> f64>(rule: &[(f64, f64)], a: f64, b: f64, mut f: F) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for &(x, w) in rule {
        acc += w * f(mid + half * x);
    }
    half * acc
}

/// Cheap deterministic xorshift stream for probe vectors.
struct XorShift64(u64);
impl XorShift64 {
    fn next_unit(&mut self) -> f64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        // map to (-1, 1)
        (x >> 11) as f64 / (1u64 << 52) as f64 * 2.0 - 1.0
    }
}

/// Lanczos estimate of the minimum eigenvalue of a symmetric matrix.
///
/// Runs `iters` Lanczos steps with full reorthogonalization from a
/// deterministic starting vector and returns the smallest Ritz value. The
/// estimate is an upper bound on the true minimum eigenvalue; callers that
/// use it as a positive-definiteness screen must still be prepared for a
/// failing Cholesky.
pub fn lanczos_min_eig(h: &DMatrix<f64>, iters: usize) -> f64 {
    let n = h.nrows();
    if n == 0 {
        return 0.0;
    }
    if n == 1 {
        return h[(0, 0)];
    }
    let m = iters.min(n);
    let mut rng = XorShift64(0x9e37_79b9_7f4a_7c15);
    let mut q = DVector::<f64>::from_fn(n, |_, _| rng.next_unit());
    q /= q.norm();
    let mut qs: Vec<DVector<f64>> = vec![q.clone()];
    let mut alphas = Vec::with_capacity(m);
    let mut betas = Vec::new();
    let mut beta_prev = 0.0;
    let mut q_prev: Option<DVector<f64>> = None;
    for k in 0..m {
        let mut v = h * &qs[k];
        if let Some(qp) = &q_prev {
            v -= qp * beta_prev;
        }
        let alpha = qs[k].dot(&v);
        alphas.push(alpha);
        v -= &qs[k] * alpha;
        // full reorthogonalization: cheap at these dimensions
        for qi in &qs {
            let c = qi.dot(&v);
            v -= qi * c;
        }
        let beta = v.norm();
        if beta < 1e-13 || k == m - 1 {
            break;
        }
        betas.push(beta);
        beta_prev = beta;
        q_prev = Some(qs[k].clone());
        qs.push(v / beta);
    }
    let k = alphas.len();
    let mut t = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    t.symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Type-7 sample quantile (linear interpolation between order statistics).
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0);
    if n == 1 {
        return sorted[0];
    }
    let h = (n as f64 - 1.0) * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
