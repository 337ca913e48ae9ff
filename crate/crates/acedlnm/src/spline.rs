//! Cubic B-spline machinery: knot construction, basis and derivative
//! evaluation, second-derivative penalties, and natural-cubic interpolation
//! of the exposure series.

use crate::error::{Error, Result};
use crate::linalg::{BandedSym, GL2};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

/// B-spline order used throughout (cubic).
pub const ORDER: usize = 4;

/// Knot placement for [`build_knots`].
pub enum KnotPlacement {
    /// `n` equally spaced knots covering the domain, boundaries included.
    EquallySpaced { n: usize },
    /// Explicit knots covering the domain (must be sorted, first at the
    /// lower boundary, last at the upper boundary).
    AtPoints(Vec<f64>),
}

/// A validated cubic knot sequence with its evaluation boundary.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KnotVector {
    pub knots: Vec<f64>,
    pub order: usize,
    pub boundary: [f64; 2],
}

impl KnotVector {
    pub fn new(knots: Vec<f64>, boundary: [f64; 2]) -> Result<Self> {
        let p = ORDER;
        if knots.len() < 2 * p {
            return Err(Error::InvalidConfig(format!(
                "need at least {} knots, got {}",
                2 * p,
                knots.len()
            )));
        }
        for w in knots.windows(2) {
            if !(w[1] >= w[0]) {
                return Err(Error::InvalidConfig("knots must be nondecreasing".into()));
            }
        }
        let lo_ok = knots[p - 1] <= boundary[0] + 1e-12 * span_scale(&knots);
        let hi_ok = knots[knots.len() - p] >= boundary[1] - 1e-12 * span_scale(&knots);
        if !(lo_ok && hi_ok && boundary[0] < boundary[1]) {
            return Err(Error::InvalidConfig(
                "boundary must lie within [knots[p-1], knots[len-p]]".into(),
            ));
        }
        Ok(KnotVector {
            knots,
            order: p,
            boundary,
        })
    }
}

fn span_scale(knots: &[f64]) -> f64 {
    (knots[knots.len() - 1] - knots[0]).abs().max(1.0)
}

/// Builds a cubic knot vector spanning `[lower, upper]`, extending the end
/// spacings with three auxiliary knots on each side so that the basis spans
/// the whole domain.
pub fn build_knots(domain: [f64; 2], placement: KnotPlacement) -> Result<KnotVector> {
    let [lower, upper] = domain;
    if !(lower < upper) {
        return Err(Error::DegenerateDomain(lower, upper));
    }
    let inner: Vec<f64> = match placement {
        KnotPlacement::EquallySpaced { n } => {
            if n < 2 {
                return Err(Error::NoInteriorKnots());
            }
            let step = (upper - lower) / (n as f64 - 1.0);
            (0..n).map(|i| lower + step * i as f64).collect()
        }
        KnotPlacement::AtPoints(pts) => {
            if pts.len() < 2 {
                return Err(Error::NoInteriorKnots());
            }
            pts
        }
    };
    let d0 = inner[1] - inner[0];
    let d1 = inner[inner.len() - 1] - inner[inner.len() - 2];
    if !(d0 > 0.0 && d1 > 0.0) {
        return Err(Error::InvalidConfig("interior knots must be increasing".into()));
    }
    let mut knots = Vec::with_capacity(inner.len() + 6);
    for k in (1..=3).rev() {
        knots.push(inner[0] - k as f64 * d0);
    }
    knots.extend_from_slice(&inner);
    for k in 1..=3 {
        knots.push(inner[inner.len() - 1] + k as f64 * d1);
    }
    KnotVector::new(knots, domain)
}

/// Nonzero basis values at one point: entries `start..start+4` of the full
/// coefficient vector.
#[derive(Clone, Copy, Debug)]
pub struct BasisRow<S> {
    pub start: usize,
    pub vals: [S; 4],
}

impl<S: Real> BasisRow<S> {
    pub fn dot(&self, coef: &[S]) -> S {
        let mut acc = S::zero();
        for k in 0..4 {
            acc = acc + self.vals[k] * coef[self.start + k];
        }
        acc
    }

    pub fn dot_f64(&self, coef: &[f64]) -> S {
        let mut acc = S::zero();
        for k in 0..4 {
            acc = acc + self.vals[k] * S::from_f64(coef[self.start + k]);
        }
        acc
    }
}

/// Cubic B-spline basis over a knot vector.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BSplineBasis {
    pub knot_vector: KnotVector,
    pub n_basis: usize,
}

impl BSplineBasis {
    pub fn new(knot_vector: KnotVector) -> Self {
        let n_basis = knot_vector.knots.len() - knot_vector.order;
        BSplineBasis {
            knot_vector,
            n_basis,
        }
    }

    pub fn boundary(&self) -> [f64; 2] {
        self.knot_vector.boundary
    }

    fn boundary_tol(&self) -> f64 {
        1e-9 * (self.boundary()[1] - self.boundary()[0]).abs().max(1.0)
    }

    /// Knot span index `r` with `knots[r] <= x < knots[r+1]` and positive
    /// span width; the right boundary clamps to the last interior span.
    pub fn find_span(&self, x: f64) -> Result<usize> {
        let [lo, hi] = self.boundary();
        let tol = self.boundary_tol();
        if !(x >= lo - tol && x <= hi + tol) || !x.is_finite() {
            return Err(Error::OutsideBoundary { x, lo, hi });
        }
        let x = x.clamp(lo, hi);
        let knots = &self.knot_vector.knots;
        let p = self.knot_vector.order;
        let min_r = p - 1;
        let max_r = knots.len() - p - 1;
        // binary search: largest r with knots[r] <= x
        let mut lo_i = min_r;
        let mut hi_i = max_r;
        while lo_i < hi_i {
            let mid = (lo_i + hi_i + 1) / 2;
            if knots[mid] <= x {
                lo_i = mid;
            } else {
                hi_i = mid - 1;
            }
        }
        let mut r = lo_i;
        // skip zero-width spans (repeated knots, right boundary)
        while r > min_r && knots[r + 1] <= knots[r] {
            r -= 1;
        }
        Ok(r)
    }

    /// Basis values at `x`; at most four nonzero, nonnegative, summing to one
    /// inside the boundary.
    pub fn eval<S: Real>(&self, x: S) -> Result<BasisRow<S>> {
        let r = self.find_span(x.value())?;
        let knots = &self.knot_vector.knots;
        let p = self.knot_vector.order;
        let mut n = [S::zero(); 4];
        n[0] = S::one();
        for j in 1..p {
            let mut saved = S::zero();
            for k in 0..j {
                let left = x - S::from_f64(knots[r + 1 - j + k]);
                let right = S::from_f64(knots[r + 1 + k]) - x;
                let tmp = n[k] / (right + left);
                n[k] = saved + right * tmp;
                saved = left * tmp;
            }
            n[j] = saved;
        }
        Ok(BasisRow {
            start: r + 1 - p,
            vals: n,
        })
    }

    /// Nonzero values of the order-`ord` (< 4) basis on the cubic knot
    /// vector, with entries aligned so that index `k` holds function
    /// `r + 1 - ord + k`.
    fn eval_lower_order<S: Real>(&self, x: S, r: usize, ord: usize) -> [S; 4] {
        let knots = &self.knot_vector.knots;
        let mut n = [S::zero(); 4];
        n[0] = S::one();
        for j in 1..ord {
            let mut saved = S::zero();
            for k in 0..j {
                let left = x - S::from_f64(knots[r + 1 - j + k]);
                let right = S::from_f64(knots[r + 1 + k]) - x;
                let tmp = n[k] / (right + left);
                n[k] = saved + right * tmp;
                saved = left * tmp;
            }
            n[j] = saved;
        }
        n
    }

    /// First or second derivative of every nonzero basis function at `x`,
    /// via the knot-difference recursion applied to lower-order values.
    pub fn eval_derivative<S: Real>(&self, x: S, order: usize) -> Result<BasisRow<S>> {
        if order != 1 && order != 2 {
            return Err(Error::UnsupportedDerivative(order));
        }
        let r = self.find_span(x.value())?;
        let knots = &self.knot_vector.knots;

        // ratio b_{i,ord} / knot difference, zero when the difference is zero
        let term = |vals: &[S; 4], base: usize, i: isize, ord: usize| -> S {
            if i < base as isize || i as usize >= base + 4 {
                return S::zero();
            }
            let iu = i as usize;
            let denom = knots[iu + ord - 1] - knots[iu];
            if denom <= 0.0 {
                return S::zero();
            }
            vals[iu - base] / S::from_f64(denom)
        };

        if order == 1 {
            // cubic derivative from order-3 values
            let n3 = self.eval_lower_order(x, r, 3);
            let base3 = r - 2; // functions r-2..r
            let mut out = [S::zero(); 4];
            for (k, slot) in out.iter_mut().enumerate() {
                let i = (r + 1 - 4 + k) as isize;
                let a = term(&n3, base3, i, 4);
                let b = term(&n3, base3, i + 1, 4);
                *slot = S::from_f64(3.0) * (a - b);
            }
            Ok(BasisRow {
                start: r + 1 - 4,
                vals: out,
            })
        } else {
            // second derivative: differentiate twice starting from order-2
            let n2 = self.eval_lower_order(x, r, 2);
            let base2 = r - 1; // functions r-1..r
            // first derivatives of the order-3 functions r-2..r
            let mut d3 = [S::zero(); 4];
            let base3 = r - 2;
            for k in 0..3 {
                let i = (base3 + k) as isize;
                let a = term(&n2, base2, i, 3);
                let b = term(&n2, base2, i + 1, 3);
                d3[k] = S::from_f64(2.0) * (a - b);
            }
            let termd = |vals: &[S; 4], base: usize, i: isize, ord: usize| -> S {
                if i < base as isize || (i as usize) >= base + 4 {
                    return S::zero();
                }
                let iu = i as usize;
                let denom = knots[iu + ord - 1] - knots[iu];
                if denom <= 0.0 {
                    return S::zero();
                }
                vals[iu - base] / S::from_f64(denom)
            };
            let mut out = [S::zero(); 4];
            for (k, slot) in out.iter_mut().enumerate() {
                let i = (r + 1 - 4 + k) as isize;
                let a = termd(&d3, base3, i, 4);
                let b = termd(&d3, base3, i + 1, 4);
                *slot = S::from_f64(3.0) * (a - b);
            }
            Ok(BasisRow {
                start: r + 1 - 4,
                vals: out,
            })
        }
    }

    /// Basis evaluation with the span index clamped to the nearest valid
    /// span, so points beyond the boundary get the polynomial extension of
    /// the closest span instead of an error. Only the interpolation setup
    /// uses this (for the outermost padded points); ordinary evaluation goes
    /// through [`BSplineBasis::eval`].
    fn eval_extended(&self, x: f64) -> BasisRow<f64> {
        let knots = &self.knot_vector.knots;
        let p = self.knot_vector.order;
        let min_r = p - 1;
        let max_r = knots.len() - p - 1;
        let mut lo_i = min_r;
        let mut hi_i = max_r;
        while lo_i < hi_i {
            let mid = (lo_i + hi_i + 1) / 2;
            if knots[mid] <= x {
                lo_i = mid;
            } else {
                hi_i = mid - 1;
            }
        }
        let mut r = lo_i;
        while r > min_r && knots[r + 1] <= knots[r] {
            r -= 1;
        }
        while r < max_r && knots[r + 1] <= knots[r] {
            r += 1;
        }
        let mut n = [0.0f64; 4];
        n[0] = 1.0;
        for j in 1..p {
            let mut saved = 0.0;
            for k in 0..j {
                let left = x - knots[r + 1 - j + k];
                let right = knots[r + 1 + k] - x;
                let tmp = n[k] / (right + left);
                n[k] = saved + right * tmp;
                saved = left * tmp;
            }
            n[j] = saved;
        }
        BasisRow {
            start: r + 1 - p,
            vals: n,
        }
    }

    /// Dense basis vector (length `n_basis`), mostly for tests and design
    /// matrix assembly.
    pub fn eval_dense(&self, x: f64) -> Result<Vec<f64>> {
        let row = self.eval(x)?;
        let mut out = vec![0.0; self.n_basis];
        for k in 0..4 {
            out[row.start + k] = row.vals[k];
        }
        Ok(out)
    }

    /// Positive-width knot spans intersected with the boundary.
    pub fn spans(&self) -> Vec<(f64, f64)> {
        let [lo, hi] = self.boundary();
        let mut out = Vec::new();
        for w in self.knot_vector.knots.windows(2) {
            let a = w[0].max(lo);
            let b = w[1].min(hi);
            if b > a + 1e-14 * span_scale(&self.knot_vector.knots) {
                out.push((a, b));
            }
        }
        out
    }

    /// Exact Gram matrix of second derivatives over the boundary interval
    /// (two-point Gauss–Legendre per span; the integrand is piecewise
    /// quadratic, so the rule is exact).
    pub fn second_derivative_penalty(&self) -> PenaltyMatrix {
        let d = self.n_basis;
        let mut s = vec![0.0; d * d];
        for (a, b) in self.spans() {
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for &(xi, wi) in GL2.iter() {
                let x = mid + half * xi;
                let row = self
                    .eval_derivative::<f64>(x, 2)
                    .expect("span point inside boundary");
                let w = wi * half;
                for i in 0..4 {
                    for j in 0..4 {
                        s[(row.start + i) * d + (row.start + j)] += w * row.vals[i] * row.vals[j];
                    }
                }
            }
        }
        // enforce exact symmetry against rounding
        for i in 0..d {
            for j in 0..i {
                let m = 0.5 * (s[i * d + j] + s[j * d + i]);
                s[i * d + j] = m;
                s[j * d + i] = m;
            }
        }
        PenaltyMatrix {
            dim: d,
            entries: s,
            rank_deficiency: 2,
        }
    }
}

/// Symmetric positive semidefinite penalty matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PenaltyMatrix {
    pub dim: usize,
    /// Row-major `dim x dim` entries.
    pub entries: Vec<f64>,
    /// Dimension of the null space (2 for second-derivative penalties).
    pub rank_deficiency: usize,
}

impl PenaltyMatrix {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim {
            let mut row = 0.0;
            for j in 0..self.dim {
                row += self.at(i, j) * v[j];
            }
            acc += v[i] * row;
        }
        acc
    }

    pub fn to_dmatrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.dim, self.dim, &self.entries)
    }
}

/// Interpolating natural cubic B-spline for the exposure process.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExposureSpline {
    pub basis: BSplineBasis,
    /// Spline coefficients, length `N + 4`.
    pub coefficients: Vec<f64>,
    /// Range of the observed time points.
    pub observed_range: [f64; 2],
}

/// Knot sequence for the exposure interpolant: one knot per observation,
/// a triple auxiliary knot one spacing beyond each end, and one more a
/// further spacing out.
fn exposure_knots(times: &[f64], step: f64) -> Vec<f64> {
    let n = times.len();
    let c = 1.0; // auxiliary-knot offset, in units of the observation spacing
    let mut knots = Vec::with_capacity(n + 8);
    knots.push(times[0] - (c + 1.0) * step);
    for _ in 0..3 {
        knots.push(times[0] - c * step);
    }
    knots.extend_from_slice(times);
    for _ in 0..3 {
        knots.push(times[n - 1] + c * step);
    }
    knots.push(times[n - 1] + (c + 1.0) * step);
    knots
}

/// Interpolates an equally spaced exposure series with a natural cubic
/// B-spline, solving the padded least-squares system with a banded Cholesky
/// of the normal equations (O(N)).
pub fn interpolate_exposure(series: &[(f64, f64)]) -> Result<ExposureSpline> {
    let n = series.len();
    if n < 4 {
        return Err(Error::SeriesTooShort { need: 4, got: n });
    }
    let times: Vec<f64> = series.iter().map(|p| p.0).collect();
    let values: Vec<f64> = series.iter().map(|p| p.1).collect();
    let step = times[1] - times[0];
    if !(step > 0.0) {
        return Err(Error::IrregularTimes(1));
    }
    for i in 1..n {
        let d = times[i] - times[i - 1];
        if !(d > 0.0) || (d - step).abs() > 1e-6 * step {
            return Err(Error::IrregularTimes(i));
        }
    }
    for (i, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFiniteExposure(i));
        }
    }

    let knots = exposure_knots(&times, step);
    let boundary = [knots[3], knots[knots.len() - 4]];
    let kv = KnotVector::new(knots.clone(), boundary)?;
    let basis = BSplineBasis::new(kv);
    let d = basis.n_basis; // N + 4

    // Padded targets: zeros at the auxiliary knots, data at the interior.
    let mut eval_points: Vec<(f64, f64)> = Vec::with_capacity(n + 8);
    for k in 0..4 {
        eval_points.push((knots[k], 0.0));
    }
    for i in 0..n {
        eval_points.push((times[i], values[i]));
    }
    for k in 0..4 {
        eval_points.push((knots[n + 4 + k], 0.0));
    }

    let bw = 3;
    let mut ata = BandedSym::zeros(d, bw);
    let mut atb = vec![0.0; d];
    for &(x, y) in &eval_points {
        // The outermost padded points sit one spacing beyond the boundary;
        // evaluating them by span extension supplies the two conditions that
        // make the padded least-squares system nonsingular.
        let row = basis.eval_extended(x);
        for i in 0..4 {
            let vi = row.vals[i];
            if vi == 0.0 {
                continue;
            }
            atb[row.start + i] += vi * y;
            for j in 0..=i {
                ata.add(row.start + i, row.start + j, vi * row.vals[j]);
            }
        }
    }
    ata.cholesky_in_place()?;
    let coefficients = ata.solve(&atb);

    Ok(ExposureSpline {
        basis,
        coefficients,
        observed_range: [times[0], times[n - 1]],
    })
}

impl ExposureSpline {
    /// Evaluates the interpolant (linear beyond the observed range, inside
    /// the basis boundary).
    pub fn eval(&self, x: f64) -> Result<f64> {
        let row = self.basis.eval::<f64>(x)?;
        Ok(row.dot(&self.coefficients))
    }

    /// Interval on which the spline can be evaluated.
    pub fn support(&self) -> [f64; 2] {
        self.basis.boundary()
    }
}
