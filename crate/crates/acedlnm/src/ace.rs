//! Exact integrals of lag-basis functions against the exposure spline.
//!
//! `D[t][q] = INT_0^L b_q(l) X(t-l) dl` is assembled once per dataset and is
//! the only place the exposure enters the likelihood. Within each span of the
//! merged knot sequence (exposure knots merged with the lag knots shifted to
//! `t - tau`), both factors are single cubic polynomials, so fitting each
//! factor through four evenly spaced values and contracting with the fixed
//! moment matrix of monomial products integrates the degree-six product
//! exactly. Exposure-span polynomial coefficients are extracted once, in
//! span-local coordinates, and reused for every `t`.

use crate::error::{Error, Result};
use crate::linalg::GL4;
use crate::spline::{BSplineBasis, ExposureSpline};
use nalgebra::{DMatrix, DVector, Matrix4};
use rayon::prelude::*;

/// Exact lag-basis integrals for a set of evaluation times.
#[derive(Clone, Debug)]
pub struct LagBasisIntegrals {
    /// `times.len() x d_w`: row `i` holds `D_q(times[i])`.
    pub matrix: DMatrix<f64>,
    pub times: Vec<f64>,
    pub max_lag: f64,
}

/// Cauchy–Schwarz envelope for the cumulative exposure.
#[derive(Clone, Debug)]
pub struct AceBound {
    /// `max_t sqrt(INT_0^L X(t-l)^2 dl)`.
    pub e_bar: f64,
    /// Per-time envelope, aligned with the time set it was computed for.
    pub per_time: Vec<f64>,
}

/// Vandermonde at the four evenly spaced nodes of [-1, 1].
fn p_matrix() -> Matrix4<f64> {
    let mut p = Matrix4::<f64>::zeros();
    for i in 0..4 {
        let x = -1.0 + 2.0 * i as f64 / 3.0;
        let mut pw = 1.0;
        for j in 0..4 {
            p[(i, j)] = pw;
            pw *= x;
        }
    }
    p
}

/// Moment matrix of monomial products on [-1, 1]:
/// `H[i][j] = INT x^{i+j} = (1 + (-1)^{i+j}) / (i+j+1)`.
fn h_matrix() -> Matrix4<f64> {
    let mut h = Matrix4::<f64>::zeros();
    for i in 0..4 {
        for j in 0..4 {
            let k = (i + j) as i32;
            h[(i, j)] = (1.0 + (-1.0f64).powi(k)) / (k as f64 + 1.0);
        }
    }
    h
}

/// `W = P^{-T} H P^{-1}`: bilinear form on raw 4-point values that equals the
/// integral of the product of the two interpolating cubics over [-1, 1].
fn w_matrix() -> Matrix4<f64> {
    let p_inv = p_matrix().try_inverse().expect("fixed Vandermonde inverts");
    p_inv.transpose() * h_matrix() * p_inv
}

/// A piecewise cubic with coefficients in span-local coordinates.
#[derive(Clone, Debug)]
struct PiecewiseCubic {
    breaks: Vec<f64>,
    /// `coefs[r]` are the monomial coefficients in `xi = s - breaks[r]`.
    coefs: Vec<[f64; 4]>,
}

impl PiecewiseCubic {
    /// Span index containing `s` (left-closed spans).
    fn span_of(&self, s: f64) -> usize {
        let n = self.coefs.len();
        match self
            .breaks
            .binary_search_by(|b| b.partial_cmp(&s).unwrap())
        {
            Ok(i) => i.min(n - 1),
            Err(i) => i.saturating_sub(1).min(n - 1),
        }
    }

    #[inline]
    fn eval_in_span(&self, r: usize, s: f64) -> f64 {
        let xi = s - self.breaks[r];
        let c = &self.coefs[r];
        ((c[3] * xi + c[2]) * xi + c[1]) * xi + c[0]
    }

    fn eval(&self, s: f64) -> f64 {
        self.eval_in_span(self.span_of(s), s)
    }
}

/// Extracts span-local cubic coefficients by solving the 4x4 local
/// Vandermonde through values at four evenly spaced points.
fn local_cubic_from_values(h: f64, values: [f64; 4]) -> [f64; 4] {
    let mut k = Matrix4::<f64>::zeros();
    for i in 0..4 {
        let x = i as f64 * h / 3.0;
        let mut pw = 1.0;
        for j in 0..4 {
            k[(i, j)] = pw;
            pw *= x;
        }
    }
    let rhs = nalgebra::Vector4::from_column_slice(&values);
    let sol = k.lu().solve(&rhs).expect("local Vandermonde is nonsingular");
    [sol[0], sol[1], sol[2], sol[3]]
}

fn positive_spans(knots: &[f64], lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let tol = 1e-12 * (hi - lo).abs().max(1.0);
    knots
        .windows(2)
        .filter_map(|w| {
            let a = w[0].max(lo);
            let b = w[1].min(hi);
            (b > a + tol).then_some((a, b))
        })
        .collect()
}

/// Exposure spline reduced to its piecewise-cubic form over the evaluable
/// support.
fn exposure_pieces(exposure: &ExposureSpline) -> PiecewiseCubic {
    let [lo, hi] = exposure.support();
    let spans = positive_spans(&exposure.basis.knot_vector.knots, lo, hi);
    let mut breaks = Vec::with_capacity(spans.len() + 1);
    let mut coefs = Vec::with_capacity(spans.len());
    for &(a, b) in &spans {
        let h = b - a;
        let vals = [
            exposure.eval(a).unwrap(),
            exposure.eval(a + h / 3.0).unwrap(),
            exposure.eval(a + 2.0 * h / 3.0).unwrap(),
            exposure.eval(b.min(hi)).unwrap(),
        ];
        breaks.push(a);
        coefs.push(local_cubic_from_values(h, vals));
    }
    breaks.push(spans.last().unwrap().1);
    PiecewiseCubic { breaks, coefs }
}

/// Per-span local cubics for the (at most four) active lag-basis functions.
struct WeightPieces {
    breaks: Vec<f64>,
    /// `(first active basis index, local coefficients of the four active
    /// functions)` per span.
    spans: Vec<(usize, [[f64; 4]; 4])>,
}

fn weight_pieces(basis: &BSplineBasis) -> WeightPieces {
    let [lo, hi] = basis.boundary();
    let spans = positive_spans(&basis.knot_vector.knots, lo, hi);
    let mut breaks = Vec::with_capacity(spans.len() + 1);
    let mut out = Vec::with_capacity(spans.len());
    for &(a, b) in &spans {
        let h = b - a;
        let pts = [a, a + h / 3.0, a + 2.0 * h / 3.0, b];
        let rows: Vec<_> = pts
            .iter()
            .map(|&l| basis.eval::<f64>(l.min(hi)).unwrap())
            .collect();
        // all four rows live in the same span, hence share `start`
        let start = rows
            .iter()
            .map(|r| r.start)
            .min()
            .expect("four evaluation rows");
        let mut vals = [[0.0; 4]; 4]; // [point][basis offset]
        for (i, row) in rows.iter().enumerate() {
            for k in 0..4 {
                let off = row.start + k - start;
                if off < 4 {
                    vals[i][off] = row.vals[k];
                }
            }
        }
        let mut coefs = [[0.0; 4]; 4];
        for q in 0..4 {
            let v = [vals[0][q], vals[1][q], vals[2][q], vals[3][q]];
            coefs[q] = local_cubic_from_values(h, v);
        }
        breaks.push(a);
        out.push((start, coefs));
    }
    breaks.push(spans.last().unwrap().1);
    WeightPieces {
        breaks,
        spans: out,
    }
}

impl WeightPieces {
    fn span_of(&self, l: f64) -> usize {
        let n = self.spans.len();
        match self
            .breaks
            .binary_search_by(|b| b.partial_cmp(&l).unwrap())
        {
            Ok(i) => i.min(n - 1),
            Err(i) => i.saturating_sub(1).min(n - 1),
        }
    }
}

/// Merged breakpoints of `[t - L, t]`: exposure knots and lag knots shifted
/// by `t`, deduplicated.
fn merged_breaks(t: f64, max_lag: f64, x_breaks: &[f64], w_breaks: &[f64]) -> Vec<f64> {
    let lo = t - max_lag;
    let hi = t;
    let tol = 1e-12 * max_lag.max(1.0);
    let mut pts = Vec::with_capacity(x_breaks.len() + w_breaks.len() + 2);
    pts.push(lo);
    pts.push(hi);
    for &b in x_breaks {
        if b > lo + tol && b < hi - tol {
            pts.push(b);
        }
    }
    for &wb in w_breaks {
        let s = t - wb;
        if s > lo + tol && s < hi - tol {
            pts.push(s);
        }
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup_by(|a, b| (*a - *b).abs() <= tol);
    pts
}

fn check_window(t: f64, max_lag: f64, exposure: &ExposureSpline) -> Result<()> {
    let [obs_lo, obs_hi] = exposure.observed_range;
    if t - max_lag < obs_lo - 1e-9 || t > obs_hi + 1e-9 {
        return Err(Error::IncompleteLagWindow {
            t,
            support_lo: obs_lo,
            support_hi: obs_hi,
        });
    }
    Ok(())
}

/// Splits candidate times into those with complete lag windows over the
/// observed exposure and those that must be dropped.
pub fn lag_complete_times(
    exposure: &ExposureSpline,
    max_lag: f64,
    candidates: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for &t in candidates {
        if check_window(t, max_lag, exposure).is_ok() {
            kept.push(t);
        } else {
            dropped.push(t);
        }
    }
    (kept, dropped)
}

/// Exact `D_q(t)` for every requested time and lag-basis function.
pub fn compute_lag_integrals(
    exposure: &ExposureSpline,
    w_basis: &BSplineBasis,
    times: &[f64],
) -> Result<LagBasisIntegrals> {
    let [wlo, whi] = w_basis.boundary();
    if wlo.abs() > 1e-12 {
        return Err(Error::InvalidConfig(
            "lag basis must start at zero lag".into(),
        ));
    }
    let max_lag = whi;
    for &t in times {
        check_window(t, max_lag, exposure)?;
    }
    let xp = exposure_pieces(exposure);
    let wp = weight_pieces(w_basis);
    let w_mat = w_matrix();
    let d = w_basis.n_basis;

    let rows: Vec<Vec<f64>> = times
        .par_iter()
        .map(|&t| {
            let mut row = vec![0.0; d];
            let breaks = merged_breaks(t, max_lag, &xp.breaks, &wp.breaks);
            for win in breaks.windows(2) {
                let (m, n) = (win[0], win[1]);
                let h = n - m;
                let mid = 0.5 * (m + n);
                let xr = xp.span_of(mid);
                let wr = wp.span_of(t - mid);
                let (wstart, wcoefs) = &wp.spans[wr];
                // values of X at four evenly spaced points of [m, n]
                let mut vx = nalgebra::Vector4::<f64>::zeros();
                for i in 0..4 {
                    let s = m + i as f64 * h / 3.0;
                    vx[i] = xp.eval_in_span(xr, s);
                }
                let wvx = w_mat.transpose() * vx; // reused across the four basis functions
                for q in 0..4 {
                    let c = &wcoefs[q];
                    let mut acc = 0.0;
                    for i in 0..4 {
                        let s = m + i as f64 * h / 3.0;
                        let zeta = (t - s) - wp.breaks[wr];
                        let bval = ((c[3] * zeta + c[2]) * zeta + c[1]) * zeta + c[0];
                        acc += wvx[i] * bval;
                    }
                    row[wstart + q] += 0.5 * h * acc;
                }
            }
            row
        })
        .collect();

    let mut matrix = DMatrix::<f64>::zeros(times.len(), d);
    for (i, row) in rows.iter().enumerate() {
        for (q, v) in row.iter().enumerate() {
            matrix[(i, q)] = *v;
        }
    }
    Ok(LagBasisIntegrals {
        matrix,
        times: times.to_vec(),
        max_lag,
    })
}

/// Reference variant that re-evaluates both splines through their basis
/// recursions on every span instead of using precomputed span polynomials.
/// Kept as an independent check of the precomputation path.
#[doc(hidden)]
pub fn compute_lag_integrals_naive(
    exposure: &ExposureSpline,
    w_basis: &BSplineBasis,
    times: &[f64],
) -> Result<LagBasisIntegrals> {
    let max_lag = w_basis.boundary()[1];
    for &t in times {
        check_window(t, max_lag, exposure)?;
    }
    let xp = exposure_pieces(exposure);
    let wp = weight_pieces(w_basis);
    let w_mat = w_matrix();
    let d = w_basis.n_basis;
    let mut matrix = DMatrix::<f64>::zeros(times.len(), d);
    for (ti, &t) in times.iter().enumerate() {
        let breaks = merged_breaks(t, max_lag, &xp.breaks, &wp.breaks);
        for win in breaks.windows(2) {
            let (m, n) = (win[0], win[1]);
            let h = n - m;
            let mut vx = nalgebra::Vector4::<f64>::zeros();
            let mut wrows = Vec::with_capacity(4);
            for i in 0..4 {
                let s = m + i as f64 * h / 3.0;
                vx[i] = exposure.eval(s)?;
                let l = (t - s).clamp(0.0, max_lag);
                wrows.push(w_basis.eval::<f64>(l)?);
            }
            let wvx = w_mat.transpose() * vx;
            let start = wrows.iter().map(|r| r.start).min().unwrap();
            for (i, row) in wrows.iter().enumerate() {
                for k in 0..4 {
                    let q = row.start + k;
                    if row.vals[k] != 0.0 && q < start + 4 {
                        matrix[(ti, q)] += 0.5 * h * wvx[i] * row.vals[k];
                    }
                }
            }
        }
    }
    Ok(LagBasisIntegrals {
        matrix,
        times: times.to_vec(),
        max_lag,
    })
}

/// Exact per-time envelope `sqrt(INT_0^L X(t-l)^2 dl)` and its maximum.
/// The squared spline is degree six per span; four-point Gauss–Legendre is
/// exact through degree seven.
pub fn ace_bound(exposure: &ExposureSpline, max_lag: f64, times: &[f64]) -> Result<AceBound> {
    for &t in times {
        check_window(t, max_lag, exposure)?;
    }
    let xp = exposure_pieces(exposure);
    let per_time: Vec<f64> = times
        .iter()
        .map(|&t| {
            let breaks = merged_breaks(t, max_lag, &xp.breaks, &[]);
            let mut acc = 0.0;
            for win in breaks.windows(2) {
                let (a, b) = (win[0], win[1]);
                let half = 0.5 * (b - a);
                let mid = 0.5 * (a + b);
                let r = xp.span_of(mid);
                for &(xi, wi) in GL4.iter() {
                    let s = mid + half * xi;
                    let v = xp.eval_in_span(r, s);
                    acc += wi * half * v * v;
                }
            }
            acc.sqrt()
        })
        .collect();
    let e_bar = per_time.iter().cloned().fold(0.0, f64::max);
    Ok(AceBound { e_bar, per_time })
}

/// Cumulative exposure at one time: `E(t) = alpha_w' D(t)`.
pub fn ace_value(row: &[f64], alpha_w: &[f64]) -> Result<f64> {
    if row.len() != alpha_w.len() {
        return Err(Error::DimensionMismatch {
            what: "lag-basis row vs weight coefficients",
            expected: row.len(),
            got: alpha_w.len(),
        });
    }
    Ok(row.iter().zip(alpha_w).map(|(a, b)| a * b).sum())
}

impl LagBasisIntegrals {
    /// `E(t)` for every row.
    pub fn ace_all(&self, alpha_w: &[f64]) -> DVector<f64> {
        &self.matrix * DVector::from_column_slice(alpha_w)
    }

    /// Row `i` as an owned contiguous vector.
    pub fn row_vec(&self, i: usize) -> Vec<f64> {
        self.matrix.row(i).iter().cloned().collect()
    }
}
