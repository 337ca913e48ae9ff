//! Independent oracles for the test suites.
//!
//! Everything in this module deliberately avoids the main implementation
//! paths: basis values come from the plain textbook recursion, interpolation
//! from the tridiagonal second-derivative construction, and integrals from
//! adaptive Gauss–Kronrod quadrature. Tests compare the production code
//! against these.

/// 7-point Gauss / 15-point Kronrod pair on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_813,
    0.949_107_912_342_759,
    0.864_864_423_359_769,
    0.741_531_185_599_394,
    0.586_087_235_467_691,
    0.405_845_151_377_397,
    0.207_784_955_007_898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529,
    0.063_092_092_629_979,
    0.104_790_010_322_250,
    0.140_653_259_715_525,
    0.169_004_726_639_267,
    0.190_350_578_064_785,
    0.204_432_940_075_298,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_870,
    0.279_705_391_489_277,
    0.381_830_050_505_119,
    0.417_959_183_673_469,
];

fn gk15<F: FnMut(f64) -> f64>(a: f64, b: f64, f: &mut F) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = half * XGK[j];
        let fsum = f(mid - x) + f(mid + x);
        kron += WGK[j] * fsum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * fsum;
        }
    }
    (kron * half, (kron - gauss).abs() * half)
}

/// Adaptive Gauss–Kronrod integration to absolute/relative tolerance.
pub fn adaptive_gk<F: FnMut(f64) -> f64>(a: f64, b: f64, tol: f64, f: &mut F) -> f64 {
    fn recurse<F: FnMut(f64) -> f64>(a: f64, b: f64, tol: f64, f: &mut F, depth: usize) -> f64 {
        let (val, err) = gk15(a, b, f);
        if err <= tol * (1.0 + val.abs()) || depth >= 30 {
            val
        } else {
            let mid = 0.5 * (a + b);
            recurse(a, mid, tol * 0.5, f, depth + 1) + recurse(mid, b, tol * 0.5, f, depth + 1)
        }
    }
    recurse(a, b, tol, f, 0)
}

/// Single B-spline basis function by the textbook two-term recursion
/// (half-open spans, 0/0 treated as 0).
pub fn cox_de_boor(knots: &[f64], i: usize, order: usize, x: f64) -> f64 {
    if order == 1 {
        return if knots[i] <= x && x < knots[i + 1] {
            1.0
        } else {
            0.0
        };
    }
    let mut v = 0.0;
    let d1 = knots[i + order - 1] - knots[i];
    if d1 > 0.0 {
        v += (x - knots[i]) / d1 * cox_de_boor(knots, i, order - 1, x);
    }
    let d2 = knots[i + order] - knots[i + 1];
    if d2 > 0.0 {
        v += (knots[i + order] - x) / d2 * cox_de_boor(knots, i + 1, order - 1, x);
    }
    v
}

/// All `len(knots) - order` basis values at `x` by the naive recursion.
pub fn cox_de_boor_all(knots: &[f64], order: usize, x: f64) -> Vec<f64> {
    let d = knots.len() - order;
    (0..d).map(|i| cox_de_boor(knots, i, order, x)).collect()
}

/// Natural cubic spline interpolant via the tridiagonal system in the
/// second derivatives at the data points (equally or unequally spaced).
pub struct NaturalSplineOracle {
    xs: Vec<f64>,
    ys: Vec<f64>,
    m: Vec<f64>, // second derivatives at the knots
}

impl NaturalSplineOracle {
    pub fn fit(xs: &[f64], ys: &[f64]) -> Self {
        let n = xs.len();
        assert!(n >= 3);
        let h: Vec<f64> = (0..n - 1).map(|i| xs[i + 1] - xs[i]).collect();
        // Tridiagonal system for interior second derivatives m[1..n-1];
        // natural boundary: m[0] = m[n-1] = 0.
        let dim = n - 2;
        let mut sub = vec![0.0; dim];
        let mut diag = vec![0.0; dim];
        let mut sup = vec![0.0; dim];
        let mut rhs = vec![0.0; dim];
        for i in 0..dim {
            sub[i] = h[i];
            diag[i] = 2.0 * (h[i] + h[i + 1]);
            sup[i] = h[i + 1];
            rhs[i] = 6.0 * ((ys[i + 2] - ys[i + 1]) / h[i + 1] - (ys[i + 1] - ys[i]) / h[i]);
        }
        // Thomas algorithm
        for i in 1..dim {
            let w = sub[i] / diag[i - 1];
            diag[i] -= w * sup[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        let mut sol = vec![0.0; dim];
        if dim > 0 {
            sol[dim - 1] = rhs[dim - 1] / diag[dim - 1];
            for i in (0..dim - 1).rev() {
                sol[i] = (rhs[i] - sup[i] * sol[i + 1]) / diag[i];
            }
        }
        let mut m = vec![0.0; n];
        m[1..n - 1].copy_from_slice(&sol);
        NaturalSplineOracle {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            m,
        }
    }

    /// Evaluates the interpolant; linear extension outside the data range.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            let h = self.xs[1] - self.xs[0];
            let slope = (self.ys[1] - self.ys[0]) / h - h / 6.0 * self.m[1];
            return self.ys[0] + slope * (x - self.xs[0]);
        }
        if x >= self.xs[n - 1] {
            let h = self.xs[n - 1] - self.xs[n - 2];
            let slope = (self.ys[n - 1] - self.ys[n - 2]) / h + h / 6.0 * self.m[n - 2];
            return self.ys[n - 1] + slope * (x - self.xs[n - 1]);
        }
        let mut lo = 0;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.xs[mid] <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let h = self.xs[hi] - self.xs[lo];
        let a = (self.xs[hi] - x) / h;
        let b = (x - self.xs[lo]) / h;
        a * self.ys[lo]
            + b * self.ys[hi]
            + ((a.powi(3) - a) * self.m[lo] + (b.powi(3) - b) * self.m[hi]) * h * h / 6.0
    }
}

/// Central finite-difference gradient of a scalar function.
pub fn fd_gradient<F: FnMut(&[f64]) -> f64>(x: &[f64], h: f64, mut f: F) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let hi = h * (1.0 + x[i].abs());
        xp[i] = x[i] + hi;
        let fp = f(&xp);
        xp[i] = x[i] - hi;
        let fm = f(&xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * hi);
    }
    g
}

/// Central finite-difference Hessian of a scalar function.
pub fn fd_hessian<F: FnMut(&[f64]) -> f64>(x: &[f64], h: f64, mut f: F) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut out = vec![vec![0.0; n]; n];
    let mut xp = x.to_vec();
    let f0 = f(x);
    for i in 0..n {
        let hi = h * (1.0 + x[i].abs());
        for j in 0..=i {
            let hj = h * (1.0 + x[j].abs());
            let v = if i == j {
                xp[i] = x[i] + hi;
                let fp = f(&xp);
                xp[i] = x[i] - hi;
                let fm = f(&xp);
                xp[i] = x[i];
                (fp - 2.0 * f0 + fm) / (hi * hi)
            } else {
                xp[i] = x[i] + hi;
                xp[j] = x[j] + hj;
                let fpp = f(&xp);
                xp[j] = x[j] - hj;
                let fpm = f(&xp);
                xp[i] = x[i] - hi;
                xp[j] = x[j] + hj;
                let fmp = f(&xp);
                xp[j] = x[j] - hj;
                let fmm = f(&xp);
                xp[i] = x[i];
                xp[j] = x[j];
                (fpp - fpm - fmp + fmm) / (4.0 * hi * hj)
            };
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

/// Relative difference with an absolute floor, `|a-b| / (1 + max(|a|,|b|))`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn adaptive_gk_hits_known_integrals() {
        let mut f = |x: f64| x.sin();
        let v = adaptive_gk(0.0, std::f64::consts::PI, 1e-12, &mut f);
        assert_relative_eq!(v, 2.0, max_relative = 1e-12);
        let mut g = |x: f64| (-x * x).exp();
        let v = adaptive_gk(-8.0, 8.0, 1e-12, &mut g);
        assert_relative_eq!(v, std::f64::consts::PI.sqrt(), max_relative = 1e-10);
    }

    #[test]
    fn natural_spline_oracle_interpolates() {
        let xs: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| (0.8 * x).sin() + 0.1 * x).collect();
        let s = NaturalSplineOracle::fit(&xs, &ys);
        for (x, y) in xs.iter().zip(&ys) {
            assert_relative_eq!(s.eval(*x), *y, epsilon = 1e-12);
        }
    }
}
