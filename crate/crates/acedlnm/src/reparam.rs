//! Identifiability reparameterization for the lag weight function.
//!
//! The weight `w` must satisfy a scale constraint (unit L2 norm over the lag
//! window) and a sign constraint (positive integral). Both are absorbed by
//! (1) a sum-to-zero transform splitting the basis into a constant function
//! plus centered functions, and (2) normalizing the transformed coefficient
//! vector `[1, phi]` by the Gram quadratic form, leaving the unconstrained
//! `phi` of dimension `d - 1` as the free parameter.

use crate::error::{Error, Result};
use crate::linalg::{gauss_legendre, householder_null_basis, GL4};
use crate::scalar::Real;
use crate::spline::BSplineBasis;
use nalgebra::DMatrix;

/// Unconstrained weight parameters, length `d - 1`.
pub type UnconstrainedWeights = Vec<f64>;

/// Weight coefficients on the constraint surface, in both coordinate
/// systems.
#[derive(Clone, Debug)]
pub struct ConstrainedWeights {
    /// Coordinates in the transformed (constant + centered) basis.
    pub alpha_plus: Vec<f64>,
    /// Coordinates in the original B-spline basis.
    pub alpha_w: Vec<f64>,
}

/// Normalization `v = [1, phi] -> v / (v' C v)^{1/2}` with its derivatives.
#[derive(Clone, Debug)]
pub struct NormalizeMap {
    pub c: DMatrix<f64>,
}

impl NormalizeMap {
    pub fn dim(&self) -> usize {
        self.c.nrows()
    }

    fn v_full<S: Real>(&self, phi: &[S]) -> Vec<S> {
        let mut v = Vec::with_capacity(phi.len() + 1);
        v.push(S::one());
        v.extend_from_slice(phi);
        v
    }

    fn c_times<S: Real>(&self, v: &[S]) -> Vec<S> {
        let d = self.dim();
        let mut out = vec![S::zero(); d];
        for i in 0..d {
            let mut acc = S::zero();
            for j in 0..d {
                acc = acc + S::from_f64(self.c[(i, j)]) * v[j];
            }
            out[i] = acc;
        }
        out
    }

    /// Normalized coefficients `alpha_plus(phi)`.
    pub fn alpha_plus<S: Real>(&self, phi: &[S]) -> Result<Vec<S>> {
        let v = self.v_full(phi);
        let cv = self.c_times(&v);
        let s = dot(&v, &cv);
        if !(s.value() > 0.0) || !s.is_finite() {
            return Err(Error::NotPositiveDefinite("gram quadratic form"));
        }
        let r = S::one() / s.sqrt();
        Ok(v.into_iter().map(|vi| vi * r).collect())
    }

    /// Jacobian `d alpha_plus / d phi`, a `d x (d-1)` matrix: the full
    /// Jacobian in `v` with its first column removed.
    pub fn jacobian<S: Real>(&self, phi: &[S]) -> Result<Vec<Vec<S>>> {
        let d = self.dim();
        let v = self.v_full(phi);
        let cv = self.c_times(&v);
        let s = dot(&v, &cv);
        if !(s.value() > 0.0) {
            return Err(Error::NotPositiveDefinite("gram quadratic form"));
        }
        let r = S::one() / s.sqrt();
        let r3 = r * r * r;
        let mut jac = vec![vec![S::zero(); d - 1]; d];
        for i in 0..d {
            for (col, j) in (1..d).enumerate() {
                let kron = if i == j { r } else { S::zero() };
                jac[i][col] = kron - v[i] * cv[j] * r3;
            }
        }
        Ok(jac)
    }

    /// Contraction of the second derivative tensor with a weight vector `g`:
    /// `sum_i g_i d2 alpha_plus_i / d phi d phi`, a `(d-1) x (d-1)` matrix.
    pub fn contract_second<S: Real>(&self, phi: &[S], g: &[S]) -> Result<Vec<Vec<S>>> {
        let d = self.dim();
        let v = self.v_full(phi);
        let cv = self.c_times(&v);
        let s = dot(&v, &cv);
        if !(s.value() > 0.0) {
            return Err(Error::NotPositiveDefinite("gram quadratic form"));
        }
        let r = S::one() / s.sqrt();
        let r3 = r * r * r;
        let r5 = r3 * r * r;
        let gv = dot(g, &v);
        let three = S::from_f64(3.0);
        let mut out = vec![vec![S::zero(); d - 1]; d - 1];
        for (row, j) in (1..d).enumerate() {
            for (col, k) in (1..d).enumerate() {
                let term = -(r3 * (cv[k] * g[j] + cv[j] * g[k] + gv * S::from_f64(self.c[(j, k)])))
                    + three * r5 * gv * cv[j] * cv[k];
                out[row][col] = term;
            }
        }
        Ok(out)
    }
}

fn dot<S: Real>(a: &[S], b: &[S]) -> S {
    let mut acc = S::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        acc = acc + *x * *y;
    }
    acc
}

/// Sum-to-zero transform plus Gram normalization for a weight basis.
#[derive(Clone, Debug)]
pub struct WeightReparam {
    pub basis: BSplineBasis,
    /// `d x d` transform: original coefficients = transform * alpha_plus.
    /// First column is all ones (the constant function), the rest span the
    /// centered functions.
    pub transform: DMatrix<f64>,
    pub map: NormalizeMap,
    pub partition_size: usize,
}

/// Builds the sum-to-zero reparameterization from `j_partition` evenly
/// spaced points on the basis domain (midpoint layout).
pub fn build_sum_to_zero(basis: &BSplineBasis, j_partition: usize) -> Result<WeightReparam> {
    let d = basis.n_basis;
    if j_partition < d {
        return Err(Error::PartitionTooSmall {
            j: j_partition,
            d,
        });
    }
    let [lo, hi] = basis.boundary();
    let len = hi - lo;
    // column sums of the basis over the partition
    let mut colsum = vec![0.0; d];
    for j in 0..j_partition {
        let l = lo + (j as f64 + 0.5) * len / j_partition as f64;
        let row = basis.eval::<f64>(l)?;
        for k in 0..4 {
            colsum[row.start + k] += row.vals[k];
        }
    }
    let z = householder_null_basis(&colsum);
    let mut transform = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        transform[(i, 0)] = 1.0;
        for j in 0..d - 1 {
            transform[(i, j + 1)] = z[(i, j)];
        }
    }

    // Gram matrix of the original basis, exact per span (degree-6 products)
    let mut gram0 = DMatrix::<f64>::zeros(d, d);
    for (a, b) in basis.spans() {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for &(xi, wi) in GL4.iter() {
            let x = mid + half * xi;
            let row = basis.eval::<f64>(x)?;
            let w = wi * half;
            for i in 0..4 {
                for j in 0..4 {
                    gram0[(row.start + i, row.start + j)] += w * row.vals[i] * row.vals[j];
                }
            }
        }
    }
    let mut c = transform.transpose() * gram0 * &transform;
    // symmetrize against rounding
    for i in 0..d {
        for j in 0..i {
            let m = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = m;
            c[(j, i)] = m;
        }
    }
    Ok(WeightReparam {
        basis: basis.clone(),
        transform,
        map: NormalizeMap { c },
        partition_size: j_partition,
    })
}

impl WeightReparam {
    pub fn dim(&self) -> usize {
        self.map.dim()
    }

    pub fn n_free(&self) -> usize {
        self.dim() - 1
    }

    /// Maps unconstrained parameters to constrained weight coefficients.
    pub fn phi_to_alpha(&self, phi: &[f64]) -> Result<ConstrainedWeights> {
        let alpha_plus = self.map.alpha_plus(phi)?;
        Ok(ConstrainedWeights {
            alpha_w: self.to_original(&alpha_plus),
            alpha_plus,
        })
    }

    /// Transforms `alpha_plus` coordinates to the original basis.
    pub fn to_original<S: Real>(&self, alpha_plus: &[S]) -> Vec<S> {
        let d = self.dim();
        let mut out = vec![S::zero(); d];
        for i in 0..d {
            let mut acc = S::zero();
            for j in 0..d {
                acc = acc + S::from_f64(self.transform[(i, j)]) * alpha_plus[j];
            }
            out[i] = acc;
        }
        out
    }

    /// `d alpha_plus / d phi` as a dense matrix.
    pub fn jacobian_dmatrix(&self, phi: &[f64]) -> Result<DMatrix<f64>> {
        let jac = self.map.jacobian(phi)?;
        let d = self.dim();
        let mut out = DMatrix::<f64>::zeros(d, d - 1);
        for i in 0..d {
            for j in 0..d - 1 {
                out[(i, j)] = jac[i][j];
            }
        }
        Ok(out)
    }

    /// Evaluates the weight function at `l` for given original-basis
    /// coefficients.
    pub fn weight_value(&self, alpha_w: &[f64], l: f64) -> Result<f64> {
        Ok(self.basis.eval::<f64>(l)?.dot(alpha_w))
    }

    /// Quadrature check of the two constraints: returns
    /// `(integral of w^2, integral of w)` computed independently of the Gram
    /// matrix machinery.
    pub fn constraint_quadrature(&self, alpha_w: &[f64]) -> (f64, f64) {
        let mut sq = 0.0;
        let mut lin = 0.0;
        for (a, b) in self.basis.spans() {
            sq += gauss_legendre(&GL4, a, b, |x| {
                let v = self.basis.eval::<f64>(x).unwrap().dot(alpha_w);
                v * v
            });
            lin += gauss_legendre(&GL4, a, b, |x| self.basis.eval::<f64>(x).unwrap().dot(alpha_w));
        }
        (sq, lin)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spline::{build_knots, KnotPlacement};
    use crate::testsupport::fd_gradient;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn make(lmax: f64, d: usize) -> WeightReparam {
        let basis = BSplineBasis::new(
            build_knots([0.0, lmax], KnotPlacement::EquallySpaced { n: d - 2 }).unwrap(),
        );
        build_sum_to_zero(&basis, 1000).unwrap()
    }

    #[test]
    fn rejects_small_partition() {
        let basis = BSplineBasis::new(
            build_knots([0.0, 15.0], KnotPlacement::EquallySpaced { n: 18 }).unwrap(),
        );
        assert!(build_sum_to_zero(&basis, 10).is_err());
    }

    #[test]
    fn transformed_columns_have_zero_partition_means() {
        let rp = make(15.0, 20);
        let d = rp.dim();
        let jp = rp.partition_size;
        let mut sums = vec![0.0; d];
        for j in 0..jp {
            let l = (j as f64 + 0.5) * 15.0 / jp as f64;
            let row = rp.basis.eval::<f64>(l).unwrap();
            for q in 0..d {
                let mut bq = 0.0;
                for k in 0..4 {
                    bq += row.vals[k] * rp.transform[(row.start + k, q)];
                }
                sums[q] += bq;
            }
        }
        for q in 1..d {
            assert!(
                (sums[q] / jp as f64).abs() < 1e-12,
                "column {q} mean {}",
                sums[q] / jp as f64
            );
        }
    }

    #[test]
    fn first_transformed_function_is_constant_one() {
        let rp = make(15.0, 20);
        for i in 0..=60 {
            let l = i as f64 * 0.25;
            let row = rp.basis.eval::<f64>(l).unwrap();
            let mut b1 = 0.0;
            for k in 0..4 {
                b1 += row.vals[k] * rp.transform[(row.start + k, 0)];
            }
            assert_relative_eq!(b1, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn transform_preserves_span() {
        // random original-basis functions project onto the transformed basis
        // with negligible residual
        let rp = make(12.0, 12);
        let d = rp.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // evaluate both bases on a grid and solve least squares
        let m = 200;
        let mut borig = DMatrix::<f64>::zeros(m, d);
        for i in 0..m {
            let l = 12.0 * (i as f64 + 0.5) / m as f64;
            let row = rp.basis.eval::<f64>(l).unwrap();
            for k in 0..4 {
                borig[(i, row.start + k)] = row.vals[k];
            }
        }
        let bplus = &borig * &rp.transform;
        let qr = bplus.clone().qr();
        for _ in 0..5 {
            let coef = DMatrix::<f64>::from_fn(d, 1, |_, _| rng.gen_range(-1.0..1.0));
            let target = &borig * &coef;
            let sol = qr.solve(&target).unwrap();
            let resid = (&bplus * sol - target).norm();
            assert!(resid < 1e-10, "projection residual {resid}");
        }
    }

    #[test]
    fn gram_matrix_properties() {
        let rp = make(15.0, 20);
        let c = &rp.map.c;
        // integral of the constant function squared over [0, L]
        assert_relative_eq!(c[(0, 0)], 15.0, max_relative = 1e-12);
        // exact symmetry
        for i in 0..c.nrows() {
            for j in 0..c.ncols() {
                assert_eq!(c[(i, j)], c[(j, i)]);
            }
        }
        // quadratic form matches quadrature of the squared function
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let v: Vec<f64> = (0..rp.dim()).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let quad = {
                let cv = c * nalgebra::DVector::from_column_slice(&v);
                nalgebra::DVector::from_column_slice(&v).dot(&cv)
            };
            let orig = rp.to_original(&v);
            let (sq, _) = rp.constraint_quadrature(&orig);
            assert_relative_eq!(quad, sq, max_relative = 1e-9);
        }
        // positive definite
        let min_eig = c
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert!(min_eig > 0.0);
    }

    #[test]
    fn phi_zero_gives_constant_weight() {
        let rp = make(15.0, 20);
        let cw = rp.phi_to_alpha(&vec![0.0; rp.n_free()]).unwrap();
        let inv_sqrt_l = 1.0 / 15.0f64.sqrt();
        assert_relative_eq!(cw.alpha_plus[0], inv_sqrt_l, max_relative = 1e-12);
        for q in 1..rp.dim() {
            assert!(cw.alpha_plus[q].abs() < 1e-14);
        }
        // w is the constant 1/sqrt(L)
        for i in 0..=30 {
            let l = i as f64 * 0.5;
            assert_relative_eq!(
                rp.weight_value(&cw.alpha_w, l).unwrap(),
                inv_sqrt_l,
                max_relative = 1e-10
            );
        }
        let (sq, lin) = rp.constraint_quadrature(&cw.alpha_w);
        assert_relative_eq!(sq, 1.0, max_relative = 1e-10);
        assert_relative_eq!(lin, 15.0f64.sqrt(), max_relative = 1e-10);
    }

    #[test]
    fn constraints_hold_for_random_phi() {
        let rp = make(15.0, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let phi: Vec<f64> = (0..rp.n_free()).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let cw = rp.phi_to_alpha(&phi).unwrap();
            // normalization identity in the Gram metric
            let v = nalgebra::DVector::from_column_slice(&cw.alpha_plus);
            let norm = v.dot(&(&rp.map.c * &v));
            assert!((norm - 1.0).abs() < 1e-12);
            assert!(cw.alpha_plus[0] > 0.0);
        }
        // quadrature-checked constraints on a subsample
        for _ in 0..20 {
            let phi: Vec<f64> = (0..rp.n_free()).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let cw = rp.phi_to_alpha(&phi).unwrap();
            let (sq, lin) = rp.constraint_quadrature(&cw.alpha_w);
            assert!((sq - 1.0).abs() < 1e-9, "norm {sq}");
            assert!(lin > 0.0, "sign {lin}");
        }
    }

    #[test]
    fn scale_identity_exact() {
        // alpha_plus scaled back by the norm recovers [1, phi] exactly
        let rp = make(10.0, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let phi: Vec<f64> = (0..rp.n_free()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let cw = rp.phi_to_alpha(&phi).unwrap();
        let mut v = vec![1.0];
        v.extend_from_slice(&phi);
        let dv = nalgebra::DVector::from_column_slice(&v);
        let s = dv.dot(&(&rp.map.c * &dv));
        for i in 0..rp.dim() {
            assert_relative_eq!(cw.alpha_plus[i] * s.sqrt(), v[i], max_relative = 1e-12);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let rp = make(15.0, 12);
        let d = rp.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..100 {
            let phi: Vec<f64> = (0..d - 1).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let jac = rp.jacobian_dmatrix(&phi).unwrap();
            for i in 0..d {
                let g = fd_gradient(&phi, 1e-6, |p| rp.map.alpha_plus(p).unwrap()[i]);
                for j in 0..d - 1 {
                    assert!(
                        (jac[(i, j)] - g[j]).abs() <= 1e-6 * (1.0 + g[j].abs()),
                        "d alpha[{i}] / d phi[{j}]: {} vs {}",
                        jac[(i, j)],
                        g[j]
                    );
                }
            }
        }
    }

    #[test]
    fn jacobian_identity_gram_at_origin() {
        // with an identity Gram the first row of the Jacobian vanishes at
        // phi = 0: the norm is stationary at the constant weight
        let map = NormalizeMap {
            c: DMatrix::<f64>::identity(6, 6),
        };
        let jac = map.jacobian(&[0.0; 5]).unwrap();
        for j in 0..5 {
            assert!(jac[0][j].abs() < 1e-15);
        }
        // and the remaining block is the identity
        for i in 1..6 {
            for j in 0..5 {
                let want = if i == j + 1 { 1.0 } else { 0.0 };
                assert_relative_eq!(jac[i][j], want, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn jacobian_columns_stay_on_constraint_surface() {
        let rp = make(15.0, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        for _ in 0..50 {
            let phi: Vec<f64> = (0..rp.n_free()).map(|_| rng.gen_range(-2.5..2.5)).collect();
            let cw = rp.phi_to_alpha(&phi).unwrap();
            let jac = rp.jacobian_dmatrix(&phi).unwrap();
            let calpha = &rp.map.c * nalgebra::DVector::from_column_slice(&cw.alpha_plus);
            for j in 0..rp.n_free() {
                let dot = jac.column(j).dot(&calpha);
                assert!(dot.abs() < 1e-9, "column {j} leaves the surface: {dot}");
            }
        }
    }

    #[test]
    fn second_derivative_contraction_matches_fd_of_jacobian() {
        let rp = make(8.0, 8);
        let d = rp.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..20 {
            let phi: Vec<f64> = (0..d - 1).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let g: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let m = rp.map.contract_second(&phi, &g).unwrap();
            // FD of sum_i g_i * J[i][j] in phi_k
            for j in 0..d - 1 {
                let grad = fd_gradient(&phi, 1e-5, |p| {
                    let jac = rp.map.jacobian(p).unwrap();
                    (0..d).map(|i| g[i] * jac[i][j]).sum::<f64>()
                });
                for k in 0..d - 1 {
                    assert!(
                        (m[j][k] - grad[k]).abs() <= 2e-5 * (1.0 + grad[k].abs()),
                        "contract[{j}][{k}]: {} vs {}",
                        m[j][k],
                        grad[k]
                    );
                }
            }
        }
    }
}
