//! Counting growing modes of the discrete linearization.
//!
//! The time-evolution linearization is `w_t = J w` with `J = ∂F/∂x`. A mode
//! grows when `Re λ(J) > 0`; in the `L + μ = 0` convention (`μ = -λ`) this is
//! an eigenvalue `μ` with `Re μ < 0`. The returned index is the number of such
//! eigenvalues with `Re λ > 1e-8`.

use nalgebra::{DMatrix, Schur};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::{assemble_jacobian, Grid, StateVector};
use crate::model::ModelParams;
use crate::scalar::Scalar;
use crate::solver::BandedMatrix;

/// Eigenvalues with real part above this count as growing.
pub const GROWTH_THRESHOLD: f64 = 1e-8;

/// Grids up to this many nodes use a dense eigensolve.
pub const DENSE_NODE_LIMIT: usize = 400;

/// Number of growing modes of the linearization at `(state, d2)`, or `None`
/// when the eigensolver could not certify the count.
pub fn stability_index<T: Scalar>(
    state: &StateVector<T>,
    d2: T,
    params: &ModelParams<T>,
    grid: &Grid<T>,
) -> Option<usize> {
    let jac = assemble_jacobian(state, d2, params, grid).ok()?;
    let jac = to_f64(&jac);
    if grid.n <= DENSE_NODE_LIMIT {
        unstable_count_dense(&jac)
    } else {
        unstable_count_shifted(&jac, reaction_radius(state, params))
    }
}

pub(crate) fn to_f64<T: Scalar>(a: &BandedMatrix<T>) -> BandedMatrix<f64> {
    let (kl, ku) = a.bandwidths();
    BandedMatrix::from_fn(a.n(), kl, ku, |i, j| a.get(i, j).as_f64())
}

/// Row-sum bound of the reaction Jacobian over all nodes; growing modes of
/// the linearization are taken to lie within this radius of the origin.
pub(crate) fn reaction_radius<T: Scalar>(state: &StateVector<T>, p: &ModelParams<T>) -> f64 {
    state
        .u
        .iter()
        .zip(&state.v)
        .map(|(&u, &v)| {
            let (u, v) = (u.as_f64(), v.as_f64());
            let r1 = (p.a1.as_f64() - 2.0 * p.b1.as_f64() * u + p.c1.as_f64() * v).abs() + (p.c1.as_f64() * u).abs();
            let r2 = (p.b2.as_f64() * v).abs()
                + (-p.a2.as_f64() + p.b2.as_f64() * u - 2.0 * p.c2.as_f64() * v).abs();
            r1.max(r2)
        })
        .fold(0.0, f64::max)
}

/// Dense real Schur decomposition of the full Jacobian.
pub fn unstable_count_dense(jac: &BandedMatrix<f64>) -> Option<usize> {
    let n = jac.n();
    let (kl, ku) = jac.bandwidths();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i.saturating_sub(kl)..(i + ku + 1).min(n) {
            m[(i, j)] = jac.get(i, j);
        }
    }
    let schur = Schur::try_new(m, f64::EPSILON, 100 * n)?;
    let eig = schur.complex_eigenvalues();
    if eig.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return None;
    }
    Some(eig.iter().filter(|z| z.re > GROWTH_THRESHOLD).count())
}

/// Eigenvalues of `J` nearest a small positive shift `σ`, by subspace
/// iteration on `(J - σI)^{-1}` with Rayleigh–Ritz extraction.
///
/// The count is certified only when the captured set reaches beyond `radius`
/// (plus `σ`); the block is doubled up to 64 vectors before giving up.
pub fn unstable_count_shifted(jac: &BandedMatrix<f64>, radius: f64) -> Option<usize> {
    let n = jac.n();
    let sigma = std::f64::consts::FRAC_1_PI * radius.max(1e-3);
    let mut shifted = jac.clone();
    shifted.shift_diagonal(-sigma);
    let lu = shifted.factor().ok()?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut k = 12.min(n);
    loop {
        let mut q = DMatrix::<f64>::from_fn(n, k, |_, _| rng.random::<f64>() - 0.5);
        q = q.qr().q();
        let mut prev: Option<Vec<f64>> = None;
        let mut result = None;
        for it in 0..400 {
            let mut z = DMatrix::<f64>::zeros(n, k);
            for c in 0..k {
                let col: Vec<f64> = q.column(c).iter().copied().collect();
                let sol = lu.solve(&col);
                for (r, v) in sol.into_iter().enumerate() {
                    z[(r, c)] = v;
                }
            }
            q = z.qr().q();
            if it % 5 != 4 {
                continue;
            }
            let mut jq = DMatrix::<f64>::zeros(n, k);
            for c in 0..k {
                let col: Vec<f64> = q.column(c).iter().copied().collect();
                for (r, v) in jac.mul_vec(&col).into_iter().enumerate() {
                    jq[(r, c)] = v;
                }
            }
            let h = q.transpose() * &jq;
            let schur = Schur::try_new(h, f64::EPSILON, 100 * k)?;
            let mut ritz: Vec<(f64, f64)> = schur.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect();
            ritz.sort_by(|a, b| {
                let da = (a.0 - sigma).hypot(a.1);
                let db = (b.0 - sigma).hypot(b.1);
                da.total_cmp(&db)
            });
            let dist: Vec<f64> = ritz.iter().map(|z| (z.0 - sigma).hypot(z.1)).collect();
            let converged = prev
                .as_ref()
                .is_some_and(|p| p.iter().zip(&dist).all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + b.abs())));
            if converged {
                let reach = dist.last().copied().unwrap_or(0.0);
                if reach > radius + 2.0 * sigma || k == n {
                    result = Some(ritz.iter().filter(|z| z.0 > GROWTH_THRESHOLD).count());
                }
                break;
            }
            prev = Some(dist);
        }
        if result.is_some() {
            return result;
        }
        if k >= 64.min(n) {
            return None;
        }
        k = (2 * k).min(64).min(n);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::constant_state;

    fn reference(d2: f64) -> (ModelParams<f64>, StateVector<f64>) {
        let p = ModelParams::reference(2.0, 1.0, d2).unwrap();
        let c = constant_state(&p);
        (p, StateVector::constant(101, c.u_star, c.v_star))
    }

    #[test]
    fn constant_state_counts_match_mode_analysis() {
        for (d2, expected) in [(0.05, 0), (0.02, 1), (0.007, 2), (0.003, 3)] {
            let (p, s) = reference(d2);
            let g = Grid::for_params(101, &p).unwrap();
            assert_eq!(stability_index(&s, d2, &p, &g), Some(expected), "d2 = {d2}");
        }
    }

    #[test]
    fn shifted_iteration_agrees_with_dense() {
        for d2 in [0.05, 0.02, 0.007] {
            let (p, s) = reference(d2);
            let g = Grid::for_params(101, &p).unwrap();
            let jac = to_f64(&assemble_jacobian(&s, d2, &p, &g).unwrap());
            let dense = unstable_count_dense(&jac);
            let shifted = unstable_count_shifted(&jac, reaction_radius(&s, &p));
            assert_eq!(dense, shifted, "d2 = {d2}");
        }
    }

    #[test]
    fn diagonal_matrix_counts_positive_entries() {
        let diag = [-3.0, 2.0, -1e-9, 5e-9, 0.5, -7.0];
        let a = BandedMatrix::from_fn(diag.len(), 1, 1, |i, j| if i == j { diag[i] } else { 0.0 });
        assert_eq!(unstable_count_dense(&a), Some(2));
    }
}
