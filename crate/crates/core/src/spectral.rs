//! Closed-form spectral data on the interval: Neumann eigenpairs, the 2×2 mode
//! blocks of the linearization at the constant state, critical values of `d2`,
//! kernel ratios and the large-flux limits of all of them.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{constant_state, ModelParams};
use crate::scalar::Scalar;

/// `(jπ/L)²`.
pub fn neumann_eigenvalue<T: Scalar>(j: usize, length: T) -> T {
    (T::from_usize_lossy(j) * T::PI() / length).powi(2)
}

/// L²-normalized Neumann eigenfunction of index `j` evaluated at `x`.
pub fn neumann_eigenfunction<T: Scalar>(j: usize, length: T, x_left: T, x: T) -> Result<T> {
    let slack = T::lit(64.0) * T::epsilon() * (T::one() + x_left.abs() + length.abs());
    if x < x_left - slack || x > x_left + length + slack || !x.is_finite() {
        return Err(Error::Domain(format!(
            "x = {x} outside [{x_left}, {}]",
            x_left + length
        )));
    }
    Ok(eigenfunction_unchecked(j, length, x_left, x))
}

#[inline]
pub(crate) fn eigenfunction_unchecked<T: Scalar>(j: usize, length: T, x_left: T, x: T) -> T {
    if j == 0 {
        T::one() / length.sqrt()
    } else {
        let arg = T::from_usize_lossy(j) * T::PI() * (x - x_left) / length;
        (T::lit(2.0) / length).sqrt() * arg.cos()
    }
}

/// A Neumann eigenpair of the interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeumannMode<T> {
    pub j: usize,
    pub lambda: T,
    pub length: T,
    pub x_left: T,
}

impl<T: Scalar> NeumannMode<T> {
    pub fn new(j: usize, length: T, x_left: T) -> Self {
        NeumannMode {
            j,
            lambda: neumann_eigenvalue(j, length),
            length,
            x_left,
        }
    }

    pub fn eval(&self, x: T) -> Result<T> {
        neumann_eigenfunction(self.j, self.length, self.x_left, x)
    }
}

/// Sign pattern of the two roots of `μ² - tr μ + det = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RootSigns {
    /// `μ⁻ < 0 < μ⁺`: the mode grows in time.
    Saddle,
    /// `μ⁻ = 0 < μ⁺`.
    Critical,
    /// Both real parts positive: the mode decays.
    Stable,
}

/// Linearization data for one Neumann mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeData<T> {
    pub j: usize,
    pub lambda: T,
    pub d2: T,
    /// Row-major `A_j`.
    pub block: [[T; 2]; 2],
    pub trace: T,
    pub det: T,
    pub mu_minus: Complex<T>,
    pub mu_plus: Complex<T>,
    pub in_region: bool,
    pub d_star: Option<T>,
    pub kappa: T,
    pub kappa_star: T,
}

impl<T: Scalar> ModeData<T> {
    pub fn root_signs(&self) -> RootSigns {
        classify_det(self.det)
    }

    /// Scale of the terms entering `det`, for relative comparisons.
    pub fn det_scale(&self) -> T {
        (self.block[0][0] * self.block[1][1]).abs() + (self.block[0][1] * self.block[1][0]).abs()
    }

    /// Max-abs entry norm of the block.
    pub fn block_norm(&self) -> T {
        self.block
            .iter()
            .flatten()
            .fold(T::zero(), |m, &x| m.max(x.abs()))
    }
}

pub fn classify_det<T: Scalar>(det: T) -> RootSigns {
    if det < T::zero() {
        RootSigns::Saddle
    } else if det == T::zero() {
        RootSigns::Critical
    } else {
        RootSigns::Stable
    }
}

/// Entries of `A_j(d2)` with an arbitrary eigenvalue `lambda` in place of `λ_j`.
pub fn block_entries<T: Scalar>(lambda: T, d2: T, p: &ModelParams<T>) -> [[T; 2]; 2] {
    let c = constant_state(p);
    [
        [
            p.b1 * c.u_star + (p.d1 + p.alpha * c.v_star) * lambda,
            -(p.c1 + lambda * p.alpha) * c.u_star,
        ],
        [
            -(p.b2 + lambda * p.beta) * c.v_star,
            p.c2 * c.v_star + (d2 + p.beta * c.u_star) * lambda,
        ],
    ]
}

/// Roots `(μ⁻, μ⁺)` ordered by real part, then imaginary part.
pub fn characteristic_roots<T: Scalar>(trace: T, det: T) -> (Complex<T>, Complex<T>) {
    let two = T::lit(2.0);
    let disc = trace * trace - T::lit(4.0) * det;
    if disc >= T::zero() {
        let sq = disc.sqrt();
        // Avoid cancellation in the smaller root.
        let (lo, hi) = if trace >= T::zero() {
            let q = (trace + sq) / two;
            (if q != T::zero() { det / q } else { T::zero() }, q)
        } else {
            let q = (trace - sq) / two;
            (q, if q != T::zero() { det / q } else { T::zero() })
        };
        (Complex::new(lo, T::zero()), Complex::new(hi, T::zero()))
    } else {
        let re = trace / two;
        let im = (-disc).sqrt() / two;
        (Complex::new(re, -im), Complex::new(re, im))
    }
}

/// Mode data built from an arbitrary eigenvalue (used with discrete Laplacian eigenvalues).
pub fn mode_block_with_lambda<T: Scalar>(j: usize, lambda: T, d2: T, p: &ModelParams<T>) -> ModeData<T> {
    let block = block_entries(lambda, d2, p);
    let trace = block[0][0] + block[1][1];
    let det = block[0][0] * block[1][1] - block[0][1] * block[1][0];
    let (mu_minus, mu_plus) = characteristic_roots(trace, det);
    let numerator = region_numerator_with_lambda(lambda, p);
    let in_region = j >= 1 && numerator > T::zero();
    let d_star = if in_region {
        Some(numerator / critical_denominator(lambda, p))
    } else {
        None
    };
    let (kappa, kappa_star) = kernel_ratios_with_lambda(lambda, p);
    ModeData {
        j,
        lambda,
        d2,
        block,
        trace,
        det,
        mu_minus,
        mu_plus,
        in_region,
        d_star,
        kappa,
        kappa_star,
    }
}

pub fn mode_block<T: Scalar>(j: usize, d2: T, p: &ModelParams<T>) -> ModeData<T> {
    mode_block_with_lambda(j, neumann_eigenvalue(j, p.length), d2, p)
}

/// Left-hand side of the `R_j` membership inequality (positive inside the region).
pub fn region_numerator_with_lambda<T: Scalar>(lambda: T, p: &ModelParams<T>) -> T {
    let c = constant_state(p);
    p.a2 * c.v_star * lambda * p.alpha
        - (p.a1 + p.d1 * lambda) * c.u_star * lambda * p.beta
        - (p.c2 * p.d1 * lambda + p.a1 * p.c2 - p.a2 * p.c1) * c.v_star
}

fn critical_denominator<T: Scalar>(lambda: T, p: &ModelParams<T>) -> T {
    let c = constant_state(p);
    ((p.d1 + p.alpha * c.v_star) * lambda + p.b1 * c.u_star) * lambda
}

pub fn region_membership<T: Scalar>(j: usize, p: &ModelParams<T>) -> Result<bool> {
    if j == 0 {
        return Err(Error::InvalidParameter("region R_j is defined for j >= 1".into()));
    }
    Ok(region_numerator_with_lambda(neumann_eigenvalue(j, p.length), p) > T::zero())
}

/// Critical `d2` at which mode `j` becomes singular, if `(α, β)` lies in `R_j`.
pub fn critical_d2<T: Scalar>(j: usize, p: &ModelParams<T>) -> Option<T> {
    if j == 0 {
        return None;
    }
    critical_d2_with_lambda(neumann_eigenvalue(j, p.length), p)
}

pub fn critical_d2_with_lambda<T: Scalar>(lambda: T, p: &ModelParams<T>) -> Option<T> {
    let num = region_numerator_with_lambda(lambda, p);
    (num > T::zero() && lambda > T::zero()).then(|| num / critical_denominator(lambda, p))
}

/// `(κ_j, κ*_j)`: `(1, κ_j)` spans the kernel of `A_j(d_*)`, `(1, κ*_j)` that of its transpose.
pub fn kernel_ratios<T: Scalar>(j: usize, p: &ModelParams<T>) -> (T, T) {
    kernel_ratios_with_lambda(neumann_eigenvalue(j, p.length), p)
}

fn kernel_ratios_with_lambda<T: Scalar>(lambda: T, p: &ModelParams<T>) -> (T, T) {
    let c = constant_state(p);
    let top = p.b1 * c.u_star + (p.d1 + p.alpha * c.v_star) * lambda;
    (
        top / ((p.c1 + lambda * p.alpha) * c.u_star),
        top / ((p.b2 + lambda * p.beta) * c.v_star),
    )
}

/// The set of destabilizing modes and the stability threshold of the constant state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSet<T> {
    /// Indices `j ≤ j_max` with `(α, β) ∈ R_j`, ascending.
    pub modes: Vec<usize>,
    /// Critical values matching `modes`.
    pub d_stars: Vec<T>,
    /// Largest critical value, zero when no mode destabilizes.
    pub threshold: T,
    /// Whether every mode above `j_max` is provably outside its region.
    pub certified: bool,
    /// Eigenvalue above which membership is impossible (only when `β > 0`).
    pub lambda_bound: Option<T>,
    pub j_max: usize,
}

pub fn mode_set_and_threshold<T: Scalar>(p: &ModelParams<T>, j_max: usize) -> Result<ModeSet<T>> {
    if j_max == 0 {
        return Err(Error::InvalidParameter("j_max must be at least 1".into()));
    }
    let c = constant_state(p);
    let mut modes = Vec::new();
    let mut d_stars = Vec::new();
    for j in 1..=j_max {
        if let Some(d) = critical_d2(j, p) {
            modes.push(j);
            d_stars.push(d);
        }
    }
    let threshold = d_stars.iter().fold(T::zero(), |m, &d| m.max(d));
    let lambda_max = neumann_eigenvalue(j_max, p.length);
    let (certified, lambda_bound) = if p.beta > T::zero() {
        // Membership needs a2 v* α > (a1 + d1 λ) u* β.
        let bound = (p.a2 * c.v_star * p.alpha / (c.u_star * p.beta) - p.a1) / p.d1;
        (lambda_max >= bound, Some(bound))
    } else {
        // β = 0: the inequality reads λ (a2 α - c2 d1) v* > (a1 c2 - a2 c1) v*.
        (p.a2 * p.alpha <= p.c2 * p.d1, None)
    };
    Ok(ModeSet {
        modes,
        d_stars,
        threshold,
        certified,
        lambda_bound,
        j_max,
    })
}

/// Ratio `γ = α/β` of the flux strengths, possibly infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FluxRatio<T> {
    Finite(T),
    Infinite,
}

impl<T: Scalar> FluxRatio<T> {
    pub fn from_flux(alpha: T, beta: T) -> Self {
        if beta == T::zero() {
            FluxRatio::Infinite
        } else {
            FluxRatio::Finite(alpha / beta)
        }
    }
}

impl<T: Scalar> std::fmt::Display for FluxRatio<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FluxRatio::Finite(g) => write!(f, "{g}"),
            FluxRatio::Infinite => f.write_str("inf"),
        }
    }
}

/// Which limit the solutions approach as the flux strengths grow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `γ < Aτ*`: solutions collapse onto the constant state.
    Logistic,
    /// `γ = Aτ*`: degenerate, excluded.
    Degenerate,
    /// `γ > Aτ*`: solutions approach the scalar field equation.
    ScalarField,
}

/// Coefficients of `d_eff Δv + ξ* v (v - v*) = 0` with `d_eff = offset + slope · d2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitCoefficients<T> {
    pub gamma: FluxRatio<T>,
    pub offset: T,
    pub slope: T,
    pub xi_star: T,
    pub v_star: T,
    pub regime: Regime,
}

impl<T: Scalar> LimitCoefficients<T> {
    pub fn d_eff(&self, d2: T) -> T {
        self.offset + self.slope * d2
    }

    /// Inverse of [`Self::d_eff`].
    pub fn d2_for(&self, d_eff: T) -> T {
        (d_eff - self.offset) / self.slope
    }
}

pub fn limit_coefficients<T: Scalar>(p: &ModelParams<T>, gamma: FluxRatio<T>) -> Result<LimitCoefficients<T>> {
    let c = constant_state(p);
    match gamma {
        FluxRatio::Finite(g) => {
            if !(g >= T::zero()) || !g.is_finite() {
                return Err(Error::InvalidParameter(format!("gamma must be in [0, inf], got {g}")));
            }
            let xi = (g * p.a2 - c.tau_star * p.a1) / c.v_star;
            let regime = if g < c.gamma_threshold {
                Regime::Logistic
            } else if g > c.gamma_threshold {
                Regime::ScalarField
            } else {
                Regime::Degenerate
            };
            Ok(LimitCoefficients {
                gamma,
                offset: c.tau_star * p.d1,
                slope: g,
                xi_star: xi,
                v_star: c.v_star,
                regime,
            })
        }
        FluxRatio::Infinite => Ok(LimitCoefficients {
            gamma,
            offset: T::zero(),
            slope: T::one(),
            xi_star: p.a2 / c.v_star,
            v_star: c.v_star,
            regime: Regime::ScalarField,
        }),
    }
}

/// Onset `d2` of the mode-`j` branch of the scalar field equation.
///
/// Returns `Ok(None)` when the mode never bifurcates (nonpositive onset).
pub fn limiting_critical_d2<T: Scalar>(j: usize, p: &ModelParams<T>, gamma: FluxRatio<T>) -> Result<Option<T>> {
    let lc = limit_coefficients(p, gamma)?;
    if lc.regime != Regime::ScalarField {
        return Err(Error::Regime(format!(
            "limiting onset requires gamma > A tau*, got gamma = {gamma}"
        )));
    }
    if j == 0 {
        return Err(Error::InvalidParameter("limiting onset is defined for j >= 1".into()));
    }
    Ok(limiting_critical_d2_with_lambda(neumann_eigenvalue(j, p.length), &lc))
}

pub(crate) fn limiting_critical_d2_with_lambda<T: Scalar>(lambda: T, lc: &LimitCoefficients<T>) -> Option<T> {
    let d2 = lc.d2_for(lc.xi_star * lc.v_star / lambda);
    (d2 > T::zero()).then_some(d2)
}
