//! Model coefficients, the positive constant state, reaction terms and the
//! a priori bounds satisfied by every steady state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::StateVector;
use crate::scalar::Scalar;

/// Kinetic coefficients of the two reaction terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReactionCoefficients<T> {
    pub a1: T,
    pub a2: T,
    pub b1: T,
    pub b2: T,
    pub c1: T,
    pub c2: T,
}

/// Returns whether `c1/c2 < b1/b2 < a1/a2` holds.
///
/// Both inequalities are compared after cross-multiplication, so no quotient
/// is ever rounded.
pub fn check_weak_cooperative<T: Scalar>(k: &ReactionCoefficients<T>) -> Result<bool> {
    let all = [
        ("a1", k.a1),
        ("a2", k.a2),
        ("b1", k.b1),
        ("b2", k.b2),
        ("c1", k.c1),
        ("c2", k.c2),
    ];
    for (name, value) in all {
        if !(value > T::zero()) || !value.is_finite() {
            return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {value}")));
        }
    }
    Ok(k.c1 * k.b2 < k.b1 * k.c2 && k.b1 * k.a2 < k.a1 * k.b2)
}

/// Coefficients of the steady-state problem on `(x_left, x_left + length)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    pub d1: T,
    /// Default value of the bifurcation parameter; routines that vary it take
    /// `d2` explicitly.
    pub d2: T,
    pub a1: T,
    pub a2: T,
    pub b1: T,
    pub b2: T,
    pub c1: T,
    pub c2: T,
    /// Flux strength of `u` toward `v`.
    pub alpha: T,
    /// Flux strength of `v` toward `u`.
    pub beta: T,
    pub length: T,
    pub x_left: T,
}

impl<T: Scalar> ModelParams<T> {
    /// Validates and builds a parameter set.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        d1: T,
        d2: T,
        kinetics: ReactionCoefficients<T>,
        alpha: T,
        beta: T,
        length: T,
        x_left: T,
    ) -> Result<Self> {
        let p = ModelParams {
            d1,
            d2,
            a1: kinetics.a1,
            a2: kinetics.a2,
            b1: kinetics.b1,
            b2: kinetics.b2,
            c1: kinetics.c1,
            c2: kinetics.c2,
            alpha,
            beta,
            length,
            x_left,
        };
        p.validate()?;
        Ok(p)
    }

    /// Interval `(-0.5, 0.5)`, `d1 = 0.004`, kinetics `(a1,a2,b1,b2,c1,c2) = (1,1,4,5,2,3)`.
    pub fn reference(alpha: T, beta: T, d2: T) -> Result<Self> {
        let kinetics = ReactionCoefficients {
            a1: T::one(),
            a2: T::one(),
            b1: T::lit(4.0),
            b2: T::lit(5.0),
            c1: T::lit(2.0),
            c2: T::lit(3.0),
        };
        Self::new(T::lit(0.004), d2, kinetics, alpha, beta, T::one(), T::lit(-0.5))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("d1", self.d1), ("d2", self.d2), ("length", self.length)] {
            if !(value > T::zero()) || !value.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {value}")));
            }
        }
        for (name, value) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(value >= T::zero()) || !value.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be nonnegative and finite, got {value}")));
            }
        }
        if !self.x_left.is_finite() {
            return Err(Error::InvalidParameter("x_left must be finite".into()));
        }
        if !check_weak_cooperative(&self.coefficients())? {
            return Err(Error::NotWeaklyCooperative);
        }
        Ok(())
    }

    pub fn coefficients(&self) -> ReactionCoefficients<T> {
        ReactionCoefficients {
            a1: self.a1,
            a2: self.a2,
            b1: self.b1,
            b2: self.b2,
            c1: self.c1,
            c2: self.c2,
        }
    }

    pub fn with_flux(mut self, alpha: T, beta: T) -> Result<Self> {
        self.alpha = alpha;
        self.beta = beta;
        self.validate()?;
        Ok(self)
    }

    pub fn with_d2(mut self, d2: T) -> Result<Self> {
        self.d2 = d2;
        self.validate()?;
        Ok(self)
    }

    pub fn x_right(&self) -> T {
        self.x_left + self.length
    }

    /// Determinant `b1 c2 - b2 c1`, positive under the weak cooperative condition.
    pub(crate) fn kinetic_det(&self) -> T {
        self.b1 * self.c2 - self.b2 * self.c1
    }
}

/// The positive constant solution and the ratios that govern the large-flux limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantState<T> {
    pub u_star: T,
    pub v_star: T,
    /// `u* / v*`.
    pub tau_star: T,
    /// `a1 / a2`.
    pub a_ratio: T,
    /// `A tau*`: the flux ratio separating the two limiting regimes.
    pub gamma_threshold: T,
}

pub fn constant_state<T: Scalar>(p: &ModelParams<T>) -> ConstantState<T> {
    let det = p.kinetic_det();
    let u_star = (p.a1 * p.c2 - p.a2 * p.c1) / det;
    let v_star = (p.a1 * p.b2 - p.a2 * p.b1) / det;
    let tau_star = u_star / v_star;
    let a_ratio = p.a1 / p.a2;
    ConstantState {
        u_star,
        v_star,
        tau_star,
        a_ratio,
        gamma_threshold: a_ratio * tau_star,
    }
}

/// Reaction terms `(u(a1 - b1 u + c1 v), v(-a2 + b2 u - c2 v))`, defined for all reals.
#[inline]
pub fn reaction<T: Scalar>(u: T, v: T, p: &ModelParams<T>) -> (T, T) {
    (u * growth_u(u, v, p), v * growth_v(u, v, p))
}

#[inline]
pub(crate) fn growth_u<T: Scalar>(u: T, v: T, p: &ModelParams<T>) -> T {
    p.a1 - p.b1 * u + p.c1 * v
}

#[inline]
pub(crate) fn growth_v<T: Scalar>(u: T, v: T, p: &ModelParams<T>) -> T {
    -p.a2 + p.b2 * u - p.c2 * v
}

/// Potentials of the equivalent semilinear system `Δu + V1 u = 0`, `Δv + V2 v = 0`
/// together with the pointwise bound both of them obey.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Potentials<T> {
    pub v1: T,
    pub v2: T,
    /// `|a1 - b1 u + c1 v| / d1 + |-a2 + b2 u - c2 v| / d2`.
    pub bound: T,
}

pub fn semilinear_potentials<T: Scalar>(u: T, v: T, d2: T, p: &ModelParams<T>) -> Result<Potentials<T>> {
    let denom = p.d1 * d2 + p.d1 * p.beta * u + d2 * p.alpha * v;
    if (u < T::zero() || v < T::zero()) && denom.abs() <= T::epsilon() * (p.d1 * d2) {
        return Err(Error::Domain(format!(
            "semilinear potentials undefined at (u, v) = ({u}, {v}): vanishing denominator"
        )));
    }
    if denom == T::zero() {
        return Err(Error::Domain("semilinear potentials: zero denominator".into()));
    }
    let gu = growth_u(u, v, p);
    let gv = growth_v(u, v, p);
    let v1 = ((d2 + p.beta * u) * gu + p.alpha * v * gv) / denom;
    let v2 = ((p.d1 + p.alpha * v) * gv + p.beta * u * gu) / denom;
    let bound = gu.abs() / p.d1 + gv.abs() / d2;
    Ok(Potentials { v1, v2, bound })
}

/// Upper bounds on `(‖u‖₂, ‖v‖₂)` valid for every steady state.
pub fn l2_bounds<T: Scalar>(p: &ModelParams<T>) -> (T, T) {
    let det = p.kinetic_det();
    let root_len = p.length.sqrt();
    (p.a1 * p.c2 / det * root_len, p.a1 * p.b2 / det * root_len)
}

/// Necessary condition for a nonconstant positive solution with sup-norm `m_emp`.
///
/// Returns `true` when at least one of the two inequalities holds; a computed
/// nonconstant solution must always produce `true`.
pub fn nonexistence_check<T: Scalar>(p: &ModelParams<T>, d2: T, m_emp: T) -> Result<bool> {
    if !(m_emp > T::zero()) {
        return Err(Error::InvalidParameter(format!("empirical sup-norm must be positive, got {m_emp}")));
    }
    let (lhs1, lhs2) = nonexistence_thresholds(p, m_emp);
    Ok(p.d1 < lhs1 || d2 < lhs2)
}

/// Right-hand sides of the two nonexistence inequalities: `(d1 threshold, d2 threshold)`.
pub fn nonexistence_thresholds<T: Scalar>(p: &ModelParams<T>, m: T) -> (T, T) {
    let half = T::lit(0.5);
    let lambda1 = (T::PI() / p.length).powi(2);
    let flux = p.alpha + p.beta;
    let t1 = flux * m * half + (p.a1 + (T::lit(3.0) * p.c1 + p.b2) * m * half) / lambda1;
    let t2 = m * half * (flux + (p.c1 + T::lit(3.0) * p.b2) / lambda1);
    (t1, t2)
}

/// `(max u / min u, max v / min v)` over the nodes.
pub fn harnack_ratios<T: Scalar>(state: &StateVector<T>) -> Result<(T, T)> {
    fn ratio<T: Scalar>(xs: &[T], name: &str) -> Result<T> {
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for &x in xs {
            if !(x > T::zero()) {
                return Err(Error::Domain(format!("Harnack ratio needs positive {name}, found {x}")));
            }
            lo = lo.min(x);
            hi = hi.max(x);
        }
        if xs.is_empty() {
            return Err(Error::Domain("empty state".into()));
        }
        Ok(hi / lo)
    }
    Ok((ratio(&state.u, "u")?, ratio(&state.v, "v")?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn coeffs(a1: f64, a2: f64, b1: f64, b2: f64, c1: f64, c2: f64) -> ReactionCoefficients<f64> {
        ReactionCoefficients { a1, a2, b1, b2, c1, c2 }
    }

    #[test]
    fn weak_cooperative_examples() {
        assert!(check_weak_cooperative(&coeffs(1.0, 1.0, 4.0, 5.0, 2.0, 3.0)).unwrap());
        assert!(!check_weak_cooperative(&coeffs(1.0, 1.0, 1.0, 1.0, 1.0, 1.0)).unwrap());
        // b1/b2 = 0.8 exceeds a1/a2 = 0.5
        assert!(!check_weak_cooperative(&coeffs(1.0, 2.0, 4.0, 5.0, 2.0, 3.0)).unwrap());
        assert!(matches!(
            check_weak_cooperative(&coeffs(0.0, 1.0, 4.0, 5.0, 2.0, 3.0)),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn boundary_of_condition_rejected() {
        let k = coeffs(2.0, 1.0, 2.0, 1.0, 1.0, 1.0);
        let r = ModelParams::new(1.0, 1.0, k, 0.0, 0.0, 1.0, -0.5);
        assert_eq!(r, Err(Error::NotWeaklyCooperative));
    }

    #[test]
    fn reference_constant_state() {
        let p = ModelParams::reference(2.0, 1.0, 0.05).unwrap();
        let c = constant_state(&p);
        assert_relative_eq!(c.u_star, 0.5, epsilon = 1e-15);
        assert_relative_eq!(c.v_star, 0.5, epsilon = 1e-15);
        assert_relative_eq!(c.tau_star, 1.0, epsilon = 1e-15);
        assert_relative_eq!(c.a_ratio, 1.0);
        assert_relative_eq!(c.gamma_threshold, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn reaction_values() {
        let p = ModelParams::reference(2.0, 1.0, 0.05).unwrap();
        let c = constant_state(&p);
        assert_eq!(reaction(c.u_star, c.v_star, &p), (0.0, 0.0));
        assert_eq!(reaction(0.0, 1.0, &p), (0.0, -4.0));
        assert_eq!(reaction(1.0, 0.0, &p), (-3.0, 0.0));
    }

    #[test]
    fn potentials_vanish_at_equilibrium_and_decouple_without_flux() {
        let p: ModelParams<f64> = ModelParams::reference(2.0, 1.0, 0.05).unwrap();
        let c = constant_state(&p);
        let pot = semilinear_potentials(c.u_star, c.v_star, 0.05, &p).unwrap();
        assert!(pot.v1.abs() < 1e-15 && pot.v2.abs() < 1e-15);

        let q = p.with_flux(0.0, 0.0).unwrap();
        let (u, v) = (0.3, 0.9);
        let pot = semilinear_potentials(u, v, 0.05, &q).unwrap();
        assert_relative_eq!(pot.v1, growth_u(u, v, &q) / q.d1, max_relative = 1e-14);
        assert_relative_eq!(pot.v2, growth_v(u, v, &q) / 0.05, max_relative = 1e-14);
    }

    #[test]
    fn potentials_reject_vanishing_denominator() {
        let p = ModelParams::reference(2.0, 1.0, 0.05).unwrap();
        // d1 d2 + d1 beta u = 0 at u = -d2/beta with v = 0
        let r = semilinear_potentials(-0.05, 0.0, 0.05, &p);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn l2_bounds_reference() {
        let p = ModelParams::reference(2.0, 1.0, 0.05).unwrap();
        let (bu, bv) = l2_bounds(&p);
        assert_relative_eq!(bu, 1.5, epsilon = 1e-15);
        assert_relative_eq!(bv, 2.5, epsilon = 1e-15);
        let mut q = p;
        q.length = 4.0;
        let (bu4, bv4) = l2_bounds(&q);
        assert_relative_eq!(bu4, 3.0, epsilon = 1e-14);
        assert_relative_eq!(bv4, 5.0, epsilon = 1e-14);
        let r = ModelParams::reference(50.0, 0.0, 3.0).unwrap();
        assert_eq!(l2_bounds(&r), (bu, bv));
    }

    #[test]
    fn nonexistence_examples() {
        let p = ModelParams::reference(2.0, 1.0, 0.02).unwrap();
        assert!(nonexistence_check(&p, 0.02, 1.0).unwrap());
        let (_, t2) = nonexistence_thresholds(&p, 1.0);
        let expected = 0.5 * (3.0 + 17.0 / std::f64::consts::PI.powi(2));
        assert_relative_eq!(t2, expected, max_relative = 1e-14);
        assert_relative_eq!(t2, 2.3612, epsilon = 1e-4);

        let mut big = p;
        big.d1 = 1e6;
        assert!(!nonexistence_check(&big, 1e6, 1.0).unwrap());
        assert!(nonexistence_check(&p, 0.02, 0.0).is_err());
    }

    #[test]
    fn harnack_ratios_of_constant_and_invalid_states() {
        let s = StateVector { u: vec![0.5; 5], v: vec![0.5; 5] };
        assert_eq!(harnack_ratios(&s).unwrap(), (1.0, 1.0));
        let bad = StateVector { u: vec![0.5, 0.0], v: vec![0.5, 0.5] };
        assert!(harnack_ratios(&bad).is_err());
    }

    #[test]
    fn single_precision_constant_state() {
        let p = ModelParams::<f32>::reference(2.0, 1.0, 0.05).unwrap();
        let c = constant_state(&p);
        assert!((c.u_star - 0.5).abs() < 1e-6);
        let (f, g) = reaction(c.u_star, c.v_star, &p);
        assert!(f.abs() < 1e-6 && g.abs() < 1e-6);
    }
}
