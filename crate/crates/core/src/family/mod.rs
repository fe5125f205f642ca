//! Martingale families `{M(x)}` and their representation integrands.
//!
//! A family is evaluated along a path prefix: `M(t, x)` uses whatever the
//! prefix reveals up to its current node. When a family knows its
//! representation `M(t, x) = ∫_0^t μ(s, x) dW_s` it exposes `μ` and `∂ₓμ`,
//! which is what the pointwise optimizer and the regularity checks need.

mod checks;

pub use checks::{
    derivative_check, holder_estimate, martingale_mean, representation_check, DerivativeReport,
    FiniteDifference, HolderReport, LadderRung, RepresentationReport,
};

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::math::{exp, expm1, sqrt};
use crate::path::PathPrefix;
use crate::{Error, Result};

/// Largest exponent the exponential families will evaluate.
pub const MAX_EXPONENT: f64 = 700.0;

pub trait MartingaleFamily: Send + Sync {
    fn name(&self) -> &'static str;

    /// `M(t, x)` at the prefix's current node.
    fn eval(&self, at: &PathPrefix<'_>, x: f64) -> Result<f64>;

    /// `M(t_to, x) - M(t_from, x)` for the same path.
    fn increment(&self, from: &PathPrefix<'_>, to: &PathPrefix<'_>, x: f64) -> Result<f64> {
        Ok(self.eval(to, x)? - self.eval(from, x)?)
    }

    /// Representation integrand `μ(t, x)`.
    fn integrand(&self, _at: &PathPrefix<'_>, _x: f64) -> Result<f64> {
        Err(Error::Capability {
            family: self.name(),
            what: "an analytic integrand",
        })
    }

    /// `∂ₓμ(t, x)`.
    fn d_integrand(&self, _at: &PathPrefix<'_>, _x: f64) -> Result<f64> {
        Err(Error::Capability {
            family: self.name(),
            what: "an analytic integrand derivative",
        })
    }

    /// `∂ₓM(t, x)`.
    fn d_eval(&self, _at: &PathPrefix<'_>, _x: f64) -> Result<f64> {
        Err(Error::Capability {
            family: self.name(),
            what: "an analytic spatial derivative",
        })
    }

    /// Every `x` where `∂ₓμ(t, x) = 0`, when known in closed form.
    ///
    /// `Some(vec![])` means `μ(t, ·)` is known to be monotone; `None` means
    /// the zero set is unknown and must be searched for.
    fn integrand_critical_points(&self, _at: &PathPrefix<'_>) -> Option<Vec<f64>> {
        None
    }
}

impl<F: MartingaleFamily + ?Sized> MartingaleFamily for &F {
    fn name(&self) -> &'static str {
        (**self).name()
    }
    fn eval(&self, at: &PathPrefix<'_>, x: f64) -> Result<f64> {
        (**self).eval(at, x)
    }
    fn increment(&self, from: &PathPrefix<'_>, to: &PathPrefix<'_>, x: f64) -> Result<f64> {
        (**self).increment(from, to, x)
    }
    fn integrand(&self, at: &PathPrefix<'_>, x: f64) -> Result<f64> {
        (**self).integrand(at, x)
    }
    fn d_integrand(&self, at: &PathPrefix<'_>, x: f64) -> Result<f64> {
        (**self).d_integrand(at, x)
    }
    fn d_eval(&self, at: &PathPrefix<'_>, x: f64) -> Result<f64> {
        (**self).d_eval(at, x)
    }
    fn integrand_critical_points(&self, at: &PathPrefix<'_>) -> Option<Vec<f64>> {
        (**self).integrand_critical_points(at)
    }
}

/// `M(t, x) = x W_t`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LinearFamily;

impl MartingaleFamily for LinearFamily {
    fn name(&self) -> &'static str {
        "linear"
    }

    fn eval(&self, at: &PathPrefix<'_>, x: f64) -> Result<f64> {
        Ok(x * at.w())
    }

    // x ΔW, so the nonlinear sum reproduces the Itô sum term by term.
    fn increment(&self, from: &PathPrefix<'_>, to: &PathPrefix<'_>, x: f64) -> Result<f64> {
        Ok(x * (to.w() - from.w()))
    }

    fn integrand(&self, _at: &PathPrefix<'_>, x: f64) -> Result<f64> {
        Ok(x)
    }

    fn d_integrand(&self, _at: &PathPrefix<'_>, _x: f64) -> Result<f64> {
        Ok(1.0)
    }

    fn d_eval(&self, at: &PathPrefix<'_>, _x: f64) -> Result<f64> {
        Ok(at.w())
    }

    fn integrand_critical_points(&self, _at: &PathPrefix<'_>) -> Option<Vec<f64>> {
        Some(Vec::new())
    }
}

/// Exponent `x W_t - t x²/2`, rejected above [`MAX_EXPONENT`].
fn exponent(at: &PathPrefix<'_>, x: f64) -> Result<f64> {
    let t = at.t();
    let e = x * at.w() - 0.5 * t * x * x;
    if e > MAX_EXPONENT || e.is_nan() {
        return Err(Error::Overflow { t, x, exponent: e });
    }
    Ok(e)
}

/// `M(t, x) = exp(x W_t - t x²/2) - 1`, with the Itô-consistent integrand
/// `μ(t, x) = x exp(x W_t - t x²/2)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExponentialFamily;

impl MartingaleFamily for ExponentialFamily {
    fn name(&self) -> &'static str {
        "exp"
    }

    fn eval(&self, at: &PathPrefix<'_>, x: f64) -> Result<f64> {
        Ok(expm1(exponent(at, x)?))
    }

    fn integrand(&self, at: &PathPrefix<'_>, x: f64) -> Result<f64> {
        Ok(x * exp(exponent(at, x)?))
    }

    fn d_integrand(&self, at: &PathPrefix<'_>, x: f64) -> Result<f64> {
        let poly = 1.0 + x * at.w() - x * x * at.t();
        Ok(poly * exp(exponent(at, x)?))
    }

    fn d_eval(&self, at: &PathPrefix<'_>, x: f64) -> Result<f64> {
        Ok((at.w() - x * at.t()) * exp(exponent(at, x)?))
    }

    fn integrand_critical_points(&self, at: &PathPrefix<'_>) -> Option<Vec<f64>> {
        Some(quadratic_zero_set(at.t(), at.w()))
    }
}

/// Real roots of `t x² - W x - 1 = 0`, ascending.
fn quadratic_zero_set(t: f64, w: f64) -> Vec<f64> {
    if t == 0.0 {
        return if w == 0.0 { Vec::new() } else { vec![-1.0 / w] };
    }
    // discriminant w² + 4t > 0 for t > 0
    let root = sqrt(w * w + 4.0 * t);
    let q = if w >= 0.0 { 0.5 * (w + root) } else { 0.5 * (w - root) };
    let a = q / t;
    let b = -1.0 / q;
    if a < b {
        vec![a, b]
    } else {
        vec![b, a]
    }
}

/// Same `M` as [`ExponentialFamily`] but with the integrand `x M(t, x)` and
/// derivative `M(t, x)(1 + x W_t - x² t)` taken literally from the
/// original write-up of the example. These do not represent `M`; the
/// family exists so the representation check can show that.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExponentialAsPrintedFamily;

impl MartingaleFamily for ExponentialAsPrintedFamily {
    fn name(&self) -> &'static str {
        "exp-as-printed"
    }

    fn eval(&self, at: &PathPrefix<'_>, x: f64) -> Result<f64> {
        ExponentialFamily.eval(at, x)
    }

    fn integrand(&self, at: &PathPrefix<'_>, x: f64) -> Result<f64> {
        Ok(x * self.eval(at, x)?)
    }

    fn d_integrand(&self, at: &PathPrefix<'_>, x: f64) -> Result<f64> {
        let poly = 1.0 + x * at.w() - x * x * at.t();
        Ok(poly * self.eval(at, x)?)
    }

    fn d_eval(&self, at: &PathPrefix<'_>, x: f64) -> Result<f64> {
        ExponentialFamily.d_eval(at, x)
    }
}

/// The family `{∂ₓM(x)}` viewed as a martingale family in its own right.
#[derive(Debug, Clone, Copy)]
pub struct DerivativeOf<F>(pub F);

impl<F: MartingaleFamily> MartingaleFamily for DerivativeOf<F> {
    fn name(&self) -> &'static str {
        self.0.name()
    }

    fn eval(&self, at: &PathPrefix<'_>, x: f64) -> Result<f64> {
        self.0.d_eval(at, x)
    }

    fn integrand(&self, at: &PathPrefix<'_>, x: f64) -> Result<f64> {
        self.0.d_integrand(at, x)
    }
}

/// Built-in families selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FamilyKind {
    #[cfg_attr(feature = "serde", serde(rename = "linear"))]
    Linear,
    #[cfg_attr(feature = "serde", serde(rename = "exp"))]
    Exponential,
    #[cfg_attr(feature = "serde", serde(rename = "exp-as-printed"))]
    ExponentialAsPrinted,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 3] = [
        FamilyKind::Linear,
        FamilyKind::Exponential,
        FamilyKind::ExponentialAsPrinted,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FamilyKind::Linear => "linear",
            FamilyKind::Exponential => "exp",
            FamilyKind::ExponentialAsPrinted => "exp-as-printed",
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FamilyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::parameter("family", "expected linear | exp | exp-as-printed"))
    }
}

macro_rules! dispatch {
    ($self:ident, $f:ident => $body:expr) => {
        match $self {
            FamilyKind::Linear => {
                let $f = LinearFamily;
                $body
            }
            FamilyKind::Exponential => {
                let $f = ExponentialFamily;
                $body
            }
            FamilyKind::ExponentialAsPrinted => {
                let $f = ExponentialAsPrintedFamily;
                $body
            }
        }
    };
}

impl MartingaleFamily for FamilyKind {
    fn name(&self) -> &'static str {
        self.as_str()
    }
    fn eval(&self, at: &PathPrefix<'_>, x: f64) -> Result<f64> {
        dispatch!(self, f => f.eval(at, x))
    }
    fn increment(&self, from: &PathPrefix<'_>, to: &PathPrefix<'_>, x: f64) -> Result<f64> {
        dispatch!(self, f => f.increment(from, to, x))
    }
    fn integrand(&self, at: &PathPrefix<'_>, x: f64) -> Result<f64> {
        dispatch!(self, f => f.integrand(at, x))
    }
    fn d_integrand(&self, at: &PathPrefix<'_>, x: f64) -> Result<f64> {
        dispatch!(self, f => f.d_integrand(at, x))
    }
    fn d_eval(&self, at: &PathPrefix<'_>, x: f64) -> Result<f64> {
        dispatch!(self, f => f.d_eval(at, x))
    }
    fn integrand_critical_points(&self, at: &PathPrefix<'_>) -> Option<Vec<f64>> {
        dispatch!(self, f => f.integrand_critical_points(at))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::{PathBundle, TimeGrid};
    use alloc::sync::Arc;

    /// Two-node path with `W_1 = w` (rho = 1 so W = W1).
    fn unit_path(w: f64) -> PathBundle {
        let grid = Arc::new(TimeGrid::uniform(1.0, 1).unwrap());
        PathBundle::from_components(grid, 1.0, 0, vec![0.0, w], vec![0.0, 0.0]).unwrap()
    }

    #[test]
    fn exponential_vanishes_at_zero_strategy_and_time_zero() {
        let p = unit_path(0.8);
        for x in [-3.0, -0.2, 0.0, 1.5] {
            assert_eq!(ExponentialFamily.eval(&p.prefix(0), x).unwrap(), 0.0);
        }
        assert_eq!(ExponentialFamily.eval(&p.terminal(), 0.0).unwrap(), 0.0);
        assert_eq!(LinearFamily.eval(&p.terminal(), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn exponential_closed_form_value() {
        let p = unit_path(1.0);
        let v = ExponentialFamily.eval(&p.terminal(), 1.0).unwrap();
        assert!((v - 0.6487212707001282).abs() < 1e-15);
    }

    #[test]
    fn derivatives_at_zero_strategy() {
        let p = unit_path(-0.37);
        let at = p.terminal();
        assert_eq!(ExponentialFamily.d_integrand(&at, 0.0).unwrap(), 1.0);
        assert_eq!(ExponentialFamily.d_eval(&at, 0.0).unwrap(), -0.37);
    }

    #[test]
    fn overflow_is_reported_with_context() {
        let p = unit_path(100.0);
        match ExponentialFamily.eval(&p.terminal(), 50.0) {
            Err(Error::Overflow { t, x, .. }) => assert_eq!((t, x), (1.0, 50.0)),
            other => panic!("expected overflow, got {other:?}"),
        }
        // deep negative exponents just underflow towards -1
        let v = ExponentialFamily.eval(&unit_path(0.0).terminal(), 60.0).unwrap();
        assert_eq!(v, -1.0);
    }

    #[test]
    fn critical_points_of_exponential_integrand() {
        // W = 0, t = 1: 1 - x² = 0
        let p = unit_path(0.0);
        assert_eq!(ExponentialFamily.integrand_critical_points(&p.terminal()).unwrap(), vec![-1.0, 1.0]);
        let p = unit_path(0.6);
        for x in ExponentialFamily.integrand_critical_points(&p.terminal()).unwrap() {
            let d = ExponentialFamily.d_integrand(&p.terminal(), x).unwrap();
            assert!(d.abs() < 1e-14, "∂ₓμ({x}) = {d}");
        }
        // t = 0: 1 + x W = 0
        assert_eq!(quadratic_zero_set(0.0, 2.0), vec![-0.5]);
        assert!(quadratic_zero_set(0.0, 0.0).is_empty());
    }

    #[test]
    fn linear_increment_is_strategy_times_increment() {
        let p = unit_path(0.3);
        let inc = LinearFamily.increment(&p.prefix(0), &p.prefix(1), 2.0).unwrap();
        assert_eq!(inc, 2.0 * 0.3);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in FamilyKind::ALL {
            assert_eq!(k.as_str().parse::<FamilyKind>().unwrap(), k);
            assert_eq!(k.name(), k.as_str());
        }
        assert!("cubic".parse::<FamilyKind>().is_err());
    }

    #[test]
    fn derivative_family_requires_analytic_forms() {
        struct Opaque;
        impl MartingaleFamily for Opaque {
            fn name(&self) -> &'static str {
                "opaque"
            }
            fn eval(&self, at: &PathPrefix<'_>, x: f64) -> Result<f64> {
                Ok(x * at.w())
            }
        }
        let p = unit_path(0.1);
        assert!(matches!(
            DerivativeOf(Opaque).eval(&p.terminal(), 1.0),
            Err(Error::Capability { family: "opaque", .. })
        ));
    }
}
