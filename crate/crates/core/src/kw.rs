//! Classical Kunita-Watanabe projection of a payoff onto `{∫ θ dW}`.
//!
//! `H = ∫ h_s dW_s + λ^H` with `λ^H` strongly orthogonal to every
//! `W`-integral. The integrand `h` is either known in closed form for a
//! built-in payoff or fitted by least squares over path-integral features
//! `∫ φ_i dW`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::integrate::{ito_integral, StrategyPath};
use crate::linalg::SquareMatrix;
use crate::math::{sqrt, NeumaierSum};
use crate::par::try_map_paths;
use crate::path::{PathBundle, PathPrefix, PathSource};
use crate::stats::MCEstimate;
use crate::{Error, Result};

/// A square-integrable, mean-zero terminal payoff.
pub trait Payoff: Sync {
    fn name(&self) -> &'static str;

    fn evaluate(&self, path: &PathBundle) -> f64;

    /// Closed-form KW integrand `h_k` given the prefix up to `t_{k-1}`, if known.
    fn integrand(&self, _k: usize, _at: &PathPrefix<'_>) -> Option<f64> {
        None
    }
}

/// `H = (W1_T)² - T`, with `h_s = 2ρ W1_s` against `W`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExamplePayoff;

impl Payoff for ExamplePayoff {
    fn name(&self) -> &'static str {
        "example"
    }

    fn evaluate(&self, path: &PathBundle) -> f64 {
        let w1 = path.terminal().w1();
        w1 * w1 - path.grid().horizon()
    }

    fn integrand(&self, _k: usize, at: &PathPrefix<'_>) -> Option<f64> {
        Some(2.0 * at.rho() * at.w1())
    }
}

/// `H = W_T`, already a `W`-integral with `h ≡ 1`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TerminalPayoff;

impl Payoff for TerminalPayoff {
    fn name(&self) -> &'static str {
        "w-terminal"
    }

    fn evaluate(&self, path: &PathBundle) -> f64 {
        path.terminal().w()
    }

    fn integrand(&self, _k: usize, _at: &PathPrefix<'_>) -> Option<f64> {
        Some(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PayoffKind {
    #[cfg_attr(feature = "serde", serde(rename = "example"))]
    Example,
    #[cfg_attr(feature = "serde", serde(rename = "w-terminal"))]
    TerminalW,
}

impl PayoffKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PayoffKind::Example => "example",
            PayoffKind::TerminalW => "w-terminal",
        }
    }
}

impl fmt::Display for PayoffKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PayoffKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "example" => Ok(PayoffKind::Example),
            "w-terminal" => Ok(PayoffKind::TerminalW),
            _ => Err(Error::parameter("payoff", "expected example | w-terminal")),
        }
    }
}

impl Payoff for PayoffKind {
    fn name(&self) -> &'static str {
        self.as_str()
    }

    fn evaluate(&self, path: &PathBundle) -> f64 {
        match self {
            PayoffKind::Example => ExamplePayoff.evaluate(path),
            PayoffKind::TerminalW => TerminalPayoff.evaluate(path),
        }
    }

    fn integrand(&self, k: usize, at: &PathPrefix<'_>) -> Option<f64> {
        match self {
            PayoffKind::Example => ExamplePayoff.integrand(k, at),
            PayoffKind::TerminalW => TerminalPayoff.integrand(k, at),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Atom {
    Const,
    W1,
    W,
    W1Sq,
    T,
}

impl Atom {
    fn name(self) -> &'static str {
        match self {
            Atom::Const => "const",
            Atom::W1 => "w1",
            Atom::W => "w",
            Atom::W1Sq => "w1_sq",
            Atom::T => "t",
        }
    }

    fn eval(self, at: &PathPrefix<'_>) -> f64 {
        match self {
            Atom::Const => 1.0,
            Atom::W1 => at.w1(),
            Atom::W => at.w(),
            Atom::W1Sq => at.w1() * at.w1(),
            Atom::T => at.t(),
        }
    }
}

/// Predictable feature map: a product of named atoms such as `"w1*t"`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "String", into = "String"))]
pub struct Feature {
    factors: Vec<Atom>,
}

impl Feature {
    /// Value at the prefix's current node.
    pub fn eval(&self, at: &PathPrefix<'_>) -> f64 {
        self.factors.iter().map(|a| a.eval(at)).product()
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let factors = s
            .split('*')
            .map(|part| match part.trim() {
                "const" => Ok(Atom::Const),
                "w1" => Ok(Atom::W1),
                "w" => Ok(Atom::W),
                "w1_sq" => Ok(Atom::W1Sq),
                "t" => Ok(Atom::T),
                other => Err(Error::parameter(
                    "basis",
                    format!("unknown feature `{other}` (const | w1 | w | w1_sq | t, joined by *)"),
                )),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { factors })
    }
}

impl TryFrom<String> for Feature {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Feature> for String {
    fn from(f: Feature) -> String {
        f.to_string()
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.factors.iter().enumerate() {
            if i > 0 {
                f.write_str("*")?;
            }
            f.write_str(a.name())?;
        }
        Ok(())
    }
}

/// Where the KW integrand `h` comes from.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum KwIntegrand {
    Analytic { payoff: PayoffKind },
    Regression { basis: Vec<Feature>, coefficients: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KWDecomposition {
    pub integrand: KwIntegrand,
    /// `E[(λ^H_T)²]`; out of sample for regression fits with a hold-out.
    pub lambda_sq: MCEstimate,
    /// Standard errors of the regression coefficients (empty when analytic).
    pub coefficient_se: Vec<f64>,
    /// Mean squared residual on the fitting paths (regression only).
    pub in_sample_residual: Option<f64>,
}

impl KWDecomposition {
    /// `h_k` evaluated on the prefix ending at `t_{k-1}`.
    pub fn target(&self, k: usize, at: &PathPrefix<'_>) -> f64 {
        match &self.integrand {
            KwIntegrand::Analytic { payoff } => payoff
                .integrand(k, at)
                .expect("built-in payoffs carry an analytic integrand"),
            KwIntegrand::Regression {
                basis,
                coefficients,
            } => basis
                .iter()
                .zip(coefficients)
                .map(|(f, b)| b * f.eval(at))
                .sum(),
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        match &self.integrand {
            KwIntegrand::Analytic { .. } => &[],
            KwIntegrand::Regression { coefficients, .. } => coefficients,
        }
    }

    pub fn strategy(&self, path: &PathBundle) -> StrategyPath {
        StrategyPath::from_fn(path, |k, at| self.target(k, at))
    }

    /// `λ^H_T = H - ∫ h dW` on one path.
    pub fn residual<P: Payoff + ?Sized>(&self, payoff: &P, path: &PathBundle) -> Result<f64> {
        let h = self.strategy(path);
        Ok(payoff.evaluate(path) - ito_integral(&h, path.w(), path.grid())?.terminal())
    }
}

/// Decomposition with the payoff's closed-form integrand.
pub fn analytic_kw<S: PathSource + ?Sized>(payoff: PayoffKind, source: &S) -> Result<KWDecomposition> {
    let mut kw = KWDecomposition {
        integrand: KwIntegrand::Analytic { payoff },
        lambda_sq: MCEstimate::from_samples(&[]),
        coefficient_se: Vec::new(),
        in_sample_residual: None,
    };
    let sq = try_map_paths(source.n_paths(), |id| {
        let l = kw.residual(&payoff, &source.path(id))?;
        Ok(l * l)
    })?;
    kw.lambda_sq = MCEstimate::from_samples(&sq);
    Ok(kw)
}

/// Decomposition of `(W1_T)² - T` with `h_s = 2ρ W1_s`; `rho` must match the source.
pub fn analytic_kw_example<S: PathSource + ?Sized>(rho: f64, source: &S) -> Result<KWDecomposition> {
    if rho != source.rho() {
        return Err(Error::parameter(
            "rho",
            format!("requested {rho}, batch simulated with {}", source.rho()),
        ));
    }
    analytic_kw(PayoffKind::Example, source)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionOptions {
    /// Ridge `ε` as a multiple of `trace(G) / p`.
    pub ridge_scale: f64,
    /// Share of paths (the highest ids) held out for the residual estimate.
    pub holdout_fraction: f64,
}

impl Default for RegressionOptions {
    fn default() -> Self {
        Self {
            ridge_scale: 1e-10,
            holdout_fraction: 0.5,
        }
    }
}

/// `∫ φ_i dW` for every basis feature on one path.
pub fn feature_integrals(basis: &[Feature], path: &PathBundle) -> Result<Vec<f64>> {
    basis
        .iter()
        .map(|f| {
            let phi = StrategyPath::from_fn(path, |_, at| f.eval(at));
            Ok(ito_integral(&phi, path.w(), path.grid())?.terminal())
        })
        .collect()
}

/// Least-squares projection of `H` onto `span{∫ φ_i dW}`.
pub fn regression_kw<P, S>(
    payoff: &P,
    basis: &[Feature],
    source: &S,
    options: RegressionOptions,
) -> Result<KWDecomposition>
where
    P: Payoff + ?Sized,
    S: PathSource + ?Sized,
{
    let p = basis.len();
    if p == 0 {
        return Err(Error::parameter("basis", "need at least one feature"));
    }
    if !(0.0..1.0).contains(&options.holdout_fraction) {
        return Err(Error::parameter("holdout_fraction", "must lie in [0, 1)"));
    }
    let n = source.n_paths();
    let n_holdout = (n as f64 * options.holdout_fraction) as usize;
    let n_train = n - n_holdout;
    if n_train < 10 * p {
        return Err(Error::parameter(
            "n_paths",
            format!("{n_train} fitting paths for {p} features; need at least {}", 10 * p),
        ));
    }

    let rows = try_map_paths(n, |id| {
        let path = source.path(id);
        Ok((feature_integrals(basis, &path)?, payoff.evaluate(&path)))
    })?;
    let (train, holdout) = rows.split_at(n_train);

    let nt = n_train as f64;
    let mut gram = SquareMatrix::zeros(p);
    let mut rhs = vec![0.0; p];
    for i in 0..p {
        for j in 0..=i {
            let g = train.iter().map(|(x, _)| x[i] * x[j]).collect::<NeumaierSum>().value() / nt;
            gram.set(i, j, g);
            gram.set(j, i, g);
        }
        rhs[i] = train.iter().map(|(x, y)| x[i] * y).collect::<NeumaierSum>().value() / nt;
    }
    let trace = gram.trace();
    if !(trace > 0.0) || !trace.is_finite() {
        return Err(Error::Numeric("rank-deficient design: every feature integral vanishes".into()));
    }
    let ridge = options.ridge_scale * trace / p as f64;
    let mut regularized = gram.clone();
    for i in 0..p {
        regularized.set(i, i, gram.get(i, i) + ridge);
    }
    let chol = regularized
        .cholesky()
        .ok_or_else(|| Error::Numeric("rank-deficient design beyond ridge rescue".into()))?;
    let beta = chol.solve(&rhs);

    let resid = |x: &[f64], y: f64| y - x.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>();

    // sandwich covariance A S A / n with A = (G + εI)^{-1}
    let mut meat = SquareMatrix::zeros(p);
    for (x, y) in train {
        let e = resid(x, *y);
        for i in 0..p {
            for j in 0..p {
                meat.set(i, j, meat.get(i, j) + e * e * x[i] * x[j] / nt);
            }
        }
    }
    let bread = chol.inverse();
    let coefficient_se = (0..p)
        .map(|i| {
            let mut v = 0.0;
            for a in 0..p {
                for b in 0..p {
                    v += bread.get(i, a) * meat.get(a, b) * bread.get(b, i);
                }
            }
            sqrt(v / nt)
        })
        .collect();

    let train_sq: Vec<f64> = train.iter().map(|(x, y)| { let e = resid(x, *y); e * e }).collect();
    let in_sample = train_sq.iter().copied().collect::<NeumaierSum>().value() / nt;
    let lambda_sq = if holdout.is_empty() {
        MCEstimate::from_samples(&train_sq)
    } else {
        let sq: Vec<f64> = holdout.iter().map(|(x, y)| { let e = resid(x, *y); e * e }).collect();
        MCEstimate::from_samples(&sq)
    };

    Ok(KWDecomposition {
        integrand: KwIntegrand::Regression {
            basis: basis.to_vec(),
            coefficients: beta,
        },
        lambda_sq,
        coefficient_se,
        in_sample_residual: Some(in_sample),
    })
}

/// `E[λ^H_T · ∫ α dW]` for a predictable test integrand `α`.
pub fn strong_orthogonality<P, S, A>(
    kw: &KWDecomposition,
    payoff: &P,
    source: &S,
    alpha: A,
) -> Result<MCEstimate>
where
    P: Payoff + ?Sized,
    S: PathSource + ?Sized,
    A: Fn(usize, &PathPrefix<'_>) -> f64 + Sync + Send,
{
    let samples = try_map_paths(source.n_paths(), |id| {
        let path = source.path(id);
        let a = StrategyPath::from_fn(&path, &alpha);
        let test = ito_integral(&a, path.w(), path.grid())?.terminal();
        Ok(kw.residual(payoff, &path)? * test)
    })?;
    Ok(MCEstimate::from_samples(&samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::{build_grid, PathGenerator};

    #[test]
    fn feature_names_round_trip() {
        for s in ["const", "w1", "w", "w1_sq", "t", "w1*t", "w*w1_sq*const"] {
            assert_eq!(s.parse::<Feature>().unwrap().to_string(), s);
        }
        assert!("w3".parse::<Feature>().is_err());
        assert!("".parse::<Feature>().is_err());
    }

    #[test]
    fn rho_mismatch_is_rejected() {
        let gen = PathGenerator::new(build_grid(1.0, 4).unwrap(), 10, 0.5, 0).unwrap();
        assert!(matches!(analytic_kw_example(0.4, &gen), Err(Error::Parameter { name: "rho", .. })));
    }

    #[test]
    fn zero_feature_is_rank_deficient() {
        let gen = PathGenerator::new(build_grid(1.0, 8).unwrap(), 200, 0.5, 0).unwrap();
        // on a one-step grid w1 is only ever read at t_0, where it is 0
        let one_step = PathGenerator::new(build_grid(1.0, 1).unwrap(), 200, 0.5, 0).unwrap();
        let basis = ["w1".parse().unwrap()];
        let err = regression_kw(&ExamplePayoff, &basis, &one_step, RegressionOptions::default());
        assert!(matches!(err, Err(Error::Numeric(_))), "{err:?}");
        let ok = regression_kw(&ExamplePayoff, &basis, &gen, RegressionOptions::default());
        assert!(ok.is_ok());
    }

    #[test]
    fn too_few_paths_for_basis() {
        let gen = PathGenerator::new(build_grid(1.0, 8).unwrap(), 30, 0.5, 0).unwrap();
        let basis = ["w1".parse().unwrap(), "const".parse().unwrap()];
        assert!(regression_kw(&ExamplePayoff, &basis, &gen, RegressionOptions::default()).is_err());
    }
}
