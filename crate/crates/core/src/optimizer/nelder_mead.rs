//! Derivative-free simplex search.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Maximum number of objective evaluations.
    pub budget: usize,
    pub initial_step: f64,
    /// Converged when the simplex values spread by less than `ftol * (1 + |f_best|)` ...
    pub ftol: f64,
    /// ... and every vertex is within `xtol * (1 + |x_best|)` of the best one.
    pub xtol: f64,
    /// Fresh simplices built around the best point after convergence.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            budget: 400,
            initial_step: 0.5,
            ftol: 1e-12,
            xtol: 1e-8,
            restarts: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

pub fn nelder_mead<F>(mut f: F, x0: &[f64], options: &NelderMeadOptions) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    if n == 0 {
        let fx = eval(x0, &mut evals);
        return NelderMeadResult {
            x: Vec::new(),
            f: fx,
            evaluations: evals,
            converged: true,
        };
    }

    let build = |center: &[f64], evals: &mut usize, eval: &mut dyn FnMut(&[f64], &mut usize) -> f64| {
        let mut simplex = vec![center.to_vec()];
        for i in 0..n {
            let mut v = center.to_vec();
            v[i] += options.initial_step;
            simplex.push(v);
        }
        let values: Vec<f64> = simplex.iter().map(|v| eval(v, evals)).collect();
        (simplex, values)
    };
    let (mut simplex, mut values) = build(x0, &mut evals, &mut eval);
    let mut restarts_left = options.restarts;

    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let best = values[0];
        let spread = values[n] - best;
        let x_scale = 1.0 + simplex[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let diameter = simplex[1..]
            .iter()
            .map(|v| v.iter().zip(&simplex[0]).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
            .fold(0.0f64, f64::max);
        if spread <= options.ftol * (1.0 + best.abs()) && diameter <= options.xtol * x_scale {
            if restarts_left == 0 {
                return NelderMeadResult {
                    x: simplex.swap_remove(0),
                    f: best,
                    evaluations: evals,
                    converged: true,
                };
            }
            restarts_left -= 1;
            let center = simplex[0].clone();
            let (s, v) = build(&center, &mut evals, &mut eval);
            simplex = s;
            values = v;
            continue;
        }
        if evals >= options.budget {
            return NelderMeadResult {
                x: simplex.swap_remove(0),
                f: best,
                evaluations: evals,
                converged: false,
            };
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(REFLECT);
        let fr = eval(&xr, &mut evals);
        if fr < values[0] {
            let xe = along(REFLECT * EXPAND);
            let fe = eval(&xe, &mut evals);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc, accept) = if fr < values[n] {
            let xc = along(REFLECT * CONTRACT);
            let fc = eval(&xc, &mut evals);
            (xc, fc, fc <= fr)
        } else {
            let xc = along(-CONTRACT);
            let fc = eval(&xc, &mut evals);
            (xc, fc, fc < values[n])
        };
        if accept {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        let best_x = simplex[0].clone();
        for i in 1..=n {
            for j in 0..n {
                simplex[i][j] = best_x[j] + SHRINK * (simplex[i][j] - best_x[j]);
            }
            values[i] = eval(&simplex[i], &mut evals);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimises_rosenbrock() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = NelderMeadOptions {
            budget: 5000,
            ..Default::default()
        };
        let r = nelder_mead(rosen, &[-1.2, 1.0], &opts);
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{r:?}");
    }

    #[test]
    fn one_dimensional_quadratic() {
        let r = nelder_mead(|x| (x[0] - 3.0).powi(2), &[0.0], &NelderMeadOptions::default());
        assert!(r.converged);
        assert!((r.x[0] - 3.0).abs() < 1e-7);
    }

    #[test]
    fn budget_exhaustion_is_flagged() {
        let opts = NelderMeadOptions {
            budget: 10,
            ..Default::default()
        };
        let r = nelder_mead(|x| (x[0] - 3.0).powi(2) + x[1] * x[1], &[0.0, 5.0], &opts);
        assert!(!r.converged);
        assert!(r.evaluations >= 10);
    }

    #[test]
    fn empty_parameter_vector() {
        let r = nelder_mead(|_| 7.0, &[], &NelderMeadOptions::default());
        assert!(r.x.is_empty());
        assert_eq!(r.f, 7.0);
        assert!(r.converged);
    }
}
