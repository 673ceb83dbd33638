//! Scaled conjugate gradient (Møller) for [`MlpModel`].
//!
//! Full batch. Curvature along the search direction comes from a finite
//! difference of gradients at step `sigma0 / |p|`; a Levenberg–Marquardt
//! term `lambda` keeps the local quadratic model positive definite and is
//! adapted from the comparison ratio `Delta` between predicted and actual
//! reduction. Steps with `Delta < 0` are rejected.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mlp::{objective_at, objective_grad_at, Batch, MlpError, MlpModel, PreparedBatch};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] MlpError),
    #[error("objective became non-finite at epoch {epoch}")]
    NonFiniteObjective { epoch: usize },
    #[error("invalid training options: {0}")]
    InvalidOptions(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub max_epochs: usize,
    pub gradient_tolerance: f64,
    pub performance_goal: f64,
    pub reg_ratio: f64,
    pub seed: u64,
    pub sigma0: f64,
    pub lambda_init: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            max_epochs: 1000,
            gradient_tolerance: 1e-6,
            performance_goal: 1e-12,
            reg_ratio: 0.5,
            seed: 0,
            sigma0: 5e-5,
            lambda_init: 5e-7,
        }
    }
}

impl TrainOptions {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(0.0..=1.0).contains(&self.reg_ratio) {
            return Err(TrainError::InvalidOptions(format!(
                "reg_ratio {} outside [0, 1]",
                self.reg_ratio
            )));
        }
        if self.max_epochs < 1 {
            return Err(TrainError::InvalidOptions("max_epochs must be >= 1".into()));
        }
        for (name, v) in [
            ("gradient_tolerance", self.gradient_tolerance),
            ("performance_goal", self.performance_goal),
            ("sigma0", self.sigma0),
            ("lambda_init", self.lambda_init),
        ] {
            if v.is_nan() || v <= 0.0 {
                return Err(TrainError::InvalidOptions(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    MaxEpochs,
    GradientTolerance,
    PerformanceGoal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Objective before training followed by the value after each epoch.
    pub performance: Vec<f64>,
    pub stop_reason: StopReason,
    pub final_performance: f64,
    pub epochs: usize,
    pub accepted_steps: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(out: &mut [f64], base: &[f64], alpha: f64, dir: &[f64]) {
    for ((o, b), d) in out.iter_mut().zip(base).zip(dir) {
        *o = b + alpha * d;
    }
}

/// Fits z-score statistics on `data`, freezes them into the model, then runs SCG.
pub fn train_scg(model: &MlpModel, data: &Batch, opts: &TrainOptions) -> Result<(MlpModel, TrainReport), TrainError> {
    opts.validate()?;
    if data.is_empty() {
        return Err(MlpError::EmptyBatch.into());
    }
    let mut model = model.clone();
    model.fit_normalization(&data.inputs);
    model.config.reg_ratio = opts.reg_ratio;
    model.config.train = Some(opts.clone());
    let prepared = PreparedBatch::new(&model, data)?;
    let gamma = opts.reg_ratio;
    let n = model.n_params();

    let mut w = model.params().to_vec();
    let mut grad = vec![0.0; n];
    let mut perf = objective_grad_at(&model, &w, &prepared, gamma, &mut grad).perf;
    if !perf.is_finite() {
        return Err(TrainError::NonFiniteObjective { epoch: 0 });
    }

    let mut r: Vec<f64> = grad.iter().map(|g| -g).collect();
    let mut p = r.clone();
    let mut success = true;
    let mut lambda = opts.lambda_init;
    let mut lambda_bar = 0.0;
    let mut delta = 0.0;
    // directions since last restart
    let mut since_restart = 0usize;

    let mut probe = vec![0.0; n];
    let mut probe_grad = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial_grad = vec![0.0; n];

    let mut history = vec![perf];
    let mut accepted = 0;
    let mut stop = StopReason::MaxEpochs;

    for epoch in 1..=opts.max_epochs {
        if perf <= opts.performance_goal {
            stop = StopReason::PerformanceGoal;
            break;
        }
        if dot(&r, &r).sqrt() < opts.gradient_tolerance {
            stop = StopReason::GradientTolerance;
            break;
        }

        let p_sq = dot(&p, &p);
        if success {
            let sigma = opts.sigma0 / p_sq.sqrt();
            axpy(&mut probe, &w, sigma, &p);
            objective_grad_at(&model, &probe, &prepared, gamma, &mut probe_grad);
            // p . s with s = (E'(w + sigma p) - E'(w)) / sigma
            delta = probe_grad
                .iter()
                .zip(&grad)
                .zip(&p)
                .map(|((gs, g), pi)| pi * (gs - g))
                .sum::<f64>()
                / sigma;
        }

        delta += (lambda - lambda_bar) * p_sq;
        if delta <= 0.0 {
            lambda_bar = 2.0 * (lambda - delta / p_sq);
            delta = -delta + lambda * p_sq;
            lambda = lambda_bar;
        }

        let mu = dot(&p, &r);
        if mu.is_nan() || mu <= 0.0 {
            // not a descent direction any more: restart along steepest descent
            p.copy_from_slice(&r);
            since_restart = 0;
            success = true;
            history.push(perf);
            continue;
        }
        let alpha = mu / delta;
        axpy(&mut trial, &w, alpha, &p);
        let trial_perf = objective_grad_at(&model, &trial, &prepared, gamma, &mut trial_grad).perf;
        let comparison = if trial_perf.is_finite() {
            2.0 * delta * (perf - trial_perf) / (mu * mu)
        } else {
            f64::NEG_INFINITY
        };

        if comparison >= 0.0 {
            std::mem::swap(&mut w, &mut trial);
            std::mem::swap(&mut grad, &mut trial_grad);
            perf = trial_perf;
            accepted += 1;
            let r_new: Vec<f64> = grad.iter().map(|g| -g).collect();
            since_restart += 1;
            if since_restart >= n {
                p.copy_from_slice(&r_new);
                since_restart = 0;
            } else {
                let beta = (dot(&r_new, &r_new) - dot(&r_new, &r)) / mu;
                for (pi, ri) in p.iter_mut().zip(&r_new) {
                    *pi = ri + beta * *pi;
                }
            }
            r = r_new;
            lambda_bar = 0.0;
            success = true;
            if comparison >= 0.75 {
                lambda *= 0.5;
            }
        } else {
            lambda_bar = lambda;
            success = false;
        }
        if comparison < 0.25 {
            lambda *= 4.0;
        }
        if !lambda.is_finite() {
            return Err(TrainError::NonFiniteObjective { epoch });
        }
        history.push(perf);
    }

    model.set_params(&w);
    let final_performance = objective_at(&model, &w, &prepared, gamma).perf;
    let epochs = history.len() - 1;
    Ok((
        model,
        TrainReport {
            performance: history,
            stop_reason: stop,
            final_performance,
            epochs,
            accepted_steps: accepted,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::performance;

    fn xor() -> Batch {
        Batch {
            inputs: vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]],
            targets: vec![vec![0.0], vec![1.0], vec![1.0], vec![0.0]],
        }
    }

    #[test]
    fn monotone_and_deterministic() {
        let model = MlpModel::init(2, 4, 1, 3);
        let opts = TrainOptions {
            max_epochs: 200,
            reg_ratio: 0.0,
            ..Default::default()
        };
        let (a, report) = train_scg(&model, &xor(), &opts).unwrap();
        assert!(report.performance.windows(2).all(|w| w[1] <= w[0]));
        assert!(report.final_performance < report.performance[0]);
        let (b, _) = train_scg(&model, &xor(), &opts).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(performance(&a, &xor(), 0.0).unwrap(), report.final_performance);
    }

    #[test]
    fn stops_on_goal() {
        let model = MlpModel::init(2, 4, 1, 1);
        let opts = TrainOptions {
            performance_goal: 0.2,
            reg_ratio: 0.0,
            ..Default::default()
        };
        let (_, report) = train_scg(&model, &xor(), &opts).unwrap();
        assert_eq!(report.stop_reason, StopReason::PerformanceGoal);
        assert!(report.final_performance <= 0.2);
        assert!(report.epochs < 1000);
    }

    #[test]
    fn pure_weight_decay_converges_to_origin() {
        let model = MlpModel::init(2, 3, 1, 9);
        let opts = TrainOptions {
            reg_ratio: 1.0,
            gradient_tolerance: 1e-9,
            ..Default::default()
        };
        let (m, report) = train_scg(&model, &xor(), &opts).unwrap();
        assert!(matches!(
            report.stop_reason,
            StopReason::GradientTolerance | StopReason::PerformanceGoal
        ));
        assert!(m.params().iter().all(|w| w.abs() < 1e-6));
    }

    #[test]
    fn rejects_bad_options() {
        let model = MlpModel::init(2, 2, 1, 0);
        for opts in [
            TrainOptions {
                reg_ratio: 1.5,
                ..Default::default()
            },
            TrainOptions {
                max_epochs: 0,
                ..Default::default()
            },
            TrainOptions {
                gradient_tolerance: 0.0,
                ..Default::default()
            },
        ] {
            assert!(matches!(
                train_scg(&model, &xor(), &opts),
                Err(TrainError::InvalidOptions(_))
            ));
        }
        assert!(matches!(
            train_scg(&model, &Batch::default(), &TrainOptions::default()),
            Err(TrainError::Model(MlpError::EmptyBatch))
        ));
    }

    #[test]
    fn non_finite_data_is_reported() {
        let model = MlpModel::init(2, 2, 1, 0);
        let mut data = xor();
        data.inputs[0][0] = f64::NAN;
        assert!(matches!(
            train_scg(&model, &data, &TrainOptions::default()),
            Err(TrainError::NonFiniteObjective { epoch: 0 })
        ));
    }
}
