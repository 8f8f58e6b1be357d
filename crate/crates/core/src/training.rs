//! Batch Levenberg-Marquardt training on the mean squared error, with a
//! plain gradient-descent fallback.
//!
//! Both trainers work on any [`LeastSquaresProblem`]; [`NetworkProblem`]
//! adapts an [`MlpNetwork`] and a normalized training set to it. Every
//! epoch of the LM loop linearizes the residuals `r` around the current
//! parameters, then solves `(JᵀJ + λI) δ = -Jᵀr` for increasing `λ` until
//! the candidate lowers the MSE.

use std::fmt;
use std::str::FromStr;

use crate::dataset::{gather, Dataset, FeatureLayout};
use crate::error::{Error, Result};
use crate::linalg::{norm, solve_spd, Matrix};
use crate::network::{MlpNetwork, ParamVector};

/// Accepted steps never shrink `λ` below this.
pub const LAMBDA_FLOOR: f64 = 1e-20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    LevenbergMarquardt,
    GradientDescent,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::LevenbergMarquardt => "levenberg_marquardt",
            Algorithm::GradientDescent => "gradient_descent",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "levenberg_marquardt" | "lm" => Ok(Algorithm::LevenbergMarquardt),
            "gradient_descent" | "gd" => Ok(Algorithm::GradientDescent),
            other => Err(Error::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub max_epochs: usize,
    /// Stop once the training MSE (normalized targets) reaches this.
    pub mse_goal: f64,
    pub lambda_init: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub lambda_max: f64,
    /// Stop when `‖Jᵀr‖` falls below this.
    pub min_grad_norm: f64,
    pub seed: u64,
    pub algorithm: Algorithm,
    /// Gradient descent only.
    pub learning_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 200,
            mse_goal: 0.0025,
            lambda_init: 1e-3,
            lambda_up: 10.0,
            lambda_down: 0.1,
            lambda_max: 1e10,
            min_grad_norm: 1e-10,
            seed: 0,
            algorithm: Algorithm::LevenbergMarquardt,
            learning_rate: 0.01,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive");
        }
        if !(self.mse_goal > 0.0) {
            return bad("mse_goal must be > 0");
        }
        if !(self.lambda_init > 0.0 && self.lambda_init.is_finite()) {
            return bad("lambda_init must be a positive number");
        }
        if !(self.lambda_up > 1.0 && self.lambda_up.is_finite()) {
            return bad("lambda_up must be > 1");
        }
        if !(self.lambda_down > 0.0 && self.lambda_down < 1.0) {
            return bad("lambda_down must lie in (0, 1)");
        }
        if !(self.lambda_max >= self.lambda_init && self.lambda_max.is_finite()) {
            return bad("lambda_max must be finite and >= lambda_init");
        }
        if !(self.min_grad_norm >= 0.0) {
            return bad("min_grad_norm must be >= 0");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be a finite number >= 0");
        }
        Ok(())
    }

    /// Sets one field by its config-file key. Returns `Ok(false)` for keys
    /// that are not training settings.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "max_epochs" => self.max_epochs = parse_num(key, value)?,
            "mse_goal" => self.mse_goal = parse_num(key, value)?,
            "lambda_init" => self.lambda_init = parse_num(key, value)?,
            "lambda_up" => self.lambda_up = parse_num(key, value)?,
            "lambda_down" => self.lambda_down = parse_num(key, value)?,
            "lambda_max" => self.lambda_max = parse_num(key, value)?,
            "min_grad_norm" => self.min_grad_norm = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "algorithm" => self.algorithm = value.parse()?,
            "learning_rate" => self.learning_rate = parse_num(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// `key = value` pairs in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("algorithm", self.algorithm.to_string()),
            ("max_epochs", self.max_epochs.to_string()),
            ("mse_goal", self.mse_goal.to_string()),
            ("lambda_init", self.lambda_init.to_string()),
            ("lambda_up", self.lambda_up.to_string()),
            ("lambda_down", self.lambda_down.to_string()),
            ("lambda_max", self.lambda_max.to_string()),
            ("min_grad_norm", self.min_grad_norm.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("seed", self.seed.to_string()),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    GoalReached,
    MaxEpochs,
    GradientVanished,
    LambdaExceeded,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::GoalReached => "goal_reached",
            Termination::MaxEpochs => "max_epochs",
            Termination::GradientVanished => "gradient_vanished",
            Termination::LambdaExceeded => "lambda_exceeded",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    /// Number of accepted parameter updates.
    pub epochs_run: usize,
    pub final_train_mse: f64,
    /// `None` for gradient descent.
    pub final_lambda: Option<f64>,
    pub final_gradient_norm: f64,
    /// MSE before training followed by the MSE after each accepted update.
    pub mse_trace: Vec<f64>,
    pub rejected_steps: usize,
    pub termination: Termination,
    pub config: TrainConfig,
}

impl TrainReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("termination = {}\n", self.termination));
        s.push_str(&format!("epochs_run = {}\n", self.epochs_run));
        s.push_str(&format!("final_train_mse = {:.16e}\n", self.final_train_mse));
        match self.final_lambda {
            Some(l) => s.push_str(&format!("final_lambda = {l:e}\n")),
            None => s.push_str("final_lambda = none\n"),
        }
        s.push_str(&format!("final_gradient_norm = {:e}\n", self.final_gradient_norm));
        s.push_str(&format!("rejected_steps = {}\n", self.rejected_steps));
        for (k, v) in self.config.entries() {
            s.push_str(&format!("config.{k} = {v}\n"));
        }
        s
    }

    /// Two-column `epoch,mse` table.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("epoch,mse\n");
        for (e, m) in self.mse_trace.iter().enumerate() {
            s.push_str(&format!("{e},{m:.16e}\n"));
        }
        s
    }
}

/// Mean of squared differences.
pub fn mse(predicted: &[f64], observed: &[f64]) -> Result<f64> {
    if predicted.len() != observed.len() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} observations",
            predicted.len(),
            observed.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sse: f64 = predicted.iter().zip(observed).map(|(p, o)| (p - o) * (p - o)).sum();
    Ok(sse / predicted.len() as f64)
}

fn mean_square(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64
}

/// Residuals `r(p)` and their Jacobian `∂r/∂p`.
pub trait LeastSquaresProblem {
    fn parameter_count(&self) -> usize;
    fn residuals(&self, params: &[f64]) -> Result<Vec<f64>>;
    fn jacobian(&self, params: &[f64]) -> Result<Matrix>;
}

/// Network outputs minus targets over a normalized batch.
pub struct NetworkProblem<'a> {
    template: &'a MlpNetwork,
    inputs: &'a [Vec<f64>],
    targets: Vec<f64>,
}

impl<'a> NetworkProblem<'a> {
    pub fn new(template: &'a MlpNetwork, inputs: &'a [Vec<f64>], targets: &[Vec<f64>]) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if inputs.len() != targets.len() {
            return Err(Error::Shape(format!(
                "{} input rows vs {} target rows",
                inputs.len(),
                targets.len()
            )));
        }
        if let Some(t) = targets.iter().find(|t| t.len() != template.n_out()) {
            return Err(Error::Shape(format!(
                "target of length {}, network has {} outputs",
                t.len(),
                template.n_out()
            )));
        }
        Ok(NetworkProblem {
            template,
            inputs,
            targets: targets.iter().flatten().copied().collect(),
        })
    }
}

impl LeastSquaresProblem for NetworkProblem<'_> {
    fn parameter_count(&self) -> usize {
        self.template.parameter_count()
    }

    fn residuals(&self, params: &[f64]) -> Result<Vec<f64>> {
        let net = self.template.with_params(params)?;
        let out = net.forward_batch(self.inputs)?;
        Ok(out.iter().zip(&self.targets).map(|(y, t)| y - t).collect())
    }

    fn jacobian(&self, params: &[f64]) -> Result<Matrix> {
        self.template.with_params(params)?.jacobian(self.inputs)
    }
}

/// Linear residuals `A·p - y`.
pub struct LinearProblem {
    pub design: Matrix,
    pub observations: Vec<f64>,
}

impl LeastSquaresProblem for LinearProblem {
    fn parameter_count(&self) -> usize {
        self.design.cols()
    }

    fn residuals(&self, params: &[f64]) -> Result<Vec<f64>> {
        let ap = self.design.mul_vec(params)?;
        Ok(ap.iter().zip(&self.observations).map(|(a, y)| a - y).collect())
    }

    fn jacobian(&self, _params: &[f64]) -> Result<Matrix> {
        Ok(self.design.clone())
    }
}

/// Damped normal equations linearized at one parameter point.
pub struct DampedSystem {
    gram: Matrix,
    /// `Jᵀr`
    gradient: Vec<f64>,
    jacobian: Matrix,
    residuals: Vec<f64>,
}

impl DampedSystem {
    pub fn linearize<P: LeastSquaresProblem + ?Sized>(problem: &P, params: &[f64]) -> Result<Self> {
        let residuals = problem.residuals(params)?;
        let jacobian = problem.jacobian(params)?;
        Self::from_parts(jacobian, residuals)
    }

    pub fn from_parts(jacobian: Matrix, residuals: Vec<f64>) -> Result<Self> {
        let gradient = jacobian.tr_mul_vec(&residuals)?;
        Ok(DampedSystem {
            gram: jacobian.gram(),
            gradient,
            jacobian,
            residuals,
        })
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// `Jᵀr`, half the gradient of the sum of squares.
    pub fn gradient(&self) -> &[f64] {
        &self.gradient
    }

    /// Solves `(JᵀJ + λI) δ = -Jᵀr`.
    pub fn step(&self, lambda: f64) -> Result<Vec<f64>> {
        if !(lambda > 0.0) {
            return Err(Error::Config(format!("damping must be positive, got {lambda}")));
        }
        let rhs: Vec<f64> = self.gradient.iter().map(|g| -g).collect();
        solve_spd(&self.gram.add_diagonal(lambda)?, &rhs)
    }

    /// Linearized residuals after a step: `r + J·δ`.
    pub fn predicted_residuals(&self, delta: &[f64]) -> Result<Vec<f64>> {
        let jd = self.jacobian.mul_vec(delta)?;
        Ok(self.residuals.iter().zip(jd).map(|(r, d)| r + d).collect())
    }
}

/// Result of one damped Gauss-Newton step.
#[derive(Clone, Debug, PartialEq)]
pub struct LmStep {
    pub candidate: Vec<f64>,
    pub delta: Vec<f64>,
    pub predicted_residuals: Vec<f64>,
}

pub fn damped_step<P: LeastSquaresProblem + ?Sized>(problem: &P, params: &[f64], lambda: f64) -> Result<LmStep> {
    let system = DampedSystem::linearize(problem, params)?;
    let delta = system.step(lambda)?;
    let predicted_residuals = system.predicted_residuals(&delta)?;
    let candidate = params.iter().zip(&delta).map(|(p, d)| p + d).collect();
    Ok(LmStep {
        candidate,
        delta,
        predicted_residuals,
    })
}

/// One LM step for a network on a normalized batch: the candidate
/// parameters and the linearized residuals predicted for them.
pub fn lm_step(
    net: &MlpNetwork,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    lambda: f64,
) -> Result<(ParamVector, Vec<f64>)> {
    let problem = NetworkProblem::new(net, inputs, targets)?;
    let step = damped_step(&problem, net.params().as_slice(), lambda)?;
    Ok((ParamVector(step.candidate), step.predicted_residuals))
}

/// Levenberg-Marquardt minimization of the mean squared residual.
///
/// A failed factorization or a non-finite candidate counts as a rejected
/// step. `epochs_run` counts accepted steps.
pub fn minimize_lm<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    initial: Vec<f64>,
    cfg: &TrainConfig,
) -> Result<(Vec<f64>, TrainReport)> {
    cfg.validate()?;
    let mut params = initial;
    let mut residuals = problem.residuals(&params)?;
    if residuals.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut mse = mean_square(&residuals);
    let mut lambda = cfg.lambda_init;
    let mut trace = vec![mse];
    let mut rejected_steps = 0;
    let mut grad_norm;

    let termination = 'outer: loop {
        let system = DampedSystem::from_parts(problem.jacobian(&params)?, residuals.clone())?;
        grad_norm = norm(system.gradient());
        if grad_norm < cfg.min_grad_norm {
            break Termination::GradientVanished;
        }
        loop {
            let accepted = match system.step(lambda) {
                Ok(delta) => {
                    let candidate: Vec<f64> = params.iter().zip(&delta).map(|(p, d)| p + d).collect();
                    match problem.residuals(&candidate) {
                        Ok(r) => {
                            let m = mean_square(&r);
                            (m < mse).then_some((candidate, r, m))
                        }
                        Err(Error::NonFinite(_)) => None,
                        Err(e) => return Err(e),
                    }
                }
                Err(Error::NotPositiveDefinite { .. }) | Err(Error::NonFinite(_)) => None,
                Err(e) => return Err(e),
            };
            if let Some((candidate, r, m)) = accepted {
                params = candidate;
                residuals = r;
                mse = m;
                lambda = (lambda * cfg.lambda_down).max(LAMBDA_FLOOR);
                break;
            }
            rejected_steps += 1;
            lambda *= cfg.lambda_up;
            if lambda > cfg.lambda_max {
                break 'outer if mse <= cfg.mse_goal {
                    Termination::GoalReached
                } else {
                    Termination::LambdaExceeded
                };
            }
        }
        trace.push(mse);
        if mse <= cfg.mse_goal {
            break Termination::GoalReached;
        }
        if trace.len() > cfg.max_epochs {
            break Termination::MaxEpochs;
        }
    };

    let report = TrainReport {
        epochs_run: trace.len() - 1,
        final_train_mse: mse,
        final_lambda: Some(lambda),
        final_gradient_norm: grad_norm,
        mse_trace: trace,
        rejected_steps,
        termination,
        config: cfg.clone(),
    };
    Ok((params, report))
}

/// Full-batch gradient descent on the mean squared residual with a fixed
/// learning rate.
pub fn minimize_gd<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    initial: Vec<f64>,
    cfg: &TrainConfig,
) -> Result<(Vec<f64>, TrainReport)> {
    cfg.validate()?;
    let mut params = initial;
    let mut residuals = problem.residuals(&params)?;
    if residuals.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = residuals.len() as f64;
    let mut mse = mean_square(&residuals);
    let mut trace = vec![mse];
    let mut grad_norm;

    let termination = loop {
        let jtr = problem.jacobian(&params)?.tr_mul_vec(&residuals)?;
        grad_norm = norm(&jtr);
        if grad_norm < cfg.min_grad_norm {
            break Termination::GradientVanished;
        }
        for (p, g) in params.iter_mut().zip(&jtr) {
            *p -= cfg.learning_rate * 2.0 * g / n;
        }
        residuals = problem.residuals(&params)?;
        mse = mean_square(&residuals);
        if !mse.is_finite() {
            return Err(Error::NonFinite("gradient descent diverged".into()));
        }
        trace.push(mse);
        if mse <= cfg.mse_goal {
            break Termination::GoalReached;
        }
        if trace.len() > cfg.max_epochs {
            break Termination::MaxEpochs;
        }
    };

    let report = TrainReport {
        epochs_run: trace.len() - 1,
        final_train_mse: mse,
        final_lambda: None,
        final_gradient_norm: grad_norm,
        mse_trace: trace,
        rejected_steps: 0,
        termination,
        config: cfg.clone(),
    };
    Ok((params, report))
}

/// Normalized input and target rows ready for training.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingData {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl TrainingData {
    /// Extracts the layout's columns from `d` and normalizes them with the
    /// network's attached normalizers.
    pub fn from_dataset(d: &Dataset, layout: &FeatureLayout, net: &MlpNetwork) -> Result<Self> {
        let in_idx = layout.input_indices(d.schema())?;
        let out_idx = layout.target_indices(d.schema())?;
        let mut inputs = Vec::with_capacity(d.len());
        let mut targets = Vec::with_capacity(d.len());
        for s in d.samples() {
            inputs.push(net.input_normalizer().apply(&gather(&s.values, &in_idx))?);
            targets.push(net.target_normalizer().apply(&gather(&s.values, &out_idx))?);
        }
        Ok(TrainingData { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Levenberg-Marquardt training of `net` on normalized data.
pub fn train(net: &MlpNetwork, data: &TrainingData, cfg: &TrainConfig) -> Result<(MlpNetwork, TrainReport)> {
    let problem = NetworkProblem::new(net, &data.inputs, &data.targets)?;
    let (params, report) = minimize_lm(&problem, net.params().0, cfg)?;
    Ok((net.with_params(&params)?, report))
}

/// Gradient-descent training of `net` on normalized data.
pub fn train_gd(net: &MlpNetwork, data: &TrainingData, cfg: &TrainConfig) -> Result<(MlpNetwork, TrainReport)> {
    let problem = NetworkProblem::new(net, &data.inputs, &data.targets)?;
    let (params, report) = minimize_gd(&problem, net.params().0, cfg)?;
    Ok((net.with_params(&params)?, report))
}

/// Trains with whichever algorithm `cfg` selects.
pub fn train_with(net: &MlpNetwork, data: &TrainingData, cfg: &TrainConfig) -> Result<(MlpNetwork, TrainReport)> {
    match cfg.algorithm {
        Algorithm::LevenbergMarquardt => train(net, data, cfg),
        Algorithm::GradientDescent => train_gd(net, data, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::init_weights;

    fn sine_data(n: usize) -> TrainingData {
        let xs: Vec<f64> = (0..n)
            .map(|i| -std::f64::consts::PI + 2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64)
            .collect();
        TrainingData {
            inputs: xs.iter().map(|x| vec![x / std::f64::consts::PI]).collect(),
            targets: xs.iter().map(|x| vec![x.sin()]).collect(),
        }
    }

    fn one_point_line(x: f64, y: f64) -> LinearProblem {
        LinearProblem {
            design: Matrix::new(1, 1, vec![x]).unwrap(),
            observations: vec![y],
        }
    }

    #[test]
    fn mse_cases() {
        assert_eq!(mse(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(mse(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(mse(&[1.0, 2.0], &[2.0, 4.0]).unwrap(), 2.5);
        assert!(matches!(mse(&[1.0], &[1.0, 2.0]), Err(Error::Shape(_))));
        assert!(matches!(mse(&[], &[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn config_defaults_and_validation() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        assert_eq!((c.max_epochs, c.mse_goal, c.lambda_init), (200, 0.0025, 1e-3));
        for (k, v) in [("lambda_up", "1"), ("lambda_down", "1.5"), ("mse_goal", "0"), ("max_epochs", "0")] {
            let mut c = TrainConfig::default();
            assert!(c.set(k, v).unwrap());
            assert!(c.validate().is_err(), "{k}={v}");
        }
        let mut c = TrainConfig::default();
        assert!(!c.set("hidden_units", "5").unwrap());
        assert!(c.set("algorithm", "gradient_descent").unwrap());
        assert_eq!(c.algorithm, Algorithm::GradientDescent);
        assert!(c.set("lambda_up", "abc").is_err());
    }

    #[test]
    fn one_step_solves_line_through_one_point() {
        let step = damped_step(&one_point_line(1.0, 2.0), &[0.0], 1e-15).unwrap();
        assert!((step.candidate[0] - 2.0).abs() < 1e-12);
        assert!(step.predicted_residuals[0].abs() < 1e-12);
    }

    #[test]
    fn heavy_damping_approaches_scaled_gradient_step() {
        let p = LinearProblem {
            design: Matrix::from_rows(&[[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]]).unwrap(),
            observations: vec![1.0, 2.0, 3.0],
        };
        let system = DampedSystem::linearize(&p, &[0.0, 0.0]).unwrap();
        let g = system.gradient();
        let gram_norm = p.design.gram().norm();
        let mut last = f64::INFINITY;
        for &lambda in &[1e2, 1e4, 1e6, 1e8] {
            let d = system.step(lambda).unwrap();
            // δ = -(JᵀJ + λI)⁻¹ g, so λδ + g is O(‖JᵀJ‖/λ) relative to g.
            let gap: Vec<f64> = d.iter().zip(g).map(|(di, gi)| di * lambda + gi).collect();
            assert!(norm(&gap) <= 2.0 * gram_norm / lambda * norm(g));
            let n = norm(&d);
            assert!(n < last);
            last = n;
        }
        assert!(last < 1e-7);
    }

    #[test]
    fn zero_residuals_give_zero_step() {
        let net = init_weights(2, 3, 1, 5).unwrap();
        let inputs = vec![vec![0.1, 0.2], vec![-0.5, 0.4]];
        let targets: Vec<Vec<f64>> = inputs.iter().map(|x| net.forward(x).unwrap()).collect();
        let (cand, _) = lm_step(&net, &inputs, &targets, 1e-3).unwrap();
        assert_eq!(cand, net.params());
    }

    #[test]
    fn huge_goal_stops_after_first_epoch() {
        let net = init_weights(1, 4, 1, 1).unwrap();
        let cfg = TrainConfig {
            mse_goal: 1e9,
            ..TrainConfig::default()
        };
        let (_, report) = train(&net, &sine_data(20), &cfg).unwrap();
        assert_eq!(report.termination, Termination::GoalReached);
        assert_eq!(report.epochs_run, 1);
    }

    #[test]
    fn accepted_steps_decrease_mse() {
        let net = init_weights(1, 10, 1, 3).unwrap();
        let cfg = TrainConfig {
            mse_goal: 1e-12,
            max_epochs: 60,
            ..TrainConfig::default()
        };
        let (_, report) = train(&net, &sine_data(50), &cfg).unwrap();
        assert!(report.mse_trace.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(report.mse_trace.len(), report.epochs_run + 1);
    }

    #[test]
    fn lambda_exceeded_when_no_step_can_help() {
        // A minimum that is already exact up to rounding: every step is rejected.
        let p = LinearProblem {
            design: Matrix::from_rows(&[[1.0], [1.0]]).unwrap(),
            observations: vec![1.0, -1.0],
        };
        let cfg = TrainConfig {
            mse_goal: 1e-6,
            min_grad_norm: 0.0,
            ..TrainConfig::default()
        };
        let (_, report) = minimize_lm(&p, vec![0.0], &cfg).unwrap();
        assert_eq!(report.termination, Termination::LambdaExceeded);
        assert!(report.final_lambda.unwrap() > cfg.lambda_max);
        assert_eq!(report.epochs_run, 0);
    }

    #[test]
    fn vanishing_gradient_stops_training() {
        let p = one_point_line(1.0, 0.0);
        let (_, report) = minimize_lm(&p, vec![0.0], &TrainConfig::default()).unwrap();
        assert_eq!(report.termination, Termination::GradientVanished);
    }

    #[test]
    fn gd_contracts_error_geometrically() {
        let (x, y, lr) = (1.5, 3.0, 0.05);
        let p = one_point_line(x, y);
        let cfg = TrainConfig {
            learning_rate: lr,
            max_epochs: 20,
            mse_goal: 1e-30,
            ..TrainConfig::default()
        };
        let (_, report) = minimize_gd(&p, vec![0.0], &cfg).unwrap();
        let factor = (1.0 - 2.0 * lr * x * x).powi(2);
        for w in report.mse_trace.windows(2) {
            assert!((w[1] / w[0] - factor).abs() < 1e-9, "{} vs {factor}", w[1] / w[0]);
        }
    }

    #[test]
    fn gd_with_zero_rate_keeps_parameters() {
        let net = init_weights(1, 3, 1, 8).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            max_epochs: 5,
            ..TrainConfig::default()
        };
        let (trained, report) = train_gd(&net, &sine_data(10), &cfg).unwrap();
        assert_eq!(trained, net);
        assert_eq!(report.termination, Termination::MaxEpochs);
        assert_eq!(report.final_lambda, None);
    }

    #[test]
    fn training_is_deterministic() {
        let net = init_weights(1, 6, 1, 21).unwrap();
        let data = sine_data(30);
        let cfg = TrainConfig {
            max_epochs: 30,
            ..TrainConfig::default()
        };
        assert_eq!(train(&net, &data, &cfg).unwrap(), train(&net, &data, &cfg).unwrap());
        let gd = TrainConfig {
            algorithm: Algorithm::GradientDescent,
            ..cfg
        };
        assert_eq!(train_with(&net, &data, &gd).unwrap(), train_with(&net, &data, &gd).unwrap());
    }

    #[test]
    fn empty_training_set_is_rejected() {
        let net = init_weights(1, 2, 1, 0).unwrap();
        let empty = TrainingData {
            inputs: vec![],
            targets: vec![],
        };
        assert!(matches!(train(&net, &empty, &TrainConfig::default()), Err(Error::EmptyDataset)));
    }

    #[test]
    fn report_text_is_stable() {
        let net = init_weights(1, 3, 1, 2).unwrap();
        let cfg = TrainConfig {
            max_epochs: 3,
            mse_goal: 1e-12,
            ..TrainConfig::default()
        };
        let (_, report) = train(&net, &sine_data(8), &cfg).unwrap();
        let text = report.to_text();
        assert!(text.contains("termination = max_epochs"));
        assert!(text.contains("config.lambda_up = 10"));
        assert_eq!(report.trace_csv().lines().count(), 1 + 4);
    }
}
