//! Kernel SVM training via sequential minimal optimization.
//!
//! Both tasks reduce to the same dual program
//!
//! ```text
//!   minimize   0.5 a'Qa + p'a
//!   subject to y'a = 0,  0 <= a_t <= C
//! ```
//!
//! solved by pairwise coordinate descent on the maximal violating pair.
//! Classification uses a = alpha, p = -1, Q_ij = y_i y_j K_ij. Epsilon
//! regression doubles the variables to a = [alpha; alpha*] with
//! y = [+1..; -1..], p = [eps - t_i; eps + t_i] and
//! Q_st = y_s y_t K(x_{s mod n}, x_{t mod n}); the decision coefficients
//! are alpha_i - alpha*_i. Pair selection is deterministic (first index
//! wins ties), so training is reproducible.

use std::collections::HashMap;
use std::rc::Rc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("need at least 2 training samples, got {0}")]
    TooFewSamples(usize),
    #[error("classification requires both classes in the training data")]
    SingleClass,
    #[error("non-finite feature value at sample {sample}")]
    NonFinite { sample: usize },
    #[error("sample {sample} has {found} features, expected {expected}")]
    DimensionMismatch {
        sample: usize,
        found: usize,
        expected: usize,
    },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
}

/// Kernel family and parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: f64 },
}

impl KernelSpec {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => dot(a, b),
            KernelSpec::Rbf { gamma } => {
                let mut dist = 0.0;
                for (x, y) in a.iter().zip(b) {
                    let d = x - y;
                    dist += d * d;
                }
                (-gamma * dist).exp()
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The `gamma = 1 / (d * Var(X))` heuristic, with Var the variance of the
/// flattened feature matrix.
pub fn gamma_scale(x: &[Vec<f64>]) -> f64 {
    let d = x.first().map(Vec::len).unwrap_or(0);
    if d == 0 {
        return 1.0;
    }
    let count = (x.len() * d) as f64;
    let mean: f64 = x.iter().flat_map(|row| row.iter()).sum::<f64>() / count;
    let var: f64 = x
        .iter()
        .flat_map(|row| row.iter())
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / count;
    if var > 0.0 {
        1.0 / (d as f64 * var)
    } else {
        1.0 / d as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Regression,
}

/// SMO hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoConfig {
    /// Box constraint.
    pub c: f64,
    /// Epsilon tube half-width (regression only).
    pub epsilon: f64,
    /// Stop when the maximal KKT violation drops to this.
    pub tol: f64,
    /// Upper bound on optimization steps.
    pub max_iter: u64,
    /// Kernel cache capacity in Q rows.
    pub cache_rows: usize,
}

impl Default for SmoConfig {
    fn default() -> Self {
        SmoConfig {
            c: 1.0,
            epsilon: 0.1,
            tol: 1e-3,
            max_iter: 1_000_000,
            cache_rows: 256,
        }
    }
}

impl SmoConfig {
    fn validate(&self) -> Result<(), SvmError> {
        if !(self.c > 0.0) {
            return Err(SvmError::BadConfig(format!("C must be positive, got {}", self.c)));
        }
        if !(self.tol > 0.0) {
            return Err(SvmError::BadConfig(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.epsilon < 0.0 {
            return Err(SvmError::BadConfig(format!(
                "epsilon must be nonnegative, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Raw solver output: the full dual variable vector (length n for
/// classification, 2n for regression in `[alpha; alpha*]` layout), the bias
/// of the induced decision function, and convergence diagnostics.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub iterations: u64,
    pub final_violation: f64,
}

/// A trained model: support vectors with their decision coefficients
/// (`y_i alpha_i` for classification, `alpha_i - alpha*_i` for regression).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: KernelSpec,
    pub task: Task,
    pub support_vectors: Vec<Vec<f64>>,
    pub coefficients: Vec<f64>,
    pub bias: f64,
    pub iterations: u64,
    pub final_violation: f64,
}

impl SvmModel {
    /// Decision value `sum_i coef_i K(sv_i, v) + bias`. Classification
    /// labels are the sign; ranking and regression use the raw value.
    pub fn decision(&self, v: &[f64]) -> f64 {
        let mut sum = self.bias;
        for (sv, coef) in self.support_vectors.iter().zip(&self.coefficients) {
            sum += coef * self.kernel.eval(sv, v);
        }
        sum
    }

    pub fn predict_label(&self, v: &[f64]) -> bool {
        self.decision(v) > 0.0
    }
}

fn check_features(x: &[Vec<f64>]) -> Result<(), SvmError> {
    if x.len() < 2 {
        return Err(SvmError::TooFewSamples(x.len()));
    }
    let d = x[0].len();
    for (i, row) in x.iter().enumerate() {
        if row.len() != d {
            return Err(SvmError::DimensionMismatch {
                sample: i,
                found: row.len(),
                expected: d,
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(SvmError::NonFinite { sample: i });
        }
    }
    Ok(())
}

/// Precomputed squared norms make RBF rows a dot product plus an exp.
struct KernelEval<'a> {
    kernel: KernelSpec,
    x: &'a [Vec<f64>],
    sq_norms: Vec<f64>,
}

impl<'a> KernelEval<'a> {
    fn new(kernel: KernelSpec, x: &'a [Vec<f64>]) -> Self {
        let sq_norms = x.iter().map(|v| dot(v, v)).collect();
        KernelEval { kernel, x, sq_norms }
    }

    fn eval(&self, i: usize, j: usize) -> f64 {
        match self.kernel {
            KernelSpec::Linear => dot(&self.x[i], &self.x[j]),
            KernelSpec::Rbf { gamma } => {
                let dist = self.sq_norms[i] + self.sq_norms[j] - 2.0 * dot(&self.x[i], &self.x[j]);
                (-gamma * dist.max(0.0)).exp()
            }
        }
    }
}

struct RowCache {
    capacity: usize,
    rows: HashMap<usize, (u64, Rc<Vec<f64>>)>,
    tick: u64,
}

impl RowCache {
    fn new(capacity: usize) -> Self {
        RowCache {
            capacity: capacity.max(2),
            rows: HashMap::new(),
            tick: 0,
        }
    }

    fn get(&mut self, i: usize, compute: impl FnOnce() -> Vec<f64>) -> Rc<Vec<f64>> {
        self.tick += 1;
        if let Some((stamp, row)) = self.rows.get_mut(&i) {
            *stamp = self.tick;
            return Rc::clone(row);
        }
        if self.rows.len() >= self.capacity {
            let oldest = self
                .rows
                .iter()
                .min_by_key(|(_, (stamp, _))| *stamp)
                .map(|(&k, _)| k)
                .expect("non-empty cache");
            self.rows.remove(&oldest);
        }
        let row = Rc::new(compute());
        self.rows.insert(i, (self.tick, Rc::clone(&row)));
        row
    }
}

/// Generic SMO loop over the dual program described in the module docs.
/// `q_row(i)` yields the i-th row of Q.
pub(crate) fn smo_solve(
    p: &[f64],
    signs: &[f64],
    c: f64,
    tol: f64,
    max_iter: u64,
    cache_rows: usize,
    q_row: impl Fn(usize) -> Vec<f64>,
    mut trace: Option<&mut dyn FnMut(&[f64])>,
) -> DualSolution {
    let n = p.len();
    let mut alpha = vec![0.0f64; n];
    let mut grad = p.to_vec();
    let mut cache = RowCache::new(cache_rows);
    let mut iterations = 0u64;
    let mut violation = f64::INFINITY;

    while iterations < max_iter {
        // maximal violating pair over -y_t G_t
        let mut m_val = f64::NEG_INFINITY;
        let mut m_idx = usize::MAX;
        let mut mm_val = f64::INFINITY;
        let mut mm_idx = usize::MAX;
        for t in 0..n {
            let v = -signs[t] * grad[t];
            let in_up = (signs[t] > 0.0 && alpha[t] < c) || (signs[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (signs[t] < 0.0 && alpha[t] < c) || (signs[t] > 0.0 && alpha[t] > 0.0);
            if in_up && v > m_val {
                m_val = v;
                m_idx = t;
            }
            if in_low && v < mm_val {
                mm_val = v;
                mm_idx = t;
            }
        }
        violation = m_val - mm_val;
        if m_idx == usize::MAX || mm_idx == usize::MAX || violation <= tol {
            break;
        }
        let (i, j) = (m_idx, mm_idx);

        let qi = cache.get(i, || q_row(i));
        let qj = cache.get(j, || q_row(j));

        let quad = (qi[i] + qj[j] - 2.0 * signs[i] * signs[j] * qi[j]).max(1e-12);
        let unconstrained = violation / quad;
        let i_room = if signs[i] > 0.0 { c - alpha[i] } else { alpha[i] };
        let j_room = if signs[j] > 0.0 { alpha[j] } else { c - alpha[j] };
        let step = unconstrained.min(i_room).min(j_room);

        // y_i * (y_i * step) == step exactly for signs in {-1, +1}, so the
        // equality constraint is preserved to the last bit.
        alpha[i] += signs[i] * step;
        alpha[j] -= signs[j] * step;
        alpha[i] = alpha[i].clamp(0.0, c);
        alpha[j] = alpha[j].clamp(0.0, c);

        let di = signs[i] * step;
        let dj = -signs[j] * step;
        for t in 0..n {
            grad[t] += qi[t] * di + qj[t] * dj;
        }

        iterations += 1;
        if let Some(cb) = trace.as_deref_mut() {
            cb(&alpha);
        }
    }

    // bias: average -y_s G_s over the free vectors, else the midpoint of
    // the optimality interval
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    let mut upper = f64::NEG_INFINITY;
    let mut lower = f64::INFINITY;
    for t in 0..n {
        let v = -signs[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            free_sum += v;
            free_count += 1;
        }
        let in_up = (signs[t] > 0.0 && alpha[t] < c) || (signs[t] < 0.0 && alpha[t] > 0.0);
        let in_low = (signs[t] < 0.0 && alpha[t] < c) || (signs[t] > 0.0 && alpha[t] > 0.0);
        if in_up {
            upper = upper.max(v);
        }
        if in_low {
            lower = lower.min(v);
        }
    }
    let bias = if free_count > 0 {
        free_sum / free_count as f64
    } else if upper.is_finite() && lower.is_finite() {
        (upper + lower) / 2.0
    } else {
        0.0
    };

    DualSolution {
        alphas: alpha,
        bias,
        iterations,
        final_violation: violation.max(0.0),
    }
}

/// Solve the classification dual and return the raw variables.
pub fn solve_classifier_dual(
    x: &[Vec<f64>],
    y: &[bool],
    kernel: KernelSpec,
    cfg: &SmoConfig,
) -> Result<DualSolution, SvmError> {
    cfg.validate()?;
    check_features(x)?;
    if x.len() != y.len() {
        return Err(SvmError::DimensionMismatch {
            sample: y.len(),
            found: y.len(),
            expected: x.len(),
        });
    }
    if y.iter().all(|&l| l) || y.iter().all(|&l| !l) {
        return Err(SvmError::SingleClass);
    }
    let signs: Vec<f64> = y.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
    let p = vec![-1.0; x.len()];
    let eval = KernelEval::new(kernel, x);
    let solution = smo_solve(
        &p,
        &signs,
        cfg.c,
        cfg.tol,
        cfg.max_iter,
        cfg.cache_rows,
        |i| {
            (0..x.len())
                .map(|t| signs[i] * signs[t] * eval.eval(i, t))
                .collect()
        },
        None,
    );
    Ok(solution)
}

/// Solve the epsilon-regression dual; `alphas` has the `[alpha; alpha*]`
/// layout of length `2n`.
pub fn solve_regressor_dual(
    x: &[Vec<f64>],
    targets: &[f64],
    kernel: KernelSpec,
    cfg: &SmoConfig,
) -> Result<DualSolution, SvmError> {
    cfg.validate()?;
    check_features(x)?;
    if x.len() != targets.len() {
        return Err(SvmError::DimensionMismatch {
            sample: targets.len(),
            found: targets.len(),
            expected: x.len(),
        });
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(SvmError::NonFinite { sample: x.len() });
    }
    let n = x.len();
    let mut signs = vec![1.0; 2 * n];
    let mut p = vec![0.0; 2 * n];
    for i in 0..n {
        p[i] = cfg.epsilon - targets[i];
        p[n + i] = cfg.epsilon + targets[i];
        signs[n + i] = -1.0;
    }
    let eval = KernelEval::new(kernel, x);
    let solution = smo_solve(
        &p,
        &signs,
        cfg.c,
        cfg.tol,
        cfg.max_iter,
        cfg.cache_rows,
        |s| {
            (0..2 * n)
                .map(|t| signs[s] * signs[t] * eval.eval(s % n, t % n))
                .collect()
        },
        None,
    );
    Ok(solution)
}

/// Train a binary classifier. `y[i] = true` marks the positive class.
pub fn train_classifier(
    x: &[Vec<f64>],
    y: &[bool],
    kernel: KernelSpec,
    cfg: &SmoConfig,
) -> Result<SvmModel, SvmError> {
    let solution = solve_classifier_dual(x, y, kernel, cfg)?;
    let mut support_vectors = Vec::new();
    let mut coefficients = Vec::new();
    for (i, &a) in solution.alphas.iter().enumerate() {
        if a > 0.0 {
            support_vectors.push(x[i].clone());
            coefficients.push(if y[i] { a } else { -a });
        }
    }
    Ok(SvmModel {
        kernel,
        task: Task::Classification,
        support_vectors,
        coefficients,
        bias: solution.bias,
        iterations: solution.iterations,
        final_violation: solution.final_violation,
    })
}

/// Train an epsilon-regressor on real-valued targets.
pub fn train_regressor(
    x: &[Vec<f64>],
    targets: &[f64],
    kernel: KernelSpec,
    cfg: &SmoConfig,
) -> Result<SvmModel, SvmError> {
    let solution = solve_regressor_dual(x, targets, kernel, cfg)?;
    let n = x.len();
    let mut support_vectors = Vec::new();
    let mut coefficients = Vec::new();
    for i in 0..n {
        let coef = solution.alphas[i] - solution.alphas[n + i];
        if coef != 0.0 {
            support_vectors.push(x[i].clone());
            coefficients.push(coef);
        }
    }
    Ok(SvmModel {
        kernel,
        task: Task::Regression,
        support_vectors,
        coefficients,
        bias: solution.bias,
        iterations: solution.iterations,
        final_violation: solution.final_violation,
    })
}
