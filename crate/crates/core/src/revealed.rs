//! Revealed preferences: GARP via Warshall closure, Afriat inequalities as a
//! minimum-violation LP, the piecewise-linear utility they define, and the
//! first-order AR model of the public belief.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on the weak side of the revealed-preference relation.
pub const GARP_TOLERANCE: f64 = 1e-10;
/// Total LP violation at or below which the Afriat system counts as feasible.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-8;
/// Planes within this distance of the minimum are active.
pub const ACTIVE_TOLERANCE: f64 = 1e-9;

/// Probe/response pairs `(p_t, a_t)`, indexed `0..T` in the API.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceDataset {
    probes: Vec<Vec<f64>>,
    responses: Vec<Vec<f64>>,
}

impl ChoiceDataset {
    pub fn new(probes: Vec<Vec<f64>>, responses: Vec<Vec<f64>>) -> Result<Self> {
        if probes.is_empty() {
            return Err(Error::InvalidDataset("dataset has no observations".into()));
        }
        if probes.len() != responses.len() {
            return Err(Error::InvalidDataset(format!(
                "{} probes but {} responses",
                probes.len(),
                responses.len()
            )));
        }
        let m = probes[0].len();
        if m == 0 {
            return Err(Error::InvalidDataset("zero-dimensional goods".into()));
        }
        for (t, (p, a)) in probes.iter().zip(&responses).enumerate() {
            if p.len() != m || a.len() != m {
                return Err(Error::InvalidDataset(format!(
                    "observation {} does not have dimension {m}",
                    t + 1
                )));
            }
            if p.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                return Err(Error::InvalidDataset(format!(
                    "probe {} must be strictly positive",
                    t + 1
                )));
            }
            if a.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidDataset(format!(
                    "response {} must be nonnegative",
                    t + 1
                )));
            }
        }
        Ok(Self { probes, responses })
    }

    pub fn len(&self) -> usize {
        self.probes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.probes[0].len()
    }

    pub fn probe(&self, t: usize) -> &[f64] {
        &self.probes[t]
    }

    pub fn response(&self, t: usize) -> &[f64] {
        &self.responses[t]
    }

    /// `p_t' a_t`.
    pub fn budget(&self, t: usize) -> f64 {
        dot(&self.probes[t], &self.responses[t])
    }

    /// `p_t' a_s`.
    pub fn cost_at(&self, t: usize, s: usize) -> f64 {
        dot(&self.probes[t], &self.responses[s])
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GarpResult {
    pub holds: bool,
    /// Observation indices `t, ..., s, t` where each step is revealed
    /// preferred and the closing step is strict.
    pub violating_cycle: Option<Vec<usize>>,
}

/// Cyclical consistency of the revealed-preference relation.
pub fn garp_check(data: &ChoiceDataset) -> GarpResult {
    let n = data.len();
    let budgets: Vec<f64> = (0..n).map(|t| data.budget(t)).collect();
    // next[t][s]: first hop on a known path t -> s
    let mut next: Vec<Vec<Option<usize>>> = (0..n)
        .map(|t| {
            (0..n)
                .map(|s| {
                    let slack = GARP_TOLERANCE * budgets[t].abs().max(1.0);
                    (budgets[t] + slack >= data.cost_at(t, s)).then_some(s)
                })
                .collect()
        })
        .collect();
    for k in 0..n {
        for i in 0..n {
            if next[i][k].is_none() {
                continue;
            }
            for j in 0..n {
                if next[i][j].is_none() && next[k][j].is_some() {
                    next[i][j] = next[i][k];
                }
            }
        }
    }
    for t in 0..n {
        for s in 0..n {
            if next[t][s].is_none() {
                continue;
            }
            let margin = GARP_TOLERANCE * budgets[s].abs().max(1.0);
            if budgets[s] > data.cost_at(s, t) + margin {
                let mut cycle = vec![t];
                let mut cur = t;
                while cur != s {
                    cur = next[cur][s].expect("path exists");
                    cycle.push(cur);
                }
                cycle.push(t);
                return GarpResult {
                    holds: false,
                    violating_cycle: Some(cycle),
                };
            }
        }
    }
    GarpResult {
        holds: true,
        violating_cycle: None,
    }
}

/// Utility levels and multipliers solving the Afriat inequalities
/// `u_s - u_t - lambda_t p_t'(a_s - a_t) <= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AfriatCertificate {
    pub u: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl AfriatCertificate {
    /// Largest violation of the inequalities on `data`.
    pub fn max_violation(&self, data: &ChoiceDataset) -> f64 {
        let n = data.len();
        let mut worst: f64 = 0.0;
        for t in 0..n {
            for s in 0..n {
                let v = self.u[s] - self.u[t] - self.lambda[t] * (data.cost_at(t, s) - data.budget(t));
                worst = worst.max(v);
            }
        }
        worst
    }
}

/// Solves the Afriat system with `lambda_t >= 1`; `None` when infeasible.
///
/// The LP minimizes the total violation of the inequalities. Given the
/// multipliers, utility levels are then recomputed as shortest-path
/// potentials so the returned certificate satisfies the system up to
/// rounding rather than up to the solver's tolerance.
pub fn afriat_solve(data: &ChoiceDataset) -> Result<Option<AfriatCertificate>> {
    let n = data.len();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let u: Vec<_> = (0..n)
        .map(|t| {
            let bounds = if t == 0 { (0.0, 0.0) } else { (f64::NEG_INFINITY, f64::INFINITY) };
            lp.add_var(0.0, bounds)
        })
        .collect();
    let lambda: Vec<_> = (0..n).map(|_| lp.add_var(0.0, (1.0, f64::INFINITY))).collect();
    for t in 0..n {
        for s in 0..n {
            if s == t {
                continue;
            }
            let slack = lp.add_var(1.0, (0.0, f64::INFINITY));
            let gap = data.cost_at(t, s) - data.budget(t);
            lp.add_constraint(
                [(u[s], 1.0), (u[t], -1.0), (lambda[t], -gap), (slack, -1.0)],
                ComparisonOp::Le,
                0.0,
            );
        }
    }
    let solution = lp.solve().map_err(|e| Error::Solver(e.to_string()))?;
    if !solution.objective().is_finite() {
        return Err(Error::Solver("non-finite objective".into()));
    }
    if solution.objective() > FEASIBILITY_TOLERANCE {
        return Ok(None);
    }
    let lambda: Vec<f64> = lambda.iter().map(|&v| solution[v].max(1.0)).collect();
    let u = potentials(data, &lambda);
    Ok(Some(AfriatCertificate { u, lambda }))
}

/// Shortest-path potentials for the constraints `u_s <= u_t + w(t, s)`,
/// shifted so that `u_0 = 0`.
fn potentials(data: &ChoiceDataset, lambda: &[f64]) -> Vec<f64> {
    let n = data.len();
    let w = |t: usize, s: usize| lambda[t] * (data.cost_at(t, s) - data.budget(t));
    let mut d = vec![0.0; n];
    for _ in 0..n {
        let mut changed = false;
        for t in 0..n {
            for s in 0..n {
                let cand = d[t] + w(t, s);
                if cand < d[s] {
                    d[s] = cand;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let shift = d[0];
    d.iter().map(|v| v - shift).collect()
}

/// Marginal rate of substitution of a piecewise-linear utility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Mrs {
    Point(f64),
    /// At a kink: the range spanned by the active planes.
    Interval(f64, f64),
}

/// `u(a) = min_t { u_t + lambda_t p_t'(a - a_t) }`.
#[derive(Debug, Clone)]
pub struct PiecewiseUtility {
    data: ChoiceDataset,
    certificate: AfriatCertificate,
}

impl PiecewiseUtility {
    pub fn new(data: ChoiceDataset, certificate: AfriatCertificate) -> Result<Self> {
        if certificate.u.len() != data.len() || certificate.lambda.len() != data.len() {
            return Err(Error::InvalidDataset(
                "certificate length does not match dataset".into(),
            ));
        }
        if certificate.lambda.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::InvalidDataset("multipliers must be positive".into()));
        }
        Ok(Self { data, certificate })
    }

    pub fn certificate(&self) -> &AfriatCertificate {
        &self.certificate
    }

    fn plane(&self, t: usize, a: &[f64]) -> f64 {
        let c = &self.certificate;
        c.u[t] + c.lambda[t] * (dot(self.data.probe(t), a) - self.data.budget(t))
    }

    pub fn eval(&self, a: &[f64]) -> f64 {
        (0..self.data.len())
            .map(|t| self.plane(t, a))
            .fold(f64::INFINITY, f64::min)
    }

    /// Planes attaining the minimum at `a`.
    pub fn active_planes(&self, a: &[f64]) -> Vec<usize> {
        let values: Vec<f64> = (0..self.data.len()).map(|t| self.plane(t, a)).collect();
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let slack = ACTIVE_TOLERANCE * min.abs().max(1.0);
        (0..values.len()).filter(|&t| values[t] <= min + slack).collect()
    }

    /// `du/da_i / du/da_j` at `a`; an interval on a kink.
    pub fn mrs(&self, a: &[f64], i: usize, j: usize) -> Result<Mrs> {
        let m = self.data.dim();
        if i >= m || j >= m || i == j {
            return Err(Error::Domain(format!("goods {i} and {j} must be distinct and below {m}")));
        }
        let ratios: Vec<f64> = self
            .active_planes(a)
            .into_iter()
            .map(|t| self.data.probe(t)[i] / self.data.probe(t)[j])
            .collect();
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(if lo == hi { Mrs::Point(lo) } else { Mrs::Interval(lo, hi) })
    }
}

/// Public-belief series `pi_t(1)` and its driver `a_t(2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefSeries {
    pub belief: Vec<f64>,
    pub driver: Vec<f64>,
}

impl BeliefSeries {
    pub fn new(belief: Vec<f64>, driver: Vec<f64>) -> Result<Self> {
        if belief.len() != driver.len() {
            return Err(Error::InvalidDataset(format!(
                "belief series has {} points, driver {}",
                belief.len(),
                driver.len()
            )));
        }
        if belief.iter().chain(&driver).any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("series contains non-finite values".into()));
        }
        Ok(Self { belief, driver })
    }

    pub fn len(&self) -> usize {
        self.belief.len()
    }

    pub fn is_empty(&self) -> bool {
        self.belief.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArFit {
    pub b: f64,
    /// `pi_{t+1} - pi_t - b a_t` for `t = 1..T-1`.
    pub residuals: Vec<f64>,
    /// Mean absolute percentage error of the one-step predictions, as a
    /// fraction. Points with a zero actual value are skipped.
    pub mape: f64,
}

/// Least squares for `pi_{t+1} = pi_t + b a_t + e_t`.
pub fn ar_fit(series: &BeliefSeries) -> Result<ArFit> {
    let t = series.len();
    if t < 2 {
        return Err(Error::InvalidDataset("need at least two points".into()));
    }
    let pi = &series.belief;
    let a = &series.driver[..t - 1];
    let denom: f64 = a.iter().map(|v| v * v).sum();
    if denom == 0.0 {
        return Err(Error::DegenerateRegressor);
    }
    let num: f64 = (0..t - 1).map(|k| (pi[k + 1] - pi[k]) * a[k]).sum();
    let b = num / denom;
    let residuals: Vec<f64> = (0..t - 1).map(|k| pi[k + 1] - pi[k] - b * a[k]).collect();
    let errors: Vec<f64> = (0..t - 1)
        .filter(|&k| pi[k + 1] != 0.0)
        .map(|k| ((pi[k] + b * a[k]) - pi[k + 1]).abs() / pi[k + 1].abs())
        .collect();
    let mape = if errors.is_empty() {
        f64::NAN
    } else {
        errors.iter().sum::<f64>() / errors.len() as f64
    };
    Ok(ArFit { b, residuals, mape })
}
