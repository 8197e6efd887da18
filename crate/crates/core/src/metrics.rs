//! Financial performance metrics over per-step log-returns.
//!
//! Sharpe and Sortino are per step and not annualized, use population
//! standard deviations and a zero risk-free rate. Undefined values are `None`
//! and serialize as JSON `null`.

use serde::Serialize;

pub const DEFAULT_INITIAL_CAPITAL: f64 = 1000.0;

/// `e_t = e_0 * exp(sum_{k <= t} r_k)`; one more point than returns.
#[derive(Debug, Clone, PartialEq)]
pub struct EquityCurve {
    initial: f64,
    returns: Vec<f64>,
    values: Vec<f64>,
}

impl EquityCurve {
    /// # Panics
    /// If `initial` is not positive and finite.
    pub fn new(initial: f64, returns: &[f64]) -> Self {
        assert!(initial > 0.0 && initial.is_finite(), "initial capital must be positive");
        let mut values = Vec::with_capacity(returns.len() + 1);
        values.push(initial);
        let mut cum = 0.0;
        for r in returns {
            cum += r;
            values.push(initial * cum.exp());
        }
        Self {
            initial,
            returns: returns.to_vec(),
            values,
        }
    }

    pub fn from_returns(returns: &[f64]) -> Self {
        Self::new(DEFAULT_INITIAL_CAPITAL, returns)
    }

    pub fn initial(&self) -> f64 {
        self.initial
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `100 * (e_T / e_0 - 1)`.
pub fn total_return(curve: &EquityCurve) -> f64 {
    let sum: f64 = curve.returns.iter().sum();
    100.0 * sum.exp_m1()
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn population_std(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Spreads at or below this fraction of the largest magnitude count as zero,
/// so rounding noise on equal returns does not produce huge ratios.
pub const DEGENERATE_SPREAD: f64 = 1e-10;

/// Population standard deviation, or `None` when it is degenerate.
fn spread(x: &[f64]) -> Option<f64> {
    let sd = population_std(x);
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (sd > DEGENERATE_SPREAD * scale).then_some(sd)
}

/// `mean / std`; `None` with fewer than two returns or zero spread.
pub fn sharpe(returns: &[f64]) -> Option<f64> {
    if returns.len() < 2 {
        return None;
    }
    spread(returns).map(|sd| mean(returns) / sd)
}

/// `mean / std(strictly negative returns)`; `None` without negatives or when
/// the negatives have zero spread.
pub fn sortino(returns: &[f64]) -> Option<f64> {
    let neg: Vec<f64> = returns.iter().copied().filter(|&r| r < 0.0).collect();
    if neg.is_empty() {
        return None;
    }
    spread(&neg).map(|sd| mean(returns) / sd)
}

/// Largest relative fall from a running peak, in percent.
pub fn max_drawdown(curve: &EquityCurve) -> f64 {
    let mut peak = f64::MIN;
    let mut worst = 0.0f64;
    for &e in &curve.values {
        peak = peak.max(e);
        worst = worst.max((peak - e) / peak);
    }
    100.0 * worst
}

/// Same as [`max_drawdown`] on raw equity values.
pub fn max_drawdown_values(values: &[f64]) -> f64 {
    let mut peak = f64::MIN;
    let mut worst = 0.0f64;
    for &e in values {
        peak = peak.max(e);
        worst = worst.max((peak - e) / peak);
    }
    100.0 * worst
}

/// Percentage of positive rewards among nonzero ones; `None` if all are zero.
pub fn hit_rate(rewards: &[f64]) -> Option<f64> {
    let resolved = rewards.iter().filter(|&&r| r != 0.0).count();
    let wins = rewards.iter().filter(|&&r| r > 0.0).count();
    (resolved > 0).then(|| 100.0 * wins as f64 / resolved as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub steps: usize,
    pub initial_capital: f64,
    pub final_equity: f64,
    pub total_return_pct: f64,
    pub sharpe: Option<f64>,
    pub sortino: Option<f64>,
    pub max_drawdown_pct: f64,
    pub hit_rate_pct: Option<f64>,
}

impl MetricReport {
    pub fn from_curve(curve: &EquityCurve) -> Self {
        Self {
            steps: curve.returns.len(),
            initial_capital: curve.initial,
            final_equity: *curve.values.last().expect("nonempty"),
            total_return_pct: total_return(curve),
            sharpe: sharpe(&curve.returns),
            sortino: sortino(&curve.returns),
            max_drawdown_pct: max_drawdown(curve),
            hit_rate_pct: hit_rate(&curve.returns),
        }
    }
}
