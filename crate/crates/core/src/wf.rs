//! Water-filling power allocation over parallel subcarriers.
//!
//! Given CNRs `c_n`, the allocation maximizing `Σ log₂(1 + c_n p_n)` under
//! `Σ p_n ≤ P` is `p_n = (1/c_u − 1/c_n)⁺`, with the cut-off CNR `c_u` set so
//! the budget is met exactly. The water level `1/c_u` is found with the
//! sorted active-set method, so the result is exact up to rounding.

use crate::error::{Error, Result};
use crate::model::PowerAllocation;

/// CNRs at or below this are treated as dead subcarriers.
pub const MIN_CNR: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq)]
pub struct WaterfillResult {
    pub p: PowerAllocation,
    /// Cut-off CNR `c_u`; `+∞` when no subcarrier is usable.
    pub cutoff_cnr: f64,
    /// Water level `1/c_u`.
    pub water_level: f64,
    /// Subcarriers with positive power, in increasing index order.
    pub active_set: Vec<usize>,
    /// Every CNR was zero, so nothing was allocated.
    pub degenerate: bool,
}

pub fn waterfill(c: &[f64], total_power: f64) -> Result<WaterfillResult> {
    if !(total_power > 0.0 && total_power.is_finite()) {
        return Err(Error::invalid("total_power must be positive and finite"));
    }
    if let Some(bad) = c.iter().find(|&&x| !(x >= 0.0)) {
        return Err(Error::invalid(format!("CNR must be nonnegative, got {bad}")));
    }

    let mut order: Vec<usize> = (0..c.len()).filter(|&i| c[i] > MIN_CNR).collect();
    if order.is_empty() {
        return Ok(WaterfillResult {
            p: PowerAllocation::zeros(c.len()),
            cutoff_cnr: f64::INFINITY,
            water_level: 0.0,
            active_set: Vec::new(),
            degenerate: true,
        });
    }
    // Strongest first; ties keep index order so permuted inputs see the same
    // sequence of values and produce bit-identical powers.
    order.sort_by(|&a, &b| c[b].total_cmp(&c[a]));

    let inv = |i: usize| 1.0 / c[i];
    let mut inv_sum = 0.0;
    let mut active = 0;
    let mut level = 0.0;
    for (k, &i) in order.iter().enumerate() {
        let trial = (total_power + inv_sum + inv(i)) / (k + 1) as f64;
        if k > 0 && trial <= inv(i) {
            break;
        }
        inv_sum += inv(i);
        active = k + 1;
        level = trial;
    }
    let active_idx = &order[..active];

    // One refinement pass absorbs the rounding left by the subtraction.
    let spent: f64 = active_idx.iter().map(|&i| level - inv(i)).sum();
    level += (total_power - spent) / active as f64;

    let mut p = vec![0.0; c.len()];
    for &i in active_idx {
        p[i] = (level - inv(i)).max(0.0);
    }
    let mut active_set: Vec<usize> = active_idx.iter().copied().filter(|&i| p[i] > 0.0).collect();
    active_set.sort_unstable();

    Ok(WaterfillResult {
        p: PowerAllocation::new(p, total_power)?,
        cutoff_cnr: 1.0 / level,
        water_level: level,
        active_set,
        degenerate: false,
    })
}

/// `Σ log₂(1 + c_n p_n)`.
pub fn log_rate(c: &[f64], p: &[f64]) -> f64 {
    c.iter()
        .zip(p)
        .map(|(&cn, &pn)| (cn * pn).ln_1p())
        .sum::<f64>()
        / std::f64::consts::LN_2
}
