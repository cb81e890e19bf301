//! Marking strategies. Both shipped strategies satisfy
//! `max_{unmarked} eta <= min_{marked} eta`, hence the marking property with
//! `M(t) = t`.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::mesh::MarkSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    Doerfler,
    Maximum,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarkingConfig {
    pub strategy: Strategy,
    pub theta: f64,
}

impl MarkingConfig {
    pub fn new(strategy: Strategy, theta: f64) -> Result<Self> {
        let cfg = Self { strategy, theta };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Doerfler needs `0 < theta <= 1`, maximum `0 <= theta <= 1`.
    pub fn validate(&self) -> Result<()> {
        let ok = match self.strategy {
            Strategy::Doerfler => self.theta > 0.0 && self.theta <= 1.0,
            Strategy::Maximum => (0.0..=1.0).contains(&self.theta),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "theta = {} out of range for {:?}",
                self.theta, self.strategy
            )))
        }
    }

    pub fn mark(&self, indicators: &[f64]) -> Result<MarkSet> {
        match self.strategy {
            Strategy::Doerfler => mark_doerfler(indicators, self.theta),
            Strategy::Maximum => mark_maximum(indicators, self.theta),
        }
    }
}

/// Element indices sorted by decreasing indicator, ties by ascending index.
fn sorted_desc(indicators: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..indicators.len()).collect();
    order.sort_by(|&i, &j| match indicators[j].total_cmp(&indicators[i]) {
        Ordering::Equal => i.cmp(&j),
        o => o,
    });
    order
}

/// Minimal prefix of the sorted indicators with `sum eta(K)^2 >= theta eta^2`.
pub fn mark_doerfler(indicators: &[f64], theta: f64) -> Result<MarkSet> {
    MarkingConfig {
        strategy: Strategy::Doerfler,
        theta,
    }
    .validate()?;
    let order = sorted_desc(indicators);
    // summed in sorted order so that theta = 1 reaches the total exactly
    let total: f64 = order.iter().map(|&k| indicators[k] * indicators[k]).sum();
    if total == 0.0 {
        return Ok(MarkSet::empty());
    }
    let goal = theta * total;
    let mut acc = 0.0;
    let mut marked = Vec::new();
    for k in order {
        acc += indicators[k] * indicators[k];
        marked.push(k);
        if acc >= goal {
            break;
        }
    }
    Ok(MarkSet::new(marked))
}

/// `{K : eta(K) >= (1 - theta) max eta}`; empty if all indicators vanish.
pub fn mark_maximum(indicators: &[f64], theta: f64) -> Result<MarkSet> {
    MarkingConfig {
        strategy: Strategy::Maximum,
        theta,
    }
    .validate()?;
    let max = indicators.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(MarkSet::empty());
    }
    let threshold = (1.0 - theta) * max;
    Ok(MarkSet::new(
        (0..indicators.len())
            .filter(|&k| indicators[k] >= threshold)
            .collect(),
    ))
}

/// `max_{unmarked} eta <= M(max_{marked} eta)`. An empty mark set is accepted
/// only when every indicator vanishes.
pub fn verify_marking_property(
    indicators: &[f64],
    marks: &MarkSet,
    m: impl Fn(f64) -> f64,
) -> bool {
    if marks.iter().any(|k| k >= indicators.len()) {
        return false;
    }
    if marks.is_empty() {
        return indicators.iter().all(|&e| e == 0.0);
    }
    let max_marked = marks.iter().map(|k| indicators[k]).fold(0.0, f64::max);
    let max_unmarked = (0..indicators.len())
        .filter(|&k| !marks.contains(k))
        .map(|k| indicators[k])
        .fold(0.0, f64::max);
    max_unmarked <= m(max_marked)
}

/// `max_{unmarked} eta <= min_{marked} eta`.
pub fn unmarked_dominated(indicators: &[f64], marks: &MarkSet) -> bool {
    let min_marked = marks
        .iter()
        .map(|k| indicators[k])
        .fold(f64::INFINITY, f64::min);
    (0..indicators.len())
        .filter(|&k| !marks.contains(k))
        .all(|k| indicators[k] <= min_marked)
}
