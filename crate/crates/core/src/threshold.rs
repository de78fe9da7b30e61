//! Adaptive edge-dropping thresholds.
//!
//! Each collection round raises every threshold by its increment; every
//! `failure_limit`-th augmentation failure lowers all of them together by
//! their decrements and resets the counter. Successes leave the state alone
//! (the counter is not reset on success).
//!
//! Thresholds are kept as integer multiples of 1e-6 so sequences of
//! increments and decrements are exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SCALE: f64 = 1e6;

fn to_units(x: f64) -> i64 {
    (x * SCALE).round() as i64
}

fn from_units(u: i64) -> f64 {
    u as f64 / SCALE
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdConfig {
    pub initial: f64,
    pub increment: f64,
    pub decrement: f64,
    pub lower: f64,
    pub upper: f64,
    pub failure_limit: u32,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig { initial: 0.49, increment: 0.04, decrement: 0.005, lower: 0.49, upper: 0.95, failure_limit: 10 }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lower <= self.initial
            && self.initial <= self.upper
            && self.increment >= 0.0
            && self.decrement >= 0.0
            && self.failure_limit >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("inconsistent threshold constants {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdState {
    names: Vec<String>,
    eta: Vec<i64>,
    increment: Vec<i64>,
    decrement: Vec<i64>,
    lower: i64,
    upper: i64,
    failures: u32,
    failure_limit: u32,
}

impl ThresholdState {
    /// One threshold per scored edge type, all sharing `cfg`.
    pub fn new(names: Vec<String>, cfg: &ThresholdConfig) -> Result<Self> {
        cfg.validate()?;
        let n = names.len();
        Ok(ThresholdState {
            names,
            eta: vec![to_units(cfg.initial); n],
            increment: vec![to_units(cfg.increment); n],
            decrement: vec![to_units(cfg.decrement); n],
            lower: to_units(cfg.lower),
            upper: to_units(cfg.upper),
            failures: 0,
            failure_limit: cfg.failure_limit,
        })
    }

    /// Overrides per-type step sizes.
    pub fn with_steps(mut self, increments: &[f64], decrements: &[f64]) -> Self {
        assert_eq!(increments.len(), self.names.len());
        assert_eq!(decrements.len(), self.names.len());
        self.increment = increments.iter().map(|&x| to_units(x)).collect();
        self.decrement = decrements.iter().map(|&x| to_units(x)).collect();
        self
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn eta(&self, r: usize) -> f64 {
        from_units(self.eta[r])
    }

    pub fn etas(&self) -> Vec<f64> {
        self.eta.iter().map(|&u| from_units(u)).collect()
    }

    /// Forces every threshold to `value`, clamped into bounds.
    pub fn set_all(&mut self, value: f64) {
        let u = to_units(value).clamp(self.lower, self.upper);
        self.eta.iter_mut().for_each(|e| *e = u);
    }

    pub fn failures(&self) -> u32 {
        self.failures
    }

    pub fn failure_limit(&self) -> u32 {
        self.failure_limit
    }

    pub fn bounds(&self) -> (f64, f64) {
        (from_units(self.lower), from_units(self.upper))
    }

    /// Start of a collection round: raise each threshold and clear failures.
    pub fn round_begin(&mut self) {
        for (e, inc) in self.eta.iter_mut().zip(&self.increment) {
            *e = (*e + inc).min(self.upper);
        }
        self.failures = 0;
    }

    /// Counts one failed augmentation. Returns `true` when this failure
    /// triggered a decrement.
    pub fn record_failure(&mut self) -> bool {
        self.failures += 1;
        if self.failures >= self.failure_limit {
            for (e, dec) in self.eta.iter_mut().zip(&self.decrement) {
                *e = (*e - dec).max(self.lower);
            }
            self.failures = 0;
            true
        } else {
            false
        }
    }

    pub fn record_success(&mut self) {}
}
