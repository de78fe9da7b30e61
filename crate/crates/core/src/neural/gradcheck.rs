use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use crate::error::Result;

#[derive(Clone, Copy, Debug)]
pub struct GradCheckConfig {
    pub eps: f64,
    /// Coordinates probed per tensor (all of them when the tensor is smaller).
    pub coords_per_tensor: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig { eps: 1e-5, coords_per_tensor: 6, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst: Option<(String, usize)>,
    pub coords_checked: usize,
}

/// Compares tape gradients against central differences on sampled
/// coordinates of `ids`. Error per coordinate is
/// `|analytic - numeric| / max(1, |analytic|)`.
pub fn grad_check<F>(params: &ParamStore, ids: &[ParamId], build: F, cfg: GradCheckConfig) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<'_>) -> Result<Var>,
{
    let analytic = {
        let mut tape = Tape::new(params);
        let loss = build(&mut tape)?;
        tape.backward(loss)?
    };
    let eval = |store: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new(store);
        let loss = build(&mut tape)?;
        Ok(tape.scalar(loss))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut probe = params.clone();
    let mut report = GradCheckReport { max_rel_error: 0.0, worst: None, coords_checked: 0 };
    for &id in ids {
        let n = params.get(id).len();
        let coords: Vec<usize> = if n <= cfg.coords_per_tensor {
            (0..n).collect()
        } else {
            sample(&mut rng, n, cfg.coords_per_tensor).into_vec()
        };
        let dense = analytic.dense(params, id);
        for i in coords {
            let orig = probe.get(id).data[i];
            probe.get_mut(id).data[i] = orig + cfg.eps;
            let up = eval(&probe)?;
            probe.get_mut(id).data[i] = orig - cfg.eps;
            let down = eval(&probe)?;
            probe.get_mut(id).data[i] = orig;
            let numeric = (up - down) / (2.0 * cfg.eps);
            let a = dense.data[i];
            let err = (a - numeric).abs() / a.abs().max(1.0);
            report.coords_checked += 1;
            if err > report.max_rel_error || err.is_nan() {
                report.max_rel_error = err;
                report.worst = Some((params.name(id).to_string(), i));
            }
        }
    }
    Ok(report)
}
