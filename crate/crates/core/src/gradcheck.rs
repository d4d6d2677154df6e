//! Central finite-difference checks for tape gradients.

use crate::error::Result;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

pub const DEFAULT_STEP: f64 = 1e-5;

/// Gradients smaller than this are compared absolutely rather than relatively.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GradCheck {
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|, RELATIVE_FLOOR)`.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub entries_checked: usize,
    /// Largest numeric gradient magnitude seen; a zero here means the check was vacuous.
    pub max_abs_gradient: f64,
}

impl GradCheck {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance && self.max_abs_gradient > 0.0
    }
}

/// Compares the tape gradient of `f` with respect to each of `inputs`
/// against central differences with step `h`.
///
/// `f` receives a fresh tape with every input bound as a trainable leaf
/// and must return a one-element loss. It must be deterministic.
pub fn check<F>(inputs: &[Tensor], h: f64, f: F) -> Result<GradCheck>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.param(t.clone())).collect();
        let loss = f(&mut tape, &vars)?;
        tape.value(loss).item()
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    let grads = tape.backward(loss)?;

    let mut report = GradCheck {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        entries_checked: 0,
        max_abs_gradient: 0.0,
    };
    let mut probe: Vec<Tensor> = inputs.to_vec();
    for (t, &var) in vars.iter().enumerate() {
        let analytic = grads.get(var).map(|g| g.data().to_vec());
        for i in 0..inputs[t].numel() {
            let orig = inputs[t].data()[i];
            probe[t].data_mut()[i] = orig + h;
            let plus = eval(&probe)?;
            probe[t].data_mut()[i] = orig - h;
            let minus = eval(&probe)?;
            probe[t].data_mut()[i] = orig;

            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic.as_ref().map_or(0.0, |g| g[i]);
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
            report.max_abs_error = report.max_abs_error.max(abs);
            report.max_rel_error = report.max_rel_error.max(rel);
            report.max_abs_gradient = report.max_abs_gradient.max(numeric.abs());
            report.entries_checked += 1;
        }
    }
    Ok(report)
}
