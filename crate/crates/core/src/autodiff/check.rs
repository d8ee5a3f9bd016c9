//! Central finite-difference gradient checking.
//!
//! Networks built from ReLU and max pooling are only piecewise smooth. A
//! coordinate whose `±step` interval straddles a hinge has no meaningful
//! central difference, so each coordinate is probed at `step` and `step / 2`:
//! if the two differences disagree by more than rounding noise, the
//! coordinate is counted in [`CheckReport::hinges`] instead of being compared.

use alloc::vec::Vec;

use super::{AutodiffError, Graph, ParamId, ParamStore, Tensor, Var};

/// Denominator floor for relative errors so that near-zero gradients are
/// compared on an absolute scale.
pub const RELATIVE_GUARD: f64 = 1e-6;

/// `|a - n| / max(|a|, |n|, RELATIVE_GUARD)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_GUARD)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckReport {
    pub max_relative_error: f64,
    /// Coordinates compared against the analytic gradient.
    pub checked: usize,
    /// Coordinates skipped because a hinge lies within the step.
    pub hinges: usize,
}

impl CheckReport {
    fn new() -> Self {
        Self {
            max_relative_error: 0.0,
            checked: 0,
            hinges: 0,
        }
    }

    fn record(&mut self, analytic: f64, numeric: Option<f64>) {
        match numeric {
            Some(n) => {
                self.max_relative_error = self.max_relative_error.max(relative_error(analytic, n));
                self.checked += 1;
            }
            None => self.hinges += 1,
        }
    }
}

/// Central difference of `f` around 0, or `None` when halving the step
/// changes it by more than rounding noise plus smooth truncation error.
fn probe<E>(mut f: impl FnMut(f64) -> Result<f64, E>, step: f64) -> Result<Option<f64>, E> {
    let (p1, m1) = (f(step)?, f(-step)?);
    let (p2, m2) = (f(step / 2.0)?, f(-step / 2.0)?);
    let wide = (p1 - m1) / (2.0 * step);
    let narrow = (p2 - m2) / step;
    let scale = p1.abs().max(m1.abs()).max(p2.abs()).max(m2.abs());
    let noise = 8.0 * f64::EPSILON * scale / step;
    let tolerance = noise + 1e-6 * wide.abs().max(narrow.abs()).max(RELATIVE_GUARD);
    Ok(((wide - narrow).abs() <= tolerance).then_some(wide))
}

/// Checks every input element of a scalar function built by `f`.
pub fn check_inputs<F>(inputs: &[Tensor], step: f64, f: F) -> Result<CheckReport, AutodiffError>
where
    F: Fn(&mut Graph<'_>, &[Var]) -> Result<Var, AutodiffError>,
{
    inputs_impl(Graph::new, inputs, step, f)
}

/// Like [`check_inputs`] for a function that also reads parameters from
/// `store` (held fixed).
pub fn check_inputs_with<F>(
    store: &ParamStore,
    inputs: &[Tensor],
    step: f64,
    f: F,
) -> Result<CheckReport, AutodiffError>
where
    F: Fn(&mut Graph<'_>, &[Var]) -> Result<Var, AutodiffError>,
{
    inputs_impl(|| Graph::with_params(store), inputs, step, f)
}

fn inputs_impl<'p, G, F>(graph: G, inputs: &[Tensor], step: f64, f: F) -> Result<CheckReport, AutodiffError>
where
    G: Fn() -> Graph<'p>,
    F: Fn(&mut Graph<'_>, &[Var]) -> Result<Var, AutodiffError>,
{
    let eval = |values: &[Tensor]| -> Result<f64, AutodiffError> {
        let mut g = graph();
        let vars: Vec<Var> = values.iter().map(|t| g.constant(t.clone())).collect();
        let out = f(&mut g, &vars)?;
        Ok(g.value(out).item())
    };
    let mut g = graph();
    let vars: Vec<Var> = inputs.iter().map(|t| g.variable(t.clone())).collect();
    let loss = f(&mut g, &vars)?;
    let grads = g.backward(loss)?;
    let mut report = CheckReport::new();
    let mut work: Vec<Tensor> = inputs.to_vec();
    for (i, v) in vars.iter().enumerate() {
        let analytic = grads.wrt(*v).map(|t| t.data().to_vec());
        for k in 0..inputs[i].len() {
            let orig = inputs[i].data()[k];
            let numeric = probe(
                |d| {
                    work[i].data_mut()[k] = orig + d;
                    eval(&work)
                },
                step,
            )?;
            work[i].data_mut()[k] = orig;
            report.record(analytic.as_ref().map_or(0.0, |a| a[k]), numeric);
        }
    }
    Ok(report)
}

/// Checks the listed `(parameter, element)` coordinates of a scalar function
/// of the parameters.
pub fn check_params<F>(
    store: &ParamStore,
    coords: &[(ParamId, usize)],
    step: f64,
    f: F,
) -> Result<CheckReport, AutodiffError>
where
    F: Fn(&mut Graph<'_>) -> Result<Var, AutodiffError>,
{
    let grads = {
        let mut g = Graph::with_params(store);
        let loss = f(&mut g)?;
        g.backward(loss)?
    };
    let eval = |s: &ParamStore| -> Result<f64, AutodiffError> {
        let mut g = Graph::with_params(s);
        let out = f(&mut g)?;
        Ok(g.value(out).item())
    };
    let mut work = store.clone();
    let mut report = CheckReport::new();
    for &(id, k) in coords {
        let analytic = grads.param(id).map_or(0.0, |t| t.data()[k]);
        let orig = store.get(id).value().data()[k];
        let numeric = probe(
            |d| {
                work.get_mut(id).value_mut().data_mut()[k] = orig + d;
                eval(&work)
            },
            step,
        )?;
        work.get_mut(id).value_mut().data_mut()[k] = orig;
        report.record(analytic, numeric);
    }
    Ok(report)
}
