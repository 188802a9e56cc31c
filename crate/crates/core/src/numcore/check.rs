//! Central finite-difference check of analytic gradients.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{stream_rng, uniform_index, Gradients, Graph, GraphError, Inputs, ParamSet, Stream, Var};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdOptions {
    /// Central-difference step `h`.
    pub step: f64,
    /// Maximum relative error per component.
    pub tolerance: f64,
    /// Components whose absolute error is below this count as exact.
    pub abs_floor: f64,
    /// Check at most this many randomly chosen components per tensor.
    pub max_coords: Option<usize>,
    pub seed: u64,
}

impl Default for FdOptions {
    fn default() -> Self {
        FdOptions {
            step: 1e-5,
            tolerance: 1e-4,
            abs_floor: 1e-8,
            max_coords: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FdEntry {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FdReport {
    pub entries: Vec<FdEntry>,
}

impl FdReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &FdEntry> {
        self.entries.iter().filter(|e| !e.passed)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.entries.iter().map(|e| e.max_rel_error).fold(0.0, f64::max)
    }
}

/// Compare `∂output/∂θ` from [`Graph::backward`] against
/// `(f(θ+h) − f(θ−h)) / 2h` for every parameter tensor in `params`.
///
/// The graph is replayed from scratch for each perturbation; its structure
/// (including any sampled indices baked into it) stays fixed.
pub fn finite_difference_check(
    graph: &Graph,
    params: &ParamSet,
    inputs: &Inputs,
    output: Var,
    opts: &FdOptions,
) -> Result<FdReport, GraphError> {
    let mut g = graph.clone();
    g.forward_all(params, inputs)?;
    let mut analytic = Gradients::zeros_like(params);
    g.backward(output, 1.0, &mut analytic)?;

    let mut probe = params.clone();
    let mut rng = stream_rng(opts.seed, Stream::Test, 0, 0);
    let mut entries = Vec::with_capacity(params.len());
    for id in params.ids() {
        let n = params.get(id).len();
        let coords: Vec<usize> = match opts.max_coords {
            Some(k) if k < n => (0..k).map(|_| uniform_index(n, &mut rng)).collect(),
            _ => (0..n).collect(),
        };
        let mut max_rel: f64 = 0.0;
        let mut max_abs: f64 = 0.0;
        for &k in &coords {
            let orig = params.get(id).data[k];
            probe.get_mut(id).data[k] = orig + opts.step;
            g.forward_all(&probe, inputs)?;
            let plus = g.scalar(output);
            probe.get_mut(id).data[k] = orig - opts.step;
            g.forward_all(&probe, inputs)?;
            let minus = g.scalar(output);
            probe.get_mut(id).data[k] = orig;

            let numeric = (plus - minus) / (2.0 * opts.step);
            let a = analytic.get(id)[k];
            let abs = (a - numeric).abs();
            max_abs = max_abs.max(abs);
            if abs > opts.abs_floor {
                max_rel = max_rel.max(abs / a.abs().max(numeric.abs()));
            }
        }
        entries.push(FdEntry {
            name: params.name(id).to_string(),
            checked: coords.len(),
            max_rel_error: max_rel,
            max_abs_error: max_abs,
            passed: max_rel <= opts.tolerance,
        });
    }
    Ok(FdReport { entries })
}
