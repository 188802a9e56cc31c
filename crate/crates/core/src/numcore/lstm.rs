use alloc::format;
use alloc::string::String;

use super::{xavier_init, Graph, GraphError, ParamId, ParamSet, StreamRng, Tensor, Var};

/// Parameters of a single-layer LSTM cell.
///
/// The weight is `4H × (in + H)` acting on `[x, h]`; gate blocks are stacked
/// in the order input, forget, candidate, output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LstmCell {
    pub weight: ParamId,
    pub bias: ParamId,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

/// Hidden and cell state of a batch, each `B × H`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmState {
    pub h: Var,
    pub c: Var,
}

impl LstmCell {
    /// Adds `{prefix}.w` (Xavier) and `{prefix}.b` (zeros) to `params`.
    pub fn register(
        params: &mut ParamSet,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut StreamRng,
    ) -> Self {
        let w = xavier_init(&[4 * hidden_dim, input_dim + hidden_dim], rng)
            .expect("positive lstm dimensions");
        let b = Tensor::zeros(&[4 * hidden_dim]).expect("positive lstm dimensions");
        LstmCell {
            weight: params.add(format!("{prefix}.w"), w),
            bias: params.add(format!("{prefix}.b"), b),
            input_dim,
            hidden_dim,
        }
    }

    pub fn zero_state(&self, g: &mut Graph, rows: usize) -> LstmState {
        LstmState {
            h: g.zeros(rows, self.hidden_dim),
            c: g.zeros(rows, self.hidden_dim),
        }
    }

    pub fn step(
        &self,
        g: &mut Graph,
        params: &ParamSet,
        x: Var,
        state: LstmState,
    ) -> Result<LstmState, GraphError> {
        lstm_cell(g, params, self, x, state)
    }
}

fn dim_error(g: &Graph, what: &str, got: (usize, usize), want: String) -> GraphError {
    GraphError::ShapeMismatch {
        node: g.len(),
        op: "lstm_cell",
        detail: format!("{what} is {}x{}, expected {want}", got.0, got.1),
    }
}

/// One LSTM step:
///
/// ```text
/// [i f g o] = W·[x, h] + b
/// c' = σ(f)⊙c + σ(i)⊙tanh(g)
/// h' = σ(o)⊙tanh(c')
/// ```
pub fn lstm_cell(
    g: &mut Graph,
    params: &ParamSet,
    cell: &LstmCell,
    x: Var,
    state: LstmState,
) -> Result<LstmState, GraphError> {
    let hd = cell.hidden_dim;
    let (rows, xin) = g.shape(x);
    if xin != cell.input_dim {
        return Err(dim_error(g, "input", (rows, xin), format!("{rows}x{}", cell.input_dim)));
    }
    for (what, v) in [("hidden", state.h), ("cell", state.c)] {
        if g.shape(v) != (rows, hd) {
            return Err(dim_error(g, what, g.shape(v), format!("{rows}x{hd}")));
        }
    }
    let w = g.param(params, cell.weight);
    let b = g.param(params, cell.bias);
    let xh = g.concat(&[x, state.h])?;
    let z = g.affine(w, xh, Some(b))?;
    let zi = g.slice_cols(z, 0, hd)?;
    let zf = g.slice_cols(z, hd, hd)?;
    let zg = g.slice_cols(z, 2 * hd, hd)?;
    let zo = g.slice_cols(z, 3 * hd, hd)?;
    let i = g.sigmoid(zi);
    let f = g.sigmoid(zf);
    let cand = g.tanh(zg);
    let o = g.sigmoid(zo);
    let keep = g.mul(f, state.c)?;
    let write = g.mul(i, cand)?;
    let c = g.add(keep, write)?;
    let tc = g.tanh(c);
    let h = g.mul(o, tc)?;
    Ok(LstmState { h, c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{stream_rng, Inputs, Stream};
    use alloc::vec;

    fn cell(input_dim: usize, hidden: usize) -> (ParamSet, LstmCell) {
        let mut params = ParamSet::new();
        let mut rng = stream_rng(1, Stream::Init, 0, 0);
        let cell = LstmCell::register(&mut params, "cell", input_dim, hidden, &mut rng);
        (params, cell)
    }

    #[test]
    fn zero_everything_gives_zero_state() {
        let (mut params, cell) = cell(3, 4);
        params.get_mut(cell.weight).data.iter_mut().for_each(|v| *v = 0.0);
        let mut g = Graph::new();
        let x = g.zeros(1, 3);
        let s0 = cell.zero_state(&mut g, 1);
        let s1 = cell.step(&mut g, &params, x, s0).unwrap();
        g.forward(&params, &Inputs::new()).unwrap();
        assert_eq!(g.value(s1.h), &[0.0; 4]);
        assert_eq!(g.value(s1.c), &[0.0; 4]);
    }

    #[test]
    fn saturated_forget_gate_keeps_cell() {
        let (mut params, cell) = cell(2, 3);
        params.get_mut(cell.weight).data.iter_mut().for_each(|v| *v = 0.0);
        let bias = &mut params.get_mut(cell.bias).data;
        bias[3..6].iter_mut().for_each(|v| *v = 20.0);
        let mut g = Graph::new();
        let x = g.constant(1, 2, vec![0.7, -0.4]).unwrap();
        let h = g.constant(1, 3, vec![0.1, 0.2, 0.3]).unwrap();
        let c = g.constant(1, 3, vec![0.9, -0.5, 0.25]).unwrap();
        let s1 = cell.step(&mut g, &params, x, LstmState { h, c }).unwrap();
        g.forward(&params, &Inputs::new()).unwrap();
        for (a, b) in g.value(s1.c).iter().zip([0.9, -0.5, 0.25]) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn wrong_input_width_is_rejected() {
        let (params, cell) = cell(3, 4);
        let mut g = Graph::new();
        let x = g.zeros(1, 5);
        let s0 = cell.zero_state(&mut g, 1);
        assert!(matches!(
            cell.step(&mut g, &params, x, s0),
            Err(GraphError::ShapeMismatch { op: "lstm_cell", .. })
        ));
    }
}
