//! Bidirectional LSTM encoder on the gradient tape.
//!
//! Gate layout along the `4h` axis is input, forget, cell, output.

use super::params::{Init, ParamId, ParamSpec, ParamStore};
use super::tape::{Tape, Var};
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmParams {
    /// `[d_in, 4h]`
    pub w_input: ParamId,
    /// `[h, 4h]`
    pub w_hidden: ParamId,
    /// `[1, 4h]`
    pub bias: ParamId,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BiLstmParams {
    pub forward: LstmParams,
    pub backward: LstmParams,
}

impl BiLstmParams {
    pub fn specs(prefix: &str, input_dim: usize, hidden_dim: usize) -> Vec<ParamSpec> {
        ["fwd", "bwd"]
            .iter()
            .flat_map(|dir| {
                [
                    ParamSpec::new(format!("{prefix}.{dir}.w_input"), &[input_dim, 4 * hidden_dim], Init::XavierUniform),
                    ParamSpec::new(format!("{prefix}.{dir}.w_hidden"), &[hidden_dim, 4 * hidden_dim], Init::XavierUniform),
                    ParamSpec::new(format!("{prefix}.{dir}.bias"), &[1, 4 * hidden_dim], Init::Zeros),
                ]
            })
            .collect()
    }

    pub fn lookup(store: &ParamStore, prefix: &str) -> Result<Self, NnError> {
        let one = |dir: &str| -> Result<LstmParams, NnError> {
            let w_input = store.id(&format!("{prefix}.{dir}.w_input"))?;
            let w_hidden = store.id(&format!("{prefix}.{dir}.w_hidden"))?;
            let bias = store.id(&format!("{prefix}.{dir}.bias"))?;
            let shape = store.value(w_input).shape();
            Ok(LstmParams {
                w_input,
                w_hidden,
                bias,
                input_dim: shape[0],
                hidden_dim: shape[1] / 4,
            })
        };
        Ok(Self {
            forward: one("fwd")?,
            backward: one("bwd")?,
        })
    }

    pub fn output_dim(&self) -> usize {
        2 * self.forward.hidden_dim
    }
}

/// Runs one direction over the rows of `inputs`; returns `[T, h]` in
/// input order.
fn run_direction(tape: &mut Tape<'_>, p: &LstmParams, inputs: Var, reverse: bool) -> Result<Var, NnError> {
    let steps = tape.value(inputs).rows();
    let h = p.hidden_dim;
    let w_in = tape.param(p.w_input);
    let w_hid = tape.param(p.w_hidden);
    let bias = tape.param(p.bias);
    let projected = tape.matmul(inputs, w_in)?;
    let projected = tape.add_row(projected, bias)?;

    let mut outputs: Vec<Option<Var>> = vec![None; steps];
    let mut state: Option<(Var, Var)> = None;
    let order: Vec<usize> = if reverse { (0..steps).rev().collect() } else { (0..steps).collect() };
    for t in order {
        let mut z = tape.row(projected, t)?;
        if let Some((h_prev, _)) = state {
            let rec = tape.matmul(h_prev, w_hid)?;
            z = tape.add(z, rec)?;
        }
        let i = tape.slice_cols(z, 0, h)?;
        let i = tape.sigmoid(i);
        let g = tape.slice_cols(z, 2 * h, 3 * h)?;
        let g = tape.tanh(g);
        let o = tape.slice_cols(z, 3 * h, 4 * h)?;
        let o = tape.sigmoid(o);
        let mut c = tape.mul(i, g)?;
        if let Some((_, c_prev)) = state {
            let f = tape.slice_cols(z, h, 2 * h)?;
            let f = tape.sigmoid(f);
            let keep = tape.mul(f, c_prev)?;
            c = tape.add(keep, c)?;
        }
        let c_act = tape.tanh(c);
        let h_t = tape.mul(o, c_act)?;
        outputs[t] = Some(h_t);
        state = Some((h_t, c));
    }
    let outputs: Vec<Var> = outputs.into_iter().map(|o| o.expect("every step visited")).collect();
    tape.concat_rows(&outputs)
}

/// Encodes `[T, d_in]` into `[T, 2h]`: forward states then backward states
/// per position, both starting from zero.
pub fn bilstm_forward(tape: &mut Tape<'_>, p: &BiLstmParams, inputs: Var) -> Result<Var, NnError> {
    let t = tape.value(inputs);
    if t.rows() == 0 {
        return Err(NnError::Shape("bilstm over an empty sequence".into()));
    }
    if t.cols() != p.forward.input_dim {
        return Err(NnError::Shape(format!(
            "bilstm expects {} input features, got {}",
            p.forward.input_dim,
            t.cols()
        )));
    }
    let fwd = run_direction(tape, &p.forward, inputs, false)?;
    let bwd = run_direction(tape, &p.backward, inputs, true)?;
    tape.concat_cols(&[fwd, bwd])
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::nn::{grad_check, init_params, GradCheckOptions, Tensor};

    fn setup(d_in: usize, h: usize, seed: u64) -> (ParamStore, BiLstmParams) {
        let mut store = init_params(&BiLstmParams::specs("enc", d_in, h), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        for id in store.ids().collect::<Vec<_>>() {
            if store.name(id).ends_with("bias") {
                store.value_mut(id).data_mut().iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
            }
        }
        let p = BiLstmParams::lookup(&store, "enc").unwrap();
        (store, p)
    }

    fn sigmoid(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    /// Step-by-step LSTM over `xs` with scalar loops; gate order i, f, g, o.
    fn scalar_lstm(store: &ParamStore, p: &LstmParams, xs: &[Vec<f64>], reverse: bool) -> Vec<Vec<f64>> {
        let h = p.hidden_dim;
        let wi = store.value(p.w_input);
        let wh = store.value(p.w_hidden);
        let b = store.value(p.bias).data();
        let mut hs = vec![0.0; h];
        let mut cs = vec![0.0; h];
        let mut out = vec![Vec::new(); xs.len()];
        let order: Vec<usize> = if reverse { (0..xs.len()).rev().collect() } else { (0..xs.len()).collect() };
        for t in order {
            let mut z = b.to_vec();
            for (j, zj) in z.iter_mut().enumerate() {
                for (k, x) in xs[t].iter().enumerate() {
                    *zj += x * wi.get(k, j);
                }
                for (k, hk) in hs.iter().enumerate() {
                    *zj += hk * wh.get(k, j);
                }
            }
            for u in 0..h {
                let i = sigmoid(z[u]);
                let f = sigmoid(z[h + u]);
                let g = z[2 * h + u].tanh();
                let o = sigmoid(z[3 * h + u]);
                cs[u] = f * cs[u] + i * g;
                hs[u] = o * cs[u].tanh();
            }
            out[t] = hs.clone();
        }
        out
    }

    fn inputs(rows: usize, cols: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..rows).map(|_| (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    }

    fn run(store: &ParamStore, p: &BiLstmParams, xs: &[Vec<f64>]) -> Tensor {
        let mut tape = Tape::new(store);
        let x = tape.constant(Tensor::matrix(xs.len(), xs[0].len(), xs.concat()).unwrap());
        let y = bilstm_forward(&mut tape, p, x).unwrap();
        tape.value(y).clone()
    }

    #[test]
    fn matches_scalar_oracle() {
        let (store, p) = setup(4, 3, 5);
        let xs = inputs(3, 4, 6);
        let y = run(&store, &p, &xs);
        assert_eq!(y.shape(), &[3, 6]);
        let fwd = scalar_lstm(&store, &p.forward, &xs, false);
        let bwd = scalar_lstm(&store, &p.backward, &xs, true);
        for t in 0..3 {
            let expected: Vec<f64> = fwd[t].iter().chain(&bwd[t]).copied().collect();
            for (a, b) in y.row(t).iter().zip(&expected) {
                assert!((a - b).abs() < 1e-12, "step {t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_everything_gives_zero_states() {
        let (mut store, p) = setup(3, 2, 1);
        for id in store.ids().collect::<Vec<_>>() {
            store.value_mut(id).data_mut().fill(0.0);
        }
        let y = run(&store, &p, &[vec![0.0; 3], vec![0.0; 3]]);
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_step_halves_agree_with_shared_weights() {
        let (mut store, p) = setup(3, 2, 2);
        for (f, b) in [
            (p.forward.w_input, p.backward.w_input),
            (p.forward.w_hidden, p.backward.w_hidden),
            (p.forward.bias, p.backward.bias),
        ] {
            let v = store.value(f).clone();
            *store.value_mut(b) = v;
        }
        let y = run(&store, &p, &inputs(1, 3, 9));
        assert_eq!(y.row(0)[..2], y.row(0)[2..]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (store, p) = setup(3, 2, 3);
        let xs = inputs(4, 3, 4);
        let report = grad_check(
            &store,
            |tape: &mut Tape<'_>| -> Result<Var, NnError> {
                let x = tape.constant(Tensor::matrix(4, 3, xs.concat())?);
                let y = bilstm_forward(tape, &p, x)?;
                let y2 = tape.mul(y, y)?;
                Ok(tape.sum(y2))
            },
            GradCheckOptions::default(),
        )
        .unwrap();
        assert!(report.max_relative_error < 1e-4, "{report:?}");
    }

    #[test]
    fn rejects_empty_and_mismatched_input() {
        let (store, p) = setup(3, 2, 1);
        let mut tape = Tape::new(&store);
        let empty = tape.constant(Tensor::zeros(&[0, 3]));
        assert!(bilstm_forward(&mut tape, &p, empty).is_err());
        let wide = tape.constant(Tensor::zeros(&[2, 4]));
        assert!(bilstm_forward(&mut tape, &p, wide).is_err());
        assert_eq!(p.output_dim(), 4);
    }
}
