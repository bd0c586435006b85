//! MLP evaluator: flattened planes -> tanh torso -> three heads
//! (softmax policy, tanh value, linear intrinsic value).
//!
//! Backprop is written out by hand in f64 so gradients can be checked
//! against central finite differences to tight tolerances.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::game::{encode_planes, plane_count, position_to_line, GameSpec, GameState};

use super::{
    check_target, masked_softmax, sample_loss, Batch, EvalError, EvalOutput, LossConfig,
    LossParts,
};

/// Fully connected layer, weights row-major `[out][in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    fn init(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Dense {
        let scale = 1.0 / (in_dim as f64).sqrt();
        let w = (0..in_dim * out_dim)
            .map(|_| rng.gen_range(-scale..scale))
            .collect();
        Dense {
            in_dim,
            out_dim,
            w,
            b: vec![0.0; out_dim],
        }
    }

    fn zeros(in_dim: usize, out_dim: usize) -> Dense {
        Dense {
            in_dim,
            out_dim,
            w: vec![0.0; in_dim * out_dim],
            b: vec![0.0; out_dim],
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_dim);
        let mut y = self.b.clone();
        for o in 0..self.out_dim {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = 0.0;
            for (wi, xi) in row.iter().zip(x) {
                acc += wi * xi;
            }
            y[o] += acc;
        }
        y
    }

    /// Accumulate dL/dW and dL/db from upstream dL/dy, returning dL/dx.
    fn backward(&self, x: &[f64], dy: &[f64], gw: &mut Dense) -> Vec<f64> {
        let mut dx = vec![0.0; self.in_dim];
        for o in 0..self.out_dim {
            let d = dy[o];
            if d == 0.0 {
                continue;
            }
            gw.b[o] += d;
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            let grow = &mut gw.w[o * self.in_dim..(o + 1) * self.in_dim];
            for i in 0..self.in_dim {
                grow[i] += d * x[i];
                dx[i] += d * row[i];
            }
        }
        dx
    }

    fn for_each_param_mut(&mut self, mut f: impl FnMut(&mut f64, bool)) {
        for w in &mut self.w {
            f(w, true);
        }
        for b in &mut self.b {
            f(b, false);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    spec: GameSpec,
    n_players: usize,
    pub(crate) hidden: Vec<usize>,
    pub(crate) torso: Vec<Dense>,
    pub(crate) policy: Dense,
    pub(crate) value: Dense,
    pub(crate) intrinsic: Dense,
}

/// Gradient (or momentum) buffers shaped like [`MlpParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrads {
    pub(crate) torso: Vec<Dense>,
    pub(crate) policy: Dense,
    pub(crate) value: Dense,
    pub(crate) intrinsic: Dense,
}

impl MlpGrads {
    pub(crate) fn zeros_like(p: &MlpParams) -> MlpGrads {
        MlpGrads {
            torso: p
                .torso
                .iter()
                .map(|d| Dense::zeros(d.in_dim, d.out_dim))
                .collect(),
            policy: Dense::zeros(p.policy.in_dim, p.policy.out_dim),
            value: Dense::zeros(p.value.in_dim, p.value.out_dim),
            intrinsic: Dense::zeros(p.intrinsic.in_dim, p.intrinsic.out_dim),
        }
    }

    fn scale(&mut self, c: f64) {
        for d in self.iter_mut() {
            for w in d.w.iter_mut() {
                *w *= c;
            }
            for b in d.b.iter_mut() {
                *b *= c;
            }
        }
    }

    fn iter_mut(&mut self) -> impl Iterator<Item = &mut Dense> {
        self.torso
            .iter_mut()
            .chain([&mut self.policy, &mut self.value, &mut self.intrinsic])
    }

    fn iter(&self) -> impl Iterator<Item = &Dense> {
        self.torso
            .iter()
            .chain([&self.policy, &self.value, &self.intrinsic])
    }

    /// velocity = momentum * velocity + gradient
    pub(crate) fn accumulate_momentum(&mut self, grads: &MlpGrads, momentum: f64) {
        for (v, g) in self.iter_mut().zip(grads.iter()) {
            for (vw, gw) in v.w.iter_mut().zip(&g.w) {
                *vw = momentum * *vw + gw;
            }
            for (vb, gb) in v.b.iter_mut().zip(&g.b) {
                *vb = momentum * *vb + gb;
            }
        }
    }

    fn check_finite(&self) -> Result<(), EvalError> {
        for (idx, d) in self.iter().enumerate() {
            if d.w.iter().chain(&d.b).any(|x| !x.is_finite()) {
                return Err(EvalError::NonFiniteGradient(format!("dense block {idx}")));
            }
        }
        Ok(())
    }
}

struct ForwardTrace {
    /// Input followed by each torso activation (post-tanh).
    activations: Vec<Vec<f64>>,
    p: Vec<f64>,
    v: f64,
    v_d: f64,
}

impl MlpParams {
    /// Fresh network. `hidden` lists the torso layer widths; the input
    /// dimension is derived from the game spec (including its history
    /// length) and the player count.
    pub fn new(spec: GameSpec, n_players: usize, hidden: &[usize], seed: u64) -> MlpParams {
        assert!(!hidden.is_empty(), "torso needs at least one layer");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input_dim = plane_count(spec.history_len, n_players) * spec.cell_count();
        let mut torso = Vec::new();
        let mut prev = input_dim;
        for &h in hidden {
            torso.push(Dense::init(prev, h, &mut rng));
            prev = h;
        }
        MlpParams {
            spec,
            n_players,
            hidden: hidden.to_vec(),
            torso,
            policy: Dense::init(prev, spec.move_space(), &mut rng),
            value: Dense::init(prev, 1, &mut rng),
            intrinsic: Dense::init(prev, 1, &mut rng),
        }
    }

    pub fn n_players(&self) -> usize {
        self.n_players
    }

    pub fn game_name(&self) -> &str {
        self.spec.name()
    }

    pub fn spec(&self) -> &GameSpec {
        &self.spec
    }

    pub fn input_dim(&self) -> usize {
        self.torso[0].in_dim
    }

    pub fn parameter_count(&self) -> usize {
        self.torso
            .iter()
            .chain([&self.policy, &self.value, &self.intrinsic])
            .map(|d| d.w.len() + d.b.len())
            .sum()
    }

    /// Flattened network input for a position under a latent.
    pub fn encode_input(&self, state: &GameState, latent: usize) -> Result<Vec<f64>, EvalError> {
        if state.spec().kind != self.spec.kind || state.spec().history_len != self.spec.history_len
        {
            return Err(EvalError::GameMismatch {
                expected: format!("{} (history {})", self.spec.name(), self.spec.history_len),
                found: format!(
                    "{} (history {})",
                    state.spec().name(),
                    state.spec().history_len
                ),
            });
        }
        let stack = encode_planes(state, latent, self.n_players).map_err(|_| {
            EvalError::LatentOutOfRange {
                latent,
                n_players: self.n_players,
            }
        })?;
        let input = stack.flatten();
        if input.len() != self.input_dim() {
            return Err(EvalError::DimensionMismatch {
                expected: self.input_dim(),
                found: input.len(),
            });
        }
        Ok(input)
    }

    fn forward(&self, input: &[f64], legal: &[usize]) -> ForwardTrace {
        let mut activations = Vec::with_capacity(self.torso.len() + 1);
        activations.push(input.to_vec());
        for layer in &self.torso {
            let mut u = layer.forward(activations.last().unwrap());
            for x in &mut u {
                *x = x.tanh();
            }
            activations.push(u);
        }
        let t = activations.last().unwrap();
        let logits = self.policy.forward(t);
        let p = masked_softmax(&logits, legal);
        let v = self.value.forward(t)[0].tanh();
        let v_d = self.intrinsic.forward(t)[0];
        ForwardTrace {
            activations,
            p,
            v,
            v_d,
        }
    }

    pub fn evaluate(&self, state: &GameState, latent: usize) -> Result<EvalOutput, EvalError> {
        let legal: Vec<usize> = state.legal_moves().iter().map(|m| m.0).collect();
        if legal.is_empty() {
            return Err(EvalError::TerminalState(position_to_line(state)));
        }
        let input = self.encode_input(state, latent)?;
        let trace = self.forward(&input, &legal);
        Ok(EvalOutput {
            p: trace.p,
            v: trace.v,
            v_d: trace.v_d,
        })
    }

    pub fn loss(&self, batch: &Batch, cfg: &LossConfig) -> Result<LossParts, EvalError> {
        Ok(self.loss_and_grads_impl(batch, None, cfg, false)?.0)
    }

    pub fn loss_and_grads(
        &self,
        batch: &Batch,
        cfg: &LossConfig,
    ) -> Result<(LossParts, MlpGrads), EvalError> {
        let (parts, grads) = self.loss_and_grads_impl(batch, None, cfg, true)?;
        Ok((parts, grads.expect("grads requested")))
    }

    /// Same as [`loss_and_grads`], with pre-encoded inputs substituted for
    /// the states' own encodings (used for history dropout; legality masks
    /// still come from the states).
    pub fn loss_and_grads_with_inputs(
        &self,
        batch: &Batch,
        inputs: &[Vec<f64>],
        cfg: &LossConfig,
    ) -> Result<(LossParts, MlpGrads), EvalError> {
        if inputs.len() != batch.len() {
            return Err(EvalError::BadTarget(format!(
                "{} inputs for {} batch rows",
                inputs.len(),
                batch.len()
            )));
        }
        let (parts, grads) = self.loss_and_grads_impl(batch, Some(inputs), cfg, true)?;
        Ok((parts, grads.expect("grads requested")))
    }

    fn loss_and_grads_impl(
        &self,
        batch: &Batch,
        inputs: Option<&[Vec<f64>]>,
        cfg: &LossConfig,
        want_grads: bool,
    ) -> Result<(LossParts, Option<MlpGrads>), EvalError> {
        if batch.is_empty() {
            return Err(EvalError::BadTarget("empty batch".to_string()));
        }
        let mut parts = LossParts::default();
        let mut grads = want_grads.then(|| MlpGrads::zeros_like(self));
        for (row, (state, target)) in batch.iter().enumerate() {
            let legal = check_target(state, target, self.n_players)?;
            let input = match inputs {
                Some(ins) => {
                    if ins[row].len() != self.input_dim() {
                        return Err(EvalError::DimensionMismatch {
                            expected: self.input_dim(),
                            found: ins[row].len(),
                        });
                    }
                    ins[row].clone()
                }
                None => self.encode_input(state, target.latent)?,
            };
            let trace = self.forward(&input, &legal);
            let (value, intrinsic, policy) =
                sample_loss(&trace.p, trace.v, trace.v_d, target, cfg);
            parts.value += value;
            parts.intrinsic += intrinsic;
            parts.policy += policy;
            if let Some(g) = grads.as_mut() {
                self.backward(&trace, target, &legal, cfg, g);
            }
        }
        let n = batch.len() as f64;
        parts.value /= n;
        parts.intrinsic /= n;
        parts.policy /= n;
        if cfg.l2 > 0.0 {
            let mut sq = 0.0;
            for d in self.torso.iter().chain([&self.policy, &self.value, &self.intrinsic]) {
                sq += d.w.iter().map(|w| w * w).sum::<f64>();
            }
            parts.l2 = cfg.l2 * sq;
        }
        if let Some(g) = grads.as_mut() {
            g.scale(1.0 / n);
            if cfg.l2 > 0.0 {
                for (gd, pd) in g
                    .iter_mut()
                    .zip(self.torso.iter().chain([&self.policy, &self.value, &self.intrinsic]))
                {
                    for (gw, w) in gd.w.iter_mut().zip(&pd.w) {
                        *gw += 2.0 * cfg.l2 * w;
                    }
                }
            }
            g.check_finite()?;
        }
        Ok((parts, grads))
    }

    fn backward(
        &self,
        trace: &ForwardTrace,
        target: &super::TrainTarget,
        legal: &[usize],
        cfg: &LossConfig,
        grads: &mut MlpGrads,
    ) {
        let t = trace.activations.last().unwrap();
        // Policy head: d(-sum pi ln p)/d logit_a = p_a - pi_a on legal moves.
        let mut dlogits = vec![0.0; self.policy.out_dim];
        for &a in legal {
            dlogits[a] = trace.p[a] - target.pi[a];
        }
        let mut dt = self.policy.backward(t, &dlogits, &mut grads.policy);
        // Value head through tanh.
        let dv = -2.0 * (target.z - trace.v) * (1.0 - trace.v * trace.v);
        let dtv = self.value.backward(t, &[dv], &mut grads.value);
        // Intrinsic head, linear.
        let dvd = cfg.intrinsic_weight * -2.0 * (target.z_d - trace.v_d);
        let dti = self.intrinsic.backward(t, &[dvd], &mut grads.intrinsic);
        for i in 0..dt.len() {
            dt[i] += dtv[i] + dti[i];
        }
        // Torso, backwards through each tanh.
        let mut upstream = dt;
        for (l, layer) in self.torso.iter().enumerate().rev() {
            let act = &trace.activations[l + 1];
            let mut du = upstream;
            for (d, a) in du.iter_mut().zip(act) {
                *d *= 1.0 - a * a;
            }
            upstream = layer.backward(&trace.activations[l], &du, &mut grads.torso[l]);
        }
    }

    /// θ -= lr * velocity.
    pub(crate) fn apply_step(&mut self, velocity: &MlpGrads, lr: f64) {
        for (p, v) in self
            .torso
            .iter_mut()
            .chain([&mut self.policy, &mut self.value, &mut self.intrinsic])
            .zip(velocity.iter())
        {
            for (w, vw) in p.w.iter_mut().zip(&v.w) {
                *w -= lr * vw;
            }
            for (b, vb) in p.b.iter_mut().zip(&v.b) {
                *b -= lr * vb;
            }
        }
    }

    /// Overwrite one named block's tensors (checkpoint loading). The caller
    /// guarantees the lengths match the block's declared shape.
    pub(crate) fn set_block(&mut self, name: &str, w: Vec<f64>, b: Vec<f64>) {
        let block = match name {
            "policy" => &mut self.policy,
            "value" => &mut self.value,
            "intrinsic" => &mut self.intrinsic,
            _ => {
                let idx: usize = name
                    .strip_prefix("torso.")
                    .and_then(|s| s.parse().ok())
                    .expect("caller validated block name");
                &mut self.torso[idx]
            }
        };
        assert_eq!(w.len(), block.w.len());
        assert_eq!(b.len(), block.b.len());
        block.w = w;
        block.b = b;
    }

    /// Visit every parameter with mutable access (finite-difference tests).
    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(&mut f64, bool)) {
        for d in self
            .torso
            .iter_mut()
            .chain([&mut self.policy, &mut self.value, &mut self.intrinsic])
        {
            d.for_each_param_mut(&mut f);
        }
    }

    /// Read gradients in the same order [`for_each_param_mut`] visits
    /// parameters (finite-difference tests).
    pub fn flatten_grads(grads: &MlpGrads) -> Vec<f64> {
        let mut out = Vec::new();
        for d in grads.iter() {
            out.extend_from_slice(&d.w);
            out.extend_from_slice(&d.b);
        }
        out
    }
}
