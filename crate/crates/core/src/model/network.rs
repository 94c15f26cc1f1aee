//! Patch-sequence regressor with hand-written backpropagation.
//!
//! Per step, a patch goes through a stride-2 ReLU convolution stack and a
//! global average pool, the velocity features through a ReLU MLP, and the
//! two embeddings are concatenated. An LSTM (or a mean over steps) reduces
//! the sequence, and a one-hidden-layer head with a sigmoid gives the value.
//! All weights live in one flat `f64` vector described by [`ParamLayout`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{LayerGroup, ModelConfig};
use crate::error::{Error, Result};
use crate::motion::FrequencyBank;

/// Input dimensions fixed by the dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputShape {
    pub channels: usize,
    pub cells: usize,
    pub velocity_len: usize,
}

impl InputShape {
    pub fn patch_len(&self) -> usize {
        self.channels * self.cells * self.cells
    }
}

/// Per-channel affine normalization of patch inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    pub fn identity(channels: usize) -> Self {
        Self { mean: vec![0.0; channels], std: vec![1.0; channels] }
    }

    /// Statistics over every cell of every patch; channels with a standard
    /// deviation below 1e-6 keep unit scale.
    pub fn fit<'a>(patches: impl IntoIterator<Item = &'a [f32]>, shape: &InputShape) -> Self {
        let area = shape.cells * shape.cells;
        let c = shape.channels;
        let (mut s1, mut s2, mut n) = (vec![0.0; c], vec![0.0; c], 0usize);
        for p in patches {
            for ch in 0..c {
                for &v in &p[ch * area..(ch + 1) * area] {
                    s1[ch] += v as f64;
                    s2[ch] += (v as f64) * (v as f64);
                }
            }
            n += area;
        }
        if n == 0 {
            return Self::identity(c);
        }
        let mean: Vec<f64> = s1.iter().map(|s| s / n as f64).collect();
        let std = s2
            .iter()
            .zip(&mean)
            .map(|(s, m)| {
                let sd = (s / n as f64 - m * m).max(0.0).sqrt();
                if sd < 1e-6 {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub group: LayerGroup,
    pub offset: usize,
    pub shape: Vec<usize>,
}

impl TensorInfo {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Conv {
    cin: usize,
    cout: usize,
    k: usize,
    stride: usize,
    pad: usize,
    in_hw: usize,
    out_hw: usize,
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Dense {
    nin: usize,
    nout: usize,
    w: usize,
    b: usize,
}

/// Named views into the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    convs: Vec<Conv>,
    velocity: Vec<Dense>,
    /// LSTM gates `[i, f, g, o]` over `[input; hidden]`.
    lstm: Option<Dense>,
    head: [Dense; 2],
    embed_len: usize,
    hidden: usize,
    pub tensors: Vec<TensorInfo>,
    pub len: usize,
}

impl ParamLayout {
    pub fn new(config: &ModelConfig, input: &InputShape) -> Result<Self> {
        config.validate()?;
        let mut tensors = Vec::new();
        let mut len = 0;
        let mut push = |name: String, group: LayerGroup, shape: Vec<usize>| {
            let info = TensorInfo { name, group, offset: len, shape };
            len += info.len();
            let off = info.offset;
            tensors.push(info);
            off
        };
        let mut convs = Vec::new();
        let (mut cin, mut hw) = (input.channels, input.cells);
        let pad = config.kernel / 2;
        for (i, &cout) in config.conv_channels.iter().enumerate() {
            let out_hw = (hw + 2 * pad - config.kernel) / config.stride + 1;
            let w = push(format!("conv{i}.weight"), LayerGroup::Conv, vec![cout, cin, config.kernel, config.kernel]);
            let b = push(format!("conv{i}.bias"), LayerGroup::Conv, vec![cout]);
            convs.push(Conv { cin, cout, k: config.kernel, stride: config.stride, pad, in_hw: hw, out_hw, w, b });
            cin = cout;
            hw = out_hw;
        }
        let mut velocity = Vec::new();
        let mut nin = input.velocity_len;
        for (i, &nout) in config.velocity_hidden.iter().enumerate() {
            let w = push(format!("velocity{i}.weight"), LayerGroup::VelocityMlp, vec![nout, nin]);
            let b = push(format!("velocity{i}.bias"), LayerGroup::VelocityMlp, vec![nout]);
            velocity.push(Dense { nin, nout, w, b });
            nin = nout;
        }
        let embed_len = cin + nin;
        let (lstm, summary) = if config.use_recurrent {
            let h = config.hidden;
            let w = push("lstm.weight".into(), LayerGroup::Recurrent, vec![4 * h, embed_len + h]);
            let b = push("lstm.bias".into(), LayerGroup::Recurrent, vec![4 * h]);
            (Some(Dense { nin: embed_len + h, nout: 4 * h, w, b }), h)
        } else {
            (None, embed_len)
        };
        let hh = config.head_hidden;
        let w0 = push("head0.weight".into(), LayerGroup::Head, vec![hh, summary]);
        let b0 = push("head0.bias".into(), LayerGroup::Head, vec![hh]);
        let w1 = push("head1.weight".into(), LayerGroup::Head, vec![1, hh]);
        let b1 = push("head1.bias".into(), LayerGroup::Head, vec![1]);
        let head = [Dense { nin: summary, nout: hh, w: w0, b: b0 }, Dense { nin: hh, nout: 1, w: w1, b: b1 }];
        Ok(Self { convs, velocity, lstm, head, embed_len, hidden: config.hidden, tensors, len })
    }

    pub fn group_ranges(&self, group: LayerGroup) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        self.tensors.iter().filter(move |t| t.group == group).map(TensorInfo::range)
    }

    pub fn embed_len(&self) -> usize {
        self.embed_len
    }
}

/// Trainable network plus everything needed to reproduce its inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub config: ModelConfig,
    pub input: InputShape,
    pub frequencies: FrequencyBank,
    pub normalization: Normalization,
    pub layout: ParamLayout,
    pub params: Vec<f64>,
}

/// Activations of one time step, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct StepCache {
    x: Vec<f64>,
    conv: Vec<Vec<f64>>,
    vel_in: Vec<f64>,
    vel: Vec<Vec<f64>>,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
struct LstmCache {
    /// `[z_t; h_{t-1}]` per step.
    inputs: Vec<Vec<f64>>,
    /// Activated gates `[i, f, g, o]` per step.
    gates: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
}

struct SeqCache {
    steps: Vec<StepCache>,
    lstm: LstmCache,
    summary: Vec<f64>,
    head_hidden: Vec<f64>,
    prediction: f64,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn dense(p: &[f64], d: &Dense, x: &[f64], relu: bool) -> Vec<f64> {
    let mut out = p[d.b..d.b + d.nout].to_vec();
    for (o, y) in out.iter_mut().enumerate() {
        let row = &p[d.w + o * d.nin..d.w + (o + 1) * d.nin];
        *y += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        if relu && *y < 0.0 {
            *y = 0.0;
        }
    }
    out
}

/// Accumulates weight/bias gradients for `dy` and returns `dx` when asked.
fn dense_backward(p: &[f64], g: &mut [f64], d: &Dense, x: &[f64], dy: &[f64], want_dx: bool) -> Vec<f64> {
    let mut dx = if want_dx { vec![0.0; d.nin] } else { Vec::new() };
    for (o, &gy) in dy.iter().enumerate() {
        if gy == 0.0 {
            continue;
        }
        g[d.b + o] += gy;
        let base = d.w + o * d.nin;
        for (i, &xi) in x.iter().enumerate() {
            g[base + i] += gy * xi;
        }
        if want_dx {
            for (i, dxi) in dx.iter_mut().enumerate() {
                *dxi += gy * p[base + i];
            }
        }
    }
    dx
}

fn conv_forward(p: &[f64], c: &Conv, x: &[f64]) -> Vec<f64> {
    let (h, oh, k) = (c.in_hw, c.out_hw, c.k);
    let mut out = vec![0.0; c.cout * oh * oh];
    for co in 0..c.cout {
        let bias = p[c.b + co];
        for oy in 0..oh {
            for ox in 0..oh {
                let mut s = bias;
                for ci in 0..c.cin {
                    let wbase = c.w + (co * c.cin + ci) * k * k;
                    let xbase = ci * h * h;
                    for ky in 0..k {
                        let iy = (oy * c.stride + ky) as isize - c.pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..k {
                            let ix = (ox * c.stride + kx) as isize - c.pad as isize;
                            if ix < 0 || ix >= h as isize {
                                continue;
                            }
                            s += p[wbase + ky * k + kx] * x[xbase + iy as usize * h + ix as usize];
                        }
                    }
                }
                out[(co * oh + oy) * oh + ox] = s.max(0.0);
            }
        }
    }
    out
}

/// `dy` is the gradient w.r.t. the pre-activation output.
fn conv_backward(p: &[f64], g: &mut [f64], c: &Conv, x: &[f64], dy: &[f64], want_dx: bool) -> Vec<f64> {
    let (h, oh, k) = (c.in_hw, c.out_hw, c.k);
    let mut dx = if want_dx { vec![0.0; c.cin * h * h] } else { Vec::new() };
    for co in 0..c.cout {
        for oy in 0..oh {
            for ox in 0..oh {
                let gy = dy[(co * oh + oy) * oh + ox];
                if gy == 0.0 {
                    continue;
                }
                g[c.b + co] += gy;
                for ci in 0..c.cin {
                    let wbase = c.w + (co * c.cin + ci) * k * k;
                    let xbase = ci * h * h;
                    for ky in 0..k {
                        let iy = (oy * c.stride + ky) as isize - c.pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..k {
                            let ix = (ox * c.stride + kx) as isize - c.pad as isize;
                            if ix < 0 || ix >= h as isize {
                                continue;
                            }
                            let xi = xbase + iy as usize * h + ix as usize;
                            g[wbase + ky * k + kx] += gy * x[xi];
                            if want_dx {
                                dx[xi] += gy * p[wbase + ky * k + kx];
                            }
                        }
                    }
                }
            }
        }
    }
    dx
}

impl Network {
    /// Freshly initialized network: He-uniform for ReLU layers, uniform
    /// `±1/√H` for the LSTM with forget-gate bias 1.
    pub fn new(
        config: ModelConfig,
        input: InputShape,
        frequencies: FrequencyBank,
        normalization: Normalization,
    ) -> Result<Self> {
        let layout = ParamLayout::new(&config, &input)?;
        if frequencies.feature_len() != input.velocity_len {
            return Err(Error::Shape(format!(
                "{} frequencies give {} velocity features, input expects {}",
                frequencies.pairs(),
                frequencies.feature_len(),
                input.velocity_len
            )));
        }
        if normalization.mean.len() != input.channels || normalization.std.len() != input.channels {
            return Err(Error::Shape("normalization does not match the channel count".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = vec![0.0; layout.len];
        for t in &layout.tensors {
            if t.name.ends_with(".bias") {
                continue;
            }
            let fan_in: usize = t.shape[1..].iter().product();
            let bound = if t.group == LayerGroup::Recurrent {
                1.0 / (layout.hidden as f64).sqrt()
            } else {
                (6.0 / fan_in as f64).sqrt()
            };
            for v in &mut params[t.range()] {
                *v = rng.random_range(-bound..bound);
            }
        }
        if let Some(l) = layout.lstm {
            let h = layout.hidden;
            params[l.b + h..l.b + 2 * h].fill(1.0);
        }
        Ok(Self { config, input, frequencies, normalization, layout, params })
    }

    pub fn recurrent_cell(&self) -> &'static str {
        if self.layout.lstm.is_some() {
            "lstm"
        } else {
            "mean_pool"
        }
    }

    fn check_step(&self, patch: &[f32], velocity: &[f32]) -> Result<()> {
        if patch.len() != self.input.patch_len() {
            return Err(Error::Shape(format!("patch has {} values, expected {}", patch.len(), self.input.patch_len())));
        }
        if velocity.len() != self.input.velocity_len {
            return Err(Error::Shape(format!(
                "velocity features have {} values, expected {}",
                velocity.len(),
                self.input.velocity_len
            )));
        }
        Ok(())
    }

    fn step_forward(&self, patch: &[f32], velocity: &[f32]) -> Result<StepCache> {
        self.check_step(patch, velocity)?;
        let p = &self.params;
        let area = self.input.cells * self.input.cells;
        let x: Vec<f64> = patch
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let c = i / area;
                (v as f64 - self.normalization.mean[c]) / self.normalization.std[c]
            })
            .collect();
        if !x.iter().all(|v| v.is_finite()) || !velocity.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("input"));
        }
        let mut conv = Vec::with_capacity(self.layout.convs.len());
        for (i, c) in self.layout.convs.iter().enumerate() {
            let input = if i == 0 { &x } else { &conv[i - 1] };
            let out = conv_forward(p, c, input);
            conv.push(out);
        }
        let last = self.layout.convs.last().unwrap();
        let pix = last.out_hw * last.out_hw;
        let a = conv.last().unwrap();
        let mut embedding: Vec<f64> = (0..last.cout).map(|c| a[c * pix..(c + 1) * pix].iter().sum::<f64>() / pix as f64).collect();

        let mut vel_in: Vec<f64> = velocity.iter().map(|&v| v as f64).collect();
        if !self.config.use_omega {
            // Rows are (speed, yaw rate) pairs; drop the yaw-rate column.
            for v in vel_in.iter_mut().skip(1).step_by(2) {
                *v = 0.0;
            }
        }
        let mut vel = Vec::with_capacity(self.layout.velocity.len());
        for (i, d) in self.layout.velocity.iter().enumerate() {
            let input = if i == 0 { &vel_in } else { &vel[i - 1] };
            let out = dense(p, d, input, true);
            vel.push(out);
        }
        embedding.extend_from_slice(vel.last().unwrap_or(&vel_in));
        if !embedding.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("patch embedding"));
        }
        Ok(StepCache { x, conv, vel_in, vel, embedding })
    }

    /// Embedding of a single step (conv features then velocity features).
    pub fn embed_step(&self, patch: &[f32], velocity: &[f32]) -> Result<Vec<f64>> {
        Ok(self.step_forward(patch, velocity)?.embedding)
    }

    fn summarize(&self, embeddings: &[&[f64]], cache: Option<&mut LstmCache>) -> Vec<f64> {
        let p = &self.params;
        match &self.layout.lstm {
            None => {
                let n = embeddings.len() as f64;
                let mut s = vec![0.0; self.layout.embed_len];
                for e in embeddings {
                    for (a, b) in s.iter_mut().zip(e.iter()) {
                        *a += b;
                    }
                }
                s.iter_mut().for_each(|v| *v /= n);
                s
            }
            Some(l) => {
                let h = self.layout.hidden;
                let mut hs = vec![0.0; h];
                let mut cs = vec![0.0; h];
                let mut cache = cache;
                for e in embeddings {
                    let mut input = e.to_vec();
                    input.extend_from_slice(&hs);
                    let mut a = dense(p, l, &input, false);
                    for (j, v) in a.iter_mut().enumerate() {
                        *v = if (2 * h..3 * h).contains(&j) { v.tanh() } else { sigmoid(*v) };
                    }
                    for j in 0..h {
                        cs[j] = a[h + j] * cs[j] + a[j] * a[2 * h + j];
                        hs[j] = a[3 * h + j] * cs[j].tanh();
                    }
                    if let Some(c) = cache.as_deref_mut() {
                        c.inputs.push(input);
                        c.gates.push(a);
                        c.c.push(cs.clone());
                    }
                }
                hs
            }
        }
    }

    fn head(&self, summary: &[f64]) -> (Vec<f64>, f64) {
        let hidden = dense(&self.params, &self.layout.head[0], summary, true);
        let y = dense(&self.params, &self.layout.head[1], &hidden, false)[0];
        (hidden, sigmoid(y))
    }

    /// Value in `[0, 1]` from per-step embeddings.
    pub fn readout(&self, embeddings: &[&[f64]]) -> Result<f64> {
        if embeddings.len() != self.config.seq_len {
            return Err(Error::Shape(format!("{} steps, model expects {}", embeddings.len(), self.config.seq_len)));
        }
        let summary = self.summarize(embeddings, None);
        let (_, p) = self.head(&summary);
        if !p.is_finite() {
            return Err(Error::NonFinite("head"));
        }
        Ok(p)
    }

    fn forward_cached(&self, patches: &[&[f32]], velocities: &[&[f32]]) -> Result<SeqCache> {
        if patches.len() != self.config.seq_len || velocities.len() != patches.len() {
            return Err(Error::Shape(format!("{} steps, model expects {}", patches.len(), self.config.seq_len)));
        }
        let steps: Vec<StepCache> =
            patches.iter().zip(velocities).map(|(p, v)| self.step_forward(p, v)).collect::<Result<_>>()?;
        let mut lstm = LstmCache::default();
        let emb: Vec<&[f64]> = steps.iter().map(|s| s.embedding.as_slice()).collect();
        let summary = self.summarize(&emb, Some(&mut lstm));
        let (head_hidden, prediction) = self.head(&summary);
        if !prediction.is_finite() {
            return Err(Error::NonFinite("head"));
        }
        Ok(SeqCache { steps, lstm, summary, head_hidden, prediction })
    }

    /// Prediction for one sequence of `seq_len` steps.
    pub fn forward(&self, patches: &[&[f32]], velocities: &[&[f32]]) -> Result<f64> {
        Ok(self.forward_cached(patches, velocities)?.prediction)
    }

    /// Squared error of one sequence and its gradient scaled by `weight`,
    /// accumulated into `grad`. Frozen groups receive no gradient.
    pub fn accumulate_gradient(
        &self,
        patches: &[&[f32]],
        velocities: &[&[f32]],
        target: f64,
        weight: f64,
        grad: &mut [f64],
    ) -> Result<f64> {
        let cache = self.forward_cached(patches, velocities)?;
        let p = &self.params;
        let pred = cache.prediction;
        let loss = (pred - target).powi(2);
        let dy = weight * 2.0 * (pred - target) * pred * (1.0 - pred);

        let [h0, h1] = &self.layout.head;
        let mut d_hidden = dense_backward(p, grad, h1, &cache.head_hidden, &[dy], true);
        for (d, &a) in d_hidden.iter_mut().zip(&cache.head_hidden) {
            if a <= 0.0 {
                *d = 0.0;
            }
        }
        let d_summary = dense_backward(p, grad, h0, &cache.summary, &d_hidden, true);

        let steps = cache.steps.len();
        let mut d_embed = vec![vec![0.0; self.layout.embed_len]; steps];
        match &self.layout.lstm {
            None => {
                for d in &mut d_embed {
                    for (a, b) in d.iter_mut().zip(&d_summary) {
                        *a = b / steps as f64;
                    }
                }
            }
            Some(l) => {
                let h = self.layout.hidden;
                let e = self.layout.embed_len;
                let mut dh = d_summary;
                let mut dc = vec![0.0; h];
                let zero = vec![0.0; h];
                for t in (0..steps).rev() {
                    let a = &cache.lstm.gates[t];
                    let c = &cache.lstm.c[t];
                    let c_prev = if t > 0 { &cache.lstm.c[t - 1] } else { &zero };
                    let mut da = vec![0.0; 4 * h];
                    for j in 0..h {
                        let (i, f, g, o) = (a[j], a[h + j], a[2 * h + j], a[3 * h + j]);
                        let tc = c[j].tanh();
                        dc[j] += dh[j] * o * (1.0 - tc * tc);
                        da[j] = dc[j] * g * i * (1.0 - i);
                        da[h + j] = dc[j] * c_prev[j] * f * (1.0 - f);
                        da[2 * h + j] = dc[j] * i * (1.0 - g * g);
                        da[3 * h + j] = dh[j] * tc * o * (1.0 - o);
                        dc[j] *= f;
                    }
                    let dx = dense_backward(p, grad, l, &cache.lstm.inputs[t], &da, true);
                    d_embed[t].copy_from_slice(&dx[..e]);
                    dh = dx[e..].to_vec();
                }
            }
        }

        for (s, de) in cache.steps.iter().zip(&d_embed) {
            self.step_backward(s, de, grad);
        }
        for g in &self.config.frozen {
            for r in self.layout.group_ranges(*g) {
                grad[r].fill(0.0);
            }
        }
        Ok(loss)
    }

    fn step_backward(&self, s: &StepCache, d_embed: &[f64], grad: &mut [f64]) {
        let p = &self.params;
        let last = self.layout.convs.last().unwrap();
        let conv_len = last.cout;
        // Velocity branch.
        let mut d = d_embed[conv_len..].to_vec();
        for i in (0..self.layout.velocity.len()).rev() {
            let out = &s.vel[i];
            for (g, &a) in d.iter_mut().zip(out) {
                if a <= 0.0 {
                    *g = 0.0;
                }
            }
            let input = if i == 0 { &s.vel_in } else { &s.vel[i - 1] };
            d = dense_backward(p, grad, &self.layout.velocity[i], input, &d, i > 0);
        }
        // Convolution branch through the average pool.
        let pix = last.out_hw * last.out_hw;
        let mut d: Vec<f64> = (0..last.cout * pix).map(|j| d_embed[j / pix] / pix as f64).collect();
        for i in (0..self.layout.convs.len()).rev() {
            for (g, &a) in d.iter_mut().zip(&s.conv[i]) {
                if a <= 0.0 {
                    *g = 0.0;
                }
            }
            let input = if i == 0 { &s.x } else { &s.conv[i - 1] };
            d = conv_backward(p, grad, &self.layout.convs[i], input, &d, i > 0);
        }
    }
}
