//! Reference diffusion backend.
//!
//! Training: a one-hidden-layer tanh MLP predicts the noise added to an
//! 8×8 downscaled, dataset-normalized image under a linear DDPM beta
//! schedule (1e-4 → 0.02 over 1000 steps), optimized with Adam.
//!
//! Generation: does not sample from the network. It renders procedural
//! value noise around a class-dependent colour, deterministic in the seed,
//! so downstream stages get learnable class-labeled imagery.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::backend::{DiffusionBackend, TrainItem};
use super::FinetuneConfig;
use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::fsutil::{read_json, write_json_pretty};
use crate::ingest::{normalize_in_place, resize, ChannelStats};
use crate::promptforge::PromptSpec;
use crate::raster::{Raster, RealRaster};
use crate::seed::{self, SeededRng};

const CHECKPOINT_FILE: &str = "weights.json";
const TIME_FREQS: usize = 4;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Mean squared error between predicted and true noise.
pub fn toy_denoise_loss(predicted_noise: &[f64], true_noise: &[f64]) -> Result<f64> {
    if predicted_noise.len() != true_noise.len() || predicted_noise.is_empty() {
        return Err(Error::arg(format!(
            "noise tensors differ in shape: {} vs {}",
            predicted_noise.len(),
            true_noise.len()
        )));
    }
    let sum: f64 = predicted_noise
        .iter()
        .zip(true_noise)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / predicted_noise.len() as f64)
}

/// Mean colour of stub imagery for a class.
pub fn stub_class_color(class_name: &str) -> [u8; 3] {
    match class_name {
        "Bare Land" => [200, 150, 100],
        "Crop Land" => [215, 200, 50],
        "Cultivated Vegetation" => [110, 205, 60],
        "Natural Vegetation" => [80, 140, 125],
        "Snow Ice" => [235, 240, 250],
        "Water Body" => [40, 70, 170],
        "Woody Vegetation" => [40, 90, 30],
        other => {
            let h = sha256_hex(other.as_bytes());
            let b = hex::decode(&h[..6]).expect("hex digest");
            [b[0], b[1], b[2]]
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct State {
    format: String,
    side: usize,
    hidden: usize,
    learning_rate: f64,
    stats: ChannelStats,
    params: Vec<f64>,
    adam_m: Vec<f64>,
    adam_v: Vec<f64>,
    adam_t: u64,
}

#[derive(Clone, Debug)]
pub struct ReferenceDiffusion {
    side: usize,
    hidden: usize,
    alpha_bar: Vec<f64>,
    color_shift: [f64; 3],
    state: Option<State>,
}

impl Default for ReferenceDiffusion {
    fn default() -> Self {
        Self::new(8, 64)
    }
}

impl ReferenceDiffusion {
    pub fn new(side: usize, hidden: usize) -> Self {
        let timesteps = 1000;
        let mut alpha_bar = Vec::with_capacity(timesteps);
        let mut prod = 1.0;
        for i in 0..timesteps {
            let beta = 1e-4 + (0.02 - 1e-4) * i as f64 / (timesteps - 1) as f64;
            prod *= 1.0 - beta;
            alpha_bar.push(prod);
        }
        Self {
            side,
            hidden,
            alpha_bar,
            color_shift: [0.0; 3],
            state: None,
        }
    }

    /// Offset every generated pixel by `shift` (per channel, clamped).
    pub fn with_color_shift(mut self, shift: [f64; 3]) -> Self {
        self.color_shift = shift;
        self
    }

    fn data_dim(&self) -> usize {
        self.side * self.side * 3
    }

    fn input_dim(&self) -> usize {
        self.data_dim() + 2 * TIME_FREQS
    }

    fn param_count(&self) -> usize {
        let (i, h, o) = (self.input_dim(), self.hidden, self.data_dim());
        h * i + h + o * h + o
    }

    fn state(&self) -> Result<&State> {
        self.state
            .as_ref()
            .ok_or_else(|| Error::Backend("reference backend used before configure".into()))
    }

    fn time_features(&self, t: usize) -> [f64; 2 * TIME_FREQS] {
        let phase = t as f64 / self.alpha_bar.len() as f64;
        let mut out = [0.0; 2 * TIME_FREQS];
        for k in 0..TIME_FREQS {
            let w = std::f64::consts::PI * (1 << k) as f64 * phase;
            out[2 * k] = w.sin();
            out[2 * k + 1] = w.cos();
        }
        out
    }

    fn encode(&self, image: &Raster, stats: &ChannelStats) -> Result<Vec<f64>> {
        let small = resize(image, self.side, self.side)?;
        let mut real = RealRaster::from_raster(&small);
        normalize_in_place(&mut real, stats)?;
        Ok(real.into_data())
    }
}

struct Layout {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

impl ReferenceDiffusion {
    fn layout(&self) -> Layout {
        let (i, h, o) = (self.input_dim(), self.hidden, self.data_dim());
        let w1 = 0;
        let b1 = w1 + h * i;
        let w2 = b1 + h;
        let b2 = w2 + o * h;
        debug_assert_eq!(b2 + o, self.param_count());
        Layout { w1, b1, w2, b2 }
    }

    /// Forward pass; returns (hidden activations, prediction).
    fn forward(&self, p: &[f64], input: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (i_dim, h_dim, o_dim) = (self.input_dim(), self.hidden, self.data_dim());
        let l = self.layout();
        let hidden: Vec<f64> = (0..h_dim)
            .map(|h| {
                let row = &p[l.w1 + h * i_dim..l.w1 + (h + 1) * i_dim];
                let z: f64 = row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + p[l.b1 + h];
                z.tanh()
            })
            .collect();
        let out = (0..o_dim)
            .map(|o| {
                let row = &p[l.w2 + o * h_dim..l.w2 + (o + 1) * h_dim];
                row.iter().zip(&hidden).map(|(w, a)| w * a).sum::<f64>() + p[l.b2 + o]
            })
            .collect();
        (hidden, out)
    }

    /// Mean loss over `items` and its gradient with respect to the flat
    /// parameter vector. Draws one timestep and one noise vector per item.
    fn loss_and_grad(&self, items: &[&TrainItem], rng: &mut SeededRng) -> Result<(f64, Vec<f64>)> {
        let state = self.state()?;
        if items.is_empty() {
            return Err(Error::Backend("empty optimizer step".into()));
        }
        let (i_dim, h_dim, o_dim) = (self.input_dim(), self.hidden, self.data_dim());
        let l = self.layout();
        let p = &state.params;
        let mut grad = vec![0.0; p.len()];
        let mut total_loss = 0.0;
        let scale = 1.0 / items.len() as f64;

        for item in items {
            let x0 = self.encode(&item.image, &state.stats)?;
            let t = rng.random_range(0..self.alpha_bar.len());
            let ab = self.alpha_bar[t];
            let noise: Vec<f64> = (0..o_dim).map(|_| StandardNormal.sample(&mut *rng)).collect();
            let mut input: Vec<f64> = x0
                .iter()
                .zip(&noise)
                .map(|(x, e)| ab.sqrt() * x + (1.0 - ab).sqrt() * e)
                .collect();
            input.extend_from_slice(&self.time_features(t));

            let (hidden, pred) = self.forward(p, &input);
            total_loss += toy_denoise_loss(&pred, &noise)?;

            let d_out: Vec<f64> = pred
                .iter()
                .zip(&noise)
                .map(|(y, e)| 2.0 * (y - e) / o_dim as f64 * scale)
                .collect();
            let mut d_hidden = vec![0.0; h_dim];
            for o in 0..o_dim {
                let g = d_out[o];
                grad[l.b2 + o] += g;
                let row = l.w2 + o * h_dim;
                for h in 0..h_dim {
                    grad[row + h] += g * hidden[h];
                    d_hidden[h] += g * p[row + h];
                }
            }
            for h in 0..h_dim {
                let d_pre = d_hidden[h] * (1.0 - hidden[h] * hidden[h]);
                grad[l.b1 + h] += d_pre;
                let row = l.w1 + h * i_dim;
                for (g, x) in grad[row..row + i_dim].iter_mut().zip(&input) {
                    *g += d_pre * x;
                }
            }
        }
        Ok((total_loss * scale, grad))
    }
}

impl DiffusionBackend for ReferenceDiffusion {
    fn id(&self) -> &str {
        "reference-mlp-denoiser"
    }

    fn configure(&mut self, config: &FinetuneConfig, stats: &ChannelStats) -> Result<()> {
        if stats.channels() != 3 {
            return Err(Error::Backend("reference backend expects RGB statistics".into()));
        }
        let mut rng = seed::derived_rng(config.seed, &["reference-diffusion", "init"]);
        let l = self.layout();
        let n = self.param_count();
        let mut params = vec![0.0; n];
        let in_scale = (1.0 / self.input_dim() as f64).sqrt();
        let out_scale = 0.1 * (1.0 / self.hidden as f64).sqrt();
        for (j, p) in params.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *p = if j < l.b1 {
                z * in_scale
            } else if (l.w2..l.b2).contains(&j) {
                z * out_scale
            } else {
                0.0
            };
        }
        self.state = Some(State {
            format: "reference-diffusion/1".into(),
            side: self.side,
            hidden: self.hidden,
            learning_rate: config.learning_rate,
            stats: stats.clone(),
            params,
            adam_m: vec![0.0; n],
            adam_v: vec![0.0; n],
            adam_t: 0,
        });
        Ok(())
    }

    fn train_step(&mut self, micro_batches: &[&[TrainItem]], rng: &mut SeededRng) -> Result<f64> {
        let items: Vec<&TrainItem> = micro_batches.iter().flat_map(|b| b.iter()).collect();
        let (loss, grad) = self.loss_and_grad(&items, rng)?;
        if !loss.is_finite() {
            return Err(Error::Backend(format!("non-finite loss {loss}")));
        }
        let state = self.state.as_mut().expect("checked above");
        state.adam_t += 1;
        let t = state.adam_t as i32;
        let bc1 = 1.0 - ADAM_BETA1.powi(t);
        let bc2 = 1.0 - ADAM_BETA2.powi(t);
        for j in 0..grad.len() {
            let g = grad[j];
            state.adam_m[j] = ADAM_BETA1 * state.adam_m[j] + (1.0 - ADAM_BETA1) * g;
            state.adam_v[j] = ADAM_BETA2 * state.adam_v[j] + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = state.adam_m[j] / bc1;
            let v_hat = state.adam_v[j] / bc2;
            state.params[j] -= state.learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
        Ok(loss)
    }

    fn save_checkpoint(&self, dir: &Path) -> Result<()> {
        write_json_pretty(&dir.join(CHECKPOINT_FILE), self.state()?)
    }

    fn load_checkpoint(&mut self, dir: &Path) -> Result<()> {
        let state: State = read_json(&dir.join(CHECKPOINT_FILE))?;
        if state.side != self.side || state.hidden != self.hidden || state.params.len() != self.param_count() {
            return Err(Error::Backend(format!(
                "{}: checkpoint shape does not match this backend",
                dir.display()
            )));
        }
        self.state = Some(state);
        Ok(())
    }

    fn generate(&self, spec: &PromptSpec) -> Result<Raster> {
        if spec.width == 0 || spec.height == 0 || spec.steps == 0 {
            return Err(Error::Backend(
                "width, height and steps must be positive".into(),
            ));
        }
        let mut rng = seed::derived_rng(spec.seed, &["stub-generate", &spec.class_name]);
        let base = stub_class_color(&spec.class_name);
        let offset: [f64; 3] = std::array::from_fn(|_| rng.random_range(-12.0..12.0));
        let coarse = ValueNoise::new(&mut rng, 8, 28.0);
        let fine = ValueNoise::new(&mut rng, 32, 10.0);
        let (h, w) = (spec.height, spec.width);
        Ok(Raster::from_fn(h, w, 3, |y, x, c| {
            let (fy, fx) = ((y as f64 + 0.5) / h as f64, (x as f64 + 0.5) / w as f64);
            let v = f64::from(base[c])
                + offset[c]
                + self.color_shift[c]
                + coarse.at(fy, fx)
                + fine.at(fy, fx);
            v.round().clamp(0.0, 255.0) as u8
        }))
    }
}

/// Bilinearly interpolated lattice noise on the unit square.
struct ValueNoise {
    cells: usize,
    lattice: Vec<f64>,
}

impl ValueNoise {
    fn new(rng: &mut SeededRng, cells: usize, amplitude: f64) -> Self {
        let lattice = (0..(cells + 1) * (cells + 1))
            .map(|_| rng.random_range(-amplitude..amplitude))
            .collect();
        Self { cells, lattice }
    }

    fn at(&self, fy: f64, fx: f64) -> f64 {
        let n = self.cells;
        let (py, px) = (fy * n as f64, fx * n as f64);
        let (y0, x0) = ((py.floor() as usize).min(n - 1), (px.floor() as usize).min(n - 1));
        let (wy, wx) = (py - y0 as f64, px - x0 as f64);
        let g = |y: usize, x: usize| self.lattice[y * (n + 1) + x];
        let top = g(y0, x0) * (1.0 - wx) + g(y0, x0 + 1) * wx;
        let bottom = g(y0 + 1, x0) * (1.0 - wx) + g(y0 + 1, x0 + 1) * wx;
        top * (1.0 - wy) + bottom * wy
    }
}
