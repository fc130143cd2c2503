//! Latent energy-based generative classifier.
//!
//! Three networks share a latent space z ∈ ℝ^d: an energy net producing
//! per-class logits F(z) ∈ ℝ^K that tilt an isotropic Gaussian reference, a
//! generator mapping z to the data mean g(z) ∈ ℝ^D with N(0, σ²I) observation
//! noise, and an amortized inference net mapping x to diagonal posterior
//! moments (mu, log_var). The partition function is never computed: it cancels
//! in the softmax classifier and is constant in the contrastive prior
//! gradient.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::binio::{ByteReader, ByteWriter};
use crate::error::{contract, Error, Result};
use crate::numkernel::{
    gaussian_kl, logsumexp, normal_vec, softmax, Activation, Mlp, MlpGrads, Tensor,
};

pub const CHECKPOINT_MAGIC: &[u8; 16] = b"SYNTHAUG-CKPT\0\0\0";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Diagonal-Gaussian posterior moments produced by the inference net.
#[derive(Debug, Clone)]
pub struct PosteriorMoments {
    pub mu: Vec<f64>,
    pub log_var: Vec<f64>,
}

/// Architecture and noise configuration for a fresh model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub latent_dim: usize,
    pub data_dim: usize,
    pub num_classes: usize,
    pub energy_hidden: Vec<usize>,
    pub generator_hidden: Vec<usize>,
    pub inference_hidden: Vec<usize>,
    pub obs_sigma: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            latent_dim: 8,
            data_dim: 16,
            num_classes: 4,
            energy_hidden: vec![32],
            generator_hidden: vec![32],
            inference_hidden: vec![32],
            obs_sigma: 0.3,
        }
    }
}

/// Parameters of the three networks plus observation noise.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub energy_net: Mlp,
    pub generator_net: Mlp,
    pub inference_net: Mlp,
    pub obs_sigma: f64,
    pub latent_dim: usize,
    pub data_dim: usize,
    pub num_classes: usize,
}

/// Gradients for the inference + generator pathway (ψ).
#[derive(Debug, Clone)]
pub struct PsiGrads {
    pub generator: MlpGrads,
    pub inference: MlpGrads,
}

/// Gradients for the supervised pathway (energy + inference).
#[derive(Debug, Clone)]
pub struct ThetaGrads {
    pub energy: MlpGrads,
    pub inference: MlpGrads,
}

fn widths(io: (usize, usize), hidden: &[usize]) -> Vec<usize> {
    let mut w = Vec::with_capacity(hidden.len() + 2);
    w.push(io.0);
    w.extend_from_slice(hidden);
    w.push(io.1);
    w
}

fn tanh_then_identity(n_layers: usize) -> Vec<Activation> {
    let mut acts = vec![Activation::Tanh; n_layers];
    *acts.last_mut().unwrap() = Activation::Identity;
    acts
}

impl ModelParams {
    pub fn new(config: &ModelConfig, rng: &mut impl Rng) -> Result<Self> {
        let (d, dd, k) = (config.latent_dim, config.data_dim, config.num_classes);
        if k < 2 {
            return Err(contract("model needs at least two classes"));
        }
        if config.obs_sigma <= 0.0 {
            return Err(contract("obs_sigma must be positive"));
        }
        let ew = widths((d, k), &config.energy_hidden);
        let gw = widths((d, dd), &config.generator_hidden);
        let iw = widths((dd, 2 * d), &config.inference_hidden);
        Ok(Self {
            energy_net: Mlp::new(&ew, &tanh_then_identity(ew.len() - 1), rng)?,
            generator_net: Mlp::new(&gw, &tanh_then_identity(gw.len() - 1), rng)?,
            inference_net: Mlp::new(&iw, &tanh_then_identity(iw.len() - 1), rng)?,
            obs_sigma: config.obs_sigma,
            latent_dim: d,
            data_dim: dd,
            num_classes: k,
        })
    }

    fn check_z(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.latent_dim {
            return Err(contract(format!(
                "latent width {} != d = {}",
                z.len(),
                self.latent_dim
            )));
        }
        Ok(())
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.data_dim {
            return Err(contract(format!(
                "data width {} != D = {}",
                x.len(),
                self.data_dim
            )));
        }
        Ok(())
    }

    fn check_label(&self, y: usize) -> Result<()> {
        if y >= self.num_classes {
            return Err(contract(format!(
                "label {} out of range for K = {}",
                y, self.num_classes
            )));
        }
        Ok(())
    }

    /// Per-class logits F(z).
    pub fn energy_logits(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_z(z)?;
        self.energy_net.forward_nograd(z)
    }

    /// Negative free energy f(z) = logsumexp_y F(z)[y].
    pub fn free_energy(&self, z: &[f64]) -> Result<f64> {
        logsumexp(&self.energy_logits(z)?)
    }

    /// Latent softmax classifier p(y|z).
    pub fn classify_latent(&self, z: &[f64]) -> Result<Vec<f64>> {
        softmax(&self.energy_logits(z)?)
    }

    /// Gradient of F(z)[y] with respect to z.
    pub fn conditional_logit_grad_z(&self, z: &[f64], y: usize) -> Result<(f64, Vec<f64>)> {
        self.check_z(z)?;
        self.check_label(y)?;
        let (logits, tape) = self.energy_net.forward(z)?;
        let mut onehot = vec![0.0; self.num_classes];
        onehot[y] = 1.0;
        let (_, dz) = self.energy_net.backward(&tape, &onehot)?;
        Ok((logits[y], dz))
    }

    /// Value and z-gradient of f(z). The gradient is the softmax-weighted
    /// logit gradient (chain rule through logsumexp).
    pub fn free_energy_grad_z(&self, z: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_z(z)?;
        let (logits, tape) = self.energy_net.forward(z)?;
        let p = softmax(&logits)?;
        let (_, dz) = self.energy_net.backward(&tape, &p)?;
        Ok((logsumexp(&logits)?, dz))
    }

    /// Posterior moments of q(z|x).
    pub fn encode(&self, x: &[f64]) -> Result<PosteriorMoments> {
        self.check_x(x)?;
        let out = self.inference_net.forward_nograd(x)?;
        let d = self.latent_dim;
        Ok(PosteriorMoments {
            mu: out[..d].to_vec(),
            log_var: out[d..].to_vec(),
        })
    }

    /// Reparameterized draw z = mu + exp(log_var/2) ⊙ eps.
    pub fn reparameterize(moments: &PosteriorMoments, eps: &[f64]) -> Vec<f64> {
        moments
            .mu
            .iter()
            .zip(&moments.log_var)
            .zip(eps)
            .map(|((m, lv), e)| m + (lv / 2.0).exp() * e)
            .collect()
    }

    /// Reparameterized posterior sample z ~ q(z|x).
    pub fn sample_posterior(&self, x: &[f64], rng: &mut impl Rng) -> Result<Vec<f64>> {
        let moments = self.encode(x)?;
        let eps = normal_vec(rng, self.latent_dim);
        Ok(Self::reparameterize(&moments, &eps))
    }

    /// Generator mean g(z); the full conditional is N(g(z), σ²I).
    pub fn decode_mean(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_z(z)?;
        self.generator_net.forward_nograd(z)
    }

    fn log_recon(&self, x: &[f64], gx: &[f64]) -> f64 {
        let s2 = self.obs_sigma * self.obs_sigma;
        let sq: f64 = x.iter().zip(gx).map(|(a, b)| (a - b) * (a - b)).sum();
        -sq / (2.0 * s2) - 0.5 * self.data_dim as f64 * (2.0 * std::f64::consts::PI * s2).ln()
    }

    /// ELBO surrogate E_q[log p(x|z) + f(z)] − KL[q ‖ p0], Monte-Carlo
    /// estimated with `n_mc` posterior samples (constant log Z omitted).
    pub fn elbo(&self, x: &[f64], rng: &mut impl Rng, n_mc: usize) -> Result<f64> {
        if n_mc == 0 {
            return Err(contract("elbo needs n_mc >= 1"));
        }
        let moments = self.encode(x)?;
        let kl = gaussian_kl(&moments.mu, &moments.log_var)?;
        let mut acc = 0.0;
        for _ in 0..n_mc {
            let eps = normal_vec(rng, self.latent_dim);
            acc += self.elbo_sample_term(x, &moments, &eps)?;
        }
        Ok(acc / n_mc as f64 - kl)
    }

    /// Single-sample stochastic term of the ELBO surrogate: recon + f(z).
    pub(crate) fn elbo_sample_term(
        &self,
        x: &[f64],
        moments: &PosteriorMoments,
        eps: &[f64],
    ) -> Result<f64> {
        let z = Self::reparameterize(moments, eps);
        let gx = self.generator_net.forward_nograd(&z)?;
        Ok(self.log_recon(x, &gx) + self.free_energy(&z)?)
    }

    /// Deterministic single-eps ELBO surrogate (common random numbers), used
    /// for finite-difference checks of the ψ gradient.
    pub fn elbo_with_eps(&self, x: &[f64], eps: &[f64]) -> Result<f64> {
        let moments = self.encode(x)?;
        let kl = gaussian_kl(&moments.mu, &moments.log_var)?;
        Ok(self.elbo_sample_term(x, &moments, eps)? - kl)
    }

    /// Contrastive ascent gradient of the prior model:
    /// mean ∇F over posterior samples minus mean ∇F over prior-chain samples,
    /// with ∇ the softmax-weighted energy-net parameter gradient of f(z).
    pub fn grad_prior(&self, posterior_zs: &[Vec<f64>], prior_zs: &[Vec<f64>]) -> Result<MlpGrads> {
        if posterior_zs.is_empty() || prior_zs.is_empty() {
            return Err(contract("grad_prior needs non-empty sample batches"));
        }
        let mean_grad = |zs: &[Vec<f64>]| -> Result<MlpGrads> {
            let mut acc = MlpGrads::zeros_like(&self.energy_net);
            for z in zs {
                self.check_z(z)?;
                let (logits, tape) = self.energy_net.forward(z)?;
                let p = softmax(&logits)?;
                let (g, _) = self.energy_net.backward(&tape, &p)?;
                acc.add_scaled(&g, 1.0);
            }
            acc.scale(1.0 / zs.len() as f64);
            Ok(acc)
        };
        let mut grad = mean_grad(posterior_zs)?;
        grad.add_scaled(&mean_grad(prior_zs)?, -1.0);
        Ok(grad)
    }

    /// Single-sample reparameterized ascent gradient of the ELBO surrogate
    /// with respect to ψ = (generator, inference); energy parameters fixed.
    pub fn grad_inference_generator(&self, x: &[f64], rng: &mut impl Rng) -> Result<PsiGrads> {
        let eps = normal_vec(rng, self.latent_dim);
        self.grad_inference_generator_with_eps(x, &eps)
    }

    pub fn grad_inference_generator_with_eps(&self, x: &[f64], eps: &[f64]) -> Result<PsiGrads> {
        self.check_x(x)?;
        let d = self.latent_dim;
        let (enc_out, inf_tape) = self.inference_net.forward(x)?;
        let (mu, log_var) = (&enc_out[..d], &enc_out[d..]);
        let sd: Vec<f64> = log_var.iter().map(|lv| (lv / 2.0).exp()).collect();
        let z: Vec<f64> = mu
            .iter()
            .zip(&sd)
            .zip(eps)
            .map(|((m, s), e)| m + s * e)
            .collect();

        // Reconstruction: ∂/∂g [−‖x−g‖²/(2σ²)] = (x−g)/σ².
        let s2 = self.obs_sigma * self.obs_sigma;
        let (gx, gen_tape) = self.generator_net.forward(&z)?;
        let recon_grad: Vec<f64> = x.iter().zip(&gx).map(|(a, b)| (a - b) / s2).collect();
        let (gen_grads, dz_recon) = self.generator_net.backward(&gen_tape, &recon_grad)?;

        // Energy term f(z): z-gradient only, energy params held fixed.
        let (logits, e_tape) = self.energy_net.forward(&z)?;
        let p = softmax(&logits)?;
        let (_, dz_energy) = self.energy_net.backward(&e_tape, &p)?;

        // Chain through the reparameterization, plus the closed-form −KL term.
        let mut head = vec![0.0; 2 * d];
        for i in 0..d {
            let dz = dz_recon[i] + dz_energy[i];
            head[i] = dz - mu[i];
            head[d + i] = dz * 0.5 * sd[i] * eps[i] - 0.5 * (log_var[i].exp() - 1.0);
        }
        let (inf_grads, _) = self.inference_net.backward(&inf_tape, &head)?;
        Ok(PsiGrads {
            generator: gen_grads,
            inference: inf_grads,
        })
    }

    /// Ascent gradient of weight · log p(y|z⁺) with z⁺ ~ q(z|x), with respect
    /// to the energy and inference parameters.
    pub fn grad_supervised(
        &self,
        x: &[f64],
        y: usize,
        rng: &mut impl Rng,
        weight: f64,
    ) -> Result<ThetaGrads> {
        let eps = normal_vec(rng, self.latent_dim);
        self.grad_supervised_with_eps(x, y, &eps, weight)
    }

    pub fn grad_supervised_with_eps(
        &self,
        x: &[f64],
        y: usize,
        eps: &[f64],
        weight: f64,
    ) -> Result<ThetaGrads> {
        self.check_x(x)?;
        self.check_label(y)?;
        if weight <= 0.0 {
            return Err(contract("supervised weight must be positive"));
        }
        let d = self.latent_dim;
        let (enc_out, inf_tape) = self.inference_net.forward(x)?;
        let (mu, log_var) = (&enc_out[..d], &enc_out[d..]);
        let sd: Vec<f64> = log_var.iter().map(|lv| (lv / 2.0).exp()).collect();
        let z: Vec<f64> = mu
            .iter()
            .zip(&sd)
            .zip(eps)
            .map(|((m, s), e)| m + s * e)
            .collect();

        // ∂ log softmax(F(z))[y] / ∂ logits = one_hot(y) − p.
        let (logits, e_tape) = self.energy_net.forward(&z)?;
        let p = softmax(&logits)?;
        let mut logit_grad: Vec<f64> = p.iter().map(|pi| -pi).collect();
        logit_grad[y] += 1.0;
        let (mut energy_grads, dz) = self.energy_net.backward(&e_tape, &logit_grad)?;

        let mut head = vec![0.0; 2 * d];
        for i in 0..d {
            head[i] = dz[i];
            head[d + i] = dz[i] * 0.5 * sd[i] * eps[i];
        }
        let (mut inf_grads, _) = self.inference_net.backward(&inf_tape, &head)?;
        energy_grads.scale(weight);
        inf_grads.scale(weight);
        Ok(ThetaGrads {
            energy: energy_grads,
            inference: inf_grads,
        })
    }

    /// Deterministic value of weight · log p(y|z⁺) for the fixed eps, used by
    /// finite-difference checks of `grad_supervised_with_eps`.
    pub fn supervised_objective_with_eps(
        &self,
        x: &[f64],
        y: usize,
        eps: &[f64],
        weight: f64,
    ) -> Result<f64> {
        let moments = self.encode(x)?;
        let z = Self::reparameterize(&moments, eps);
        let logits = self.energy_logits(&z)?;
        Ok(weight * (logits[y] - logsumexp(&logits)?))
    }

    /// Amortized class prediction p(y|x) ≈ E_q[softmax(F(z))], Monte-Carlo
    /// averaged over `n_mc` posterior samples.
    pub fn predict(&self, x: &[f64], rng: &mut impl Rng, n_mc: usize) -> Result<Vec<f64>> {
        if n_mc == 0 {
            return Err(contract("predict needs n_mc >= 1"));
        }
        let moments = self.encode(x)?;
        let mut acc = vec![0.0; self.num_classes];
        for _ in 0..n_mc {
            let eps = normal_vec(rng, self.latent_dim);
            let z = Self::reparameterize(&moments, &eps);
            for (a, p) in acc.iter_mut().zip(self.classify_latent(&z)?) {
                *a += p;
            }
        }
        for a in &mut acc {
            *a /= n_mc as f64;
        }
        Ok(acc)
    }
}

fn write_mlp<W: std::io::Write>(w: &mut ByteWriter<W>, net: &Mlp) -> Result<()> {
    w.write_u32(net.layers.len() as u32)?;
    for layer in &net.layers {
        w.write_u32(layer.in_dim() as u32)?;
        w.write_u32(layer.out_dim() as u32)?;
        w.write_u32(layer.activation.code())?;
        w.write_f64_slice(&layer.weight.data)?;
        w.write_f64_slice(&layer.bias)?;
    }
    Ok(())
}

fn read_mlp<R: std::io::Read>(r: &mut ByteReader<R>) -> Result<Mlp> {
    let n_layers = r.read_u32("layer count")? as usize;
    if n_layers == 0 || n_layers > 64 {
        return Err(Error::Parse {
            offset: r.offset() - 4,
            detail: format!("implausible layer count {n_layers}"),
        });
    }
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let in_d = r.read_u32("layer input width")? as usize;
        let out_d = r.read_u32("layer output width")? as usize;
        let code_at = r.offset();
        let code = r.read_u32("activation code")?;
        let activation = Activation::from_code(code).ok_or_else(|| Error::Parse {
            offset: code_at,
            detail: format!("unknown activation code {code}"),
        })?;
        if in_d == 0 || out_d == 0 || in_d.saturating_mul(out_d) > 1 << 24 {
            return Err(Error::Parse {
                offset: code_at,
                detail: format!("implausible layer dimensions {in_d}x{out_d}"),
            });
        }
        let weight = r.read_f64_vec(in_d * out_d, "weights")?;
        let bias = r.read_f64_vec(out_d, "biases")?;
        layers.push(crate::numkernel::Layer {
            weight: Tensor::new(vec![out_d, in_d], weight).map_err(|e| Error::Parse {
                offset: code_at,
                detail: e.to_string(),
            })?,
            bias,
            activation,
        });
    }
    Ok(Mlp { layers })
}

/// Writes a parameter checkpoint: magic, version, model metadata, then the
/// energy, generator, and inference networks.
pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<()> {
    let mut w = ByteWriter::new(BufWriter::new(File::create(path)?));
    w.write_bytes(CHECKPOINT_MAGIC)?;
    w.write_u32(CHECKPOINT_VERSION)?;
    w.write_u32(params.latent_dim as u32)?;
    w.write_u32(params.data_dim as u32)?;
    w.write_u32(params.num_classes as u32)?;
    w.write_f64(params.obs_sigma)?;
    write_mlp(&mut w, &params.energy_net)?;
    write_mlp(&mut w, &params.generator_net)?;
    write_mlp(&mut w, &params.inference_net)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    let mut r = ByteReader::new(BufReader::new(File::open(path)?));
    r.expect_magic(CHECKPOINT_MAGIC, "checkpoint")?;
    r.expect_version(CHECKPOINT_VERSION)?;
    let latent_dim = r.read_u32("latent dim")? as usize;
    let data_dim = r.read_u32("data dim")? as usize;
    let num_classes = r.read_u32("class count")? as usize;
    let sigma_at = r.offset();
    let obs_sigma = r.read_f64("obs_sigma")?;
    if !(obs_sigma.is_finite() && obs_sigma > 0.0) {
        return Err(Error::Parse {
            offset: sigma_at,
            detail: format!("obs_sigma must be positive and finite, got {obs_sigma}"),
        });
    }
    let energy_net = read_mlp(&mut r)?;
    let generator_net = read_mlp(&mut r)?;
    let inference_net = read_mlp(&mut r)?;
    r.expect_eof()?;
    let params = ModelParams {
        energy_net,
        generator_net,
        inference_net,
        obs_sigma,
        latent_dim,
        data_dim,
        num_classes,
    };
    let consistent = params.energy_net.input_dim() == latent_dim
        && params.energy_net.output_dim() == num_classes
        && params.generator_net.input_dim() == latent_dim
        && params.generator_net.output_dim() == data_dim
        && params.inference_net.input_dim() == data_dim
        && params.inference_net.output_dim() == 2 * latent_dim;
    if !consistent {
        return Err(Error::Parse {
            offset: 0,
            detail: "network dimensions inconsistent with checkpoint metadata".to_string(),
        });
    }
    Ok(params)
}

/// Sets every weight and bias of a net to zero. Test and fixture helper.
pub fn zero_net(net: &mut Mlp) {
    for layer in &mut net.layers {
        layer.weight.data.iter_mut().for_each(|w| *w = 0.0);
        layer.bias.iter_mut().for_each(|b| *b = 0.0);
    }
}

#[cfg(test)]
pub(crate) use tests_support::*;
