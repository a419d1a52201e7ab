//! A small patch transformer: coarse patch tokens per channel, attention
//! across channels biased by the montage, state-space scans across patches.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{graph_attention, patchify, ssm_scan, Matrix, QuantileForecast, SsmParams};
use crate::dsp::rng::{self, StreamKind};
use crate::dsp::stats::logistic;
use crate::signal::{bandpower_orthonormal, BiasKind};
use crate::{Error, Result};

/// Bands summarised by the fine-patch channel embedding.
const FINE_BANDS: [(f64, f64); 4] = [(0.5, 4.0), (4.0, 8.0), (8.0, 13.0), (13.0, 30.0)];
const NORM_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Attention,
    Ssm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackboneConfig {
    pub model_dim: usize,
    pub heads: usize,
    pub layers: usize,
    pub coarse_patch: usize,
    pub fine_patch: usize,
    pub graph_bias_strength: f64,
    pub bias_kind: BiasKind,
    /// Layer types, cycled over `layers`.
    pub layer_pattern: Vec<LayerKind>,
    pub quantile_levels: usize,
    pub horizon: usize,
}

impl Default for BackboneConfig {
    fn default() -> Self {
        Self {
            model_dim: 512,
            heads: 8,
            layers: 4,
            coarse_patch: 64,
            fine_patch: 256,
            graph_bias_strength: 1.0,
            bias_kind: BiasKind::Adjacency,
            layer_pattern: vec![LayerKind::Attention, LayerKind::Ssm],
            quantile_levels: 9,
            horizon: 64,
        }
    }
}

impl BackboneConfig {
    /// Test-sized configuration.
    pub fn toy() -> Self {
        Self {
            model_dim: 32,
            heads: 4,
            layers: 2,
            horizon: 8,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.model_dim == 0 || self.heads == 0 || self.model_dim % self.heads != 0 {
            return Err(Error::Config(format!(
                "model_dim {} must be a positive multiple of heads {}",
                self.model_dim, self.heads
            )));
        }
        if self.coarse_patch == 0 || self.fine_patch == 0 {
            return Err(Error::Config("patch sizes must be positive".into()));
        }
        if self.layer_pattern.is_empty() {
            return Err(Error::Config("layer_pattern must not be empty".into()));
        }
        if self.quantile_levels == 0 || self.horizon == 0 {
            return Err(Error::Config("quantile head needs levels and horizon".into()));
        }
        if !self.graph_bias_strength.is_finite() {
            return Err(Error::Config("graph_bias_strength must be finite".into()));
        }
        Ok(())
    }

    pub fn layer_kind(&self, l: usize) -> LayerKind {
        self.layer_pattern[l % self.layer_pattern.len()]
    }
}

/// Named tensors: shape plus row-major values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TensorStore {
    pub tensors: BTreeMap<String, (Vec<usize>, Vec<f64>)>,
}

impl TensorStore {
    pub fn insert(&mut self, name: &str, shape: Vec<usize>, data: Vec<f64>) {
        self.tensors.insert(name.to_string(), (shape, data));
    }

    fn take(&self, name: &str, shape: &[usize]) -> Result<Vec<f64>> {
        let (s, d) = self
            .tensors
            .get(name)
            .ok_or_else(|| Error::Config(format!("weight tensor {name} missing")))?;
        if s.as_slice() != shape || d.len() != shape.iter().product::<usize>() {
            return Err(Error::Shape(format!("tensor {name} has shape {s:?}, expected {shape:?}")));
        }
        Ok(d.clone())
    }

    fn matrix(&self, name: &str, rows: usize, cols: usize) -> Result<Matrix> {
        Matrix::from_vec(rows, cols, self.take(name, &[rows, cols])?)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct AttentionLayer {
    wq: Matrix,
    wk: Matrix,
    wv: Matrix,
    wo: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
enum Layer {
    Attention(AttentionLayer),
    Ssm(SsmParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Backbone {
    cfg: BackboneConfig,
    embed_coarse: Matrix,
    embed_fine: Matrix,
    layers: Vec<Layer>,
    detect_w: Vec<f64>,
    detect_b: f64,
    quantile_w: Matrix,
    quantile_b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackboneOutput {
    pub detection: f64,
    /// In the input's units (standardized output times the pooled channel scale).
    pub quantiles: QuantileForecast,
}

fn rms_norm_rows(m: &mut Matrix) {
    for r in 0..m.rows() {
        let row = m.row_mut(r);
        let ms = row.iter().map(|v| v * v).sum::<f64>() / row.len() as f64;
        let inv = 1.0 / libm::sqrt(ms + NORM_EPS);
        row.iter_mut().for_each(|v| *v *= inv);
    }
}

impl Backbone {
    fn names(cfg: &BackboneConfig) -> Vec<(String, Vec<usize>)> {
        let d = cfg.model_dim;
        let mut v = vec![
            ("embed.coarse".to_string(), vec![cfg.coarse_patch, d]),
            ("embed.fine".to_string(), vec![FINE_BANDS.len(), d]),
        ];
        for l in 0..cfg.layers {
            let parts: &[(&str, Vec<usize>)] = match cfg.layer_kind(l) {
                LayerKind::Attention => &[
                    ("attn.wq", vec![d, d]),
                    ("attn.wk", vec![d, d]),
                    ("attn.wv", vec![d, d]),
                    ("attn.wo", vec![d, d]),
                ],
                LayerKind::Ssm => &[
                    ("ssm.a", vec![d]),
                    ("ssm.b", vec![d, d]),
                    ("ssm.c", vec![d, d]),
                    ("ssm.d", vec![d, d]),
                ],
            };
            for (n, s) in parts {
                v.push((format!("layer{l}.{n}"), s.clone()));
            }
        }
        let q = cfg.horizon * cfg.quantile_levels;
        v.push(("head.detect.w".into(), vec![d]));
        v.push(("head.detect.b".into(), vec![1]));
        v.push(("head.quantile.w".into(), vec![d, q]));
        v.push(("head.quantile.b".into(), vec![q]));
        v
    }

    /// Seeded initialization; values are rounded to `f32` so a saved weight
    /// file reloads bit-identically.
    pub fn random(cfg: &BackboneConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut store = TensorStore::default();
        for (i, (name, shape)) in Self::names(cfg).into_iter().enumerate() {
            let mut r = rng::substream(seed, StreamKind::Weights, i as u64);
            let count: usize = shape.iter().product();
            let data: Vec<f64> = if name.ends_with("ssm.a") {
                (0..count).map(|_| rng::uniform(&mut r, 0.5, 0.99) as f32 as f64).collect()
            } else if name.ends_with(".b") && !name.contains("ssm") {
                vec![0.0; count]
            } else {
                let scale = 1.0 / libm::sqrt(shape[0] as f64);
                (0..count).map(|_| (scale * rng::normal(&mut r)) as f32 as f64).collect()
            };
            store.insert(&name, shape, data);
        }
        Self::from_store(cfg, &store)
    }

    pub fn from_store(cfg: &BackboneConfig, store: &TensorStore) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.model_dim;
        let mut layers = Vec::with_capacity(cfg.layers);
        for l in 0..cfg.layers {
            let p = |n: &str| format!("layer{l}.{n}");
            layers.push(match cfg.layer_kind(l) {
                LayerKind::Attention => Layer::Attention(AttentionLayer {
                    wq: store.matrix(&p("attn.wq"), d, d)?,
                    wk: store.matrix(&p("attn.wk"), d, d)?,
                    wv: store.matrix(&p("attn.wv"), d, d)?,
                    wo: store.matrix(&p("attn.wo"), d, d)?,
                }),
                LayerKind::Ssm => Layer::Ssm(SsmParams::new(
                    store.take(&p("ssm.a"), &[d])?,
                    store.matrix(&p("ssm.b"), d, d)?,
                    store.matrix(&p("ssm.c"), d, d)?,
                    store.matrix(&p("ssm.d"), d, d)?,
                )?),
            });
        }
        let q = cfg.horizon * cfg.quantile_levels;
        Ok(Self {
            cfg: cfg.clone(),
            embed_coarse: store.matrix("embed.coarse", cfg.coarse_patch, d)?,
            embed_fine: store.matrix("embed.fine", FINE_BANDS.len(), d)?,
            layers,
            detect_w: store.take("head.detect.w", &[d])?,
            detect_b: store.take("head.detect.b", &[1])?[0],
            quantile_w: store.matrix("head.quantile.w", d, q)?,
            quantile_b: store.take("head.quantile.b", &[q])?,
        })
    }

    pub fn to_store(&self) -> TensorStore {
        let mut s = TensorStore::default();
        let d = self.cfg.model_dim;
        let mat = |s: &mut TensorStore, n: &str, m: &Matrix| s.insert(n, vec![m.rows(), m.cols()], m.as_slice().to_vec());
        mat(&mut s, "embed.coarse", &self.embed_coarse);
        mat(&mut s, "embed.fine", &self.embed_fine);
        for (l, layer) in self.layers.iter().enumerate() {
            let p = |n: &str| format!("layer{l}.{n}");
            match layer {
                Layer::Attention(a) => {
                    mat(&mut s, &p("attn.wq"), &a.wq);
                    mat(&mut s, &p("attn.wk"), &a.wk);
                    mat(&mut s, &p("attn.wv"), &a.wv);
                    mat(&mut s, &p("attn.wo"), &a.wo);
                }
                Layer::Ssm(ssm) => {
                    s.insert(&p("ssm.a"), vec![d], ssm.a().to_vec());
                    mat(&mut s, &p("ssm.b"), ssm.b());
                    mat(&mut s, &p("ssm.c"), ssm.c());
                    mat(&mut s, &p("ssm.d"), ssm.d());
                }
            }
        }
        s.insert("head.detect.w", vec![d], self.detect_w.clone());
        s.insert("head.detect.b", vec![1], vec![self.detect_b]);
        mat(&mut s, "head.quantile.w", &self.quantile_w);
        s.insert("head.quantile.b", vec![self.quantile_b.len()], self.quantile_b.clone());
        s
    }

    pub fn config(&self) -> &BackboneConfig {
        &self.cfg
    }

    /// Forward pass over a `C x T` window. `bias` is the `C x C` montage bias.
    pub fn forward(&self, window: &[Vec<f64>], rate_hz: f64, bias: &[f64]) -> Result<BackboneOutput> {
        let c = window.len();
        let t = window.first().map_or(0, Vec::len);
        if c == 0 || t == 0 || window.iter().any(|w| w.len() != t) {
            return Err(Error::Shape("backbone input must be a non-empty C x T window".into()));
        }
        if bias.len() != c * c {
            return Err(Error::Shape(format!("bias has {} entries for {c} channels", bias.len())));
        }
        let d = self.cfg.model_dim;

        // Per-channel standardization; the pooled scale restores units at the end.
        let mut scales = Vec::with_capacity(c);
        let mut tokens: Vec<Matrix> = Vec::with_capacity(c);
        for x in window {
            let mean = x.iter().sum::<f64>() / t as f64;
            let sd = libm::sqrt(x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / t as f64);
            scales.push(sd);
            let inv = 1.0 / (sd + NORM_EPS);
            let z: Vec<f64> = x.iter().map(|v| (v - mean) * inv).collect();

            let coarse = patchify(&z, self.cfg.coarse_patch)?;
            let mut tok = coarse.data.matmul(&self.embed_coarse)?;

            let fine = patchify(&z, self.cfg.fine_patch)?;
            let mut feats = [0.0; FINE_BANDS.len()];
            for p in 0..fine.n_patches() {
                let seg = &fine.data.row(p)[..fine.valid[p]];
                for (f, band) in feats.iter_mut().zip(FINE_BANDS) {
                    *f += libm::log1p(bandpower_orthonormal(seg, rate_hz, band, 1.0)?.power);
                }
            }
            let n = fine.n_patches() as f64;
            let feats: Vec<f64> = feats.iter().map(|f| f / n).collect();
            let chan = self.embed_fine.transpose().matvec(&feats)?;
            for r in 0..tok.rows() {
                for (v, e) in tok.row_mut(r).iter_mut().zip(&chan) {
                    *v += e;
                }
            }
            rms_norm_rows(&mut tok);
            tokens.push(tok);
        }
        let n_patches = tokens[0].rows();

        for layer in &self.layers {
            match layer {
                Layer::Attention(a) => {
                    let dh = d / self.cfg.heads;
                    for p in 0..n_patches {
                        let mut x = Matrix::zeros(c, d);
                        for ch in 0..c {
                            x.row_mut(ch).copy_from_slice(tokens[ch].row(p));
                        }
                        let (q, k, v) = (x.matmul(&a.wq)?, x.matmul(&a.wk)?, x.matmul(&a.wv)?);
                        let mut heads = Matrix::zeros(c, d);
                        for h in 0..self.cfg.heads {
                            let o = graph_attention(
                                &q.col_block(h * dh, dh),
                                &k.col_block(h * dh, dh),
                                &v.col_block(h * dh, dh),
                                bias,
                                self.cfg.graph_bias_strength,
                            )?;
                            for r in 0..c {
                                heads.row_mut(r)[h * dh..(h + 1) * dh].copy_from_slice(o.row(r));
                            }
                        }
                        let mut out = x.add(&heads.matmul(&a.wo)?)?;
                        rms_norm_rows(&mut out);
                        for ch in 0..c {
                            tokens[ch].row_mut(p).copy_from_slice(out.row(ch));
                        }
                    }
                }
                Layer::Ssm(params) => {
                    for tok in tokens.iter_mut() {
                        let y = ssm_scan(tok, params)?;
                        let mut out = tok.add(&y)?;
                        rms_norm_rows(&mut out);
                        *tok = out;
                    }
                }
            }
        }

        let mut pooled = vec![0.0; d];
        for tok in &tokens {
            for r in 0..n_patches {
                for (s, v) in pooled.iter_mut().zip(tok.row(r)) {
                    *s += v;
                }
            }
        }
        let inv = 1.0 / (c * n_patches) as f64;
        pooled.iter_mut().for_each(|v| *v *= inv);
        let z = self.detect_b + pooled.iter().zip(&self.detect_w).map(|(a, b)| a * b).sum::<f64>();
        let detection = logistic(z);

        let mut last = vec![0.0; d];
        for tok in &tokens {
            for (s, v) in last.iter_mut().zip(tok.row(n_patches - 1)) {
                *s += v / c as f64;
            }
        }
        let raw = self.quantile_w.transpose().matvec(&last)?;
        let scale = scales.iter().sum::<f64>() / c as f64;
        let k = self.cfg.quantile_levels;
        let values: Vec<Vec<f64>> = (0..self.cfg.horizon)
            .map(|h| (0..k).map(|j| (raw[h * k + j] + self.quantile_b[h * k + j]) * scale).collect())
            .collect();
        let quantiles = QuantileForecast::new(QuantileForecast::default_levels(k), values)?;
        Ok(BackboneOutput { detection, quantiles })
    }
}
