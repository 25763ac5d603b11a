//! Named parameter tensors, their gradients, and the Adam optimizer.
//!
//! Checkpoints are JSON objects keyed by canonical parameter name:
//! `{"name": {"shape": [rows, cols], "data": [...row-major...]}}`.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat = Array2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Mat>,
    index: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a tensor. Panics if `name` is taken: names are fixed by the model layout.
    pub fn add(&mut self, name: impl Into<String>, value: Mat) -> ParamId {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "parameter {name} registered twice");
        let id = ParamId(self.values.len());
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.values.push(value);
        id
    }

    /// Register a tensor drawn from N(0, std²).
    pub fn add_normal<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        shape: (usize, usize),
        std: f64,
        rng: &mut R,
    ) -> ParamId {
        let normal = Normal::new(0.0, std).expect("finite std");
        let value = Mat::from_shape_simple_fn(shape, || normal.sample(rng));
        self.add(name, value)
    }

    pub fn add_const(&mut self, name: impl Into<String>, shape: (usize, usize), v: f64) -> ParamId {
        self.add(name, Mat::from_elem(shape, v))
    }

    pub fn get(&self, id: ParamId) -> &Mat {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Mat {
        &mut self.values[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint(
            self.names
                .iter()
                .zip(&self.values)
                .map(|(n, v)| {
                    (
                        n.clone(),
                        TensorRecord {
                            shape: [v.nrows(), v.ncols()],
                            data: v.iter().copied().collect(),
                        },
                    )
                })
                .collect(),
        )
    }

    /// Overwrite every registered tensor from `ckpt`; names and shapes must match exactly.
    pub fn load_checkpoint(&mut self, ckpt: &Checkpoint) -> Result<()> {
        if ckpt.0.len() != self.len() {
            return Err(Error::Validation(format!(
                "checkpoint has {} tensors, model expects {}",
                ckpt.0.len(),
                self.len()
            )));
        }
        for (name, rec) in &ckpt.0 {
            let id = self
                .id(name)
                .ok_or_else(|| Error::Validation(format!("unexpected tensor {name}")))?;
            let v = Mat::from_shape_vec((rec.shape[0], rec.shape[1]), rec.data.clone())
                .map_err(|e| Error::Shape(format!("{name}: {e}")))?;
            if v.raw_dim() != self.get(id).raw_dim() {
                return Err(Error::Shape(format!(
                    "{name}: checkpoint {:?} vs model {:?}",
                    v.shape(),
                    self.get(id).shape()
                )));
            }
            *self.get_mut(id) = v;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

/// Tensor map keyed by canonical parameter name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Checkpoint(pub BTreeMap<String, TensorRecord>);

impl Checkpoint {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_vec(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&raw)?)
    }
}

/// Gradient buffers aligned with a [`ParamStore`]; untouched slots stay `None`.
#[derive(Debug, Clone)]
pub struct Grads(Vec<Option<Mat>>);

impl Grads {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Grads(vec![None; store.len()])
    }

    pub fn get(&self, id: ParamId) -> Option<&Mat> {
        self.0[id.0].as_ref()
    }

    pub(crate) fn accumulate(&mut self, id: ParamId, g: &Mat) {
        match &mut self.0[id.0] {
            Some(e) => *e += g,
            slot @ None => *slot = Some(g.clone()),
        }
    }

    pub(crate) fn scatter_rows(&mut self, id: ParamId, rows: &[usize], g: &Mat, table_rows: usize) {
        let buf = self.0[id.0].get_or_insert_with(|| Mat::zeros((table_rows, g.ncols())));
        for (i, &r) in rows.iter().enumerate() {
            let mut dst = buf.row_mut(r);
            dst += &g.row(i);
        }
    }

    /// Add `other` into `self`.
    pub fn merge(&mut self, other: &Grads) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            let Some(b) = b else { continue };
            match a {
                Some(a) => *a += b,
                None => *a = Some(b.clone()),
            }
        }
    }

    pub fn scale(&mut self, f: f64) {
        for g in self.0.iter_mut().flatten() {
            *g *= f;
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|g| g.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    /// Gradient as a tensor of the parameter's full shape (zeros where untouched).
    pub fn dense(&self, id: ParamId, store: &ParamStore) -> Mat {
        self.get(id)
            .cloned()
            .unwrap_or_else(|| Mat::zeros(store.get(id).raw_dim()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: Some(1.0),
        }
    }
}

/// Adaptive moment estimation with optional global-norm clipping.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<Mat>,
    v: Vec<Mat>,
    step: u64,
}

impl Adam {
    pub fn new(store: &ParamStore, config: AdamConfig) -> Self {
        let zeros: Vec<Mat> = store.values.iter().map(|v| Mat::zeros(v.raw_dim())).collect();
        Adam {
            config,
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Apply one update. Returns the pre-clip gradient norm.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Grads) -> f64 {
        let norm = grads.global_norm();
        let clip = match self.config.clip_norm {
            Some(c) if norm > c => c / norm,
            _ => 1.0,
        };
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (self.config.beta1, self.config.beta2);
        let bc1 = 1.0 - b1.powi(t);
        let bc2 = 1.0 - b2.powi(t);
        let lr = self.config.lr;
        let eps = self.config.eps;
        for id in store.ids() {
            let g = grads.dense(id, store);
            let (m, v) = (&mut self.m[id.0], &mut self.v[id.0]);
            ndarray::Zip::from(&mut *store.get_mut(id))
                .and(m)
                .and(v)
                .and(&g)
                .for_each(|p, m, v, &g| {
                    let g = g * clip;
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
                });
        }
        norm
    }
}
