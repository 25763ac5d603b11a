use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::autograd::Mat;
use crate::corpus::Entity;
use crate::error::{Error, Result};

/// Fixed embedding per knowledge-graph entity id, plus the mean over all rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeEmbeddingTable {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    rows: Mat,
    global_mean: Mat,
}

impl TypeEmbeddingTable {
    pub fn new(ids: Vec<String>, rows: Mat) -> Result<Self> {
        if ids.len() != rows.nrows() {
            return Err(Error::Shape(format!("{} ids for {} rows", ids.len(), rows.nrows())));
        }
        if ids.is_empty() {
            return Err(Error::Insufficient("type table has no rows".into()));
        }
        if !rows.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("type embedding".into()));
        }
        let mut index = HashMap::new();
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::Validation(format!("type id {id} repeated")));
            }
        }
        let global_mean = rows.mean_axis(ndarray::Axis(0)).unwrap().insert_axis(ndarray::Axis(0));
        Ok(TypeEmbeddingTable {
            ids,
            index,
            rows,
            global_mean,
        })
    }

    /// Rows drawn from N(0, 1) with a fixed seed.
    pub fn random(ids: Vec<String>, dim: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let rows = Mat::from_shape_simple_fn((ids.len(), dim), || normal.sample(&mut rng));
        Self::new(ids, rows)
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<ndarray::ArrayView1<'_, f64>> {
        self.index.get(id).map(|&i| self.rows.row(i))
    }

    /// `1 × dim` mean over every row.
    pub fn global_mean(&self) -> &Mat {
        &self.global_mean
    }

    /// Tab-separated rows: `id<TAB>f1<TAB>...<TAB>fd`.
    pub fn load_tsv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut ids = Vec::new();
        let mut data = Vec::new();
        let mut dim = None;
        for (i, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let id = fields.next().unwrap().to_string();
            let vals: Vec<f64> = fields
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
            match dim {
                None => dim = Some(vals.len()),
                Some(d) if d != vals.len() => {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: format!("expected {d} values, found {}", vals.len()),
                    })
                }
                _ => {}
            }
            ids.push(id);
            data.extend(vals);
        }
        let d = dim.unwrap_or(0);
        let rows = Mat::from_shape_vec((ids.len(), d), data).map_err(|e| Error::Shape(e.to_string()))?;
        Self::new(ids, rows)
    }

    pub fn save_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = Vec::new();
        for (id, row) in self.ids.iter().zip(self.rows.rows()) {
            write!(out, "{id}").unwrap();
            for v in row {
                write!(out, "\t{v}").unwrap();
            }
            out.push(b'\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Mean embedding of the entity's resolvable type ids, or the table's
/// global mean when none resolve. Returned as `1 × dim`.
pub fn type_representation(entity: &Entity, table: &TypeEmbeddingTable) -> Mat {
    let rows: Vec<_> = entity.type_ids.iter().filter_map(|t| table.get(t)).collect();
    if rows.is_empty() {
        return table.global_mean().clone();
    }
    let mut acc = ndarray::Array1::<f64>::zeros(table.dim());
    for r in &rows {
        acc += r;
    }
    acc /= rows.len() as f64;
    acc.insert_axis(ndarray::Axis(0))
}
