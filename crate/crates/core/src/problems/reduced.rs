//! Reduced models on disk: dense Matrix Market files plus `metadata.json`
//! with shifts, tangential directions and the residual history.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::bundle::{ensure_dir, read_json, write_json};
use super::mtx;
use crate::adaptive::{AbtlOutput, IterationRecord};
use crate::btl::Shift;
use crate::error::{MorError, Result};
use crate::linalg::CMat;
use crate::second_order::SecondOrderReducedModel;
use crate::system::{ReducedModel, TransferFunction};

pub const REDUCED_METADATA_FILE: &str = "metadata.json";

/// Column-major dense block for JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseBlock {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl From<&CMat> for DenseBlock {
    fn from(m: &CMat) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.iter().copied().collect(),
        }
    }
}

impl DenseBlock {
    pub fn to_matrix(&self) -> Result<CMat> {
        if self.data.len() != self.rows * self.cols {
            return Err(MorError::DimensionMismatch(format!(
                "block {}x{} with {} values",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Ok(CMat::from_column_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    FirstOrder,
    SecondOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedMetadata {
    pub kind: ModelKind,
    pub m: usize,
    pub s: usize,
    pub p: usize,
    pub order: usize,
    pub converged: bool,
    pub shifts_right: Vec<Shift>,
    pub shifts_left: Vec<Shift>,
    pub directions_right: Vec<DenseBlock>,
    pub directions_left: Vec<DenseBlock>,
    pub history: Vec<IterationRecord>,
    pub biorthogonality_error: f64,
    /// condition of the coupling block, second-order runs only
    pub coupling_condition: Option<f64>,
    /// wall seconds per iteration; the only field that varies between
    /// otherwise identical runs
    pub timings: Vec<f64>,
    /// the invocation that produced the model, stored verbatim
    pub config: Option<serde_json::Value>,
}

impl ReducedMetadata {
    pub fn from_output(out: &AbtlOutput, kind: ModelKind, order: usize) -> Self {
        let st = &out.state;
        Self {
            kind,
            m: st.iterations(),
            s: st.s(),
            p: out.model.p(),
            order,
            converged: out.converged,
            shifts_right: st.shifts_right().to_vec(),
            shifts_left: st.shifts_left().to_vec(),
            directions_right: st.dirs_right().iter().map(DenseBlock::from).collect(),
            directions_left: st.dirs_left().iter().map(DenseBlock::from).collect(),
            history: out.history.clone(),
            biorthogonality_error: st.biorthogonality_error(),
            coupling_condition: None,
            timings: out.timings.clone(),
            config: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SavedModel {
    FirstOrder(ReducedModel),
    SecondOrder(SecondOrderReducedModel),
}

impl SavedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            SavedModel::FirstOrder(_) => ModelKind::FirstOrder,
            SavedModel::SecondOrder(_) => ModelKind::SecondOrder,
        }
    }

    pub fn order(&self) -> usize {
        match self {
            SavedModel::FirstOrder(r) => r.order(),
            SavedModel::SecondOrder(r) => r.order(),
        }
    }
}

impl TransferFunction for SavedModel {
    fn ports(&self) -> usize {
        match self {
            SavedModel::FirstOrder(r) => r.ports(),
            SavedModel::SecondOrder(r) => r.ports(),
        }
    }

    fn transfer(&self, omega: Complex64) -> Result<CMat> {
        match self {
            SavedModel::FirstOrder(r) => r.transfer(omega),
            SavedModel::SecondOrder(r) => r.transfer(omega),
        }
    }
}

/// Writes `am.mtx`, `bm.mtx`, `cm.mtx` (first order) or `dm.mtx`, `km.mtx`,
/// `bm.mtx`, `cm.mtx` (second order) and `metadata.json` into `dir`.
pub fn save_reduced<P: AsRef<Path>>(dir: P, model: &SavedModel, meta: &ReducedMetadata) -> Result<()> {
    let dir = dir.as_ref();
    if meta.kind != model.kind() {
        return Err(MorError::InvalidArgument("metadata kind does not match the model".into()));
    }
    ensure_dir(dir)?;
    match model {
        SavedModel::FirstOrder(r) => {
            mtx::write_complex_dense(dir.join("am.mtx"), &r.am)?;
            mtx::write_complex_dense(dir.join("bm.mtx"), &r.bm)?;
            mtx::write_complex_dense(dir.join("cm.mtx"), &r.cm)?;
        }
        SavedModel::SecondOrder(r) => {
            mtx::write_complex_dense(dir.join("dm.mtx"), &r.dm)?;
            mtx::write_complex_dense(dir.join("km.mtx"), &r.km)?;
            mtx::write_complex_dense(dir.join("bm.mtx"), &r.bm)?;
            mtx::write_complex_dense(dir.join("cm.mtx"), &r.cm)?;
        }
    }
    write_json(&dir.join(REDUCED_METADATA_FILE), meta)
}

pub fn load_reduced<P: AsRef<Path>>(dir: P) -> Result<(SavedModel, ReducedMetadata)> {
    let dir = dir.as_ref();
    let meta: ReducedMetadata = read_json(&dir.join(REDUCED_METADATA_FILE))?;
    let bm = mtx::read_complex_dense(dir.join("bm.mtx"))?;
    let cm = mtx::read_complex_dense(dir.join("cm.mtx"))?;
    let model = match meta.kind {
        ModelKind::FirstOrder => {
            let am = mtx::read_complex_dense(dir.join("am.mtx"))?;
            SavedModel::FirstOrder(ReducedModel::new(am, bm, cm, meta.m, meta.s)?)
        }
        ModelKind::SecondOrder => {
            let dm = mtx::read_complex_dense(dir.join("dm.mtx"))?;
            let km = mtx::read_complex_dense(dir.join("km.mtx"))?;
            let k = dm.nrows();
            if dm.ncols() != k || km.shape() != (k, k) || bm.nrows() != k || cm.ncols() != k {
                return Err(MorError::DimensionMismatch("inconsistent second-order reduced matrices".into()));
            }
            SavedModel::SecondOrder(SecondOrderReducedModel {
                dm,
                km,
                bm,
                cm,
                m: meta.m,
                s: meta.s,
            })
        }
    };
    Ok((model, meta))
}
