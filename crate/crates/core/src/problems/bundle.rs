//! Benchmark systems read from Matrix Market files, with the metadata needed
//! to describe and reproduce them.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fdm::{generate_fdm, uniform_matrix, FdmSpec};
use super::mtx;
use crate::error::{MorError, Result};
use crate::linalg::sparse::CscMatrix;
use crate::linalg::RMat;
use crate::second_order::SecondOrderSystem;
use crate::system::FirstOrderSystem;

pub const METADATA_FILE: &str = "bundle.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    FirstOrder,
    SecondOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMetadata {
    pub name: String,
    pub kind: SystemKind,
    pub n: usize,
    pub p: usize,
    /// suggested block width, when known
    pub s: Option<usize>,
    pub random_b: bool,
    pub random_c: bool,
    /// `C` was supplied as n×p and transposed on load
    pub c_transposed: bool,
    /// seed used for the random matrices, if any were drawn
    pub seed: Option<u64>,
    /// numerical symmetry of each system matrix, keyed `A` or `M`/`D`/`K`
    pub symmetric: BTreeMap<String, bool>,
}

#[derive(Debug, Clone)]
pub enum BundleSystem {
    FirstOrder(FirstOrderSystem),
    SecondOrder(SecondOrderSystem),
}

#[derive(Debug, Clone)]
pub struct BenchmarkBundle {
    pub system: BundleSystem,
    pub metadata: BundleMetadata,
}

/// Which matrices make up the system.
#[derive(Debug, Clone, PartialEq)]
pub enum SystemPaths {
    FirstOrder { a: PathBuf },
    /// `m = None` means `M = I`
    SecondOrder { m: Option<PathBuf>, d: PathBuf, k: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadOptions {
    pub b: Option<PathBuf>,
    pub c: Option<PathBuf>,
    /// port count for random `B`/`C`; defaults to the width of whichever
    /// of `B`, `C` was given
    pub p: Option<usize>,
    pub seed: u64,
    pub name: Option<String>,
    pub s: Option<usize>,
}

impl BenchmarkBundle {
    pub fn first_order(&self) -> Option<&FirstOrderSystem> {
        match &self.system {
            BundleSystem::FirstOrder(s) => Some(s),
            BundleSystem::SecondOrder(_) => None,
        }
    }

    pub fn second_order(&self) -> Option<&SecondOrderSystem> {
        match &self.system {
            BundleSystem::SecondOrder(s) => Some(s),
            BundleSystem::FirstOrder(_) => None,
        }
    }

    /// Bundle for a generated FDM problem.
    pub fn fdm(spec: &FdmSpec) -> Result<Self> {
        let sys = generate_fdm(spec)?;
        let a_sym = sys.a().is_symmetric();
        if let Some(d) = sys.a().diagonal().iter().find(|&&d| d >= 0.0) {
            log::warn!("FDM matrix has a nonnegative diagonal entry {d}");
        }
        Ok(Self {
            metadata: BundleMetadata {
                name: spec.name(),
                kind: SystemKind::FirstOrder,
                n: sys.n(),
                p: sys.p(),
                s: None,
                random_b: true,
                random_c: true,
                c_transposed: false,
                seed: Some(spec.seed),
                symmetric: BTreeMap::from([("A".to_string(), a_sym)]),
            },
            system: BundleSystem::FirstOrder(sys),
        })
    }
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "system".into(), |s| s.to_string_lossy().into_owned())
}

fn square(a: &CscMatrix, what: &str) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(MorError::DimensionMismatch(format!("{what} is {}x{}, expected square", a.nrows(), a.ncols())));
    }
    Ok(a.nrows())
}

/// Resolved input/output matrices and the flags describing them.
struct Ports {
    b: RMat,
    c: RMat,
    random_b: bool,
    random_c: bool,
    c_transposed: bool,
}

fn load_ports(n: usize, opts: &LoadOptions) -> Result<Ports> {
    let b = opts.b.as_ref().map(mtx::read_dense).transpose()?;
    let mut c = opts.c.as_ref().map(mtx::read_dense).transpose()?;
    let mut c_transposed = false;
    if let Some(cm) = &c {
        if cm.ncols() != n && cm.nrows() == n {
            c = Some(cm.transpose());
            c_transposed = true;
        }
    }
    if let Some(b) = &b {
        if b.nrows() != n {
            return Err(MorError::DimensionMismatch(format!("B has {} rows, system order is {n}", b.nrows())));
        }
    }
    if let Some(c) = &c {
        if c.ncols() != n {
            return Err(MorError::DimensionMismatch(format!("C is {}x{}, system order is {n}", c.nrows(), c.ncols())));
        }
    }
    let p = match (&b, &c, opts.p) {
        (Some(b), _, _) => b.ncols(),
        (None, Some(c), _) => c.nrows(),
        (None, None, Some(p)) => p,
        (None, None, None) => {
            return Err(MorError::InvalidArgument("port count needed when both B and C are random".into()))
        }
    };
    if let Some(q) = opts.p.filter(|&q| q != p) {
        return Err(MorError::DimensionMismatch(format!("requested p = {q} but the supplied matrices have {p} ports")));
    }
    // same draw order as the FDM generator: all of B, then all of C
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let rb = uniform_matrix(&mut rng, n, p);
    let rc = uniform_matrix(&mut rng, p, n);
    Ok(Ports {
        random_b: b.is_none(),
        random_c: c.is_none(),
        b: b.unwrap_or(rb),
        c: c.unwrap_or(rc),
        c_transposed,
    })
}

/// Reads a first- or second-order system. Missing `B` or `C` are replaced by
/// seeded uniform random matrices and flagged in the metadata.
pub fn load_matrix_market(paths: &SystemPaths, opts: &LoadOptions) -> Result<BenchmarkBundle> {
    let mut symmetric = BTreeMap::new();
    let (system, name, ports) = match paths {
        SystemPaths::FirstOrder { a } => {
            let am = mtx::read_sparse(a)?;
            let n = square(&am, "A")?;
            symmetric.insert("A".to_string(), am.is_symmetric());
            let ports = load_ports(n, opts)?;
            let sys = FirstOrderSystem::new(am, ports.b.clone(), ports.c.clone())?;
            (BundleSystem::FirstOrder(sys), file_stem(a), ports)
        }
        SystemPaths::SecondOrder { m, d, k } => {
            let mm = m.as_ref().map(mtx::read_sparse).transpose()?;
            let dm = mtx::read_sparse(d)?;
            let km = mtx::read_sparse(k)?;
            let n = square(&km, "K")?;
            if let Some(mm) = &mm {
                symmetric.insert("M".to_string(), mm.is_symmetric());
            }
            symmetric.insert("D".to_string(), dm.is_symmetric());
            symmetric.insert("K".to_string(), km.is_symmetric());
            let ports = load_ports(n, opts)?;
            let sys = SecondOrderSystem::new(mm, dm, km, ports.b.clone(), ports.c.clone())?;
            (BundleSystem::SecondOrder(sys), file_stem(k), ports)
        }
    };
    let (n, p) = match &system {
        BundleSystem::FirstOrder(s) => (s.n(), s.p()),
        BundleSystem::SecondOrder(s) => (s.n(), s.p()),
    };
    let any_random = ports.random_b || ports.random_c;
    Ok(BenchmarkBundle {
        metadata: BundleMetadata {
            name: opts.name.clone().unwrap_or(name),
            kind: match system {
                BundleSystem::FirstOrder(_) => SystemKind::FirstOrder,
                BundleSystem::SecondOrder(_) => SystemKind::SecondOrder,
            },
            n,
            p,
            s: opts.s,
            random_b: ports.random_b,
            random_c: ports.random_c,
            c_transposed: ports.c_transposed,
            seed: any_random.then_some(opts.seed),
            symmetric,
        },
        system,
    })
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| MorError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(|source| MorError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| MorError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| MorError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| MorError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Writes `A.mtx` (or `M.mtx`, `D.mtx`, `K.mtx`), `B.mtx`, `C.mtx` and
/// `bundle.json` into `dir`.
pub fn save_bundle<P: AsRef<Path>>(dir: P, bundle: &BenchmarkBundle) -> Result<()> {
    let dir = dir.as_ref();
    ensure_dir(dir)?;
    match &bundle.system {
        BundleSystem::FirstOrder(s) => {
            mtx::write_sparse(dir.join("A.mtx"), s.a())?;
            mtx::write_dense(dir.join("B.mtx"), s.b())?;
            mtx::write_dense(dir.join("C.mtx"), s.c())?;
        }
        BundleSystem::SecondOrder(s) => {
            if let Some(m) = s.mass() {
                mtx::write_sparse(dir.join("M.mtx"), m)?;
            }
            mtx::write_sparse(dir.join("D.mtx"), s.damping())?;
            mtx::write_sparse(dir.join("K.mtx"), s.stiffness())?;
            mtx::write_dense(dir.join("B.mtx"), s.b())?;
            mtx::write_dense(dir.join("C.mtx"), s.c())?;
        }
    }
    write_json(&dir.join(METADATA_FILE), &bundle.metadata)
}

/// Reads a directory written by [`save_bundle`].
pub fn load_bundle<P: AsRef<Path>>(dir: P) -> Result<BenchmarkBundle> {
    let dir = dir.as_ref();
    let metadata: BundleMetadata = read_json(&dir.join(METADATA_FILE))?;
    let b = mtx::read_dense(dir.join("B.mtx"))?;
    let c = mtx::read_dense(dir.join("C.mtx"))?;
    let system = match metadata.kind {
        SystemKind::FirstOrder => {
            BundleSystem::FirstOrder(FirstOrderSystem::new(mtx::read_sparse(dir.join("A.mtx"))?, b, c)?)
        }
        SystemKind::SecondOrder => {
            let m_path = dir.join("M.mtx");
            let m = if m_path.exists() { Some(mtx::read_sparse(m_path)?) } else { None };
            let d = mtx::read_sparse(dir.join("D.mtx"))?;
            let k = mtx::read_sparse(dir.join("K.mtx"))?;
            BundleSystem::SecondOrder(SecondOrderSystem::new(m, d, k, b, c)?)
        }
    };
    Ok(BenchmarkBundle { system, metadata })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fdm_bundle_round_trips_bit_identically() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = BenchmarkBundle::fdm(&FdmSpec::new(4, 2, 5)).unwrap();
        save_bundle(dir.path(), &bundle).unwrap();
        let back = load_bundle(dir.path()).unwrap();
        let (a, b) = (bundle.first_order().unwrap(), back.first_order().unwrap());
        assert_eq!(a.a(), b.a());
        assert_eq!(a.b(), b.b());
        assert_eq!(a.c(), b.c());
        assert_eq!(bundle.metadata, back.metadata);
    }

    #[test]
    fn missing_ports_are_random_and_flagged() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("sys.mtx");
        mtx::write_sparse(&a, &CscMatrix::from_triplets(3, 3, &[(0, 0, -1.0), (1, 1, -2.0), (2, 2, -3.0)])).unwrap();
        let paths = SystemPaths::FirstOrder { a: a.clone() };
        assert!(load_matrix_market(&paths, &LoadOptions::default()).is_err());
        let opts = LoadOptions {
            p: Some(2),
            seed: 9,
            ..Default::default()
        };
        let bundle = load_matrix_market(&paths, &opts).unwrap();
        let m = &bundle.metadata;
        assert!(m.random_b && m.random_c && !m.c_transposed);
        assert_eq!((m.name.as_str(), m.n, m.p, m.seed), ("sys", 3, 2, Some(9)));
        assert!(m.symmetric["A"]);

        // C supplied as n×p is transposed
        let c = dir.path().join("c.mtx");
        mtx::write_dense(&c, &RMat::from_element(3, 2, 0.5)).unwrap();
        let opts = LoadOptions {
            c: Some(c),
            seed: 9,
            ..Default::default()
        };
        let bundle = load_matrix_market(&paths, &opts).unwrap();
        assert!(bundle.metadata.c_transposed && bundle.metadata.random_b && !bundle.metadata.random_c);
        assert_eq!(bundle.first_order().unwrap().c().shape(), (2, 3));
    }

    #[test]
    fn dimension_errors() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.mtx");
        mtx::write_sparse(&a, &CscMatrix::identity(3)).unwrap();
        let b = dir.path().join("b.mtx");
        mtx::write_dense(&b, &RMat::zeros(4, 1)).unwrap();
        let opts = LoadOptions {
            b: Some(b),
            ..Default::default()
        };
        let err = load_matrix_market(&SystemPaths::FirstOrder { a }, &opts).unwrap_err();
        assert!(matches!(err, MorError::DimensionMismatch(_)));
    }
}
