//! File formats: MatrixMarket coordinate matrices, whitespace vector files,
//! JSON problem descriptors, and the run manifest.

use crate::error::{CdError, Result};
use crate::matrix::{CsrMatrix, QuadMatrix};
use crate::problem::{
    generate_linear_system, generate_synthetic, generate_synthetic_block_diagonal,
    CompositeProblem, LinearSystemProblem, PowellProblem, QuadraticProblem, SeparableRegularizer,
};
use crate::rng::{standard_normal_vec, SplitRng};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::{BufRead, Write};
use std::path::Path;

/// Write a CSR matrix in MatrixMarket coordinate format (real, general,
/// 1-based indices).
pub fn write_matrix_market<W: Write>(m: &CsrMatrix, mut w: W) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", m.nrows(), m.ncols(), m.nnz())?;
    for (i, j, v) in m.iter_entries() {
        writeln!(w, "{} {} {}", i + 1, j + 1, v)?;
    }
    Ok(())
}

/// Read a MatrixMarket coordinate file (real or integer, general or
/// symmetric). Symmetric storage is mirrored; duplicate entries are summed.
pub fn read_matrix_market<R: BufRead>(r: R) -> Result<CsrMatrix> {
    let mut lines = r.lines();
    let banner = lines
        .next()
        .ok_or_else(|| CdError::Parse("empty MatrixMarket file".into()))??;
    let tokens: Vec<String> = banner.split_whitespace().map(|t| t.to_lowercase()).collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(CdError::Parse(format!("bad MatrixMarket banner: {banner}")));
    }
    if tokens[2] != "coordinate" {
        return Err(CdError::Parse("only coordinate format is supported".into()));
    }
    if !matches!(tokens[3].as_str(), "real" | "integer") {
        return Err(CdError::Parse(format!("unsupported field type {}", tokens[3])));
    }
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(CdError::Parse(format!("unsupported symmetry {other}"))),
    };

    let mut size_line = None;
    for line in lines.by_ref() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        size_line = Some(line);
        break;
    }
    let size_line = size_line.ok_or_else(|| CdError::Parse("missing size line".into()))?;
    let dims: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| CdError::Parse(format!("bad size token {t}"))))
        .collect::<Result<_>>()?;
    if dims.len() != 3 {
        return Err(CdError::Parse(format!("bad size line: {size_line}")));
    }
    let (nrows, ncols, nnz) = (dims[0], dims[1], dims[2]);

    let mut triplets = Vec::with_capacity(if symmetric { 2 * nnz } else { nnz });
    let mut seen = 0usize;
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let mut it = t.split_whitespace();
        let i: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CdError::Parse(format!("bad entry line: {t}")))?;
        let j: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CdError::Parse(format!("bad entry line: {t}")))?;
        let v: f64 = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CdError::Parse(format!("bad entry line: {t}")))?;
        if i == 0 || j == 0 || i > nrows || j > ncols {
            return Err(CdError::Parse(format!("entry ({i},{j}) outside {nrows}x{ncols}")));
        }
        triplets.push((i - 1, j - 1, v));
        if symmetric && i != j {
            triplets.push((j - 1, i - 1, v));
        }
        seen += 1;
    }
    if seen != nnz {
        return Err(CdError::Parse(format!("expected {nnz} entries, found {seen}")));
    }
    CsrMatrix::from_triplets(nrows, ncols, triplets)
}

pub fn write_matrix_market_file(m: &CsrMatrix, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_matrix_market(m, std::io::BufWriter::new(f))
}

pub fn read_matrix_market_file(path: &Path) -> Result<CsrMatrix> {
    let f = std::fs::File::open(path)?;
    read_matrix_market(std::io::BufReader::new(f))
}

/// One value per whitespace-separated token (usually one per line).
pub fn read_vector<R: BufRead>(r: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') || t.starts_with('#') {
            continue;
        }
        for tok in t.split_whitespace() {
            out.push(
                tok.parse::<f64>()
                    .map_err(|_| CdError::Parse(format!("bad vector entry {tok}")))?,
            );
        }
    }
    Ok(out)
}

pub fn write_vector<W: Write>(v: &[f64], mut w: W) -> Result<()> {
    for x in v {
        writeln!(w, "{x}")?;
    }
    Ok(())
}

pub fn read_vector_file(path: &Path) -> Result<Vec<f64>> {
    let f = std::fs::File::open(path)?;
    read_vector(std::io::BufReader::new(f))
}

pub fn write_vector_file(v: &[f64], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_vector(v, std::io::BufWriter::new(f))
}

/// Regularizer choice in JSON configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegKind {
    None,
    L1,
}

/// JSON problem descriptors, e.g.
/// `{"kind":"synthetic","n":50,"r":50,"cond":100.0,"eta":1.0,"zeta":0.0,"seed":7}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemDescriptor {
    Synthetic {
        n: usize,
        r: usize,
        cond: f64,
        eta: f64,
        zeta: f64,
        seed: u64,
        /// When present, draw a standard-normal linear term with this seed
        /// (the plain generator produces `f(x) = x^T Q x / 2`).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        linear_term_seed: Option<u64>,
    },
    /// Direct sum of synthetic blocks (sparse; for large instances).
    SyntheticBlocks {
        blocks: usize,
        block_n: usize,
        r: usize,
        cond: f64,
        eta: f64,
        zeta: f64,
        seed: u64,
    },
    LinearSystem {
        m: usize,
        n: usize,
        density: f64,
        seed: u64,
    },
    Composite {
        n: usize,
        r: usize,
        cond: f64,
        eta: f64,
        zeta: f64,
        seed: u64,
        lambda: f64,
        reg: RegKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        linear_term_seed: Option<u64>,
    },
    Powell,
    /// Quadratic read from a MatrixMarket file (plus optional linear term).
    MatrixFile {
        path: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        linear_term_path: Option<String>,
    },
    /// Kaczmarz system read from files; rows are normalized on load.
    LinearSystemFile {
        matrix_path: String,
        rhs_path: String,
    },
}

#[derive(Debug, Clone)]
pub enum BuiltProblem {
    Quadratic(QuadraticProblem),
    Composite(CompositeProblem),
    LinearSystem(LinearSystemProblem),
    Powell(PowellProblem),
}

impl BuiltProblem {
    pub fn dim(&self) -> usize {
        match self {
            BuiltProblem::Quadratic(p) => p.dim(),
            BuiltProblem::Composite(p) => p.dim(),
            BuiltProblem::LinearSystem(p) => p.nrows(),
            BuiltProblem::Powell(_) => PowellProblem::DIM,
        }
    }
}

fn synthetic_with_linear(
    n: usize,
    r: usize,
    cond: f64,
    eta: f64,
    zeta: f64,
    seed: u64,
    linear_term_seed: Option<u64>,
) -> Result<QuadraticProblem> {
    let base = generate_synthetic(n, r, cond, eta, zeta, seed)?;
    match linear_term_seed {
        None => Ok(base),
        Some(ls) => {
            let b = standard_normal_vec(&mut SplitRng::new(ls), n);
            QuadraticProblem::new(base.matrix().clone(), Some(b), None, None)
        }
    }
}

/// Materialize a descriptor into a problem instance.
pub fn build_problem(d: &ProblemDescriptor) -> Result<BuiltProblem> {
    Ok(match d {
        ProblemDescriptor::Synthetic { n, r, cond, eta, zeta, seed, linear_term_seed } => {
            BuiltProblem::Quadratic(synthetic_with_linear(
                *n,
                *r,
                *cond,
                *eta,
                *zeta,
                *seed,
                *linear_term_seed,
            )?)
        }
        ProblemDescriptor::SyntheticBlocks { blocks, block_n, r, cond, eta, zeta, seed } => {
            let (p, _) =
                generate_synthetic_block_diagonal(*blocks, *block_n, *r, *cond, *eta, *zeta, *seed)?;
            BuiltProblem::Quadratic(p)
        }
        ProblemDescriptor::LinearSystem { m, n, density, seed } => {
            BuiltProblem::LinearSystem(generate_linear_system(*m, *n, *density, *seed)?)
        }
        ProblemDescriptor::Composite { n, r, cond, eta, zeta, seed, lambda, reg, linear_term_seed } => {
            let smooth =
                synthetic_with_linear(*n, *r, *cond, *eta, *zeta, *seed, *linear_term_seed)?;
            let reg = match reg {
                RegKind::None => SeparableRegularizer::None,
                RegKind::L1 => SeparableRegularizer::l1(1.0)?,
            };
            BuiltProblem::Composite(CompositeProblem::new(smooth, reg, *lambda, None)?)
        }
        ProblemDescriptor::Powell => BuiltProblem::Powell(PowellProblem),
        ProblemDescriptor::MatrixFile { path, linear_term_path } => {
            let m = read_matrix_market_file(Path::new(path))?;
            let b = match linear_term_path {
                Some(p) => Some(read_vector_file(Path::new(p))?),
                None => None,
            };
            BuiltProblem::Quadratic(QuadraticProblem::new(QuadMatrix::Sparse(m), b, None, None)?)
        }
        ProblemDescriptor::LinearSystemFile { matrix_path, rhs_path } => {
            let a = read_matrix_market_file(Path::new(matrix_path))?;
            let b = read_vector_file(Path::new(rhs_path))?;
            BuiltProblem::LinearSystem(LinearSystemProblem::normalize_rows(&a, &b)?)
        }
    })
}

/// Provenance record written next to every output set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_override: Option<u64>,
    pub created_unix_ms: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Write `manifest.json` into `out_dir`, recording the config hash and the
/// crate version.
pub fn write_manifest(
    out_dir: &Path,
    command: &str,
    config_bytes: &[u8],
    seed_override: Option<u64>,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let manifest = Manifest {
        tool: "cdkit".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        config_sha256: sha256_hex(config_bytes),
        seed_override,
        created_unix_ms: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0),
    };
    let f = std::fs::File::create(out_dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(f), &manifest)?;
    Ok(())
}
