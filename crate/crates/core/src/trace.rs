//! Convergence traces: the per-checkpoint record every driver produces and
//! every envelope check consumes.
//!
//! CSV layout is `k,objective,gap,wall_ns,flops` plus any auxiliary columns
//! a driver appends (the asynchronous runners add `rho_diag,policy,threads`).
//! One file per (variant, seed).

use crate::error::{CdError, Result};
use std::io::{BufRead, Write};

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub k: u64,
    pub objective: f64,
    /// Optimality gap against the reference value; NaN when no reference is
    /// known (the Kaczmarz runners store the squared distance to the solution
    /// set here instead).
    pub gap: f64,
    pub wall_ns: u64,
    pub flops: u64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceTrace {
    pub variant: String,
    pub seed: u64,
    pub checkpoints: Vec<Checkpoint>,
    pub final_x: Vec<f64>,
    /// Extra CSV columns: (name, one value per checkpoint).
    pub aux: Vec<(String, Vec<String>)>,
}

impl ConvergenceTrace {
    pub fn new(variant: impl Into<String>, seed: u64) -> Self {
        ConvergenceTrace {
            variant: variant.into(),
            seed,
            checkpoints: Vec::new(),
            final_x: Vec::new(),
            aux: Vec::new(),
        }
    }

    pub fn final_objective(&self) -> f64 {
        self.checkpoints.last().map(|c| c.objective).unwrap_or(f64::NAN)
    }

    pub fn final_gap(&self) -> f64 {
        self.checkpoints.last().map(|c| c.gap).unwrap_or(f64::NAN)
    }

    pub fn final_k(&self) -> u64 {
        self.checkpoints.last().map(|c| c.k).unwrap_or(0)
    }

    pub fn gap_at(&self, k: u64) -> Option<f64> {
        self.checkpoints.iter().find(|c| c.k == k).map(|c| c.gap)
    }

    /// Structural invariants: strictly increasing k, nondecreasing flops.
    pub fn validate(&self) -> Result<()> {
        for w in self.checkpoints.windows(2) {
            if w[1].k <= w[0].k {
                return Err(CdError::InvalidParameter(format!(
                    "checkpoint iterations not strictly increasing at k={}",
                    w[1].k
                )));
            }
            if w[1].flops < w[0].flops {
                return Err(CdError::InvalidParameter(format!(
                    "flop counter decreased at k={}",
                    w[1].k
                )));
            }
        }
        for (name, col) in &self.aux {
            if col.len() != self.checkpoints.len() {
                return Err(CdError::InvalidParameter(format!(
                    "aux column {name} has {} entries for {} checkpoints",
                    col.len(),
                    self.checkpoints.len()
                )));
            }
        }
        Ok(())
    }

    /// Numeric identity ignoring wall-clock times: same checkpoints
    /// (k, objective bits, gap bits, flops) and the same final iterate bits.
    pub fn same_numeric_path(&self, other: &ConvergenceTrace) -> bool {
        self.checkpoints.len() == other.checkpoints.len()
            && self
                .checkpoints
                .iter()
                .zip(&other.checkpoints)
                .all(|(a, b)| {
                    a.k == b.k
                        && a.objective.to_bits() == b.objective.to_bits()
                        && a.gap.to_bits() == b.gap.to_bits()
                        && a.flops == b.flops
                })
            && self.final_x.len() == other.final_x.len()
            && self
                .final_x
                .iter()
                .zip(&other.final_x)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "k,objective,gap,wall_ns,flops")?;
        for (name, _) in &self.aux {
            write!(w, ",{name}")?;
        }
        writeln!(w)?;
        for (row, cp) in self.checkpoints.iter().enumerate() {
            write!(
                w,
                "{},{:.17e},{:.17e},{},{}",
                cp.k, cp.objective, cp.gap, cp.wall_ns, cp.flops
            )?;
            for (_, col) in &self.aux {
                write!(w, ",{}", col[row])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn write_csv_file(&self, path: &std::path::Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// Parse a trace CSV. The base columns are required; extra columns are
    /// kept as strings. Variant and seed are not stored in the file, so the
    /// caller supplies them (usually from the file name).
    pub fn read_csv<R: BufRead>(r: R, variant: impl Into<String>, seed: u64) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| CdError::Parse("empty trace file".into()))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.len() < 5 || cols[..5] != ["k", "objective", "gap", "wall_ns", "flops"] {
            return Err(CdError::Parse(format!("unexpected trace header: {header}")));
        }
        let mut trace = ConvergenceTrace::new(variant, seed);
        trace.aux = cols[5..].iter().map(|c| (c.to_string(), Vec::new())).collect();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != cols.len() {
                return Err(CdError::Parse(format!("ragged trace row: {line}")));
            }
            let parse_f = |s: &str| -> Result<f64> {
                s.parse::<f64>().map_err(|_| CdError::Parse(format!("bad float {s}")))
            };
            let parse_u = |s: &str| -> Result<u64> {
                s.parse::<u64>().map_err(|_| CdError::Parse(format!("bad integer {s}")))
            };
            trace.checkpoints.push(Checkpoint {
                k: parse_u(fields[0])?,
                objective: parse_f(fields[1])?,
                gap: parse_f(fields[2])?,
                wall_ns: parse_u(fields[3])?,
                flops: parse_u(fields[4])?,
            });
            for (slot, field) in trace.aux.iter_mut().zip(&fields[5..]) {
                slot.1.push(field.to_string());
            }
        }
        trace.validate()?;
        Ok(trace)
    }

    pub fn read_csv_file(path: &std::path::Path, variant: impl Into<String>, seed: u64) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f), variant, seed)
    }

    /// Conventional trace file name: `<variant>_seed<seed>.csv`.
    pub fn file_name(&self) -> String {
        format!("{}_seed{}.csv", self.variant.replace([':', '/', ' '], "-"), self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_trace() -> ConvergenceTrace {
        let mut t = ConvergenceTrace::new("demo", 3);
        t.checkpoints.push(Checkpoint { k: 0, objective: 2.0, gap: 1.5, wall_ns: 10, flops: 0 });
        t.checkpoints.push(Checkpoint {
            k: 10,
            objective: 0.25,
            gap: f64::NAN,
            wall_ns: 50,
            flops: 120,
        });
        t.final_x = vec![0.5, -0.25];
        t
    }

    #[test]
    fn csv_round_trip_preserves_bits() {
        let t = sample_trace();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = ConvergenceTrace::read_csv(&buf[..], "demo", 3).unwrap();
        assert_eq!(back.checkpoints.len(), 2);
        assert_eq!(back.checkpoints[0].objective.to_bits(), 2.0f64.to_bits());
        assert!(back.checkpoints[1].gap.is_nan());
        assert_eq!(back.checkpoints[1].flops, 120);
    }

    #[test]
    fn validate_rejects_regressions() {
        let mut t = sample_trace();
        t.checkpoints[1].k = 0;
        assert!(t.validate().is_err());
        let mut t = sample_trace();
        t.checkpoints[1].flops = 0;
        t.checkpoints[0].flops = 5;
        assert!(t.validate().is_err());
    }

    #[test]
    fn aux_columns_round_trip() {
        let mut t = sample_trace();
        t.aux.push(("policy".into(), vec!["worst:2".into(), "worst:2".into()]));
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = ConvergenceTrace::read_csv(&buf[..], "demo", 3).unwrap();
        assert_eq!(back.aux.len(), 1);
        assert_eq!(back.aux[0].0, "policy");
        assert_eq!(back.aux[0].1[1], "worst:2");
    }
}
