//! LIBSVM files and the `pcdm-instance v1` text format.
//!
//! Instance files look like
//!
//! ```text
//! pcdm-instance v1 <m> <n> <nnz>
//! <row> <col> <value>        (nnz lines, 0-based)
//! b:
//! <m numbers>
//! lambda:
//! <number>
//! ```
//!
//! with optional sections `b:`, `xstar:`, `lambda:` and `Fstar:`.
//! Numbers are written in shortest round-trip form, so reading a written
//! file reproduces every value bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::datagen::GeneratedInstance;
use crate::error::{Error, Result};
use crate::problem::{CompositeProblem, LossKind, Regularizer};
use crate::sparse::SparseMatrix;

const INSTANCE_MAGIC: &str = "pcdm-instance";
const INSTANCE_VERSION: &str = "v1";

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Parses LIBSVM text: one example per line, `label idx:value …` with
/// 1-based feature indices. The column count is the largest index seen.
pub fn parse_libsvm(text: &str) -> Result<(SparseMatrix, Vec<f64>)> {
    let mut labels = Vec::new();
    let mut triplets = Vec::new();
    let mut cols = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().unwrap_or_default();
        let label: f64 = label_tok
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad label {label_tok:?}")))?;
        let row = labels.len();
        labels.push(label);
        let mut seen = Vec::new();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(line_no, format!("expected index:value, got {tok:?}")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad feature index {idx:?}")))?;
            if idx == 0 {
                return Err(parse_err(line_no, "feature indices are 1-based"));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad feature value {val:?}")))?;
            if !val.is_finite() {
                return Err(parse_err(line_no, format!("non-finite value {val}")));
            }
            if seen.contains(&idx) {
                return Err(parse_err(line_no, format!("duplicate feature index {idx}")));
            }
            seen.push(idx);
            cols = cols.max(idx);
            triplets.push((row, idx - 1, val));
        }
    }
    let matrix = SparseMatrix::from_triplets(labels.len(), cols, triplets)?;
    Ok((matrix, labels))
}

pub fn read_libsvm(path: impl AsRef<Path>) -> Result<(SparseMatrix, Vec<f64>)> {
    parse_libsvm(&fs::read_to_string(path)?)
}

pub fn format_libsvm(matrix: &SparseMatrix, labels: &[f64]) -> Result<String> {
    if labels.len() != matrix.rows() {
        return Err(Error::Dimension(format!("{} labels for {} rows", labels.len(), matrix.rows())));
    }
    let mut out = String::new();
    for (r, label) in labels.iter().enumerate() {
        out.push_str(&format_f64(*label));
        let (idx, vals) = matrix.row(r);
        for (c, v) in idx.iter().zip(vals) {
            let _ = write!(out, " {}:{}", c + 1, format_f64(*v));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_libsvm(path: impl AsRef<Path>, matrix: &SparseMatrix, labels: &[f64]) -> Result<()> {
    fs::write(path, format_libsvm(matrix, labels)?)?;
    Ok(())
}

/// Contents of a `pcdm-instance v1` file.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub matrix: SparseMatrix,
    pub b: Option<Vec<f64>>,
    pub x_star: Option<Vec<f64>>,
    pub lambda: Option<f64>,
    pub f_star: Option<f64>,
}

impl Instance {
    pub fn new(matrix: SparseMatrix) -> Self {
        Self {
            matrix,
            b: None,
            x_star: None,
            lambda: None,
            f_star: None,
        }
    }

    /// `½‖Ax − b‖² + λ‖x‖₁` (`b = 0`, `λ = 0` when absent), carrying the
    /// optimum when both `x*` and `F*` are present.
    pub fn lasso_problem(&self) -> Result<CompositeProblem> {
        let b = self.b.clone().unwrap_or_else(|| vec![0.0; self.matrix.rows()]);
        let reg = match self.lambda {
            Some(l) if l > 0.0 => Regularizer::L1 { lambda: l },
            _ => Regularizer::Zero,
        };
        let problem = CompositeProblem::unit_blocks(self.matrix.clone(), LossKind::square(b), reg)?;
        match (&self.x_star, self.f_star) {
            (Some(x), Some(f)) => problem.with_known_optimum(x.clone(), f),
            _ => Ok(problem),
        }
    }
}

impl From<GeneratedInstance> for Instance {
    fn from(g: GeneratedInstance) -> Self {
        Self {
            matrix: g.matrix,
            b: Some(g.b),
            x_star: Some(g.x_star),
            lambda: Some(g.lambda),
            f_star: Some(g.f_star),
        }
    }
}

fn push_section(out: &mut String, name: &str, values: &[f64]) {
    out.push_str(name);
    out.push_str(":\n");
    for chunk in values.chunks(16) {
        let line: Vec<String> = chunk.iter().map(|v| format_f64(*v)).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
}

pub fn format_instance(inst: &Instance) -> String {
    let a = &inst.matrix;
    let mut out = format!("{INSTANCE_MAGIC} {INSTANCE_VERSION} {} {} {}\n", a.rows(), a.cols(), a.nnz());
    for (r, c, v) in a.triplets() {
        let _ = writeln!(out, "{r} {c} {}", format_f64(v));
    }
    if let Some(b) = &inst.b {
        push_section(&mut out, "b", b);
    }
    if let Some(x) = &inst.x_star {
        push_section(&mut out, "xstar", x);
    }
    if let Some(l) = inst.lambda {
        push_section(&mut out, "lambda", &[l]);
    }
    if let Some(f) = inst.f_star {
        push_section(&mut out, "Fstar", &[f]);
    }
    out
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (hno, header) = lines
        .by_ref()
        .find(|(_, l)| !l.is_empty())
        .ok_or_else(|| parse_err(1, "empty instance file"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 5 || h[0] != INSTANCE_MAGIC || h[1] != INSTANCE_VERSION {
        return Err(parse_err(hno, format!("expected '{INSTANCE_MAGIC} {INSTANCE_VERSION} m n nnz'")));
    }
    let dims: Vec<usize> = h[2..]
        .iter()
        .map(|t| t.parse::<usize>().map_err(|_| parse_err(hno, format!("bad size {t:?}"))))
        .collect::<Result<_>>()?;
    let (m, n, nnz) = (dims[0], dims[1], dims[2]);

    let mut triplets = Vec::with_capacity(nnz);
    while triplets.len() < nnz {
        let (no, line) = lines
            .next()
            .ok_or_else(|| parse_err(hno, format!("expected {nnz} entries, found {}", triplets.len())))?;
        if line.is_empty() {
            continue;
        }
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 3 {
            return Err(parse_err(no, "expected 'row col value'"));
        }
        let r: usize = t[0].parse().map_err(|_| parse_err(no, format!("bad row {:?}", t[0])))?;
        let c: usize = t[1].parse().map_err(|_| parse_err(no, format!("bad column {:?}", t[1])))?;
        let v: f64 = t[2].parse().map_err(|_| parse_err(no, format!("bad value {:?}", t[2])))?;
        triplets.push((r, c, v));
    }
    let matrix = SparseMatrix::from_triplets(m, n, triplets)?;
    let mut inst = Instance::new(matrix);

    let mut current: Option<(usize, String, Vec<f64>)> = None;
    let finish = |section: Option<(usize, String, Vec<f64>)>, inst: &mut Instance| -> Result<()> {
        let Some((no, name, values)) = section else {
            return Ok(());
        };
        let scalar = |values: &[f64]| -> Result<f64> {
            match values {
                [v] => Ok(*v),
                _ => Err(parse_err(no, format!("section {name}: expects one number, found {}", values.len()))),
            }
        };
        let vector = |values: Vec<f64>, len: usize| -> Result<Vec<f64>> {
            if values.len() == len {
                Ok(values)
            } else {
                Err(parse_err(no, format!("section {name}: expects {len} numbers, found {}", values.len())))
            }
        };
        match name.as_str() {
            "b" => inst.b = Some(vector(values, m)?),
            "xstar" => inst.x_star = Some(vector(values, n)?),
            "lambda" => inst.lambda = Some(scalar(&values)?),
            "Fstar" => inst.f_star = Some(scalar(&values)?),
            other => return Err(parse_err(no, format!("unknown section {other:?}"))),
        }
        Ok(())
    };
    for (no, line) in lines {
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_suffix(':') {
            finish(current.take(), &mut inst)?;
            current = Some((no, name.trim().to_string(), Vec::new()));
            continue;
        }
        let Some((_, _, values)) = current.as_mut() else {
            return Err(parse_err(no, "data outside of a section"));
        };
        for tok in line.split_whitespace() {
            values.push(tok.parse().map_err(|_| parse_err(no, format!("bad number {tok:?}")))?);
        }
    }
    finish(current.take(), &mut inst)?;
    Ok(inst)
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Instance> {
    parse_instance(&fs::read_to_string(path)?)
}

pub fn write_instance(path: impl AsRef<Path>, inst: &Instance) -> Result<()> {
    fs::write(path, format_instance(inst))?;
    Ok(())
}
