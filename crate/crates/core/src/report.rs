//! Serialization of study reports and numerical data.
//!
//! CSV emission uses a fixed float format so that identical runs produce
//! byte-identical artifacts. Grids and form factors round-trip through a
//! plain-text table; matrices through a dense binary layout (little-endian
//! u64 dimensions, then row-major re/im f64 pairs) and through an
//! array-style text format with one complex entry per line, column-major.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{C64, CMatrix};
use crate::modes::{Dispersion, FormFactor, ModeGrid, Tail};
use crate::renorm::{ConvergenceReport, DressingReport};
use crate::resolvent::{DomainVerdict, VanishingReport};

/// Deterministic float formatting for artifacts.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.17e}")
}

/// CSV with the column contract `z_re,z_im,dist,norm_measured,norm_bound`.
pub fn vanishing_csv(report: &VanishingReport) -> String {
    let mut out = String::from("z_re,z_im,dist,norm_measured,norm_bound\n");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_float(r.z_re),
            fmt_float(r.z_im),
            fmt_float(r.dist),
            fmt_float(r.norm_measured),
            fmt_float(r.norm_bound)
        );
    }
    out
}

/// CSV with the column contract
/// `lambda,z_re,z_im,h_minus1_dist,resolvent_dist,sandwich_dist`.
pub fn convergence_csv(report: &ConvergenceReport) -> String {
    let mut out = String::from("lambda,z_re,z_im,h_minus1_dist,resolvent_dist,sandwich_dist\n");
    for rung in &report.rungs {
        for &(z_re, z_im, d) in &rung.resolvent_distances {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_float(rung.cutoff),
                fmt_float(z_re),
                fmt_float(z_im),
                fmt_float(rung.h_minus1_distance),
                fmt_float(d),
                fmt_float(rung.sandwich_distance)
            );
        }
    }
    out
}

/// CSV with the column contract
/// `n_max,self_energy,unitarity_defect,conjugation_defect,spectral_shift,ground_energy`.
pub fn dressing_csv(reports: &[DressingReport]) -> String {
    let mut out =
        String::from("n_max,self_energy,unitarity_defect,conjugation_defect,spectral_shift,ground_energy\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.n_max,
            fmt_float(r.self_energy),
            fmt_float(r.unitarity_defect),
            fmt_float(r.conjugation_defect),
            fmt_float(r.spectral_shift_distance),
            fmt_float(r.ground_energy)
        );
    }
    out
}

/// CSV with the column contract `extent,norm`.
pub fn domain_csv(verdict: &DomainVerdict) -> String {
    let mut out = String::from("extent,norm\n");
    for &(extent, norm) in &verdict.diagnostics {
        let _ = writeln!(out, "{},{}", fmt_float(extent), fmt_float(norm));
    }
    out
}

/// Plain-text table of a grid and an optional factor:
/// columns `k w omega re_f im_f`, one node per line.
pub fn grid_table(grid: &ModeGrid, factor: Option<&FormFactor>) -> Result<String> {
    if let Some(f) = factor {
        if f.values.len() != grid.len() {
            return Err(Error::GridMismatch {
                factor: f.values.len(),
                grid: grid.len(),
            });
        }
    }
    let mut out = String::from("k w omega re_f im_f\n");
    for i in 0..grid.len() {
        let v = factor.map(|f| f.values[i]).unwrap_or(C64::new(0.0, 0.0));
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            fmt_float(grid.nodes()[i]),
            fmt_float(grid.weights()[i]),
            fmt_float(grid.omega()[i]),
            fmt_float(v.re),
            fmt_float(v.im)
        );
    }
    Ok(out)
}

/// Parse a grid table back. The dispersion is recovered as tabulated
/// constants only when it is constant; otherwise the caller supplies it.
pub fn parse_grid_table(text: &str, dispersion: Dispersion, mass_floor: f64) -> Result<(ModeGrid, FormFactor)> {
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut values = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if ln == 0 {
            if line.trim() != "k w omega re_f im_f" {
                return Err(Error::Invalid(format!("unexpected header `{line}`")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 5 {
            return Err(Error::Invalid(format!("line {ln}: expected 5 columns")));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::Invalid(format!("line {ln}: {e}")))
        };
        nodes.push(parse(cols[0])?);
        weights.push(parse(cols[1])?);
        let _omega = parse(cols[2])?;
        values.push(C64::new(parse(cols[3])?, parse(cols[4])?));
    }
    let grid = ModeGrid::from_nodes(nodes, weights, dispersion, mass_floor)?;
    Ok((grid, FormFactor::new(values, Tail::Compact, "parsed")))
}

/// Dense binary matrix layout: u64 LE rows, u64 LE cols, then row-major
/// (re, im) f64 LE pairs.
pub fn matrix_to_binary(m: &CMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 16 * m.len());
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.extend_from_slice(&m[(i, j)].re.to_le_bytes());
            out.extend_from_slice(&m[(i, j)].im.to_le_bytes());
        }
    }
    out
}

pub fn matrix_from_binary(bytes: &[u8]) -> Result<CMatrix> {
    if bytes.len() < 16 {
        return Err(Error::Invalid("binary matrix too short".into()));
    }
    let rows = u64::from_le_bytes(bytes[0..8].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let need = 16 + rows * cols * 16;
    if bytes.len() != need {
        return Err(Error::Invalid(format!(
            "binary matrix length {} does not match {rows}x{cols}",
            bytes.len()
        )));
    }
    let mut m = DMatrix::from_element(rows, cols, C64::new(0.0, 0.0));
    let mut off = 16;
    for i in 0..rows {
        for j in 0..cols {
            let re = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
            let im = f64::from_le_bytes(bytes[off + 8..off + 16].try_into().unwrap());
            m[(i, j)] = C64::new(re, im);
            off += 16;
        }
    }
    Ok(m)
}

/// Array-style text format: a header line, a dimensions line, then one
/// `re im` pair per line in column-major order.
pub fn matrix_to_text(m: &CMatrix) -> String {
    let mut out = String::from("%%matrix array complex general\n");
    let _ = writeln!(out, "{} {}", m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let _ = writeln!(out, "{} {}", fmt_float(m[(i, j)].re), fmt_float(m[(i, j)].im));
        }
    }
    out
}

pub fn matrix_from_text(text: &str) -> Result<CMatrix> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Invalid("empty matrix text".into()))?;
    if !header.starts_with("%%matrix") {
        return Err(Error::Invalid(format!("unexpected header `{header}`")));
    }
    let dims = lines.next().ok_or_else(|| Error::Invalid("missing dimensions".into()))?;
    let mut it = dims.split_whitespace();
    let rows: usize = it
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Invalid("bad row count".into()))?;
    let cols: usize = it
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Invalid("bad column count".into()))?;
    let mut m = DMatrix::from_element(rows, cols, C64::new(0.0, 0.0));
    for j in 0..cols {
        for i in 0..rows {
            let line = lines
                .next()
                .ok_or_else(|| Error::Invalid("matrix text ends early".into()))?;
            let mut parts = line.split_whitespace();
            let re: f64 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Invalid("bad real part".into()))?;
            let im: f64 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Invalid("bad imaginary part".into()))?;
            m[(i, j)] = C64::new(re, im);
        }
    }
    Ok(m)
}
