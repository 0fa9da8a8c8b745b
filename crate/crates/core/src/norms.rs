//! Sup-norms of sections over the closed annulus.
//!
//! Holomorphic sections attain their norm on the two boundary circles, so
//! norms are sampled on `|w| = 1` and `|w| = r1` only. Every reported value is
//! the maximum over actual samples and therefore a lower bound for the true
//! supremum. [`boundary_dominates`] checks the boundary reduction against an
//! interior grid.

use std::f64::consts::TAU;
use std::io::{self, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{operator_norm, ComplexMatrix};
use crate::sections::Section;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Samples per boundary circle.
    pub boundary: usize,
    pub radial: usize,
    pub angular: usize,
    pub refinement: usize,
    /// Relative change below which refinement stops.
    pub epsilon: f64,
    pub max_refinements: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { boundary: 512, radial: 32, angular: 64, refinement: 2, epsilon: 1e-8, max_refinements: 6 }
    }
}

impl GridSpec {
    pub fn with_boundary(boundary: usize) -> Self {
        Self { boundary, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.boundary < 16 {
            return Err(Error::Validation(format!("boundary sample count {} is below 16", self.boundary)));
        }
        if self.refinement < 2 {
            return Err(Error::Validation(format!("refinement factor {} is below 2", self.refinement)));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Validation(format!("convergence threshold {} must be positive", self.epsilon)));
        }
        if self.radial == 0 || self.angular == 0 {
            return Err(Error::Validation("interior grid must be non-empty".into()));
        }
        Ok(())
    }
}

/// A refined boundary sup-norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupNorm {
    pub value: f64,
    /// Absolute change produced by the last refinement.
    pub delta: f64,
    /// Samples per circle on the final grid.
    pub samples: usize,
    pub refinements: usize,
}

fn pointwise_norm(section: &Section, z: Complex64) -> f64 {
    operator_norm(&section.value_at(z))
}

fn circle_point(re: f64, n: usize, j: usize) -> Complex64 {
    Complex64::new(re, TAU * j as f64 / n as f64)
}

/// Both boundary lines of the strip, `n` points each.
pub fn boundary_samples(log_r1: f64, n: usize) -> Vec<Complex64> {
    [0.0, log_r1].iter().flat_map(|&re| (0..n).map(move |j| circle_point(re, n, j))).collect()
}

/// Maximum over a boundary grid, skipping indices `j` with `j % skip == 0`
/// when `skip` is set (those points belong to the previous, coarser grid).
fn boundary_max(f: &dyn Fn(Complex64) -> f64, log_r1: f64, n: usize, skip: Option<usize>) -> f64 {
    let mut best: f64 = 0.0;
    for re in [0.0, log_r1] {
        for j in 0..n {
            if skip.is_some_and(|s| j % s == 0) {
                continue;
            }
            best = best.max(f(circle_point(re, n, j)));
        }
    }
    best
}

/// Boundary sup-norm, refined by `grid.refinement` until the relative change
/// drops below `grid.epsilon` or `grid.max_refinements` is reached. Grids are
/// nested, so the value never decreases under refinement.
pub fn sup_norm(section: &Section, grid: &GridSpec) -> Result<SupNorm> {
    grid.validate()?;
    let log_r1 = section.bundle().annulus().log_r1();
    let f = |z| pointwise_norm(section, z);
    let mut n = grid.boundary;
    let mut value = boundary_max(&f, log_r1, n, None);
    let mut delta = 0.0;
    let mut refinements = 0;
    while refinements < grid.max_refinements {
        n *= grid.refinement;
        let fresh = boundary_max(&f, log_r1, n, Some(grid.refinement));
        let next = value.max(fresh);
        delta = next - value;
        value = next;
        refinements += 1;
        if value == 0.0 || delta / value < grid.epsilon {
            break;
        }
    }
    Ok(SupNorm { value, delta, samples: n, refinements })
}

/// Pointwise norm on the boundary grid of `grid.boundary` points per circle,
/// without refinement.
pub fn grid_sup_norm(section: &Section, samples: usize) -> f64 {
    let log_r1 = section.bundle().annulus().log_r1();
    boundary_max(&|z| pointwise_norm(section, z), log_r1, samples, None)
}

/// Golden-section maximisation of `g` on `[lo, hi]`.
fn golden_max(g: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_895;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut g1, mut g2) = (g(x1), g(x2));
    let mut best = g1.max(g2);
    for _ in 0..iters {
        if g1 < g2 {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + INV_PHI * (hi - lo);
            g2 = g(x2);
        } else {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - INV_PHI * (hi - lo);
            g1 = g(x1);
        }
        best = best.max(g1).max(g2);
    }
    best
}

/// Refined boundary maximum followed by a local golden-section search around
/// the best grid points of each circle.
fn polished_boundary_max(section: &Section, grid: &GridSpec) -> Result<f64> {
    const CANDIDATES: usize = 4;
    let coarse = sup_norm(section, grid)?;
    let log_r1 = section.bundle().annulus().log_r1();
    let n = coarse.samples;
    let h = TAU / n as f64;
    let mut best = coarse.value;
    for re in [0.0, log_r1] {
        let g = |theta: f64| pointwise_norm(section, Complex64::new(re, theta));
        let vals: Vec<f64> = (0..n).map(|j| g(h * j as f64)).collect();
        let mut peaks: Vec<usize> =
            (0..n).filter(|&j| vals[j] >= vals[(j + n - 1) % n] && vals[j] >= vals[(j + 1) % n]).collect();
        peaks.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
        for &j in peaks.iter().take(CANDIDATES) {
            let theta = h * j as f64;
            best = best.max(golden_max(&g, theta - h, theta + h, 60));
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dominance {
    pub interior_max: f64,
    pub boundary_max: f64,
    /// `interior_max − boundary_max`; at most rounding for holomorphic sections.
    pub margin: f64,
}

/// Bound above which [`Dominance::margin`] signals a failed boundary reduction.
pub const DOMINANCE_TOL: f64 = 1e-6;

/// Compares the pointwise norm on a strictly interior `radial x angular` grid
/// against the boundary maximum.
pub fn boundary_dominates(section: &Section, grid: &GridSpec) -> Result<Dominance> {
    grid.validate()?;
    let log_r1 = section.bundle().annulus().log_r1();
    let mut interior_max: f64 = 0.0;
    for i in 0..grid.radial {
        let re = log_r1 * (i + 1) as f64 / (grid.radial + 1) as f64;
        for j in 0..grid.angular {
            interior_max = interior_max.max(pointwise_norm(section, circle_point(re, grid.angular, j)));
        }
    }
    let boundary_max = polished_boundary_max(section, grid)?;
    Ok(Dominance { interior_max, boundary_max, margin: interior_max - boundary_max })
}

fn check_block(block: &[Vec<Section>]) -> Result<&Section> {
    let m = block.len();
    let first = block.first().and_then(|r| r.first()).ok_or_else(|| Error::Dimension("empty block".into()))?;
    for row in block {
        if row.len() != m {
            return Err(Error::Dimension(format!("block row has {} sections, expected {m}", row.len())));
        }
        if row.iter().any(|s| !s.same_space(first)) {
            return Err(Error::BundleMismatch);
        }
    }
    Ok(first)
}

/// The `(mn) x (mn)` matrix of pointwise values of an `m x m` block.
pub fn assemble_block(block: &[Vec<Section>], z: Complex64) -> ComplexMatrix {
    let m = block.len();
    let n = block[0][0].dim();
    let mut out = ComplexMatrix::zeros(m * n, m * n);
    for (p, row) in block.iter().enumerate() {
        for (q, s) in row.iter().enumerate() {
            out.view_mut((p * n, q * n), (n, n)).copy_from(&s.value_at(z));
        }
    }
    out
}

/// Matrix-level norm of an `m x m` block of sections on the boundary grid of
/// `grid.boundary` points per circle.
pub fn complete_norm(block: &[Vec<Section>], grid: &GridSpec) -> Result<f64> {
    grid.validate()?;
    let first = check_block(block)?;
    let log_r1 = first.bundle().annulus().log_r1();
    Ok(boundary_max(&|z| operator_norm(&assemble_block(block, z)), log_r1, grid.boundary, None))
}

/// One sample of the pointwise section values on an annulus grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSample {
    pub r: f64,
    pub theta: f64,
    pub opnorm: f64,
    /// `|F_jk|` in row-major order.
    pub magnitudes: Vec<f64>,
}

/// Samples `radial x angular` points with `r` evenly spaced on `[1, r1]` and
/// `theta` on `[0, 2π)`.
pub fn annulus_grid(section: &Section, radial: usize, angular: usize) -> Vec<GridSample> {
    let r1 = section.bundle().annulus().r1();
    let mut out = Vec::with_capacity(radial * angular);
    for i in 0..radial {
        let r = if radial > 1 { 1.0 + (r1 - 1.0) * i as f64 / (radial - 1) as f64 } else { 1.0 };
        for j in 0..angular {
            let theta = TAU * j as f64 / angular as f64;
            let v = section.value_at(Complex64::new(r.ln(), theta));
            out.push(GridSample {
                r,
                theta,
                opnorm: operator_norm(&v),
                magnitudes: v.transpose().iter().map(|z| z.norm()).collect(),
            });
        }
    }
    out
}

pub fn csv_header(n: usize) -> String {
    let mut cols = vec!["r".to_string(), "theta".to_string(), "opnorm".to_string()];
    for j in 1..=n {
        for k in 1..=n {
            cols.push(if n < 10 { format!("abs_f_{j}{k}") } else { format!("abs_f_{j}_{k}") });
        }
    }
    cols.join(",")
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes the grid as CSV: `r,theta,opnorm,abs_f_11,…,abs_f_nn`, LF line
/// endings, 17 significant digits.
pub fn export_grid<W: Write>(section: &Section, radial: usize, angular: usize, out: &mut W) -> io::Result<()> {
    writeln!(out, "{}", csv_header(section.dim()))?;
    for s in annulus_grid(section, radial, angular) {
        let mut fields = vec![fmt17(s.r), fmt17(s.theta), fmt17(s.opnorm)];
        fields.extend(s.magnitudes.iter().map(|&m| fmt17(m)));
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}
