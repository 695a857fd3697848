//! Brownian paths on time grids, reflection, excursion decomposition and the
//! heat kernel.
//!
//! Paths are sampled exactly at grid nodes: increments are independent
//! Gaussians with variance equal to the node spacing, so there is no
//! discretisation error in the law of the path at the nodes themselves.

use std::f64::consts::PI;
use std::ops::Range;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{normal, RngStream};

/// Strictly increasing time nodes starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        match times.first() {
            None => return Err(Error::invalid("time grid must have at least one node")),
            Some(&t0) if t0 != 0.0 => return Err(Error::invalid(format!("time grid must start at 0, got {t0}"))),
            _ => {}
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("time grid nodes must be finite"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("time grid must be strictly increasing"));
        }
        Ok(Self { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> f64 {
        *self.times.last().expect("grid is never empty")
    }

    /// Index of the node equal to `t` up to a relative tolerance of 1e-9 of
    /// the grid horizon.
    pub fn node_index(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * self.last().max(1.0);
        let pos = self.times.partition_point(|&s| s < t - tol);
        (pos < self.times.len() && (self.times[pos] - t).abs() <= tol).then_some(pos)
    }

    /// The grid restricted to its first `n` nodes.
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            times: self.times[..n.clamp(1, self.times.len())].to_vec(),
        }
    }
}

/// `n_steps + 1` equally spaced nodes from 0 to `t_end`.
pub fn make_uniform_grid(t_end: f64, n_steps: usize) -> Result<TimeGrid> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::invalid(format!(
            "t_end must be positive and finite, got {t_end}"
        )));
    }
    if n_steps == 0 {
        return Err(Error::invalid("n_steps must be at least 1"));
    }
    let n = n_steps as f64;
    let mut times: Vec<f64> = (0..=n_steps).map(|i| t_end * (i as f64) / n).collect();
    times[n_steps] = t_end;
    Ok(TimeGrid { times })
}

/// Values of an `R^dim`-valued process at every node of a grid. Values are
/// stored node-major: node `i` occupies `values[i*dim..(i+1)*dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
}

impl SamplePath {
    pub fn new(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("path dimension must be positive"));
        }
        if values.len() != grid.len() * dim {
            return Err(Error::invalid(format!(
                "path has {} values, expected {} nodes x {dim}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("path values must be finite"));
        }
        Ok(Self { grid, dim, values })
    }

    /// A one-dimensional path from scalar node values.
    pub fn scalar(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, 1, values)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Maximal runs of grid nodes on which the inner path keeps a strict sign.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExcursionSet {
    intervals: Vec<Range<usize>>,
}

impl ExcursionSet {
    pub fn intervals(&self) -> &[Range<usize>] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Per-node excursion label; `None` at nodes where the path is zero.
    pub fn labels(&self, n_nodes: usize) -> Vec<Option<usize>> {
        let mut labels = vec![None; n_nodes];
        for (e, r) in self.intervals.iter().enumerate() {
            for l in &mut labels[r.clone()] {
                *l = Some(e);
            }
        }
        labels
    }
}

fn check_start(dim: usize, start: &[f64]) -> Result<()> {
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    if start.len() != dim {
        return Err(Error::invalid(format!(
            "start point has dimension {}, expected {dim}",
            start.len()
        )));
    }
    Ok(())
}

/// Brownian motion from `start` observed exactly at the grid nodes.
pub fn sample_bm(grid: &TimeGrid, dim: usize, start: &[f64], stream: RngStream) -> Result<SamplePath> {
    check_start(dim, start)?;
    let mut rng = stream.rng();
    let mut values = Vec::with_capacity(grid.len() * dim);
    values.extend_from_slice(start);
    for w in grid.times().windows(2) {
        let sd = (w[1] - w[0]).sqrt();
        let base = values.len() - dim;
        for j in 0..dim {
            let next = values[base + j] + sd * normal(&mut rng);
            values.push(next);
        }
    }
    Ok(SamplePath {
        grid: grid.clone(),
        dim,
        values,
    })
}

/// Coordinatewise absolute value of a one-dimensional path.
pub fn reflect_path(path: &SamplePath) -> Result<SamplePath> {
    if path.dim != 1 {
        return Err(Error::invalid(format!(
            "reflection needs a one-dimensional path, got dim {}",
            path.dim
        )));
    }
    Ok(SamplePath {
        grid: path.grid.clone(),
        dim: 1,
        values: path.values.iter().map(|v| v.abs()).collect(),
    })
}

/// Splits the nonzero nodes of an unreflected one-dimensional path into
/// excursions of its absolute value.
///
/// Two consecutive nodes share an excursion iff both are nonzero and have
/// the same sign. Zero nodes belong to no excursion. A sign change between
/// nodes marks a zero of the continuous path somewhere in between; double
/// crossings inside a single step go undetected, a bias that vanishes as the
/// grid is refined.
pub fn excursion_decompose(bm_path: &SamplePath) -> Result<ExcursionSet> {
    if bm_path.dim != 1 {
        return Err(Error::invalid(format!(
            "excursions need a one-dimensional path, got dim {}",
            bm_path.dim
        )));
    }
    let v = &bm_path.values;
    let mut intervals = Vec::new();
    let mut start: Option<usize> = None;
    for i in 0..v.len() {
        if v[i] == 0.0 {
            if let Some(a) = start.take() {
                intervals.push(a..i);
            }
            continue;
        }
        match start {
            None => start = Some(i),
            Some(a) if (v[i] > 0.0) != (v[i - 1] > 0.0) => {
                intervals.push(a..i);
                start = Some(i);
            }
            Some(_) => {}
        }
    }
    if let Some(a) = start {
        intervals.push(a..v.len());
    }
    Ok(ExcursionSet { intervals })
}

/// Brownian motion from `start` observed at the given ascending times,
/// returned node-major (`times.len() * dim` values).
pub fn sample_bm_at_times(sorted_times: &[f64], dim: usize, start: &[f64], stream: RngStream) -> Result<Vec<f64>> {
    check_start(dim, start)?;
    if let Some(&t0) = sorted_times.first() {
        if !(t0 >= 0.0) {
            return Err(Error::invalid(format!(
                "observation times must be nonnegative, got {t0}"
            )));
        }
    }
    if sorted_times.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::invalid("observation times must be sorted ascending"));
    }
    let mut out = vec![0.0; sorted_times.len() * dim];
    bm_at_sorted_times(sorted_times, start, &mut stream.rng(), &mut out);
    Ok(out)
}

/// Unchecked core of [`sample_bm_at_times`]; `out` must hold
/// `times.len() * start.len()` values.
pub(crate) fn bm_at_sorted_times<R: Rng + ?Sized>(times: &[f64], start: &[f64], rng: &mut R, out: &mut [f64]) {
    let dim = start.len();
    let mut prev_t = 0.0;
    let mut prev: &[f64] = start;
    let mut cur = vec![0.0; dim];
    for (i, &t) in times.iter().enumerate() {
        let gap = t - prev_t;
        if gap > 0.0 {
            let sd = gap.sqrt();
            for j in 0..dim {
                cur[j] = prev[j] + sd * normal(rng);
            }
        } else {
            cur.copy_from_slice(prev);
        }
        out[i * dim..(i + 1) * dim].copy_from_slice(&cur);
        prev = &out[i * dim..(i + 1) * dim];
        prev_t = t;
    }
}

/// Transition density `p_t(0, s)` of one-dimensional Brownian motion.
/// Underflows to exactly 0 once `s^2/(2t)` exceeds 745.
pub fn heat_kernel(t: f64, s: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("heat kernel needs t > 0, got {t}")));
    }
    Ok(heat_density(t, s))
}

#[inline]
pub(crate) fn heat_density(t: f64, s: f64) -> f64 {
    let e = s * s / (2.0 * t);
    if e > 745.0 {
        0.0
    } else {
        (-e).exp() / (2.0 * PI * t).sqrt()
    }
}
