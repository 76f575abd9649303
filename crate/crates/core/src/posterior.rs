//! Discretized Bayesian belief over the Bloch ball.
//!
//! The density `w(r, theta, phi)` is sampled at the midpoints of a
//! tensor-product grid. Each cell carries the quadrature measure
//! `r^2 sin(theta) dr dtheta dphi`, so every integral over the ball becomes a
//! weighted sum `sum(w * dV)`. Geometry (midpoints, volumes, Cartesian Bloch
//! components) is immutable and shared between grids through an `Arc`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use std::sync::Arc;

use crate::bloch::{BlochPoint, Direction, Outcome};
use crate::error::{Error, Result};

/// Updates whose normalization falls below this are rejected.
pub const DEGENERATE_Z: f64 = 1e-12;

/// Bloch vectors shorter than this have no usable direction.
pub const ZERO_BLOCH: f64 = 1e-12;

/// Cell counts along `(r, theta, phi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Resolution {
    pub n_r: usize,
    pub n_theta: usize,
    pub n_phi: usize,
}

impl Resolution {
    pub fn new(n_r: usize, n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_r < 2 || n_theta < 2 || n_phi < 2 {
            return Err(Error::InvalidResolution(n_r, n_theta, n_phi));
        }
        Ok(Self {
            n_r,
            n_theta,
            n_phi,
        })
    }

    pub fn cells(&self) -> usize {
        self.n_r * self.n_theta * self.n_phi
    }
}

impl Default for Resolution {
    fn default() -> Self {
        Self {
            n_r: 24,
            n_theta: 24,
            n_phi: 48,
        }
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.n_r, self.n_theta, self.n_phi)
    }
}

impl FromStr for Resolution {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('x').collect();
        if parts.len() != 3 {
            return Err(format!("expected <nr>x<nt>x<np>, got '{s}'"));
        }
        let mut n = [0usize; 3];
        for (slot, part) in n.iter_mut().zip(&parts) {
            *slot = part
                .trim()
                .parse()
                .map_err(|_| format!("invalid cell count '{part}'"))?;
        }
        Resolution::new(n[0], n[1], n[2]).map_err(|e| e.to_string())
    }
}

/// Immutable cell layout of a midpoint grid over the Bloch ball.
#[derive(Debug)]
pub struct GridGeometry {
    resolution: Resolution,
    radii: Vec<f64>,
    thetas: Vec<f64>,
    phis: Vec<f64>,
    volume: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
}

impl GridGeometry {
    pub fn new(resolution: Resolution) -> Arc<Self> {
        let Resolution {
            n_r,
            n_theta,
            n_phi,
        } = resolution;
        let dr = 1.0 / n_r as f64;
        let dtheta = PI / n_theta as f64;
        let dphi = TAU / n_phi as f64;
        let radii: Vec<f64> = (0..n_r).map(|i| (i as f64 + 0.5) * dr).collect();
        let thetas: Vec<f64> = (0..n_theta).map(|j| (j as f64 + 0.5) * dtheta).collect();
        let phis: Vec<f64> = (0..n_phi).map(|l| (l as f64 + 0.5) * dphi).collect();

        let cells = resolution.cells();
        let mut geometry = GridGeometry {
            resolution,
            volume: Vec::with_capacity(cells),
            x: Vec::with_capacity(cells),
            y: Vec::with_capacity(cells),
            z: Vec::with_capacity(cells),
            r: Vec::with_capacity(cells),
            radii,
            thetas,
            phis,
        };
        let trig_phi: Vec<(f64, f64)> = geometry.phis.iter().map(|p| p.sin_cos()).collect();
        for &r in &geometry.radii {
            for &theta in &geometry.thetas {
                let (st, ct) = theta.sin_cos();
                let dv = r * r * st * dr * dtheta * dphi;
                for &(sp, cp) in &trig_phi {
                    geometry.volume.push(dv);
                    geometry.x.push(r * st * cp);
                    geometry.y.push(r * st * sp);
                    geometry.z.push(r * ct);
                    geometry.r.push(r);
                }
            }
        }
        Arc::new(geometry)
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn cells(&self) -> usize {
        self.volume.len()
    }

    pub fn index(&self, i_r: usize, i_theta: usize, i_phi: usize) -> usize {
        (i_r * self.resolution.n_theta + i_theta) * self.resolution.n_phi + i_phi
    }

    /// Radial midpoints.
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn phis(&self) -> &[f64] {
        &self.phis
    }

    pub fn phi_step(&self) -> f64 {
        TAU / self.resolution.n_phi as f64
    }

    /// Quadrature measure `dV` of every cell.
    pub fn volumes(&self) -> &[f64] {
        &self.volume
    }

    /// Cartesian Bloch vector of cell `k`.
    pub fn point(&self, k: usize) -> [f64; 3] {
        [self.x[k], self.y[k], self.z[k]]
    }

    pub fn radius(&self, k: usize) -> f64 {
        self.r[k]
    }

    /// Probability of outcome 1 along `n` for every cell, written into `out`.
    pub(crate) fn parallel_probabilities(&self, n: [f64; 3], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.x
                .iter()
                .zip(&self.y)
                .zip(&self.z)
                .map(|((x, y), z)| 0.5 * (1.0 + x * n[0] + y * n[1] + z * n[2])),
        );
    }
}

/// How the final posterior is turned into a single state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ReadoutMode {
    /// Posterior mean of the Bloch vector.
    #[default]
    BlochVector,
    /// Direction from the posterior mean Bloch vector, radius from the
    /// posterior mean radius.
    MeanRadius,
}

impl ReadoutMode {
    pub fn name(&self) -> &'static str {
        match self {
            ReadoutMode::BlochVector => "bloch",
            ReadoutMode::MeanRadius => "mean-radius",
        }
    }
}

impl FromStr for ReadoutMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "bloch" | "bloch-vector" => Ok(ReadoutMode::BlochVector),
            "mean-radius" => Ok(ReadoutMode::MeanRadius),
            other => Err(format!("unknown readout '{other}' (bloch|mean-radius)")),
        }
    }
}

/// A readout together with a flag for the undefined-direction convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub point: BlochPoint,
    /// False when the mean Bloch vector vanished and `theta = phi = 0` was
    /// substituted.
    pub direction_defined: bool,
}

/// Probability density over the Bloch ball sampled on a midpoint grid.
#[derive(Debug, Clone)]
pub struct PosteriorGrid {
    geometry: Arc<GridGeometry>,
    weights: Vec<f64>,
}

/// Radial prior with density `(alpha + 1) / (4 pi) r^(alpha - 2)` on a fresh
/// grid of the given resolution.
pub fn init_prior(alpha: f64, resolution: Resolution) -> Result<PosteriorGrid> {
    PosteriorGrid::prior(GridGeometry::new(resolution), alpha)
}

impl PosteriorGrid {
    pub fn prior(geometry: Arc<GridGeometry>, alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::InvalidAlpha(alpha));
        }
        let scale = (alpha + 1.0) / (4.0 * PI);
        let weights = geometry
            .r
            .iter()
            .map(|r| scale * r.powf(alpha - 2.0))
            .collect();
        Self::from_weights(geometry, weights)
    }

    /// Wraps raw density values and normalizes them over the grid.
    pub fn from_weights(geometry: Arc<GridGeometry>, mut weights: Vec<f64>) -> Result<Self> {
        if weights.len() != geometry.cells() {
            return Err(Error::InvalidWeights(format!(
                "expected {} cells, got {}",
                geometry.cells(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidWeights(
                "negative or non-finite density".into(),
            ));
        }
        let total: f64 = weights
            .iter()
            .zip(&geometry.volume)
            .map(|(w, v)| w * v)
            .sum();
        if total <= 0.0 {
            return Err(Error::InvalidWeights("zero total mass".into()));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self { geometry, weights })
    }

    pub fn geometry(&self) -> &Arc<GridGeometry> {
        &self.geometry
    }

    /// Density values at the cell midpoints.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `sum(w * dV)`; 1 up to round-off for every reachable grid.
    pub fn normalization(&self) -> f64 {
        self.masses().sum()
    }

    /// Probability mass `w * dV` per cell.
    pub fn masses(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .zip(&self.geometry.volume)
            .map(|(w, v)| w * v)
    }

    /// Bayes update with the likelihood of `out` along `dir`.
    ///
    /// Returns the normalization `Z`. The grid is left untouched when
    /// `Z < 1e-12`.
    pub fn bayes_update(&mut self, dir: &Direction, out: Outcome) -> Result<f64> {
        let n = dir.vector();
        let g = &self.geometry;
        let likelihood = |k: usize| {
            let p1 = 0.5 * (1.0 + g.x[k] * n[0] + g.y[k] * n[1] + g.z[k] * n[2]);
            match out {
                Outcome::Parallel => p1.max(0.0),
                Outcome::Antiparallel => (1.0 - p1).max(0.0),
            }
        };
        let z: f64 = (0..self.weights.len())
            .map(|k| likelihood(k) * self.weights[k] * g.volume[k])
            .sum();
        if z.is_nan() || z < DEGENERATE_Z {
            return Err(Error::DegenerateUpdate(z));
        }
        for (k, w) in self.weights.iter_mut().enumerate() {
            *w = likelihood(k) * *w / z;
        }
        Ok(z)
    }

    /// Posterior mean Bloch vector `sum(w * r_vec * dV)`.
    pub fn bloch_vector(&self) -> [f64; 3] {
        let g = &self.geometry;
        let mut v = [0.0; 3];
        for (k, m) in self.masses().enumerate() {
            v[0] += m * g.x[k];
            v[1] += m * g.y[k];
            v[2] += m * g.z[k];
        }
        v
    }

    /// Posterior mean radius `sum(w * r * dV)`.
    pub fn mean_radius(&self) -> f64 {
        self.masses()
            .zip(&self.geometry.r)
            .map(|(m, r)| m * r)
            .sum()
    }

    pub fn estimated_state(&self, mode: ReadoutMode) -> Estimate {
        let v = self.bloch_vector();
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let (direction_defined, theta, phi) = if norm < ZERO_BLOCH {
            (false, 0.0, 0.0)
        } else {
            let p = BlochPoint::from_cartesian(v).expect("posterior mean lies in the ball");
            (true, p.theta(), p.phi())
        };
        let r = match mode {
            ReadoutMode::BlochVector if direction_defined => norm,
            ReadoutMode::BlochVector => 0.0,
            ReadoutMode::MeanRadius => self.mean_radius(),
        };
        let point = BlochPoint::new(r.clamp(0.0, 1.0), theta, phi)
            .expect("canonical angles from from_cartesian");
        Estimate {
            point,
            direction_defined,
        }
    }

    /// Predicted probability of `out` along `dir` under the current belief.
    pub fn predictive_probability(&self, dir: &Direction, out: Outcome) -> f64 {
        let n = dir.vector();
        let g = &self.geometry;
        let p1: f64 = self
            .masses()
            .enumerate()
            .map(|(k, m)| m * 0.5 * (1.0 + g.x[k] * n[0] + g.y[k] * n[1] + g.z[k] * n[2]))
            .sum();
        let p1 = p1.clamp(0.0, 1.0);
        match out {
            Outcome::Parallel => p1,
            Outcome::Antiparallel => 1.0 - p1,
        }
    }

    /// Differential entropy `-sum(w log2 w dV)` in bits, with `0 log 0 = 0`.
    pub fn entropy(&self) -> f64 {
        -self
            .weights
            .iter()
            .zip(&self.geometry.volume)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, v)| w * w.log2() * v)
            .sum::<f64>()
    }

    /// Debug dump: one `r,theta,phi,w` row per cell.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let g = &self.geometry;
        writeln!(out, "r,theta,phi,w")?;
        for (i, r) in g.radii.iter().enumerate() {
            for (j, theta) in g.thetas.iter().enumerate() {
                for (l, phi) in g.phis.iter().enumerate() {
                    let w = self.weights[g.index(i, j, l)];
                    writeln!(out, "{r},{theta},{phi},{w}")?;
                }
            }
        }
        Ok(())
    }
}
