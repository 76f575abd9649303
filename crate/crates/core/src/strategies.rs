//! Measurement-direction selection rules.
//!
//! Four rules are provided: isotropic random axes, the three coordinate axes,
//! and maximization of the expected Kullback information gain either over a
//! candidate grid on the sphere or over the three coordinate axes only.
//!
//! The expected gain of measuring along `n` is
//!
//! ```text
//! K(n) = sum_i p_i(n) * int dV w_i(n) log2(w_i(n) / w)
//! ```
//!
//! where `w_i` is the hypothetical posterior after outcome `i` and `p_i` its
//! predictive probability. Since `w_i / w = P_i / p_i` cellwise, the gain only
//! depends on the per-cell likelihoods, which do not change during a run. The
//! [`GainTable`] exploits that by precomputing `dV * sum_i P_i log2 P_i` once
//! per candidate.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;

use crate::bloch::{Direction, Outcome};
use crate::error::{Error, Result};
use crate::posterior::{GridGeometry, PosteriorGrid, DEGENERATE_Z};

/// The x, y and z measurement axes, in that order.
pub const AXES: [Direction; 3] = [
    Direction::new_unchecked(FRAC_PI_2, 0.0),
    Direction::new_unchecked(FRAC_PI_2, FRAC_PI_2),
    Direction::new_unchecked(0.0, 0.0),
];

/// Gains closer than this (in bits) count as tied; the lower index wins.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrategyKind {
    Random,
    ThreeAxes,
    KullbackAll,
    KullbackThreeAxes,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::Random,
        StrategyKind::ThreeAxes,
        StrategyKind::KullbackAll,
        StrategyKind::KullbackThreeAxes,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::Random => "random",
            StrategyKind::ThreeAxes => "3axes",
            StrategyKind::KullbackAll => "kullback",
            StrategyKind::KullbackThreeAxes => "kullback3",
        }
    }

    /// Whether every measured direction must be one of [`AXES`].
    pub fn axis_restricted(&self) -> bool {
        matches!(
            self,
            StrategyKind::ThreeAxes | StrategyKind::KullbackThreeAxes
        )
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown strategy '{s}' (random|3axes|kullback|kullback3)"))
    }
}

/// How the non-adaptive three-axes rule assigns systems to axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum AxisPolicy {
    #[default]
    UniformRandom,
    RoundRobin,
}

impl AxisPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            AxisPolicy::UniformRandom => "random",
            AxisPolicy::RoundRobin => "roundrobin",
        }
    }
}

impl FromStr for AxisPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "random" => Ok(AxisPolicy::UniformRandom),
            "roundrobin" => Ok(AxisPolicy::RoundRobin),
            other => Err(format!("unknown axis policy '{other}' (random|roundrobin)")),
        }
    }
}

/// Product grid of candidate directions: `n_theta` polar midpoints times
/// `n_phi` azimuths starting at 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CandidateGrid {
    pub n_theta: usize,
    pub n_phi: usize,
}

impl CandidateGrid {
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta == 0 || n_phi == 0 {
            return Err(Error::EmptyCandidates);
        }
        Ok(Self { n_theta, n_phi })
    }

    pub fn theta_step(&self) -> f64 {
        PI / self.n_theta as f64
    }

    pub fn phi_step(&self) -> f64 {
        TAU / self.n_phi as f64
    }

    /// Candidates in theta-major order.
    pub fn directions(&self) -> Vec<Direction> {
        let mut out = Vec::with_capacity(self.n_theta * self.n_phi);
        for a in 0..self.n_theta {
            let theta = (a as f64 + 0.5) * self.theta_step();
            for b in 0..self.n_phi {
                out.push(Direction::new_unchecked(theta, b as f64 * self.phi_step()));
            }
        }
        out
    }
}

impl Default for CandidateGrid {
    fn default() -> Self {
        Self {
            n_theta: 8,
            n_phi: 16,
        }
    }
}

impl fmt::Display for CandidateGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.n_theta, self.n_phi)
    }
}

impl FromStr for CandidateGrid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (a, b) = s
            .split_once('x')
            .ok_or_else(|| format!("expected <nt>x<np>, got '{s}'"))?;
        let parse = |p: &str| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| format!("invalid candidate count '{p}'"))
        };
        CandidateGrid::new(parse(a)?, parse(b)?).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CandidateSet {
    Grid(CandidateGrid),
    Explicit(Vec<Direction>),
}

impl CandidateSet {
    pub fn directions(&self) -> Vec<Direction> {
        match self {
            CandidateSet::Grid(g) => g.directions(),
            CandidateSet::Explicit(d) => d.clone(),
        }
    }
}

impl Default for CandidateSet {
    fn default() -> Self {
        CandidateSet::Grid(CandidateGrid::default())
    }
}

/// Which rule to run and its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategySpec {
    pub kind: StrategyKind,
    /// Search set of the unrestricted Kullback rule.
    pub candidates: CandidateSet,
    pub axis_policy: AxisPolicy,
    /// One extra 3x3 search at half the candidate spacing around the grid
    /// optimum (grid candidates only).
    pub refine: bool,
}

impl StrategySpec {
    pub fn new(kind: StrategyKind) -> Self {
        Self {
            kind,
            candidates: CandidateSet::default(),
            axis_policy: AxisPolicy::default(),
            refine: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == StrategyKind::KullbackAll {
            if let CandidateSet::Explicit(d) = &self.candidates {
                if d.is_empty() {
                    return Err(Error::EmptyCandidates);
                }
            }
        }
        Ok(())
    }

    /// The directions the Kullback search runs over for this rule.
    pub fn search_set(&self) -> Vec<Direction> {
        match self.kind {
            StrategyKind::KullbackThreeAxes => AXES.to_vec(),
            _ => self.candidates.directions(),
        }
    }
}

/// Expected information gain in bits.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct GainValue(pub f64);

impl GainValue {
    pub fn bits(self) -> f64 {
        self.0
    }
}

/// Isotropic direction: `cos(theta)` uniform on `[-1, 1]`, `phi` uniform.
pub fn next_direction_random<R: Rng + ?Sized>(rng: &mut R) -> Direction {
    let cos_theta = 1.0 - 2.0 * rng.gen::<f64>();
    let mut phi = TAU * rng.gen::<f64>();
    if phi >= TAU {
        phi = 0.0;
    }
    Direction::new_unchecked(cos_theta.clamp(-1.0, 1.0).acos(), phi)
}

/// One of the coordinate axes. `step` is the 1-based measurement index and is
/// only used by the round-robin policy.
pub fn next_direction_three_axes<R: Rng + ?Sized>(
    policy: AxisPolicy,
    rng: &mut R,
    step: usize,
) -> Direction {
    match policy {
        AxisPolicy::UniformRandom => AXES[rng.gen_range(0..3)],
        AxisPolicy::RoundRobin => AXES[step.saturating_sub(1) % 3],
    }
}

fn xlog2x(x: f64) -> f64 {
    if x > 0.0 {
        x * x.log2()
    } else {
        0.0
    }
}

/// Expected Kullback information gain of measuring along `dir`, evaluated by
/// forming both hypothetical posteriors cell by cell.
pub fn kullback_gain(grid: &PosteriorGrid, dir: &Direction) -> GainValue {
    let p1 = grid.predictive_probability(dir, Outcome::Parallel);
    let predicted = [1.0 - p1, p1];
    let g = grid.geometry();
    let mut likelihood = Vec::new();
    g.parallel_probabilities(dir.vector(), &mut likelihood);

    let mut gain = 0.0;
    for out in Outcome::BOTH {
        let p = predicted[out.bit() as usize];
        if p < DEGENERATE_Z {
            continue;
        }
        let mut divergence = 0.0;
        for (k, (&w, &dv)) in grid.weights().iter().zip(g.volumes()).enumerate() {
            let like = match out {
                Outcome::Parallel => likelihood[k],
                Outcome::Antiparallel => 1.0 - likelihood[k],
            };
            let updated = like * w / p;
            if w > 0.0 && updated > 0.0 {
                divergence += updated * (updated / w).log2() * dv;
            }
        }
        gain += p * divergence;
    }
    GainValue(gain)
}

/// The same gain written as prior entropy minus expected posterior entropy.
pub fn kullback_gain_from_entropies(grid: &PosteriorGrid, dir: &Direction) -> Result<f64> {
    let before = grid.entropy();
    let p1 = grid.predictive_probability(dir, Outcome::Parallel);
    let mut expected_after = 0.0;
    for (out, p) in [(Outcome::Antiparallel, 1.0 - p1), (Outcome::Parallel, p1)] {
        if p < DEGENERATE_Z {
            continue;
        }
        let mut hypothetical = grid.clone();
        hypothetical.bayes_update(dir, out)?;
        expected_after += p * hypothetical.entropy();
    }
    Ok(before - expected_after)
}

/// Index of the largest value; values within [`TIE_TOLERANCE`] of the running
/// best do not displace it.
pub fn argmax_with_ties(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, &v) in values.iter().enumerate() {
        match best {
            None => best = Some(k),
            Some(b) if v > values[b] + TIE_TOLERANCE => best = Some(k),
            _ => {}
        }
    }
    best
}

/// Direction of maximal [`kullback_gain`] among `candidates`.
pub fn next_direction_kullback(
    grid: &PosteriorGrid,
    candidates: &[Direction],
) -> Result<Direction> {
    let gains: Vec<f64> = candidates
        .iter()
        .map(|d| kullback_gain(grid, d).bits())
        .collect();
    argmax_with_ties(&gains)
        .map(|k| candidates[k])
        .ok_or(Error::EmptyCandidates)
}

#[derive(Debug, Clone, Copy)]
enum Plan {
    /// Correlate the weights with `rows[row]` shifted by `shift` phi cells.
    Row { row: usize, shift: usize },
    /// Antipode of an earlier candidate; the gain is identical.
    Alias(usize),
}

/// Precomputed per-candidate likelihood entropies for one grid geometry.
///
/// Candidates that differ from an earlier one by a whole number of grid
/// steps in phi share its row, and antipodal candidates reuse the earlier
/// gain outright.
#[derive(Debug)]
pub struct GainTable {
    geometry: Arc<GridGeometry>,
    candidates: Vec<Direction>,
    vectors: Vec<[f64; 3]>,
    rows: Vec<Vec<f64>>,
    bases: Vec<Direction>,
    plan: Vec<Plan>,
}

impl GainTable {
    pub fn new(geometry: Arc<GridGeometry>, candidates: Vec<Direction>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::EmptyCandidates);
        }
        let vectors: Vec<[f64; 3]> = candidates.iter().map(Direction::vector).collect();
        let mut table = GainTable {
            geometry,
            candidates,
            vectors,
            rows: Vec::new(),
            bases: Vec::new(),
            plan: Vec::new(),
        };
        for k in 0..table.candidates.len() {
            let plan = table.plan_for(k);
            table.plan.push(plan);
        }
        Ok(table)
    }

    fn plan_for(&mut self, k: usize) -> Plan {
        let v = self.vectors[k];
        let antipodal = (0..k).find(|&j| {
            let u = self.vectors[j];
            (u[0] + v[0]).abs() < 1e-12
                && (u[1] + v[1]).abs() < 1e-12
                && (u[2] + v[2]).abs() < 1e-12
        });
        if let Some(j) = antipodal {
            return Plan::Alias(j);
        }
        let dir = self.candidates[k];
        let n_phi = self.geometry.resolution().n_phi;
        let step = self.geometry.phi_step();
        for (row, base) in self.bases.iter().enumerate() {
            if (base.theta() - dir.theta()).abs() > 1e-12 {
                continue;
            }
            let steps = (dir.phi() - base.phi()) / step;
            let whole = steps.round();
            if (steps - whole).abs() < 1e-9 {
                let shift = (whole as i64).rem_euclid(n_phi as i64) as usize;
                return Plan::Row { row, shift };
            }
        }
        self.rows.push(self.likelihood_entropy_row(&dir));
        self.bases.push(dir);
        Plan::Row {
            row: self.rows.len() - 1,
            shift: 0,
        }
    }

    fn likelihood_entropy_row(&self, dir: &Direction) -> Vec<f64> {
        let mut p1 = Vec::new();
        self.geometry.parallel_probabilities(dir.vector(), &mut p1);
        p1.iter()
            .zip(self.geometry.volumes())
            .map(|(&p, &dv)| dv * (xlog2x(p) + xlog2x(1.0 - p)))
            .collect()
    }

    pub fn candidates(&self) -> &[Direction] {
        &self.candidates
    }

    /// Number of distinct likelihood rows actually stored.
    pub fn stored_rows(&self) -> usize {
        self.rows.len()
    }

    /// Expected gains of every candidate, in candidate order.
    pub fn gains(&self, grid: &PosteriorGrid) -> Result<Vec<f64>> {
        if !Arc::ptr_eq(grid.geometry(), &self.geometry)
            && grid.geometry().resolution() != self.geometry.resolution()
        {
            return Err(Error::GeometryMismatch);
        }
        let total = grid.normalization();
        let mean = grid.bloch_vector();
        let weights = grid.weights();
        let n_phi = self.geometry.resolution().n_phi;

        let mut gains = Vec::with_capacity(self.plan.len());
        for (k, plan) in self.plan.iter().enumerate() {
            let gain = match *plan {
                Plan::Alias(j) => gains[j],
                Plan::Row { row, shift } => {
                    let cross = shifted_dot(weights, &self.rows[row], n_phi, shift);
                    let n = self.vectors[k];
                    let p1 = 0.5 * (total + mean[0] * n[0] + mean[1] * n[1] + mean[2] * n[2]);
                    let p0 = total - p1;
                    cross - xlog2x(p1) - xlog2x(p0)
                }
            };
            gains.push(gain);
        }
        Ok(gains)
    }

    /// Best candidate under the tie rule of [`argmax_with_ties`].
    pub fn argmax(&self, grid: &PosteriorGrid) -> Result<usize> {
        let gains = self.gains(grid)?;
        argmax_with_ties(&gains).ok_or(Error::EmptyCandidates)
    }
}

/// `sum_l w[b + l] * row[b + (l - shift) mod n]` over all phi rings `b`.
fn shifted_dot(weights: &[f64], row: &[f64], n_phi: usize, shift: usize) -> f64 {
    let mut total = 0.0;
    for (w, r) in weights.chunks_exact(n_phi).zip(row.chunks_exact(n_phi)) {
        total += dot(&w[shift..], &r[..n_phi - shift]) + dot(&w[..shift], &r[n_phi - shift..]);
    }
    total
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Stateless rule dispatch. Kullback rules evaluate [`kullback_gain`] for
/// every candidate directly.
pub fn next_direction<R: Rng + ?Sized>(
    spec: &StrategySpec,
    grid: &PosteriorGrid,
    rng: &mut R,
    step: usize,
) -> Result<Direction> {
    spec.validate()?;
    match spec.kind {
        StrategyKind::Random => Ok(next_direction_random(rng)),
        StrategyKind::ThreeAxes => Ok(next_direction_three_axes(spec.axis_policy, rng, step)),
        StrategyKind::KullbackThreeAxes => next_direction_kullback(grid, &AXES),
        StrategyKind::KullbackAll => {
            let candidates = spec.candidates.directions();
            let best = next_direction_kullback(grid, &candidates)?;
            Ok(match (&spec.candidates, spec.refine) {
                (CandidateSet::Grid(cg), true) => refine(grid, best, cg),
                _ => best,
            })
        }
    }
}

/// Local 3x3 search at half the candidate spacing; the centre wins ties.
fn refine(grid: &PosteriorGrid, centre: Direction, cg: &CandidateGrid) -> Direction {
    let dt = 0.5 * cg.theta_step();
    let dp = 0.5 * cg.phi_step();
    let mut neighbourhood = vec![centre];
    for a in [-1.0, 0.0, 1.0] {
        for b in [-1.0, 0.0, 1.0] {
            if a == 0.0 && b == 0.0 {
                continue;
            }
            let theta = (centre.theta() + a * dt).clamp(0.0, PI);
            let mut phi = (centre.phi() + b * dp).rem_euclid(TAU);
            if phi >= TAU {
                phi = 0.0;
            }
            neighbourhood.push(Direction::new_unchecked(theta, phi));
        }
    }
    let gains: Vec<f64> = neighbourhood
        .iter()
        .map(|d| kullback_gain(grid, d).bits())
        .collect();
    neighbourhood[argmax_with_ties(&gains).unwrap_or(0)]
}

/// Per-experiment direction chooser holding the precomputed gain table.
#[derive(Debug)]
pub struct DirectionSelector {
    spec: StrategySpec,
    table: Option<GainTable>,
}

impl DirectionSelector {
    pub fn new(spec: &StrategySpec, geometry: &Arc<GridGeometry>) -> Result<Self> {
        spec.validate()?;
        let table = match spec.kind {
            StrategyKind::KullbackAll | StrategyKind::KullbackThreeAxes => {
                Some(GainTable::new(geometry.clone(), spec.search_set())?)
            }
            _ => None,
        };
        Ok(Self {
            spec: spec.clone(),
            table,
        })
    }

    pub fn spec(&self) -> &StrategySpec {
        &self.spec
    }

    /// Direction of the first measurement: isotropic for the unrestricted
    /// rules, one of the three axes for the axis-restricted ones.
    pub fn first_direction<R: Rng + ?Sized>(&self, rng: &mut R) -> Direction {
        match self.spec.kind {
            StrategyKind::Random | StrategyKind::KullbackAll => next_direction_random(rng),
            StrategyKind::ThreeAxes => next_direction_three_axes(self.spec.axis_policy, rng, 1),
            StrategyKind::KullbackThreeAxes => AXES[rng.gen_range(0..3)],
        }
    }

    /// Direction for measurement `step` (1-based) given the current posterior.
    pub fn next_direction<R: Rng + ?Sized>(
        &self,
        grid: &PosteriorGrid,
        rng: &mut R,
        step: usize,
    ) -> Result<Direction> {
        match (&self.table, self.spec.kind) {
            (Some(table), kind) => {
                let best = table.candidates()[table.argmax(grid)?];
                Ok(match (&self.spec.candidates, self.spec.refine) {
                    (CandidateSet::Grid(cg), true) if kind == StrategyKind::KullbackAll => {
                        refine(grid, best, cg)
                    }
                    _ => best,
                })
            }
            (None, StrategyKind::Random) => Ok(next_direction_random(rng)),
            (None, _) => Ok(next_direction_three_axes(self.spec.axis_policy, rng, step)),
        }
    }
}
