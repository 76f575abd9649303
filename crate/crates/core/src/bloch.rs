//! Closed-form single-qubit geometry.
//!
//! A mixed qubit state is a point of the Bloch ball, `rho = (1 + r.sigma) / 2`.
//! Projective measurements are labelled by a unit vector on the sphere; the
//! outcome probabilities and the two-level fidelity are linear/quadratic in the
//! Bloch vectors and are evaluated directly from the spherical coordinates.

use std::f64::consts::{PI, TAU};

use nalgebra::{Rotation3, Vector3};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

/// Tolerance used when snapping round-off back into the closed ball.
const BALL_SLACK: f64 = 1e-9;

/// Eigenvalues below this are reported as an invalid density matrix.
const EIGEN_FLOOR: f64 = -1e-9;

/// Convert a Cartesian vector to canonical `(r, theta, phi)`.
///
/// `phi` is wrapped into `[0, 2pi)` and set to 0 on the z axis.
fn to_spherical(v: [f64; 3]) -> (f64, f64, f64) {
    let [x, y, z] = v;
    let r = (x * x + y * y + z * z).sqrt();
    if r == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let theta = (z / r).clamp(-1.0, 1.0).acos();
    if x == 0.0 && y == 0.0 {
        return (r, theta, 0.0);
    }
    (r, theta, wrap_phi(y.atan2(x)))
}

fn wrap_phi(phi: f64) -> f64 {
    let mut p = phi.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if p >= TAU {
        p = 0.0;
    }
    p
}

fn check_theta(theta: f64) -> Result<()> {
    if (0.0..=PI).contains(&theta) {
        Ok(())
    } else {
        Err(Error::InvalidTheta(theta))
    }
}

fn check_phi(phi: f64) -> Result<()> {
    if (0.0..TAU).contains(&phi) {
        Ok(())
    } else {
        Err(Error::InvalidPhi(phi))
    }
}

/// A point `(r, theta, phi)` of the closed Bloch ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochPoint {
    r: f64,
    theta: f64,
    phi: f64,
}

impl BlochPoint {
    pub fn new(r: f64, theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::InvalidRadius(r));
        }
        check_theta(theta)?;
        check_phi(phi)?;
        Ok(Self { r, theta, phi })
    }

    /// The maximally mixed state.
    pub const fn origin() -> Self {
        Self {
            r: 0.0,
            theta: 0.0,
            phi: 0.0,
        }
    }

    /// Builds a point from a Cartesian Bloch vector. Lengths up to `1 + 1e-9`
    /// are treated as round-off and clamped onto the sphere.
    pub fn from_cartesian(v: [f64; 3]) -> Result<Self> {
        let (r, theta, phi) = to_spherical(v);
        if !r.is_finite() || r > 1.0 + BALL_SLACK {
            return Err(Error::InvalidRadius(r));
        }
        Ok(Self {
            r: r.min(1.0),
            theta,
            phi,
        })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Cartesian Bloch vector `r (sin t cos p, sin t sin p, cos t)`.
    pub fn vector(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [self.r * st * cp, self.r * st * sp, self.r * ct]
    }
}

/// A measurement axis on the sphere surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    theta: f64,
    phi: f64,
}

impl Direction {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        check_theta(theta)?;
        check_phi(phi)?;
        Ok(Self { theta, phi })
    }

    pub(crate) const fn new_unchecked(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }

    /// Normalizes `v` and converts it to canonical angles.
    pub fn from_vector(v: [f64; 3]) -> Result<Self> {
        let (r, theta, phi) = to_spherical(v);
        if r == 0.0 || !r.is_finite() {
            return Err(Error::ZeroDirection);
        }
        Ok(Self { theta, phi })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn vector(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }
}

/// Binary result of a projective measurement along a [`Direction`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    /// Found polarized opposite to the measurement axis (label 0).
    Antiparallel,
    /// Found polarized along the measurement axis (label 1).
    Parallel,
}

impl Outcome {
    pub const BOTH: [Outcome; 2] = [Outcome::Antiparallel, Outcome::Parallel];

    pub fn bit(self) -> u8 {
        match self {
            Outcome::Antiparallel => 0,
            Outcome::Parallel => 1,
        }
    }

    pub fn from_bit(bit: u8) -> Option<Self> {
        match bit {
            0 => Some(Outcome::Antiparallel),
            1 => Some(Outcome::Parallel),
            _ => None,
        }
    }
}

/// A validated 2x2 density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix {
    elements: [[Complex64; 2]; 2],
}

impl DensityMatrix {
    /// Checks hermiticity, unit trace (1e-12) and eigenvalues >= -1e-12.
    pub fn new(elements: [[Complex64; 2]; 2]) -> Result<Self> {
        const TOL: f64 = 1e-12;
        let [[a, b], [c, d]] = elements;
        if a.im.abs() > TOL || d.im.abs() > TOL || (b - c.conj()).norm() > TOL {
            return Err(Error::InvalidDensityMatrix("not Hermitian".into()));
        }
        let trace = a.re + d.re;
        if (trace - 1.0).abs() > TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {trace}")));
        }
        let m = Self { elements };
        let min = m.eigenvalues()[1];
        if min < -TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "negative eigenvalue {min}"
            )));
        }
        Ok(m)
    }

    pub fn elements(&self) -> &[[Complex64; 2]; 2] {
        &self.elements
    }

    pub fn trace(&self) -> f64 {
        self.elements[0][0].re + self.elements[1][1].re
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        hermitian_eigen(&self.elements).0
    }
}

/// Density matrix of a Bloch point.
pub fn density_matrix(p: &BlochPoint) -> DensityMatrix {
    let [x, y, z] = p.vector();
    let off = Complex64::new(x, -y) * 0.5;
    DensityMatrix {
        elements: [
            [Complex64::new(0.5 * (1.0 + z), 0.0), off],
            [off.conj(), Complex64::new(0.5 * (1.0 - z), 0.0)],
        ],
    }
}

/// Probability of observing `out` when `state` is measured along `dir`.
pub fn outcome_probability(state: &BlochPoint, dir: &Direction, out: Outcome) -> f64 {
    let p1 = 0.5
        * (1.0
            + state.r * state.theta.cos() * dir.theta.cos()
            + state.r * state.theta.sin() * dir.theta.sin() * (state.phi - dir.phi).cos());
    let p1 = p1.clamp(0.0, 1.0);
    match out {
        Outcome::Parallel => p1,
        Outcome::Antiparallel => 1.0 - p1,
    }
}

/// The opposite point `(pi - theta, phi + pi)` on the sphere.
pub fn antipode(dir: &Direction) -> Direction {
    let theta = PI - dir.theta;
    let mut phi = dir.phi + PI;
    if phi >= TAU {
        phi -= TAU;
    }
    Direction {
        theta,
        phi: wrap_phi(phi),
    }
}

/// Simulates one projective measurement of `state` along `dir`.
pub fn sample_outcome<R: Rng + ?Sized>(
    rng: &mut R,
    state: &BlochPoint,
    dir: &Direction,
) -> Outcome {
    let p1 = outcome_probability(state, dir, Outcome::Parallel);
    if rng.gen::<f64>() < p1 {
        Outcome::Parallel
    } else {
        Outcome::Antiparallel
    }
}

/// Uhlmann fidelity of two qubit states from their Bloch vectors.
pub fn fidelity(a: &BlochPoint, b: &BlochPoint) -> f64 {
    let va = a.vector();
    let vb = b.vector();
    let dot = va[0] * vb[0] + va[1] * vb[1] + va[2] * vb[2];
    let ma = (1.0 - a.r * a.r).max(0.0).sqrt();
    let mb = (1.0 - b.r * b.r).max(0.0).sqrt();
    (0.5 * (1.0 + dot + ma * mb)).clamp(0.0, 1.0)
}

type Mat2 = [[Complex64; 2]; 2];

fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Closed-form eigendecomposition of a 2x2 Hermitian matrix.
///
/// Returns eigenvalues in descending order and the matching unit eigenvectors.
fn hermitian_eigen(m: &Mat2) -> ([f64; 2], [[Complex64; 2]; 2]) {
    let a = m[0][0].re;
    let d = m[1][1].re;
    let b = m[0][1];
    let mean = 0.5 * (a + d);
    let diff = 0.5 * (a - d);
    let rad = diff.hypot(b.norm());
    let values = [mean + rad, mean - rad];
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    if rad == 0.0 {
        return (values, [[one, zero], [zero, one]]);
    }
    // pick the better-conditioned row of (M - lambda_+) v = 0
    let upper = if diff >= 0.0 {
        [Complex64::new(diff + rad, 0.0), b.conj()]
    } else {
        [b, Complex64::new(rad - diff, 0.0)]
    };
    let norm = (upper[0].norm_sqr() + upper[1].norm_sqr()).sqrt();
    let upper = [upper[0] / norm, upper[1] / norm];
    let lower = [-upper[1].conj(), upper[0].conj()];
    (values, [upper, lower])
}

/// Fidelity `Tr^2 sqrt(sqrt(b) a sqrt(b))` computed through explicit 2x2
/// eigendecompositions. Independent of [`fidelity`]; kept as a cross-check.
pub fn fidelity_matrix_oracle(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    let (lb, vb) = hermitian_eigen(&b.elements);
    if lb[1] < EIGEN_FLOOR {
        return Err(Error::InvalidDensityMatrix(format!(
            "negative eigenvalue {}",
            lb[1]
        )));
    }
    let mut sqrt_b = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (lambda, v) in lb.iter().zip(vb.iter()) {
        let s = lambda.max(0.0).sqrt();
        for i in 0..2 {
            for j in 0..2 {
                sqrt_b[i][j] += v[i] * v[j].conj() * s;
            }
        }
    }
    let m = mat_mul(&mat_mul(&sqrt_b, &a.elements), &sqrt_b);
    let (lm, _) = hermitian_eigen(&m);
    if lm[1] < EIGEN_FLOOR {
        return Err(Error::InvalidDensityMatrix(format!(
            "negative eigenvalue {}",
            lm[1]
        )));
    }
    let tr = lm[0].max(0.0).sqrt() + lm[1].max(0.0).sqrt();
    Ok((tr * tr).clamp(0.0, 1.0))
}

/// Proper rotations of Bloch vectors and measurement axes.
pub trait Rotate {
    fn rotated(&self, rotation: &Rotation3<f64>) -> Self;
}

impl Rotate for BlochPoint {
    fn rotated(&self, rotation: &Rotation3<f64>) -> Self {
        let v = rotation * Vector3::from(self.vector());
        let (r, theta, phi) = to_spherical([v.x, v.y, v.z]);
        Self {
            r: r.min(1.0),
            theta,
            phi,
        }
    }
}

impl Rotate for Direction {
    fn rotated(&self, rotation: &Rotation3<f64>) -> Self {
        let v = rotation * Vector3::from(self.vector());
        let (_, theta, phi) = to_spherical([v.x, v.y, v.z]);
        Self { theta, phi }
    }
}

pub fn rotate<T: Rotate>(p: &T, rotation: &Rotation3<f64>) -> T {
    p.rotated(rotation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rejects_out_of_range_coordinates() {
        assert_eq!(
            BlochPoint::new(1.2, 0.0, 0.0),
            Err(Error::InvalidRadius(1.2))
        );
        assert!(BlochPoint::new(0.5, -0.1, 0.0).is_err());
        assert!(BlochPoint::new(0.5, 0.1, TAU).is_err());
        assert!(Direction::new(PI + 1e-9, 0.0).is_err());
        assert!(Direction::from_vector([0.0; 3]).is_err());
    }

    #[test]
    fn cartesian_conversion_canonicalizes_poles() {
        let p = BlochPoint::from_cartesian([0.0, 0.0, -0.5]).unwrap();
        assert_eq!((p.r(), p.theta(), p.phi()), (0.5, PI, 0.0));
        let q = BlochPoint::from_cartesian([0.0, -0.3, 0.0]).unwrap();
        assert!(close(q.phi(), 1.5 * PI, 1e-15));
        assert!(
            BlochPoint::from_cartesian([1.0 + 1e-12, 0.0, 0.0])
                .unwrap()
                .r()
                <= 1.0
        );
        assert!(BlochPoint::from_cartesian([1.1, 0.0, 0.0]).is_err());
    }

    #[test]
    fn density_matrix_examples() {
        let mixed = density_matrix(&BlochPoint::new(0.0, 1.0, 2.0).unwrap());
        assert_eq!(
            *mixed.elements(),
            [[c(0.5, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.5, 0.0)]]
        );

        let north = density_matrix(&BlochPoint::new(1.0, 0.0, 0.0).unwrap());
        assert_eq!(
            *north.elements(),
            [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]]
        );

        let half = density_matrix(&BlochPoint::new(0.5, PI / 2.0, 0.0).unwrap());
        let e = half.elements();
        assert!(close(e[0][0].re, 0.5, 1e-15));
        assert!(close(e[0][1].re, 0.25, 1e-15) && close(e[0][1].im, 0.0, 1e-15));
        assert!(close(e[1][0].re, 0.25, 1e-15));
        assert!(close(e[1][1].re, 0.5, 1e-15));
    }

    #[test]
    fn density_matrix_is_valid_with_expected_spectrum() {
        let p = BlochPoint::new(0.7, 1.1, 4.0).unwrap();
        let rho = density_matrix(&p);
        let checked = DensityMatrix::new(*rho.elements()).unwrap();
        assert_eq!(checked.trace(), 1.0);
        let [hi, lo] = checked.eigenvalues();
        assert!(close(hi, 0.85, 1e-14) && close(lo, 0.15, 1e-14));
    }

    #[test]
    fn density_matrix_validation_rejects_bad_input() {
        let not_psd = [[c(1.2, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-0.2, 0.0)]];
        assert!(DensityMatrix::new(not_psd).is_err());
        let not_hermitian = [[c(0.5, 0.0), c(0.1, 0.0)], [c(0.2, 0.0), c(0.5, 0.0)]];
        assert!(DensityMatrix::new(not_hermitian).is_err());
        let bad_trace = [[c(0.5, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.6, 0.0)]];
        assert!(DensityMatrix::new(bad_trace).is_err());
    }

    #[test]
    fn outcome_probability_examples() {
        let mixed = BlochPoint::origin();
        let dir = Direction::new(0.4, 2.0).unwrap();
        assert_eq!(outcome_probability(&mixed, &dir, Outcome::Parallel), 0.5);
        assert_eq!(
            outcome_probability(&mixed, &dir, Outcome::Antiparallel),
            0.5
        );

        let aligned = BlochPoint::new(0.6, 0.4, 2.0).unwrap();
        assert!(close(
            outcome_probability(&aligned, &dir, Outcome::Parallel),
            0.8,
            1e-15
        ));

        let equator = BlochPoint::new(1.0, PI / 2.0, 0.0).unwrap();
        let z = Direction::new(0.0, 0.0).unwrap();
        assert!(close(
            outcome_probability(&equator, &z, Outcome::Parallel),
            0.5,
            1e-15
        ));
    }

    #[test]
    fn antipode_examples() {
        let a = antipode(&Direction::new(0.0, 0.0).unwrap());
        assert_eq!((a.theta(), a.phi()), (PI, PI));
        let b = antipode(&Direction::new(PI / 2.0, PI / 2.0).unwrap());
        assert_eq!((b.theta(), b.phi()), (PI / 2.0, 1.5 * PI));
    }

    #[test]
    fn pure_states_give_deterministic_outcomes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dir = Direction::new(1.0, 0.5).unwrap();
        let along = BlochPoint::new(1.0, 1.0, 0.5).unwrap();
        let anti_dir = antipode(&dir);
        let against = BlochPoint::new(1.0, anti_dir.theta(), anti_dir.phi()).unwrap();
        for _ in 0..1000 {
            assert_eq!(sample_outcome(&mut rng, &along, &dir), Outcome::Parallel);
            assert_eq!(
                sample_outcome(&mut rng, &against, &dir),
                Outcome::Antiparallel
            );
        }
    }

    #[test]
    fn mixed_state_outcome_frequency() {
        // Binomial(1e5, 1/2): sigma = sqrt(n)/2 ~ 158
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dir = Direction::new(0.3, 0.3).unwrap();
        let n = 100_000;
        let ones = (0..n)
            .filter(|_| sample_outcome(&mut rng, &BlochPoint::origin(), &dir) == Outcome::Parallel)
            .count() as f64;
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((ones - 0.5 * n as f64).abs() < 3.0 * sigma, "ones = {ones}");
    }

    #[test]
    fn fidelity_examples() {
        let a = BlochPoint::new(0.3, 2.0, 1.0).unwrap();
        assert!(close(fidelity(&a, &a), 1.0, 1e-15));

        let pure = BlochPoint::new(1.0, 0.7, 0.2).unwrap();
        assert!(close(fidelity(&BlochPoint::origin(), &pure), 0.5, 1e-15));

        let north = BlochPoint::new(1.0, 0.0, 0.0).unwrap();
        let south = BlochPoint::new(1.0, PI, 0.0).unwrap();
        assert!(close(fidelity(&north, &south), 0.0, 1e-15));
    }

    #[test]
    fn oracle_examples() {
        let p = density_matrix(&BlochPoint::new(0.4, 1.0, 1.0).unwrap());
        assert!(close(fidelity_matrix_oracle(&p, &p).unwrap(), 1.0, 1e-12));

        let mixed = density_matrix(&BlochPoint::origin());
        let pure = density_matrix(&BlochPoint::new(1.0, 0.0, 0.0).unwrap());
        assert!(close(
            fidelity_matrix_oracle(&mixed, &pure).unwrap(),
            0.5,
            1e-12
        ));
        assert!(close(
            fidelity_matrix_oracle(&pure, &mixed).unwrap(),
            0.5,
            1e-12
        ));
    }

    #[test]
    fn oracle_rejects_negative_spectrum() {
        let bad = DensityMatrix {
            elements: [[c(1.5, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-0.5, 0.0)]],
        };
        let ok = density_matrix(&BlochPoint::origin());
        assert!(fidelity_matrix_oracle(&ok, &bad).is_err());
    }

    #[test]
    fn identity_rotation_is_a_no_op() {
        let p = BlochPoint::new(0.8, 1.2, 3.0).unwrap();
        let q = rotate(&p, &Rotation3::identity());
        assert!(close(q.r(), p.r(), 1e-15));
        assert!(close(q.theta(), p.theta(), 1e-14));
        assert!(close(q.phi(), p.phi(), 1e-14));
    }
}
