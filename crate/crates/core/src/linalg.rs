//! Dense complex vectors and matrices for the few-level systems handled here.
//!
//! Dimensions are small (at most 8), so everything is a flat row-major `Vec`.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Sub};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Smallest norm accepted by [`StateVector::normalize`].
pub const NORM_FLOOR: f64 = 1e-14;

/// Tolerance used when deduplicating ensemble states up to a global phase.
pub const PHASE_TOL: f64 = 1e-9;

const HERMITIAN_TOL: f64 = 1e-9;

/// Pure state amplitudes over the level basis.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
}

impl StateVector {
    pub fn new(amps: Vec<C64>) -> Self {
        assert!(!amps.is_empty(), "state vector must have at least one level");
        Self { amps }
    }

    pub fn from_real(amps: &[f64]) -> Self {
        Self::new(amps.iter().map(|&a| C64::new(a, 0.0)).collect())
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[k] = C64::new(1.0, 0.0);
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalize(&self) -> Result<StateVector> {
        let n = self.norm();
        if !(n > NORM_FLOOR) {
            return Err(Error::ZeroNorm(n));
        }
        Ok(Self { amps: self.amps.iter().map(|a| a / n).collect() })
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn outer(&self) -> DensityMatrix {
        let d = self.dim();
        let mut data = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                data.push(self.amps[i] * self.amps[j].conj());
            }
        }
        DensityMatrix(Matrix { dim: d, data })
    }

    pub fn expectation(&self, op: &Operator) -> Result<C64> {
        let applied = op.apply(self)?;
        Ok(self.inner(&applied))
    }

    /// True when the two states coincide up to a global phase.
    pub fn phase_equal(&self, other: &StateVector, tol: f64) -> bool {
        self.dim() == other.dim() && self.inner(other).norm() >= 1.0 - tol
    }

    pub fn scaled(&self, factor: C64) -> StateVector {
        Self { amps: self.amps.iter().map(|a| a * factor).collect() }
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, a) in self.amps.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// Square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<C64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![C64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for k in 0..dim {
            m.data[k * dim + k] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: row.len() });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: C64) {
        self.data[i * self.dim + j] = value;
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self.get(j, i).conj())
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        self.check_dim(other.dim)?;
        let d = self.dim;
        Ok(Self::from_fn(d, |i, j| (0..d).map(|k| self.get(i, k) * other.get(k, j)).sum()))
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        self.check_dim(v.dim())?;
        let d = self.dim;
        let amps = (0..d)
            .map(|i| (0..d).map(|k| self.get(i, k) * v.amps[k]).sum())
            .collect();
        Ok(StateVector { amps })
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|x| x * factor).collect() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|k| self.get(k, k)).sum()
    }

    /// Largest elementwise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found });
        }
        Ok(())
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.dim, rhs.dim);
        Matrix { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.dim, rhs.dim);
        Matrix { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

impl Mul<&Matrix> for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs).expect("matrix dimensions must agree")
    }
}

impl AddAssign<&Matrix> for Matrix {
    fn add_assign(&mut self, rhs: &Matrix) {
        assert_eq!(self.dim, rhs.dim);
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

/// Operators acting on states: jump operators, Hamiltonians, projectors.
pub type Operator = Matrix;

impl Operator {
    /// `|to⟩⟨from|`
    pub fn transition(dim: usize, to: usize, from: usize) -> Self {
        let mut m = Self::zeros(dim);
        m.set(to, from, C64::new(1.0, 0.0));
        m
    }
}

/// Reduced-system state. Arithmetic is allowed so that derivatives and
/// integrator stages can share the type.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(pub Matrix);

impl DensityMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self(Matrix::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0.get(i, j)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn population(&self, k: usize) -> f64 {
        self.get(k, k).re
    }

    pub fn add_scaled(&mut self, weight: f64, other: &DensityMatrix) {
        for (a, b) in self.0.data.iter_mut().zip(&other.0.data) {
            *a += b * weight;
        }
    }

    pub fn scaled(&self, weight: f64) -> DensityMatrix {
        DensityMatrix(self.0.scale(C64::new(weight, 0.0)))
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        self.0.max_abs_diff(&other.0)
    }

    /// Smallest eigenvalue. Closed form for d <= 2, cyclic Jacobi otherwise.
    ///
    /// The trigonometric cubic solution loses half its digits on degenerate
    /// spectra (every pure 3-level state has a double zero), so d = 3 goes
    /// through Jacobi as well.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let herr = self.0.hermiticity_error();
        if herr > HERMITIAN_TOL {
            return Err(Error::NotHermitian(herr));
        }
        Ok(match self.dim() {
            1 => self.get(0, 0).re,
            2 => min_eig_2x2(&self.0),
            _ => min_eig_jacobi(&self.0),
        })
    }
}

fn min_eig_2x2(m: &Matrix) -> f64 {
    let a = m.get(0, 0).re;
    let d = m.get(1, 1).re;
    let b = 0.5 * (m.get(0, 1) + m.get(1, 0).conj());
    let half_gap = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    0.5 * (a + d) - half_gap
}

fn min_eig_jacobi(m: &Matrix) -> f64 {
    // Real symmetric embedding [[A, -B], [B, A]] of A + iB; spectrum is doubled.
    let d = m.dim();
    let n = 2 * d;
    let mut s = vec![0.0; n * n];
    for i in 0..d {
        for j in 0..d {
            let z = 0.5 * (m.get(i, j) + m.get(j, i).conj());
            s[i * n + j] = z.re;
            s[(i + d) * n + (j + d)] = z.re;
            s[i * n + (j + d)] = -z.im;
            s[(i + d) * n + j] = z.im;
        }
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| s[i * n + j] * s[i * n + j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = s[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (s[q * n + q] - s[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let skp = s[k * n + p];
                    let skq = s[k * n + q];
                    s[k * n + p] = c * skp - sn * skq;
                    s[k * n + q] = sn * skp + c * skq;
                }
                for k in 0..n {
                    let spk = s[p * n + k];
                    let sqk = s[q * n + k];
                    s[p * n + k] = c * spk - sn * sqk;
                    s[q * n + k] = sn * spk + c * sqk;
                }
            }
        }
    }
    (0..n).map(|k| s[k * n + k]).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn min_eig_3x3(m: &Matrix) -> f64 {
        // Trigonometric solution of the characteristic cubic of a Hermitian matrix.
        let herm = |i: usize, j: usize| 0.5 * (m.get(i, j) + m.get(j, i).conj());
        let a01 = herm(0, 1);
        let a02 = herm(0, 2);
        let a12 = herm(1, 2);
        let diag = [m.get(0, 0).re, m.get(1, 1).re, m.get(2, 2).re];
        let p1 = a01.norm_sqr() + a02.norm_sqr() + a12.norm_sqr();
        let q = (diag[0] + diag[1] + diag[2]) / 3.0;
        let p2 = diag.iter().map(|x| (x - q) * (x - q)).sum::<f64>() + 2.0 * p1;
        if p2 <= 1e-300 {
            return q;
        }
        let p = (p2 / 6.0).sqrt();
        let b00 = (diag[0] - q) / p;
        let b11 = (diag[1] - q) / p;
        let b22 = (diag[2] - q) / p;
        let (b01, b02, b12) = (a01 / p, a02 / p, a12 / p);
        // det of Hermitian B; the imaginary parts cancel analytically.
        let det = b00 * b11 * b22 + 2.0 * (b01 * b12 * b02.conj()).re
            - b00 * b12.norm_sqr()
            - b11 * b02.norm_sqr()
            - b22 * b01.norm_sqr();
        let r = (0.5 * det).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos()
    }

    fn sigma_pm(d: usize) -> Operator {
        // σ+σ- = |a⟩⟨a| with |a⟩ = level 0
        Operator::transition(d, 0, 0)
    }

    #[test]
    fn normalize_examples() {
        let v = StateVector::from_real(&[3.0, 2.0]).normalize().unwrap();
        let s = 13f64.sqrt();
        assert!((v.amplitudes()[0].re - 3.0 / s).abs() < 1e-15);
        assert!((v.amplitudes()[1].re - 2.0 / s).abs() < 1e-15);

        let g = StateVector::from_real(&[0.0, 1.0]).normalize().unwrap();
        assert_eq!(g, StateVector::from_real(&[0.0, 1.0]));

        let w = StateVector::new(vec![c(1.0, 1.0), c(0.0, 0.0)]).normalize().unwrap();
        let r = 1.0 / 2f64.sqrt();
        assert!((w.amplitudes()[0] - c(r, r)).norm() < 1e-15);
    }

    #[test]
    fn normalize_rejects_dark_state() {
        let v = StateVector::from_real(&[0.0, 0.0]);
        assert!(matches!(v.normalize(), Err(Error::ZeroNorm(_))));
    }

    #[test]
    fn outer_examples() {
        let rho = StateVector::from_real(&[1.0, 0.0]).outer();
        assert_eq!(rho.get(0, 0), c(1.0, 0.0));
        assert_eq!(rho.get(1, 1), c(0.0, 0.0));

        let v = StateVector::from_real(&[3.0, 2.0]).normalize().unwrap().outer();
        for (i, j, expect) in [(0, 0, 9.0), (0, 1, 6.0), (1, 0, 6.0), (1, 1, 4.0)] {
            assert!((v.get(i, j) - c(expect / 13.0, 0.0)).norm() < 1e-15);
        }

        let h = 1.0 / 2f64.sqrt();
        let w = StateVector::new(vec![c(h, 0.0), c(0.0, h)]).outer();
        assert!((w.get(0, 1) - c(0.0, -0.5)).norm() < 1e-15);
        assert!((w.get(1, 0) - c(0.0, 0.5)).norm() < 1e-15);
        assert!((w.trace() - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn expectation_examples() {
        let v = StateVector::from_real(&[3.0, 2.0]).normalize().unwrap();
        let e = v.expectation(&sigma_pm(2)).unwrap();
        assert!((e - c(9.0 / 13.0, 0.0)).norm() < 1e-15);

        let g = StateVector::basis(2, 1);
        assert_eq!(g.expectation(&sigma_pm(2)).unwrap(), c(0.0, 0.0));

        let e = v.expectation(&Operator::identity(2)).unwrap();
        assert!((e.re - 1.0).abs() < 1e-15);

        let err = v.expectation(&Operator::identity(3));
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn phase_equal_examples() {
        let u = StateVector::basis(2, 0);
        for theta in [0.0, 0.3, 2.0, -3.1] {
            let v = u.scaled(C64::from_polar(1.0, theta));
            assert!(u.phase_equal(&v, 0.0) || u.phase_equal(&v, 1e-15));
        }
        assert!(!u.phase_equal(&StateVector::basis(2, 1), 1e-6));

        let a = StateVector::from_real(&[3.0, 2.0]).normalize().unwrap();
        let b = StateVector::from_real(&[3.0, 2.0001]).normalize().unwrap();
        assert!(a.phase_equal(&b, 1e-6));
    }

    #[test]
    fn min_eigenvalue_examples() {
        let half = DensityMatrix(Matrix::identity(2).scale(c(0.5, 0.0)));
        assert!((half.min_eigenvalue().unwrap() - 0.5).abs() < 1e-15);

        let pure = StateVector::basis(3, 0).outer();
        assert!(pure.min_eigenvalue().unwrap().abs() < 1e-15, "{}", pure.min_eigenvalue().unwrap());

        let m = DensityMatrix(
            Matrix::from_rows(&[vec![c(0.6, 0.0), c(0.5, 0.0)], vec![c(0.5, 0.0), c(0.4, 0.0)]])
                .unwrap(),
        );
        let expect = (1.0 - (0.04f64 + 1.0).sqrt()) / 2.0;
        assert!((m.min_eigenvalue().unwrap() - expect).abs() < 1e-15);
        assert!((expect + 0.0099).abs() < 1e-5);
    }

    #[test]
    fn min_eigenvalue_rejects_non_hermitian() {
        let m = DensityMatrix(
            Matrix::from_rows(&[vec![c(0.5, 0.0), c(0.3, 0.0)], vec![c(0.0, 0.0), c(0.5, 0.0)]])
                .unwrap(),
        );
        assert!(matches!(m.min_eigenvalue(), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn jacobi_matches_closed_form_on_embedded_block() {
        // diag(0.7, -0.1, 0.4) rotated by a unitary built from a known state,
        // embedded in 4 levels with an extra 0 eigenvalue.
        let rows = vec![
            vec![c(0.5, 0.0), c(0.1, 0.2), c(0.0, -0.1), c(0.0, 0.0)],
            vec![c(0.1, -0.2), c(0.3, 0.0), c(0.05, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.1), c(0.05, 0.0), c(0.2, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.9, 0.0)],
        ];
        let big = DensityMatrix(Matrix::from_rows(&rows).unwrap());
        let small_rows: Vec<Vec<C64>> = rows[..3].iter().map(|r| r[..3].to_vec()).collect();
        let small = DensityMatrix(Matrix::from_rows(&small_rows).unwrap());
        let a = big.min_eigenvalue().unwrap();
        let b = small.min_eigenvalue().unwrap();
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    fn arb_state(dim: usize) -> impl Strategy<Value = StateVector> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim)
            .prop_filter("nonzero", |v| v.iter().map(|(a, b)| a * a + b * b).sum::<f64>() > 1e-3)
            .prop_map(|v| {
                StateVector::new(v.into_iter().map(|(a, b)| C64::new(a, b)).collect())
                    .normalize()
                    .unwrap()
            })
    }

    fn arb_operator(dim: usize) -> impl Strategy<Value = Operator> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim * dim).prop_map(move |v| {
            let mut it = v.into_iter();
            Matrix::from_fn(dim, |_, _| {
                let (a, b) = it.next().unwrap();
                C64::new(a, b)
            })
        })
    }

    proptest! {
        #[test]
        fn expectation_of_cdag_c_is_norm_squared(v in arb_state(3), op in arb_operator(3)) {
            let cdc = op.adjoint().matmul(&op).unwrap();
            let e = v.expectation(&cdc).unwrap();
            let direct = op.apply(&v).unwrap().norm_sqr();
            prop_assert!((e.re - direct).abs() < 1e-12);
            prop_assert!(e.im.abs() < 1e-12);
        }

        #[test]
        fn phase_equal_symmetric_and_reflexive(u in arb_state(3), v in arb_state(3), tol in 0.0f64..0.5) {
            prop_assert!(u.phase_equal(&u, tol.max(1e-15)));
            prop_assert_eq!(u.phase_equal(&v, tol), v.phase_equal(&u, tol));
        }

        #[test]
        fn pure_states_are_positive(v in arb_state(3), w in arb_state(2), x in arb_state(5)) {
            prop_assert!(v.outer().min_eigenvalue().unwrap() >= -1e-12);
            prop_assert!(w.outer().min_eigenvalue().unwrap() >= -1e-12);
            prop_assert!(x.outer().min_eigenvalue().unwrap() >= -1e-12);
        }

        #[test]
        fn jacobi_agrees_with_cubic_formula(v in arb_state(3), w in arb_state(3), p in 0.1f64..0.9) {
            let mut rho = v.outer().scaled(p);
            rho.add_scaled(1.0 - p, &w.outer());
            rho.add_scaled(-0.05, &StateVector::basis(3, 1).outer());
            let a = rho.min_eigenvalue().unwrap();
            let b = min_eig_3x3(rho.matrix());
            prop_assert!((a - b).abs() < 1e-6, "{} vs {}", a, b);
        }

        #[test]
        fn mixture_has_exact_weighted_trace(
            states in prop::collection::vec(arb_state(3), 1..5),
            counts in prop::collection::vec(0u64..1000, 5),
        ) {
            let total: u64 = counts.iter().take(states.len()).sum::<u64>().max(1);
            let mut rho = DensityMatrix::zeros(3);
            let mut expected = 0.0;
            for (s, &n) in states.iter().zip(&counts) {
                let w = n as f64 / total as f64;
                expected += w;
                rho.add_scaled(w, &s.outer());
            }
            prop_assert!(rho.matrix().hermiticity_error() < 1e-12);
            prop_assert!((rho.trace().re - expected).abs() < 1e-12);
        }
    }
}
