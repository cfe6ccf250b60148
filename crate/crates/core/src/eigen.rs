//! Sample/population covariance matrices and their ordered eigenvalues.
//!
//! `K` is expected to be small (≤ 8). The 2×2 case uses the closed form;
//! larger matrices go through cyclic Jacobi rotations, which work directly on
//! Hermitian matrices by first rotating away the phase of each pivot.

use num_complex::Complex64;

use crate::error::{Result, SenseError};
use crate::matrix::{ComplexMatrix, Matrix, RealMatrix, Scalar};
use crate::signal::{SampleMatrix, ValueCase};

/// Relative tolerance used when checking that an input matrix is Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Default relative gap below which population eigenvalues are merged.
pub const DEFAULT_MULTIPLICITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceMatrix {
    Real(RealMatrix),
    Complex(ComplexMatrix),
}

impl CovarianceMatrix {
    pub fn case(&self) -> ValueCase {
        match self {
            CovarianceMatrix::Real(_) => ValueCase::Real,
            CovarianceMatrix::Complex(_) => ValueCase::Complex,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            CovarianceMatrix::Real(m) => m.rows(),
            CovarianceMatrix::Complex(m) => m.rows(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            CovarianceMatrix::Real(m) => m.trace(),
            CovarianceMatrix::Complex(m) => m.trace().re,
        }
    }

    /// Entry `(i, j)` as a complex number, whatever the case.
    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        match self {
            CovarianceMatrix::Real(m) => Complex64::new(m[(i, j)], 0.0),
            CovarianceMatrix::Complex(m) => m[(i, j)],
        }
    }
}

fn gram<T: Scalar>(x: &Matrix<T>) -> Matrix<T> {
    let (k, n) = (x.rows(), x.cols());
    let inv_n = 1.0 / n as f64;
    let mut c = Matrix::zeros(k, k);
    for i in 0..k {
        let xi = x.row(i);
        for j in i..k {
            let xj = x.row(j);
            let mut acc = T::ZERO;
            for (&a, &b) in xi.iter().zip(xj) {
                acc += a * b.conj();
            }
            let v = acc.scale(inv_n);
            if i == j {
                c[(i, i)] = T::from_real(v.re());
            } else {
                c[(i, j)] = v;
                c[(j, i)] = v.conj();
            }
        }
    }
    c
}

/// `(1/N) X Xᴴ`, exactly Hermitian (the lower triangle mirrors the upper).
pub fn sample_covariance(x: &SampleMatrix) -> Result<CovarianceMatrix> {
    if x.antennas() == 0 || x.samples() == 0 {
        return Err(SenseError::arg("sample matrix is empty"));
    }
    Ok(match x {
        SampleMatrix::Real(m) => CovarianceMatrix::Real(gram(m)),
        SampleMatrix::Complex(m) => CovarianceMatrix::Complex(gram(m)),
    })
}

/// `σ_s² H Hᴴ + σ_u² I`. The result is real when every channel gain is real.
pub fn population_covariance(channel: &ComplexMatrix, sigma_s2: f64, sigma_u2: f64) -> CovarianceMatrix {
    let k = channel.rows();
    let mut r = channel.matmul(&channel.conj_transpose()).scaled(sigma_s2);
    for i in 0..k {
        r[(i, i)] = Complex64::new(r[(i, i)].re + sigma_u2, 0.0);
        for j in (i + 1)..k {
            r[(j, i)] = r[(i, j)].conj();
        }
    }
    if channel.as_slice().iter().all(|z| z.im == 0.0) {
        CovarianceMatrix::Real(RealMatrix::from_vec(k, k, r.as_slice().iter().map(|z| z.re).collect()))
    } else {
        CovarianceMatrix::Complex(r)
    }
}

/// Eigenvalues in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSpectrum {
    values: Vec<f64>,
}

impl EigenSpectrum {
    /// Sorts `values` into descending order.
    pub fn from_unsorted(mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        Self { values }
    }

    /// Accepts values already in descending order.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(SenseError::arg("spectrum must be nonempty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SenseError::arg("spectrum contains non-finite values"));
        }
        if values.windows(2).any(|w| w[0] < w[1]) {
            return Err(SenseError::arg("spectrum must be in descending order"));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn largest(&self) -> f64 {
        self.values[0]
    }

    pub fn smallest(&self) -> f64 {
        *self.values.last().expect("nonempty spectrum")
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Multiplies every eigenvalue by `c > 0`; order is preserved.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }
}

fn check_hermitian<T: Scalar>(m: &Matrix<T>) -> Result<()> {
    if !m.is_square() {
        return Err(SenseError::arg(format!("matrix is {} x {}, not square", m.rows(), m.cols())));
    }
    let scale = m.as_slice().iter().map(|x| x.abs()).fold(0.0, f64::max);
    let asym = m.max_abs_diff(&m.conj_transpose());
    if asym > HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(SenseError::arg(format!("matrix is not Hermitian (asymmetry {asym:e})")));
    }
    Ok(())
}

fn closed_form_2x2<T: Scalar>(m: &Matrix<T>) -> [f64; 2] {
    let a = m[(0, 0)].re();
    let c = m[(1, 1)].re();
    let b = 0.5 * (m[(0, 1)].abs() + m[(1, 0)].abs());
    let mean = 0.5 * (a + c);
    let radius = (0.5 * (a - c)).hypot(b);
    [mean + radius, mean - radius]
}

/// Cyclic Jacobi on a Hermitian matrix; returns the (unsorted) diagonal.
fn jacobi_hermitian<T: Scalar>(mut a: Matrix<T>) -> Vec<f64> {
    const MAX_SWEEPS: usize = 64;
    let n = a.rows();
    let total = a.frobenius_sqr();
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off == 0.0 || off <= 1e-36 * total {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let r = apq.abs();
                if r == 0.0 {
                    continue;
                }
                let diag = a[(p, p)].abs() + a[(q, q)].abs();
                if r <= 1e-3 * f64::EPSILON * diag {
                    a[(p, q)] = T::ZERO;
                    a[(q, p)] = T::ZERO;
                    continue;
                }
                // Rotate the phase of column q so the pivot becomes real.
                let unit = apq.scale(1.0 / r);
                for k in 0..n {
                    a[(k, q)] = a[(k, q)] * unit.conj();
                }
                for k in 0..n {
                    a[(q, k)] = a[(q, k)] * unit;
                }
                let app = a[(p, p)].re();
                let aqq = a[(q, q)].re();
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    let new_kp = akp.scale(c) - akq.scale(s);
                    let new_kq = akp.scale(s) + akq.scale(c);
                    a[(k, p)] = new_kp;
                    a[(p, k)] = new_kp.conj();
                    a[(k, q)] = new_kq;
                    a[(q, k)] = new_kq.conj();
                }
                a[(p, p)] = T::from_real(app - t * r);
                a[(q, q)] = T::from_real(aqq + t * r);
                a[(p, q)] = T::ZERO;
                a[(q, p)] = T::ZERO;
            }
        }
    }
    (0..n).map(|i| a[(i, i)].re()).collect()
}

/// Eigenvalues of a Hermitian matrix, descending.
pub fn hermitian_eigenvalues<T: Scalar>(m: &Matrix<T>) -> Result<EigenSpectrum> {
    check_hermitian(m)?;
    let values = match m.rows() {
        0 => return Err(SenseError::arg("empty matrix")),
        1 => vec![m[(0, 0)].re()],
        2 => closed_form_2x2(m).to_vec(),
        _ => jacobi_hermitian(m.clone()),
    };
    Ok(EigenSpectrum::from_unsorted(values))
}

pub fn eigenvalues(c: &CovarianceMatrix) -> Result<EigenSpectrum> {
    match c {
        CovarianceMatrix::Real(m) => hermitian_eigenvalues(m),
        CovarianceMatrix::Complex(m) => hermitian_eigenvalues(m),
    }
}

/// Distinct eigenvalues `μ_1 > … > μ_r` with multiplicities `q_1 … q_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplicityPartition {
    pub mus: Vec<f64>,
    pub qs: Vec<usize>,
}

impl MultiplicityPartition {
    /// Number of distinct values, `r`.
    pub fn distinct(&self) -> usize {
        self.mus.len()
    }

    pub fn total(&self) -> usize {
        self.qs.iter().sum()
    }
}

/// Groups consecutive eigenvalues whose relative gap is at most `rel_tol`;
/// each group is represented by its mean.
pub fn multiplicity_partition(spec: &EigenSpectrum, rel_tol: f64) -> MultiplicityPartition {
    let mut groups: Vec<Vec<f64>> = Vec::new();
    for &v in spec.values() {
        match groups.last_mut() {
            Some(g) => {
                let prev = *g.last().expect("nonempty group");
                let scale = prev.abs().max(v.abs());
                if prev - v <= rel_tol * scale {
                    g.push(v);
                } else {
                    groups.push(vec![v]);
                }
            }
            None => groups.push(vec![v]),
        }
    }
    MultiplicityPartition {
        mus: groups.iter().map(|g| g.iter().sum::<f64>() / g.len() as f64).collect(),
        qs: groups.iter().map(Vec::len).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(rows: &[Vec<f64>]) -> CovarianceMatrix {
        CovarianceMatrix::Real(RealMatrix::from_rows(rows))
    }

    #[test]
    fn sample_covariance_small_cases() {
        let x = SampleMatrix::Real(RealMatrix::from_rows(&[vec![1.0, -1.0], vec![1.0, 1.0]]));
        let CovarianceMatrix::Real(c) = sample_covariance(&x).unwrap() else { panic!() };
        assert_eq!(c, RealMatrix::identity(2));

        let col = ComplexMatrix::from_vec(2, 1, vec![Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.0)]);
        let CovarianceMatrix::Complex(c) = sample_covariance(&SampleMatrix::Complex(col.clone())).unwrap() else {
            panic!()
        };
        assert!(c.max_abs_diff(&col.matmul(&col.conj_transpose())) < 1e-15);
        let spec = eigenvalues(&CovarianceMatrix::Complex(c)).unwrap();
        assert!(spec.smallest().abs() < 1e-14);

        let empty = SampleMatrix::Real(RealMatrix::zeros(2, 0));
        assert!(sample_covariance(&empty).is_err());
    }

    #[test]
    fn population_covariance_examples() {
        let h = ComplexMatrix::from_vec(2, 1, vec![Complex64::new(1.0, 0.0); 2]);
        let r = population_covariance(&h, 1.0, 1.0);
        assert_eq!(r, real(&[vec![2.0, 1.0], vec![1.0, 2.0]]));
        assert_eq!(eigenvalues(&r).unwrap().values(), &[3.0, 1.0]);
        let r0 = population_covariance(&h, 0.0, 1.5);
        assert_eq!(r0, CovarianceMatrix::Real(RealMatrix::identity(2).scaled(1.5)));
    }

    #[test]
    fn eigenvalue_examples() {
        assert_eq!(eigenvalues(&real(&[vec![2.0, 1.0], vec![1.0, 2.0]])).unwrap().values(), &[3.0, 1.0]);
        for k in 1..=6 {
            let id = CovarianceMatrix::Real(RealMatrix::identity(k));
            assert_eq!(eigenvalues(&id).unwrap().values(), vec![1.0; k].as_slice());
        }
        let i = Complex64::i();
        let h = ComplexMatrix::from_rows(&[vec![Complex64::new(2.0, 0.0), i], vec![-i, Complex64::new(2.0, 0.0)]]);
        let spec = eigenvalues(&CovarianceMatrix::Complex(h)).unwrap();
        assert!((spec.values()[0] - 3.0).abs() < 1e-15 && (spec.values()[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn jacobi_handles_complex_3x3() {
        // diag(4, 2, 1) conjugated by a phase-carrying unitary.
        let i = Complex64::i();
        let s = 1.0 / 2f64.sqrt();
        let u = ComplexMatrix::from_rows(&[
            vec![Complex64::new(s, 0.0), i * s, Complex64::new(0.0, 0.0)],
            vec![i * s, Complex64::new(s, 0.0), Complex64::new(0.0, 0.0)],
            vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.6, 0.8)],
        ]);
        let mut d = ComplexMatrix::zeros(3, 3);
        d[(0, 0)] = Complex64::new(4.0, 0.0);
        d[(1, 1)] = Complex64::new(2.0, 0.0);
        d[(2, 2)] = Complex64::new(1.0, 0.0);
        let a = u.matmul(&d).matmul(&u.conj_transpose());
        let spec = hermitian_eigenvalues(&a).unwrap();
        for (got, want) in spec.values().iter().zip([4.0, 2.0, 1.0]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = RealMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]);
        assert!(hermitian_eigenvalues(&m).is_err());
        let rect = RealMatrix::zeros(2, 3);
        assert!(hermitian_eigenvalues(&rect).is_err());
    }

    #[test]
    fn rank_deficient_sample_covariance_allowed() {
        // N < K: at least one zero eigenvalue, no error at this layer.
        let x = SampleMatrix::Real(RealMatrix::from_rows(&[vec![1.0], vec![2.0], vec![-1.0]]));
        let spec = eigenvalues(&sample_covariance(&x).unwrap()).unwrap();
        assert!(spec.smallest().abs() < 1e-12 * spec.largest());
        assert!((spec.largest() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn partition_examples() {
        let p = multiplicity_partition(&EigenSpectrum::new(vec![3.0, 1.0, 1.0]).unwrap(), 1e-9);
        assert_eq!((p.distinct(), p.mus.clone(), p.qs.clone()), (2, vec![3.0, 1.0], vec![1, 2]));
        let p = multiplicity_partition(&EigenSpectrum::new(vec![1.0, 1.0]).unwrap(), 0.0);
        assert_eq!((p.mus.clone(), p.qs.clone()), (vec![1.0], vec![2]));
        let p = multiplicity_partition(&EigenSpectrum::new(vec![3.0, 1.0 + 1e-12, 1.0]).unwrap(), 1e-9);
        assert_eq!(p.qs, vec![1, 2]);
        assert!((p.mus[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectrum_validation() {
        assert!(EigenSpectrum::new(vec![1.0, 2.0]).is_err());
        assert!(EigenSpectrum::new(vec![]).is_err());
        assert!(EigenSpectrum::new(vec![f64::NAN]).is_err());
        assert_eq!(EigenSpectrum::from_unsorted(vec![1.0, 3.0, 2.0]).values(), &[3.0, 2.0, 1.0]);
    }
}
