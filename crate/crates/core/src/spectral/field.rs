use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::SpectralError;

/// Integer frequency vector. For `dim == 1` the second entry is always zero.
pub type Freq = [i64; 2];

/// ℓ¹ norm of a frequency.
#[inline]
pub fn l1(k: Freq) -> i64 {
    k[0].abs() + k[1].abs()
}

/// Which part of the spectrum a truncation keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Truncation {
    /// `0 <= |k|₁ <= N`.
    Inhomogeneous,
    /// `0 < |k|₁ <= N`, mean removed.
    Homogeneous,
    /// `|k|₁ > N`.
    Tail,
}

/// Real-valued trigonometric polynomial on `T^d`, `f(x) = Σ c_k e^{2πi k·x}`.
///
/// Coefficients are stored on the box `[-N, N]^d`; entries with `|k|₁ > N`
/// are kept at exactly zero and `c_{-k} = conj(c_k)` holds for every stored
/// pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicField {
    dim: usize,
    degree: usize,
    coeffs: Vec<Complex64>,
}

impl PeriodicField {
    pub fn zeros(dim: usize, degree: usize) -> Self {
        assert!(dim == 1 || dim == 2, "only d = 1 and d = 2 are supported");
        let side = 2 * degree + 1;
        PeriodicField {
            dim,
            degree,
            coeffs: vec![Complex64::new(0.0, 0.0); side.pow(dim as u32)],
        }
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        let mut f = Self::zeros(dim, 0);
        f.coeffs[0] = Complex64::new(value, 0.0);
        f
    }

    /// `amp_cos · cos(2πk·x) + amp_sin · sin(2πk·x)`.
    pub fn harmonic(dim: usize, k: Freq, amp_cos: f64, amp_sin: f64) -> Self {
        let mut f = Self::zeros(dim, l1(k) as usize);
        f.add_harmonic(k, amp_cos, amp_sin);
        f
    }

    /// Builds a field from `(k, c_k)` pairs. Each pair also sets the
    /// Hermitian partner `c_{-k} = conj(c_k)`; later pairs overwrite earlier
    /// ones.
    pub fn from_modes<I>(dim: usize, degree: usize, modes: I) -> Result<Self, SpectralError>
    where
        I: IntoIterator<Item = (Freq, Complex64)>,
    {
        let mut f = Self::zeros(dim, degree);
        for (k, c) in modes {
            f.set_pair(k, c)?;
        }
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    fn side(&self) -> usize {
        2 * self.degree + 1
    }

    fn index(&self, k: Freq) -> Option<usize> {
        let n = self.degree as i64;
        if self.dim == 1 && k[1] != 0 {
            return None;
        }
        if l1(k) > n {
            return None;
        }
        let i0 = (k[0] + n) as usize;
        if self.dim == 1 {
            Some(i0)
        } else {
            Some(i0 * self.side() + (k[1] + n) as usize)
        }
    }

    /// Coefficient `c_k`; zero outside the stored ball.
    pub fn coeff(&self, k: Freq) -> Complex64 {
        self.index(k)
            .map(|i| self.coeffs[i])
            .unwrap_or_else(|| Complex64::new(0.0, 0.0))
    }

    /// Sets `c_k = c` and `c_{-k} = conj(c)`. For `k = 0` the imaginary part
    /// is dropped.
    pub fn set_pair(&mut self, k: Freq, c: Complex64) -> Result<(), SpectralError> {
        let i = self.index(k).ok_or(SpectralError::FrequencyOutOfRange {
            k: k.to_vec(),
            degree: self.degree,
        })?;
        let j = self.index([-k[0], -k[1]]).expect("ball is symmetric");
        if i == j {
            self.coeffs[i] = Complex64::new(c.re, 0.0);
        } else {
            self.coeffs[i] = c;
            self.coeffs[j] = c.conj();
        }
        Ok(())
    }

    /// Adds `amp_cos · cos(2πk·x) + amp_sin · sin(2πk·x)`, growing the degree
    /// if needed.
    pub fn add_harmonic(&mut self, k: Freq, amp_cos: f64, amp_sin: f64) {
        let need = l1(k) as usize;
        if need > self.degree {
            *self = self.resized(need);
        }
        if k == [0, 0] {
            let c = self.coeff(k) + amp_cos;
            self.set_pair(k, c).expect("zero mode is always stored");
            return;
        }
        // cos θ = (e^{iθ} + e^{-iθ})/2, sin θ = (e^{iθ} - e^{-iθ})/(2i)
        let c = self.coeff(k) + Complex64::new(amp_cos / 2.0, -amp_sin / 2.0);
        self.set_pair(k, c).expect("degree was grown to fit k");
    }

    /// All frequencies of the ℓ¹ ball in lexicographic order.
    pub fn frequencies(&self) -> impl Iterator<Item = Freq> + '_ {
        let n = self.degree as i64;
        let dim = self.dim;
        (-n..=n).flat_map(move |k0| {
            let rest = n - k0.abs();
            let range = if dim == 1 { 0..=0 } else { -rest..=rest };
            range.map(move |k1| [k0, k1])
        })
    }

    /// `(k, c_k)` over the ℓ¹ ball in lexicographic order.
    pub fn modes(&self) -> impl Iterator<Item = (Freq, Complex64)> + '_ {
        self.frequencies().map(move |k| (k, self.coeff(k)))
    }

    pub fn mean(&self) -> f64 {
        self.coeff([0, 0]).re
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    /// Pads with zeros or truncates to the ℓ¹ ball of radius `degree`.
    pub fn resized(&self, degree: usize) -> Self {
        let mut out = Self::zeros(self.dim, degree);
        for (k, c) in self.modes() {
            if let Some(i) = out.index(k) {
                out.coeffs[i] = c;
            }
        }
        out
    }

    /// The truncation operators `T_N`, `Ṫ_N` and `R_N`.
    pub fn truncate(&self, n: usize, mode: Truncation) -> Self {
        match mode {
            Truncation::Inhomogeneous => self.resized(n.min(self.degree)),
            Truncation::Homogeneous => {
                let mut out = self.resized(n.min(self.degree));
                let i = out.index([0, 0]).unwrap();
                out.coeffs[i] = Complex64::new(0.0, 0.0);
                out
            }
            Truncation::Tail => {
                let mut out = self.clone();
                let keep = n as i64;
                let ks: Vec<Freq> = self.frequencies().filter(|&k| l1(k) <= keep).collect();
                for k in ks {
                    let i = out.index(k).unwrap();
                    out.coeffs[i] = Complex64::new(0.0, 0.0);
                }
                out
            }
        }
    }

    /// Direct summation of the series at `x`; the imaginary residue is dropped.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim, "point dimension mismatch");
        let n = self.degree as i64;
        let e0: Vec<Complex64> = (-n..=n)
            .map(|k| Complex64::cis(2.0 * PI * k as f64 * x[0]))
            .collect();
        if self.dim == 1 {
            return self.coeffs.iter().zip(&e0).map(|(c, e)| (c * e).re).sum();
        }
        let e1: Vec<Complex64> = (-n..=n)
            .map(|k| Complex64::cis(2.0 * PI * k as f64 * x[1]))
            .collect();
        let side = self.side();
        let mut acc = 0.0;
        for (i0, a) in e0.iter().enumerate() {
            let row = &self.coeffs[i0 * side..(i0 + 1) * side];
            let inner: Complex64 = row.iter().zip(&e1).map(|(c, e)| c * e).sum();
            acc += (a * inner).re;
        }
        acc
    }

    /// `x ↦ f(x + shift)`.
    pub fn translated(&self, shift: &[f64]) -> Self {
        let mut out = self.clone();
        let s1 = if self.dim == 2 { shift[1] } else { 0.0 };
        for k in self.frequencies() {
            let phase = 2.0 * PI * (k[0] as f64 * shift[0] + k[1] as f64 * s1);
            let i = out.index(k).unwrap();
            out.coeffs[i] *= Complex64::cis(phase);
        }
        out
    }

    /// Partial derivative `∂^σ f` for the multi-index `order`.
    pub fn derivative(&self, order: [u32; 2]) -> Self {
        let mut out = self.clone();
        for k in self.frequencies() {
            let i = out.index(k).unwrap();
            out.coeffs[i] *= diff_factor(k, order);
        }
        out
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= a);
        out
    }

    /// `a·self + b·other` at the larger of the two degrees.
    pub fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Self {
        assert_eq!(self.dim, other.dim);
        let deg = self.degree.max(other.degree);
        let mut out = Self::zeros(self.dim, deg);
        for k in out.frequencies().collect::<Vec<_>>() {
            let i = out.index(k).unwrap();
            out.coeffs[i] = self.coeff(k) * a + other.coeff(k) * b;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.lin_comb(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.lin_comb(1.0, other, -1.0)
    }

    /// `Σ |c_k|`, the Wiener norm.
    pub fn coeff_l1(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    /// Largest `|c_k - conj(c_{-k})|` over the ball.
    pub fn hermitian_defect(&self) -> f64 {
        self.modes()
            .map(|(k, c)| (c - self.coeff([-k[0], -k[1]]).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Largest coefficient difference against `other`, over both balls.
    pub fn max_coeff_diff(&self, other: &Self) -> f64 {
        let deg = self.degree.max(other.degree);
        Self::zeros(self.dim, deg)
            .frequencies()
            .map(|k| (self.coeff(k) - other.coeff(k)).norm())
            .fold(0.0, f64::max)
    }
}

/// `Π_j (2πi k_j)^{σ_j}`.
pub(crate) fn diff_factor(k: Freq, order: [u32; 2]) -> Complex64 {
    let mut f = Complex64::new(1.0, 0.0);
    for axis in 0..2 {
        let w = Complex64::new(0.0, 2.0 * PI * k[axis] as f64);
        for _ in 0..order[axis] {
            f *= w;
        }
    }
    f
}
