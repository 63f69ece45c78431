//! Minimal dense linear algebra, activations, and a seedable RNG shared by
//! every model in the crate.
//!
//! All arithmetic is `f64`. [`Rng`] wraps ChaCha8 seeded from a `u64`;
//! uniform, Gaussian, and shuffle draws are derived from the raw 64-bit
//! stream in this module, so a given seed reproduces the same sequence on
//! every build.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data. Rejects length mismatches and
    /// non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Matrix> {
        if data.len() != rows * cols {
            return Err(Error::MatrixSize {
                rows,
                cols,
                len: data.len(),
            });
        }
        check_finite("matrix data", &data)?;
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Standard matrix product.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::MatmulShape {
                a_rows: self.rows,
                a_cols: self.cols,
                b_rows: other.rows,
                b_cols: other.cols,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = other.row(k);
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * v` for a column vector `v` of length `cols`.
    pub fn mul_vec(&self, v: &Vector) -> Result<Vector> {
        if v.len() != self.cols {
            return Err(Error::LengthMismatch {
                context: "matrix-vector product",
                expected: self.cols,
                found: v.len(),
            });
        }
        let mut out = vec![0.0; self.rows];
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), v.as_slice());
        }
        Ok(Vector::from_raw(out))
    }

    /// `selfᵀ * v` for a column vector `v` of length `rows`.
    pub fn tmul_vec(&self, v: &Vector) -> Result<Vector> {
        if v.len() != self.rows {
            return Err(Error::LengthMismatch {
                context: "transposed matrix-vector product",
                expected: self.rows,
                found: v.len(),
            });
        }
        let mut out = vec![0.0; self.cols];
        for (r, &x) in v.as_slice().iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(self.row(r)) {
                *o += x * w;
            }
        }
        Ok(Vector::from_raw(out))
    }

    /// New matrix holding the given rows of `self`, in order.
    pub fn gather_rows(&self, indices: &[usize]) -> Result<Matrix> {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::IndexOutOfRange {
                    context: "gather_rows",
                    index: i,
                    bound: self.rows,
                });
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        })
    }

    /// `self += scale * other`, entrywise. Shapes must match.
    pub fn add_scaled(&mut self, other: &Matrix, scale: f64) {
        debug_assert_eq!(self.rows, other.rows);
        debug_assert_eq!(self.cols, other.cols);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for a in &mut self.data {
            *a *= factor;
        }
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Matrix {
        debug_assert_eq!(data.len(), rows * cols);
        Matrix { rows, cols, data }
    }
}

/// Dense `f64` vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn zeros(len: usize) -> Vector {
        Vector {
            data: vec![0.0; len],
        }
    }

    /// Builds a vector, rejecting non-finite entries.
    pub fn from_vec(data: Vec<f64>) -> Result<Vector> {
        check_finite("vector data", &data)?;
        Ok(Vector { data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.data[i]
    }

    pub fn set(&mut self, i: usize, value: f64) {
        self.data[i] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn dot(&self, other: &Vector) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                context: "dot product",
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(dot(&self.data, &other.data))
    }

    /// `self += scale * other`, entrywise. Lengths must match.
    pub fn add_scaled(&mut self, other: &Vector, scale: f64) {
        debug_assert_eq!(self.len(), other.len());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for a in &mut self.data {
            *a *= factor;
        }
    }

    pub(crate) fn from_raw(data: Vec<f64>) -> Vector {
        Vector { data }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_finite(context: &'static str, data: &[f64]) -> Result<()> {
    for (index, &value) in data.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite {
                context,
                index,
                value,
            });
        }
    }
    Ok(())
}

/// Logistic function `1 / (1 + e^{-x})`, computed through the branch that
/// only ever exponentiates a non-positive argument, so it saturates instead
/// of overflowing.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Seedable deterministic random number generator.
///
/// Backed by the ChaCha stream cipher with 8 rounds; the algorithm is fixed
/// so that a seed identifies one reproducible stream. All derived draws
/// (uniform doubles, Gaussians, bounded integers, shuffles) are built from
/// `next_u64` inside this module and are therefore equally reproducible.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    stream: ChaCha8Rng,
    spare_gaussian: Option<f64>,
}

impl Rng {
    pub fn with_seed(seed: u64) -> Rng {
        Rng {
            seed,
            stream: ChaCha8Rng::seed_from_u64(seed),
            spare_gaussian: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Fresh generator seeded with `seed + offset`; used to give independent
    /// folds and runs their own streams.
    pub fn derive(&self, offset: u64) -> Rng {
        Rng::with_seed(self.seed.wrapping_add(offset))
    }

    /// Uniform draw from `[0, 1)` with 53 random mantissa bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.stream.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw (Box-Muller; the paired value is cached).
    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare_gaussian.take() {
            return z;
        }
        // 1 - u ∈ (0, 1] keeps the logarithm finite.
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare_gaussian = Some(radius * angle.sin());
        radius * angle.cos()
    }

    /// Uniform integer in `0..bound`, unbiased via rejection sampling.
    pub fn next_below(&mut self, bound: usize) -> usize {
        assert!(bound > 0, "next_below requires a positive bound");
        let bound = bound as u64;
        let zone = u64::MAX - u64::MAX % bound;
        loop {
            let x = self.stream.next_u64();
            if x < zone {
                return (x % bound) as usize;
            }
        }
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i + 1);
            items.swap(i, j);
        }
    }
}

/// Samples a `{0, 1}` vector where entry `i` is 1 with probability `p[i]`.
///
/// Entries outside `[0, 1]` are rejected.
pub fn bernoulli_sample(p: &Vector, rng: &mut Rng) -> Result<Vector> {
    let mut out = vec![0.0; p.len()];
    for (index, (&prob, o)) in p.as_slice().iter().zip(&mut out).enumerate() {
        if !(0.0..=1.0).contains(&prob) {
            return Err(Error::ProbabilityRange {
                index,
                value: prob,
            });
        }
        *o = if rng.next_f64() < prob { 1.0 } else { 0.0 };
    }
    Ok(Vector::from_raw(out))
}

/// Matrix with i.i.d. `Normal(0, std²)` entries, filled in row-major order.
pub fn gaussian_init(rows: usize, cols: usize, std: f64, rng: &mut Rng) -> Matrix {
    assert!(std >= 0.0, "gaussian_init requires std >= 0");
    let data = (0..rows * cols).map(|_| std * rng.next_gaussian()).collect();
    Matrix::from_raw(rows, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest};

    #[test]
    fn matmul_identity_is_neutral() {
        let a = Matrix::from_vec(2, 2, vec![3.0, -1.5, 0.25, 7.0]).unwrap();
        let id = Matrix::identity(2);
        assert_eq!(id.matmul(&a).unwrap(), a);
        assert_eq!(a.matmul(&id).unwrap(), a);
    }

    #[test]
    fn matmul_hand_example() {
        let a = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Matrix::from_vec(2, 1, vec![0.0, 1.0]).unwrap();
        let product = a.matmul(&b).unwrap();
        assert_eq!(product.data(), &[2.0, 4.0]);
    }

    #[test]
    fn matmul_zero_annihilates() {
        let zero = Matrix::zeros(2, 3);
        let mut rng = Rng::with_seed(3);
        let b = gaussian_init(3, 4, 1.0, &mut rng);
        let product = zero.matmul(&b).unwrap();
        assert!(product.data().iter().all(|&x| x == 0.0));
        assert_eq!((product.rows(), product.cols()), (2, 4));
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(4, 5);
        let err = a.matmul(&b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(2, 3)") && msg.contains("(4, 5)"), "{msg}");
    }

    #[test]
    fn from_vec_rejects_bad_length_and_nan() {
        assert!(Matrix::from_vec(2, 2, vec![1.0; 3]).is_err());
        assert!(Matrix::from_vec(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Vector::from_vec(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn sigmoid_midpoint_and_saturation() {
        assert_eq!(sigmoid(0.0), 0.5);
        let hi = sigmoid(500.0);
        assert!(hi > 1.0 - 1e-12 && hi <= 1.0);
        let lo = sigmoid(-500.0);
        assert!(lo >= 0.0 && lo < 1e-12);
    }

    #[test]
    fn sigmoid_symmetry_identity() {
        let s = sigmoid(1.5) + sigmoid(-1.5);
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bernoulli_degenerate_probabilities() {
        let mut rng = Rng::with_seed(1);
        let zeros = bernoulli_sample(&Vector::zeros(16), &mut rng).unwrap();
        assert!(zeros.as_slice().iter().all(|&x| x == 0.0));
        let ones_p = Vector::from_vec(vec![1.0; 16]).unwrap();
        let ones = bernoulli_sample(&ones_p, &mut rng).unwrap();
        assert!(ones.as_slice().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn bernoulli_rejects_out_of_range() {
        let mut rng = Rng::with_seed(1);
        let p = Vector::from_vec(vec![0.5, 1.5]).unwrap();
        assert!(bernoulli_sample(&p, &mut rng).is_err());
    }

    #[test]
    fn bernoulli_sample_mean_tracks_probability() {
        let mut rng = Rng::with_seed(42);
        let p = Vector::from_vec(vec![0.3; 100_000]).unwrap();
        let sample = bernoulli_sample(&p, &mut rng).unwrap();
        let mean = sample.as_slice().iter().sum::<f64>() / sample.len() as f64;
        assert!((mean - 0.3).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn gaussian_init_zero_std_is_zero_matrix() {
        let mut rng = Rng::with_seed(9);
        let m = gaussian_init(4, 4, 0.0, &mut rng);
        assert!(m.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gaussian_init_sample_std() {
        let mut rng = Rng::with_seed(7);
        let m = gaussian_init(100, 100, 0.01, &mut rng);
        let n = m.data().len() as f64;
        let mean = m.data().iter().sum::<f64>() / n;
        let var = m.data().iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        assert!((std - 0.01).abs() < 0.002, "std {std}");
    }

    #[test]
    fn gaussian_init_same_seed_same_matrix() {
        let a = gaussian_init(5, 7, 0.3, &mut Rng::with_seed(11));
        let b = gaussian_init(5, 7, 0.3, &mut Rng::with_seed(11));
        assert_eq!(a, b);
    }

    #[test]
    fn rng_same_seed_same_stream() {
        let mut a = Rng::with_seed(123);
        let mut b = Rng::with_seed(123);
        for _ in 0..100 {
            assert_eq!(a.next_f64().to_bits(), b.next_f64().to_bits());
        }
        assert_eq!(a.next_below(17), b.next_below(17));
        assert_eq!(a.next_gaussian().to_bits(), b.next_gaussian().to_bits());
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut rng = Rng::with_seed(5);
        let mut items: Vec<usize> = (0..50).collect();
        rng.shuffle(&mut items);
        let mut sorted = items.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
        assert_ne!(items, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn mul_vec_and_tmul_vec_agree_with_matmul() {
        let mut rng = Rng::with_seed(2);
        let m = gaussian_init(4, 3, 1.0, &mut rng);
        let v = Vector::from_vec(vec![0.5, -1.0, 2.0]).unwrap();
        let direct = m.mul_vec(&v).unwrap();
        let via_matmul = m
            .matmul(&Matrix::from_vec(3, 1, v.as_slice().to_vec()).unwrap())
            .unwrap();
        for i in 0..4 {
            assert!((direct.get(i) - via_matmul.get(i, 0)).abs() < 1e-14);
        }
        let u = Vector::from_vec(vec![1.0, 0.0, -2.0, 0.5]).unwrap();
        let t = m.tmul_vec(&u).unwrap();
        for j in 0..3 {
            let mut expect = 0.0;
            for i in 0..4 {
                expect += m.get(i, j) * u.get(i);
            }
            assert!((t.get(j) - expect).abs() < 1e-14);
        }
    }

    proptest! {
        #[test]
        fn matmul_is_associative(
            a in proptest::collection::vec(-2.0f64..2.0, 6),
            b in proptest::collection::vec(-2.0f64..2.0, 6),
            c in proptest::collection::vec(-2.0f64..2.0, 6),
        ) {
            let a = Matrix::from_vec(2, 3, a).unwrap();
            let b = Matrix::from_vec(3, 2, b).unwrap();
            let c = Matrix::from_vec(2, 3, c).unwrap();
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            for (x, y) in left.data().iter().zip(right.data()) {
                prop_assert!((x - y).abs() < 1e-10);
            }
        }

        #[test]
        fn sigmoid_is_strictly_monotone(x in -30.0f64..30.0, delta in 1e-6f64..10.0) {
            prop_assert!(sigmoid(x) < sigmoid(x + delta));
        }

        #[test]
        fn sigmoid_reflection_sums_to_one(x in -40.0f64..40.0) {
            prop_assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-12);
        }
    }
}
