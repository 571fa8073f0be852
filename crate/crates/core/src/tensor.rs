//! Dense real tensors and the numerical kernels every other module builds on.
//!
//! A [`Tensor`] is a flat `Vec<f64>` in row-major order (last index fastest)
//! together with its shape. Values are immutable after construction; every
//! operation returns a fresh tensor. Scalars are real double precision
//! throughout the crate.
//!
//! Rank-2 kernels (SVD, inversion, condition estimates) are backed by
//! nalgebra; the test suite checks them against independent references
//! (a one-sided Jacobi SVD, multiply-back identities, naive loop
//! contractions).

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution as RandDistribution, Normal, Uniform};
use thiserror::Error;

use crate::seed;

/// Default condition-number cap for [`invert`]. Matrices estimated beyond
/// this are treated as members of the singular set and rejected loudly.
pub const DEFAULT_COND_CAP: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("shape {shape:?} with {got} data entries, expected {expected}")]
    DataLength {
        shape: Vec<usize>,
        expected: usize,
        got: usize,
    },
    #[error("shape {0:?} contains a zero extent")]
    ZeroExtent(Vec<usize>),
    #[error("non-finite entry at flat index {0}")]
    NonFinite(usize),
    #[error("axis {axis} out of bounds for rank {rank}")]
    AxisOutOfBounds { axis: usize, rank: usize },
    #[error("axis {axis} of {operand} paired more than once")]
    DuplicateAxis { operand: &'static str, axis: usize },
    #[error(
        "contraction axis pair ({axis_a}, {axis_b}) has mismatched extents {extent_a} vs {extent_b}"
    )]
    ContractionMismatch {
        axis_a: usize,
        axis_b: usize,
        extent_a: usize,
        extent_b: usize,
    },
    #[error("reshape from {from:?} ({from_len} entries) to {to:?} ({to_len} entries)")]
    ReshapeSize {
        from: Vec<usize>,
        from_len: usize,
        to: Vec<usize>,
        to_len: usize,
    },
    #[error("{0:?} is not a permutation of the tensor axes")]
    InvalidPermutation(Vec<usize>),
    #[error("expected a rank-2 tensor, got rank {0}")]
    NotRank2(usize),
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("singular matrix: condition estimate {cond:.3e} exceeds cap {cap:.3e}")]
    Singular { cond: f64, cap: f64 },
    #[error("SVD failed to converge")]
    SvdNoConvergence,
    #[error("invalid distribution parameter: {0}")]
    BadDistribution(String),
    #[error("shape mismatch {a:?} vs {b:?} in elementwise op")]
    ElementwiseMismatch { a: Vec<usize>, b: Vec<usize> },
    #[error("malformed tensor record: {0}")]
    Parse(String),
}

/// Dense real tensor, row-major, immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// Sampling distribution for [`random_tensor`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dist {
    Gaussian { mean: f64, stddev: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl Tensor {
    /// Build a tensor from a shape and row-major data, validating extents,
    /// length, and finiteness.
    pub fn from_vec(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, TensorError> {
        if shape.iter().any(|&e| e == 0) {
            return Err(TensorError::ZeroExtent(shape));
        }
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(TensorError::DataLength {
                shape,
                expected,
                got: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite(i));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn filled(shape: Vec<usize>, value: f64) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![value; n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self {
            shape: vec![n, n],
            data,
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self {
            shape: vec![],
            data: vec![v],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Entry at a multi-index. Panics on out-of-range indices; intended for
    /// small tensors and tests.
    pub fn get(&self, idx: &[usize]) -> f64 {
        assert_eq!(idx.len(), self.rank(), "index rank mismatch");
        let mut flat = 0;
        for (k, (&i, &e)) in idx.iter().zip(&self.shape).enumerate() {
            assert!(i < e, "index {i} out of range for axis {k} (extent {e})");
            flat = flat * e + i;
        }
        self.data[flat]
    }

    /// Matrix entry shorthand for rank-2 tensors.
    pub fn at2(&self, i: usize, j: usize) -> f64 {
        debug_assert_eq!(self.rank(), 2);
        self.data[i * self.shape[1] + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    fn zip_with(
        &self,
        other: &Tensor,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor, TensorError> {
        if self.shape != other.shape {
            return Err(TensorError::ElementwiseMismatch {
                a: self.shape.clone(),
                b: other.shape.clone(),
            });
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }
}

/// Contract `a` and `b` over the given `(axis-in-a, axis-in-b)` pairs.
///
/// The result carries the unpaired axes of `a` followed by the unpaired axes
/// of `b`, each in original order; entries are sums of products over the
/// paired indices. An empty `axes` list yields the outer product.
pub fn contract(a: &Tensor, b: &Tensor, axes: &[(usize, usize)]) -> Result<Tensor, TensorError> {
    for &(ia, ib) in axes {
        if ia >= a.rank() {
            return Err(TensorError::AxisOutOfBounds {
                axis: ia,
                rank: a.rank(),
            });
        }
        if ib >= b.rank() {
            return Err(TensorError::AxisOutOfBounds {
                axis: ib,
                rank: b.rank(),
            });
        }
        if a.shape[ia] != b.shape[ib] {
            return Err(TensorError::ContractionMismatch {
                axis_a: ia,
                axis_b: ib,
                extent_a: a.shape[ia],
                extent_b: b.shape[ib],
            });
        }
    }
    for (k, &(ia, _)) in axes.iter().enumerate() {
        if axes[..k].iter().any(|&(ja, _)| ja == ia) {
            return Err(TensorError::DuplicateAxis {
                operand: "a",
                axis: ia,
            });
        }
    }
    for (k, &(_, ib)) in axes.iter().enumerate() {
        if axes[..k].iter().any(|&(_, jb)| jb == ib) {
            return Err(TensorError::DuplicateAxis {
                operand: "b",
                axis: ib,
            });
        }
    }

    let a_contracted: Vec<usize> = axes.iter().map(|&(ia, _)| ia).collect();
    let b_contracted: Vec<usize> = axes.iter().map(|&(_, ib)| ib).collect();
    let a_free: Vec<usize> = (0..a.rank()).filter(|i| !a_contracted.contains(i)).collect();
    let b_free: Vec<usize> = (0..b.rank()).filter(|i| !b_contracted.contains(i)).collect();

    // Permute contracted axes to the back of `a` / front of `b`, then the
    // contraction is a single matrix product.
    let mut perm_a = a_free.clone();
    perm_a.extend(&a_contracted);
    let mut perm_b = b_contracted.clone();
    perm_b.extend(&b_free);

    let at = transpose(a, &perm_a)?;
    let bt = transpose(b, &perm_b)?;

    let m: usize = a_free.iter().map(|&i| a.shape[i]).product();
    let k: usize = a_contracted.iter().map(|&i| a.shape[i]).product();
    let n: usize = b_free.iter().map(|&i| b.shape[i]).product();

    let mut out = vec![0.0; m * n];
    let ad = &at.data;
    let bd = &bt.data;
    for i in 0..m {
        for l in 0..k {
            let av = ad[i * k + l];
            if av == 0.0 {
                continue;
            }
            let brow = &bd[l * n..(l + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }

    let mut shape: Vec<usize> = a_free.iter().map(|&i| a.shape[i]).collect();
    shape.extend(b_free.iter().map(|&i| b.shape[i]));
    Tensor::from_vec(shape, out)
}

/// Matrix product of two rank-2 tensors.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    if a.rank() != 2 {
        return Err(TensorError::NotRank2(a.rank()));
    }
    if b.rank() != 2 {
        return Err(TensorError::NotRank2(b.rank()));
    }
    contract(a, b, &[(1, 0)])
}

/// Reinterpret the flat data under a new shape of equal total size.
pub fn reshape(t: &Tensor, new_shape: &[usize]) -> Result<Tensor, TensorError> {
    if new_shape.iter().any(|&e| e == 0) {
        return Err(TensorError::ZeroExtent(new_shape.to_vec()));
    }
    let to_len: usize = new_shape.iter().product();
    if to_len != t.len() {
        return Err(TensorError::ReshapeSize {
            from: t.shape.clone(),
            from_len: t.len(),
            to: new_shape.to_vec(),
            to_len,
        });
    }
    Ok(Tensor {
        shape: new_shape.to_vec(),
        data: t.data.clone(),
    })
}

/// Reorder axes: output axis `k` is input axis `perm[k]`.
pub fn transpose(t: &Tensor, perm: &[usize]) -> Result<Tensor, TensorError> {
    let r = t.rank();
    if perm.len() != r {
        return Err(TensorError::InvalidPermutation(perm.to_vec()));
    }
    let mut seen = vec![false; r];
    for &p in perm {
        if p >= r || seen[p] {
            return Err(TensorError::InvalidPermutation(perm.to_vec()));
        }
        seen[p] = true;
    }
    if perm.iter().enumerate().all(|(i, &p)| i == p) {
        return Ok(t.clone());
    }

    let in_shape = &t.shape;
    let out_shape: Vec<usize> = perm.iter().map(|&p| in_shape[p]).collect();

    // in_strides[axis] in the input layout
    let mut in_strides = vec![1usize; r];
    for i in (0..r.saturating_sub(1)).rev() {
        in_strides[i] = in_strides[i + 1] * in_shape[i + 1];
    }
    // stride in the input for each output axis
    let strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();

    let mut out = vec![0.0; t.len()];
    let mut idx = vec![0usize; r];
    let mut src = 0usize;
    for slot in out.iter_mut() {
        *slot = t.data[src];
        // odometer increment over the output index, tracking src
        for axis in (0..r).rev() {
            idx[axis] += 1;
            src += strides[axis];
            if idx[axis] < out_shape[axis] {
                break;
            }
            src -= strides[axis] * out_shape[axis];
            idx[axis] = 0;
        }
    }
    Ok(Tensor {
        shape: out_shape,
        data: out,
    })
}

/// Sample a tensor with i.i.d. entries from `dist`, deterministic per seed.
pub fn random_tensor(shape: &[usize], dist: Dist, seed_value: u64) -> Result<Tensor, TensorError> {
    let mut rng = seed::rng(seed_value);
    random_tensor_with(shape, dist, &mut rng)
}

/// Like [`random_tensor`] but drawing from a caller-owned RNG stream.
pub fn random_tensor_with<R: Rng>(
    shape: &[usize],
    dist: Dist,
    rng: &mut R,
) -> Result<Tensor, TensorError> {
    if shape.iter().any(|&e| e == 0) {
        return Err(TensorError::ZeroExtent(shape.to_vec()));
    }
    let n: usize = shape.iter().product();
    let data: Vec<f64> = match dist {
        Dist::Gaussian { mean, stddev } => {
            if !(stddev > 0.0) || !stddev.is_finite() || !mean.is_finite() {
                return Err(TensorError::BadDistribution(format!(
                    "gaussian(mean={mean}, stddev={stddev})"
                )));
            }
            let normal = Normal::new(mean, stddev)
                .map_err(|e| TensorError::BadDistribution(e.to_string()))?;
            (0..n).map(|_| normal.sample(rng)).collect()
        }
        Dist::Uniform { lo, hi } => {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(TensorError::BadDistribution(format!("uniform({lo}, {hi})")));
            }
            let uniform =
                Uniform::new(lo, hi).map_err(|e| TensorError::BadDistribution(e.to_string()))?;
            (0..n).map(|_| uniform.sample(rng)).collect()
        }
    };
    Tensor::from_vec(shape.to_vec(), data)
}

fn to_dmatrix(t: &Tensor) -> Result<DMatrix<f64>, TensorError> {
    if t.rank() != 2 {
        return Err(TensorError::NotRank2(t.rank()));
    }
    Ok(DMatrix::from_row_slice(t.shape[0], t.shape[1], &t.data))
}

fn from_dmatrix(m: &DMatrix<f64>) -> Tensor {
    let (rows, cols) = m.shape();
    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            data.push(m[(i, j)]);
        }
    }
    Tensor {
        shape: vec![rows, cols],
        data,
    }
}

/// Thin SVD of a rank-2 tensor: `m = U · diag(S) · Vᵀ` with `S` nonincreasing
/// and nonnegative, `U` of shape `(rows, k)`, `V` of shape `(cols, k)`,
/// `k = min(rows, cols)`.
pub fn svd(m: &Tensor) -> Result<(Tensor, Vec<f64>, Tensor), TensorError> {
    let dm = to_dmatrix(m)?;
    let svd = dm
        .try_svd(true, true, f64::EPSILON, 10_000)
        .ok_or(TensorError::SvdNoConvergence)?;
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();

    // nalgebra returns descending order; enforce it anyway so the contract
    // does not depend on upstream behavior.
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].partial_cmp(&s[i]).unwrap());
    let sorted = order.iter().enumerate().all(|(k, &i)| k == i);
    let (u, vt) = if sorted {
        (u, vt)
    } else {
        s = order.iter().map(|&i| s[i]).collect();
        (u.select_columns(&order), vt.select_rows(&order))
    };
    if s.iter().any(|v| !v.is_finite()) {
        return Err(TensorError::SvdNoConvergence);
    }

    let ut = from_dmatrix(&u);
    let v = from_dmatrix(&vt.transpose());
    Ok((ut, s, v))
}

/// Condition estimate of a rank-2 tensor: ratio of extreme singular values.
pub fn condition_estimate(m: &Tensor) -> Result<f64, TensorError> {
    let (_, s, _) = svd(m)?;
    let smax = s.first().copied().unwrap_or(0.0);
    let smin = s.last().copied().unwrap_or(0.0);
    if smin == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(smax / smin)
}

/// Invert a square matrix, rejecting condition estimates beyond `cap`.
pub fn invert_with_cap(m: &Tensor, cap: f64) -> Result<Tensor, TensorError> {
    if m.rank() != 2 {
        return Err(TensorError::NotRank2(m.rank()));
    }
    let (rows, cols) = (m.shape[0], m.shape[1]);
    if rows != cols {
        return Err(TensorError::NotSquare { rows, cols });
    }
    let (u, s, v) = svd(m)?;
    let smax = s[0];
    let smin = s[s.len() - 1];
    let cond = if smin == 0.0 { f64::INFINITY } else { smax / smin };
    if !(cond < cap) {
        return Err(TensorError::Singular { cond, cap });
    }
    // inv = V diag(1/s) Uᵀ
    let n = rows;
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for (k, &sk) in s.iter().enumerate() {
                acc += v.at2(i, k) / sk * u.at2(j, k);
            }
            out[i * n + j] = acc;
        }
    }
    Tensor::from_vec(vec![n, n], out)
}

/// Invert with the default condition cap of `1e12`.
pub fn invert(m: &Tensor) -> Result<Tensor, TensorError> {
    invert_with_cap(m, DEFAULT_COND_CAP)
}

/// Serialize as a whitespace-separated text record: rank, shape, then data in
/// row-major order. `f64` values use shortest round-trip formatting, so the
/// record is bit-exact across platforms.
pub fn write_tensor(t: &Tensor, out: &mut String) {
    out.push_str(&t.rank().to_string());
    for e in &t.shape {
        out.push(' ');
        out.push_str(&e.to_string());
    }
    for v in &t.data {
        out.push(' ');
        out.push_str(&format_f64(*v));
    }
    out.push('\n');
}

/// Parse one tensor record from a token stream (see [`write_tensor`]).
pub fn read_tensor<'a, I: Iterator<Item = &'a str>>(tokens: &mut I) -> Result<Tensor, TensorError> {
    let rank: usize = next_token(tokens)?
        .parse()
        .map_err(|e| TensorError::Parse(format!("rank: {e}")))?;
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(
            next_token(tokens)?
                .parse()
                .map_err(|e| TensorError::Parse(format!("extent: {e}")))?,
        );
    }
    let n: usize = shape.iter().product();
    let mut data = Vec::with_capacity(n);
    for _ in 0..n {
        data.push(parse_f64(next_token(tokens)?)?);
    }
    Tensor::from_vec(shape, data)
}

fn next_token<'a, I: Iterator<Item = &'a str>>(tokens: &mut I) -> Result<&'a str, TensorError> {
    tokens
        .next()
        .ok_or_else(|| TensorError::Parse("unexpected end of record".into()))
}

/// Shortest round-trip decimal form of an `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v}")
}

pub fn parse_f64(s: &str) -> Result<f64, TensorError> {
    s.parse()
        .map_err(|e| TensorError::Parse(format!("float {s:?}: {e}")))
}
