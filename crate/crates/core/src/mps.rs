//! The MPS classifier: feature embedding, efficient forward evaluation, full
//! materialization, and gauge transformations.
//!
//! A model is an ordered chain of site tensors. Every site except one carries
//! a physical input leg of dimension `phys_dim`; the designated output site
//! carries the free output leg of dimension `out_dim` instead. Neighboring
//! sites share a bond index of dimension `bond_dim`. The function the model
//! computes is the contraction of all sites with the embedded inputs, leaving
//! the output leg free.
//!
//! Two parameter sets describe the same function whenever they are related by
//! a gauge transformation: inserting `Y · Y⁻¹` on a bond and absorbing the
//! factors into the neighboring sites changes every tensor but not the
//! materialized function. [`GaugeTransform`] implements exactly that move;
//! the `canonical` module removes the freedom again.

use rand::Rng;
use thiserror::Error;

use crate::seed;
use crate::tensor::{
    self, contract, invert, random_tensor_with, reshape, transpose, Dist, Tensor, TensorError,
};

/// Default entry cap for [`MpsModel::materialize`]: the materialized tensor is
/// an exponential object, kept to desk scale.
pub const DEFAULT_MATERIALIZE_CAP: usize = 1 << 20;

/// Attempt cap when resampling gauge matrices for a condition bound.
const GAUGE_RESAMPLE_LIMIT: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MpsError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("need at least 2 sites, got {0}")]
    TooFewSites(usize),
    #[error("output site {output_site} out of range for {n} sites")]
    OutputSiteRange { output_site: usize, n: usize },
    #[error("site {site} has shape {got:?}, expected {expected:?}")]
    SiteShape {
        site: usize,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("expected {expected} input vectors, got {got}")]
    InputLength { expected: usize, got: usize },
    #[error("input vector {index} has length {got}, expected {expected}")]
    InputDim {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("materialized size {size} exceeds cap {cap}")]
    MaterializeCap { size: usize, cap: usize },
    #[error("gauge transform has {got} bond matrices, expected {expected}")]
    BondCount { expected: usize, got: usize },
    #[error("bond matrix {bond} has shape {got:?}, expected {expected:?}")]
    BondShape {
        bond: usize,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("could not sample a bond matrix under condition cap {cap} at bond {bond}")]
    ResampleLimit { bond: usize, cap: f64 },
    #[error("embedding margin epsilon must lie in (0, 0.5), got {0}")]
    BadEpsilon(f64),
    #[error("continuous feature range [{lo}, {hi}] is empty")]
    BadRange { lo: f64, hi: f64 },
    #[error("feature {feature}: raw value {value} is not one of the declared binary values")]
    UnknownBinaryValue { feature: usize, value: f64 },
    #[error("embedding row has {got} values, expected {expected}")]
    EmbedArity { expected: usize, got: usize },
    #[error("parameter vector has length {got}, expected {expected}")]
    ParamLength { expected: usize, got: usize },
    #[error("malformed model record: {0}")]
    Parse(String),
}

/// An MPS classifier: `n` site tensors, one of which carries the output leg.
///
/// Site shapes (all indices 0-based):
/// - site `0`: `(d_0, b)`
/// - interior site `j`: `(b, d_j, b)`
/// - site `n-1`: `(b, d_{n-1})`
///
/// where `d_j` is `out_dim` at the output site and `phys_dim` elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct MpsModel {
    sites: Vec<Tensor>,
    output_site: usize,
    phys_dim: usize,
    bond_dim: usize,
    out_dim: usize,
}

impl MpsModel {
    pub fn new(
        sites: Vec<Tensor>,
        output_site: usize,
        phys_dim: usize,
        bond_dim: usize,
        out_dim: usize,
    ) -> Result<Self, MpsError> {
        let n = sites.len();
        if n < 2 {
            return Err(MpsError::TooFewSites(n));
        }
        if output_site >= n {
            return Err(MpsError::OutputSiteRange { output_site, n });
        }
        let model = Self {
            sites,
            output_site,
            phys_dim,
            bond_dim,
            out_dim,
        };
        for j in 0..n {
            let expected = model.expected_shape(j);
            if model.sites[j].shape() != expected.as_slice() {
                return Err(MpsError::SiteShape {
                    site: j,
                    expected,
                    got: model.sites[j].shape().to_vec(),
                });
            }
        }
        Ok(model)
    }

    fn expected_shape(&self, j: usize) -> Vec<usize> {
        let d = self.site_dim(j);
        let b = self.bond_dim;
        let n = self.len();
        if j == 0 {
            vec![d, b]
        } else if j == n - 1 {
            vec![b, d]
        } else {
            vec![b, d, b]
        }
    }

    /// Physical dimension of site `j` (`out_dim` at the output site).
    pub fn site_dim(&self, j: usize) -> usize {
        if j == self.output_site {
            self.out_dim
        } else {
            self.phys_dim
        }
    }

    /// Random model with an identity-biased core: each bond-diagonal entry
    /// starts at 1 and gaussian noise of the given spread is added on top, so
    /// chains of moderate length neither vanish nor explode when contracted.
    pub fn random(
        n_sites: usize,
        phys_dim: usize,
        bond_dim: usize,
        out_dim: usize,
        output_site: usize,
        noise: f64,
        seed_value: u64,
    ) -> Result<Self, MpsError> {
        let mut rng = seed::rng(seed_value);
        let dist = Dist::Gaussian {
            mean: 0.0,
            stddev: noise,
        };
        let mut sites = Vec::with_capacity(n_sites);
        for j in 0..n_sites {
            let d = if j == output_site { out_dim } else { phys_dim };
            let b = bond_dim;
            let t = if j == 0 {
                let mut noise_t = random_tensor_with(&[d, b], dist, &mut rng)?.into_data();
                for i in 0..d.min(b) {
                    noise_t[i * b + i] += 1.0;
                }
                Tensor::from_vec(vec![d, b], noise_t)?
            } else if j == n_sites - 1 {
                let mut noise_t = random_tensor_with(&[b, d], dist, &mut rng)?.into_data();
                for i in 0..b.min(d) {
                    noise_t[i * d + i] += 1.0;
                }
                Tensor::from_vec(vec![b, d], noise_t)?
            } else {
                let mut noise_t = random_tensor_with(&[b, d, b], dist, &mut rng)?.into_data();
                for s in 0..d {
                    for a in 0..b {
                        noise_t[a * d * b + s * b + a] += 1.0;
                    }
                }
                Tensor::from_vec(vec![b, d, b], noise_t)?
            };
            sites.push(t);
        }
        Self::new(sites, output_site, phys_dim, bond_dim, out_dim)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Tensor] {
        &self.sites
    }

    pub fn site(&self, j: usize) -> &Tensor {
        &self.sites[j]
    }

    pub fn output_site(&self) -> usize {
        self.output_site
    }

    pub fn phys_dim(&self) -> usize {
        self.phys_dim
    }

    pub fn bond_dim(&self) -> usize {
        self.bond_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn param_count(&self) -> usize {
        self.sites.iter().map(|t| t.len()).sum()
    }

    /// Number of input sites (= expected embedded-row length).
    pub fn input_len(&self) -> usize {
        self.len() - 1
    }

    /// Site `j` viewed as rank-3 `(left_bond, phys, right_bond)` with dummy
    /// extent-1 bonds at the chain ends.
    pub(crate) fn site_as_rank3(&self, j: usize) -> Tensor {
        let t = &self.sites[j];
        let n = self.len();
        if j == 0 {
            reshape(t, &[1, t.shape()[0], t.shape()[1]]).expect("dummy bond reshape")
        } else if j == n - 1 {
            reshape(t, &[t.shape()[0], t.shape()[1], 1]).expect("dummy bond reshape")
        } else {
            t.clone()
        }
    }

    /// Flatten all parameters site-major, row-major within each site.
    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for s in &self.sites {
            out.extend_from_slice(s.data());
        }
        out
    }

    /// Rebuild a model of this architecture from a flat parameter vector.
    pub fn from_flat(&self, params: &[f64]) -> Result<Self, MpsError> {
        if params.len() != self.param_count() {
            return Err(MpsError::ParamLength {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut sites = Vec::with_capacity(self.len());
        let mut offset = 0;
        for s in &self.sites {
            let next = offset + s.len();
            sites.push(Tensor::from_vec(
                s.shape().to_vec(),
                params[offset..next].to_vec(),
            )?);
            offset = next;
        }
        Self::new(
            sites,
            self.output_site,
            self.phys_dim,
            self.bond_dim,
            self.out_dim,
        )
    }

    /// Evaluate the model on one embedded row (one vector per input site, in
    /// site order, skipping the output site). Runs in `O(n · b² · d)` by
    /// carrying a boundary matrix left to right; the full tensor is never
    /// formed.
    pub fn forward(&self, inputs: &[Vec<f64>]) -> Result<Vec<f64>, MpsError> {
        if inputs.len() != self.input_len() {
            return Err(MpsError::InputLength {
                expected: self.input_len(),
                got: inputs.len(),
            });
        }
        let n = self.len();
        // boundary: `rows` x bond matrix; rows = 1 before the output site and
        // out_dim after it.
        let mut rows = 1usize;
        let mut boundary = vec![1.0_f64];
        let mut next_input = 0usize;

        for j in 0..n {
            let site = self.site_as_rank3(j);
            let (bl, d, br) = (site.shape()[0], site.shape()[1], site.shape()[2]);
            let data = site.data();
            if j == self.output_site {
                // boundary (rows x bl) -> (rows*out_dim x br); rows is 1 here.
                let mut out = vec![0.0; rows * d * br];
                for r in 0..rows {
                    for l in 0..d {
                        for bj in 0..br {
                            let mut acc = 0.0;
                            for al in 0..bl {
                                acc += boundary[r * bl + al] * data[al * d * br + l * br + bj];
                            }
                            out[(r * d + l) * br + bj] = acc;
                        }
                    }
                }
                rows *= d;
                boundary = out;
            } else {
                let v = &inputs[next_input];
                next_input += 1;
                if v.len() != d {
                    return Err(MpsError::InputDim {
                        index: next_input - 1,
                        expected: d,
                        got: v.len(),
                    });
                }
                // contract the physical leg first: (bl x br)
                let mut site_mat = vec![0.0; bl * br];
                for al in 0..bl {
                    for bj in 0..br {
                        let mut acc = 0.0;
                        for (s, &vs) in v.iter().enumerate() {
                            acc += vs * data[al * d * br + s * br + bj];
                        }
                        site_mat[al * br + bj] = acc;
                    }
                }
                let mut out = vec![0.0; rows * br];
                for r in 0..rows {
                    for bj in 0..br {
                        let mut acc = 0.0;
                        for al in 0..bl {
                            acc += boundary[r * bl + al] * site_mat[al * br + bj];
                        }
                        out[r * br + bj] = acc;
                    }
                }
                boundary = out;
            }
        }
        debug_assert_eq!(boundary.len(), rows);
        debug_assert_eq!(rows, self.out_dim);
        Ok(boundary)
    }

    /// Contract the whole chain into the full tensor of shape
    /// `(out_dim, d, ..., d)`: output leg first, then the input sites in site
    /// order. Exponential in the number of sites; guarded by `cap`.
    pub fn materialize_with_cap(&self, cap: usize) -> Result<Tensor, MpsError> {
        let size: usize = (0..self.len()).map(|j| self.site_dim(j)).product();
        if size > cap {
            return Err(MpsError::MaterializeCap { size, cap });
        }
        // chain contraction in site order: running shape (d_0, ..., d_j, b)
        let mut acc = reshape(
            &self.site_as_rank3(0),
            &[self.site_dim(0), self.bond_dim],
        )?;
        for j in 1..self.len() {
            let site = self.site_as_rank3(j);
            let last_axis = acc.rank() - 1;
            acc = contract(&acc, &site, &[(last_axis, 0)])?;
        }
        // drop the trailing dummy bond of extent 1
        let mut shape = acc.shape().to_vec();
        debug_assert_eq!(shape.pop(), Some(1));
        acc = reshape(&acc, &shape)?;
        // move the output leg to the front
        let mut perm = vec![self.output_site];
        perm.extend((0..self.len()).filter(|&j| j != self.output_site));
        Ok(transpose(&acc, &perm)?)
    }

    pub fn materialize(&self) -> Result<Tensor, MpsError> {
        self.materialize_with_cap(DEFAULT_MATERIALIZE_CAP)
    }

    /// Apply a gauge transformation: site 0 absorbs `Y_0`, site `j` becomes
    /// `Y_{j-1}⁻¹ · A_j · Y_j`, the last site absorbs `Y_{n-2}⁻¹`. The
    /// materialized tensor is unchanged; the parameters generally are not.
    pub fn apply_gauge(&self, g: &GaugeTransform) -> Result<Self, MpsError> {
        let n = self.len();
        if g.bonds.len() != n - 1 {
            return Err(MpsError::BondCount {
                expected: n - 1,
                got: g.bonds.len(),
            });
        }
        for (k, y) in g.bonds.iter().enumerate() {
            let want = [self.bond_dim, self.bond_dim];
            if y.shape() != want {
                return Err(MpsError::BondShape {
                    bond: k,
                    expected: want.to_vec(),
                    got: y.shape().to_vec(),
                });
            }
        }
        let mut sites = Vec::with_capacity(n);
        for j in 0..n {
            let mut t = self.site_as_rank3(j);
            if j > 0 {
                let y_inv = invert(&g.bonds[j - 1])?;
                t = contract(&y_inv, &t, &[(1, 0)])?;
            }
            if j < n - 1 {
                let last = t.rank() - 1;
                t = contract(&t, &g.bonds[j], &[(last, 0)])?;
            }
            let t = reshape(&t, &self.expected_shape(j))?;
            sites.push(t);
        }
        Self::new(
            sites,
            self.output_site,
            self.phys_dim,
            self.bond_dim,
            self.out_dim,
        )
    }
}

/// A sequence of invertible bond matrices, one per internal bond; bond `k`
/// sits between sites `k` and `k+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeTransform {
    bonds: Vec<Tensor>,
}

impl GaugeTransform {
    pub fn new(bonds: Vec<Tensor>) -> Self {
        Self { bonds }
    }

    pub fn identity(n_bonds: usize, bond_dim: usize) -> Self {
        Self {
            bonds: (0..n_bonds).map(|_| Tensor::identity(bond_dim)).collect(),
        }
    }

    pub fn bonds(&self) -> &[Tensor] {
        &self.bonds
    }

    /// Bond-wise inverse; `apply_gauge(apply_gauge(m, g), g.inverse())`
    /// recovers `m` up to round-off.
    pub fn inverse(&self) -> Result<Self, TensorError> {
        let bonds = self
            .bonds
            .iter()
            .map(invert)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { bonds })
    }
}

/// Sample a gauge with i.i.d. gaussian bond matrices, resampling each bond
/// until its condition estimate is below `cond_cap`.
pub fn random_gauge(
    m: &MpsModel,
    seed_value: u64,
    cond_cap: f64,
) -> Result<GaugeTransform, MpsError> {
    let mut rng = seed::rng(seed_value);
    let b = m.bond_dim();
    let mut bonds = Vec::with_capacity(m.len() - 1);
    for bond in 0..m.len() - 1 {
        let mut accepted = None;
        for _ in 0..GAUGE_RESAMPLE_LIMIT {
            let y = random_tensor_with(
                &[b, b],
                Dist::Gaussian {
                    mean: 0.0,
                    stddev: 1.0,
                },
                &mut rng,
            )?;
            if tensor::condition_estimate(&y)? < cond_cap {
                accepted = Some(y);
                break;
            }
        }
        match accepted {
            Some(y) => bonds.push(y),
            None => return Err(MpsError::ResampleLimit { bond, cap: cond_cap }),
        }
    }
    Ok(GaugeTransform { bonds })
}

/// Sample the residual gauge of the SVD canonical form: diagonal bond
/// matrices with uniform i.i.d. entries in `{-1, +1}`. Each such matrix is
/// its own inverse.
pub fn sign_gauge(m: &MpsModel, seed_value: u64) -> GaugeTransform {
    let mut rng = seed::rng(seed_value);
    let b = m.bond_dim();
    let bonds = (0..m.len() - 1)
        .map(|_| {
            let mut data = vec![0.0; b * b];
            for i in 0..b {
                data[i * b + i] = if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 };
            }
            Tensor::from_vec(vec![b, b], data).expect("diagonal sign matrix")
        })
        .collect();
    GaugeTransform { bonds }
}

/// Per-feature input encoding for the MPS.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureEncoding {
    /// Two-valued feature, noisily encoded: class 0 lands uniformly in
    /// `[0, 1/2 - eps)`, class 1 in `[1/2 + eps, 1)`. `values[c]` is the raw
    /// value representing class `c`.
    BinaryNoisy { values: [f64; 2] },
    /// Min-max normalized continuous feature; out-of-range values clamp to
    /// `[0, 1]` and are counted in the result.
    ContinuousMinMax { lo: f64, hi: f64 },
}

/// Maps raw feature rows to the 2-vectors `(1 - x, x)` the MPS consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    epsilon: f64,
    features: Vec<FeatureEncoding>,
}

/// An embedded row plus a clamp counter for out-of-range continuous values.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedRow {
    pub vectors: Vec<Vec<f64>>,
    pub clamped: usize,
}

/// Default noisy-encoding margin.
pub const DEFAULT_EPSILON: f64 = 5e-2;

impl FeatureMap {
    pub fn new(epsilon: f64, features: Vec<FeatureEncoding>) -> Result<Self, MpsError> {
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(MpsError::BadEpsilon(epsilon));
        }
        for f in &features {
            if let FeatureEncoding::ContinuousMinMax { lo, hi } = f {
                if !(lo < hi) {
                    return Err(MpsError::BadRange { lo: *lo, hi: *hi });
                }
            }
        }
        Ok(Self { epsilon, features })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn features(&self) -> &[FeatureEncoding] {
        &self.features
    }

    /// Embed one raw row, drawing encoding noise from `rng`.
    pub fn embed_with<R: Rng>(&self, row: &[f64], rng: &mut R) -> Result<EmbeddedRow, MpsError> {
        if row.len() != self.features.len() {
            return Err(MpsError::EmbedArity {
                expected: self.features.len(),
                got: row.len(),
            });
        }
        let mut vectors = Vec::with_capacity(row.len());
        let mut clamped = 0usize;
        for (i, (&raw, enc)) in row.iter().zip(&self.features).enumerate() {
            let x = match enc {
                FeatureEncoding::BinaryNoisy { values } => {
                    let class = if raw == values[0] {
                        0
                    } else if raw == values[1] {
                        1
                    } else {
                        return Err(MpsError::UnknownBinaryValue {
                            feature: i,
                            value: raw,
                        });
                    };
                    let u: f64 = rng.random();
                    let band = 0.5 - self.epsilon;
                    if class == 0 {
                        u * band
                    } else {
                        0.5 + self.epsilon + u * band
                    }
                }
                FeatureEncoding::ContinuousMinMax { lo, hi } => {
                    let x = (raw - lo) / (hi - lo);
                    if !(0.0..=1.0).contains(&x) {
                        clamped += 1;
                        x.clamp(0.0, 1.0)
                    } else {
                        x
                    }
                }
            };
            vectors.push(vec![1.0 - x, x]);
        }
        Ok(EmbeddedRow { vectors, clamped })
    }

    /// Embed one raw row deterministically from a seed.
    pub fn embed(&self, row: &[f64], seed_value: u64) -> Result<EmbeddedRow, MpsError> {
        let mut rng = seed::rng(seed_value);
        self.embed_with(row, &mut rng)
    }
}

/// Serialize a model: header line `mps <n> <d> <b> <out> <output_site>`,
/// then one tensor record per site (see `tensor::write_tensor`).
pub fn write_model(m: &MpsModel) -> String {
    let mut out = format!(
        "mps {} {} {} {} {}\n",
        m.len(),
        m.phys_dim(),
        m.bond_dim(),
        m.out_dim(),
        m.output_site()
    );
    for s in m.sites() {
        tensor::write_tensor(s, &mut out);
    }
    out
}

pub fn read_model(text: &str) -> Result<MpsModel, MpsError> {
    let mut tokens = text.split_whitespace();
    let magic = tokens
        .next()
        .ok_or_else(|| MpsError::Parse("empty model record".into()))?;
    if magic != "mps" {
        return Err(MpsError::Parse(format!("bad magic {magic:?}")));
    }
    let mut header = [0usize; 5];
    for (k, name) in ["site count", "phys dim", "bond dim", "out dim", "output site"]
        .iter()
        .enumerate()
    {
        header[k] = tokens
            .next()
            .ok_or_else(|| MpsError::Parse(format!("missing {name}")))?
            .parse()
            .map_err(|e| MpsError::Parse(format!("{name}: {e}")))?;
    }
    let [n, d, b, out_dim, output_site] = header;
    let mut sites = Vec::with_capacity(n);
    for _ in 0..n {
        sites.push(tensor::read_tensor(&mut tokens)?);
    }
    MpsModel::new(sites, output_site, d, b, out_dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_arch(seed_value: u64) -> MpsModel {
        MpsModel::random(6, 2, 2, 2, 5, 0.5, seed_value).unwrap()
    }

    fn rand_inputs(m: &MpsModel, seed_value: u64) -> Vec<Vec<f64>> {
        let mut rng = seed::rng(seed_value);
        (0..m.input_len())
            .map(|_| {
                (0..m.phys_dim())
                    .map(|_| rng.random::<f64>() * 2.0 - 1.0)
                    .collect()
            })
            .collect()
    }

    /// Brute-force evaluation through the materialized tensor.
    fn forward_via_materialize(m: &MpsModel, inputs: &[Vec<f64>]) -> Vec<f64> {
        let full = m.materialize().unwrap();
        let n_inputs = m.input_len();
        let d = m.phys_dim();
        let mut logits = vec![0.0; m.out_dim()];
        let mut idx = vec![0usize; n_inputs];
        loop {
            let mut w = 1.0;
            for (k, &i) in idx.iter().enumerate() {
                w *= inputs[k][i];
            }
            for (l, logit) in logits.iter_mut().enumerate() {
                let mut full_idx = Vec::with_capacity(n_inputs + 1);
                full_idx.push(l);
                full_idx.extend(idx.iter().copied());
                *logit += w * full.get(&full_idx);
            }
            // odometer
            let mut axis = n_inputs;
            loop {
                if axis == 0 {
                    return logits;
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < d {
                    break;
                }
                idx[axis] = 0;
            }
        }
    }

    #[test]
    fn paper_architecture_has_40_parameters() {
        assert_eq!(paper_arch(1).param_count(), 40);
    }

    #[test]
    fn smallest_chain_matches_hand_contraction() {
        // two sites: input site then output site
        let m = MpsModel::random(2, 2, 2, 2, 1, 0.5, 3).unwrap();
        let x = vec![vec![0.3, 0.7]];
        let got = m.forward(&x).unwrap();
        // by hand: v = psi^T A_0; logits_l = sum_b v_b A_1(b, l)
        let a0 = m.site(0);
        let a1 = m.site(1);
        let mut v = [0.0; 2];
        for b in 0..2 {
            v[b] = x[0][0] * a0.at2(0, b) + x[0][1] * a0.at2(1, b);
        }
        for l in 0..2 {
            let want = v[0] * a1.at2(0, l) + v[1] * a1.at2(1, l);
            assert!((got[l] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn forward_matches_materialize_oracle() {
        for seed_value in 0..10 {
            let m = MpsModel::random(4, 2, 2, 2, 3, 0.5, seed_value).unwrap();
            let x = rand_inputs(&m, 100 + seed_value);
            let fast = m.forward(&x).unwrap();
            let slow = forward_via_materialize(&m, &x);
            for (a, b) in fast.iter().zip(&slow) {
                let scale = 1.0 + a.abs().max(b.abs());
                assert!((a - b).abs() / scale < 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn forward_with_interior_output_site() {
        let m = MpsModel::random(5, 2, 2, 2, 2, 0.5, 9).unwrap();
        let x = rand_inputs(&m, 10);
        let fast = m.forward(&x).unwrap();
        let slow = forward_via_materialize(&m, &x);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn zero_inputs_give_zero_logits() {
        let m = paper_arch(4);
        let x: Vec<Vec<f64>> = (0..m.input_len()).map(|_| vec![0.0, 0.0]).collect();
        let got = m.forward(&x).unwrap();
        assert!(got.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_is_multilinear_per_site() {
        let m = paper_arch(5);
        let base = rand_inputs(&m, 11);
        let v = vec![0.2, -0.4];
        let w = vec![1.3, 0.5];
        let a = 0.77;
        for k in 0..m.input_len() {
            let mut combo = base.clone();
            combo[k] = v.iter().zip(&w).map(|(x, y)| a * x + y).collect();
            let lhs = m.forward(&combo).unwrap();
            let mut xv = base.clone();
            xv[k] = v.clone();
            let mut xw = base.clone();
            xw[k] = w.clone();
            let fv = m.forward(&xv).unwrap();
            let fw = m.forward(&xw).unwrap();
            for i in 0..lhs.len() {
                assert!((lhs[i] - (a * fv[i] + fw[i])).abs() < 1e-10 * (1.0 + lhs[i].abs()));
            }
        }
    }

    #[test]
    fn materialize_two_site_is_matrix_product() {
        let m = MpsModel::random(2, 2, 2, 2, 1, 0.5, 6).unwrap();
        let full = m.materialize().unwrap();
        assert_eq!(full.shape(), &[2, 2]); // (out, s_0)
        let a0 = m.site(0);
        let a1 = m.site(1);
        for l in 0..2 {
            for s in 0..2 {
                let mut want = 0.0;
                for b in 0..2 {
                    want += a0.at2(s, b) * a1.at2(b, l);
                }
                assert!((full.at2(l, s) - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn materialize_matches_loop_oracle_n3() {
        let m = MpsModel::random(3, 2, 2, 2, 2, 0.5, 8).unwrap();
        let full = m.materialize().unwrap();
        assert_eq!(full.shape(), &[2, 2, 2]); // (out, s_0, s_1)
        let (a0, a1, a2) = (m.site(0), m.site(1), m.site(2));
        for l in 0..2 {
            for s0 in 0..2 {
                for s1 in 0..2 {
                    let mut want = 0.0;
                    for al in 0..2 {
                        for ar in 0..2 {
                            want += a0.at2(s0, al) * a1.get(&[al, s1, ar]) * a2.at2(ar, l);
                        }
                    }
                    assert!((full.get(&[l, s0, s1]) - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn materialize_cap_is_enforced() {
        let m = paper_arch(2);
        assert!(matches!(
            m.materialize_with_cap(8),
            Err(MpsError::MaterializeCap { .. })
        ));
    }

    #[test]
    fn identity_gauge_is_a_no_op() {
        let m = paper_arch(12);
        let g = GaugeTransform::identity(m.len() - 1, m.bond_dim());
        let gm = m.apply_gauge(&g).unwrap();
        for (a, b) in m.sites().iter().zip(gm.sites()) {
            assert!(a.sub(b).unwrap().max_abs() < 1e-12);
        }
    }

    #[test]
    fn gauge_preserves_materialization_and_changes_params() {
        let m = paper_arch(13);
        let before = m.materialize().unwrap();
        // single non-trivial diagonal bond matrix
        let mut bonds = vec![Tensor::identity(2); m.len() - 1];
        bonds[2] = Tensor::from_vec(vec![2, 2], vec![2.0, 0.0, 0.0, 0.5]).unwrap();
        let g = GaugeTransform::new(bonds);
        let gm = m.apply_gauge(&g).unwrap();
        let after = gm.materialize().unwrap();
        let scale = 1.0 + before.max_abs();
        assert!(after.sub(&before).unwrap().max_abs() / scale < 1e-10);
        let delta: f64 = m
            .flatten_params()
            .iter()
            .zip(gm.flatten_params())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(delta > 1e-6, "site tensors should change");
    }

    #[test]
    fn gauge_composition_with_inverse_restores_model() {
        let m = paper_arch(14);
        let g = random_gauge(&m, 99, 1e3).unwrap();
        let back = m
            .apply_gauge(&g)
            .unwrap()
            .apply_gauge(&g.inverse().unwrap())
            .unwrap();
        for (a, b) in m.sites().iter().zip(back.sites()) {
            assert!(a.sub(b).unwrap().max_abs() < 1e-8);
        }
    }

    #[test]
    fn random_gauge_is_deterministic_and_well_conditioned() {
        let m = paper_arch(15);
        let g1 = random_gauge(&m, 5, 1e3).unwrap();
        let g2 = random_gauge(&m, 5, 1e3).unwrap();
        assert_eq!(g1, g2);
        for y in g1.bonds() {
            assert!(invert(y).is_ok());
            assert!(tensor::condition_estimate(y).unwrap() < 1e3);
        }
    }

    #[test]
    fn many_gauges_one_materialization() {
        let m = MpsModel::random(4, 2, 2, 2, 3, 0.5, 21).unwrap();
        let reference = m.materialize().unwrap();
        let mut seen_params: Vec<Vec<f64>> = Vec::new();
        for k in 0..100 {
            let g = random_gauge(&m, 1000 + k, 1e3).unwrap();
            let gm = m.apply_gauge(&g).unwrap();
            let mat = gm.materialize().unwrap();
            let scale = 1.0 + reference.max_abs();
            assert!(mat.sub(&reference).unwrap().max_abs() / scale < 1e-9);
            let params = gm.flatten_params();
            for p in &seen_params {
                let diff: f64 = p
                    .iter()
                    .zip(&params)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                assert!(diff > 1e-9, "two gauges produced identical parameters");
            }
            seen_params.push(params);
        }
    }

    #[test]
    fn sign_gauge_entries_and_involution() {
        let m = paper_arch(16);
        let g = sign_gauge(&m, 31);
        for y in g.bonds() {
            for i in 0..2 {
                for j in 0..2 {
                    let v = y.at2(i, j);
                    if i == j {
                        assert!(v == 1.0 || v == -1.0);
                    } else {
                        assert_eq!(v, 0.0);
                    }
                }
            }
            let sq = tensor::matmul(y, y).unwrap();
            assert!(sq.sub(&Tensor::identity(2)).unwrap().max_abs() == 0.0);
        }
        let before = m.materialize().unwrap();
        let after = m.apply_gauge(&g).unwrap().materialize().unwrap();
        let scale = 1.0 + before.max_abs();
        assert!(after.sub(&before).unwrap().max_abs() / scale < 1e-10);
    }

    #[test]
    fn embed_bands_and_determinism() {
        let fm = FeatureMap::new(
            0.05,
            vec![
                FeatureEncoding::BinaryNoisy { values: [0.0, 1.0] },
                FeatureEncoding::ContinuousMinMax { lo: 10.0, hi: 20.0 },
            ],
        )
        .unwrap();
        let row = [0.0, 10.0];
        let a = fm.embed(&row, 7).unwrap();
        let b = fm.embed(&row, 7).unwrap();
        assert_eq!(a, b);
        // binary class 0 band
        let x = a.vectors[0][1];
        assert!((0.0..=0.45).contains(&x));
        assert!((a.vectors[0][0] - (1.0 - x)).abs() < 1e-15);
        // continuous at lo -> (1, 0)
        assert_eq!(a.vectors[1], vec![1.0, 0.0]);
        assert_eq!(a.clamped, 0);
    }

    #[test]
    fn embed_class_one_band_census() {
        let fm = FeatureMap::new(
            0.05,
            vec![FeatureEncoding::BinaryNoisy { values: [0.0, 1.0] }],
        )
        .unwrap();
        let mut rng = seed::rng(42);
        for _ in 0..10_000 {
            let e = fm.embed_with(&[1.0], &mut rng).unwrap();
            assert!(e.vectors[0][1] >= 0.55);
        }
    }

    #[test]
    fn embed_clamps_out_of_range_continuous() {
        let fm = FeatureMap::new(
            0.05,
            vec![FeatureEncoding::ContinuousMinMax { lo: 0.0, hi: 1.0 }],
        )
        .unwrap();
        let e = fm.embed(&[1.5], 3).unwrap();
        assert_eq!(e.clamped, 1);
        assert_eq!(e.vectors[0], vec![0.0, 1.0]);
    }

    #[test]
    fn embed_rejects_unknown_binary_value() {
        let fm = FeatureMap::new(
            0.05,
            vec![FeatureEncoding::BinaryNoisy { values: [0.0, 1.0] }],
        )
        .unwrap();
        assert!(matches!(
            fm.embed(&[0.5], 3),
            Err(MpsError::UnknownBinaryValue { .. })
        ));
    }

    #[test]
    fn model_file_round_trip() {
        let m = paper_arch(44);
        let text = write_model(&m);
        let back = read_model(&text).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn flatten_round_trip_and_length() {
        let m = paper_arch(45);
        let flat = m.flatten_params();
        assert_eq!(flat.len(), 40);
        let back = m.from_flat(&flat).unwrap();
        assert_eq!(m, back);
    }
}
