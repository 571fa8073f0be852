//! Datasets: schema-carrying row tables, the toy leak demonstrator, a
//! correlation-calibrated synthetic surrogate of the medical-records data,
//! imbalance sampling, and CSV ingestion.
//!
//! The surrogate generator replaces the original (non-redistributable)
//! medical database. It draws correlated gaussians through a gaussian
//! copula, thresholds the binary columns at the quantiles matching their
//! requested marginals, and maps the age column through the normal CDF onto
//! a bounded range. Discretization attenuates correlations, so the latent
//! correlation matrix is calibrated by a fixed-point iteration until the
//! empirical Pearson matrix of the *encoded* columns matches the targets.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution as RandDistribution, Normal as RandNormal};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::mps::{FeatureEncoding, FeatureMap, MpsError};
use crate::seed::{self, child_seed};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("dataset must declare exactly one label feature, found {0}")]
    LabelCount(usize),
    #[error("row {row} has {got} values, expected {expected}")]
    ArityMismatch {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("row {row}, feature {feature}: value {value} not in the binary dictionary")]
    BadBinaryValue {
        row: usize,
        feature: String,
        value: f64,
    },
    #[error("unknown feature {0}")]
    UnknownFeature(String),
    #[error("feature {0} is not binary")]
    NotBinary(String),
    #[error("need {needed} rows with value {value}, only {available} available")]
    InsufficientRows {
        needed: usize,
        available: usize,
        value: f64,
    },
    #[error("majority fraction must lie in [0.5, 1], got {0}")]
    BadFraction(f64),
    #[error("correlation target invalid: {0}")]
    BadTarget(String),
    #[error("csv header mismatch: expected {expected:?}, got {got:?}")]
    HeaderMismatch { expected: String, got: String },
    #[error("csv line {line}: {detail}")]
    MalformedRow { line: usize, detail: String },
    #[error("csv line {line}, column {column}: unknown category {value:?}")]
    UnknownCategory {
        line: usize,
        column: String,
        value: String,
    },
    #[error(transparent)]
    Mps(#[from] MpsError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureKind {
    /// Two-valued feature; `values[c]` is the raw value of class `c`.
    Binary { values: [f64; 2] },
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureRole {
    Relevant,
    Irrelevant,
    Label,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDesc {
    pub name: String,
    pub kind: FeatureKind,
    pub role: FeatureRole,
}

impl FeatureDesc {
    pub fn new(name: &str, kind: FeatureKind, role: FeatureRole) -> Self {
        Self {
            name: name.to_string(),
            kind,
            role,
        }
    }
}

/// An immutable row table with a typed schema; exactly one feature carries
/// the label role.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Vec<FeatureDesc>,
    rows: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(schema: Vec<FeatureDesc>, rows: Vec<Vec<f64>>) -> Result<Self, DataError> {
        let labels = schema
            .iter()
            .filter(|f| f.role == FeatureRole::Label)
            .count();
        if labels != 1 {
            return Err(DataError::LabelCount(labels));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(DataError::ArityMismatch {
                    row: i,
                    expected: schema.len(),
                    got: row.len(),
                });
            }
            for (f, &v) in schema.iter().zip(row) {
                if let FeatureKind::Binary { values } = f.kind {
                    if v != values[0] && v != values[1] {
                        return Err(DataError::BadBinaryValue {
                            row: i,
                            feature: f.name.clone(),
                            value: v,
                        });
                    }
                }
            }
        }
        Ok(Self { schema, rows })
    }

    pub fn schema(&self) -> &[FeatureDesc] {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn feature_index(&self, name: &str) -> Result<usize, DataError> {
        self.schema
            .iter()
            .position(|f| f.name == name)
            .ok_or_else(|| DataError::UnknownFeature(name.to_string()))
    }

    pub fn label_index(&self) -> usize {
        self.schema
            .iter()
            .position(|f| f.role == FeatureRole::Label)
            .expect("validated on construction")
    }

    /// Column indices of the non-label features, in schema order.
    pub fn input_indices(&self) -> Vec<usize> {
        (0..self.schema.len())
            .filter(|&i| self.schema[i].role != FeatureRole::Label)
            .collect()
    }

    /// Class index (0 or 1) of the label in a row.
    pub fn label_class(&self, row: &[f64]) -> usize {
        let li = self.label_index();
        match &self.schema[li].kind {
            FeatureKind::Binary { values } => {
                if row[li] == values[1] {
                    1
                } else {
                    0
                }
            }
            FeatureKind::Continuous => panic!("continuous labels are not supported"),
        }
    }

    /// Non-label values of a row, in schema order.
    pub fn input_row(&self, row: &[f64]) -> Vec<f64> {
        self.input_indices().iter().map(|&i| row[i]).collect()
    }

    /// New dataset holding the given rows (by index, in order).
    pub fn take_rows(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }
}

/// Symmetric matrix of target Pearson coefficients over schema features.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTarget {
    names: Vec<String>,
    /// Row-major `k x k`.
    matrix: Vec<f64>,
}

impl CorrelationTarget {
    pub fn new(names: Vec<String>, matrix: Vec<f64>) -> Result<Self, DataError> {
        let k = names.len();
        if matrix.len() != k * k {
            return Err(DataError::BadTarget(format!(
                "matrix has {} entries for {k} features",
                matrix.len()
            )));
        }
        let t = Self { names, matrix };
        t.validate()?;
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.dim() + j]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    fn validate(&self) -> Result<(), DataError> {
        let k = self.dim();
        for i in 0..k {
            if (self.get(i, i) - 1.0).abs() > 1e-12 {
                return Err(DataError::BadTarget(format!("diagonal entry {i} is not 1")));
            }
            for j in 0..k {
                let v = self.get(i, j);
                if !(-1.0..=1.0).contains(&v) {
                    return Err(DataError::BadTarget(format!("entry ({i},{j}) = {v}")));
                }
                if (v - self.get(j, i)).abs() > 1e-12 {
                    return Err(DataError::BadTarget(format!("asymmetry at ({i},{j})")));
                }
            }
        }
        let m = DMatrix::from_row_slice(k, k, &self.matrix);
        let eig = m.symmetric_eigenvalues();
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -1e-9 {
            return Err(DataError::BadTarget(format!(
                "not positive semidefinite (min eigenvalue {min:.3e})"
            )));
        }
        Ok(())
    }
}

/// Surrogate column names, in order: the irrelevant date-parity bit, country,
/// age, gender, symptom status, and the recovery outcome (the label).
pub const SURROGATE_COLUMNS: [&str; 6] = [
    "parity", "country", "age", "gender", "symptoms", "recovery",
];

/// Pearson calibration targets for the six-column medical-records surrogate.
/// Upper triangle as measured on the encoded source columns; the dominant
/// structure is the strong negative age-recovery coefficient.
pub fn surrogate_target() -> CorrelationTarget {
    let names: Vec<String> = SURROGATE_COLUMNS.iter().map(|s| s.to_string()).collect();
    let upper: [(usize, usize, f64); 15] = [
        (0, 1, 0.005),
        (0, 2, 0.001),
        (0, 3, 0.001),
        (0, 4, -0.012),
        (0, 5, -0.002),
        (1, 2, 0.059),
        (1, 3, 0.033),
        (1, 4, 0.161),
        (1, 5, -0.055),
        (2, 3, -0.010),
        (2, 4, 0.128),
        (2, 5, -0.707),
        (3, 4, 0.004),
        (3, 5, 0.078),
        (4, 5, -0.143),
    ];
    let k = names.len();
    let mut m = vec![0.0; k * k];
    for i in 0..k {
        m[i * k + i] = 1.0;
    }
    for &(i, j, v) in &upper {
        m[i * k + j] = v;
        m[j * k + i] = v;
    }
    CorrelationTarget::new(names, m).expect("checked-in targets are valid")
}

/// Age range the surrogate maps its continuous column onto.
pub const SURROGATE_AGE_RANGE: (f64, f64) = (0.0, 90.0);

/// Generate the two-feature toy dataset: `x_rel ~ N(0,1)`, `x_irr` constant
/// at `majority_sign` (+1 or -1), label = 1 iff `x_rel > 0`.
pub fn gen_toy(n: usize, majority_sign: f64, seed_value: u64) -> Dataset {
    assert!(n >= 1, "need at least one row");
    assert!(
        majority_sign == 1.0 || majority_sign == -1.0,
        "majority sign must be +1 or -1"
    );
    let schema = vec![
        FeatureDesc::new("x_rel", FeatureKind::Continuous, FeatureRole::Relevant),
        FeatureDesc::new(
            "x_irr",
            FeatureKind::Binary { values: [-1.0, 1.0] },
            FeatureRole::Irrelevant,
        ),
        FeatureDesc::new(
            "label",
            FeatureKind::Binary { values: [0.0, 1.0] },
            FeatureRole::Label,
        ),
    ];
    let mut rng = seed::rng(seed_value);
    let normal = RandNormal::new(0.0, 1.0).expect("unit normal");
    let rows = (0..n)
        .map(|_| {
            let x: f64 = normal.sample(&mut rng);
            let label = if x > 0.0 { 1.0 } else { 0.0 };
            vec![x, majority_sign, label]
        })
        .collect();
    Dataset::new(schema, rows).expect("generator respects its schema")
}

fn surrogate_schema() -> Vec<FeatureDesc> {
    vec![
        FeatureDesc::new(
            "parity",
            FeatureKind::Binary { values: [0.0, 1.0] },
            FeatureRole::Irrelevant,
        ),
        FeatureDesc::new(
            "country",
            FeatureKind::Binary { values: [0.0, 1.0] },
            FeatureRole::Relevant,
        ),
        FeatureDesc::new("age", FeatureKind::Continuous, FeatureRole::Relevant),
        FeatureDesc::new(
            "gender",
            FeatureKind::Binary { values: [0.0, 1.0] },
            FeatureRole::Relevant,
        ),
        FeatureDesc::new(
            "symptoms",
            FeatureKind::Binary { values: [0.0, 1.0] },
            FeatureRole::Relevant,
        ),
        FeatureDesc::new(
            "recovery",
            FeatureKind::Binary { values: [0.0, 1.0] },
            FeatureRole::Label,
        ),
    ]
}

/// Project a symmetric matrix to the nearest well-posed correlation matrix:
/// clip eigenvalues away from zero, rebuild, renormalize the diagonal.
fn fix_correlation(m: &mut DMatrix<f64>) {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v < 1e-6 {
            *v = 1e-6;
        }
    }
    let rebuilt =
        &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    let k = rebuilt.nrows();
    let mut out = rebuilt;
    let d: Vec<f64> = (0..k).map(|i| out[(i, i)].sqrt()).collect();
    for i in 0..k {
        for j in 0..k {
            out[(i, j)] /= d[i] * d[j];
        }
    }
    *m = out;
}

struct CopulaSampler {
    chol: DMatrix<f64>,
    thresholds: Vec<Option<f64>>,
    age_range: (f64, f64),
    normal: Normal,
}

impl CopulaSampler {
    fn new(latent: &DMatrix<f64>, marginals: &[Option<f64>]) -> Self {
        let mut m = latent.clone();
        let chol = loop {
            match nalgebra::Cholesky::new(m.clone()) {
                Some(c) => break c.l(),
                None => {
                    fix_correlation(&mut m);
                    m += DMatrix::identity(m.nrows(), m.ncols()) * 1e-8;
                }
            }
        };
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        // threshold so that P(value 1) = q: z > inverse_cdf(1 - q)
        let thresholds = marginals
            .iter()
            .map(|q| q.map(|q| normal.inverse_cdf((1.0 - q).clamp(1e-12, 1.0 - 1e-12))))
            .collect();
        Self {
            chol,
            thresholds,
            age_range: SURROGATE_AGE_RANGE,
            normal,
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R, out: &mut Vec<Vec<f64>>, n: usize) {
        let k = self.chol.nrows();
        let unit = RandNormal::new(0.0, 1.0).expect("unit normal");
        for _ in 0..n {
            let raw = DVector::from_iterator(k, (0..k).map(|_| unit.sample(rng)));
            let z = &self.chol * raw;
            let mut row = Vec::with_capacity(k);
            for i in 0..k {
                match self.thresholds[i] {
                    Some(t) => row.push(if z[i] > t { 1.0 } else { 0.0 }),
                    None => {
                        let (lo, hi) = self.age_range;
                        row.push(lo + (hi - lo) * self.normal.cdf(z[i]));
                    }
                }
            }
            out.push(row);
        }
    }
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

/// Empirical Pearson matrix over all columns of a dataset, row-major `k x k`.
pub fn empirical_pearson(d: &Dataset) -> Vec<f64> {
    let k = d.schema().len();
    let cols: Vec<Vec<f64>> = (0..k)
        .map(|i| d.rows().iter().map(|r| r[i]).collect())
        .collect();
    let mut out = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            out[i * k + j] = if i == j {
                1.0
            } else {
                pearson(&cols[i], &cols[j])
            };
        }
    }
    out
}

/// Calibration sample size and iteration budget for the copula fixed point.
const CALIBRATION_ROWS: usize = 20_000;
const CALIBRATION_ROUNDS: usize = 20;
const CALIBRATION_TOL: f64 = 0.02;

/// Generate the six-column surrogate dataset.
///
/// `irrelevant_majority` picks which parity class is in the majority and `p`
/// its fraction; all other binary columns are balanced. The empirical
/// Pearson matrix of the output tracks `targets` to within a few hundredths
/// at 2e4 rows.
pub fn gen_surrogate(
    n: usize,
    irrelevant_majority: usize,
    p: f64,
    targets: &CorrelationTarget,
    seed_value: u64,
) -> Result<Dataset, DataError> {
    if !(0.5..=1.0).contains(&p) {
        return Err(DataError::BadFraction(p));
    }
    targets.validate()?;
    let k = targets.dim();
    if k != SURROGATE_COLUMNS.len() {
        return Err(DataError::BadTarget(format!(
            "surrogate needs {} columns, targets have {k}",
            SURROGATE_COLUMNS.len()
        )));
    }
    let schema = surrogate_schema();
    // P(value 1) per column; the continuous age column has none.
    let q_parity = if irrelevant_majority == 1 { p } else { 1.0 - p };
    let marginals: Vec<Option<f64>> = vec![
        Some(q_parity),
        Some(0.5),
        None,
        Some(0.5),
        Some(0.5),
        Some(0.5),
    ];

    // Fixed-point calibration of the latent correlation matrix: thresholding
    // attenuates Pearson coefficients, so nudge the latent entries by the
    // residual until the encoded sample matches the targets.
    let mut latent = DMatrix::from_row_slice(k, k, targets.matrix());
    fix_correlation(&mut latent);
    let mut cal_rng = seed::rng(child_seed(seed_value, &[seed::domain::DATA, 1]));
    for _round in 0..CALIBRATION_ROUNDS {
        let sampler = CopulaSampler::new(&latent, &marginals);
        let mut rows = Vec::with_capacity(CALIBRATION_ROWS);
        sampler.draw(&mut cal_rng, &mut rows, CALIBRATION_ROWS);
        let sample = Dataset {
            schema: schema.clone(),
            rows,
        };
        let emp = empirical_pearson(&sample);
        let mut worst = 0.0_f64;
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    worst = worst.max((targets.get(i, j) - emp[i * k + j]).abs());
                }
            }
        }
        if worst <= CALIBRATION_TOL {
            break;
        }
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    let adj = latent[(i, j)] + (targets.get(i, j) - emp[i * k + j]);
                    latent[(i, j)] = adj.clamp(-0.995, 0.995);
                }
            }
        }
        // re-symmetrize and keep it a correlation matrix
        let sym = (latent.clone() + latent.transpose()) * 0.5;
        latent = sym;
        fix_correlation(&mut latent);
    }

    let sampler = CopulaSampler::new(&latent, &marginals);
    let mut rng = seed::rng(child_seed(seed_value, &[seed::domain::DATA, 2]));
    let mut rows = Vec::with_capacity(n);
    sampler.draw(&mut rng, &mut rows, n);
    Dataset::new(schema, rows)
}

/// Draw `n` rows without replacement so that exactly `round(p * n)` carry
/// `majority_value` in the named binary feature, the rest the other value.
pub fn sample_biased(
    d: &Dataset,
    feature: &str,
    majority_value: f64,
    p: f64,
    n: usize,
    seed_value: u64,
) -> Result<Dataset, DataError> {
    if !(0.5..=1.0).contains(&p) {
        return Err(DataError::BadFraction(p));
    }
    let fi = d.feature_index(feature)?;
    let values = match &d.schema()[fi].kind {
        FeatureKind::Binary { values } => *values,
        FeatureKind::Continuous => return Err(DataError::NotBinary(feature.to_string())),
    };
    let minority_value = if majority_value == values[0] {
        values[1]
    } else {
        values[0]
    };
    let majority_idx: Vec<usize> = (0..d.len())
        .filter(|&i| d.rows()[i][fi] == majority_value)
        .collect();
    let minority_idx: Vec<usize> = (0..d.len())
        .filter(|&i| d.rows()[i][fi] == minority_value)
        .collect();

    let n_major = (p * n as f64).round() as usize;
    let n_minor = n - n_major;
    if majority_idx.len() < n_major {
        return Err(DataError::InsufficientRows {
            needed: n_major,
            available: majority_idx.len(),
            value: majority_value,
        });
    }
    if minority_idx.len() < n_minor {
        return Err(DataError::InsufficientRows {
            needed: n_minor,
            available: minority_idx.len(),
            value: minority_value,
        });
    }

    let mut rng = seed::rng(seed_value);
    let pick = |pool: &[usize], count: usize, rng: &mut rand_chacha::ChaCha8Rng| {
        let mut pool = pool.to_vec();
        // partial Fisher-Yates: the first `count` slots end up random
        for i in 0..count {
            let j = i + rng.random_range(0..pool.len() - i);
            pool.swap(i, j);
        }
        pool.truncate(count);
        pool
    };
    let mut chosen = pick(&majority_idx, n_major, &mut rng);
    chosen.extend(pick(&minority_idx, n_minor, &mut rng));
    // shuffle the combined order so class runs do not line up with batches
    for i in (1..chosen.len()).rev() {
        let j = rng.random_range(0..=i);
        chosen.swap(i, j);
    }
    Ok(d.take_rows(&chosen))
}

/// Build the MPS feature map for a dataset: binary features keep their value
/// dictionaries, continuous features min-max normalize over the observed
/// range. Input features only, in schema order.
pub fn mps_feature_map(d: &Dataset, epsilon: f64) -> Result<FeatureMap, DataError> {
    let mut encodings = Vec::new();
    for &i in &d.input_indices() {
        match &d.schema()[i].kind {
            FeatureKind::Binary { values } => {
                encodings.push(FeatureEncoding::BinaryNoisy { values: *values });
            }
            FeatureKind::Continuous => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for r in d.rows() {
                    lo = lo.min(r[i]);
                    hi = hi.max(r[i]);
                }
                if !lo.is_finite() || !hi.is_finite() {
                    lo = 0.0;
                    hi = 1.0;
                }
                if lo == hi {
                    hi = lo + 1.0;
                }
                encodings.push(FeatureEncoding::ContinuousMinMax { lo, hi });
            }
        }
    }
    Ok(FeatureMap::new(epsilon, encodings)?)
}

/// One-hot encoder for the feedforward baseline: binary features expand to a
/// pair of indicator slots, continuous features min-max normalize to one
/// scalar slot.
#[derive(Debug, Clone, PartialEq)]
pub struct OneHotEncoder {
    specs: Vec<(usize, OneHotKind)>,
}

#[derive(Debug, Clone, PartialEq)]
enum OneHotKind {
    Binary { values: [f64; 2] },
    Continuous { lo: f64, hi: f64 },
}

impl OneHotEncoder {
    pub fn fit(d: &Dataset) -> Self {
        let specs = d
            .input_indices()
            .into_iter()
            .map(|i| match &d.schema()[i].kind {
                FeatureKind::Binary { values } => (i, OneHotKind::Binary { values: *values }),
                FeatureKind::Continuous => {
                    let mut lo = f64::INFINITY;
                    let mut hi = f64::NEG_INFINITY;
                    for r in d.rows() {
                        lo = lo.min(r[i]);
                        hi = hi.max(r[i]);
                    }
                    if !lo.is_finite() || !hi.is_finite() {
                        lo = 0.0;
                        hi = 1.0;
                    }
                    if lo == hi {
                        hi = lo + 1.0;
                    }
                    (i, OneHotKind::Continuous { lo, hi })
                }
            })
            .collect();
        Self { specs }
    }

    pub fn input_dim(&self) -> usize {
        self.specs
            .iter()
            .map(|(_, k)| match k {
                OneHotKind::Binary { .. } => 2,
                OneHotKind::Continuous { .. } => 1,
            })
            .sum()
    }

    pub fn encode(&self, row: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.input_dim());
        for (i, kind) in &self.specs {
            match kind {
                OneHotKind::Binary { values } => {
                    if row[*i] == values[1] {
                        out.push(0.0);
                        out.push(1.0);
                    } else {
                        out.push(1.0);
                        out.push(0.0);
                    }
                }
                OneHotKind::Continuous { lo, hi } => {
                    out.push(((row[*i] - lo) / (hi - lo)).clamp(0.0, 1.0));
                }
            }
        }
        out
    }
}

/// How one CSV column parses into a dataset feature.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnParse {
    /// Cells are numbers, one of the two dictionary values.
    BinaryNumeric { values: [f64; 2] },
    /// Cells are category strings mapped to class 0 or class 1.
    BinaryCategories { zero: Vec<String>, one: Vec<String> },
    Continuous,
    /// Cells are `YYYY-MM-DD` dates; the day-of-month parity becomes the
    /// value (even day = 0, odd day = 1).
    DateParity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvColumnSpec {
    pub name: String,
    pub role: FeatureRole,
    pub parse: ColumnParse,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestReport {
    /// Rows discarded because at least one cell was empty.
    pub dropped_rows: usize,
}

/// Read a CSV with a header row; rows with any empty cell are dropped and
/// counted. Cell parse failures and unknown categories are errors carrying
/// the 1-based line number.
pub fn ingest_csv(text: &str, specs: &[CsvColumnSpec]) -> Result<(Dataset, IngestReport), DataError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| DataError::MalformedRow {
            line: 1,
            detail: "empty file".into(),
        })?;
    let expected_header: Vec<&str> = specs.iter().map(|s| s.name.as_str()).collect();
    let got_header: Vec<&str> = header.split(',').map(str::trim).collect();
    if got_header != expected_header {
        return Err(DataError::HeaderMismatch {
            expected: expected_header.join(","),
            got: got_header.join(","),
        });
    }

    let schema: Vec<FeatureDesc> = specs
        .iter()
        .map(|s| {
            let kind = match &s.parse {
                ColumnParse::BinaryNumeric { values } => FeatureKind::Binary { values: *values },
                ColumnParse::BinaryCategories { .. } | ColumnParse::DateParity => {
                    FeatureKind::Binary { values: [0.0, 1.0] }
                }
                ColumnParse::Continuous => FeatureKind::Continuous,
            };
            FeatureDesc::new(&s.name, kind, s.role)
        })
        .collect();

    let mut rows = Vec::new();
    let mut report = IngestReport::default();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != specs.len() {
            return Err(DataError::MalformedRow {
                line: line_no,
                detail: format!("{} cells, expected {}", cells.len(), specs.len()),
            });
        }
        if cells.iter().any(|c| c.is_empty()) {
            report.dropped_rows += 1;
            continue;
        }
        let mut row = Vec::with_capacity(specs.len());
        for (spec, cell) in specs.iter().zip(&cells) {
            let v = match &spec.parse {
                ColumnParse::BinaryNumeric { values } => {
                    let v: f64 = cell.parse().map_err(|e| DataError::MalformedRow {
                        line: line_no,
                        detail: format!("column {}: {e}", spec.name),
                    })?;
                    if v != values[0] && v != values[1] {
                        return Err(DataError::UnknownCategory {
                            line: line_no,
                            column: spec.name.clone(),
                            value: cell.to_string(),
                        });
                    }
                    v
                }
                ColumnParse::BinaryCategories { zero, one } => {
                    if zero.iter().any(|z| z == cell) {
                        0.0
                    } else if one.iter().any(|o| o == cell) {
                        1.0
                    } else {
                        return Err(DataError::UnknownCategory {
                            line: line_no,
                            column: spec.name.clone(),
                            value: cell.to_string(),
                        });
                    }
                }
                ColumnParse::Continuous => cell.parse().map_err(|e| DataError::MalformedRow {
                    line: line_no,
                    detail: format!("column {}: {e}", spec.name),
                })?,
                ColumnParse::DateParity => {
                    let day: u32 = cell
                        .split('-')
                        .nth(2)
                        .and_then(|d| d.parse().ok())
                        .ok_or_else(|| DataError::MalformedRow {
                            line: line_no,
                            detail: format!("column {}: bad date {cell:?}", spec.name),
                        })?;
                    if day % 2 == 0 {
                        0.0
                    } else {
                        1.0
                    }
                }
            };
            row.push(v);
        }
        rows.push(row);
    }
    Ok((Dataset::new(schema, rows)?, report))
}

/// Write a dataset as CSV: header of feature names, shortest round-trip
/// decimals, UTF-8, no quoting.
pub fn export_csv(d: &Dataset) -> String {
    let mut out = String::new();
    let names: Vec<&str> = d.schema().iter().map(|f| f.name.as_str()).collect();
    out.push_str(&names.join(","));
    out.push('\n');
    for row in d.rows() {
        let cells: Vec<String> = row.iter().map(|v| crate::tensor::format_f64(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_has_constant_irrelevant_and_balanced_labels() {
        let d = gen_toy(10_000, 1.0, 5);
        assert!(d.rows().iter().all(|r| r[1] == 1.0));
        let ones = d.rows().iter().filter(|r| r[2] == 1.0).count() as f64;
        let frac = ones / d.len() as f64;
        assert!((frac - 0.5).abs() < 0.02, "label fraction {frac}");
        let single = gen_toy(1, -1.0, 6);
        assert_eq!(single.len(), 1);
        assert_eq!(single.rows()[0][1], -1.0);
    }

    #[test]
    fn toy_is_deterministic() {
        assert_eq!(gen_toy(100, 1.0, 9), gen_toy(100, 1.0, 9));
    }

    #[test]
    fn checked_in_targets_are_a_valid_correlation_matrix() {
        let t = surrogate_target();
        assert_eq!(t.dim(), 6);
        assert_eq!(t.get(2, 5), -0.707);
        // validated on construction; also spot-check symmetry
        assert_eq!(t.get(5, 2), t.get(2, 5));
    }

    #[test]
    fn target_rejects_non_psd() {
        // r(a,b)=r(b,c)=0.9, r(a,c)=-0.9 cannot be embedded
        let names = vec!["a".into(), "b".into(), "c".into()];
        let m = vec![1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0];
        assert!(matches!(
            CorrelationTarget::new(names, m),
            Err(DataError::BadTarget(_))
        ));
    }

    #[test]
    fn surrogate_degenerate_imbalance_is_constant() {
        let d = gen_surrogate(500, 1, 1.0, &surrogate_target(), 3).unwrap();
        assert!(d.rows().iter().all(|r| r[0] == 1.0));
    }

    #[test]
    fn surrogate_identity_targets_decorrelate() {
        let names: Vec<String> = SURROGATE_COLUMNS.iter().map(|s| s.to_string()).collect();
        let k = names.len();
        let mut m = vec![0.0; k * k];
        for i in 0..k {
            m[i * k + i] = 1.0;
        }
        let t = CorrelationTarget::new(names, m).unwrap();
        let d = gen_surrogate(20_000, 1, 0.5, &t, 11).unwrap();
        let emp = empirical_pearson(&d);
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    assert!(emp[i * k + j].abs() < 0.05, "({i},{j}) = {}", emp[i * k + j]);
                }
            }
        }
    }

    #[test]
    fn surrogate_hits_table_targets() {
        let t = surrogate_target();
        let d = gen_surrogate(20_000, 1, 0.5, &t, 17).unwrap();
        let emp = empirical_pearson(&d);
        let k = t.dim();
        for i in 0..k {
            for j in 0..k {
                let delta = (emp[i * k + j] - t.get(i, j)).abs();
                assert!(
                    delta <= 0.05,
                    "({i},{j}): empirical {} vs target {}",
                    emp[i * k + j],
                    t.get(i, j)
                );
            }
        }
        // marginals of the binary columns stay within a percent
        for col in [0usize, 1, 3, 4, 5] {
            let frac =
                d.rows().iter().filter(|r| r[col] == 1.0).count() as f64 / d.len() as f64;
            assert!((frac - 0.5).abs() < 0.01, "column {col} marginal {frac}");
        }
    }

    #[test]
    fn surrogate_is_deterministic() {
        let t = surrogate_target();
        let a = gen_surrogate(1000, 0, 0.8, &t, 23).unwrap();
        let b = gen_surrogate(1000, 0, 0.8, &t, 23).unwrap();
        assert_eq!(a, b);
        // majority class 0 at p=0.8 means parity=0 on ~80%
        let zeros = a.rows().iter().filter(|r| r[0] == 0.0).count() as f64;
        assert!((zeros / a.len() as f64 - 0.8).abs() < 0.03);
    }

    #[test]
    fn sample_biased_counts_exactly() {
        let d = gen_surrogate(5000, 1, 0.5, &surrogate_target(), 31).unwrap();
        let s = sample_biased(&d, "parity", 1.0, 0.8, 200, 7).unwrap();
        assert_eq!(s.len(), 200);
        let majors = s.rows().iter().filter(|r| r[0] == 1.0).count();
        assert_eq!(majors, 160);

        let half = sample_biased(&d, "parity", 1.0, 0.5, 100, 8).unwrap();
        assert_eq!(half.rows().iter().filter(|r| r[0] == 1.0).count(), 50);
    }

    #[test]
    fn sample_biased_draws_without_replacement_and_varies_by_seed() {
        let d = gen_toy(400, 1.0, 77);
        // x_irr is constant; bias on the label column instead
        let a = sample_biased(&d, "label", 1.0, 0.6, 100, 1).unwrap();
        let b = sample_biased(&d, "label", 1.0, 0.6, 100, 2).unwrap();
        assert_eq!(a.len(), 100);
        assert_eq!(b.len(), 100);
        assert_ne!(a.rows(), b.rows(), "different seeds, different draws");
        // same counts per stratum
        let count = |s: &Dataset| s.rows().iter().filter(|r| r[2] == 1.0).count();
        assert_eq!(count(&a), 60);
        assert_eq!(count(&b), 60);
        // no duplicate rows beyond source multiplicity: x_rel is continuous,
        // so draws without replacement cannot repeat values
        let mut seen: Vec<f64> = a.rows().iter().map(|r| r[0]).collect();
        seen.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for w in seen.windows(2) {
            assert!(w[0] != w[1], "row drawn twice");
        }
    }

    #[test]
    fn sample_biased_errors_when_stratum_is_short() {
        let d = gen_toy(10, 1.0, 3);
        assert!(matches!(
            sample_biased(&d, "x_irr", 1.0, 0.5, 10, 1),
            Err(DataError::InsufficientRows { .. })
        ));
    }

    #[test]
    fn ingest_drops_rows_with_empty_cells() {
        let csv = "a,b,label\n1,2.5,0\n,3.5,1\n0,4.5,1\n";
        let specs = vec![
            CsvColumnSpec {
                name: "a".into(),
                role: FeatureRole::Irrelevant,
                parse: ColumnParse::BinaryNumeric { values: [0.0, 1.0] },
            },
            CsvColumnSpec {
                name: "b".into(),
                role: FeatureRole::Relevant,
                parse: ColumnParse::Continuous,
            },
            CsvColumnSpec {
                name: "label".into(),
                role: FeatureRole::Label,
                parse: ColumnParse::BinaryNumeric { values: [0.0, 1.0] },
            },
        ];
        let (d, report) = ingest_csv(csv, &specs).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(report.dropped_rows, 1);
    }

    #[test]
    fn ingest_parses_date_parity() {
        let csv = "date,label\n2021-03-22,0\n2021-03-23,1\n";
        let specs = vec![
            CsvColumnSpec {
                name: "date".into(),
                role: FeatureRole::Irrelevant,
                parse: ColumnParse::DateParity,
            },
            CsvColumnSpec {
                name: "label".into(),
                role: FeatureRole::Label,
                parse: ColumnParse::BinaryNumeric { values: [0.0, 1.0] },
            },
        ];
        let (d, _) = ingest_csv(csv, &specs).unwrap();
        assert_eq!(d.rows()[0][0], 0.0); // day 22: even
        assert_eq!(d.rows()[1][0], 1.0); // day 23: odd
    }

    #[test]
    fn ingest_reports_line_numbers_and_categories() {
        let csv = "c,label\nmaybe,0\n";
        let specs = vec![
            CsvColumnSpec {
                name: "c".into(),
                role: FeatureRole::Relevant,
                parse: ColumnParse::BinaryCategories {
                    zero: vec!["no".into()],
                    one: vec!["yes".into()],
                },
            },
            CsvColumnSpec {
                name: "label".into(),
                role: FeatureRole::Label,
                parse: ColumnParse::BinaryNumeric { values: [0.0, 1.0] },
            },
        ];
        match ingest_csv(csv, &specs) {
            Err(DataError::UnknownCategory { line, column, value }) => {
                assert_eq!(line, 2);
                assert_eq!(column, "c");
                assert_eq!(value, "maybe");
            }
            other => panic!("expected category error, got {other:?}"),
        }
    }

    #[test]
    fn export_ingest_round_trip_is_exact() {
        let d = gen_surrogate(200, 1, 0.7, &surrogate_target(), 41).unwrap();
        let csv = export_csv(&d);
        let specs: Vec<CsvColumnSpec> = d
            .schema()
            .iter()
            .map(|f| CsvColumnSpec {
                name: f.name.clone(),
                role: f.role,
                parse: match &f.kind {
                    FeatureKind::Binary { values } => {
                        ColumnParse::BinaryNumeric { values: *values }
                    }
                    FeatureKind::Continuous => ColumnParse::Continuous,
                },
            })
            .collect();
        let (back, report) = ingest_csv(&csv, &specs).unwrap();
        assert_eq!(report.dropped_rows, 0);
        assert_eq!(d.rows(), back.rows());
    }

    #[test]
    fn encoders_have_expected_dimensions() {
        let d = gen_surrogate(100, 1, 0.5, &surrogate_target(), 51).unwrap();
        let enc = OneHotEncoder::fit(&d);
        assert_eq!(enc.input_dim(), 9);
        let x = enc.encode(&d.rows()[0]);
        assert_eq!(x.len(), 9);

        let fm = mps_feature_map(&d, 0.05).unwrap();
        assert_eq!(fm.len(), 5);
    }
}
