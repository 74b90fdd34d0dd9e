//! Model types and the deterministic recursions shared by simulation and
//! estimation.
//!
//! The mean equation is a threshold autoregression: the regime active at time
//! `t` is chosen by `x_{t-d}` against an increasing list of thresholds, and each
//! regime carries its own intercept and `p` AR coefficients. The innovations
//! follow an asymmetric ARCH recursion
//!
//! ```text
//! h_t = alpha0 + sum_i (alpha_i |e_{t-i}| + beta_i e_{t-i})^2
//! ```
//!
//! Regime intervals are closed on the right, so a value equal to a threshold
//! belongs to the lower regime. Regime indices are zero-based throughout.

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// An ordered univariate series of finite observations.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    origin_label: Option<String>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(ModelError::EmptySeries);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite { index });
        }
        Ok(Self {
            values,
            origin_label: None,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.origin_label = Some(label.into());
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> Option<&str> {
        self.origin_label.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Delay and thresholds splitting the real line into `l` regimes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PartitionDoc", into = "PartitionDoc")]
pub struct ThresholdPartition {
    delay: usize,
    thresholds: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PartitionDoc {
    delay: usize,
    thresholds: Vec<f64>,
}

impl TryFrom<PartitionDoc> for ThresholdPartition {
    type Error = ModelError;

    fn try_from(doc: PartitionDoc) -> Result<Self> {
        Self::new(doc.delay, doc.thresholds)
    }
}

impl From<ThresholdPartition> for PartitionDoc {
    fn from(p: ThresholdPartition) -> Self {
        Self {
            delay: p.delay,
            thresholds: p.thresholds,
        }
    }
}

impl ThresholdPartition {
    pub fn new(delay: usize, thresholds: Vec<f64>) -> Result<Self> {
        if delay == 0 {
            return Err(ModelError::InvalidParameter("delay must be at least 1".into()));
        }
        if let Some(index) = thresholds.iter().position(|t| !t.is_finite()) {
            return Err(ModelError::NonFinite { index });
        }
        if thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ModelError::InvalidParameter(
                "thresholds must be strictly increasing".into(),
            ));
        }
        Ok(Self { delay, thresholds })
    }

    /// Degenerate one-regime partition.
    pub fn single(delay: usize) -> Result<Self> {
        Self::new(delay, Vec::new())
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn regimes(&self) -> usize {
        self.thresholds.len() + 1
    }

    /// Zero-based regime containing `x`.
    pub fn regime_index(&self, x: f64) -> usize {
        // number of thresholds strictly below x; ties stay in the lower regime
        self.thresholds.partition_point(|&t| t < x)
    }

    /// Same partition with every threshold moved by `shift`.
    pub fn shifted(&self, shift: f64) -> Self {
        Self {
            delay: self.delay,
            thresholds: self.thresholds.iter().map(|t| t + shift).collect(),
        }
    }
}

/// Per-regime AR coefficients, row `j` is `(phi_j0, phi_j1, .., phi_jp)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TarParams {
    order: usize,
    coefficients: Vec<f64>,
}

impl TarParams {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| ModelError::Dimension("at least one regime row required".into()))?;
        if first.is_empty() {
            return Err(ModelError::Dimension("regime rows need an intercept".into()));
        }
        let width = first.len();
        if rows.iter().any(|r| r.len() != width) {
            return Err(ModelError::Dimension("regime rows differ in length".into()));
        }
        let coefficients: Vec<f64> = rows.into_iter().flatten().collect();
        if let Some(index) = coefficients.iter().position(|c| !c.is_finite()) {
            return Err(ModelError::NonFinite { index });
        }
        Ok(Self {
            order: width - 1,
            coefficients,
        })
    }

    pub fn from_flat(regimes: usize, order: usize, coefficients: Vec<f64>) -> Result<Self> {
        if regimes == 0 || coefficients.len() != regimes * (order + 1) {
            return Err(ModelError::Dimension(format!(
                "expected {} coefficients for {} regimes of order {}",
                regimes * (order + 1),
                regimes,
                order
            )));
        }
        if let Some(index) = coefficients.iter().position(|c| !c.is_finite()) {
            return Err(ModelError::NonFinite { index });
        }
        Ok(Self {
            order,
            coefficients,
        })
    }

    pub fn zeros(regimes: usize, order: usize) -> Self {
        Self {
            order,
            coefficients: vec![0.0; regimes * (order + 1)],
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn regimes(&self) -> usize {
        self.coefficients.len() / (self.order + 1)
    }

    pub fn row(&self, regime: usize) -> &[f64] {
        let w = self.order + 1;
        &self.coefficients[regime * w..(regime + 1) * w]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.coefficients
            .chunks(self.order + 1)
            .map(<[f64]>::to_vec)
            .collect()
    }

    /// Largest per-regime sum of absolute AR coefficients (intercepts excluded).
    pub fn max_abs_ar_sum(&self) -> f64 {
        self.coefficients
            .chunks(self.order + 1)
            .map(|r| r[1..].iter().map(|c| c.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Asymmetric ARCH variance parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AarchParams {
    alpha0: f64,
    alphas: Vec<f64>,
    betas: Vec<f64>,
}

impl AarchParams {
    pub fn new(alpha0: f64, alphas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        if !(alpha0.is_finite() && alpha0 > 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "alpha0 must be positive and finite, got {alpha0}"
            )));
        }
        if alphas.is_empty() {
            return Err(ModelError::InvalidParameter("ARCH order q must be positive".into()));
        }
        if alphas.len() != betas.len() {
            return Err(ModelError::Dimension(format!(
                "{} alphas but {} betas",
                alphas.len(),
                betas.len()
            )));
        }
        if alphas.iter().chain(&betas).any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidParameter("non-finite ARCH coefficient".into()));
        }
        Ok(Self {
            alpha0,
            alphas,
            betas,
        })
    }

    /// Constant-variance specification of order `q`.
    pub fn homoskedastic(alpha0: f64, q: usize) -> Result<Self> {
        Self::new(alpha0, vec![0.0; q], vec![0.0; q])
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn order(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.betas.iter().all(|&b| b == 0.0)
    }

    /// `sum_i (alpha_i^2 + beta_i^2)`, the expected ARCH loading under N(0,1) shocks.
    pub fn persistence(&self) -> f64 {
        self.alphas
            .iter()
            .zip(&self.betas)
            .map(|(a, b)| a * a + b * b)
            .sum()
    }

    /// Contribution of a shock at lag `i` (zero-based) to the variance.
    #[inline]
    pub(crate) fn term(&self, i: usize, shock: f64) -> f64 {
        let u = self.alphas[i] * shock.abs() + self.betas[i] * shock;
        u * u
    }

    /// Representative with `alpha_i >= |beta_i|`.
    ///
    /// `(a, b)`, `(-a, -b)` and `(b, a)` produce the same variance path, since
    /// only `|alpha_i + beta_i|` and `|alpha_i - beta_i|` enter it.
    pub fn canonical(&self) -> Self {
        let mut alphas = Vec::with_capacity(self.alphas.len());
        let mut betas = Vec::with_capacity(self.betas.len());
        for (&a, &b) in self.alphas.iter().zip(&self.betas) {
            let up = (a + b).abs();
            let down = (a - b).abs();
            alphas.push(0.5 * (up + down));
            betas.push(0.5 * (up - down));
        }
        Self {
            alpha0: self.alpha0,
            alphas,
            betas,
        }
    }
}

/// Outcome of the sufficient-side stationarity checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarityCheck {
    pub arch_persistence: f64,
    pub max_abs_ar_sum: f64,
    pub satisfied: bool,
    pub warnings: Vec<String>,
}

/// Complete TAR-AARCH specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelSpecDoc", into = "ModelSpecDoc")]
pub struct ModelSpec {
    p: usize,
    q: usize,
    partition: ThresholdPartition,
    tar: TarParams,
    aarch: AarchParams,
}

impl ModelSpec {
    pub fn new(partition: ThresholdPartition, tar: TarParams, aarch: AarchParams) -> Result<Self> {
        if tar.regimes() != partition.regimes() {
            return Err(ModelError::Dimension(format!(
                "{} coefficient rows for {} regimes",
                tar.regimes(),
                partition.regimes()
            )));
        }
        Ok(Self {
            p: tar.order(),
            q: aarch.order(),
            partition,
            tar,
            aarch,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn partition(&self) -> &ThresholdPartition {
        &self.partition
    }

    pub fn tar(&self) -> &TarParams {
        &self.tar
    }

    pub fn aarch(&self) -> &AarchParams {
        &self.aarch
    }

    pub fn with_tar(&self, tar: TarParams) -> Result<Self> {
        Self::new(self.partition.clone(), tar, self.aarch.clone())
    }

    pub fn with_aarch(&self, aarch: AarchParams) -> Result<Self> {
        Self::new(self.partition.clone(), self.tar.clone(), aarch)
    }

    /// Presample values needed by the mean equation, `max(p, d)`.
    pub fn mean_lag(&self) -> usize {
        self.p.max(self.partition.delay())
    }

    /// Observations conditioned on by the likelihood, `max(p, q, d)`.
    pub fn conditioning(&self) -> usize {
        self.mean_lag().max(self.q)
    }

    pub fn stationarity(&self) -> StationarityCheck {
        let arch_persistence = self.aarch.persistence();
        let max_abs_ar_sum = self.tar.max_abs_ar_sum();
        let mut warnings = Vec::new();
        if arch_persistence >= 1.0 {
            warnings.push(format!(
                "sum of alpha_i^2 + beta_i^2 is {arch_persistence:.6} (>= 1); variance may be non-stationary"
            ));
        }
        if max_abs_ar_sum >= 1.0 {
            warnings.push(format!(
                "a regime has sum |phi_jk| = {max_abs_ar_sum:.6} (>= 1); sufficient stationarity check not met"
            ));
        }
        StationarityCheck {
            arch_persistence,
            max_abs_ar_sum,
            satisfied: warnings.is_empty(),
            warnings,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model spec serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))
    }
}

/// Flat JSON layout of a [`ModelSpec`].
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelSpecDoc {
    p: usize,
    q: usize,
    delay: usize,
    thresholds: Vec<f64>,
    tar: Vec<Vec<f64>>,
    alpha0: f64,
    alphas: Vec<f64>,
    betas: Vec<f64>,
}

impl TryFrom<ModelSpecDoc> for ModelSpec {
    type Error = ModelError;

    fn try_from(doc: ModelSpecDoc) -> Result<Self> {
        let partition = ThresholdPartition::new(doc.delay, doc.thresholds)?;
        let tar = TarParams::new(doc.tar)?;
        let aarch = AarchParams::new(doc.alpha0, doc.alphas, doc.betas)?;
        if tar.order() != doc.p {
            return Err(ModelError::Dimension(format!(
                "p = {} but tar rows have order {}",
                doc.p,
                tar.order()
            )));
        }
        if aarch.order() != doc.q {
            return Err(ModelError::Dimension(format!(
                "q = {} but {} ARCH coefficients given",
                doc.q,
                aarch.order()
            )));
        }
        ModelSpec::new(partition, tar, aarch)
    }
}

impl From<ModelSpec> for ModelSpecDoc {
    fn from(spec: ModelSpec) -> Self {
        Self {
            p: spec.p,
            q: spec.q,
            delay: spec.partition.delay,
            thresholds: spec.partition.thresholds.clone(),
            tar: spec.tar.rows(),
            alpha0: spec.aarch.alpha0,
            alphas: spec.aarch.alphas.clone(),
            betas: spec.aarch.betas.clone(),
        }
    }
}

/// Free-function form of [`ThresholdPartition::regime_index`].
pub fn regime_index(partition: &ThresholdPartition, x: f64) -> usize {
    partition.regime_index(x)
}

/// One-step conditional mean. `history` is chronological; its last element is `x_{t-1}`.
pub fn conditional_mean(spec: &ModelSpec, history: &[f64]) -> Result<f64> {
    let needed = spec.mean_lag();
    if history.len() < needed {
        return Err(ModelError::InsufficientHistory {
            needed,
            got: history.len(),
        });
    }
    let len = history.len();
    Ok(mean_at(spec, |k| history[len - k]))
}

#[inline]
pub(crate) fn mean_at(spec: &ModelSpec, lagged: impl Fn(usize) -> f64) -> f64 {
    let regime = spec.partition.regime_index(lagged(spec.partition.delay));
    let row = spec.tar.row(regime);
    row[1..]
        .iter()
        .enumerate()
        .fold(row[0], |acc, (k, phi)| acc + phi * lagged(k + 1))
}

/// Mean-equation residuals for `t = max(p,d)+1 ..= n`.
pub fn residuals(spec: &ModelSpec, series: &TimeSeries) -> Result<Vec<f64>> {
    let start = spec.mean_lag();
    let x = series.values();
    if x.len() <= start {
        return Err(ModelError::SeriesTooShort {
            len: x.len(),
            needed: start,
        });
    }
    Ok((start..x.len())
        .map(|t| x[t] - mean_at(spec, |k| x[t - k]))
        .collect())
}

/// Conditional variances aligned with `residuals`.
///
/// `h[t]` uses `residuals[t-i]`; lags reaching before the first residual
/// contribute `(alpha_i^2 + beta_i^2) * presample_h`, the expected term for a
/// presample shock of variance `presample_h`. A zero `presample_h` is the same
/// as treating presample residuals as zero.
pub fn variance_path(aarch: &AarchParams, residuals: &[f64], presample_h: f64) -> Vec<f64> {
    let q = aarch.order();
    let presample: Vec<f64> = (0..q)
        .map(|i| (aarch.alphas[i].powi(2) + aarch.betas[i].powi(2)) * presample_h.max(0.0))
        .collect();
    (0..residuals.len())
        .map(|t| {
            (0..q).fold(aarch.alpha0, |h, i| {
                h + if t > i {
                    aarch.term(i, residuals[t - i - 1])
                } else {
                    presample[i]
                }
            })
        })
        .collect()
}

/// Contribution `(alpha_i |e| + beta_i e)^2` of a shock at `lag` (1-based).
pub fn news_impact(aarch: &AarchParams, shock: f64, lag: usize) -> Result<f64> {
    let q = aarch.order();
    if lag == 0 || lag > q {
        return Err(ModelError::LagOutOfRange { lag, q });
    }
    Ok(aarch.term(lag - 1, shock))
}
