//! Model shape and parameter packing.
//!
//! The observation equation loads `k` series on `n_f` factors and `n_x`
//! exogenous regressors; factors follow a VAR(`p`) with `n_w` exogenous
//! regressors; idiosyncratic errors follow a VAR(`q`) driven by white noise
//! with diagonal covariance. The factor innovation covariance is fixed at the
//! identity.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{DfmError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DfmSpec {
    /// Observed series.
    pub k: usize,
    /// Latent factors.
    pub n_f: usize,
    /// Exogenous regressors in the observation equation.
    pub n_x: usize,
    /// Exogenous regressors in the factor equation.
    pub n_w: usize,
    /// Factor VAR order.
    pub p: usize,
    /// Idiosyncratic error VAR order.
    pub q: usize,
}

impl DfmSpec {
    pub fn new(k: usize, n_f: usize, p: usize, q: usize) -> Result<Self> {
        DfmSpec { k, n_f, n_x: 0, n_w: 0, p, q }.validated()
    }

    pub fn with_exogenous(mut self, n_x: usize, n_w: usize) -> Result<Self> {
        self.n_x = n_x;
        self.n_w = n_w;
        self.validated()
    }

    pub fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(DfmError::InvalidSpec("at least one observed series is required".into()));
        }
        if self.p > 0 && self.n_f == 0 {
            return Err(DfmError::InvalidSpec("factor lags require at least one factor".into()));
        }
        if self.n_w > 0 && self.n_f == 0 {
            return Err(DfmError::InvalidSpec("factor exogenous regressors require at least one factor".into()));
        }
        Ok(())
    }

    /// Number of free parameters.
    pub fn count_parameters(&self) -> usize {
        let DfmSpec { k, n_f, n_x, n_w, p, q } = *self;
        k * n_f + k * n_x + n_f * n_w + p * n_f * n_f + q * k * k + k
    }

    pub fn classify(&self) -> ModelKind {
        classify(self)
    }
}

/// The model variants reachable by choosing `n_f`, `p` and `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    DynamicFactorsVarErrors,
    DynamicFactors,
    /// Factors without lag dynamics, VAR errors.
    FactorsVarErrors,
    /// Factors without lag dynamics, white-noise errors.
    FactorsOnly,
    VarErrorsOnly,
    SeeminglyUnrelatedRegression,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::DynamicFactorsVarErrors,
        ModelKind::DynamicFactors,
        ModelKind::FactorsVarErrors,
        ModelKind::FactorsOnly,
        ModelKind::VarErrorsOnly,
        ModelKind::SeeminglyUnrelatedRegression,
    ];
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::DynamicFactorsVarErrors => "dynamic factors with vector autoregressive errors",
            ModelKind::DynamicFactors => "dynamic factors",
            ModelKind::FactorsVarErrors => "static factors with vector autoregressive errors",
            ModelKind::FactorsOnly => "static factors",
            ModelKind::VarErrorsOnly => "vector autoregressive errors",
            ModelKind::SeeminglyUnrelatedRegression => "seemingly unrelated regression",
        })
    }
}

pub fn classify(spec: &DfmSpec) -> ModelKind {
    match (spec.n_f > 0, spec.p > 0, spec.q > 0) {
        (true, true, true) => ModelKind::DynamicFactorsVarErrors,
        (true, true, false) => ModelKind::DynamicFactors,
        (true, false, true) => ModelKind::FactorsVarErrors,
        (true, false, false) => ModelKind::FactorsOnly,
        (false, _, true) => ModelKind::VarErrorsOnly,
        (false, _, false) => ModelKind::SeeminglyUnrelatedRegression,
    }
}

/// Full parameter collection of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    /// k×n_f factor loadings.
    pub loadings: DMatrix<f64>,
    /// k×n_x observation-equation exogenous coefficients.
    pub obs_exog: DMatrix<f64>,
    /// n_f×n_w factor-equation exogenous coefficients.
    pub factor_exog: DMatrix<f64>,
    /// Factor VAR matrices A_1..A_p, each n_f×n_f.
    pub factor_ar: Vec<DMatrix<f64>>,
    /// Error VAR matrices C_1..C_q, each k×k.
    pub error_ar: Vec<DMatrix<f64>>,
    /// Log of the diagonal idiosyncratic innovation covariance. Keeping the
    /// log scale makes packing an exact copy in both directions.
    pub log_idio_var: DVector<f64>,
}

impl ParamSet {
    /// All coefficient matrices zero, unit idiosyncratic variances.
    pub fn zeros(spec: &DfmSpec) -> Self {
        ParamSet {
            loadings: DMatrix::zeros(spec.k, spec.n_f),
            obs_exog: DMatrix::zeros(spec.k, spec.n_x),
            factor_exog: DMatrix::zeros(spec.n_f, spec.n_w),
            factor_ar: vec![DMatrix::zeros(spec.n_f, spec.n_f); spec.p],
            error_ar: vec![DMatrix::zeros(spec.k, spec.k); spec.q],
            log_idio_var: DVector::zeros(spec.k),
        }
    }

    /// Idiosyncratic innovation variances.
    pub fn idio_var(&self) -> DVector<f64> {
        self.log_idio_var.map(f64::exp)
    }

    /// Zero variances are allowed (log-variance −∞) for noiseless models;
    /// such parameter sets can be simulated but not packed.
    pub fn set_idio_var(&mut self, var: &DVector<f64>) -> Result<()> {
        if var.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(DfmError::InvalidArgument("idiosyncratic variances must be non-negative".into()));
        }
        self.log_idio_var = var.map(f64::ln);
        Ok(())
    }

    pub fn check(&self, spec: &DfmSpec) -> Result<()> {
        let shape = |name: &str, m: &DMatrix<f64>, r: usize, c: usize| {
            if m.shape() != (r, c) {
                Err(DfmError::DimensionMismatch(format!("{name} is {}x{}, expected {r}x{c}", m.nrows(), m.ncols())))
            } else {
                Ok(())
            }
        };
        shape("loadings", &self.loadings, spec.k, spec.n_f)?;
        shape("obs_exog", &self.obs_exog, spec.k, spec.n_x)?;
        shape("factor_exog", &self.factor_exog, spec.n_f, spec.n_w)?;
        if self.factor_ar.len() != spec.p {
            return Err(DfmError::DimensionMismatch(format!(
                "{} factor lag matrices, expected {}",
                self.factor_ar.len(),
                spec.p
            )));
        }
        if self.error_ar.len() != spec.q {
            return Err(DfmError::DimensionMismatch(format!(
                "{} error lag matrices, expected {}",
                self.error_ar.len(),
                spec.q
            )));
        }
        for a in &self.factor_ar {
            shape("factor_ar", a, spec.n_f, spec.n_f)?;
        }
        for c in &self.error_ar {
            shape("error_ar", c, spec.k, spec.k)?;
        }
        if self.log_idio_var.len() != spec.k {
            return Err(DfmError::DimensionMismatch(format!(
                "{} idiosyncratic variances, expected {}",
                self.log_idio_var.len(),
                spec.k
            )));
        }
        let all_finite = self.loadings.iter().all(|v| v.is_finite())
            && self.obs_exog.iter().all(|v| v.is_finite())
            && self.factor_exog.iter().all(|v| v.is_finite())
            && self.factor_ar.iter().flat_map(|m| m.iter()).all(|v| v.is_finite())
            && self.error_ar.iter().flat_map(|m| m.iter()).all(|v| v.is_finite())
            && self.log_idio_var.iter().all(|v| v.is_finite() || *v == f64::NEG_INFINITY);
        if !all_finite {
            return Err(DfmError::NonFiniteValue("parameter set".into()));
        }
        Ok(())
    }

    /// Negates factor `j`: its loading column, the matching rows and columns
    /// of every A_i, and row `j` of the factor exogenous block. The implied
    /// distribution of the observations is unchanged.
    pub fn flip_factor(&mut self, j: usize) {
        self.loadings.column_mut(j).neg_mut();
        self.factor_exog.row_mut(j).neg_mut();
        for a in &mut self.factor_ar {
            a.row_mut(j).neg_mut();
            a.column_mut(j).neg_mut();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Loadings,
    ObsExog,
    FactorExog,
    FactorAr(usize),
    ErrorAr(usize),
    /// Stored as log-variances.
    LogIdioVar,
}

/// One parameter block inside the flat vector. Matrix blocks are stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub kind: BlockKind,
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl Block {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn position(&self, r: usize, c: usize) -> usize {
        self.offset + r * self.cols + c
    }
}

/// Ordered block layout: P, Q, R, A_1..A_p, C_1..C_q, log(sigma_eps).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub blocks: Vec<Block>,
    pub len: usize,
}

impl Layout {
    pub fn for_spec(spec: &DfmSpec) -> Self {
        let mut blocks = Vec::new();
        let mut offset = 0;
        let mut push = |kind, name: String, rows, cols| {
            blocks.push(Block { kind, name, rows, cols, offset });
            offset += rows * cols;
        };
        push(BlockKind::Loadings, "P".into(), spec.k, spec.n_f);
        push(BlockKind::ObsExog, "Q".into(), spec.k, spec.n_x);
        push(BlockKind::FactorExog, "R".into(), spec.n_f, spec.n_w);
        for i in 0..spec.p {
            push(BlockKind::FactorAr(i), format!("A{}", i + 1), spec.n_f, spec.n_f);
        }
        for i in 0..spec.q {
            push(BlockKind::ErrorAr(i), format!("C{}", i + 1), spec.k, spec.k);
        }
        push(BlockKind::LogIdioVar, "log_sigma2".into(), spec.k, 1);
        Layout { blocks, len: offset }
    }

    pub fn block(&self, kind: BlockKind) -> Option<&Block> {
        self.blocks.iter().find(|b| b.kind == kind)
    }
}

/// Flat, unconstrained parameter vector used by the optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub values: DVector<f64>,
    pub layout: Layout,
}

impl ParamVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn pack(params: &ParamSet, spec: &DfmSpec) -> Result<ParamVector> {
    params.check(spec)?;
    let layout = Layout::for_spec(spec);
    let mut values = DVector::zeros(layout.len);
    for b in &layout.blocks {
        let src: &DMatrix<f64> = match b.kind {
            BlockKind::Loadings => &params.loadings,
            BlockKind::ObsExog => &params.obs_exog,
            BlockKind::FactorExog => &params.factor_exog,
            BlockKind::FactorAr(i) => &params.factor_ar[i],
            BlockKind::ErrorAr(i) => &params.error_ar[i],
            BlockKind::LogIdioVar => {
                values.rows_mut(b.offset, b.rows).copy_from(&params.log_idio_var);
                continue;
            }
        };
        for r in 0..b.rows {
            for c in 0..b.cols {
                values[b.position(r, c)] = src[(r, c)];
            }
        }
    }
    Ok(ParamVector { values, layout })
}

pub fn unpack(values: &DVector<f64>, spec: &DfmSpec) -> Result<ParamSet> {
    let layout = Layout::for_spec(spec);
    if values.len() != layout.len {
        return Err(DfmError::DimensionMismatch(format!(
            "parameter vector has {} entries, spec needs {}",
            values.len(),
            layout.len
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(DfmError::NonFiniteValue("parameter vector".into()));
    }
    let mut ps = ParamSet::zeros(spec);
    for b in &layout.blocks {
        let read = |m: &mut DMatrix<f64>| {
            for r in 0..b.rows {
                for c in 0..b.cols {
                    m[(r, c)] = values[b.position(r, c)];
                }
            }
        };
        match b.kind {
            BlockKind::Loadings => read(&mut ps.loadings),
            BlockKind::ObsExog => read(&mut ps.obs_exog),
            BlockKind::FactorExog => read(&mut ps.factor_exog),
            BlockKind::FactorAr(i) => read(&mut ps.factor_ar[i]),
            BlockKind::ErrorAr(i) => read(&mut ps.error_ar[i]),
            BlockKind::LogIdioVar => ps.log_idio_var.copy_from(&values.rows(b.offset, b.rows)),
        }
    }
    Ok(ps)
}

/// Human-readable names for every flat parameter, on the natural scale
/// (variances rather than log-variances).
pub fn parameter_names(spec: &DfmSpec, series: &[String], obs_exog: &[String], factor_exog: &[String]) -> Vec<String> {
    let layout = Layout::for_spec(spec);
    let factor = |j: usize| format!("f{}", j + 1);
    let series_name = |i: usize| series.get(i).cloned().unwrap_or_else(|| format!("y{}", i + 1));
    let mut names = vec![String::new(); layout.len];
    for b in &layout.blocks {
        for r in 0..b.rows {
            for c in 0..b.cols {
                names[b.position(r, c)] = match b.kind {
                    BlockKind::Loadings => format!("P[{},{}]", series_name(r), factor(c)),
                    BlockKind::ObsExog => format!(
                        "Q[{},{}]",
                        series_name(r),
                        obs_exog.get(c).cloned().unwrap_or_else(|| format!("x{}", c + 1))
                    ),
                    BlockKind::FactorExog => format!(
                        "R[{},{}]",
                        factor(r),
                        factor_exog.get(c).cloned().unwrap_or_else(|| format!("w{}", c + 1))
                    ),
                    BlockKind::FactorAr(i) => format!("A{}[{},{}]", i + 1, factor(r), factor(c)),
                    BlockKind::ErrorAr(i) => format!("C{}[{},{}]", i + 1, series_name(r), series_name(c)),
                    BlockKind::LogIdioVar => format!("sigma2[{}]", series_name(r)),
                };
            }
        }
    }
    names
}
