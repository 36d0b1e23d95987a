//! Least-squares fitting of the between-within and fixed-effects models with
//! Newey-West covariance and panel diagnostics.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::metrics::MetricsTable;
use crate::panel::{
    assemble_design, within_between, ColumnKind, DesignMatrix, EntityIndex, ModeratorInfo, PanelDesign,
};
use crate::spatial::{WeightScheme, WeightsSet};
use crate::types::{stable_mean, stable_sum, Aggregation, Period, Technology, ZoneId};

/// Condition numbers above this trigger a warning.
pub const CONDITION_WARN: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Rewb,
    Fe,
}

impl Estimator {
    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::Rewb => "rewb",
            Estimator::Fe => "fe",
        }
    }
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rewb" => Ok(Estimator::Rewb),
            "fe" => Ok(Estimator::Fe),
            other => Err(Error::Config(format!("unknown estimator '{other}'"))),
        }
    }
}

/// Zone-period control variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Control {
    HydroPumped,
    HydroReservoir,
    FuelRatio,
    #[serde(rename = "load_corr")]
    LoadCorrelation,
    #[serde(rename = "cov")]
    Variability,
}

impl Control {
    pub const ALL: [Control; 5] = [
        Control::HydroPumped,
        Control::HydroReservoir,
        Control::FuelRatio,
        Control::LoadCorrelation,
        Control::Variability,
    ];

    /// Column stem used in the design.
    pub fn name(self) -> &'static str {
        match self {
            Control::HydroPumped => "hydro_pumped",
            Control::HydroReservoir => "hydro_reservoir",
            Control::FuelRatio => "fuel_ratio",
            Control::LoadCorrelation => "load_corr",
            Control::Variability => "cov",
        }
    }

    /// The fuel price ratio is common to all zones and enters within-only.
    pub fn has_between(self) -> bool {
        self != Control::FuelRatio
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InclusionThresholds {
    /// Minimum sample-average penetration for a zone to enter a model.
    pub min_avg_penetration: f64,
}

impl Default for InclusionThresholds {
    fn default() -> Self {
        InclusionThresholds {
            min_avg_penetration: 0.005,
        }
    }
}

/// Which blocks of regressors enter the design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelTerms {
    pub spatial: bool,
    pub cross_technology: bool,
    pub interconnector: bool,
    pub controls: Vec<Control>,
    pub control_interactions: bool,
}

impl Default for ModelTerms {
    fn default() -> Self {
        ModelTerms {
            spatial: true,
            cross_technology: true,
            interconnector: true,
            controls: Control::ALL.to_vec(),
            control_interactions: true,
        }
    }
}

impl ModelTerms {
    /// Own domestic penetration and intercept only.
    pub fn minimal() -> Self {
        ModelTerms {
            spatial: false,
            cross_technology: false,
            interconnector: false,
            controls: Vec::new(),
            control_interactions: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub technology: Technology,
    pub estimator: Estimator,
    pub aggregation: Aggregation,
    pub weights: WeightScheme,
    /// `None` selects floor(4·(T̄/100)^(2/9)).
    pub hac_lags: Option<usize>,
    pub thresholds: InclusionThresholds,
    pub terms: ModelTerms,
    /// Zones removed from the estimation sample (they still enter spatial lags).
    pub exclude_zones: Vec<ZoneId>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            technology: Technology::Wind,
            estimator: Estimator::Rewb,
            aggregation: Aggregation::Monthly,
            weights: WeightScheme::IcWeighted,
            hac_lags: None,
            thresholds: InclusionThresholds::default(),
            terms: ModelTerms::default(),
            exclude_zones: Vec::new(),
        }
    }
}

impl ModelSpec {
    pub fn new(technology: Technology) -> Self {
        ModelSpec {
            technology,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: DVector<f64>,
    pub residuals: DVector<f64>,
    pub xtx_inv: DMatrix<f64>,
    pub condition_number: f64,
    pub warnings: Vec<String>,
}

fn unit_scaled(x: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let scales: Vec<f64> = x
        .column_iter()
        .map(|c| {
            let n = c.norm();
            if n > 0.0 {
                n
            } else {
                1.0
            }
        })
        .collect();
    let mut xs = x.clone();
    for (j, s) in scales.iter().enumerate() {
        xs.column_mut(j).scale_mut(1.0 / s);
    }
    (xs, scales)
}

/// Singular values of the column-scaled matrix and the columns involved in any
/// numerically null direction.
fn rank_diagnostics(x: &DMatrix<f64>, names: &[String]) -> (f64, Vec<String>) {
    let (xs, _) = unit_scaled(x);
    let svd = xs.svd(false, true);
    let s = &svd.singular_values;
    let smax = s.max();
    let smin = s.min();
    let tol = smax * (x.nrows().max(x.ncols()) as f64) * f64::EPSILON;
    let mut involved = std::collections::BTreeSet::new();
    if smin <= tol {
        let vt = svd.v_t.as_ref().expect("requested right singular vectors");
        for (k, &sv) in s.iter().enumerate() {
            if sv <= tol {
                for j in 0..x.ncols() {
                    if vt[(k, j)].abs() > 1e-3 {
                        involved.insert(j);
                    }
                }
            }
        }
    }
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    (cond, involved.into_iter().map(|j| names[j].clone()).collect())
}

/// Fails with the collinear column names if the design is rank deficient.
pub fn check_rank(design: &DesignMatrix) -> Result<f64> {
    if design.n_rows() <= design.n_cols() {
        return Err(Error::Numerical(format!(
            "{} observations for {} columns",
            design.n_rows(),
            design.n_cols()
        )));
    }
    let (cond, collinear) = rank_diagnostics(&design.x, &design.names());
    if !collinear.is_empty() {
        return Err(Error::RankDeficient { columns: collinear });
    }
    Ok(cond)
}

/// Least squares by Householder QR on unit-norm scaled columns.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<OlsFit> {
    let (n, p) = x.shape();
    if n <= p {
        return Err(Error::Numerical(format!("{n} observations for {p} columns")));
    }
    let (cond, collinear) = rank_diagnostics(x, names);
    if !collinear.is_empty() {
        return Err(Error::RankDeficient { columns: collinear });
    }
    let mut warnings = Vec::new();
    if cond > CONDITION_WARN {
        let msg = format!("design is near-singular: condition number {cond:.3e}");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let (xs, scales) = unit_scaled(x);
    let qr = xs.qr();
    let r = qr.r();
    let qty = qr.q().transpose() * y;
    let beta_s = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Numerical("singular triangular factor".into()))?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::Numerical("singular triangular factor".into()))?;
    let mut xtx_inv = &r_inv * r_inv.transpose();
    let mut beta = beta_s;
    for j in 0..p {
        beta[j] /= scales[j];
        for k in 0..p {
            xtx_inv[(j, k)] /= scales[j] * scales[k];
        }
    }
    let residuals = y - x * &beta;
    Ok(OlsFit {
        coefficients: beta,
        residuals,
        xtx_inv,
        condition_number: cond,
        warnings,
    })
}

/// floor(4·(T̄/100)^(2/9)) with T̄ the mean entity length.
pub fn default_hac_lags(entities: &EntityIndex) -> usize {
    let n = entities.n_entities().max(1) as f64;
    let t_bar = entities.n_rows() as f64 / n;
    (4.0 * (t_bar / 100.0).powf(2.0 / 9.0)).floor() as usize
}

/// Newey-West sandwich B·S·B with B = (X'X)^{-1}.
///
/// Autocovariances are accumulated within entities only, pairing rows whose
/// time positions differ by 1..=L; gaps in an entity's periods therefore
/// contribute no term (as if the missing score were zero).
pub fn newey_west(
    x: &DMatrix<f64>,
    residuals: &DVector<f64>,
    xtx_inv: &DMatrix<f64>,
    entities: &EntityIndex,
    time: &[i64],
    lags: usize,
) -> Result<DMatrix<f64>> {
    let shortest = entities.lengths().min().unwrap_or(0);
    if lags >= shortest && lags > 0 {
        return Err(Error::Numerical(format!(
            "HAC lag {lags} is not below the shortest entity length {shortest}"
        )));
    }
    let p = x.ncols();
    let mut s = DMatrix::<f64>::zeros(p, p);
    let score = |i: usize| -> DVector<f64> { x.row(i).transpose() * residuals[i] };
    for r in &entities.ranges {
        let scores: Vec<DVector<f64>> = r.clone().map(score).collect();
        for (a, ga) in scores.iter().enumerate() {
            s.ger(1.0, ga, ga, 1.0);
            for b in (0..a).rev() {
                let l = time[r.start + a] - time[r.start + b];
                if l <= 0 {
                    return Err(Error::Data("rows are not time-ordered within an entity".into()));
                }
                if l as usize > lags {
                    break;
                }
                let w = 1.0 - l as f64 / (lags as f64 + 1.0);
                let gb = &scores[b];
                s.ger(w, ga, gb, 1.0);
                s.ger(w, gb, ga, 1.0);
            }
        }
    }
    let cov = xtx_inv * s * xtx_inv;
    Ok((&cov + cov.transpose()) * 0.5)
}

/// σ²(X'X)^{-1} with σ² = e'e/(n−p).
pub fn classical_covariance(fit: &OlsFit) -> DMatrix<f64> {
    let n = fit.residuals.len();
    let p = fit.coefficients.len();
    let sigma2 = fit.residuals.norm_squared() / (n - p) as f64;
    &fit.xtx_inv * sigma2
}

/// Panel Durbin-Watson: squared first differences within entities over the
/// total residual sum of squares.
pub fn durbin_watson(residuals: &[f64], entities: &EntityIndex) -> f64 {
    let num = stable_sum(
        entities
            .ranges
            .iter()
            .flat_map(|r| (r.start + 1..r.end).map(move |i| (residuals[i] - residuals[i - 1]).powi(2))),
    );
    let den = stable_sum(residuals.iter().map(|e| e * e));
    num / den
}

/// 1 − (1−R²)(n−1)/(n−p−1), `n_params` excluding the intercept.
pub fn adjusted_r2(residuals: &[f64], y: &[f64], n_params: usize) -> f64 {
    let n = y.len() as f64;
    let r2 = r_squared(residuals, y);
    1.0 - (1.0 - r2) * (n - 1.0) / (n - n_params as f64 - 1.0)
}

pub fn r_squared(residuals: &[f64], y: &[f64]) -> f64 {
    let m = stable_mean(y);
    let tss = stable_sum(y.iter().map(|v| (v - m).powi(2)));
    let rss = stable_sum(residuals.iter().map(|e| e * e));
    1.0 - rss / tss
}

/// Two-sided normal p-value.
pub fn p_value(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub label: String,
    pub kind: ColumnKind,
    pub estimate: f64,
    pub std_error: f64,
    pub z: f64,
    pub p_value: f64,
    pub stars: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub spec: ModelSpec,
    pub estimator: Estimator,
    pub hac_lags: usize,
    pub coefficients: Vec<Coefficient>,
    /// Row-major, ordered like `coefficients`.
    pub hac_covariance: Vec<Vec<f64>>,
    pub r2: f64,
    pub adjusted_r2: f64,
    pub n_obs: usize,
    pub n_entities: usize,
    pub durbin_watson: f64,
    pub condition_number: f64,
    pub rows: Vec<(ZoneId, Period)>,
    pub residuals: Vec<f64>,
    pub moderators: BTreeMap<String, ModeratorInfo>,
    /// Uncentered interconnector value per zone in the sample.
    pub zone_ic: BTreeMap<ZoneId, f64>,
    pub warnings: Vec<String>,
}

impl ModelResult {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.coefficients.iter().position(|c| c.name == name)
    }

    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    pub fn estimate(&self, name: &str) -> Option<f64> {
        self.coefficient(name).map(|c| c.estimate)
    }

    pub fn covariance(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.hac_covariance[self.index(a)?][self.index(b)?])
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let p = self.coefficients.len();
        DMatrix::from_fn(p, p, |i, j| self.hac_covariance[i][j])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    /// Regression table: estimate with stars, standard error in parentheses.
    pub fn to_table(&self) -> String {
        let width = self.coefficients.iter().map(|c| c.label.len()).max().unwrap_or(10).max(24);
        let mut out = String::new();
        let title = format!(
            "{} value factor ({}, {})",
            self.spec.technology.label(),
            self.estimator.as_str().to_uppercase(),
            self.spec.aggregation.as_str()
        );
        let _ = writeln!(out, "{title}");
        let _ = writeln!(out, "{}", "-".repeat(width + 16));
        for c in &self.coefficients {
            let _ = writeln!(out, "{:<width$}  {:>10.3}{:<3}", c.label, c.estimate, c.stars);
            let _ = writeln!(out, "{:<width$}  {:>10}", "", format!("({:.3})", c.std_error));
        }
        let _ = writeln!(out, "{}", "-".repeat(width + 16));
        let _ = writeln!(out, "{:<width$}  {:>10}", "Observations", self.n_obs);
        let _ = writeln!(out, "{:<width$}  {:>10}", "Zones", self.n_entities);
        let _ = writeln!(out, "{:<width$}  {:>10.3}", "Adjusted R²", self.adjusted_r2);
        let _ = writeln!(out, "{:<width$}  {:>10.3}", "Durbin-Watson", self.durbin_watson);
        let _ = writeln!(out, "{:<width$}  {:>10}", "HAC lags", self.hac_lags);
        let _ = writeln!(out, "Newey-West HAC standard errors in parentheses.");
        let _ = writeln!(out, "*** p<0.01, ** p<0.05, * p<0.1");
        out
    }
}

/// Keeps the within-type columns and demeans them (and y) once more.
pub fn fixed_effects_design(design: &DesignMatrix, y: &DVector<f64>) -> (DesignMatrix, DVector<f64>) {
    let keep: Vec<usize> = (0..design.n_cols())
        .filter(|&j| design.columns[j].kind.is_within_type())
        .collect();
    let idx = &design.entities;
    let mut cols = Vec::with_capacity(keep.len());
    for &j in &keep {
        let c: Vec<f64> = design.x.column(j).iter().copied().collect();
        cols.push(within_between(&c, idx).0);
    }
    let n = design.n_rows();
    let x = DMatrix::from_fn(n, keep.len(), |i, j| cols[j][i]);
    let yv: Vec<f64> = y.iter().copied().collect();
    let yd = DVector::from_vec(within_between(&yv, idx).0);
    (
        DesignMatrix {
            columns: keep.iter().map(|&j| design.columns[j].clone()).collect(),
            x,
            rows: design.rows.clone(),
            entities: idx.clone(),
        },
        yd,
    )
}

/// Fits `spec.estimator` on an assembled design.
pub fn fit(spec: &ModelSpec, panel: &PanelDesign) -> Result<ModelResult> {
    let (design, y) = match spec.estimator {
        Estimator::Rewb => (panel.design.clone(), panel.y.clone()),
        Estimator::Fe => fixed_effects_design(&panel.design, &panel.y),
    };
    let names = design.names();
    let ols_fit = ols(&design.x, &y, &names)?;
    let mut warnings = panel.warnings.clone();
    warnings.extend(ols_fit.warnings.iter().cloned());

    let shortest = design.entities.lengths().min().unwrap_or(0);
    let lags = match spec.hac_lags {
        Some(l) => l,
        None => {
            let l = default_hac_lags(&design.entities);
            let cap = shortest.saturating_sub(1);
            if l > cap {
                warnings.push(format!("default HAC lag {l} capped at {cap} by the shortest entity"));
            }
            l.min(cap)
        }
    };
    let cov = newey_west(&design.x, &ols_fit.residuals, &ols_fit.xtx_inv, &design.entities, &design.time_index(), lags)?;

    let coefficients = design
        .columns
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let estimate = ols_fit.coefficients[j];
            let std_error = cov[(j, j)].max(0.0).sqrt();
            let z = estimate / std_error;
            let p = p_value(z);
            Coefficient {
                name: c.name.clone(),
                label: c.label.clone(),
                kind: c.kind,
                estimate,
                std_error,
                z,
                p_value: p,
                stars: stars(p).to_string(),
            }
        })
        .collect::<Vec<_>>();

    let resid: Vec<f64> = ols_fit.residuals.iter().copied().collect();
    let yv: Vec<f64> = y.iter().copied().collect();
    let n_params = match spec.estimator {
        Estimator::Rewb => design.n_cols() - 1,
        Estimator::Fe => design.n_cols(),
    };
    let p = design.n_cols();
    Ok(ModelResult {
        spec: spec.clone(),
        estimator: spec.estimator,
        hac_lags: lags,
        coefficients,
        hac_covariance: (0..p).map(|i| (0..p).map(|j| cov[(i, j)]).collect()).collect(),
        r2: r_squared(&resid, &yv),
        adjusted_r2: adjusted_r2(&resid, &yv, n_params),
        n_obs: design.n_rows(),
        n_entities: design.entities.n_entities(),
        durbin_watson: durbin_watson(&resid, &design.entities),
        condition_number: ols_fit.condition_number,
        rows: design.rows.clone(),
        residuals: resid,
        moderators: panel.moderators.clone(),
        zone_ic: panel.zone_ic.clone(),
        warnings,
    })
}

/// Assembles the design for `spec` and fits it.
pub fn fit_metrics(spec: &ModelSpec, metrics: &MetricsTable, weights: &WeightsSet) -> Result<ModelResult> {
    let panel = assemble_design(spec, metrics, weights)?;
    fit(spec, &panel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("x{j}")).collect()
    }

    /// Normal equations solved by Gaussian elimination with partial pivoting.
    fn normal_equations_oracle(x: &DMatrix<f64>, y: &DVector<f64>) -> Vec<f64> {
        let (n, p) = x.shape();
        let mut a = vec![vec![0.0; p + 1]; p];
        for i in 0..p {
            for j in 0..p {
                a[i][j] = (0..n).map(|r| x[(r, i)] * x[(r, j)]).sum();
            }
            a[i][p] = (0..n).map(|r| x[(r, i)] * y[r]).sum();
        }
        for c in 0..p {
            let piv = (c..p).max_by(|&u, &v| a[u][c].abs().partial_cmp(&a[v][c].abs()).unwrap()).unwrap();
            a.swap(c, piv);
            for r in c + 1..p {
                let f = a[r][c] / a[c][c];
                for k in c..=p {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
        let mut b = vec![0.0; p];
        for c in (0..p).rev() {
            let s: f64 = (c + 1..p).map(|k| a[c][k] * b[k]).sum();
            b[c] = (a[c][p] - s) / a[c][c];
        }
        b
    }

    #[test]
    fn ols_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let x = DMatrix::from_fn(10, 3, |_, _| rng.random_range(-1.0..1.0));
            let y = DVector::from_fn(10, |_, _| rng.random_range(-1.0..1.0));
            let fit = ols(&x, &y, &names(3)).unwrap();
            let oracle = normal_equations_oracle(&x, &y);
            for j in 0..3 {
                assert!((fit.coefficients[j] - oracle[j]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn exact_linear_recovery() {
        let x = DMatrix::from_fn(8, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let y = DVector::from_fn(8, |i, _| 2.0 - 0.5 * i as f64);
        let fit = ols(&x, &y, &names(2)).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert!((fit.coefficients[1] + 0.5).abs() < 1e-12);
        assert!(fit.residuals.amax() < 1e-12);
    }

    #[test]
    fn orthogonal_response_has_zero_slopes() {
        // slope column is orthogonal to y after the intercept
        let x = DMatrix::from_row_slice(4, 2, &[1.0, -1.0, 1.0, 1.0, 1.0, -1.0, 1.0, 1.0]);
        let y = DVector::from_row_slice(&[1.0, 1.0, 3.0, 3.0]);
        let fit = ols(&x, &y, &names(2)).unwrap();
        assert!(fit.coefficients[1].abs() < 1e-14);
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn collinear_columns_are_named() {
        let x = DMatrix::from_fn(6, 3, |i, j| match j {
            0 => 1.0,
            1 => i as f64,
            _ => 2.0 * i as f64,
        });
        let y = DVector::from_fn(6, |i, _| i as f64);
        match ols(&x, &y, &names(3)) {
            Err(Error::RankDeficient { columns }) => assert_eq!(columns, vec!["x1", "x2"]),
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn durbin_watson_cases() {
        let idx = EntityIndex::from_labels(&[0, 0, 0, 0, 1, 1]);
        // constant within entity, zero mean across
        assert_eq!(durbin_watson(&[1.0, 1.0, 1.0, 1.0, -2.0, -2.0], &idx), 0.0);
        let idx = EntityIndex::from_labels(&[0; 6]);
        let alt = [1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
        assert!((durbin_watson(&alt, &idx) - 4.0 * 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn adjusted_r2_by_hand() {
        let y = [1.0, 2.0, 3.0, 4.0, 5.0];
        let e = [0.1, -0.2, 0.1, 0.0, 0.0];
        // TSS = 10, RSS = 0.06, R² = 0.994, adj = 1 − 0.006·4/3 = 0.992
        assert!((adjusted_r2(&e, &y, 1) - 0.992).abs() < 1e-12);
        assert_eq!(adjusted_r2(&[0.0; 5], &y, 2), 1.0);
        assert!(adjusted_r2(&e, &y, 2) < r_squared(&e, &y));
    }

    #[test]
    fn star_thresholds() {
        assert_eq!(stars(0.009), "***");
        assert_eq!(stars(0.01), "**");
        assert_eq!(stars(0.049), "**");
        assert_eq!(stars(0.05), "*");
        assert_eq!(stars(0.1), "");
        let p = p_value(1.959963984540054);
        assert!((p - 0.05).abs() < 1e-9, "{p}");
    }

    #[test]
    fn lag_must_be_shorter_than_entities() {
        let x = DMatrix::from_element(4, 1, 1.0);
        let e = DVector::from_element(4, 0.5);
        let idx = EntityIndex::from_labels(&[0, 0, 1, 1]);
        let inv = DMatrix::from_element(1, 1, 0.25);
        assert!(newey_west(&x, &e, &inv, &idx, &[0, 1, 0, 1], 2).is_err());
        assert!(newey_west(&x, &e, &inv, &idx, &[0, 1, 0, 1], 1).is_ok());
    }

    #[test]
    fn default_lag_rule() {
        let idx = EntityIndex::from_labels(&[0; 100]);
        assert_eq!(default_hac_lags(&idx), 4);
        let labels: Vec<usize> = (0..30).flat_map(|e| std::iter::repeat_n(e, 92)).collect();
        assert_eq!(default_hac_lags(&EntityIndex::from_labels(&labels)), 3);
    }
}
