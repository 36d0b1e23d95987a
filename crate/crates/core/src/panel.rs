//! Regression design for the between-within panel model.
//!
//! Every time-varying regressor is split into an entity-demeaned ("within")
//! column and a grand-mean-centered entity mean ("between") column, computed
//! on the realized, possibly unbalanced, sample. Interactions of domestic
//! penetration with controls come in two flavours: lower-level (product of two
//! within columns, demeaned again) and cross-level (within column times a
//! centered entity-level moderator).

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::ops::Range;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{Control, ModelSpec};
use crate::metrics::MetricsTable;
use crate::spatial::{spatial_lag, WeightsSet};
use crate::types::{stable_mean, stable_sum, Period, Technology, ZoneId};

/// Columns whose largest absolute value falls below this fraction of the
/// source variable's scale are treated as having zero variance.
const ZERO_VARIANCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Within,
    Between,
    TimeInvariant,
    LowerInteraction,
    CrossInteraction,
    Intercept,
}

impl ColumnKind {
    /// Columns identified from within-entity variation only; these survive
    /// the fixed-effects transformation.
    pub fn is_within_type(self) -> bool {
        matches!(
            self,
            ColumnKind::Within | ColumnKind::LowerInteraction | ColumnKind::CrossInteraction
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub label: String,
    pub kind: ColumnKind,
}

/// One complete-case zone-period row before transformation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelObservation {
    pub zone: ZoneId,
    pub period: Period,
    pub y: f64,
    pub regressors: BTreeMap<String, f64>,
}

/// Contiguous row ranges per entity; rows are sorted by (zone, period).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EntityIndex {
    pub zones: Vec<ZoneId>,
    pub ranges: Vec<Range<usize>>,
}

impl EntityIndex {
    /// Groups consecutive equal keys. Callers must pass keys sorted by entity.
    pub fn from_sorted<T: PartialEq + Clone + Into<ZoneId>>(keys: &[T]) -> Self {
        let mut idx = EntityIndex::default();
        let mut start = 0;
        for i in 1..=keys.len() {
            if i == keys.len() || keys[i] != keys[start] {
                if i > start {
                    idx.zones.push(keys[start].clone().into());
                    idx.ranges.push(start..i);
                }
                start = i;
            }
        }
        idx
    }

    /// Index from a per-row entity label; equal labels must be contiguous.
    pub fn from_labels(labels: &[usize]) -> Self {
        let keys: Vec<ZoneId> = labels.iter().map(|l| ZoneId(format!("E{l:06}"))).collect();
        Self::from_sorted(&keys)
    }

    pub fn n_entities(&self) -> usize {
        self.ranges.len()
    }

    pub fn n_rows(&self) -> usize {
        self.ranges.last().map_or(0, |r| r.end)
    }

    pub fn lengths(&self) -> impl Iterator<Item = usize> + '_ {
        self.ranges.iter().map(|r| r.len())
    }
}

/// Per-entity means over each entity's realized rows.
pub fn entity_means(x: &[f64], idx: &EntityIndex) -> Vec<f64> {
    idx.ranges.iter().map(|r| stable_mean(&x[r.clone()])).collect()
}

/// Splits `x` into the within component and the (row-broadcast) entity mean.
pub fn within_between(x: &[f64], idx: &EntityIndex) -> (Vec<f64>, Vec<f64>) {
    let means = entity_means(x, idx);
    let mut within = vec![0.0; x.len()];
    let mut between = vec![0.0; x.len()];
    for (r, m) in idx.ranges.iter().zip(&means) {
        if r.len() == 1 {
            log::debug!("single-period entity: within component is zero");
        }
        for i in r.clone() {
            within[i] = x[i] - m;
            between[i] = *m;
        }
    }
    (within, between)
}

/// Subtracts the grand mean over rows. Returns the centered values and the mean.
pub fn center(x: &[f64]) -> (Vec<f64>, f64) {
    let m = stable_mean(x);
    (x.iter().map(|v| v - m).collect(), m)
}

/// Demean both variables within entities, multiply, and demean the product again.
pub fn lower_level_interaction(x: &[f64], z: &[f64], idx: &EntityIndex) -> Vec<f64> {
    let (xw, _) = within_between(x, idx);
    let (zw, _) = within_between(z, idx);
    let product: Vec<f64> = xw.iter().zip(&zw).map(|(a, b)| a * b).collect();
    within_between(&product, idx).0
}

/// Elementwise product of a within column with a centered entity-level moderator.
pub fn cross_level_interaction(x_within: &[f64], m_centered: &[f64]) -> Vec<f64> {
    x_within.iter().zip(m_centered).map(|(a, b)| a * b).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub columns: Vec<Column>,
    pub x: DMatrix<f64>,
    pub rows: Vec<(ZoneId, Period)>,
    pub entities: EntityIndex,
}

impl DesignMatrix {
    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.x.ncols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    /// Per-row time position for lag arithmetic.
    pub fn time_index(&self) -> Vec<i64> {
        self.rows.iter().map(|(_, p)| p.ordinal()).collect()
    }

    /// CSV dump with header `zone,period,y,<columns>`.
    pub fn write_csv(&self, y: &DVector<f64>, path: &Path) -> Result<()> {
        let mut text = String::from("zone,period,y");
        for c in &self.columns {
            text.push(',');
            text.push_str(&c.name);
        }
        text.push('\n');
        for (i, (zone, period)) in self.rows.iter().enumerate() {
            text.push_str(&format!("{zone},{period},{}", y[i]));
            for j in 0..self.n_cols() {
                text.push_str(&format!(",{}", self.x[(i, j)]));
            }
            text.push('\n');
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(text.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }
}

/// Location and spread of a moderator column, on the centered scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeratorInfo {
    /// Mean subtracted during centering (0 for within columns).
    pub grand_mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone)]
pub struct PanelDesign {
    pub design: DesignMatrix,
    pub y: DVector<f64>,
    pub observations: Vec<PanelObservation>,
    /// Keyed by moderator column name, e.g. `ic.between`.
    pub moderators: BTreeMap<String, ModeratorInfo>,
    /// Raw (uncentered) interconnector value per zone in the sample.
    pub zone_ic: BTreeMap<ZoneId, f64>,
    pub warnings: Vec<String>,
}

fn dom(t: Technology) -> String {
    format!("dom_{t}")
}

fn nbr(t: Technology) -> String {
    format!("nbr_{t}")
}

/// Raw variable name and table label of a regressor.
fn raw_label(name: &str, tech: Technology) -> String {
    let cap = |t: &str| {
        let mut c = t.chars();
        c.next().map(|f| f.to_uppercase().collect::<String>() + c.as_str()).unwrap_or_default()
    };
    if let Some(t) = name.strip_prefix("dom_") {
        return format!("Domestic {t}");
    }
    if let Some(t) = name.strip_prefix("nbr_") {
        return format!("Neighboring {t}");
    }
    match name {
        "hydro_pumped" => "Hydro pumped storage capacity".into(),
        "hydro_reservoir" => "Hydro reservoir capacity".into(),
        "fuel_ratio" => "Clean gas-coal price ratio".into(),
        "load_corr" => format!("{}-load correlation", cap(tech.as_str())),
        "cov" => format!("{} coefficient of variation", cap(tech.as_str())),
        "ic" => "Interconnector capacity".into(),
        other => other.to_string(),
    }
}

struct Builder {
    names: Vec<Column>,
    values: Vec<Vec<f64>>,
    /// scale of the source variable, for the zero-variance test
    scales: Vec<f64>,
    /// whether the column derives from a control (eligible for dropping)
    droppable: Vec<bool>,
}

impl Builder {
    fn push(&mut self, name: String, label: String, kind: ColumnKind, v: Vec<f64>, scale: f64, droppable: bool) {
        self.names.push(Column { name, label, kind });
        self.values.push(v);
        self.scales.push(scale);
        self.droppable.push(droppable);
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |a, b| a.max(b.abs()))
}

/// Builds the complete-case design for `spec` from a metrics table.
///
/// Neighboring penetration is computed from every zone with data, including
/// zones that are themselves outside the estimation sample.
pub fn assemble_design(spec: &ModelSpec, metrics: &MetricsTable, weights: &WeightsSet) -> Result<PanelDesign> {
    let tech = spec.technology;
    let cross = tech.other();
    let terms = &spec.terms;
    let mut warnings = Vec::new();

    let mut pen: BTreeMap<Technology, BTreeMap<(ZoneId, Period), f64>> = BTreeMap::new();
    let mut y_map = BTreeMap::new();
    let mut cov_map = BTreeMap::new();
    let mut corr_map = BTreeMap::new();
    for m in &metrics.metrics {
        let key = (m.zone.clone(), m.period);
        if let Some(p) = m.penetration {
            pen.entry(m.technology).or_default().insert(key.clone(), p);
        }
        if m.technology == tech {
            if let Some(v) = m.vf {
                y_map.insert(key.clone(), v);
            }
            if let Some(v) = m.cov {
                cov_map.insert(key.clone(), v);
            }
            if let Some(v) = m.load_corr {
                corr_map.insert(key, v);
            }
        }
    }
    let controls: BTreeMap<(ZoneId, Period), _> = metrics
        .controls
        .iter()
        .map(|c| ((c.zone.clone(), c.period), c))
        .collect();
    let empty = BTreeMap::new();
    let pen_own = pen.get(&tech).unwrap_or(&empty);
    let pen_cross = pen.get(&cross).unwrap_or(&empty);

    // zone-technology inclusion by sample-average penetration
    let mut included = BTreeSet::new();
    let mut by_zone: BTreeMap<&ZoneId, Vec<f64>> = BTreeMap::new();
    for ((z, _), v) in pen_own {
        by_zone.entry(z).or_default().push(*v);
    }
    for (z, vals) in by_zone {
        let avg = stable_mean(&vals);
        if avg >= spec.thresholds.min_avg_penetration {
            included.insert(z.clone());
        } else {
            warnings.push(format!(
                "zone {z} excluded from {tech} model: average penetration {avg:.4} below {}",
                spec.thresholds.min_avg_penetration
            ));
        }
    }
    let omitted: BTreeSet<&ZoneId> = spec.exclude_zones.iter().collect();

    let (lag_own, _) = spatial_lag(weights, pen_own);
    let (lag_cross, _) = spatial_lag(weights, pen_cross);

    let mut obs = Vec::new();
    let mut missing_lag = 0usize;
    for (key, &y) in &y_map {
        let (zone, period) = key;
        if !included.contains(zone) || omitted.contains(zone) {
            continue;
        }
        let mut r = BTreeMap::new();
        let mut need = |name: String, v: Option<f64>| -> bool {
            match v {
                Some(v) if v.is_finite() => {
                    r.insert(name, v);
                    true
                }
                _ => false,
            }
        };
        let mut ok = need(dom(tech), pen_own.get(key).copied());
        if terms.spatial {
            let v = lag_own.get(key).copied();
            if v.is_none() {
                missing_lag += 1;
            }
            ok &= need(nbr(tech), v);
        }
        if terms.cross_technology {
            ok &= need(dom(cross), pen_cross.get(key).copied());
            if terms.spatial {
                ok &= need(nbr(cross), lag_cross.get(key).copied());
            }
        }
        let c = controls.get(key);
        for control in &terms.controls {
            let v = match control {
                Control::HydroPumped => c.and_then(|c| c.hydro_pumped),
                Control::HydroReservoir => c.and_then(|c| c.hydro_reservoir),
                Control::FuelRatio => c.and_then(|c| c.fuel_ratio),
                Control::LoadCorrelation => corr_map.get(key).copied(),
                Control::Variability => cov_map.get(key).copied(),
            };
            ok &= need(control.name().to_string(), v);
        }
        if terms.interconnector {
            ok &= need("ic".into(), metrics.interconnectors.normalized(zone));
        }
        if ok {
            obs.push(PanelObservation {
                zone: zone.clone(),
                period: *period,
                y,
                regressors: r,
            });
        }
    }
    if missing_lag > 0 {
        warnings.push(format!("{missing_lag} observations without a defined spatial lag were excluded"));
    }
    if obs.is_empty() {
        return Err(Error::Data(format!("no complete-case observations for the {tech} model")));
    }

    let keys: Vec<ZoneId> = obs.iter().map(|o| o.zone.clone()).collect();
    let idx = EntityIndex::from_sorted(&keys);
    for (z, r) in idx.zones.iter().zip(&idx.ranges) {
        if r.len() < 2 {
            warnings.push(format!("zone {z} has a single period; its within components are zero"));
        }
    }
    let raw = |name: &str| -> Vec<f64> { obs.iter().map(|o| o.regressors[name]).collect() };

    let mut b = Builder {
        names: Vec::new(),
        values: Vec::new(),
        scales: Vec::new(),
        droppable: Vec::new(),
    };
    let mut moderators = BTreeMap::new();
    let mut within_cache: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut between_cache: BTreeMap<String, Vec<f64>> = BTreeMap::new();

    let mut add_within_between = |b: &mut Builder,
                                  moderators: &mut BTreeMap<String, ModeratorInfo>,
                                  name: &str,
                                  with_between: bool,
                                  droppable: bool| {
        let x = raw(name);
        let scale = max_abs(&x).max(f64::MIN_POSITIVE);
        let (w, bt) = within_between(&x, &idx);
        let label = raw_label(name, tech);
        b.push(name.to_string(), label.clone(), ColumnKind::Within, w.clone(), scale, droppable);
        moderators.insert(
            name.to_string(),
            ModeratorInfo {
                grand_mean: 0.0,
                min: w.iter().cloned().fold(f64::INFINITY, f64::min),
                max: w.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            },
        );
        within_cache.insert(name.to_string(), w);
        if with_between {
            let (c, gm) = center(&bt);
            let bname = format!("{name}.between");
            moderators.insert(
                bname.clone(),
                ModeratorInfo {
                    grand_mean: gm,
                    min: c.iter().cloned().fold(f64::INFINITY, f64::min),
                    max: c.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                },
            );
            b.push(bname.clone(), format!("{label} (zone average)"), ColumnKind::Between, c.clone(), scale, droppable);
            between_cache.insert(bname, c);
        }
    };

    add_within_between(&mut b, &mut moderators, &dom(tech), true, false);
    if terms.spatial {
        add_within_between(&mut b, &mut moderators, &nbr(tech), true, false);
    }
    if terms.cross_technology {
        add_within_between(&mut b, &mut moderators, &dom(cross), true, true);
        if terms.spatial {
            add_within_between(&mut b, &mut moderators, &nbr(cross), true, true);
        }
    }
    for control in &terms.controls {
        add_within_between(&mut b, &mut moderators, control.name(), control.has_between(), true);
    }
    let mut zone_ic = BTreeMap::new();
    if terms.interconnector {
        let x = raw("ic");
        for o in &obs {
            zone_ic.insert(o.zone.clone(), o.regressors["ic"]);
        }
        let (c, gm) = center(&x);
        let scale = max_abs(&x).max(f64::MIN_POSITIVE);
        moderators.insert(
            "ic.between".into(),
            ModeratorInfo {
                grand_mean: gm,
                min: c.iter().cloned().fold(f64::INFINITY, f64::min),
                max: c.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            },
        );
        b.push(
            "ic.between".into(),
            "Interconnector capacity (zone average)".into(),
            ColumnKind::TimeInvariant,
            c.clone(),
            scale,
            false,
        );
        between_cache.insert("ic.between".into(), c);
    }

    let own = dom(tech);
    let own_w = within_cache[&own].clone();
    let own_label = raw_label(&own, tech);
    let own_scale = max_abs(&raw(&own)).max(f64::MIN_POSITIVE);
    if terms.control_interactions {
        for control in &terms.controls {
            let z = raw(control.name());
            let v = lower_level_interaction(&raw(&own), &z, &idx);
            let scale = own_scale * max_abs(&z).max(f64::MIN_POSITIVE);
            b.push(
                format!("{own}*{}", control.name()),
                format!("{own_label}*{}", raw_label(control.name(), tech)),
                ColumnKind::LowerInteraction,
                v,
                scale,
                true,
            );
        }
        for control in terms.controls.iter().filter(|c| c.has_between()) {
            let m_name = format!("{}.between", control.name());
            let m = &between_cache[&m_name];
            let scale = own_scale * max_abs(&raw(control.name())).max(f64::MIN_POSITIVE);
            b.push(
                format!("{own}*{m_name}"),
                format!("{own_label}*{} (zone average)", raw_label(control.name(), tech)),
                ColumnKind::CrossInteraction,
                cross_level_interaction(&own_w, m),
                scale,
                true,
            );
        }
    }
    if terms.interconnector {
        let m = between_cache["ic.between"].clone();
        let ic_scale = max_abs(&raw("ic")).max(f64::MIN_POSITIVE);
        b.push(
            format!("{own}*ic.between"),
            format!("{own_label}*Interconnector capacity (zone average)"),
            ColumnKind::CrossInteraction,
            cross_level_interaction(&own_w, &m),
            own_scale * ic_scale,
            false,
        );
        if terms.spatial {
            let n = nbr(tech);
            let n_scale = max_abs(&raw(&n)).max(f64::MIN_POSITIVE);
            b.push(
                format!("{n}*ic.between"),
                format!("{}*Interconnector capacity (zone average)", raw_label(&n, tech)),
                ColumnKind::CrossInteraction,
                cross_level_interaction(&within_cache[&n], &m),
                n_scale * ic_scale,
                false,
            );
        }
    }
    b.push(
        "intercept".into(),
        "Intercept".into(),
        ColumnKind::Intercept,
        vec![1.0; obs.len()],
        1.0,
        false,
    );

    // zero-variance control columns are dropped
    let mut keep = Vec::new();
    for j in 0..b.names.len() {
        if b.droppable[j] && max_abs(&b.values[j]) <= ZERO_VARIANCE_TOL * b.scales[j] {
            let msg = format!("column {} has zero variance and was excluded", b.names[j].name);
            log::warn!("{msg}");
            warnings.push(msg);
            moderators.remove(&b.names[j].name);
        } else {
            keep.push(j);
        }
    }
    let n = obs.len();
    let x = DMatrix::from_fn(n, keep.len(), |i, j| b.values[keep[j]][i]);
    let columns: Vec<Column> = keep.iter().map(|&j| b.names[j].clone()).collect();
    let y = DVector::from_iterator(n, obs.iter().map(|o| o.y));
    let design = DesignMatrix {
        columns,
        x,
        rows: obs.iter().map(|o| (o.zone.clone(), o.period)).collect(),
        entities: idx,
    };
    crate::estimate::check_rank(&design)?;
    Ok(PanelDesign {
        design,
        y,
        observations: obs,
        moderators,
        zone_ic,
        warnings,
    })
}

/// Sum of squares helper used by tests and diagnostics.
pub fn inner(a: &[f64], b: &[f64]) -> f64 {
    stable_sum(a.iter().zip(b).map(|(x, y)| x * y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx2() -> EntityIndex {
        EntityIndex::from_labels(&[0, 0, 1, 1, 1])
    }

    #[test]
    fn two_point_decomposition() {
        let idx = EntityIndex::from_labels(&[0, 0]);
        let (w, b) = within_between(&[1.0, 3.0], &idx);
        assert_eq!(w, vec![-1.0, 1.0]);
        assert_eq!(b, vec![2.0, 2.0]);
    }

    #[test]
    fn constant_entity_has_no_within() {
        let (w, _) = within_between(&[5.0, 5.0, 1.0, 2.0, 3.0], &idx2());
        assert_eq!(&w[..2], &[0.0, 0.0]);
    }

    #[test]
    fn symmetric_interaction_cancels() {
        let idx = EntityIndex::from_labels(&[0, 0]);
        let v = lower_level_interaction(&[-1.0, 1.0], &[-1.0, 1.0], &idx);
        assert_eq!(v, vec![0.0, 0.0]);
        let v = lower_level_interaction(&[4.0, 9.0], &[2.0, 2.0], &idx);
        assert_eq!(v, vec![0.0, 0.0]);
    }

    #[test]
    fn cross_level_centering() {
        let xw = [0.3, -0.1, -0.2];
        assert_eq!(cross_level_interaction(&xw, &[0.0; 3]), vec![0.0; 3]);
        assert_eq!(cross_level_interaction(&xw, &[1.0; 3]), xw.to_vec());
    }

    #[test]
    fn entity_index_groups_runs() {
        let idx = EntityIndex::from_sorted(&[ZoneId::from("A"), "A".into(), "B".into()]);
        assert_eq!(idx.ranges, vec![0..2, 2..3]);
        assert_eq!(idx.n_rows(), 3);
    }
}
