//! Conditional marginal effects of penetration with delta-method intervals.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::ModelResult;
use crate::types::ZoneId;

pub const Z_95: f64 = 1.96;
pub const DEFAULT_GRID_POINTS: usize = 41;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalEffect {
    pub variable: String,
    pub moderator: String,
    /// Moderator value minus its grand mean.
    pub moderator_value: f64,
    pub effect: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl ConditionalEffect {
    fn new(variable: &str, moderator: &str, m: f64, effect: f64, variance: f64) -> Self {
        let se = variance.max(0.0).sqrt();
        ConditionalEffect {
            variable: variable.to_string(),
            moderator: moderator.to_string(),
            moderator_value: m,
            effect,
            std_error: se,
            ci_low: effect - Z_95 * se,
            ci_high: effect + Z_95 * se,
        }
    }
}

/// Value and delta-method variance of Σ w_k β_k.
pub fn linear_combination(result: &ModelResult, terms: &[(&str, f64)]) -> Result<(f64, f64)> {
    let mut idx = Vec::with_capacity(terms.len());
    for (name, w) in terms {
        let i = result
            .index(name)
            .ok_or_else(|| Error::Data(format!("coefficient '{name}' not in the model")))?;
        idx.push((i, *w));
    }
    let value: f64 = idx.iter().map(|&(i, w)| w * result.coefficients[i].estimate).sum();
    let mut var = 0.0;
    for &(i, wi) in &idx {
        for &(j, wj) in &idx {
            var += wi * wj * result.hac_covariance[i][j];
        }
    }
    Ok((value, var))
}

/// β_base + β_int·m with variance Var_b + m²·Var_i + 2m·Cov.
pub fn conditional_effect(result: &ModelResult, base: &str, interaction: &str, m: f64) -> Result<ConditionalEffect> {
    let (effect, var) = linear_combination(result, &[(base, 1.0), (interaction, m)])?;
    Ok(ConditionalEffect::new(base, interaction, m, effect, var))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneEffect {
    pub zone: ZoneId,
    pub ic: f64,
    pub ic_centered: f64,
    pub domestic: ConditionalEffect,
    pub neighboring: ConditionalEffect,
    pub combined: ConditionalEffect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneEffects {
    pub zones: Vec<ZoneEffect>,
    /// Combined effect at the sample-average interconnector capacity.
    pub combined_at_mean: ConditionalEffect,
    pub warnings: Vec<String>,
}

impl ZoneEffects {
    /// Long format: zone,ic,ic_centered,term,effect,std_error,ci_low,ci_high.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut text = String::from("zone,ic,ic_centered,term,effect,std_error,ci_low,ci_high\n");
        for z in &self.zones {
            for (term, e) in [("domestic", &z.domestic), ("neighboring", &z.neighboring), ("combined", &z.combined)] {
                text.push_str(&format!(
                    "{},{},{},{term},{},{},{},{}\n",
                    z.zone, z.ic, z.ic_centered, e.effect, e.std_error, e.ci_low, e.ci_high
                ));
            }
        }
        write_text(path, &text)
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(text.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

/// Domestic, neighboring and combined effects per zone, each evaluated at the
/// zone's interconnector capacity.
pub fn zone_effects(result: &ModelResult, ic: &BTreeMap<ZoneId, f64>) -> Result<ZoneEffects> {
    let t = result.spec.technology;
    let dom = format!("dom_{t}");
    let nbr = format!("nbr_{t}");
    let dom_i = format!("{dom}*ic.between");
    let nbr_i = format!("{nbr}*ic.between");
    let grand_mean = result
        .moderators
        .get("ic.between")
        .map(|m| m.grand_mean)
        .ok_or_else(|| Error::Data("model has no interconnector term".into()))?;
    let combined_at = |m: f64| -> Result<ConditionalEffect> {
        let (v, var) = linear_combination(result, &[(&dom, 1.0), (&dom_i, m), (&nbr, 1.0), (&nbr_i, m)])?;
        Ok(ConditionalEffect::new("combined", "ic.between", m, v, var))
    };
    let mut zones = Vec::new();
    let mut warnings = Vec::new();
    let sample: Vec<&ZoneId> = result.zone_ic.keys().collect();
    for zone in sample {
        let Some(&value) = ic.get(zone) else {
            let msg = format!("zone {zone} has no interconnector capacity; omitted");
            log::warn!("{msg}");
            warnings.push(msg);
            continue;
        };
        let m = value - grand_mean;
        zones.push(ZoneEffect {
            zone: zone.clone(),
            ic: value,
            ic_centered: m,
            domestic: conditional_effect(result, &dom, &dom_i, m)?,
            neighboring: conditional_effect(result, &nbr, &nbr_i, m)?,
            combined: combined_at(m)?,
        });
    }
    Ok(ZoneEffects {
        zones,
        combined_at_mean: combined_at(0.0)?,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Grid {
    /// Evenly spaced points over the observed moderator range.
    Range(usize),
    /// Explicit centered moderator values.
    Values(Vec<f64>),
}

impl Default for Grid {
    fn default() -> Self {
        Grid::Range(DEFAULT_GRID_POINTS)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectCurve {
    pub variable: String,
    pub moderator: String,
    pub interaction: String,
    pub grand_mean: f64,
    pub points: Vec<ConditionalEffect>,
    /// Centered moderator value where the effect is zero.
    pub root: Option<f64>,
    /// Whether the root lies inside the grid.
    pub crosses_zero: bool,
}

/// Effect of domestic penetration (and, for interconnector capacity, of
/// neighboring penetration) across moderator grids.
///
/// `moderators` are variable stems like `hydro_reservoir` or `ic`. The
/// cross-level interaction is used when present, else the lower-level one.
pub fn moderator_curves(result: &ModelResult, moderators: &[&str], grid: &Grid) -> Result<Vec<EffectCurve>> {
    let t = result.spec.technology;
    let mut curves = Vec::new();
    for &stem in moderators {
        let mut variables = vec![format!("dom_{t}")];
        if stem == "ic" {
            variables.push(format!("nbr_{t}"));
        }
        for var in variables {
            let cross = format!("{stem}.between");
            let (moderator, interaction) = if result.index(&format!("{var}*{cross}")).is_some() {
                (cross.clone(), format!("{var}*{cross}"))
            } else if result.index(&format!("{var}*{stem}")).is_some() {
                (stem.to_string(), format!("{var}*{stem}"))
            } else {
                if result.index(&var).is_some() {
                    log::warn!("no interaction of {var} with {stem}; curve skipped");
                }
                continue;
            };
            let info = result.moderators.get(&moderator).copied();
            let values = match grid {
                Grid::Values(v) => v.clone(),
                Grid::Range(n) => {
                    let info = info.ok_or_else(|| Error::Data(format!("no range for moderator {moderator}")))?;
                    let n = (*n).max(1);
                    if n == 1 {
                        vec![0.0]
                    } else {
                        (0..n)
                            .map(|k| info.min + (info.max - info.min) * k as f64 / (n - 1) as f64)
                            .collect()
                    }
                }
            };
            let points = values
                .iter()
                .map(|&m| conditional_effect(result, &var, &interaction, m))
                .collect::<Result<Vec<_>>>()?;
            let b = result.estimate(&var).unwrap_or(f64::NAN);
            let g = result.estimate(&interaction).unwrap_or(f64::NAN);
            let root = (g != 0.0).then(|| -b / g);
            let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            curves.push(EffectCurve {
                variable: var.clone(),
                moderator: moderator.clone(),
                interaction,
                grand_mean: info.map_or(0.0, |i| i.grand_mean),
                points,
                root,
                crosses_zero: root.is_some_and(|r| r >= lo && r <= hi),
            });
        }
    }
    Ok(curves)
}

/// Tidy curve file: variable,moderator,m,moderator_level,effect,std_error,ci_low,ci_high.
pub fn write_curves_csv(curves: &[EffectCurve], path: &Path) -> Result<()> {
    let mut text = String::from("variable,moderator,m,moderator_level,effect,std_error,ci_low,ci_high\n");
    for c in curves {
        for p in &c.points {
            text.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                c.variable,
                c.moderator,
                p.moderator_value,
                p.moderator_value + c.grand_mean,
                p.effect,
                p.std_error,
                p.ci_low,
                p.ci_high
            ));
        }
    }
    write_text(path, &text)
}
