//! Per-window revenue and system metrics: market value, value factor,
//! penetration, variability, load correlation, clean fuel ratio, and the
//! interconnector-capacity proxy.
//!
//! The scalar formulas return [`MetricError`] for windows where a metric is
//! undefined; callers exclude such observations instead of failing.

mod interconnect;
mod table;

pub use interconnect::{interconnector_proxy, InterconnectorCapacity, IcTable, ZoneInterconnection};
pub use table::{
    compute_metrics, Exclusion, MetricsConfig, MetricsTable, ZonePeriodControls, ZonePeriodMetrics,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::stable_sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("series lengths differ")]
    LengthMismatch,
    #[error("empty window")]
    Empty,
    #[error("insufficient generation")]
    InsufficientGeneration,
    #[error("average price too close to zero")]
    ZeroAveragePrice,
    #[error("zero load")]
    ZeroLoad,
    #[error("zero mean generation")]
    ZeroMean,
    #[error("constant series, correlation undefined")]
    ConstantSeries,
}

pub type MetricResult = std::result::Result<f64, MetricError>;

fn check_aligned(a: &[f64], b: &[f64]) -> std::result::Result<(), MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch);
    }
    if a.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(())
}

/// Generation-weighted average price, Σ p·g / Σ g.
///
/// Windows with Σ g ≤ `min_generation` are flagged as insufficient.
pub fn market_value(prices: &[f64], gen: &[f64], min_generation: f64) -> MetricResult {
    check_aligned(prices, gen)?;
    let total = stable_sum(gen.iter().copied());
    if total <= min_generation || total <= 0.0 {
        return Err(MetricError::InsufficientGeneration);
    }
    let revenue = stable_sum(prices.iter().zip(gen).map(|(p, g)| p * g));
    Ok(revenue / total)
}

pub fn average_price(prices: &[f64]) -> MetricResult {
    if prices.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(stable_sum(prices.iter().copied()) / prices.len() as f64)
}

/// Market value relative to the time-average price of the same window.
pub fn value_factor(mv: f64, prices: &[f64], epsilon: f64) -> MetricResult {
    let avg = average_price(prices)?;
    if avg.abs() < epsilon {
        return Err(MetricError::ZeroAveragePrice);
    }
    Ok(mv / avg)
}

/// Σ gen / Σ load.
pub fn penetration(gen: &[f64], load: &[f64]) -> MetricResult {
    check_aligned(gen, load)?;
    let total_load = stable_sum(load.iter().copied());
    if total_load <= 0.0 {
        return Err(MetricError::ZeroLoad);
    }
    Ok(stable_sum(gen.iter().copied()) / total_load)
}

/// Population standard deviation over mean.
pub fn coefficient_of_variation(gen: &[f64]) -> MetricResult {
    if gen.is_empty() {
        return Err(MetricError::Empty);
    }
    let n = gen.len() as f64;
    let mean = stable_sum(gen.iter().copied()) / n;
    if mean <= 0.0 {
        return Err(MetricError::ZeroMean);
    }
    let var = stable_sum(gen.iter().map(|g| (g - mean) * (g - mean))) / n;
    Ok(var.sqrt() / mean)
}

/// Pearson correlation of hourly generation with hourly load.
pub fn load_correlation(gen: &[f64], load: &[f64]) -> MetricResult {
    check_aligned(gen, load)?;
    let n = gen.len() as f64;
    let mg = stable_sum(gen.iter().copied()) / n;
    let ml = stable_sum(load.iter().copied()) / n;
    let sgg = stable_sum(gen.iter().map(|g| (g - mg) * (g - mg)));
    let sll = stable_sum(load.iter().map(|l| (l - ml) * (l - ml)));
    // relative test so that rounding noise in a constant series does not count as variation
    let tiny = |s: f64, m: f64| s <= 1e-24 * n * (m * m).max(f64::MIN_POSITIVE);
    if tiny(sgg, mg) || tiny(sll, ml) {
        return Err(MetricError::ConstantSeries);
    }
    let sgl = stable_sum(gen.iter().zip(load).map(|(g, l)| (g - mg) * (l - ml)));
    Ok((sgl / (sgg.sqrt() * sll.sqrt())).clamp(-1.0, 1.0))
}

/// Carbon intensity of fuels, tCO2 per MWh thermal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarbonContents {
    pub gas: f64,
    pub coal: f64,
}

impl Default for CarbonContents {
    fn default() -> Self {
        CarbonContents {
            gas: 0.202,
            coal: 0.340,
        }
    }
}

/// (gas + eua·c_gas) / (coal + eua·c_coal). Common to all zones.
pub fn clean_fuel_ratio(gas: f64, coal: f64, eua: f64, carbon: CarbonContents) -> Result<f64> {
    let denominator = coal + eua * carbon.coal;
    if !(denominator > 0.0) {
        return Err(Error::Data(format!(
            "clean coal price must be positive (coal {coal}, eua {eua})"
        )));
    }
    Ok((gas + eua * carbon.gas) / denominator)
}

/// Quantile by linear interpolation between order statistics (type 7).
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&q) {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn market_value_two_points() {
        assert_eq!(market_value(&[10.0, 20.0], &[1.0, 3.0], 0.0).unwrap(), 17.5);
    }

    #[test]
    fn flat_generation_gives_mean_price_and_unit_vf() {
        let p = [13.0, -4.0, 55.5, 21.25];
        let g = [2.0; 4];
        let mv = market_value(&p, &g, 0.0).unwrap();
        assert!((mv - average_price(&p).unwrap()).abs() < 1e-12);
        assert_eq!(value_factor(mv, &p, 1e-9).unwrap(), 1.0);
    }

    #[test]
    fn cheapest_hour_value_factor() {
        let p = [1.0, 2.0, 3.0];
        let mv = market_value(&p, &[5.0, 0.0, 0.0], 0.0).unwrap();
        assert_eq!(mv, 1.0);
        assert_eq!(value_factor(mv, &p, 1e-9).unwrap(), 0.5);
    }

    #[test]
    fn undefined_windows_are_flagged() {
        assert_eq!(
            market_value(&[1.0, 2.0], &[0.0, 0.0], 0.0),
            Err(MetricError::InsufficientGeneration)
        );
        assert_eq!(
            value_factor(1.0, &[1.0, -1.0], 1e-9),
            Err(MetricError::ZeroAveragePrice)
        );
        assert_eq!(penetration(&[1.0], &[0.0]), Err(MetricError::ZeroLoad));
        assert_eq!(coefficient_of_variation(&[0.0, 0.0]), Err(MetricError::ZeroMean));
        assert_eq!(
            load_correlation(&[3.0, 3.0, 3.0], &[1.0, 2.0, 3.0]),
            Err(MetricError::ConstantSeries)
        );
    }

    #[test]
    fn penetration_edges() {
        let load = [3.0, 4.0, 5.0];
        assert_eq!(penetration(&load, &load).unwrap(), 1.0);
        assert_eq!(penetration(&[0.0; 3], &load).unwrap(), 0.0);
    }

    #[test]
    fn cov_edges() {
        assert_eq!(coefficient_of_variation(&[4.0; 10]).unwrap(), 0.0);
        assert_eq!(coefficient_of_variation(&[0.0, 2.0]).unwrap(), 1.0);
    }

    #[test]
    fn correlation_edges() {
        let load = [10.0, 12.0, 9.0, 15.0, 11.0];
        assert!((load_correlation(&load, &load).unwrap() - 1.0).abs() < 1e-12);
        let anti: Vec<f64> = load.iter().map(|l| 40.0 - l).collect();
        assert!((load_correlation(&anti, &load).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn fuel_ratio_cases() {
        let c = CarbonContents { gas: 0.2, coal: 0.4 };
        assert_eq!(clean_fuel_ratio(20.0, 20.0, 0.0, c).unwrap(), 1.0);
        let r = clean_fuel_ratio(30.0, 10.0, 10.0, c).unwrap();
        assert!((r - 32.0 / 14.0).abs() < 1e-15);
        let mut last = f64::INFINITY;
        for eua in [0.0, 5.0, 20.0, 80.0, 200.0] {
            let r = clean_fuel_ratio(30.0, 10.0, eua, c).unwrap();
            assert!(r < last);
            last = r;
        }
        assert!(clean_fuel_ratio(30.0, 0.0, 0.0, c).is_err());
    }

    #[test]
    fn quantile_type7() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        // h = 99 * 0.95 = 94.05 -> x[94] + 0.05 * (x[95] - x[94]) = 95 + 0.05
        assert!((quantile(&v, 0.95).unwrap() - 95.05).abs() < 1e-12);
        assert_eq!(quantile(&[7.0; 5], 0.95).unwrap(), 7.0);
        assert_eq!(quantile(&[], 0.5), None);
    }

    proptest! {
        #[test]
        fn vf_scale_invariant(
            prices in proptest::collection::vec(1.0f64..200.0, 24..100),
            seed in 0u64..1000,
            k in 0.01f64..100.0,
        ) {
            let gen: Vec<f64> = prices.iter().enumerate()
                .map(|(i, _)| ((i as u64 * 7919 + seed) % 97) as f64).collect();
            let scaled: Vec<f64> = prices.iter().map(|p| p * k).collect();
            if let (Ok(mv), Ok(mv_s)) = (market_value(&prices, &gen, 0.0), market_value(&scaled, &gen, 0.0)) {
                let vf = value_factor(mv, &prices, 1e-9).unwrap();
                let vf_s = value_factor(mv_s, &scaled, 1e-9).unwrap();
                prop_assert!((vf - vf_s).abs() <= 1e-12 * vf.abs());
                // VF * average price reproduces MV
                let avg = average_price(&prices).unwrap();
                prop_assert!((vf * avg - mv).abs() <= 1e-10 * mv.abs());
            }
        }

        #[test]
        fn mv_within_price_range(
            pairs in proptest::collection::vec((-100.0f64..300.0, 0.0f64..50.0), 1..200),
        ) {
            let (p, g): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            if let Ok(mv) = market_value(&p, &g, 0.0) {
                let lo = p.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let tol = 1e-12 * lo.abs().max(hi.abs());
                prop_assert!(mv >= lo - tol && mv <= hi + tol);
            }
        }
    }
}
