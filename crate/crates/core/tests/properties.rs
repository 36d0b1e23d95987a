use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use spillover::effects::{moderator_curves, Grid};
use spillover::estimate::{fit, newey_west, ols};
use spillover::metrics::{average_price, market_value, value_factor};
use spillover::panel::{cross_level_interaction, entity_means, inner, lower_level_interaction, within_between, EntityIndex};
use spillover::spatial::{spatial_lag_at, SpatialWeights, WeightScheme};
use spillover::synth::{generate_panel, DgpConfig};
use spillover::types::ZoneId;

fn panel() -> impl Strategy<Value = (EntityIndex, Vec<f64>, Vec<f64>)> {
    prop::collection::vec(1usize..15, 1..12).prop_flat_map(|lens| {
        let labels: Vec<usize> = lens.iter().enumerate().flat_map(|(e, &l)| std::iter::repeat_n(e, l)).collect();
        let n = labels.len();
        (
            Just(EntityIndex::from_labels(&labels)),
            prop::collection::vec(-1e3f64..1e3, n),
            prop::collection::vec(-10f64..10.0, n),
        )
    })
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

proptest! {
    #[test]
    fn within_between_reconstructs_and_is_orthogonal((idx, x, _) in panel()) {
        let (w, b) = within_between(&x, &idx);
        let scale = max_abs(&x).max(1.0);
        for i in 0..x.len() {
            prop_assert!((w[i] + b[i] - x[i]).abs() <= 1e-12 * scale);
        }
        prop_assert!(inner(&w, &b).abs() <= 1e-10 * scale * scale * x.len() as f64);
        prop_assert!(max_abs(&entity_means(&w, &idx)) <= 1e-10 * scale);
    }

    #[test]
    fn interactions_have_zero_entity_means((idx, x, z) in panel()) {
        let li = lower_level_interaction(&x, &z, &idx);
        let scale = max_abs(&x).max(1.0) * max_abs(&z).max(1.0);
        prop_assert!(max_abs(&entity_means(&li, &idx)) <= 1e-10 * scale);
        let (w, _) = within_between(&x, &idx);
        let cl = cross_level_interaction(&w, &z);
        for i in 0..x.len() {
            prop_assert_eq!(cl[i], w[i] * z[i]);
        }
    }

    #[test]
    fn spatial_lag_is_convex_and_shift_equivariant(
        raw in prop::collection::vec((0.0f64..1.0, 0.0f64..0.5), 1..8),
        shift in -0.1f64..0.1,
    ) {
        let total: f64 = raw.iter().map(|r| r.0).sum();
        prop_assume!(total > 1e-6);
        let weights: BTreeMap<ZoneId, f64> =
            raw.iter().enumerate().map(|(i, r)| (ZoneId(format!("N{i}")), r.0 / total)).collect();
        let pen: BTreeMap<ZoneId, f64> = raw.iter().enumerate().map(|(i, r)| (ZoneId(format!("N{i}")), r.1)).collect();
        let w = SpatialWeights { focal: "F".into(), scheme: WeightScheme::IcWeighted, weights };
        let lag = spatial_lag_at(&w, |z| pen.get(z).copied()).unwrap();
        let lo = raw.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
        let hi = raw.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lag >= lo - 1e-12 && lag <= hi + 1e-12);
        let shifted = spatial_lag_at(&w, |z| pen.get(z).map(|p| p + shift)).unwrap();
        prop_assert!((shifted - lag - shift).abs() <= 1e-12);
    }

    #[test]
    fn value_factor_properties(
        rows in prop::collection::vec((-50.0f64..200.0, 0.0f64..1000.0), 2..200),
        k in -6i32..6,
    ) {
        let prices: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let gen: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let Ok(mv) = market_value(&prices, &gen, 0.0) else { return Ok(()) };
        let lo = prices.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = prices.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(mv >= lo - 1e-9 && mv <= hi + 1e-9);
        let Ok(vf) = value_factor(mv, &prices, 1e-6) else { return Ok(()) };
        let avg = average_price(&prices).unwrap();
        prop_assert!((vf * avg - mv).abs() <= 1e-10 * mv.abs().max(1e-300));
        let c = 2f64.powi(k);
        let scaled: Vec<f64> = prices.iter().map(|p| p * c).collect();
        let vf_s = value_factor(market_value(&scaled, &gen, 0.0).unwrap(), &scaled, 1e-6 * c).unwrap();
        prop_assert_eq!(vf_s, vf);
    }

    #[test]
    fn ols_residuals_are_orthogonal_and_hac_is_psd(
        lens in prop::collection::vec(4usize..20, 1..6),
        seed in any::<u64>(),
        lag_frac in 0.0f64..1.0,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = lens.iter().enumerate().flat_map(|(e, &l)| std::iter::repeat_n(e, l)).collect();
        let idx = EntityIndex::from_labels(&labels);
        let n = labels.len();
        let p = 3;
        prop_assume!(n > p + 1);
        let x = DMatrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { rng.random_range(-3.0..3.0) });
        let y = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let names: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
        let f = ols(&x, &y, &names).unwrap();
        let xte = x.transpose() * &f.residuals;
        prop_assert!(xte.amax() <= 1e-8 * y.norm());

        let shortest = *lens.iter().min().unwrap();
        let lags = ((shortest - 1) as f64 * lag_frac) as usize;
        let time: Vec<i64> = idx.ranges.iter().flat_map(|r| 0..r.len() as i64).collect();
        let v = newey_west(&x, &f.residuals, &f.xtx_inv, &idx, &time, lags).unwrap();
        prop_assert!(v.symmetric_eigenvalues().min() >= -1e-10 * v.trace().abs());

        // a constant added to y moves only the intercept
        let shift = rng.random_range(-5.0..5.0);
        let g = ols(&x, &y.add_scalar(shift), &names).unwrap();
        prop_assert!((g.coefficients[0] - f.coefficients[0] - shift).abs() <= 1e-9);
        for j in 1..p {
            prop_assert!((g.coefficients[j] - f.coefficients[j]).abs() <= 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn effect_curves_are_affine_with_valid_intervals(seed in 1u64..10_000) {
        let p = generate_panel(&DgpConfig { seed, n_zones: 12, periods: (30, 48), ..Default::default() }).unwrap();
        let r = fit(&p.spec, &p.design).unwrap();
        let curves = moderator_curves(&r, &["ic", "hydro_reservoir", "cov"], &Grid::Range(9)).unwrap();
        for c in &curves {
            let pts = &c.points;
            for w in pts.windows(3) {
                let (a, b, d) = (&w[0], &w[1], &w[2]);
                let slope1 = (b.effect - a.effect) / (b.moderator_value - a.moderator_value);
                let slope2 = (d.effect - b.effect) / (d.moderator_value - b.moderator_value);
                prop_assert!((slope1 - slope2).abs() <= 1e-12 * slope1.abs().max(1.0));
            }
            for e in pts {
                prop_assert!(e.std_error >= 0.0);
                prop_assert!(e.ci_low <= e.effect && e.effect <= e.ci_high);
                prop_assert!(((e.ci_high - e.ci_low) / 2.0 - 1.96 * e.std_error).abs() <= 1e-12 * e.std_error.max(1.0));
            }
        }
    }
}
