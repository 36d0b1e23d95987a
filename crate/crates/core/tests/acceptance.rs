//! Acceptance suite. Each criterion prints one PASS/FAIL line; the test fails
//! if any criterion does. Run with `--nocapture` to see the lines.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use spillover::effects::{conditional_effect, linear_combination, moderator_curves, zone_effects, Grid};
use spillover::estimate::{classical_covariance, default_hac_lags, fit, newey_west, ols, ModelSpec, ModelTerms};
use spillover::metrics::{
    average_price, coefficient_of_variation, load_correlation, market_value, penetration, quantile, value_factor,
    MetricsConfig,
};
use spillover::panel::{entity_means, inner, lower_level_interaction, within_between, EntityIndex};
use spillover::sensitivity::{aggregation_sweep, estimator_comparison, hourly_null_check, leave_one_out};
use spillover::synth::{generate_hourly, generate_panel, DgpConfig, MeritOrderConfig, WIND_REFERENCE};
use spillover::types::{date_start_hour, Aggregation, Technology};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_time(elapsed: Duration, limit: Duration, detail: String) -> Outcome {
    check(elapsed < limit, format!("{detail}; {:.1}s (limit {}s)", elapsed.as_secs_f64(), limit.as_secs()))
}

fn estimator_equivalence() -> Outcome {
    let t = Instant::now();
    let p = generate_panel(&DgpConfig::default()).map_err(|e| e.to_string())?;
    let c = estimator_comparison(&p.spec, &p.metrics, &p.weights).map_err(|e| e.to_string())?;
    let compared = c.rows.iter().filter(|r| r.fe.is_some()).count();
    let lens: Vec<usize> = p.design.design.entities.lengths().collect();
    let detail = format!(
        "{} zones, {}..{} periods, {} coefficients compared, max relative deviation {:.2e}",
        lens.len(),
        lens.iter().min().unwrap(),
        lens.iter().max().unwrap(),
        compared,
        c.max_relative_deviation
    );
    check(c.max_relative_deviation <= 1e-6 && compared > 0, detail.clone())?;
    within_time(t.elapsed(), Duration::from_secs(10), detail)
}

fn monte_carlo_recovery() -> Outcome {
    let t = Instant::now();
    let names = ["dom_wind", "nbr_wind", "dom_wind*ic.between", "nbr_wind*ic.between"];
    let reps: Vec<Vec<(f64, f64, f64)>> = (1..=200u64)
        .into_par_iter()
        .map(|seed| {
            let p = generate_panel(&DgpConfig { seed, ..DgpConfig::full_scale() }).expect("panel");
            let r = fit(&p.spec, &p.design).expect("fit");
            names
                .iter()
                .map(|n| {
                    let c = r.coefficient(n).expect("coefficient");
                    (c.estimate, c.std_error, p.truth.get(n).expect("truth"))
                })
                .collect()
        })
        .collect();
    let rows = generate_panel(&DgpConfig { seed: 1, ..DgpConfig::full_scale() }).unwrap().design.design.n_rows();
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, name) in names.iter().enumerate() {
        let est: Vec<f64> = reps.iter().map(|r| r[k].0).collect();
        let truth = reps[0][k].2;
        let n = est.len() as f64;
        let mean = est.iter().sum::<f64>() / n;
        let sd = (est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let mc_se = sd / n.sqrt();
        let z = (mean - truth) / mc_se;
        let covered = reps.iter().filter(|r| (r[k].0 - r[k].2).abs() <= 1.96 * r[k].1).count() as f64 / n;
        ok &= z.abs() <= 2.0 && (0.90..=0.99).contains(&covered);
        parts.push(format!("{name}: truth {truth} mean {mean:.4} ({z:+.2} MC SE), coverage {covered:.3}"));
    }
    let detail = format!("200 reps, {rows} rows in rep 1; {}", parts.join("; "));
    check(ok, detail.clone())?;
    within_time(t.elapsed(), Duration::from_secs(300), detail)
}

fn hourly_null() -> Outcome {
    let m = generate_hourly(&MeritOrderConfig {
        seed: 3,
        n_zones: 14,
        hours: 2 * 8760,
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    let h0 = date_start_hour(chrono::NaiveDate::from_ymd_opt(2019, 1, 1).unwrap());
    let c = hourly_null_check(&ModelSpec::default(), &m.inputs, &MetricsConfig::default(), Some(h0..h0 + 24 * 90))
        .map_err(|e| e.to_string())?;
    check(
        c.n_obs > 0 && c.max_vf_deviation <= 1e-10 && c.max_penetration_coefficient <= 1e-10,
        format!(
            "{} hourly rows, max |VF-1| {:.1e}, max |penetration coefficient| {:.1e}",
            c.n_obs, c.max_vf_deviation, c.max_penetration_coefficient
        ),
    )
}

fn aggregation_direction() -> Outcome {
    let spec = ModelSpec {
        terms: ModelTerms {
            spatial: true,
            ..ModelTerms::minimal()
        },
        ..ModelSpec::new(Technology::Wind)
    };
    let levels = [Aggregation::Daily, Aggregation::Monthly];
    let results: Vec<std::result::Result<(f64, f64), String>> = (0..50u64)
        .into_par_iter()
        .map(|seed| {
            let m = generate_hourly(&MeritOrderConfig {
                seed,
                n_zones: 10,
                hours: 3 * 8760,
                ..Default::default()
            })
            .map_err(|e| e.to_string())?;
            let s = aggregation_sweep(&spec, &m.inputs, &MetricsConfig::default(), &levels).map_err(|e| e.to_string())?;
            let b = |v: &str| -> std::result::Result<f64, String> {
                let run = s.run(v).ok_or("missing run")?;
                Ok(run.coefficient("dom_wind").ok_or_else(|| format!("{v}: {:?}", run.error))?.estimate)
            };
            Ok((b("daily")?, b("monthly")?))
        })
        .collect();
    let errors = results.iter().filter(|r| r.is_err()).count();
    let smaller = results
        .iter()
        .filter(|r| matches!(r, Ok((d, m)) if d.abs() < m.abs()))
        .count();
    check(
        smaller >= 48,
        format!("|daily| < |monthly| in {smaller}/50 runs ({errors} failed runs)"),
    )
}

fn random_entity_index(rng: &mut ChaCha8Rng, max_entities: usize, max_len: usize) -> EntityIndex {
    let n = rng.random_range(1..=max_entities);
    let mut labels = Vec::new();
    for e in 0..n {
        let len = rng.random_range(1..=max_len);
        labels.extend(std::iter::repeat_n(e, len));
    }
    EntityIndex::from_labels(&labels)
}

fn decomposition_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = [0.0f64; 4];
    for _ in 0..1000 {
        let idx = random_entity_index(&mut rng, 20, 30);
        let n = idx.n_rows();
        let scale = 10f64.powf(rng.random_range(-2.0..2.0));
        let x: Vec<f64> = (0..n).map(|_| scale * rng.random_range(-1.0..1.0) + scale).collect();
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let (w, b) = within_between(&x, &idx);
        let rec = x.iter().zip(w.iter().zip(&b)).map(|(x, (w, b))| (x - (w + b)).abs() / scale).fold(0.0, f64::max);
        let ortho = inner(&w, &b).abs() / (n as f64 * scale * scale);
        let wm = entity_means(&w, &idx).iter().map(|m| m.abs() / scale).fold(0.0, f64::max);
        let li = lower_level_interaction(&x, &z, &idx);
        let lm = entity_means(&li, &idx).iter().map(|m| m.abs() / scale).fold(0.0, f64::max);
        for (s, v) in worst.iter_mut().zip([rec, ortho, wm, lm]) {
            *s = s.max(v);
        }
    }
    check(
        worst[0] <= 1e-12 && worst[1..].iter().all(|&v| v <= 1e-10),
        format!(
            "1000 panels: reconstruction {:.1e}, within.between {:.1e}, within entity means {:.1e}, interaction entity means {:.1e} (scale-relative)",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn white_oracle(x: &DMatrix<f64>, e: &DVector<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let p = x.ncols();
    let mut meat = DMatrix::<f64>::zeros(p, p);
    for i in 0..x.nrows() {
        for j in 0..p {
            for k in 0..p {
                meat[(j, k)] += e[i] * e[i] * x[(i, j)] * x[(i, k)];
            }
        }
    }
    b * meat * b
}

fn random_regression(rng: &mut ChaCha8Rng, idx: &EntityIndex, p: usize) -> (DMatrix<f64>, DVector<f64>) {
    let n = idx.n_rows();
    let x = DMatrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { rng.random_range(-1.0..1.0) });
    let y = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    (x, y)
}

fn hac_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut white_dev = 0.0f64;
    let mut psd_worst = f64::INFINITY;
    for case in 0..300 {
        let idx = random_entity_index(&mut rng, 8, 25);
        let p = rng.random_range(1..=4);
        if idx.n_rows() <= p + 1 {
            continue;
        }
        let (x, y) = random_regression(&mut rng, &idx, p);
        let names: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
        let Ok(f) = ols(&x, &y, &names) else { continue };
        let time: Vec<i64> = idx.ranges.iter().flat_map(|r| 0..r.len() as i64).collect();
        let shortest = idx.lengths().min().unwrap();
        let hac0 = newey_west(&x, &f.residuals, &f.xtx_inv, &idx, &time, 0).unwrap();
        let oracle = white_oracle(&x, &f.residuals, &f.xtx_inv);
        let scale = oracle.abs().max().max(f64::MIN_POSITIVE);
        white_dev = white_dev.max((&hac0 - &oracle).abs().max() / scale);
        for lags in [0, (case % shortest), shortest - 1] {
            let v = newey_west(&x, &f.residuals, &f.xtx_inv, &idx, &time, lags).unwrap();
            let trace = v.trace();
            let min_eig = v.symmetric_eigenvalues().min();
            psd_worst = psd_worst.min(min_eig / trace.max(f64::MIN_POSITIVE));
        }
    }

    let normal = Normal::new(0.0, 1.0).unwrap();
    let ar1 = |rng: &mut ChaCha8Rng, n: usize, rho: f64| -> Vec<f64> {
        let mut v = normal.sample(rng) / (1.0 - rho * rho).sqrt();
        (0..n)
            .map(|_| {
                v = rho * v + normal.sample(rng);
                v
            })
            .collect()
    };
    let runs = 200;
    let mut larger = 0;
    for _ in 0..runs {
        let labels: Vec<usize> = (0..10).flat_map(|e| std::iter::repeat_n(e, 100)).collect();
        let idx = EntityIndex::from_labels(&labels);
        let (mut xs, mut us) = (Vec::new(), Vec::new());
        for _ in 0..10 {
            xs.extend(ar1(&mut rng, 100, 0.5));
            us.extend(ar1(&mut rng, 100, 0.5));
        }
        let n = xs.len();
        let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
        let y = DVector::from_fn(n, |i, _| 1.0 + 0.5 * xs[i] + us[i]);
        let f = ols(&x, &y, &["c".into(), "x".into()]).unwrap();
        let time: Vec<i64> = labels.iter().enumerate().map(|(i, _)| (i % 100) as i64).collect();
        let hac = newey_west(&x, &f.residuals, &f.xtx_inv, &idx, &time, default_hac_lags(&idx)).unwrap();
        let classical = classical_covariance(&f);
        if hac[(1, 1)] > classical[(1, 1)] {
            larger += 1;
        }
    }
    check(
        white_dev <= 1e-10 && psd_worst >= -1e-10 && larger * 100 >= 95 * runs,
        format!(
            "L=0 vs White oracle {white_dev:.1e}; min eigenvalue/trace {psd_worst:.1e}; AR(1) rho 0.5: HAC SE > classical in {larger}/{runs}"
        ),
    )
}

fn rel(a: f64, b: f64) -> f64 {
    let m = a.abs().max(b.abs());
    if m == 0.0 {
        0.0
    } else {
        (a - b).abs() / m
    }
}

/// Sum carried as non-overlapping partials, so no rounding error accumulates
/// before the final addition.
fn exact_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for mut x in values {
        let mut kept = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        partials.truncate(kept);
        partials.push(x);
    }
    partials.iter().rev().sum()
}

/// k-th order statistic (0-based) by counting, without sorting.
fn order_statistic(v: &[f64], k: usize) -> f64 {
    for &c in v {
        let below = v.iter().filter(|&&x| x < c).count();
        let at_most = v.iter().filter(|&&x| x <= c).count();
        if below <= k && k < at_most {
            return c;
        }
    }
    unreachable!()
}

fn metrics_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut bump = |k: &'static str, v: f64| {
        let e = worst.entry(k).or_insert(0.0);
        *e = e.max(v);
    };
    let mut scale_exact = true;
    let mut scale_general = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(24..=744);
        let price: Vec<f64> = (0..n).map(|_| rng.random_range(-20.0..150.0)).collect();
        let gen: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..5000.0) }).collect();
        let load: Vec<f64> = (0..n).map(|_| rng.random_range(2000.0..9000.0)).collect();
        let nf = n as f64;

        let rev = exact_sum((0..n).map(|i| price[i] * gen[i]));
        let g_tot = exact_sum(gen.iter().copied());
        let p_tot = exact_sum(price.iter().copied());
        let l_tot = exact_sum(load.iter().copied());
        let mv_o = rev / g_tot;
        let vf_o = mv_o / (p_tot / nf);
        let g_mean = g_tot / nf;
        let l_mean = l_tot / nf;
        let sgg = exact_sum(gen.iter().map(|g| (g - g_mean).powi(2)));
        let sll = exact_sum(load.iter().map(|l| (l - l_mean).powi(2)));
        let sgl = exact_sum((0..n).map(|i| (gen[i] - g_mean) * (load[i] - l_mean)));
        let cov_o = (sgg / nf).sqrt() / g_mean;
        let corr_o = sgl / (sgg * sll).sqrt();
        let h = 0.95 * (nf - 1.0);
        let lo = h.floor() as usize;
        let (a, b) = (order_statistic(&load, lo), order_statistic(&load, (lo + 1).min(n - 1)));
        let q_o = a + (h - lo as f64) * (b - a);

        let mv = market_value(&price, &gen, 0.0).unwrap();
        let vf = value_factor(mv, &price, 1e-9).unwrap();
        bump("MV", rel(mv, mv_o));
        bump("VF", rel(vf, vf_o));
        bump("penetration", rel(penetration(&gen, &load).unwrap(), g_tot / l_tot));
        bump("CoV", rel(coefficient_of_variation(&gen).unwrap(), cov_o));
        bump("correlation", rel(load_correlation(&gen, &load).unwrap(), corr_o));
        bump("Q95", rel(quantile(&load, 0.95).unwrap(), q_o));
        bump("average price", rel(average_price(&price).unwrap(), p_tot / nf));

        let k = rng.random_range(-8..=8);
        let c = 2f64.powi(k);
        let scaled: Vec<f64> = price.iter().map(|p| p * c).collect();
        let vf_s = value_factor(market_value(&scaled, &gen, 0.0).unwrap(), &scaled, 1e-9).unwrap();
        scale_exact &= vf_s == vf;
        let c = rng.random_range(0.01..100.0);
        let scaled: Vec<f64> = price.iter().map(|p| p * c).collect();
        let vf_s = value_factor(market_value(&scaled, &gen, 0.0).unwrap(), &scaled, 1e-9).unwrap();
        scale_general = scale_general.max(rel(vf_s, vf));
    }
    let max = worst.values().copied().fold(0.0, f64::max);
    let parts: Vec<String> = worst.iter().map(|(k, v)| format!("{k} {v:.1e}")).collect();
    check(
        max <= 1e-12 && scale_exact && scale_general <= 1e-12,
        format!(
            "1000 windows, worst relative error: {}; VF under power-of-two price scaling identical: {scale_exact}; arbitrary scaling {scale_general:.1e}",
            parts.join(", ")
        ),
    )
}

fn conditional_effect_contract() -> Outcome {
    let p = generate_panel(&DgpConfig::default()).map_err(|e| e.to_string())?;
    let r = fit(&p.spec, &p.design).map_err(|e| e.to_string())?;
    let stems = ["ic", "hydro_pumped", "hydro_reservoir", "fuel_ratio", "load_corr", "cov"];
    let at_mean = moderator_curves(&r, &stems, &Grid::Values(vec![0.0])).map_err(|e| e.to_string())?;
    let mut exact = true;
    for c in &at_mean {
        let base = r.coefficient(&c.variable).unwrap();
        exact &= c.points[0].effect == base.estimate && c.points[0].std_error == base.std_error;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut var_dev = 0.0f64;
    for c in &at_mean {
        let (b, g) = (&c.variable, &c.interaction);
        let vbb = r.covariance(b, b).unwrap();
        let vbg = r.covariance(b, g).unwrap();
        let vgg = r.covariance(g, g).unwrap();
        for _ in 0..50 {
            let m = rng.random_range(-2.0..2.0);
            let e = conditional_effect(&r, b, g, m).unwrap();
            let oracle = vbb + 2.0 * m * vbg + m * m * vgg;
            var_dev = var_dev.max(rel(e.std_error * e.std_error, oracle));
        }
    }
    // random combinations against the full quadratic form
    let names: Vec<String> = r.coefficients.iter().map(|c| c.name.clone()).collect();
    let v = r.covariance_matrix();
    for _ in 0..100 {
        let w: Vec<f64> = names.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        let terms: Vec<(&str, f64)> = names.iter().map(String::as_str).zip(w.iter().copied()).collect();
        let (_, var) = linear_combination(&r, &terms).unwrap();
        let wv = DVector::from_vec(w);
        var_dev = var_dev.max(rel(var, (wv.transpose() * &v * &wv)[(0, 0)]));
    }

    let mut injected = r.clone();
    for c in injected.coefficients.iter_mut() {
        if let Some((_, b)) = WIND_REFERENCE.iter().find(|(n, _)| *n == c.name) {
            c.estimate = *b;
        }
    }
    let z = zone_effects(&injected, &injected.zone_ic).map_err(|e| e.to_string())?;
    let combined = z.combined_at_mean.effect;
    check(
        exact && var_dev <= 1e-12 && (combined + 1.108).abs() <= 1e-12,
        format!(
            "{} curves exact at grand mean: {exact}; variance vs quadratic form {var_dev:.1e}; combined wind effect at mean IC {combined}",
            at_mean.len()
        ),
    )
}

fn leave_one_out_inside() -> Outcome {
    let results: Vec<(u64, usize, usize, usize)> = (1..=20u64)
        .into_par_iter()
        .map(|seed| {
            let p = generate_panel(&DgpConfig { seed, ..DgpConfig::homogeneous() }).expect("panel");
            let s = leave_one_out(&p.spec, &p.metrics, &p.weights).expect("sweep");
            let full = &s.runs[0];
            let (mut inside, mut total, mut failed) = (0, 0, 0);
            for run in &s.runs[1..] {
                if run.failed() {
                    failed += 1;
                    continue;
                }
                for c in &run.coefficients {
                    let f = full.coefficient(&c.name).expect("full-sample coefficient");
                    total += 1;
                    if c.estimate >= f.ci_low && c.estimate <= f.ci_high {
                        inside += 1;
                    }
                }
            }
            (seed, inside, total, failed)
        })
        .collect();
    let inside: usize = results.iter().map(|r| r.1).sum();
    let total: usize = results.iter().map(|r| r.2).sum();
    let failed: usize = results.iter().map(|r| r.3).sum();
    let bad: Vec<u64> = results.iter().filter(|r| r.1 < r.2).map(|r| r.0).collect();
    check(
        inside == total && failed == 0 && total > 0,
        format!("20 seeds: {inside}/{total} LOO estimates inside the full-sample CI, {failed} failed refits, seeds with misses {bad:?}"),
    )
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let key = p.strip_prefix(dir).unwrap().display().to_string();
                out.insert(key, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn report_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_spillover");
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/report.toml");
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = tmp.path().join("data");
    let run = |args: &[&str]| -> std::result::Result<(), String> {
        let o = Command::new(bin).args(args).env_remove("SPILLOVER_CACHE_DIR").output().map_err(|e| e.to_string())?;
        if o.status.success() {
            Ok(())
        } else {
            Err(String::from_utf8_lossy(&o.stderr).into_owned())
        }
    };
    run(&["synth", "hourly", "--config", fixture.to_str().unwrap(), "--out", data.to_str().unwrap()])?;
    let cfg = data.join("config.toml");
    let mut trees = Vec::new();
    for (name, threads) in [("a", "1"), ("b", "1"), ("c", "4")] {
        let out = tmp.path().join(name);
        run(&["report", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", threads])?;
        trees.push(tree(&out));
    }
    let files = trees[0].len();
    check(
        files > 10 && trees[0] == trees[1] && trees[0] == trees[2],
        format!(
            "{files} report files; repeat run identical: {}; 1 vs 4 threads identical: {}",
            trees[0] == trees[1],
            trees[0] == trees[2]
        ),
    )
}

#[test]
fn primary_criteria() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("1 estimator equivalence", estimator_equivalence),
        ("2 Monte Carlo recovery", monte_carlo_recovery),
        ("3 hourly aggregation null", hourly_null),
        ("4 aggregation direction", aggregation_direction),
        ("5 decomposition algebra", decomposition_algebra),
        ("6 HAC correctness", hac_correctness),
        ("7 metrics oracles", metrics_oracles),
        ("8 conditional-effect contract", conditional_effect_contract),
        ("9 leave-one-out inside CI", leave_one_out_inside),
        ("10 report determinism", report_determinism),
    ];
    // ACCEPTANCE_ONLY=3,7 runs a subset
    let only: Option<Vec<String>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').map(|s| s.trim().to_string()).collect());
    let mut failed = Vec::new();
    for (name, f) in criteria {
        let number = name.split(' ').next().unwrap().to_string();
        if only.as_ref().is_some_and(|o| !o.contains(&number)) {
            println!("SKIP  criterion {name}");
            continue;
        }
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS  criterion {name} [{secs:.1}s]: {d}"),
            Err(d) => {
                println!("FAIL  criterion {name} [{secs:.1}s]: {d}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
