//! Acceptance checks, one line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the PASS/FAIL lines are
//! printed even when everything passes.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use oilshock::bootstrap::{irf_bands, BootstrapConfig, Centering};
use oilshock::date::{DateRange, YearMonth};
use oilshock::dynamics::{
    counterfactual_levels, fevd, historical_decomposition, ma_coefficients, model_fevd, model_irfs, Compounding,
    Convention, CounterfactualSpec, Horizon, CUMULATE_DEFAULT,
};
use oilshock::identify::{identify, identify_with, StructuralModel};
use oilshock::ingest::{ColumnNames, DataSources, Frequency, RawSeries, TimeSeriesFrame};
use oilshock::linalg::is_lower_triangular;
use oilshock::network::{
    a_hat, employment_response, equilibrium_prices, h_hat, three_sector_analytic, OilShock, ThreeSectorCycle,
};
use oilshock::sim::VarDgp;
use oilshock::var::{self, estimate_ols, VarModel};
use oilshock::wages::{aggregate_shocks, estimate_wage_irf};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Check = std::result::Result<String, String>;

fn ym(s: &str) -> YearMonth {
    s.parse().unwrap()
}

fn ensure(cond: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn sources() -> DataSources {
    DataSources {
        oil_market: "oil_market.csv".into(),
        employment: "kern_employment.csv".into(),
        wages: Some("kern_wages.csv".into()),
        columns: ColumnNames::default(),
    }
    .resolve(&fixture_dir())
}

fn fixture_model() -> (VarModel, StructuralModel) {
    let panel = sources()
        .load_panel(DateRange::new(ym("1990-02"), ym("2024-12")).unwrap())
        .expect("fixture panel");
    let model = estimate_ols(&panel, var::DEFAULT_LAGS).expect("fixture estimate");
    let s = identify(&model).expect("fixture identification");
    (model, s)
}

fn random_stable(k: usize, p: usize, scale: f64, seed: u64) -> Vec<DMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let coeffs: Vec<DMatrix<f64>> = (0..p)
            .map(|_| DMatrix::from_fn(k, k, |_, _| rng.random_range(-scale..scale)))
            .collect();
        if var::is_stable(&var::companion_of(&coeffs), 0.02) {
            return coeffs;
        }
    }
}

fn random_lower(k: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(k, k, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Less => 0.0,
        std::cmp::Ordering::Equal => rng.random_range(0.5..2.0),
        std::cmp::Ordering::Greater => rng.random_range(-1.0..1.0),
    })
}

fn criterion_1() -> Check {
    let (model, s) = fixture_model();
    ensure(is_lower_triangular(&s.b0inv), "b0inv is not lower triangular")?;
    let err = (&s.b0inv * s.b0inv.transpose() - &model.sigma_u).amax();
    ensure(err < 1e-10, format!("max |b0inv b0inv' - Sigma_u| = {err:e}"))?;
    Ok(format!("max error {err:.1e}"))
}

fn criterion_2() -> Check {
    let (model, s) = fixture_model();
    let mut cases = vec![(model.coeffs.clone(), s.b0inv.clone())];
    for seed in 0..20 {
        cases.push((random_stable(4, 2, 0.3, seed), random_lower(4, 100 + seed)));
    }
    for (coeffs, b) in &cases {
        let t = fevd(coeffs, b, &[Horizon::Finite(1)]).map_err(|e| e.to_string())?;
        let row: Vec<f64> = (0..4).map(|j| t.shares[0][j][0]).collect();
        ensure(row == [100.0, 0.0, 0.0, 0.0], format!("variable 1, h=1 row is {row:?}"))?;
    }
    Ok(format!("{} models give 100.0/0.0/0.0/0.0", cases.len()))
}

fn criterion_3() -> Check {
    let hs = [1, 2, 3, 6, 12, 24, 60]
        .iter()
        .map(|h| Horizon::Finite(*h))
        .chain([Horizon::Infinite])
        .collect::<Vec<_>>();
    let (model, s) = fixture_model();
    let mut worst = 0.0f64;
    let tables = vec![
        model_fevd(&model, &s, &hs).map_err(|e| e.to_string())?,
        fevd(&random_stable(4, 12, 0.06, 7), &random_lower(4, 8), &hs).map_err(|e| e.to_string())?,
    ];
    for t in &tables {
        for i in 0..4 {
            for h in 0..hs.len() {
                let sum: f64 = (0..4).map(|j| t.shares[i][j][h]).sum();
                worst = worst.max((sum - 100.0).abs());
                ensure((0..4).all(|j| t.shares[i][j][h] >= 0.0), "negative share")?;
            }
        }
    }
    ensure(worst < 1e-8, format!("row sum off by {worst:e}"))?;

    let coeffs = random_stable(4, 12, 0.06, 11);
    let b = random_lower(4, 12);
    let t = fevd(&coeffs, &b, &[Horizon::Finite(2000), Horizon::Infinite]).map_err(|e| e.to_string())?;
    let mut gap = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            gap = gap.max((t.shares[i][j][0] - t.shares[i][j][1]).abs());
        }
    }
    ensure(gap < 1e-6, format!("H=2000 vs infinite differ by {gap:e}"))?;
    Ok(format!("max row-sum error {worst:.1e}; H=2000 vs inf gap {gap:.1e}"))
}

fn criterion_4() -> Check {
    // upper-triangular A has a closed-form power
    let (a, b, c) = (0.9, 0.4, -0.6);
    let a1 = DMatrix::from_row_slice(2, 2, &[a, b, 0.0, c]);
    let l = DMatrix::from_row_slice(2, 2, &[1.5, 0.0, -0.7, 0.8]);
    let ma = ma_coefficients(&[a1], &l, 50);
    let mut worst = 0.0f64;
    for h in 0..=50i32 {
        let (ah, ch) = (f64::powi(a, h), f64::powi(c, h));
        let pow = DMatrix::from_row_slice(2, 2, &[ah, b * (ah - ch) / (a - c), 0.0, ch]);
        worst = worst.max((&ma.theta[h as usize] - pow * &l).amax());
    }
    ensure(worst < 1e-12, format!("max |Theta_h - A^h L| = {worst:e}"))?;
    Ok(format!("max error {worst:.1e} over h <= 50"))
}

fn criterion_5() -> Check {
    let (model, s) = fixture_model();
    let hd = historical_decomposition(&model, &s, false);
    let resid = (hd.truncated_fit() + &hd.base - model.observed()).amax();
    ensure(resid < 1e-8, format!("decomposition residual {resid:e}"))?;

    let inputs = sources().load_inputs().map_err(|e| e.to_string())?;
    let emp = &inputs.employment;
    let window = DateRange::new(ym("2010-01"), ym("2024-12")).unwrap();
    let spec = CounterfactualSpec {
        variable: 3,
        remove: None,
        window,
        base_level: emp.get(window.start).ok_or("no 2010-01 employment")?,
        mean_growth: 0.0,
        convention: Convention::ExactIdentity,
        compounding: Compounding::Log,
    };
    let path = counterfactual_levels(&hd, &spec).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for (d, lvl) in path.dates.iter().zip(&path.levels) {
        worst = worst.max((lvl - emp.get(*d).unwrap()).abs());
    }
    ensure(
        worst < 1e-6,
        format!("counterfactual(none) deviates by {worst:e} persons"),
    )?;
    let last = *path.levels.last().unwrap();
    ensure(last.round() == 341_210.0, format!("terminal level {last}"))?;
    Ok(format!("identity residual {resid:.1e}; Dec 2024 level {last:.3}"))
}

fn criterion_6() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let c = ThreeSectorCycle {
            a12: rng.random_range(0.0..0.95),
            a23: rng.random_range(0.0..0.95),
            a31: rng.random_range(0.0..0.95),
            eta: rng.random_range(0.0..3.0),
        };
        let sales = [
            rng.random_range(0.2..5.0),
            rng.random_range(0.2..5.0),
            rng.random_range(0.2..5.0),
        ];
        let b = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let net = c.network(sales, b).map_err(|e| e.to_string())?;
        let shock = OilShock {
            d_omega: rng.random_range(-3.0..3.0),
            dz_tilde: (0..3).map(|_| rng.random_range(-1.0..1.0)).collect(),
        };
        let p0 = equilibrium_prices(&net.a, &net.b).map_err(|e| e.to_string())?;
        let r = employment_response(&net, &shock).map_err(|e| e.to_string())?;
        for i in 0..3 {
            let want = three_sector_analytic(&c, &shock, i).map_err(|e| e.to_string())?;
            worst = worst.max((r.dl[i] - want).abs());
            ensure(
                r.own_income[i] + r.own_demand[i] + r.network[i] == r.dln_l[i],
                "channels do not add up exactly",
            )?;
        }
        let other = OilShock {
            d_omega: 10.0,
            dz_tilde: vec![5.0, -5.0, 2.0],
        };
        employment_response(&net, &other).map_err(|e| e.to_string())?;
        ensure(
            equilibrium_prices(&net.a, &net.b).unwrap() == p0,
            "prices moved with the shock",
        )?;
    }
    ensure(worst < 1e-10, format!("matrix vs closed form differ by {worst:e}"))?;

    // worked example and the incomplete cycle
    let ex = ThreeSectorCycle {
        a12: 0.5,
        a23: 0.5,
        a31: 0.5,
        eta: 1.0,
    };
    let r = employment_response(
        &ex.network([1.0; 3], [0.0; 3]).unwrap(),
        &OilShock {
            d_omega: 3.0,
            dz_tilde: vec![0.0; 3],
        },
    )
    .map_err(|e| e.to_string())?;
    ensure(
        (r.dl[0] - 0.5).abs() < 1e-12,
        format!("worked example dl1 = {}", r.dl[0]),
    )?;
    let cut = ThreeSectorCycle {
        a12: 0.5,
        a23: 0.0,
        a31: 0.5,
        eta: 1.0,
    };
    let net = cut.network([1.0, 2.0, 3.0], [0.0; 3]).unwrap();
    let unit = employment_response(
        &net,
        &OilShock {
            d_omega: 0.0,
            dz_tilde: vec![0.0, 1.0, 0.0],
        },
    )
    .map_err(|e| e.to_string())?;
    ensure(unit.dln_l[0] == 0.0, format!("loading on dz2 is {}", unit.dln_l[0]))?;
    ensure(
        h_hat(&a_hat(&net).unwrap()).unwrap()[(1, 0)] == 0.0,
        "h_21 not exactly zero",
    )?;

    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), format!("took {elapsed:?}"))?;
    Ok(format!("max closed-form gap {worst:.1e}; {elapsed:.2?}"))
}

fn criterion_7() -> Check {
    let start = Instant::now();
    let (model, s) = fixture_model();
    let cfg = BootstrapConfig {
        replications: 40,
        block_length: 24,
        seed: 20240101,
        horizon: 15,
        centering: Centering::Bjt,
    };
    let a = irf_bands(&model, &s, &cfg, &CUMULATE_DEFAULT).map_err(|e| e.to_string())?;
    let b = irf_bands(&model, &s, &cfg, &CUMULATE_DEFAULT).map_err(|e| e.to_string())?;
    ensure(a == b, "bands differ between identical runs")?;
    for j in 0..4 {
        for i in 0..j {
            ensure(
                a.se[j][i][0] == 0.0,
                format!("se of structural zero ({i},{j}) is {}", a.se[j][i][0]),
            )?;
        }
    }

    let dgp = VarDgp {
        intercept: DVector::from_vec(vec![0.1, 0.0, -0.1]),
        coeffs: vec![DMatrix::from_row_slice(
            3,
            3,
            &[0.5, 0.1, 0.0, -0.2, 0.4, 0.1, 0.1, 0.0, 0.6],
        )],
        impact: DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.3, 0.8, 0.0, 0.2, 0.4, 0.5]),
    };
    let horizon = 15;
    let truth = dgp.irfs(horizon, &[false; 3]);
    let mc = BootstrapConfig {
        replications: 200,
        block_length: 24,
        seed: 7,
        horizon,
        centering: Centering::Bjt,
    };
    let (mut hit, mut total) = (0usize, 0usize);
    for rep in 0..50u64 {
        let y = dgp.simulate(400, 100, 1000 + rep);
        let names = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let cols = (0..3).map(|c| y.column(c).iter().copied().collect()).collect();
        let frame = TimeSeriesFrame::from_columns(ym("1950-01"), Frequency::Monthly, names, cols).unwrap();
        let m = estimate_ols(&frame, 1).map_err(|e| e.to_string())?;
        let st = identify_with(&m, 2).map_err(|e| e.to_string())?;
        let bands = irf_bands(
            &m,
            &st,
            &BootstrapConfig {
                seed: rep,
                ..mc.clone()
            },
            &[false; 3],
        )
        .map_err(|e| e.to_string())?;
        for j in 0..3 {
            for i in 0..3 {
                for h in 0..=horizon {
                    if h == 0 && j > i {
                        continue;
                    }
                    total += 1;
                    let t = truth.get(j, i, h);
                    if bands.lower(j, i, h, 1.0) <= t && t <= bands.upper(j, i, h, 1.0) {
                        hit += 1;
                    }
                }
            }
        }
    }
    let coverage = hit as f64 / total as f64;
    ensure(
        (0.50..=0.85).contains(&coverage),
        format!("68% band coverage {coverage:.3}"),
    )?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(300), format!("took {elapsed:?}"))?;
    Ok(format!(
        "deterministic; zero-SE structural zeros; coverage {coverage:.3}; {elapsed:.2?}"
    ))
}

fn criterion_8() -> Check {
    let (model, s) = fixture_model();
    let irf = model_irfs(&model, &s, 15, &CUMULATE_DEFAULT);
    let (supply, precautionary) = (0, 2);
    let (prod, price, emp) = (0, 2, 3);
    let p = &irf.responses[precautionary][price];
    ensure(
        p[0] > 0.0,
        format!("price impact of oil-specific demand shock is {}", p[0]),
    )?;
    ensure(
        p[1] > p[0] && p[2] > p[0],
        format!("price does not keep rising: {:?}", &p[..4]),
    )?;
    let q = &irf.responses[supply][prod];
    ensure(
        q.iter().all(|v| *v < 0.0),
        format!("cumulative production response to supply shock: {q:?}"),
    )?;
    let e3 = irf.get(precautionary, emp, 3);
    ensure(e3 > 0.0, format!("cumulative employment response at h=3 is {e3}"))?;

    // removing oil-specific demand shocks lowers late-window employment
    let hd = historical_decomposition(&model, &s, false);
    let emp_level = sources().load_inputs().map_err(|e| e.to_string())?.employment;
    let window = DateRange::new(ym("2010-01"), ym("2024-12")).unwrap();
    let spec = CounterfactualSpec {
        variable: emp,
        remove: Some(precautionary),
        window,
        base_level: emp_level.get(window.start).unwrap(),
        mean_growth: 0.0,
        convention: Convention::ExactIdentity,
        compounding: Compounding::Log,
    };
    let cf = *counterfactual_levels(&hd, &spec)
        .map_err(|e| e.to_string())?
        .levels
        .last()
        .unwrap();
    let actual = emp_level.get(window.end).unwrap();
    ensure(
        cf < actual,
        format!("counterfactual {cf:.0} not below actual {actual:.0}"),
    )?;
    Ok(format!(
        "price {:.4} -> {:.4} -> {:.4}; production impact {:.4}; employment h=3 {:.5}; Dec 2024 without oil-specific demand {:+.1}%",
        p[0],
        p[1],
        p[2],
        q[0],
        e3,
        100.0 * (cf / actual - 1.0)
    ))
}

fn criterion_9() -> Check {
    let (model, s) = fixture_model();
    let zeta = aggregate_shocks(model.sample.start, &s.oriented_shocks(), &s.labels).map_err(|e| e.to_string())?;
    let j = s.shock_index("oil-specific-demand").map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let obs = zeta
        .quarters
        .iter()
        .zip(&zeta.zeta[j])
        .map(|(d, z)| (*d, Some(0.3 * z + 1e-6 * rng.sample::<f64, _>(StandardNormal))))
        .collect();
    let w = RawSeries::new("wage", Frequency::Quarterly, obs).map_err(|e| e.to_string())?;
    let r = estimate_wage_irf(&w, &zeta, j, 8).map_err(|e| e.to_string())?;
    ensure((r.phi[0] - 0.3).abs() < 1e-4, format!("phi_0 = {}", r.phi[0]))?;
    let rest = r.phi[1..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    ensure(rest < 1e-4, format!("max |phi_i|, i >= 1 = {rest:e}"))?;
    Ok(format!("phi_0 = {:.6}; max other |phi| {rest:.1e}", r.phi[0]))
}

fn main() {
    // honor `cargo test -- <filter>` loosely: run everything unless asked to list
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [(&str, fn() -> Check, Option<Duration>); 9] = [
        ("identification identity", criterion_1, Some(Duration::from_secs(1))),
        ("mechanical FEVD row", criterion_2, None),
        ("FEVD normalization", criterion_3, None),
        ("IRF oracle", criterion_4, None),
        ("historical decomposition identity", criterion_5, None),
        ("network oracle equivalence", criterion_6, None),
        ("bootstrap determinism and structure", criterion_7, None),
        ("qualitative shape on fixture", criterion_8, None),
        ("wage-stage synthetic recovery", criterion_9, None),
    ];
    let mut failed = 0;
    for (n, (name, f, limit)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(r) => r,
            Err(p) => Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())),
        };
        let elapsed = t0.elapsed();
        let outcome = match (outcome, limit) {
            (Ok(_), Some(l)) if elapsed > *l => Err(format!("runtime {elapsed:?} exceeds {l:?}")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name} ({detail})", n + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} ({why})", n + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
