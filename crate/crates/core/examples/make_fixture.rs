//! Writes the synthetic fixture dataset under `fixtures/`.
//!
//! The series come from a four-variable structural VAR in the panel's units
//! (log growth of production and employment, an activity index, the log real
//! oil price), mapped back to raw published-style levels. Employment is
//! pinned to 266,426 in 2010-01 and 341,210 in 2024-12.
//!
//! Usage: cargo run -p oilshock-core --example make_fixture -- [out_dir]

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use oilshock::date::YearMonth;
use oilshock::sim::VarDgp;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const SEED: u64 = 19900101;
const BURN_IN: usize = 240;
const EMP_2010_01: f64 = 266_426.0;
const EMP_2024_12: f64 = 341_210.0;

fn dgp() -> VarDgp {
    let mut a1 = DMatrix::zeros(4, 4);
    let mut a2 = DMatrix::zeros(4, 4);
    // production growth
    a1[(0, 0)] = 0.15;
    // activity index
    a1[(1, 1)] = 0.85;
    a1[(1, 2)] = 4.0;
    a2[(1, 2)] = -4.0;
    // log real price: hump-shaped own dynamics
    a1[(2, 1)] = 0.0006;
    a1[(2, 2)] = 1.3;
    a2[(2, 2)] = -0.35;
    // employment growth rises with the level of the real price
    a1[(3, 3)] = 0.25;
    a1[(3, 2)] = 0.004;
    a1[(3, 1)] = 0.00002;

    let impact = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.010, 0.0, 0.0, 0.0, //
            -0.8, 7.0, 0.0, 0.0, //
            -0.015, 0.02, 0.07, 0.0, //
            0.0003, 0.0006, 0.0012, 0.004,
        ],
    );
    // long-run means: production +0.1%/month, price near ln(0.25)
    let intercept = DVector::from_vec(vec![0.00085, 0.0, -1.386 * 0.05, 0.001035 + 0.004 * 1.386]);
    VarDgp {
        intercept,
        coeffs: vec![a1, a2],
        impact,
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures"));
    fs::create_dir_all(&out)?;

    let start = YearMonth::new(1990, 1).unwrap();
    let end = YearMonth::new(2024, 12).unwrap();
    let n = start.months_until(end) as usize + 1;
    let dgp = dgp();
    let mut shocks = dgp.standard_shocks(n + BURN_IN, SEED);
    // a run of positive oil-specific demand shocks, 2010-2013
    let boom = start.months_until(YearMonth::new(2010, 1).unwrap()) as usize;
    for t in boom..boom + 48 {
        shocks[(BURN_IN + t, 2)] += 0.4;
    }
    let y = dgp.simulate_with_shocks(&shocks).rows(BURN_IN, n).into_owned();

    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let mut cpi = vec![127.4f64];
    for _ in 1..n {
        let g = 0.0022 + 0.002 * rng.sample::<f64, _>(StandardNormal);
        cpi.push(cpi.last().unwrap() * g.exp());
    }
    let cpi: Vec<f64> = cpi.iter().map(|c| (c * 1000.0).round() / 1000.0).collect();

    let mut production = vec![60_000.0f64];
    for t in 1..n {
        production.push(production[t - 1] * y[(t, 0)].exp());
    }

    // employment: pin both anchors by a constant drift over 2010-02..2024-12
    let t10 = boom;
    let mut growth: Vec<f64> = y.column(3).iter().copied().collect();
    let target = (EMP_2024_12 / EMP_2010_01).ln();
    let have: f64 = growth[t10 + 1..n].iter().sum();
    let drift = (target - have) / (n - t10 - 1) as f64;
    for g in &mut growth[t10 + 1..n] {
        *g += drift;
    }
    let mut emp = vec![0.0f64; n];
    emp[t10] = EMP_2010_01;
    for t in t10 + 1..n {
        emp[t] = emp[t - 1] * growth[t].exp();
    }
    for t in (0..t10).rev() {
        emp[t] = emp[t + 1] / growth[t + 1].exp();
    }
    eprintln!("employment drift adjustment over 2010-2024: {drift:.6} per month");

    let mut f = fs::File::create(out.join("oil_market.csv"))?;
    writeln!(f, "# synthetic series from crates/core/examples/make_fixture.rs")?;
    writeln!(f, "date,oil_production,igrea,rac_nominal,cpi")?;
    for t in 0..n {
        let d = start.add_months(t as i64);
        let rac = y[(t, 2)].exp() * cpi[t];
        writeln!(f, "{d},{:.1},{:.2},{:.2},{:.3}", production[t], y[(t, 1)], rac, cpi[t])?;
    }

    let mut f = fs::File::create(out.join("kern_employment.csv"))?;
    writeln!(f, "# synthetic series from crates/core/examples/make_fixture.rs")?;
    writeln!(f, "date,employment")?;
    for (t, e) in emp.iter().enumerate() {
        writeln!(f, "{},{}", start.add_months(t as i64), e.round() as i64)?;
    }

    // quarterly average weekly wage, responding to oil-specific demand shocks
    let mut f = fs::File::create(out.join("kern_wages.csv"))?;
    writeln!(f, "# synthetic series from crates/core/examples/make_fixture.rs")?;
    writeln!(f, "date,avg_weekly_wage")?;
    let mut log_real = 0.0f64;
    let cpi0 = (cpi[0] + cpi[1] + cpi[2]) / 3.0;
    for q in 0..n / 3 {
        let t = 3 * q;
        let zeta = (shocks[(BURN_IN + t, 2)] + shocks[(BURN_IN + t + 1, 2)] + shocks[(BURN_IN + t + 2, 2)]) / 3.0;
        if q > 0 {
            log_real += 0.002 + 0.006 * zeta + 0.008 * rng.sample::<f64, _>(StandardNormal);
        }
        let cpi_q = (cpi[t] + cpi[t + 1] + cpi[t + 2]) / 3.0;
        let wage = 700.0 * log_real.exp() * cpi_q / cpi0;
        writeln!(f, "{},{:.2}", start.add_months(t as i64), wage)?;
    }
    eprintln!("wrote fixtures to {}", out.display());
    Ok(())
}
