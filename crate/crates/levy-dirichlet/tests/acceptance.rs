//! Acceptance matrix: one PASS/FAIL line per criterion. The process exits
//! nonzero if any criterion fails.

use levy_dirichlet::blyth::{blyth_sequence, default_eta, prior_from_root, transient_lower_bound};
use levy_dirichlet::classify::{classify_exponent, potential_closed_form, potential_numeric, PotentialKind, Verdict};
use levy_dirichlet::density::{gaussian_pdf, marginal, stationarity_residual, PriorSpec};
use levy_dirichlet::dirichlet::{calibrate_normalization, dirichlet_form};
use levy_dirichlet::levy_model::{LevyExponent, ModelSpec};
use levy_dirichlet::paths::{ks_against_density, return_statistics, sample_increments, stream_rng};
use levy_dirichlet::risk::{bayes_risk_difference, domination_check, verify_theorem1, Method, MonteCarlo};
use levy_dirichlet::spectral_core::{Field, GridSpec};
use levy_dirichlet::variational::{dv_kl, kl_chain_rule_check, rate_function_probe};
use levy_dirichlet::Result;
use rand::Rng;
use std::f64::consts::PI;
use std::time::Instant;

type Check = Result<(bool, String)>;
type Criterion = (&'static str, fn() -> Check);

fn grid(d: usize, n: usize, l: f64) -> GridSpec<f64> {
    GridSpec::new(d, n, l).unwrap()
}

fn gauss(d: usize, c: f64) -> ModelSpec<f64> {
    ModelSpec::centered(LevyExponent::gaussian(d, c).unwrap())
}

fn cauchy(d: usize) -> ModelSpec<f64> {
    ModelSpec::centered(LevyExponent::cauchy(d, 1.0).unwrap())
}

fn stable(d: usize, a: f64) -> LevyExponent<f64> {
    LevyExponent::stable(d, 1.0, a).unwrap()
}

fn dichotomy() -> Check {
    let start = Instant::now();
    let cases = [
        (LevyExponent::gaussian(1, 1.0)?, Verdict::Recurrent),
        (LevyExponent::gaussian(2, 1.0)?, Verdict::Recurrent),
        (LevyExponent::gaussian(3, 1.0)?, Verdict::Transient),
        (stable(1, 1.0), Verdict::Recurrent),
        (stable(2, 1.0), Verdict::Transient),
        (stable(3, 1.0), Verdict::Transient),
        (stable(1, 0.5), Verdict::Transient),
        (stable(1, 0.8), Verdict::Transient),
        (stable(1, 1.2), Verdict::Recurrent),
        (stable(1, 1.5), Verdict::Recurrent),
    ];
    let mut wrong = Vec::new();
    for (e, expect) in &cases {
        let got = classify_exponent(e)?.verdict;
        if got != *expect {
            wrong.push(format!("{} -> {got}", e.label()));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((wrong.is_empty() && secs < 10.0, format!("{} cases, mismatches {wrong:?}, {secs:.2}s", cases.len())))
}

fn potentials() -> Check {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for r in [0.5, 1.0, 2.0] {
        for (m, kind, x) in [
            (gauss(3, 1.0), PotentialKind::Gaussian, vec![r, 0.0, 0.0]),
            (cauchy(2), PotentialKind::Cauchy, vec![0.0, r]),
        ] {
            let num = potential_numeric(&m, &x, 1e3)?;
            let exact = potential_closed_form(kind, m.d(), &x)?;
            worst = worst.max(num.value.map_or(f64::INFINITY, |v| (v / exact - 1.0).abs()));
        }
    }
    let line = potential_numeric(&cauchy(1), &[1.0], 1e3)?;
    let slope_err = (line.log_slope * PI - 1.0).abs();
    let secs = start.elapsed().as_secs_f64();
    let pass = worst < 0.01 && line.verdict == Verdict::Recurrent && slope_err < 0.1 && secs < 60.0;
    Ok((pass, format!("worst relative error {worst:.2e}, log slope {:.5} vs 1/pi {:.5}, {secs:.1}s", line.log_slope, 1.0 / PI)))
}

fn risk_form_identity() -> Check {
    let start = Instant::now();
    let g = grid(1, 4096, 40.0);
    let kappa = calibrate_normalization(1.0, 1.0, &g)?.kappa;
    let mut pass = true;
    let mut notes = vec![format!("kappa {kappa:.6}")];
    let mc = MonteCarlo::default();
    let mut check = |label: &str, m: ModelSpec<f64>, prior: &dyn Fn(&GridSpec<f64>) -> PriorSpec<f64>, g: GridSpec<f64>, tol: f64| -> Result<()> {
        let a = verify_theorem1(&m, &prior(&g), &g, kappa, Method::Quadrature, mc)?.relative_gap;
        let fine = g.refined();
        let b = verify_theorem1(&m, &prior(&fine), &fine, kappa, Method::Quadrature, mc)?.relative_gap;
        let ok = a < tol && (b <= a || b < tol);
        pass &= ok;
        notes.push(format!("{label} gap {:.2}% -> {:.2}% at 2n", 100.0 * a, 100.0 * b));
        Ok(())
    };
    for (v, tau2) in [(1.0, 1.0), (1.0, 4.0), (2.0, 1.0)] {
        check(&format!("gaussian({v},{tau2})"), gauss(1, v), &move |_| PriorSpec::gaussian(1, tau2), g, 0.02)?;
    }
    check("cauchy", cauchy(1), &|g| PriorSpec::gaussian_grid(*g, 4.0).unwrap(), grid(1, 4096, 200.0), 0.05)?;
    let secs = start.elapsed().as_secs_f64();
    notes.push(format!("{secs:.1}s"));
    Ok((pass && secs < 300.0, notes.join(", ")))
}

fn stationarity() -> Check {
    let a = stationarity_residual(&gauss(1, 1.0), &PriorSpec::gaussian(1, 1.0), &grid(1, 4096, 40.0))?;
    let b = stationarity_residual(&cauchy(1), &PriorSpec::gaussian(1, 4.0), &grid(1, 4096, 200.0))?;
    Ok((a < 1e-3 && b < 1e-3, format!("gaussian {a:.2e}, cauchy {b:.2e}")))
}

fn domination() -> Check {
    let thetas = vec![vec![-5.0], vec![0.0], vec![1.0], vec![7.0]];
    let closed = 0.5 - 0.5 * 2f64.ln();
    let g = domination_check(&gauss(1, 1.0), &thetas, &grid(1, 4096, 40.0), MonteCarlo::default())?;
    let c = domination_check(&cauchy(1), &thetas, &grid(1, 4096, 200.0), MonteCarlo::default())?;
    let close = g.iter().all(|x| (x.gap / closed - 1.0).abs() < 1e-3);
    let pass = close && g.iter().chain(&c).all(|x| x.significant());
    let gaps: Vec<String> = c.iter().map(|x| format!("{:.4}", x.gap)).collect();
    Ok((pass, format!("gaussian gap {:.5} (closed form {closed:.5}), cauchy gaps {gaps:?}", g[0].gap)))
}

fn donsker_varadhan() -> Check {
    let g = grid(1, 4096, 40.0);
    let p = Field::from_fn(g, |x| gaussian_pdf(x, &[0.0], 2.0));
    let q = Field::from_fn(g, |x| gaussian_pdf(x, &[1.0], 2.0));
    let r = dv_kl(&p, &q, &Field::constant(g, 0.0), 500, 1.0)?;
    let rel = (r.bound / 0.25 - 1.0).abs();
    Ok((r.invariant_holds() && rel < 0.05, format!("bound {:.5}, max excess over KL {:.2e}", r.bound, r.max_excess)))
}

fn blyth() -> Check {
    let kappa = calibrate_normalization(1.0, 1.0, &grid(1, 4096, 40.0))?.kappa;
    let n_list = [1, 10, 100, 1000];
    let g1 = grid(1, 4096, 200.0);
    let steps = blyth_sequence(&cauchy(1), &default_eta(&g1), &n_list, kappa)?;
    let e: Vec<f64> = steps.iter().map(|s| s.energy).collect();
    let decay = e[0] / e[3];
    let monotone = e.windows(2).all(|w| w[1] <= w[0]);
    let mut pass = decay >= 10.0 && monotone;
    let mut notes = vec![format!("cauchy d=1 energies {:?} (drop {decay:.2}x, monotone {monotone})", e.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>())];
    for (label, m, g) in [
        ("cauchy d=2", cauchy(2), grid(2, 256, 60.0)),
        ("stable 0.5 d=1", ModelSpec::centered(stable(1, 0.5)), grid(1, 4096, 200.0)),
    ] {
        let steps = blyth_sequence(&m, &default_eta(&g), &n_list, kappa)?;
        let mut worst_shift: f64 = 0.0;
        let mut holds = true;
        for s in &steps {
            let prior = prior_from_root(&s.root)?;
            let a = transient_lower_bound(&m, &prior, &g, kappa, 1e3, 64)?;
            let b = transient_lower_bound(&m, &prior, &g, kappa, 2e3, 64)?;
            holds &= a.holds() && b.holds();
            worst_shift = worst_shift.max((b.bound / a.bound - 1.0).abs());
        }
        pass &= holds && worst_shift < 0.05;
        notes.push(format!("{label}: bound <= energy {holds}, T_max doubling shift {:.2}%", 100.0 * worst_shift));
    }
    Ok((pass, notes.join("; ")))
}

fn rate_probe() -> Check {
    let g = grid(1, 4096, 40.0);
    let kappa = calibrate_normalization(1.0, 1.0, &g)?.kappa;
    let m = gauss(1, 1.0);
    let prior = PriorSpec::gaussian(1, 1.0);
    let probes = rate_function_probe(&m, &prior, &[2.0, 0.25], &g, kappa, 500)?;
    let brd = bayes_risk_difference(&m, &prior, &g, Method::Quadrature, MonteCarlo::default())?.value;
    let root = marginal(&m, &prior, &g)?.map(|v| v.max(0.0).sqrt());
    let form = dirichlet_form(&root, &m.exponent, kappa)?;
    let a = (probes[0].sup / brd - 1.0).abs();
    let b = (probes[1].scaled / form - 1.0).abs();
    Ok((
        a < 0.05 && b < 0.1,
        format!(
            "h=2c sup {:.5} vs risk difference {brd:.5} ({:.1}%); h=c/4 scaled {:.5} vs form {form:.5} ({:.2}%)",
            probes[0].sup,
            100.0 * a,
            probes[1].scaled,
            100.0 * b
        ),
    ))
}

fn chain_rule() -> Check {
    let mut rng = stream_rng(2024, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let rows = rng.random_range(1..=10);
        let cols = rng.random_range(1..=10);
        let mut joint = || -> Vec<Vec<f64>> {
            let raw: Vec<Vec<f64>> = (0..rows).map(|_| (0..cols).map(|_| rng.random::<f64>() + 1e-3).collect()).collect();
            let s: f64 = raw.iter().flatten().sum();
            raw.iter().map(|r| r.iter().map(|v| v / s).collect()).collect()
        };
        let (q, p) = (joint(), joint());
        worst = worst.max(kl_chain_rule_check(&q, &p)?.gap);
    }
    Ok((worst < 1e-10, format!("worst gap {worst:.2e} over 100 joints")))
}

fn simulation() -> Check {
    let rec = return_statistics(&LevyExponent::cauchy(1, 1.0)?, 1e4, 1.0, 1.0, 200, 1)?;
    let positive = rec.decades.iter().all(|d| d.mean > 0.0);
    let c2 = return_statistics(&LevyExponent::cauchy(2, 1.0)?, 1e4, 1.0, 1.0, 200, 1)?.final_share();
    let g3 = return_statistics(&LevyExponent::gaussian(3, 1.0)?, 1e4, 1.0, 1.0, 200, 1)?.final_share();
    let ks_grid = grid(1, 1 << 16, 400.0);
    let mut worst_ks: f64 = 0.0;
    for e in [
        LevyExponent::gaussian(1, 1.0)?,
        LevyExponent::cauchy(1, 1.0)?,
        stable(1, 0.5),
        LevyExponent::cauchy(2, 1.0)?,
        LevyExponent::gaussian(3, 1.0)?,
    ] {
        for t in [1.0, 4.0] {
            let xs = sample_increments(&e, t, 10_000, 7)?;
            worst_ks = worst_ks.max(ks_against_density(&xs, &e, t, &ks_grid)?);
        }
    }
    Ok((
        positive && c2 < 0.1 && g3 < 0.1 && worst_ks < 0.02,
        format!("cauchy d=1 decades positive {positive}, final shares {c2:.4} / {g3:.4}, worst KS {worst_ks:.4}"),
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("dichotomy matrix", dichotomy),
        ("potential closed forms", potentials),
        ("risk difference equals the Dirichlet form", risk_form_identity),
        ("stationarity of the marginal", stationarity),
        ("domination of the plug-in predictive", domination),
        ("Donsker-Varadhan bound", donsker_varadhan),
        ("Blyth construction", blyth),
        ("rate-function probe", rate_probe),
        ("KL chain rule", chain_rule),
        ("simulation witness", simulation),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let (pass, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!pass);
        println!("{} criterion {}: {name}: {detail}", if pass { "PASS" } else { "FAIL" }, i + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
