//! Acceptance suite: runs each criterion at its stated tolerance and runtime
//! budget and prints one PASS/FAIL line per criterion.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use purify_core::certificates::{certify_thm1, certify_thm2, GtildeBasis, Thm2Certificate};
use purify_core::channels::{depolarize_bilocal, depolarize_global, gamma_effective, NoiseModel};
use purify_core::experiment::{compute, Command, CurvePoint, ExperimentConfig, BOUND_SLACK, ORDERING_SLACK};
use purify_core::protocols::{
    bell_states, closed_form_gain, phase2_candidate, phase2_gain, swap_test, symmetric_projection, StateSet,
};
use purify_core::sdp::{build_problem, solve, verify_dual, SolverOptions};
use purify_core::tensor::{fidelity_pure, random};
use purify_core::variational::{train, TrainConfig};
use purify_core::Operator;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect()
}

fn c1_baseline_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let states: Vec<Operator> = (0..20).map(|_| random::pure_state(&[2, 2], &mut rng)).collect();
    let mut worst: f64 = 0.0;
    for g in grid(0.0, 1.0, 0.05) {
        let noise = NoiseModel::global(g).map_err(|e| e.to_string())?;
        for psi in &states {
            let f = fidelity_pure(psi, &noise.apply(psi).unwrap()).unwrap();
            worst = worst.max((f - (1.0 - 0.75 * g)).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:.3e}"))?;
    Ok(format!("max deviation {worst:.1e} over 21 x 20"))
}

fn c2_bilocal_global() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let levels = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let w = random::su2(&mut rng).kron(&random::su2(&mut rng)).unwrap();
        let rho = bell_states()[0].conjugate_by(&w).unwrap();
        for g1 in levels {
            for g2 in levels {
                let a = depolarize_bilocal(&rho, g1, g2).unwrap();
                let b = depolarize_global(&rho, gamma_effective(g1, g2)).unwrap();
                worst = worst.max(a.max_abs_diff(&b));
            }
        }
    }
    ensure(worst <= 1e-12, || format!("max elementwise deviation {worst:.3e}"))?;
    Ok(format!("max elementwise deviation {worst:.1e} over 20 x 25"))
}

fn c3_symmetric_projection() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut tested = 0;
    let mut worst_margin = f64::INFINITY;
    while tested < 200 {
        let rho = random::density(&[2, 2], 4, &mut rng);
        let ev = rho.eigenvalues().unwrap();
        if ev[0] - ev[1] < 1e-3 {
            continue;
        }
        for n in [2, 3, 4] {
            let out = symmetric_projection(&rho, n).map_err(|e| e.to_string())?;
            let top = out.state.max_eigenvalue().unwrap();
            worst_margin = worst_margin.min(top - ev[0]);
        }
        tested += 1;
    }
    ensure(worst_margin >= -1e-12, || format!("top eigenvalue decreased by {:.3e}", -worst_margin))?;

    let mut worst_swap: f64 = 0.0;
    for _ in 0..50 {
        let rho = random::density(&[2, 2], 3, &mut rng);
        let circuit = swap_test(&rho, &rho).map_err(|e| e.to_string())?;
        let formula = symmetric_projection(&rho, 2).map_err(|e| e.to_string())?;
        worst_swap = worst_swap
            .max(circuit.state.max_abs_diff(&formula.state))
            .max((circuit.success_probability - formula.success_probability).abs());
    }
    ensure(worst_swap <= 1e-12, || format!("swap test deviates by {worst_swap:.3e}"))?;
    Ok(format!("min eigenvalue margin {worst_margin:.2e}; swap/formula deviation {worst_swap:.1e}"))
}

fn c4_closed_form() -> Outcome {
    let candidate = phase2_candidate().map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    let mut min_gain = f64::INFINITY;
    for alpha in grid(0.0, 1.0, 0.1) {
        for gamma in grid(0.0, 0.4, 0.05) {
            let closed = closed_form_gain(alpha, gamma).unwrap();
            let simulated = phase2_gain(alpha, gamma, &candidate).map_err(|e| e.to_string())?;
            worst = worst.max((simulated - closed).abs());
            min_gain = min_gain.min(closed).min(simulated);
        }
    }
    ensure(worst <= 1e-9, || format!("max |simulated - closed| {worst:.3e}"))?;
    ensure(min_gain >= -1e-12, || format!("negative gain {min_gain:.3e}"))?;
    Ok(format!("max |simulated - closed| {worst:.1e}; min gain {min_gain:.2e} on 11 x 9"))
}

fn c5_thm2() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for p_bar in [0.1, 1.0] {
        for gp in grid(0.05, 0.95, 0.05) {
            let report = certify_thm2(gp, p_bar).map_err(|e| e.to_string())?;
            ensure(report.passed(), || format!("gamma'={gp} P={p_bar}: {}", report.conclusion))?;
            for check in &report.checks {
                ensure(check.residual <= 1e-9, || format!("gamma'={gp} {}: {:.3e}", check.name, check.residual))?;
            }
            let eig = report.checks.iter().find(|c| c.name == "slack_top_nonzero_eigenvalue").unwrap();
            ensure(eig.residual <= 1e-10, || format!("eigenvalue residual {:.3e}", eig.residual))?;
            let exact = 1.0 - 0.75 * gp;
            ensure((report.bound - exact).abs() <= 1e-12, || {
                format!("gamma'={gp}: bound {} vs {exact}", report.bound)
            })?;
            worst = worst.max(report.max_residual());
            count += 1;
        }
    }
    Ok(format!("{count} certificates, max residual {worst:.1e}"))
}

fn c6_thm1() -> Outcome {
    let basis = GtildeBasis::bundled().map_err(|e| e.to_string())?;
    let unitarity = basis.g.unitarity_residual();
    ensure(unitarity <= 1e-12, || format!("G~ unitarity residual {unitarity:.3e}"))?;
    ensure(basis.block_residual <= 1e-10, || format!("block residual {:.3e}", basis.block_residual))?;
    let mut worst: f64 = 0.0;
    for gamma in grid(0.1, 0.9, 0.1) {
        let report = certify_thm1(gamma).map_err(|e| e.to_string())?;
        ensure(report.passed(), || format!("gamma={gamma}: {}", report.conclusion))?;
        ensure(report.bound.abs() <= 1e-12, || format!("gamma={gamma}: bound {}", report.bound))?;
        for name in [
            "block_m11_partial_trace",
            "block_m22_partial_trace",
            "block_m33_trace",
            "block_m00_diagonalization",
            "slack_identity",
        ] {
            let check = report.checks.iter().find(|c| c.name == name).unwrap();
            ensure(check.residual <= 1e-10, || format!("gamma={gamma} {name}: {:.3e}", check.residual))?;
            worst = worst.max(check.residual);
        }
    }
    Ok(format!(
        "unitarity {unitarity:.1e}, block {:.1e}, identities max {worst:.1e}, order {}",
        basis.block_residual,
        basis.order_labels()
    ))
}

fn c7_sdp_cross_check() -> Outcome {
    let mut worst: f64 = 0.0;
    for p_bar in [0.1, 1.0] {
        for gp in [0.1, 0.36, 0.6] {
            let problem = build_problem(&StateSet::bell(), &NoiseModel::global(gp).unwrap(), p_bar)
                .map_err(|e| e.to_string())?;
            let solution = solve(&problem, &SolverOptions::default()).map_err(|e| e.to_string())?;
            let exact = 1.0 - 0.75 * gp;
            let dev = (solution.objective - exact).abs();
            ensure(dev <= 1e-3, || format!("gamma'={gp} P={p_bar}: {} vs {exact}", solution.objective))?;
            let cert = Thm2Certificate::new(gp, p_bar).unwrap().to_dual(4);
            let bound = verify_dual(&problem, &cert).map_err(|e| e.to_string())?;
            let slack = solution.objective_uncertainty.max(1e-9);
            ensure(solution.objective <= bound + slack, || {
                format!("weak duality violated: {} > {bound}", solution.objective)
            })?;
            worst = worst.max(dev);
        }
    }
    Ok(format!("max |solver - exact| {worst:.1e}; weak duality holds"))
}

struct Figure3 {
    points: Vec<CurvePoint>,
    csv: String,
}

fn c8_figure3(out: &mut Option<Figure3>) -> Outcome {
    let config = ExperimentConfig::new(Command::Figure3);
    let (result, _) = compute(&config).map_err(|e| e.to_string())?;
    let points = result.curve().unwrap().to_vec();
    ensure(points.len() == 9, || format!("{} rows", points.len()))?;
    let mut min_gap = f64::INFINITY;
    for p in &points {
        let analytic = p.analytic.unwrap();
        let optimized = p.optimized.unwrap();
        let bound = p.ppt_bound.unwrap();
        ensure(analytic >= p.baseline - ORDERING_SLACK, || format!("gamma={}: analytic {analytic} < baseline {}", p.gamma, p.baseline))?;
        ensure(optimized >= analytic - ORDERING_SLACK, || format!("gamma={}: optimized {optimized} < analytic {analytic}", p.gamma))?;
        ensure(optimized <= bound + BOUND_SLACK, || format!("gamma={}: optimized {optimized} > bound {bound}", p.gamma))?;
        min_gap = min_gap.min(bound - optimized);
    }
    let csv = result.to_csv().map_err(|e| e.to_string())?;
    *out = Some(Figure3 { points, csv });
    Ok(format!("ordering holds on 9 rows; min bound - optimized {min_gap:.2e}"))
}

fn c9_reproducibility(figure: &Option<Figure3>) -> Outcome {
    let mut config = TrainConfig::new(StateSet::sd(), NoiseModel::bilocal(0.2, 0.2).unwrap());
    config.seed = 9;
    let a = train(&config).map_err(|e| e.to_string())?;
    let b = train(&config).map_err(|e| e.to_string())?;
    let bits = |h: &[f64]| h.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    ensure(bits(&a.cost_history) == bits(&b.cost_history), || "cost histories differ".into())?;

    let figure = figure.as_ref().ok_or("figure3 run unavailable")?;
    // recompute two rows independently and compare with the full run
    let mut config = ExperimentConfig::new(Command::Figure3);
    config.gamma_grid = vec![0.2, 0.4];
    let (rerun, _) = compute(&config).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for p in rerun.curve().unwrap() {
        let q = figure.points.iter().find(|q| q.gamma == p.gamma).ok_or("row missing")?;
        let fields = |c: &CurvePoint| {
            [Some(c.baseline), c.analytic, c.optimized, c.ppt_bound, c.p_bar_achieved]
        };
        for (x, y) in fields(p).iter().zip(fields(q)) {
            worst = worst.max((x.unwrap() - y.unwrap()).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("CSV fields differ by {worst:.3e}"))?;
    let rerun_full = figure.csv.lines().count();
    Ok(format!(
        "bitwise-identical cost histories; rerun rows match to {worst:.1e} ({} csv lines)",
        rerun_full
    ))
}

fn main() -> ExitCode {
    let mut figure = None;
    let mut failures = 0;
    let mut report = |id: u32, name: &str, budget: Duration, f: &mut dyn FnMut() -> Outcome| {
        let started = Instant::now();
        let result = f();
        let elapsed = started.elapsed();
        let (status, detail) = match result {
            Ok(_) if elapsed > budget => ("FAIL", format!("runtime {elapsed:.1?} over budget {budget:?}")),
            Ok(d) => ("PASS", d),
            Err(e) => ("FAIL", e),
        };
        if status == "FAIL" {
            failures += 1;
        }
        println!("criterion {id} [{status}] {name} ({elapsed:.1?}): {detail}");
    };
    let s = Duration::from_secs;
    report(1, "baseline identity", s(1), &mut c1_baseline_identity);
    report(2, "bi-local/global equivalence", s(1), &mut c2_bilocal_global);
    report(3, "symmetric projection suite", s(10), &mut c3_symmetric_projection);
    report(4, "closed-form/circuit equivalence", s(30), &mut c4_closed_form);
    report(5, "Bell-set dual certificate", s(60), &mut c5_thm2);
    report(6, "all-states dual certificate", s(60), &mut c6_thm1);
    report(7, "SDP solver cross-check", s(600), &mut c7_sdp_cross_check);
    report(8, "figure3 ordering", s(1800), &mut || c8_figure3(&mut figure));
    report(9, "reproducibility", s(1800), &mut || c9_reproducibility(&figure));
    if failures == 0 {
        println!("acceptance: all 9 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} of 9 criteria failed");
        ExitCode::FAILURE
    }
}
