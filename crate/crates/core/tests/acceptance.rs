//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! fails. Runs without the libtest harness so the lines are never captured.

use std::sync::Arc;
use std::time::Instant;

use curvflow::body::random_pinched_body;
use curvflow::flow::{rescale, sandwich_check, volume_decay_check, Flow, FlowConfig, RunStatus, Trajectory};
use curvflow::geometry::{diskant_bounds, direct_radii, geombound_check, mixed_volumes};
use curvflow::speeds::check_conditions;
use curvflow::verify::residual::observed_orders;
use curvflow::verify::{
    all_suites, curve_evolution_residual, pinching_monitors, smoczyk_monitor, speed_lowerbound_fit, tso_series,
    Quantity,
};
use curvflow::{curvature, SpeedSpec, SphereGrid, SupportFunction};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn h2() -> SpeedSpec {
    SpeedSpec::parse("pow_mean,alpha=2").unwrap()
}

fn run(degree: usize, dim: usize, stop_fraction: f64, start: impl Fn(Arc<SphereGrid>) -> SupportFunction) -> Trajectory {
    let mut cfg = FlowConfig::new(h2(), degree);
    cfg.stop_fraction = stop_fraction;
    let flow = Flow::new(cfg, dim).unwrap();
    flow.run(&start(flow.grid().clone())).unwrap()
}

fn sphere_regression() -> Outcome {
    let clock = Instant::now();
    let traj = run(16, 2, 0.2, |g| SupportFunction::sphere(g, 1.0).unwrap());
    let mut worst = 0.0f64;
    for s in &traj.snapshots {
        let exact = (1.0 - 12.0 * s.t).cbrt();
        worst = worst.max((s.radii.r_minus - exact).abs() / exact);
    }
    let secs = clock.elapsed().as_secs_f64();
    let t_err = (traj.t_hat - 1.0 / 12.0).abs();
    let ok = traj.status == RunStatus::Threshold && worst <= 1e-5 && t_err <= 1e-4 && secs <= 60.0;
    outcome(
        ok,
        format!(
            "max rel r_- error {worst:.2e}, final r_- {:.3}, T_hat {:.10} (|err| {t_err:.1e}), {secs:.1} s",
            traj.last().radii.r_minus,
            traj.t_hat
        ),
    )
}

fn lemma_suites() -> Outcome {
    let clock = Instant::now();
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    let mut suites = 0;
    for n in [2, 3, 4] {
        for r in all_suites(n, 100_000, 2024 + n as u64).unwrap() {
            suites += 1;
            violations += r.violations;
            worst = worst.min(r.worst_margin);
        }
    }
    let secs = clock.elapsed().as_secs_f64();
    outcome(
        violations == 0 && suites == 12 && secs <= 30.0,
        format!("{suites} suites x 1e5 samples, {violations} violations, worst margin {worst:.2e}, {secs:.1} s"),
    )
}

fn speed_conditions() -> Outcome {
    let clock = Instant::now();
    let mut failures = Vec::new();
    let mut grad_err = 0.0f64;
    let mut cases = 0;
    for name in ["pow_mean", "pow_Ek:2", "pow_gauss", "pow_norm"] {
        for alpha in [1.5, 2.0, 3.0] {
            for n in [2, 3] {
                let spec = SpeedSpec::parse(&format!("{name},alpha={alpha}")).unwrap();
                let r = check_conditions(&spec, n, 1000, 11);
                cases += 1;
                grad_err = grad_err.max(r.max_gradient_error);
                if !r.passed() || r.max_gradient_error > 1e-5 {
                    failures.push(format!("{name} alpha={alpha} n={n}"));
                }
            }
        }
    }
    let secs = clock.elapsed().as_secs_f64();
    outcome(
        failures.is_empty() && secs <= 60.0,
        format!(
            "{cases} speed/alpha/n cases, failing {failures:?}, max gradient rel error {grad_err:.1e}, {secs:.1} s"
        ),
    )
}

/// Unit ball, ellipsoid (1,1,1.2) and 20 random in-cone bodies at L = 32.
fn body_set() -> Vec<(String, SupportFunction)> {
    let grid = Arc::new(SphereGrid::sphere(32));
    let mut bodies = vec![
        ("ball".to_string(), SupportFunction::sphere(grid.clone(), 1.0).unwrap()),
        ("ellipsoid".to_string(), SupportFunction::ellipsoid(grid.clone(), &[1.0, 1.0, 1.2]).unwrap()),
    ];
    let delta0 = h2().delta0(2);
    for seed in 0..20 {
        bodies.push((format!("random{seed}"), random_pinched_body(grid.clone(), 100 + seed, 0.03, delta0).unwrap()));
    }
    bodies
}

fn mixed_volume_consistency(bodies: &[(String, SupportFunction)]) -> Outcome {
    let mut worst = (0.0f64, String::new());
    let mut v3 = f64::NAN;
    for (name, b) in bodies {
        let mv = mixed_volumes(b, &curvature(b).unwrap());
        if mv.formula_gap() > worst.0 {
            worst = (mv.formula_gap(), name.clone());
        }
        if name == "ellipsoid" {
            v3 = mv.v[3];
        }
    }
    outcome(
        worst.0 <= 1e-6 && (v3 - 1.2).abs() <= 1e-6,
        format!("{} bodies, worst two-formula gap {:.1e} ({}), ellipsoid V_3 = {v3:.9}", bodies.len(), worst.0, worst.1),
    )
}

fn diskant_sandwich(bodies: &[(String, SupportFunction)]) -> Outcome {
    let slack = 1e-3;
    let mut bad = Vec::new();
    let mut ball = [f64::NAN; 4];
    let mut tightest = f64::INFINITY;
    for (name, b) in bodies {
        let r = direct_radii(b).unwrap();
        let d = diskant_bounds(&mixed_volumes(b, &curvature(b).unwrap())).unwrap();
        if !(d.lower <= r.r_minus * (1.0 + slack) && r.r_plus <= d.upper * (1.0 + slack)) {
            bad.push(name.clone());
        }
        tightest = tightest.min((r.r_minus - d.lower) / r.r_minus).min((d.upper - r.r_plus) / r.r_plus);
        if name == "ball" {
            ball = [d.lower, r.r_minus, r.r_plus, d.upper];
        }
    }
    let ball_ok = ball.iter().all(|x| (x - 1.0).abs() <= 1e-6);
    outcome(
        bad.is_empty() && ball_ok,
        format!(
            "violations {bad:?}, smallest relative gap {tightest:.1e}, ball (lower, r_-, r_+, upper) = ({:.8}, {:.8}, {:.8}, {:.8})",
            ball[0], ball[1], ball[2], ball[3]
        ),
    )
}

struct EllipsoidRun {
    traj: Trajectory,
    sigma: f64,
    secs: f64,
}

fn ellipsoid_run() -> EllipsoidRun {
    let clock = Instant::now();
    let traj = run(24, 2, 0.1, |g| SupportFunction::ellipsoid(g, &[1.0, 1.0, 1.1]).unwrap());
    let sigma = 1.05 * traj.snapshots[0].summary.pinch_max;
    EllipsoidRun {
        traj,
        sigma,
        secs: clock.elapsed().as_secs_f64(),
    }
}

fn pinching_preserved(e: &EllipsoidRun) -> Outcome {
    let p = pinching_monitors(&e.traj, e.sigma, None, &[]).unwrap();
    let worst = p
        .rows
        .iter()
        .map(|r| r.z_sigma_max / (e.sigma * r.h_max * r.h_max))
        .fold(f64::NEG_INFINITY, f64::max);
    let reached = e.traj.status == RunStatus::Threshold && e.traj.last().radii.r_minus <= 0.1;
    outcome(
        p.z_violations == 0 && reached && e.secs <= 600.0,
        format!(
            "sigma {:.4e}, {} snapshots to r_- = {:.4}, {} Z violations, max Z/(sigma H^2) {worst:.3e}, run {:.1} s",
            e.sigma,
            p.rows.len(),
            e.traj.last().radii.r_minus,
            p.z_violations,
            e.secs
        ),
    )
}

fn improved_pinching(e: &EllipsoidRun) -> Outcome {
    let p = pinching_monitors(&e.traj, e.sigma, None, &[]).unwrap();
    let lambda = p.lambda_hat.unwrap_or(f64::NAN);
    outcome(
        p.late_decreasing && lambda > 0.0,
        format!(
            "pinch_max decreasing over last half: {}, lambda_hat {lambda:.3} from {} snapshots, final pinch_max {:.2e}",
            p.late_decreasing,
            p.qualifying,
            e.traj.last().summary.pinch_max
        ),
    )
}

fn radius_ratio(e: &EllipsoidRun) -> Outcome {
    let radii: Vec<_> = e.traj.snapshots.iter().map(|s| s.radii).collect();
    let table = geombound_check(&radii, &[0.01, 0.05]);
    let (first, last) = (radii[0].ratio(), radii.last().unwrap().ratio());
    let finite = table.thresholds.iter().all(|(_, c)| c.is_finite());
    outcome(
        last <= 1.01 && last < first && finite,
        format!("ratio {first:.5} -> {last:.7}, C2_hat(rho) = {:?}", table.thresholds),
    )
}

fn rescaled_roundness(e: &EllipsoidRun) -> Outcome {
    let r = rescale(&e.traj, e.traj.snapshots.len() - 1).unwrap();
    outcome(
        r.max_deviation <= 0.01,
        format!("max |s~ - 1| = {:.3e} at t = {:.6}, R(t) = {:.5}", r.max_deviation, r.t, r.radius),
    )
}

fn speed_lower_bound(e: &EllipsoidRun) -> Outcome {
    let fit = speed_lowerbound_fit(&e.traj).unwrap();
    let sm = smoczyk_monitor(&e.traj, 0, &e.traj.p_hat).unwrap();
    let tso = tso_series(&e.traj, e.sigma).unwrap();
    outcome(
        (fit.slope + 2.0 / 3.0).abs() <= 0.05 && sm.min_margin >= -1e-8 && tso.violations == 0,
        format!(
            "slope {:.4} over {} points, Smoczyk min {:.3e}, Tso {} checks / {} violations (worst Q/bound {:.3})",
            fit.slope, fit.points, sm.min_margin, tso.checked, tso.violations, tso.worst_ratio
        ),
    )
}

fn lifetime_sandwich() -> Outcome {
    let clock = Instant::now();
    let delta0 = h2().delta0(2);
    let mut bad = Vec::new();
    let mut spread = Vec::new();
    for seed in 0..5u64 {
        let traj = run(16, 2, 0.1, |g| random_pinched_body(g, 500 + seed, 0.03, delta0).unwrap());
        let s = &traj.snapshots[0];
        let lo = traj.sphere_lifetime(s.radii.r_minus);
        let hi = traj.sphere_lifetime(s.radii.r_plus);
        spread.push(format!("{lo:.4}<={:.4}<={hi:.4}", traj.t_hat));
        if traj.status != RunStatus::Threshold || !sandwich_check(&traj, 0.02).passed {
            bad.push(seed);
        }
    }
    outcome(
        bad.is_empty(),
        format!(
            "5 bodies, failing seeds {bad:?}, initial sandwiches [{}], {:.1} s",
            spread.join(", "),
            clock.elapsed().as_secs_f64()
        ),
    )
}

fn curve_residual() -> Outcome {
    let mut levels = Vec::new();
    let mut inconclusive = false;
    for (dt, l) in [(1e-3, 16), (5e-4, 24), (2.5e-4, 32)] {
        let mut cfg = FlowConfig::new(h2(), l);
        cfg.fixed_dt = Some(dt);
        cfg.end_time = Some(0.01);
        cfg.cadence = 1;
        let flow = Flow::new(cfg, 1).unwrap();
        let traj = flow
            .run(&SupportFunction::ellipsoid(flow.grid().clone(), &[1.2, 1.0]).unwrap())
            .unwrap();
        let r = curve_evolution_residual(&traj, Quantity::Curvature).unwrap();
        inconclusive |= r.inconclusive;
        levels.push((dt, r.max_between(0.002, 0.008)));
    }
    let orders = observed_orders(&levels);
    outcome(
        !inconclusive && orders.iter().all(|p| *p >= 1.8),
        format!(
            "residuals {:?}, observed orders {:?}",
            levels.iter().map(|l| format!("{:.2e}", l.1)).collect::<Vec<_>>(),
            orders.iter().map(|p| format!("{p:.2}")).collect::<Vec<_>>()
        ),
    )
}

fn volume_decay(e: &EllipsoidRun) -> Outcome {
    let v = volume_decay_check(&e.traj).unwrap();
    outcome(
        v.max_relative <= 0.01,
        format!("{} interior snapshots, max relative mismatch {:.2e}", v.rows.len(), v.max_relative),
    )
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |id: u32, name: &'static str, o: Outcome| {
        println!("{} {id:>2} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o));
    };
    report(1, "sphere regression", sphere_regression());
    report(2, "lemma suites", lemma_suites());
    report(3, "speed conditions", speed_conditions());
    let bodies = body_set();
    report(4, "mixed-volume consistency", mixed_volume_consistency(&bodies));
    report(5, "Diskant sandwich", diskant_sandwich(&bodies));
    let e = ellipsoid_run();
    report(6, "pinching preservation", pinching_preserved(&e));
    report(7, "improved pinching", improved_pinching(&e));
    report(8, "radius-ratio convergence", radius_ratio(&e));
    report(9, "rescaled roundness", rescaled_roundness(&e));
    report(10, "speed lower bound", speed_lower_bound(&e));
    report(11, "lifetime sandwich", lifetime_sandwich());
    report(12, "curve evolution residual", curve_residual());
    report(13, "volume-decay identity", volume_decay(&e));
    let failed: Vec<u32> = results.iter().filter(|r| !r.2.passed).map(|r| r.0).collect();
    println!(
        "acceptance: {} of {} criteria passed{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() { String::new() } else { format!("; failed {failed:?}") }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
