use graphnls::fem::{FemSpace, GridFunction};
use graphnls::graph::{build_standard, GraphKind};
use graphnls::soliton::{exponents_and_lambda, Soliton};
use graphnls::solver::*;
use graphnls::verification::{mountain_pass_solution, PipelineOptions};
use graphnls::Error;

fn line(h: f64, l: f64) -> std::sync::Arc<FemSpace<f64>> {
    FemSpace::build(&build_standard(&GraphKind::Line).unwrap(), h, l).unwrap()
}

fn sampled(space: &std::sync::Arc<FemSpace<f64>>, p: f64, mu: f64, rho: f64) -> (GridFunction<f64>, f64) {
    let (_, _, lambda) = exponents_and_lambda(p, mu, rho).unwrap();
    let s = Soliton::from_lambda(p, lambda, rho).unwrap();
    (GridFunction::from_fn(space.clone(), |_, x| s.eval(x)), lambda)
}

fn newton_lambda(h: f64) -> (StationarySolution<f64>, f64) {
    let space = line(h, 30.0);
    let (u0, lambda) = sampled(&space, 7.0, 2.5, 1.0);
    let sol = newton_constrained(&u0, 2.5, 1.0, 7.0, &SolverConfig::default()).unwrap();
    assert!(sol.iterations <= 5, "{} iterations", sol.iterations);
    (sol, lambda)
}

#[test]
fn newton_from_sampled_soliton() {
    let (coarse, _) = newton_lambda(0.004);
    let (sol, lambda) = newton_lambda(0.002);
    let extrapolated = sol.lambda + (sol.lambda - coarse.lambda) / 3.0;
    assert!((extrapolated - lambda).abs() <= 1e-6, "{extrapolated} vs {lambda}");
    assert!((sol.lambda - lambda).abs() <= 1e-4);
    assert!(((sol.mu - 2.5) / 2.5).abs() <= 1e-10);
    assert!(sol.positive);
    let formula = multiplier(&sol.u, sol.mu, 1.0, 7.0);
    assert!(((formula - sol.lambda) / sol.lambda).abs() < 1e-8);
    assert!((sol.residual - sol.u.pde_residual(sol.lambda, 1.0, 7.0)).abs() <= 1e-12 * sol.residual.max(1.0));
}

#[test]
fn multiplier_of_sampled_soliton() {
    let m = |h: f64| {
        let (u, lambda) = sampled(&line(h, 30.0), 7.0, 2.5, 1.0);
        (multiplier(&u, u.l2sq(), 1.0, 7.0), lambda)
    };
    let ((a, _), (b, lambda)) = (m(0.004), m(0.002));
    assert!((b + (b - a) / 3.0 - lambda).abs() <= 1e-6);
}

#[test]
fn constants_on_a_loop() {
    let g = build_standard(&GraphKind::Loop(3.0)).unwrap();
    let space = FemSpace::build(&g, 0.05, 1.0).unwrap();
    let (mu, p, rho) = (1.5, 7.0, 0.8);
    let c = (mu / 3.0f64).sqrt();
    let bumpy = GridFunction::from_fn(space.clone(), |_, x| c * (1.0 + 0.01 * (2.0 * std::f64::consts::PI * x / 3.0).cos()));
    let sol = newton_constrained(&bumpy, mu, rho, p, &SolverConfig::default()).unwrap();
    assert!(sol.u.values().iter().all(|&v| (v - c).abs() < 1e-9));
    assert!((sol.lambda - rho * c.powf(p - 2.0)).abs() < 1e-9);
    let k = GridFunction::constant(space, 2.0);
    assert!((multiplier(&k, k.l2sq(), 1.0, 7.0) - 2f64.powf(5.0)).abs() < 1e-9);
}

#[test]
fn explicit_solution_is_a_newton_fixed_point() {
    let g = build_standard(&GraphKind::TGraph { pendant_len: 1.0 }).unwrap();
    let space = FemSpace::build(&g, 0.002f64, 30.0).unwrap();
    let ex = explicit_even_halfline_solution(&space, 50.0f64, 7.0).unwrap();
    assert!(ex.solution.energy < 0.0);
    assert!(ex.solution.positive);
    let sol = newton_constrained(&ex.solution.u, ex.solution.mu, 1.0, 7.0, &SolverConfig::default()).unwrap();
    let diff: f64 = sol
        .u
        .values()
        .iter()
        .zip(ex.solution.u.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(diff / ex.solution.sup() < 1e-3, "correction {diff}");
    assert!(((sol.lambda - 50.0) / 50.0).abs() < 1e-3);
}

#[test]
fn explicit_rejects_bad_topologies() {
    for kind in [GraphKind::Tadpole { loop_len: 2.0 }, GraphKind::Star(4), GraphKind::Star(3)] {
        let g = build_standard(&kind).unwrap();
        let space = FemSpace::build(&g, 0.05, 10.0).unwrap();
        assert!(matches!(
            explicit_even_halfline_solution(&space, 50.0, 7.0),
            Err(Error::UnsupportedTopology(_))
        ));
    }
    assert!(explicit_energy(1.0, 2, 0.01, 7.0).unwrap() > 0.0);
}

#[test]
fn subcritical_flow_finds_the_soliton() {
    let (p, mu) = (4.0, 1.0);
    let space = line(0.01, 60.0);
    let bump = GridFunction::from_fn(space.clone(), |_, x| (-(x - 1.0).powi(2) / 4.0).exp());
    let sol = gradient_flow_normalized(&bump, mu, 1.0, p, &SolverConfig::default()).unwrap();
    let (_, _, lambda) = exponents_and_lambda(p, mu, 1.0).unwrap();
    let s = Soliton::from_lambda(p, lambda, 1.0).unwrap();
    assert!(sol.positive);
    assert!(((sol.lambda - lambda) / lambda).abs() < 1e-4);
    assert!((sol.energy - s.energy()).abs() < 1e-6, "{} vs {}", sol.energy, s.energy());
    assert!(((sol.sup() - s.peak()) / s.peak()).abs() < 1e-4);
}

#[test]
fn flow_stops_at_a_soliton() {
    let space = line(0.01, 30.0);
    let (u, _) = sampled(&space, 4.0, 1.0, 1.0);
    let exact = newton_constrained(&u, 1.0, 1.0, 4.0, &SolverConfig::default()).unwrap();
    let sol = gradient_flow_normalized(&exact.u, 1.0, 1.0, 4.0, &SolverConfig::default()).unwrap();
    assert!(sol.iterations <= 2, "{}", sol.iterations);
}

#[test]
fn nehari_on_the_line_recovers_the_soliton() {
    let (p, lambda) = (6.1, 1.0);
    let space = line(0.005, 30.0);
    let n = nehari_minimize(&space, lambda, p, None, &SolverConfig::default()).unwrap();
    let u = &n.solution.u;
    let identity = (0.5 - 1.0 / p) * u.lpp(p);
    assert!((n.level - identity).abs() < 1e-6);
    let s = Soliton::from_lambda(p, lambda, 1.0).unwrap();
    assert!(((n.level - (0.5 - 1.0 / p) * s.lpp()) / n.level).abs() < 1e-4);
    assert!(((n.solution.sup() - s.peak()) / s.peak()).abs() < 1e-4);
    assert!((nehari_reduced(&u.scaled(3.7), lambda, p) - nehari_reduced(u, lambda, p)).abs() < 1e-10);
    assert!((nehari_scaling(&u.scaled(2.0), lambda, p) - nehari_scaling(u, lambda, p) / 2.0).abs() < 1e-10);
}

#[test]
fn nehari_tadpole_below_the_line_level() {
    let g = build_standard(&GraphKind::Tadpole { loop_len: 2.0 }).unwrap();
    let space = FemSpace::build(&g, 0.01, 30.0).unwrap();
    let lambda = 2.0;
    let n = nehari_minimize(&space, lambda, 6.0, None, &SolverConfig::default()).unwrap();
    let line_level = lambda * graphnls::soliton::critical_mass_line::<f64>() / 2.0;
    assert!(n.level < line_level, "{} vs {line_level}", n.level);
    assert!(n.solution.positive);
}

#[test]
fn continuation_on_the_line_tracks_the_scaling_law() {
    let (p, mu) = (7.0, 2.5);
    let run = |h: f64| {
        let (u0, _) = sampled(&line(h, 30.0), p, mu, 0.5);
        rho_continuation(&u0, mu, p, &SolverConfig::default()).unwrap()
    };
    let coarse = run(0.002);
    let chain = run(0.001);
    assert_eq!(chain.last().unwrap().rho, 1.0);
    assert_eq!(coarse.len(), chain.len());
    for (c, s) in coarse.iter().zip(&chain) {
        assert_eq!(c.rho, s.rho);
        let (_, _, lambda) = exponents_and_lambda(p, mu, s.rho).unwrap();
        let extrapolated = s.lambda + (s.lambda - c.lambda) / 3.0;
        assert!(((extrapolated - lambda) / lambda).abs() < 1e-5, "rho {}: {extrapolated} vs {lambda}", s.rho);
    }
    for w in chain.windows(2) {
        let slope = w.iter().map(|s| s.u.lpp(p) / p).fold(0.0, f64::max);
        let jump = (w[1].energy - w[0].energy).abs();
        assert!(jump <= 5.0 * slope * (w[1].rho - w[0].rho), "jump {jump} at rho {}", w[1].rho);
    }
}

#[test]
fn continuation_on_the_tadpole_stays_positive() {
    let g = build_standard(&GraphKind::Tadpole { loop_len: 2.0 }).unwrap();
    let run = mountain_pass_solution(&g, 7.0, 0.1, &PipelineOptions::new(7.0).unwrap()).unwrap();
    assert!(run.chain.len() >= 11);
    for s in &run.chain {
        assert!(s.positive && s.lambda > 0.0 && s.energy > 0.0, "rho {}", s.rho);
    }
}

#[test]
fn errors_are_typed() {
    let space = line(0.05, 10.0);
    let zero = GridFunction::zeros(space.clone());
    let cfg = SolverConfig::default();
    assert!(newton_constrained(&zero, 1.0, 1.0, 7.0, &cfg).is_err());
    let (u, _) = sampled(&space, 7.0, 2.5, 1.0);
    assert!(matches!(newton_constrained(&u, -1.0, 1.0, 7.0, &cfg), Err(Error::InvalidParameter(_))));
    assert!(matches!(newton_constrained(&u, 1.0, 1.5, 7.0, &cfg), Err(Error::InvalidParameter(_))));
    let short = SolverConfig { max_iter: 1, ..SolverConfig::default() };
    let far = u.map(|v| 3.0 * v * v);
    match newton_constrained(&far, 2.5, 1.0, 7.0, &short) {
        Err(Error::NonConvergence { last, .. }) => assert!(last.is_some()),
        other => panic!("expected non-convergence, got {other:?}"),
    }
    assert!(matches!(nehari_minimize(&space, -1.0, 6.0, None, &cfg), Err(Error::InvalidParameter(_))));
}
