use graphnls::fem::{FemSpace, GridFunction};
use graphnls::graph::{build_standard, GraphKind};
use graphnls::verification::*;
use graphnls::Error;

fn reports(suite: Suite, kind: GraphKind<f64>, p: f64, mu: f64) -> Vec<CheckReport> {
    let g = build_standard(&kind).unwrap();
    run_suite(suite, &g, &SuiteInput::new(p, mu).unwrap()).unwrap()
}

fn named<'a>(rs: &'a [CheckReport], name: &str) -> &'a CheckReport {
    rs.iter().find(|r| r.name == name).unwrap_or_else(|| panic!("no {name} report"))
}

#[test]
fn bounds_on_the_line_are_tight_for_the_soliton() {
    let rs = reports(Suite::Bounds, GraphKind::Line, 4.0, 1.0);
    assert!(all_acceptable(&rs), "{rs:#?}");
    let linfty = named(&rs, "linfty_bound");
    // the soliton attains the bound
    assert!(linfty.measured / linfty.bound_or_target > 0.999, "{linfty}");
    assert!(named(&rs, "multiplier_regime").measured > 0.0);
}

#[test]
fn multiplier_regime_on_tadpole_and_loop() {
    let rs = reports(Suite::Bounds, GraphKind::Tadpole { loop_len: 2.0 }, 4.0, 1.0);
    assert!(all_acceptable(&rs), "{rs:#?}");
    assert!(named(&rs, "multiplier_regime").measured > 0.0);

    let rs = reports(Suite::Bounds, GraphKind::Loop(2.0), 4.0, 1.0);
    assert!(all_acceptable(&rs), "{rs:#?}");
    let regime = named(&rs, "multiplier_regime");
    // the constant c = sqrt(mu / 2) solves with lambda = c^{p-2}
    assert!((regime.measured - 0.5).abs() < 1e-8, "{regime}");
}

#[test]
fn levels_on_the_star() {
    let rs = reports(Suite::Levels, GraphKind::Star(4), 7.0, 0.2);
    assert!(!rs.is_empty());
    assert!(all_acceptable(&rs), "{rs:#?}");
}

#[test]
fn identities_suite_covers_both_rho() {
    let g = build_standard(&GraphKind::Line).unwrap();
    let mut input = SuiteInput::new(7.0, 1.0).unwrap();
    let one = run_suite(Suite::Identities, &g, &input).unwrap();
    input.rho = 0.5;
    let half = run_suite(Suite::Identities, &g, &input).unwrap();
    assert!(half.len() > one.len());
    assert!(all_acceptable(&one) && all_acceptable(&half));
}

#[test]
fn gn_estimate_on_the_tadpole() {
    let g = build_standard(&GraphKind::Tadpole { loop_len: 1.0 }).unwrap();
    let space = FemSpace::build(&g, 0.02, 20.0).unwrap();
    let a = estimate_gn_constant(&space, 4.0, 120, 7, &[]).unwrap();
    let b = estimate_gn_constant(&space, 4.0, 120, 7, &[]).unwrap();
    assert_eq!(a.k_estimate, b.k_estimate);
    assert!(a.k_estimate > 0.0 && a.k_estimate.is_finite());
    assert!(a.report.acceptable(), "{}", a.report);
    assert!(estimate_gn_constant(&space, 4.0, 10, 7, &[]).is_err());

    let compact = build_standard(&GraphKind::Loop(2.0)).unwrap();
    let space = FemSpace::build(&compact, 0.05, 20.0).unwrap();
    assert!(matches!(
        estimate_gn_constant(&space, 4.0, 120, 7, &[]),
        Err(Error::UnsupportedTopology(_))
    ));
}

#[test]
fn sqrt2_linfty_needs_a_half_line() {
    let g = build_standard(&GraphKind::HalfLine).unwrap();
    let space = FemSpace::build(&g, 0.02, 20.0).unwrap();
    let u = GridFunction::from_fn(space, |_, x: f64| (-x).exp() * (1.0 + x));
    assert!(sqrt2_linfty_report(&u).passed);
    assert!(gn_quotient(&u, 4.0).unwrap() > 0.0);

    // a constant on a compact interval has no gradient to pay for its peak
    let g = build_standard(&GraphKind::Interval(4.0)).unwrap();
    let space = FemSpace::build(&g, 0.05, 1.0).unwrap();
    let c = GridFunction::constant(space, 1.0);
    assert!(!sqrt2_linfty_report(&c).passed);
    // round-off leaves at most a tiny gradient, so the quotient is absent or huge
    assert!(gn_quotient(&c, 4.0).is_none_or(|q| q > 1e6));
}

#[test]
fn negative_controls_reject_broken_inputs() {
    let rs = negative_controls().unwrap();
    assert!(rs.len() >= 6);
    assert!(rs.iter().all(|r| r.passed), "{rs:#?}");
}

#[test]
fn suite_names_round_trip() {
    for s in Suite::EACH.iter().chain([Suite::All].iter()) {
        assert_eq!(s.to_string().parse::<Suite>().unwrap(), *s);
    }
    assert!("everything".parse::<Suite>().is_err());
}
