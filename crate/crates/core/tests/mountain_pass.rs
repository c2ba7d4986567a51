use std::sync::Arc;

use graphnls::fem::{ChainKind, FemSpace};
use graphnls::graph::{build_standard, GraphKind};
use graphnls::mountain_pass::*;
use graphnls::soliton::line_and_halfline_levels;
use graphnls::verification::{pendant_level_report, PENDANT_FACTOR};
use graphnls::Graph;

const P: f64 = 7.0;

fn setup(g: &Graph, kind: PathKind, mu: f64, beads: usize) -> (Arc<FemSpace<f64>>, MPConfig<f64>) {
    let cfg = MPConfig::new(P).unwrap().with_beads(beads).with_relax_iters(20);
    let space = path_space(g, kind, mu, 1.0, &cfg, &Grading::default()).unwrap();
    (space, cfg)
}

#[test]
fn pendant_path_on_the_t_graph() {
    // small mass, so the slow beads still fit on the unit pendant
    let mu = 0.2;
    let g = build_standard(&GraphKind::TGraph { pendant_len: 1.0 }).unwrap();
    assert_eq!(resolve_kind(&g, PathKind::Auto).unwrap(), PathKind::Pendant);
    let (space, cfg) = setup(&g, PathKind::Pendant, mu, 32);
    let path = build_path(&space, PathKind::Pendant, mu, 1.0, &cfg).unwrap();
    assert_eq!(check_endpoints(&path), (true, true));
    assert!(path.beads.iter().all(|b| (b.l2sq() / mu - 1.0).abs() < 1e-10));
    let lvl = path_max_energy(&path);
    assert!(lvl.valid_bound);
    let (c_line, c_half) = line_and_halfline_levels(P, mu, 1.0).unwrap();
    assert!(c_half < c_line);
    let r = pendant_level_report(lvl.level, c_half);
    assert!(r.passed, "{r}");
    assert!(lvl.level <= PENDANT_FACTOR * c_half);
}

#[test]
fn half_line_path_on_the_star() {
    let mu = 0.5;
    let g = build_standard(&GraphKind::Star(3)).unwrap();
    let kind = resolve_kind(&g, PathKind::Auto).unwrap();
    assert_eq!(kind, PathKind::Edge(ChainKind::HalfLine(0)));
    let (space, cfg) = setup(&g, kind, mu, 32);
    let path = build_path(&space, kind, mu, 1.0, &cfg).unwrap();
    assert_eq!(check_endpoints(&path), (true, true));
    let lvl = path_max_energy(&path);
    let (c_line, _) = line_and_halfline_levels(P, mu, 1.0).unwrap();
    // a soliton far out on one half-line costs about the line level
    assert!((lvl.level / c_line - 1.0).abs() < 0.02, "{} vs {c_line}", lvl.level);
}

#[test]
fn relaxation_on_the_tadpole() {
    let mu = 0.5;
    let g = build_standard(&GraphKind::Tadpole { loop_len: 1.0 }).unwrap();
    let kind = resolve_kind(&g, PathKind::Auto).unwrap();
    let (space, cfg) = setup(&g, kind, mu, 24);
    let path = build_path(&space, kind, mu, 1.0, &cfg).unwrap();
    let initial = path_max_energy(&path);
    let out = minmax_relax(&path, &cfg).unwrap();
    let n = path.len();
    assert_eq!(out.path.len(), n);
    assert_eq!(out.path.beads[0].values(), path.beads[0].values());
    assert_eq!(out.path.beads[n - 1].values(), path.beads[n - 1].values());
    assert!(out.history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    assert!(out.bead_level <= initial.level * (1.0 + 1e-12));
    assert!(out.level >= out.bead_level * (1.0 - 1e-12));
    assert!(out.path.beads.iter().all(|b| (b.l2sq() / mu - 1.0).abs() < 1e-10));
    assert!(out.iterations <= cfg.relax_iters);
}

#[test]
fn lower_rho_raises_the_level_of_fixed_beads() {
    let mu = 1.0;
    let g = build_standard(&GraphKind::Line).unwrap();
    let (space, cfg) = setup(&g, PathKind::Line, mu, 32);
    let path = build_path(&space, PathKind::Line, mu, 1.0, &cfg).unwrap();
    let levels: Vec<f64> = [1.0, 0.9, 0.7, 0.5].iter().map(|&r| level_at_rho(&path, r).level).collect();
    assert!(levels.windows(2).all(|w| w[1] >= w[0]), "{levels:?}");
}

#[test]
fn invalid_inputs_are_rejected() {
    let g = build_standard(&GraphKind::Line).unwrap();
    let (space, cfg) = setup(&g, PathKind::Line, 1.0, 16);
    assert!(build_path(&space, PathKind::Line, 1.0, 0.0, &cfg).is_err());
    assert!(build_path(&space, PathKind::Line, 1.0, 1.5, &cfg).is_err());
    assert!(build_path(&space, PathKind::Pendant, 1.0, 1.0, &cfg).is_err());
    assert!(a_p(6.0f64).is_err());
}
