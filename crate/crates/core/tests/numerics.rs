mod support;

use eos_core::dynamics::{self, GfOptions};
use eos_core::eigen;
use eos_core::model::{self, ModelConfig, Params};
use support::{box_points, fd_gradient, fd_jacobian, figure1, power_iteration};

fn inf_norm(v: &[f64; 3]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[test]
fn gradient_matches_central_differences() {
    let cfg = figure1();
    for p in box_points(11, 100) {
        let g = model::gradient(&cfg, &p).unwrap();
        let fd = fd_gradient(100.0, 0.01, p.to_array(), 1e-6);
        let err = inf_norm(&[g[0] - fd[0], g[1] - fd[1], g[2] - fd[2]]);
        assert!(err <= 1e-6 * inf_norm(&g).max(1.0), "{p:?}: {g:?} vs {fd:?}");
    }
}

#[test]
fn hessian_matches_differentiated_gradient() {
    let cfg = figure1();
    for p in box_points(12, 100) {
        let h = model::hessian(&cfg, &p).unwrap();
        let j = fd_jacobian(
            |v| model::gradient(&cfg, &Params::from_array(v)).unwrap(),
            p.to_array(),
            1e-6,
        );
        for r in 0..3 {
            for c in 0..3 {
                assert!((h[r][c] - j[r][c]).abs() <= 1e-5, "{p:?} [{r}][{c}]");
            }
        }
    }
}

#[test]
fn sharpness_matches_power_iteration() {
    let cfgs = [figure1(), ModelConfig::new(400.0, 0.002, 0.02).unwrap()];
    for (k, cfg) in cfgs.iter().enumerate() {
        for p in box_points(13 + k as u64, 1000) {
            let info = model::sharpness_info(cfg, &p).unwrap();
            let h = model::hessian(cfg, &p).unwrap();
            let (value, v) = power_iteration(&h, 10_000);
            assert!(
                (info.value - value).abs() <= 1e-9 * value.abs(),
                "{p:?}: {} vs {value}",
                info.value
            );
            let align: f64 = info.eigvec.iter().zip(&v).map(|(a, b)| a * b).sum();
            assert!(align.abs() >= 1.0 - 1e-9, "{p:?}: alignment {align}");
            let n: f64 = info.eigvec.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() <= 1e-12);
            let res = eigen::residual(&h, info.value, &info.eigvec);
            assert!(res <= 1e-9 * info.value.max(1.0));
            assert!(info.value >= cfg.lambda1() * p.alpha * p.alpha * (1.0 - 1e-12));
        }
    }
}

#[test]
fn loss_splits_exactly() {
    let cfg = figure1();
    for p in box_points(14, 500) {
        let parts = model::loss_parts(&cfg, &p).unwrap();
        assert_eq!(model::loss(&cfg, &p).unwrap(), parts.l1 + parts.l2);
        assert_eq!(parts.total, parts.l1 + parts.l2);
    }
}

#[test]
fn minimizer_sharpness_closed_form() {
    let cfg = figure1();
    for i in 1..=300 {
        let alpha = 0.02 * i as f64;
        let p = Params::new(alpha, 0.0, 1.0 / alpha);
        let s = model::sharpness_info(&cfg, &p).unwrap().value;
        let closed = model::minimizer_sharpness(&cfg, alpha, 1.0 / alpha);
        assert!((s - closed).abs() <= 1e-10 * closed, "{alpha}");
    }
}

#[test]
fn gradient_flow_reaches_analytic_solution() {
    let cfg = figure1();
    let opts = GfOptions::for_config(&cfg);
    for seed in 0..5 {
        let p0 = eos_core::regions::sample_x(&cfg, seed).unwrap();
        let run = dynamics::gf_integrate(&cfg, p0, &opts).unwrap();
        let g = dynamics::gfs_analytic(&cfg, &p0).unwrap();
        let numeric = cfg.lambda1() * run.terminal.alpha * run.terminal.alpha;
        assert!(
            (numeric - g.phi).abs() <= 1e-5 * g.phi,
            "seed {seed}: {numeric} vs {}",
            g.phi
        );
        assert!(run.max_gap_drift <= 1e-8);
        let limit = g.limit(&p0);
        assert!((run.terminal.alpha - limit.alpha).abs() < 1e-6);
        assert!((run.terminal.beta2 - limit.beta2).abs() < 1e-6);
    }
}
