mod support;

use eos_core::model::{self, ModelConfig};
use eos_core::regions::{self, Region};
use eos_core::Error;
use support::figure1;

#[test]
fn x_tilde_points_lie_in_x() {
    let cfg = ModelConfig::new(100.0, 0.01, 1.0 / 12.0).unwrap();
    for seed in 0..10_000 {
        let p = regions::sample_x_tilde(&cfg, seed).unwrap();
        assert!(regions::in_x_tilde(&cfg, &p).member);
        assert!(regions::in_x(&cfg, &p).member, "seed {seed}: {p:?}");
    }
}

#[test]
fn x_tilde_is_empty_below_the_feasibility_line() {
    // β2 ≥ α and β2 ≤ 0.2/α force α² ≤ 0.2, while α² ≥ 1.1/(λ1η)
    for eta in [0.02, 0.05, 0.054] {
        let cfg = ModelConfig::new(100.0, 0.01, eta).unwrap();
        assert_eq!(
            regions::sample_x_tilde(&cfg, 1),
            Err(Error::EmptyRegion(Region::XTilde))
        );
    }
    let cfg = ModelConfig::new(100.0, 0.01, 0.056).unwrap();
    assert!(regions::sample_x_tilde(&cfg, 1).is_ok());
}

#[test]
fn m_dagger_is_stable() {
    let cfg = figure1();
    for seed in 0..1000 {
        let p = regions::sample_m_dagger(&cfg, 1.0, seed).unwrap();
        let info = model::sharpness_info(&cfg, &p).unwrap();
        assert!(info.value <= cfg.threshold());
        let g = model::gradient(&cfg, &p).unwrap();
        let dot: f64 = g.iter().zip(&info.eigvec).map(|(a, b)| a * b).sum();
        assert!(dot.abs() <= 1e-10, "seed {seed}: {dot}");
        assert_eq!(info.eigvec, [0.0, 1.0, 0.0]);
    }
}

#[test]
fn x_sampler_never_exhausts_its_budget() {
    let cfg = figure1();
    for seed in 0..1000 {
        let p = regions::sample_x(&cfg, seed).unwrap();
        assert!(regions::in_x(&cfg, &p).member);
    }
}

#[test]
fn samplers_cover_the_eta_range() {
    for eta in [0.02, 0.03, 0.05, 1.0 / 12.0, 0.1] {
        let cfg = ModelConfig::new(100.0, 0.01, eta).unwrap();
        for seed in 0..100 {
            assert!(regions::in_x(&cfg, &regions::sample_x(&cfg, seed).unwrap()).member);
            assert!(regions::in_x(&cfg, &regions::sample_x_balanced(&cfg, seed).unwrap()).member);
        }
    }
}

#[test]
fn proposition_c_on_sampled_y() {
    let grid: Vec<f64> = (0..10).map(|i| 0.55 + 0.05 * i as f64).collect();
    assert_eq!(grid[9], 1.0);
    for seed in 0..1000 {
        let p = regions::sample_y(100.0, 0.01, seed).unwrap();
        // η = 2/(λ1α²) ≤ 0.1 needs α ≥ √0.2, which every Y point has
        assert!(
            regions::proposition_c(&p, 100.0, 0.01, &grid).unwrap(),
            "seed {seed}: {p:?}"
        );
    }
}

#[test]
fn report_slack_signs() {
    let cfg = figure1();
    let p = regions::sample_x(&cfg, 0).unwrap();
    let mut q = p;
    q.beta2 = 1.0 / q.alpha;
    let r = regions::in_x(&cfg, &q);
    assert!(r.violates("beta2_upper"));
    assert!(r.violated.iter().all(|v| v.slack <= 0.0));
    assert_eq!(r.member, r.violated.is_empty());
}
