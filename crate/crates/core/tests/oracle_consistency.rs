use dasloc::channel::Steering;
use dasloc::equalize::pilot_equalize;
use dasloc::estimators::{MmlObjective, MmlOptimalObjective, MmlVariant, Objective, ENUMERATION_CAP};
use dasloc::experiment::realize;
use dasloc::model::{ConstellationSpec, Point};
use dasloc::oracle::run_oracle_suite;
use dasloc::SystemConfig;

fn argmax(scores: &[f64]) -> usize {
    scores
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &s)| if s > best.1 { (i, s) } else { best })
        .0
}

#[test]
fn approximate_objective_picks_the_exact_objectives_candidate() {
    let cfg = SystemConfig {
        n: 1,
        q: 2,
        d: 1,
        constellation_map: ConstellationSpec::Uniform(2),
        ..SystemConfig::desk_scale()
    };
    let node = Point::new(cfg.r_srx, 0.0);
    // with one node the objectives depend on range only: a lattice of ranges
    // along the ray from the node through the origin is the full search grid
    let steps = 40;
    let ray: Vec<Point> = (0..=steps)
        .map(|k| {
            let r = cfg.r_srx - cfg.r_s + 2.0 * cfg.r_s * k as f64 / steps as f64;
            node + Point::new(-1.0, 0.0) * r
        })
        .collect();
    let trials = 100;
    for snr in [10.0, 15.0, 20.0, 30.0] {
        let sigma2 = cfg.sigma2(snr);
        let (mut same, mut adjacent) = (0, 0);
        for seed in 0..trials {
            let real = realize(&cfg, sigma2, 7_000 + seed).unwrap();
            let st = Steering::new(&real.scene.nodes, &cfg);
            let approx = MmlObjective::new(
                &st,
                pilot_equalize(&real.obs.y_p, &real.frame.pilots),
                &real.obs.y_d,
                real.frame.pilot_energy,
                sigma2,
                cfg.gamma(),
                &real.frame.map,
                MmlVariant::Approx,
            )
            .unwrap();
            let exact = MmlOptimalObjective::new(
                &st,
                real.obs.full_frame(),
                real.frame.pilots.clone(),
                real.frame.map.clone(),
                sigma2,
                cfg.gamma(),
                ENUMERATION_CAP,
            )
            .unwrap();
            let a: Vec<f64> = ray.iter().map(|p| approx.score(*p)).collect();
            let e: Vec<f64> = ray.iter().map(|p| exact.score(*p)).collect();
            let gap = argmax(&a).abs_diff(argmax(&e));
            same += (gap == 0) as u64;
            adjacent += (gap <= 1) as u64;
        }
        let (same, adjacent) = (same as f64 / trials as f64, adjacent as f64 / trials as f64);
        assert!(adjacent >= 0.7, "{snr} dB: argmaxes within one cell in {adjacent}");
        if snr >= 20.0 {
            assert!(same >= 0.7, "{snr} dB: identical argmax in {same}");
        }
    }
}

#[test]
fn oracle_suite_passes() {
    let report = run_oracle_suite(11, 40).unwrap();
    assert!(report.passed(), "{report:?}");
}
