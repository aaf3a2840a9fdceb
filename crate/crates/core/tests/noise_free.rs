use dasloc::channel::Steering;
use dasloc::equalize::{dd_equalize, genie_equalize, pilot_equalize, SymbolEstimates};
use dasloc::estimators::{MmlObjective, MmlVariant};
use dasloc::experiment::{realize, run_trial_with, Estimator, SearchPlan};
use dasloc::model::{ConstellationSpec, PilotScheme};
use dasloc::SystemConfig;

fn cfg() -> SystemConfig {
    SystemConfig {
        q: 16,
        d: 4,
        n_grid_per_axis: 24,
        alpha_oversample: 1,
        ..SystemConfig::desk_scale()
    }
}

#[test]
fn pilot_channel_estimate_is_exact_at_the_true_position() {
    for pilot_scheme in [PilotScheme::RandomBpsk, PilotScheme::AllOnes] {
        let cfg = SystemConfig { pilot_scheme, ..cfg() };
        for seed in 0..20 {
            let real = realize(&cfg, 0.0, seed).unwrap();
            let st = Steering::new(&real.scene.nodes, &cfg);
            let obj = MmlObjective::new(
                &st,
                pilot_equalize(&real.obs.y_p, &real.frame.pilots),
                &real.obs.y_d,
                real.frame.pilot_energy,
                1e-3,
                cfg.gamma(),
                &real.frame.map,
                MmlVariant::Fast,
            )
            .unwrap();
            let (h_bar, b) = obj.pilot_channel_coeff(real.scene.ue);
            for (est, truth) in h_bar.iter().zip(&real.channel.h_bar) {
                assert!((est - truth).norm() <= 1e-12 * truth.norm(), "{est} vs {truth}");
            }
            for (est, truth) in b.iter().zip(real.channel.h.iter()) {
                assert!((est - truth).norm() <= 1e-12 * truth.norm());
            }
        }
    }
}

#[test]
fn correct_decisions_reproduce_genie_equalization() {
    let cfg = cfg();
    let real = realize(&cfg, cfg.sigma2(10.0), 3).unwrap();
    let yp_eq = pilot_equalize(&real.obs.y_p, &real.frame.pilots);
    let genie = genie_equalize(&yp_eq, &real.obs.y_d, &real.frame.data);
    let dd = dd_equalize(&yp_eq, &real.obs.y_d, &SymbolEstimates::Centralized(real.frame.data.clone()));
    assert_eq!(genie, dd);
}

#[test]
fn noise_free_hard_decisions_localize_like_the_genie() {
    let cfg = cfg();
    let plan = SearchPlan::new(&cfg);
    let set = [Estimator::Genie, Estimator::HddCentr, Estimator::HddDistr];
    for seed in 0..5 {
        let t = run_trial_with(&cfg, &plan, f64::INFINITY, &set, seed).unwrap();
        let comm = t.comm.as_ref().unwrap();
        assert_eq!(comm.ser_centr, 0.0);
        assert_eq!(comm.ser_distr, 0.0);
        let pd = t.outcome(Estimator::Genie).unwrap().estimate;
        for e in [Estimator::HddCentr, Estimator::HddDistr] {
            assert_eq!(t.outcome(e).unwrap().estimate, pd);
        }
        assert!(t.outcome(Estimator::Genie).unwrap().sq_error < 1e-6);
    }
}

#[test]
fn without_data_every_correlation_estimator_is_the_pilot_estimator() {
    let cfg = SystemConfig {
        d: 0,
        constellation_map: ConstellationSpec::Uniform(16),
        ..cfg()
    };
    let plan = SearchPlan::new(&cfg);
    let set = [
        Estimator::Pilot,
        Estimator::Genie,
        Estimator::HddCentr,
        Estimator::HddDistr,
        Estimator::SddCentr,
        Estimator::SddDistr,
    ];
    for seed in 0..5 {
        let t = run_trial_with(&cfg, &plan, 15.0, &set, seed).unwrap();
        assert!(t.comm.is_none());
        let p = t.outcome(Estimator::Pilot).unwrap().estimate;
        for e in &set[1..] {
            assert_eq!(t.outcome(*e).unwrap().estimate, p, "{e}");
        }
    }
}
