use proptest::prelude::*;

use rotdoa::channel::{SignalModel, Waveform};
use rotdoa::estimators::{fa_root_music, pri_igss, rr_root_music, IgssConfig, PriConfig, Stage, Termination};
use rotdoa::geometry::{direction_to_unit, ArrayConfig, GlobalDirection};

fn angle_error(a: &GlobalDirection, b: &GlobalDirection) -> f64 {
    direction_to_unit(a).angle_to(&direction_to_unit(b))
}

fn noiseless() -> SignalModel {
    SignalModel::new(1.0, 1e-12, Waveform::Gaussian).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn noiseless_pri_igss_recovers_covered_directions(theta in 2.0f64..178.0, phi in 5.0f64..175.0, seed in 0u64..1000) {
        let cfg = ArrayConfig::default();
        let truth = GlobalDirection::from_degrees(theta, phi).unwrap();
        let pri = PriConfig::equispaced(3, 64).unwrap();
        let igss = IgssConfig { snapshots: 64, ..IgssConfig::default() };
        let tr = pri_igss(&cfg, &pri, &igss, &truth, &noiseless(), seed).unwrap();
        prop_assert!(angle_error(&tr.final_estimate, &truth) < 1e-3);
    }

    #[test]
    fn greedy_trace_invariants(theta in 5.0f64..175.0, snr in -10.0f64..20.0, seed in 0u64..1000) {
        let cfg = ArrayConfig::default();
        let truth = GlobalDirection::from_degrees(theta, 45.0).unwrap();
        let model = SignalModel::from_snr_db(1.0, snr, Waveform::Gaussian).unwrap();
        let pri = PriConfig::equispaced(3, 128).unwrap();
        let igss = IgssConfig { snapshots: 128, max_iterations: 25, ..IgssConfig::default() };
        let tr = pri_igss(&cfg, &pri, &igss, &truth, &model, seed).unwrap();
        let greedy: Vec<_> = tr.greedy_records().collect();
        prop_assert!(!greedy.is_empty() && greedy.len() <= igss.max_iterations);
        let r_init = greedy[0].orientation;
        for (i, rec) in greedy.iter().enumerate() {
            prop_assert_eq!(rec.orientation, r_init);
            prop_assert_eq!(rec.snapshots_used, (i + 1) * igss.snapshots);
            let spectra = rec.candidate_spectra.unwrap();
            let best = spectra[rec.selected.unwrap()];
            prop_assert!(spectra.iter().all(|s| *s <= best));
            prop_assert!(rec.refinement_index <= igss.max_refinement);
        }
        match tr.termination {
            Termination::MaxIterations => prop_assert_eq!(greedy.len(), igss.max_iterations),
            Termination::Converged | Termination::RefinementExhausted => {}
            Termination::SinglePass => prop_assert!(false, "iterative run reported a single pass"),
        }
        prop_assert_eq!(tr.records.iter().filter(|r| r.stage == Stage::PreRotation).count(), 1);
    }

    #[test]
    fn noiseless_rr_converges_by_second_rotation(theta in 2.0f64..80.0, phi in -170.0f64..170.0, seed in 0u64..1000) {
        let cfg = ArrayConfig::default();
        let truth = GlobalDirection::from_degrees(theta, phi).unwrap();
        let tr = rr_root_music(&cfg, &truth, &noiseless(), 64, 2, seed).unwrap();
        prop_assert!(angle_error(&tr.estimate_at(2), &truth) < 1e-4);
    }
}

#[test]
fn fixed_array_is_lost_behind_the_aperture() {
    let cfg = ArrayConfig::default();
    let truth = GlobalDirection::from_degrees(100.0, 45.0).unwrap();
    let model = SignalModel::from_snr_db(1.0, -5.0, Waveform::Gaussian).unwrap();
    let errors: Vec<f64> = (0..20)
        .map(|s| {
            let tr = fa_root_music(&cfg, &truth, &model, 512, s).unwrap();
            tr.final_estimate.theta() - truth.theta()
        })
        .collect();
    let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt();
    let boresight = rotdoa::crlb::crlb_closed_form(&cfg, 0.0, 0.0, 512, model.pt, model.sigma2).unwrap();
    assert!(rmse >= 10.0 * boresight.crlb_theta.sqrt().unwrap(), "{rmse}");
}
