//! Masks, simulator and the CG-SENSE baseline.

use pmri_core::metrics::{psnr, Peak};
use pmri_core::mri::{
    cg_sense_baseline, forward_op, gradient_step, make_cartesian_mask, simulate_sample, zero_filled_recon, Encoder,
    KSpaceData, PhantomSpec, SamplingMask, SensitivitySpec,
};
use pmri_core::numerics::{ComplexTensor, Complex64};
use pmri_core::training::sos;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn phantom(size: usize) -> PhantomSpec {
    PhantomSpec {
        jitter: 0.5,
        max_extra_ellipses: 3,
        phase_amplitude: 0.5,
        ..PhantomSpec::new(size, size)
    }
}

#[test]
fn knee_sized_mask_hits_the_ratio_within_one_line() {
    let mask = make_cartesian_mask(320, 320, 0.3156, 24).unwrap();
    let lines = mask.sampled_lines();
    assert!((mask.ratio() - 0.3156).abs() <= 1.0 / 320.0, "ratio {}", mask.ratio());
    // 24 contiguous central lines
    let center = 160;
    for x in center - 12..center + 12 {
        assert!(lines.contains(&x), "ACS line {x} missing");
    }
    // every sampled line is sampled in every row
    for &x in &lines {
        assert!((0..320).all(|y| mask.is_sampled(y, x)));
    }
    assert_eq!(mask.count_sampled(), lines.len() * 320);
}

#[test]
fn mask_edge_cases() {
    let full = make_cartesian_mask(6, 9, 1.0, 2).unwrap();
    assert_eq!(full.count_sampled(), 54);
    assert!(make_cartesian_mask(8, 8, 0.0, 0).is_err());
    assert!(make_cartesian_mask(8, 8, 1.5, 0).is_err());
    assert!(make_cartesian_mask(8, 32, 0.25, 9).is_err());
}

#[test]
fn gradient_step_trivial_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mask = make_cartesian_mask(8, 8, 0.5, 2).unwrap();
    let data: Vec<Complex64> = (0..8 * 8 * 2).map(|_| Complex64::new(rng.random(), rng.random())).collect();
    let u = ComplexTensor::from_vec(8, 8, 2, data).unwrap();
    let f = KSpaceData::new(forward_op(&u, &mask).unwrap(), mask.clone(), 0.0).unwrap();
    for rho in [0.0, 0.3, 7.0] {
        let b = gradient_step(&u, &f, rho).unwrap();
        assert!(b.sub(&u).unwrap().norm() <= 1e-12 * u.norm());
    }
    let other = u.scaled(2.0);
    assert_eq!(gradient_step(&other, &f, 0.0).unwrap(), other);
}

#[test]
fn gradient_step_is_a_descent_step_on_the_fidelity() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mask = make_cartesian_mask(10, 12, 0.4, 2).unwrap();
    let rand_t = |rng: &mut ChaCha8Rng| {
        let data = (0..10 * 12 * 3).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        ComplexTensor::from_vec(10, 12, 3, data).unwrap()
    };
    let u = rand_t(&mut rng);
    let f = KSpaceData::new(rand_t(&mut rng), mask.clone(), 0.0).unwrap();
    let d = rand_t(&mut rng);
    let enc = Encoder::new(mask).unwrap();
    let grad = enc.fidelity_gradient(&u, f.coils()).unwrap();
    // b = u − ρ ∇, so ∇ = (u − b) / ρ
    let b = gradient_step(&u, &f, 0.5).unwrap();
    assert!(u.sub(&b).unwrap().scaled(2.0).sub(&grad).unwrap().norm() <= 1e-12 * grad.norm());
    let h = 1e-6;
    let mut up = u.clone();
    up.axpy(Complex64::new(h, 0.0), &d).unwrap();
    let mut um = u.clone();
    um.axpy(Complex64::new(-h, 0.0), &d).unwrap();
    let fd = (enc.fidelity(&up, f.coils()).unwrap() - enc.fidelity(&um, f.coils()).unwrap()) / (2.0 * h);
    let an: f64 = grad.data().iter().zip(d.data()).map(|(g, x)| g.re * x.re + g.im * x.im).sum();
    assert!((fd - an).abs() <= 1e-6 * an.abs(), "{fd} vs {an}");
}

#[test]
fn zero_filled_trivial_cases() {
    let sim = simulate_sample(&phantom(16), &SensitivitySpec::new(3), &SamplingMask::full(16, 16), 0.0, 3).unwrap();
    let zf = zero_filled_recon(&sim.sample.kspace).unwrap();
    assert!(zf.sub(&sim.sample.truth).unwrap().norm() <= 1e-12 * sim.sample.truth.norm());
    let mask = make_cartesian_mask(16, 16, 0.5, 4).unwrap();
    let zero = KSpaceData::new(ComplexTensor::zeros(16, 16, 3), mask, 0.0).unwrap();
    assert_eq!(zero_filled_recon(&zero).unwrap().norm(), 0.0);
}

#[test]
fn undersampling_lowers_zero_filled_psnr() {
    let ph = phantom(64);
    let sens = SensitivitySpec::new(4);
    let full = simulate_sample(&ph, &sens, &SamplingMask::full(64, 64), 0.0, 4).unwrap();
    let under = simulate_sample(&ph, &sens, &make_cartesian_mask(64, 64, 0.3156, 8).unwrap(), 0.0, 4).unwrap();
    let truth = sos(&full.sample.truth);
    let p_full = psnr(&sos(&zero_filled_recon(&full.sample.kspace).unwrap()), &truth, Peak::default()).unwrap();
    // the undersampled sample is normalized with its own factor
    let zf_under = sos(&zero_filled_recon(&under.sample.kspace).unwrap());
    let rescaled = zf_under.map(|v| v * full.scale / under.scale);
    let p_under = psnr(&rescaled, &truth, Peak::default()).unwrap();
    assert!(p_under < p_full, "{p_under} vs {p_full}");
    assert!(p_under < 40.0);
}

#[test]
fn simulator_is_deterministic_and_normalized() {
    let ph = phantom(32);
    let sens = SensitivitySpec::new(4);
    let mask = make_cartesian_mask(32, 32, 0.3156, 4).unwrap();
    let a = simulate_sample(&ph, &sens, &mask, 0.01, 9).unwrap();
    let b = simulate_sample(&ph, &sens, &mask, 0.01, 9).unwrap();
    let bits = |t: &ComplexTensor| t.data().iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect::<Vec<_>>();
    assert_eq!(bits(a.sample.kspace.coils()), bits(b.sample.kspace.coils()));
    assert_eq!(bits(&a.sample.truth), bits(&b.sample.truth));
    let c = simulate_sample(&ph, &sens, &mask, 0.01, 10).unwrap();
    assert_ne!(bits(a.sample.kspace.coils()), bits(c.sample.kspace.coils()));

    let zf_max = zero_filled_recon(&a.sample.kspace).unwrap().max_abs();
    assert!((zf_max - 1.0).abs() < 1e-12, "{zf_max}");
    // û = s ⊙ v with normalized maps, so SOS(û) = |v| pointwise
    let sos_truth = sos(&a.sample.truth);
    for (s, v) in sos_truth.data().iter().zip(a.image.data()) {
        assert!((s - v.norm()).abs() <= 1e-12 * (1.0 + s));
    }
    // unsampled entries are zero even with noise
    for y in 0..32 {
        for x in 0..32 {
            if !mask.is_sampled(y, x) {
                assert!((0..4).all(|c| a.sample.kspace.coils().get(y, x, c) == Complex64::new(0.0, 0.0)));
            }
        }
    }
}

#[test]
fn simulator_rejects_bad_specs() {
    let mask = SamplingMask::full(8, 8);
    assert!(simulate_sample(&PhantomSpec::new(8, 8), &SensitivitySpec::new(0), &mask, 0.0, 1).is_err());
    assert!(simulate_sample(&PhantomSpec::new(8, 8), &SensitivitySpec::new(2), &mask, -1.0, 1).is_err());
    assert!(simulate_sample(&PhantomSpec::new(8, 9), &SensitivitySpec::new(2), &mask, 0.0, 1).is_err());
}

#[test]
fn cg_sense_full_data_recovers_image() {
    let sim = simulate_sample(&phantom(24), &SensitivitySpec::new(4), &SamplingMask::full(24, 24), 0.0, 5).unwrap();
    let res = cg_sense_baseline(&sim.sample.kspace, &sim.sensitivities, 50, 1e-12).unwrap();
    let err = res.image.sub(&sim.image).unwrap().norm() / sim.image.norm();
    assert!(err <= 1e-6, "relative error {err}");
}

#[test]
fn cg_sense_zero_data_and_monotone_residual() {
    let mask = make_cartesian_mask(32, 32, 0.3156, 4).unwrap();
    let sim = simulate_sample(&phantom(32), &SensitivitySpec::new(4), &mask, 0.0, 6).unwrap();
    let zero = KSpaceData::new(ComplexTensor::zeros(32, 32, 4), mask, 0.0).unwrap();
    let z = cg_sense_baseline(&zero, &sim.sensitivities, 10, 1e-9).unwrap();
    assert_eq!(z.image.norm(), 0.0);

    let res = cg_sense_baseline(&sim.sample.kspace, &sim.sensitivities, 30, 0.0).unwrap();
    assert_eq!(res.residuals.len(), res.iterations + 1);
    for w in res.residuals.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12), "residual increased: {} -> {}", w[0], w[1]);
    }
    assert!(!res.converged);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mask_ratio_within_one_line(w in 8usize..200, ratio in 0.05f64..1.0, acs in 0usize..8) {
        prop_assume!(acs as f64 <= w as f64 * ratio);
        let mask = make_cartesian_mask(3, w, ratio, acs).unwrap();
        prop_assert!((mask.ratio() - ratio).abs() <= 1.0 / w as f64 + 1e-12);
        let lines = mask.sampled_lines();
        let mut sorted = lines.clone();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), lines.len());
    }
}
