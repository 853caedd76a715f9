//! Property tests for the operator invariants.

use num_complex::Complex64 as C64;
use phasediff::*;
use proptest::prelude::*;

fn grid64() -> PhaseGrid {
    PhaseGrid::new(GridSpec::square(64, 8.0), 1.0).unwrap()
}

/// Smooth field: two Gaussian bumps with random centres, widths and phases.
fn bumps() -> impl Strategy<Value = Vec<(f64, f64, f64, f64, f64)>> {
    prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0, 0.6f64..1.5, -1.0f64..1.0, -1.0f64..1.0), 2)
}

fn phase_field(g: PhaseGrid, b: &[(f64, f64, f64, f64, f64)]) -> PhaseWaveFunction {
    PhaseWaveFunction::from_fn(g, |x, p| {
        b.iter()
            .map(|&(x0, p0, w, kx, kp)| {
                C64::from_polar((-((x - x0).powi(2) + (p - p0).powi(2)) / (2.0 * w * w)).exp(), kx * x + kp * p)
            })
            .sum()
    })
    .unwrap()
}

fn config_field(ax: XAxis, b: &[(f64, f64, f64, f64, f64)]) -> ConfigWaveFunction {
    ConfigWaveFunction::from_fn(ax, |y| {
        b.iter()
            .map(|&(y0, amp, w, k, _)| C64::from_polar((1.0 + amp.abs()) * (-(y - y0).powi(2) / (2.0 * w * w)).exp(), k * y))
            .sum()
    })
    .unwrap()
}

fn params() -> impl Strategy<Value = ModelParams> {
    (0.6f64..1.6, 0.6f64..1.6).prop_map(|(a, b)| ModelParams { a, b, ..ModelParams::default() })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn separable_rotation_frequency(x in -7.9f64..7.9, p in -7.9f64..7.9, m in 0.2f64..5.0, k in 0.0f64..3.0, hbar in 0.5f64..2.0) {
        let g = PhaseGrid::new(GridSpec::square(64, 8.0), hbar.max(1.0)).unwrap();
        let spec = HamiltonianSpec::separable(m, Potential::Harmonic { stiffness: k }).unwrap();
        let prm = ModelParams { hbar, mass: m, ..ModelParams::default() };
        let w = rotation_frequency(&spec, &g, (x, p), &prm).unwrap();
        let expect = (0.5 * k * x * x - p * p / (2.0 * m)) / hbar;
        prop_assert!((w - expect).abs() <= 1e-12 * expect.abs().max(1.0));
    }

    #[test]
    fn accepted_grids_are_resolvable(nx_pow in 2u32..9, np_pow in 2u32..9, half in 0.5f64..20.0, pmax in 0.1f64..50.0, hbar in 0.1f64..3.0) {
        let spec = GridSpec { nx: 1 << nx_pow, np: 1 << np_pow, x_min: -half, x_max: half, p_min: -pmax, p_max: pmax, n: 1 };
        if let Ok(g) = PhaseGrid::new(spec, hbar) {
            prop_assert!(hbar * std::f64::consts::PI / g.dx() >= pmax * (1.0 - 1e-12));
        }
    }

    #[test]
    fn constructors_reject_non_finite(bad in prop::sample::select(vec![f64::NAN, f64::INFINITY, f64::NEG_INFINITY]), at in 0usize..64) {
        let g = grid64();
        let phase = PhaseWaveFunction::from_fn(g, |x, _| if x == g.x(at) { C64::new(bad, 0.0) } else { C64::new(1.0, 0.0) });
        prop_assert!(phase.is_err());
        let config = ConfigWaveFunction::from_fn(*g.x_axis(), |y| if y == g.x(at) { C64::new(0.0, bad) } else { C64::new(1.0, 0.0) });
        prop_assert!(config.is_err());
    }

    #[test]
    fn generator_is_self_adjoint(b1 in bumps(), b2 in bumps(), prm in params()) {
        let g = grid64();
        let (f1, f2) = (phase_field(g, &b1), phase_field(g, &b2));
        let l = f1.inner(&apply_diffusion_generator(&f2, &prm).unwrap());
        let r = apply_diffusion_generator(&f1, &prm).unwrap().inner(&f2);
        let scale = apply_diffusion_generator(&f1, &prm).unwrap().norm() * f2.norm();
        prop_assert!((l - r).norm() <= 1e-8 * scale);
    }

    #[test]
    fn diffusion_is_contractive(b in bumps(), prm in params(), t in 0.0f64..2.0) {
        let g = grid64();
        let phi = phase_field(g, &b);
        let out = evolve_diffusion(&phi, t, 0.05 / prm.relaxation_rate(), &prm).unwrap();
        prop_assert!(out.norm() <= phi.norm() * (1.0 + 1e-12));
    }

    #[test]
    fn lifts_are_in_the_kernel(b in bumps(), prm in params()) {
        let g = PhaseGrid::new(GridSpec { p_min: -16.0, p_max: 16.0, ..GridSpec::square(128, 10.0) }, 1.0).unwrap();
        let psi = config_field(*g.x_axis(), &b);
        let phi = lift_to_phase(&psi, &g, &prm).unwrap();
        let out = apply_diffusion_generator(&phi, &prm).unwrap();
        prop_assert!(out.norm() <= 1e-6 * phi.norm(), "{}", out.norm() / phi.norm());
    }

    #[test]
    fn projector_algebra(b in bumps(), c in bumps(), prm in params()) {
        let g = PhaseGrid::new(GridSpec { p_min: -16.0, p_max: 16.0, ..GridSpec::square(128, 10.0) }, 1.0).unwrap();
        let pr = Projector::new(&g, &prm).unwrap();
        let psi = config_field(*g.x_axis(), &b);
        let lifted = pr.lift(&psi).unwrap();
        prop_assert!((lifted.norm() - psi.norm()).abs() <= 1e-6 * psi.norm());
        let again = pr.lift(&pr.project(&lifted).unwrap()).unwrap();
        prop_assert!(again.distance(&lifted) <= 1e-6 * lifted.norm());
        let phi = phase_field(g, &c);
        prop_assert!(pr.stationary_part(&phi).unwrap().norm() <= phi.norm() * (1.0 + 1e-12));
    }

    #[test]
    fn densities_are_nonnegative_with_unit_mass(b in bumps(), prm in params()) {
        let g = PhaseGrid::new(GridSpec { p_min: -16.0, p_max: 16.0, ..GridSpec::square(128, 10.0) }, 1.0).unwrap();
        let psi = config_field(*g.x_axis(), &b);
        let rho = phase_density(&psi, &g, &prm, true).unwrap();
        prop_assert!(rho.min() >= -1e-12);
        prop_assert!((rho.total() - 1.0).abs() < 1e-6);
        let rx = config_density(&psi, &prm, true).unwrap();
        prop_assert!(rx.iter().all(|v| *v >= -1e-12));
        prop_assert!((rx.iter().sum::<f64>() * g.dx() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn transport_and_rotation_preserve_norm(b in bumps(), k in 0.0f64..2.0, dt in 0.0f64..0.5) {
        let g = grid64();
        let phi = phase_field(g, &b);
        let spec = HamiltonianSpec::separable(1.0, Potential::Harmonic { stiffness: k }).unwrap();
        let n0 = phi.norm();
        prop_assert!((liouville_step(&phi, &spec, dt).unwrap().norm() / n0 - 1.0).abs() < 1e-10);
        prop_assert!((phase_rotation_step(&phi, &spec, &ModelParams::default(), dt).unwrap().norm() / n0 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn full_evolution_norm_nonincreasing(b in bumps(), prm in params(), k in 0.0f64..2.0) {
        let g = grid64();
        let spec = HamiltonianSpec::separable(1.0, Potential::Harmonic { stiffness: k }).unwrap();
        let prop = FullPropagator::new(&g, &spec, &prm, 0.05 / prm.relaxation_rate()).unwrap();
        let mut v = phase_field(g, &b).into_values();
        let mut last = PhaseWaveFunction::new(g, v.clone()).unwrap().norm();
        for _ in 0..10 {
            prop.advance(&mut v, 1);
            let n = PhaseWaveFunction::new(g, v.clone()).unwrap().norm();
            prop_assert!(n <= last * (1.0 + 1e-8));
            last = n;
        }
    }

    #[test]
    fn effective_operators_are_linear(b1 in bumps(), b2 in bumps(), re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let ax = XAxis::new(32, -6.0, 6.0).unwrap();
        let prm = ModelParams::default();
        let (p1, p2) = (config_field(ax, &b1), config_field(ax, &b2));
        let c = C64::new(re, im);
        let mix = p1.add_scaled(c, &p2);
        let pot = Potential::Cosine { amplitude: 0.8, wavenumber: std::f64::consts::PI / 6.0 };
        let lhs = apply_h_approx(&mix, &pot, &prm).unwrap();
        let rhs = apply_h_approx(&p1, &pot, &prm).unwrap().add_scaled(c, &apply_h_approx(&p2, &pot, &prm).unwrap());
        prop_assert!(lhs.distance(&rhs) <= 1e-10 * lhs.norm().max(1.0));
        let spec = HamiltonianSpec::separable(1.0, pot).unwrap();
        let lhs = apply_h_integral(&mix, &spec, &prm).unwrap();
        let rhs = apply_h_integral(&p1, &spec, &prm).unwrap().add_scaled(c, &apply_h_integral(&p2, &spec, &prm).unwrap());
        prop_assert!(lhs.distance(&rhs) <= 1e-10 * lhs.norm().max(1.0));
    }

    #[test]
    fn approx_operator_is_hermitian(b1 in bumps(), b2 in bumps(), prm in params()) {
        let ax = XAxis::new(64, -8.0, 8.0).unwrap();
        let (p1, p2) = (config_field(ax, &b1), config_field(ax, &b2));
        let pot = Potential::Quartic { coeff: 0.01 };
        let l = p1.inner(&apply_h_approx(&p2, &pot, &prm).unwrap());
        let r = apply_h_approx(&p1, &pot, &prm).unwrap().inner(&p2);
        prop_assert!((l - r).norm() <= 1e-8 * l.norm().max(1.0));
    }

    #[test]
    fn weight_modulus_law(prm in params(), seed in any::<u64>(), t in 0.0f64..1.0) {
        let spec = HamiltonianSpec::separable(1.0, Potential::Cosine { amplitude: 1.0, wavenumber: 1.0 }).unwrap();
        let ens = sample_trajectories(&StartDistribution::Gaussian { x: 0.0, p: 0.0, std_x: 1.0, std_p: 1.0 }, &spec, &prm, t, 0.01, 8, seed).unwrap();
        for tr in &ens.trajectories {
            let w = complex_weight(tr, &spec, &prm).unwrap();
            let expect = prm.relaxation_rate() * tr.duration();
            prop_assert!((w.log_magnitude - expect).abs() <= 1e-12 * expect.max(1.0));
            prop_assert!((w.value().norm().ln() - expect).abs() <= 1e-12 * expect.max(1.0));
        }
    }
}
