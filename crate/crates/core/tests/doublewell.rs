use std::f64::consts::PI;

use ionrot_core::doublewell::{
    constraint_residual, doublewell_objective, doublewell_series, geometry_trajectory, mode_drives_doublewell,
    momentum_shift_rates, solve_separation, DoubleWellConfig, DEFAULT_SAMPLES,
};
use ionrot_core::units::coulomb_coupling;
use ionrot_core::{DesignOptions, Error, IonPair, RotationAnsatz};

fn setup() -> (DoubleWellConfig, IonPair) {
    (DoubleWellConfig::reference(), IonPair::calcium_beryllium())
}

/// Forces on both ions from the potential written out term by term.
fn forces(cfg: &DoubleWellConfig, ions: &IonPair, theta_dot: f64, gamma: f64, s: [f64; 2]) -> [f64; 2] {
    let u = cfg.springs(ions, theta_dot);
    let r = s[1] - s[0];
    let c = coulomb_coupling() / (r * r);
    [
        gamma + u[0] * s[0] + 4.0 * cfg.beta * s[0].powi(3) + c,
        gamma + u[1] * s[1] + 4.0 * cfg.beta * s[1].powi(3) - c,
    ]
}

fn force_scale(cfg: &DoubleWellConfig, ions: &IonPair, theta_dot: f64, gamma: f64, s: [f64; 2]) -> f64 {
    let u = cfg.springs(ions, theta_dot);
    let r = s[1] - s[0];
    (0..2)
        .map(|i| gamma.abs() + (u[i] * s[i]).abs() + (4.0 * cfg.beta * s[i].powi(3)).abs() + coulomb_coupling() / (r * r))
        .fold(0.0, f64::max)
}

#[test]
fn reference_geometry_places_one_ion_in_each_well() {
    let (cfg, ions) = setup();
    assert!(cfg.curvature < 0.0 && cfg.beta > 0.0);
    let g = solve_separation(&cfg, &ions, 0.0, None).unwrap();
    let [s1, s2] = g.positions();
    assert!(s1 < 0.0 && s2 > 0.0, "{s1} {s2}");
    let well = (-cfg.curvature / (4.0 * cfg.beta)).sqrt();
    assert!(s1 > -1.5 * well && s2 < 1.5 * well);
    let f = forces(&cfg, &ions, 0.0, g.gamma, g.positions());
    assert!(f[0].abs() < 1e-10 && f[1].abs() < 1e-10, "{f:?}");
    assert!(g.decoupling_defect(&cfg, &ions) < 1e-8);
    assert!(constraint_residual(&cfg, &ions, &g) < 1e-10);
    assert!(g.a.is_finite() && g.a < 0.0);
}

#[test]
fn perturbed_force_breaks_equilibrium() {
    let (cfg, ions) = setup();
    let g = solve_separation(&cfg, &ions, 0.0, None).unwrap();
    let f = forces(&cfg, &ions, 0.0, 1.01 * g.gamma, g.positions());
    let expected = 0.01 * g.gamma.abs();
    for fi in f {
        assert!((fi.abs() - expected).abs() < 1e-6 * expected);
    }
}

#[test]
fn equal_masses_are_rejected() {
    let cfg = DoubleWellConfig::reference();
    let err = solve_separation(&cfg, &IonPair::calcium_pair(), 0.0, None).unwrap_err();
    assert!(matches!(err, Error::DegenerateConstraint));
    let a = RotationAnsatz::plain(PI, 1.0).unwrap();
    assert!(doublewell_objective(&cfg, &IonPair::calcium_pair(), &a, 100, &DesignOptions::default()).is_err());
}

#[test]
fn invalid_quartic_is_rejected() {
    assert!(DoubleWellConfig::new(-1.0, 0.0).is_err());
    assert!(DoubleWellConfig::new(-1.0, -2.0).is_err());
    assert!(DoubleWellConfig::new(f64::NAN, 1.0).is_err());
}

#[test]
fn mirrored_species_give_the_same_modes() {
    let (cfg, ions) = setup();
    let swapped = ions.swapped();
    for theta_dot in [0.0, 3.0, 8.0] {
        let g = solve_separation(&cfg, &ions, theta_dot, None).unwrap();
        let m = solve_separation(&cfg, &swapped, theta_dot, Some(g.d)).unwrap();
        assert!(((m.d - g.d) / g.d).abs() < 1e-10);
        assert!(((m.s0 + g.s0) / g.s0).abs() < 1e-9);
        assert!(((m.gamma + g.gamma) / g.gamma).abs() < 1e-9);
        let (wg, wm) = (g.mode_frequencies_sq(&cfg, &ions), m.mode_frequencies_sq(&cfg, &swapped));
        for k in 0..2 {
            assert!(((wg[k] - wm[k]) / wg[k]).abs() < 1e-9, "{wg:?} {wm:?}");
        }
    }
}

#[test]
fn numerical_frequencies_match_the_degenerate_diagonal_form() {
    let (cfg, ions) = setup();
    for theta_dot in [0.0, 2.0, 5.0, 9.0, 14.0] {
        let g = solve_separation(&cfg, &ions, theta_dot, None).unwrap();
        let v = g.hessian(&cfg, &ions);
        let [plus, minus] = g.mode_frequencies_sq(&cfg, &ions);
        let mean = 0.5 * (v[0][0] + v[1][1]);
        assert!(((plus - (mean + v[0][1])) / plus).abs() < 1e-10);
        assert!(((minus - (mean - v[0][1])) / minus).abs() < 1e-10);
        assert!(plus > 0.0 && minus > plus);
    }
}

#[test]
fn every_sample_is_decoupled_and_in_equilibrium() {
    let (cfg, ions) = setup();
    for (t_f, c) in [(1.0, vec![]), (1.0, vec![0.0059, 0.0285]), (0.4, vec![])] {
        let a = RotationAnsatz::new(PI, t_f, &c).unwrap();
        let tr = geometry_trajectory(&cfg, &ions, &a, DEFAULT_SAMPLES).unwrap();
        assert_eq!(tr.samples.len(), DEFAULT_SAMPLES + 1);
        for g in &tr.samples {
            let s = g.positions();
            let f = forces(&cfg, &ions, g.theta_dot, g.gamma, s);
            let scale = force_scale(&cfg, &ions, g.theta_dot, g.gamma, s);
            assert!(f[0].abs().max(f[1].abs()) < 1e-14 * scale, "{f:?} vs {scale}");
            assert!(g.decoupling_defect(&cfg, &ions) < 1e-8);
            assert!(constraint_residual(&cfg, &ions, g) < 1e-10);
        }
        for w in tr.samples.windows(2) {
            assert!(((w[1].d - w[0].d) / w[0].d).abs() < 0.05);
            assert!(((w[1].gamma - w[0].gamma) / w[0].gamma).abs() < 0.05);
        }
    }
}

#[test]
fn modes_stay_confined_along_the_reference_protocol() {
    let (cfg, ions) = setup();
    let a = RotationAnsatz::new(PI, 1.0, &[0.0059, 0.0285]).unwrap();
    let tr = geometry_trajectory(&cfg, &ions, &a, DEFAULT_SAMPLES).unwrap();
    let drives = mode_drives_doublewell(&tr).unwrap();
    for k in 0..=200 {
        let t = k as f64 / 200.0;
        for d in &drives {
            assert!((d.omega_sq)(t) > 0.0);
        }
    }
}

#[test]
fn interpolated_geometry_matches_a_direct_solve() {
    let (cfg, ions) = setup();
    let a = RotationAnsatz::new(PI, 0.8, &[0.01]).unwrap();
    let tr = geometry_trajectory(&cfg, &ions, &a, 400).unwrap();
    for t in [0.0013, 0.2, 0.4171, 0.79] {
        let direct = solve_separation(&cfg, &ions, a.eval(t).dot, None).unwrap();
        let g = tr.at(t).unwrap();
        assert!(((g.d - direct.d) / direct.d).abs() < 1e-11);
        assert!(((g.gamma - direct.gamma) / direct.gamma).abs() < 1e-10);
    }
}

#[test]
fn equilibrium_rates_match_finite_differences() {
    let (cfg, ions) = setup();
    let a = RotationAnsatz::new(PI, 1.2, &[0.004, -0.002]).unwrap();
    let tr = geometry_trajectory(&cfg, &ions, &a, 600).unwrap();
    let pos = |t: f64| tr.at(t).unwrap().positions();
    let h = 2e-3;
    for t in [0.1, 0.3, 0.6, 0.95] {
        let (m2, m1, p1, p2, c) = (pos(t - 2.0 * h), pos(t - h), pos(t + h), pos(t + 2.0 * h), pos(t));
        let vel = tr.velocities(t).unwrap();
        let acc = tr.accelerations(t).unwrap();
        for i in 0..2 {
            let fd1 = (m2[i] - 8.0 * m1[i] + 8.0 * p1[i] - p2[i]) / (12.0 * h);
            let fd2 = (-m2[i] + 16.0 * m1[i] - 30.0 * c[i] + 16.0 * p1[i] - p2[i]) / (12.0 * h * h);
            assert!((vel[i] - fd1).abs() < 1e-6 * (1.0 + fd1.abs()), "v{i} t={t}: {} vs {fd1}", vel[i]);
            assert!((acc[i] - fd2).abs() < 1e-4 * (1.0 + fd2.abs()), "a{i} t={t}: {} vs {fd2}", acc[i]);
        }
    }
}

#[test]
fn static_protocol_has_no_momentum_shift() {
    let (cfg, ions) = setup();
    let a = RotationAnsatz::plain(0.0, 1.0).unwrap();
    let tr = geometry_trajectory(&cfg, &ions, &a, 50).unwrap();
    let drives = mode_drives_doublewell(&tr).unwrap();
    for k in 0..=20 {
        let t = k as f64 / 20.0;
        for d in &drives {
            assert_eq!((d.p0_dot)(t), 0.0);
            assert!(((d.omega_sq)(t) - d.omega0_sq).abs() < 1e-12 * d.omega0_sq);
        }
    }
    let o = doublewell_objective(&cfg, &ions, &a, 50, &DesignOptions::default()).unwrap();
    assert!(o.relative().abs() < 1e-12);
}

#[test]
fn momentum_shifts_project_mass_weighted_motion() {
    let ions = IonPair::new(4.0, 9.0).unwrap();
    let [plus, minus] = momentum_shift_rates(&ions, [1.0, 1.0]);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    assert!((plus - r * 5.0).abs() < 1e-15 && (minus - r).abs() < 1e-15);
}

#[test]
fn slow_rotation_is_adiabatic() {
    let (cfg, ions) = setup();
    let opts = DesignOptions::default();
    let mut last = f64::INFINITY;
    for t_f in [2.0, 5.0, 20.0] {
        let a = RotationAnsatz::plain(PI, t_f).unwrap();
        let rel = doublewell_objective(&cfg, &ions, &a, DEFAULT_SAMPLES, &opts).unwrap().relative();
        assert!(rel >= -1e-12 && rel < last);
        last = rel;
    }
    assert!(last < 1e-10);
}

#[test]
fn series_starts_unexcited_and_ends_static() {
    let (cfg, ions) = setup();
    let a = RotationAnsatz::new(PI, 2.0, &[0.009168, 0.000442]).unwrap();
    let s = doublewell_series(&cfg, &ions, &a, 200, &DesignOptions::default()).unwrap();
    assert_eq!(s.len(), 201);
    assert!(s[0].relative_excitation.abs() < 1e-12);
    assert!((s[0].d - s[200].d).abs() < 1e-9 * s[0].d);
    assert!((s[0].gamma - s[200].gamma).abs() < 1e-9 * s[0].gamma);
    assert!(s.iter().all(|r| r.omega_minus > r.omega_plus && r.omega_plus > 0.0));
    assert!(s[200].relative_excitation < 1e-6);
}
