// Copyright 2026 qubitcorr Contributors
// SPDX-License-Identifier: Apache-2.0

//! Ensemble-averaged evolution and closed-form output correlators.
//!
//! Averaging the Itô equations over the noise leaves a linear flow: (x, z)
//! evolve under a 2×2 generator M and y decays on its own. All correlators
//! are evaluated through the real matrix exponential of M, which stays
//! valid when the two decay rates coincide or turn complex.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::curve::{CorrelatorCurve, CurveKind};
use crate::error::{Error, Result};
use crate::mat2::Mat2;
use crate::model::{BlochVector, Channel, MeasurementSetup};

/// Generator of the averaged dynamics: d(x, z)/dt = M (x, z), dy/dt = −γ_y y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionGenerator {
    /// M acting on (x, z) (µs⁻¹).
    pub m: [[f64; 2]; 2],
    /// Decay rate of y (µs⁻¹).
    pub gamma_y: f64,
}

impl EvolutionGenerator {
    pub fn matrix(&self) -> Mat2 {
        Mat2(self.m)
    }

    /// exp(M t) on the (x, z) components.
    pub fn propagator(&self, t: f64) -> Mat2 {
        self.matrix().exp(t)
    }

    pub fn propagate(&self, state: BlochVector, t: f64) -> BlochVector {
        let [x, z] = self.propagator(t).apply([state.x, state.z]);
        BlochVector::new(x, state.y * (-self.gamma_y * t).exp(), z)
    }
}

/// Unit vector of a channel direction in (x, z) components.
fn direction(setup: &MeasurementSetup, channel: Channel) -> [f64; 2] {
    let (s, c) = setup.channel(channel).angle.sin_cos();
    [s, c]
}

/// M = −Σ_i Γ_i (1 − n_i n_iᵀ) − γ 1 + Ω̃_R [[0, 1], [−1, 0]].
///
/// Each measurement dephases the components orthogonal to its own axis;
/// with the z-channel along z this reproduces the usual form with
/// m₀₀ = −(Γ_z + Γ_φ cos²φ + γ) and m₀₁ = Γ_φ sinφ cosφ + Ω̃_R.
pub fn build_generator(setup: &MeasurementSetup) -> EvolutionGenerator {
    let env = &setup.environment;
    let gamma = env.decoherence_rate();
    let omega = env.rabi_mismatch;
    let mut m = [[-gamma, omega], [-omega, -gamma]];
    for channel in Channel::BOTH {
        let rate = setup.channel(channel).gamma;
        let n = direction(setup, channel);
        for (i, row) in m.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                let delta = if i == j { 1.0 } else { 0.0 };
                *entry -= rate * (delta - n[i] * n[j]);
            }
        }
    }
    let gamma_y = setup.channel_z.gamma + setup.channel_phi.gamma + env.y_damping_rate();
    EvolutionGenerator { m, gamma_y }
}

/// The two decay rates of the averaged (x, z) dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRates {
    pub gamma_plus: Complex64,
    pub gamma_minus: Complex64,
    /// Γ_z² + Γ_φ² + 2Γ_zΓ_φ cos2φ − 4Ω̃_R².
    pub discriminant: f64,
}

impl DecayRates {
    pub fn is_real(&self) -> bool {
        self.discriminant >= 0.0
    }
}

/// Γ± = [Γ_z + Γ_φ ± √D]/2 + γ, with a complex root when D < 0.
pub fn decay_rates(setup: &MeasurementSetup) -> DecayRates {
    let (gz, gp) = (setup.channel_z.gamma, setup.channel_phi.gamma);
    let phi = setup.relative_angle();
    let omega = setup.environment.rabi_mismatch;
    let discriminant = gz * gz + gp * gp + 2.0 * gz * gp * (2.0 * phi).cos() - 4.0 * omega * omega;
    let root = Complex64::new(discriminant, 0.0).sqrt();
    let mean = Complex64::new(0.5 * (gz + gp) + setup.environment.decoherence_rate(), 0.0);
    DecayRates {
        gamma_plus: mean + 0.5 * root,
        gamma_minus: mean - 0.5 * root,
        discriminant,
    }
}

/// Noise-free ensemble-averaged state at time `t` ≥ 0.
pub fn propagate_average(state: BlochVector, t: f64, setup: &MeasurementSetup) -> BlochVector {
    build_generator(setup).propagate(state, t)
}

fn check_lag(tau: f64) -> Result<()> {
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "lag must be nonnegative, got {tau}; use K_ij(-τ) = K_ji(τ)"
        )));
    }
    Ok(())
}

/// K_ij(τ) for τ → +0 and beyond, without the τ_i δ(τ) spike of the
/// self-correlators: Tr[σ_j ρ_av(τ | collapsed onto +1 of σ_i)], which by
/// unitality equals n_j · exp(Mτ) n_i.
pub fn correlator_closed_form(
    setup: &MeasurementSetup,
    i: Channel,
    j: Channel,
    tau: f64,
) -> Result<f64> {
    check_lag(tau)?;
    let e = build_generator(setup).propagator(tau);
    Ok(e.bilinear(direction(setup, j), direction(setup, i)))
}

/// K_ij(τ) by the collapse recipe: the earlier signal is replaced by a
/// projective σ_i outcome ±1 with probability (1 ± Tr[σ_i ρ(t₁)])/2, the
/// collapsed state is propagated and the later signal averaged. This is
/// the two-branch form and does not assume unital evolution.
pub fn correlator_collapse_recipe(
    setup: &MeasurementSetup,
    i: Channel,
    j: Channel,
    tau: f64,
    rho_t1: BlochVector,
) -> Result<f64> {
    check_lag(tau)?;
    let generator = build_generator(setup);
    let axis_i = setup.channel(i).angle;
    let axis_j = setup.channel(j).angle;
    let p_up = 0.5 * (1.0 + rho_t1.along(axis_i));
    let up = generator
        .propagate(BlochVector::axis(axis_i), tau)
        .along(axis_j);
    let down = generator
        .propagate(-BlochVector::axis(axis_i), tau)
        .along(axis_j);
    Ok(p_up * up - (1.0 - p_up) * down)
}

/// Jump rate between the Zeno-pinned states for nearly aligned axes:
/// [φ²Γ_zΓ_φ + Ω̃_R²] / [2(Γ_z + Γ_φ)] + (T1⁻¹ + T2⁻¹)/4.
/// Meaningful only for |φ| ≪ 1.
pub fn zeno_jump_rate(setup: &MeasurementSetup) -> f64 {
    let (gz, gp) = (setup.channel_z.gamma, setup.channel_phi.gamma);
    let phi = setup.relative_angle();
    let omega = setup.environment.rabi_mismatch;
    (phi * phi * gz * gp + omega * omega) / (2.0 * (gz + gp))
        + 0.5 * setup.environment.decoherence_rate()
}

/// K_zφ(τ) − K_φz(τ) = n_φ · (E − Eᵀ) n_z with E = exp(Mτ).
pub fn antisym_cross_correlator(setup: &MeasurementSetup, tau: f64) -> f64 {
    let e = build_generator(setup).propagator(tau);
    let (nz, np) = (direction(setup, Channel::Z), direction(setup, Channel::Phi));
    (e - e.transpose()).bilinear(np, nz)
}

/// Closed-form curve of one correlator on the given lags.
pub fn analytic_curve(
    setup: &MeasurementSetup,
    kind: CurveKind,
    lags: &[f64],
) -> Result<CorrelatorCurve> {
    let values = lags
        .iter()
        .map(|&tau| match kind {
            CurveKind::Pair(i, j) => correlator_closed_form(setup, i, j, tau),
            CurveKind::Antisymmetric => {
                check_lag(tau).map(|_| antisym_cross_correlator(setup, tau))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    CorrelatorCurve::new(kind, lags.to_vec(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MeasurementChannel, QubitEnvironment};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    const G: f64 = 1.0 / 1.3;

    fn reference_env() -> QubitEnvironment {
        QubitEnvironment::new(60.0, 30.0, 0.0)
    }

    fn setup(gz: f64, gp: f64, phi: f64, env: QubitEnvironment) -> MeasurementSetup {
        MeasurementSetup::canonical(
            (gz, 1.0 / (2.0 * 0.49 * gz)),
            (gp, 1.0 / (2.0 * 0.41 * gp)),
            phi,
            env,
        )
    }

    fn random_setup(rng: &mut ChaCha8Rng) -> MeasurementSetup {
        let gz = rng.random_range(0.1..3.0);
        let gp = rng.random_range(0.1..3.0);
        let t1 = rng.random_range(5.0..100.0);
        let t2 = rng.random_range(0.6..2.0) * t1;
        let omega = rng.random_range(-2.0..2.0);
        let z_angle = rng.random_range(-PI..PI);
        MeasurementSetup::new(
            MeasurementChannel::from_efficiency(gz, rng.random_range(0.1..1.0), z_angle),
            MeasurementChannel::from_efficiency(
                gp,
                rng.random_range(0.1..1.0),
                z_angle + rng.random_range(-PI..PI),
            ),
            QubitEnvironment::new(t1, t2.min(2.0 * t1), omega),
        )
    }

    fn random_state(rng: &mut ChaCha8Rng) -> BlochVector {
        loop {
            let v = BlochVector::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if v.norm() <= 1.0 {
                return v;
            }
        }
    }

    /// Explicit closed forms for K_zz and K_zφ with real, distinct rates.
    fn explicit_kzz(gz: f64, gp: f64, phi: f64, gamma: f64, omega: f64, tau: f64) -> f64 {
        let (gpl, gmi) = explicit_rates(gz, gp, phi, gamma, omega);
        let a = (gz + (2.0 * phi).cos() * gp) / (gpl - gmi);
        0.5 * (1.0 + a) * (-gmi * tau).exp() + 0.5 * (1.0 - a) * (-gpl * tau).exp()
    }

    fn explicit_kzphi(gz: f64, gp: f64, phi: f64, gamma: f64, omega: f64, tau: f64) -> f64 {
        let (gpl, gmi) = explicit_rates(gz, gp, phi, gamma, omega);
        ((gz + gp) * phi.cos() + 2.0 * omega * phi.sin()) / (2.0 * (gpl - gmi))
            * ((-gmi * tau).exp() - (-gpl * tau).exp())
            + 0.5 * phi.cos() * ((-gmi * tau).exp() + (-gpl * tau).exp())
    }

    fn explicit_rates(gz: f64, gp: f64, phi: f64, gamma: f64, omega: f64) -> (f64, f64) {
        let d = gz * gz + gp * gp + 2.0 * gz * gp * (2.0 * phi).cos() - 4.0 * omega * omega;
        assert!(d > 0.0);
        (
            0.5 * (gz + gp + d.sqrt()) + gamma,
            0.5 * (gz + gp - d.sqrt()) + gamma,
        )
    }

    #[test]
    fn generator_for_aligned_axes() {
        let g = build_generator(&setup(1.1, 0.7, 0.0, QubitEnvironment::ideal()));
        assert_eq!(g.m, [[-1.8, 0.0], [0.0, 0.0]]);
    }

    #[test]
    fn generator_for_orthogonal_axes() {
        let env = QubitEnvironment::new(f64::INFINITY, f64::INFINITY, 0.3);
        let g = build_generator(&setup(0.9, 0.9, FRAC_PI_2, env));
        let expected = [[-0.9, 0.3], [-0.3, -0.9]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((g.m[i][j] - expected[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn generator_entries_match_canonical_form() {
        let (gz, gp, phi) = (0.8, 1.3, 0.7);
        let env = QubitEnvironment::new(20.0, 25.0, 0.05);
        let gamma = (1.0 / 20.0 + 1.0 / 25.0) / 2.0;
        let g = build_generator(&setup(gz, gp, phi, env));
        let (s, c) = phi.sin_cos();
        let expected = [
            [-(gz + gp * c * c + gamma), gp * s * c + 0.05],
            [gp * s * c - 0.05, -(gp * s * s + gamma)],
        ];
        for i in 0..2 {
            for j in 0..2 {
                assert!((g.m[i][j] - expected[i][j]).abs() < 1e-15);
            }
        }
        assert!((g.gamma_y - (gz + gp + 1.0 / 25.0)).abs() < 1e-15);
    }

    /// Eigenvalues of −M from its characteristic polynomial.
    fn neg_eigenvalues(m: [[f64; 2]; 2]) -> (Complex64, Complex64) {
        let tr = -(m[0][0] + m[1][1]);
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let root = Complex64::new(tr * tr / 4.0 - det, 0.0).sqrt();
        (tr / 2.0 + root, tr / 2.0 - root)
    }

    #[test]
    fn decay_rates_near_orthogonal_reference_setup() {
        let s = setup(G, G, FRAC_PI_2 + 0.036, reference_env());
        let r = decay_rates(&s);
        assert!((r.gamma_plus.re - 0.8219).abs() < 5e-5, "{:?}", r);
        assert!((r.gamma_minus.re - 0.7665).abs() < 5e-5, "{:?}", r);
        let (hi, lo) = neg_eigenvalues(build_generator(&s).m);
        assert!((hi - r.gamma_plus).norm() < 1e-12);
        assert!((lo - r.gamma_minus).norm() < 1e-12);
    }

    #[test]
    fn decay_rates_for_aligned_axes() {
        let r = decay_rates(&setup(1.1, 0.7, 0.0, QubitEnvironment::ideal()));
        assert!((r.gamma_plus.re - 1.8).abs() < 1e-15);
        assert!(r.gamma_minus.re.abs() < 1e-15);
        assert!(r.is_real());
    }

    #[test]
    fn decay_rates_turn_complex_with_mismatch() {
        let env = QubitEnvironment::new(f64::INFINITY, f64::INFINITY, 0.4);
        let r = decay_rates(&setup(0.9, 0.9, FRAC_PI_2, env));
        assert!((r.discriminant + 4.0 * 0.16).abs() < 1e-15);
        assert!((r.gamma_plus - Complex64::new(0.9, 0.4)).norm() < 1e-15);
        assert!((r.gamma_minus - Complex64::new(0.9, -0.4)).norm() < 1e-15);
    }

    #[test]
    fn rate_sum_and_eigenvalues_agree_on_random_setups() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let s = random_setup(&mut rng);
            let r = decay_rates(&s);
            let sum =
                s.channel_z.gamma + s.channel_phi.gamma + 2.0 * s.environment.decoherence_rate();
            assert!((r.gamma_plus + r.gamma_minus - sum).norm() < 1e-12);
            let (hi, lo) = neg_eigenvalues(build_generator(&s).m);
            let direct = (hi - r.gamma_plus).norm().max((lo - r.gamma_minus).norm());
            let swapped = (hi - r.gamma_minus).norm().max((lo - r.gamma_plus).norm());
            assert!(direct.min(swapped) < 1e-12);
            if r.is_real() {
                assert!(r.gamma_plus.re >= r.gamma_minus.re);
            }
        }
    }

    #[test]
    fn propagation_at_zero_time_is_identity() {
        let s = setup(G, G, 1.0, reference_env());
        let r = BlochVector::new(0.3, -0.2, 0.5);
        assert_eq!(propagate_average(r, 0.0, &s), r);
    }

    #[test]
    fn orthogonal_equal_rates_decay_z_exponentially() {
        let s = setup(G, G, FRAC_PI_2, QubitEnvironment::ideal());
        for t in [0.1, 0.7, 3.0] {
            let r = propagate_average(BlochVector::new(0.0, 0.0, 1.0), t, &s);
            assert!(r.x.abs() < 1e-15);
            assert!((r.z - (-G * t).exp()).abs() < 1e-15);
        }
    }

    /// Explicit solution for (x, z) in terms of Γ± and the σ_x / σ_z
    /// coefficients. Its σ_x term is the symmetric combination, so it
    /// applies to states starting on the z-axis, or to any state when
    /// Ω̃_R = 0.
    fn explicit_evolution(
        gz: f64,
        gp: f64,
        phi: f64,
        gamma: f64,
        omega: f64,
        t: f64,
        x0: f64,
        z0: f64,
    ) -> (f64, f64) {
        let (gpl, gmi) = explicit_rates(gz, gp, phi, gamma, omega);
        let even = 0.5 * ((-gmi * t).exp() + (-gpl * t).exp());
        let odd = 0.5 * ((-gmi * t).exp() - (-gpl * t).exp());
        let cx = (gp * (2.0 * phi).sin() + 2.0 * omega) / (gpl - gmi);
        let cz = (gz + gp * (2.0 * phi).cos()) / (gpl - gmi);
        (
            even * x0 + odd * (cx * z0 - cz * x0),
            even * z0 + odd * (cx * x0 + cz * z0),
        )
    }

    #[test]
    fn propagation_matches_explicit_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut checked = 0;
        while checked < 300 {
            let (gz, gp) = (rng.random_range(0.1..3.0), rng.random_range(0.1..3.0));
            let phi = rng.random_range(0.0..PI);
            let t1 = rng.random_range(5.0..100.0);
            let omega = if checked % 2 == 0 {
                0.0
            } else {
                rng.random_range(-0.5..0.5)
            };
            let env = QubitEnvironment::new(t1, t1, omega);
            let d = gz * gz + gp * gp + 2.0 * gz * gp * (2.0 * phi).cos() - 4.0 * omega * omega;
            if d < 1e-3 {
                continue;
            }
            let s = setup(gz, gp, phi, env);
            let (x0, z0) = if omega == 0.0 {
                (rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7))
            } else {
                (0.0, rng.random_range(-1.0..1.0))
            };
            let t = rng.random_range(0.0..4.0);
            let r = propagate_average(BlochVector::new(x0, 0.0, z0), t, &s);
            let (x, z) = explicit_evolution(gz, gp, phi, env.decoherence_rate(), omega, t, x0, z0);
            assert!(
                (r.x - x).abs() < 1e-12 && (r.z - z).abs() < 1e-12,
                "{gz} {gp} {phi} {omega}"
            );
            checked += 1;
        }
    }

    #[test]
    fn y_decays_with_both_measurements_and_t2() {
        let s = setup(0.5, 0.8, 1.0, QubitEnvironment::new(40.0, 20.0, 0.1));
        let r = propagate_average(BlochVector::new(0.0, 0.6, 0.0), 1.5, &s);
        assert!((r.y - 0.6 * (-(0.5 + 0.8 + 1.0 / 20.0) * 1.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn closed_form_matches_explicit_correlators() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0;
        while checked < 300 {
            let (gz, gp) = (rng.random_range(0.1..3.0), rng.random_range(0.1..3.0));
            let phi = rng.random_range(-PI..PI);
            let omega = rng.random_range(-0.5..0.5);
            let t1 = rng.random_range(5.0..100.0);
            let env = QubitEnvironment::new(t1, 1.5 * t1, omega);
            let d = gz * gz + gp * gp + 2.0 * gz * gp * (2.0 * phi).cos() - 4.0 * omega * omega;
            if d < 1e-3 {
                continue;
            }
            let s = setup(gz, gp, phi, env);
            let gamma = env.decoherence_rate();
            let tau = rng.random_range(0.0..4.0);
            let zz = correlator_closed_form(&s, Channel::Z, Channel::Z, tau).unwrap();
            let zp = correlator_closed_form(&s, Channel::Z, Channel::Phi, tau).unwrap();
            assert!((zz - explicit_kzz(gz, gp, phi, gamma, omega, tau)).abs() < 1e-12);
            assert!((zp - explicit_kzphi(gz, gp, phi, gamma, omega, tau)).abs() < 1e-12);
            // the other two follow from Γ_z ↔ Γ_φ, φ → −φ
            let pp = correlator_closed_form(&s, Channel::Phi, Channel::Phi, tau).unwrap();
            let pz = correlator_closed_form(&s, Channel::Phi, Channel::Z, tau).unwrap();
            assert!((pp - explicit_kzz(gp, gz, -phi, gamma, omega, tau)).abs() < 1e-12);
            assert!((pz - explicit_kzphi(gp, gz, -phi, gamma, omega, tau)).abs() < 1e-12);
            checked += 1;
        }
    }

    #[test]
    fn swap_rule_equals_relabeled_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let s = random_setup(&mut rng);
            let swapped = s.swapped();
            let tau = rng.random_range(0.0..3.0);
            for (i, j) in [(Channel::Z, Channel::Z), (Channel::Z, Channel::Phi)] {
                let direct = correlator_closed_form(&s, i.other(), j.other(), tau).unwrap();
                let relabeled = correlator_closed_form(&swapped, i, j, tau).unwrap();
                assert!((direct - relabeled).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn small_lag_limits() {
        for phi in [0.0, 0.4, FRAC_PI_2, 2.5, PI] {
            let s = setup(G, 1.1, phi, reference_env());
            let k = |i, j| correlator_closed_form(&s, i, j, 0.0).unwrap();
            assert!((k(Channel::Z, Channel::Z) - 1.0).abs() < 1e-15);
            assert!((k(Channel::Phi, Channel::Phi) - 1.0).abs() < 1e-15);
            assert!((k(Channel::Z, Channel::Phi) - phi.cos()).abs() < 1e-15);
            assert!((k(Channel::Phi, Channel::Z) - phi.cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn full_correlation_and_anticorrelation_without_decoherence() {
        for tau in [0.0, 0.5, 3.0, 20.0] {
            let aligned = setup(G, G, 0.0, QubitEnvironment::ideal());
            let opposite = setup(G, G, PI, QubitEnvironment::ideal());
            let orth = setup(0.6, 1.2, FRAC_PI_2, QubitEnvironment::ideal());
            let k = |s: &MeasurementSetup, i, j| correlator_closed_form(s, i, j, tau).unwrap();
            assert!((k(&aligned, Channel::Z, Channel::Phi) - 1.0).abs() < 1e-14);
            assert!((k(&aligned, Channel::Z, Channel::Z) - 1.0).abs() < 1e-14);
            assert!((k(&opposite, Channel::Z, Channel::Phi) + 1.0).abs() < 1e-14);
            assert!(k(&orth, Channel::Z, Channel::Phi).abs() < 1e-15);
            assert!((k(&orth, Channel::Z, Channel::Z) - (-1.2 * tau).exp()).abs() < 1e-14);
            assert!((k(&orth, Channel::Phi, Channel::Phi) - (-0.6 * tau).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn cross_correlator_symmetric_without_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let s = random_setup(&mut rng).with_rabi_mismatch(0.0);
            let tau = rng.random_range(0.0..3.0);
            let a = correlator_closed_form(&s, Channel::Z, Channel::Phi, tau).unwrap();
            let b = correlator_closed_form(&s, Channel::Phi, Channel::Z, tau).unwrap();
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn negative_lag_is_rejected() {
        let s = setup(G, G, 1.0, reference_env());
        assert!(matches!(
            correlator_closed_form(&s, Channel::Z, Channel::Z, -0.1),
            Err(Error::InvalidArgument(_))
        ));
        assert!(
            correlator_collapse_recipe(&s, Channel::Z, Channel::Z, -0.1, BlochVector::ZERO)
                .is_err()
        );
    }

    #[test]
    fn collapse_recipe_projective_self_product() {
        let s = setup(G, G, 1.0, reference_env());
        let k =
            correlator_collapse_recipe(&s, Channel::Z, Channel::Z, 0.0, BlochVector::ZERO).unwrap();
        assert!((k - 1.0).abs() < 1e-15);
    }

    #[test]
    fn collapse_recipe_matches_closed_form_and_ignores_initial_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let s = random_setup(&mut rng);
            for tau in [0.0, 0.1, 0.5, 1.0, 2.0] {
                for i in Channel::BOTH {
                    for j in Channel::BOTH {
                        let closed = correlator_closed_form(&s, i, j, tau).unwrap();
                        let values: Vec<f64> = (0..5)
                            .map(|_| {
                                correlator_collapse_recipe(&s, i, j, tau, random_state(&mut rng))
                                    .unwrap()
                            })
                            .collect();
                        for v in values {
                            assert!((v - closed).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn rotating_both_axes_leaves_correlators_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let s = random_setup(&mut rng);
            let r = s.rotated(rng.random_range(-PI..PI));
            let tau = rng.random_range(0.0..3.0);
            for i in Channel::BOTH {
                for j in Channel::BOTH {
                    let a = correlator_closed_form(&s, i, j, tau).unwrap();
                    let b = correlator_closed_form(&r, i, j, tau).unwrap();
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn continuous_across_rate_degeneracy() {
        // Γ_z = Γ_φ at φ = π/2 makes Γ+ = Γ−; crossing it changes the sign
        // of the discriminant through Ω̃_R.
        let base = setup(G, G, FRAC_PI_2, reference_env());
        let tau = 1.7;
        let k = |omega: f64| {
            let s = base.with_rabi_mismatch(omega);
            correlator_closed_form(&s, Channel::Z, Channel::Phi, tau).unwrap()
        };
        let ks: Vec<f64> = (-20..=20).map(|n| k(n as f64 * 1e-9)).collect();
        for w in ks.windows(2) {
            assert!((w[1] - w[0]).abs() < 1e-8);
        }
        assert!(ks.iter().all(|v| v.is_finite()));
        // At the degeneracy K_zz = e^{−Γτ}(1 + 0) for equal rates.
        let zz = correlator_closed_form(&base, Channel::Z, Channel::Z, tau).unwrap();
        let g = G + reference_env().decoherence_rate();
        assert!((zz - (-g * tau).exp()).abs() < 1e-15);
    }

    #[test]
    fn zeno_rate_examples() {
        assert_eq!(
            zeno_jump_rate(&setup(G, G, 0.0, QubitEnvironment::ideal())),
            0.0
        );
        let g = 0.7692;
        let r = zeno_jump_rate(&setup(g, g, 0.05, QubitEnvironment::ideal()));
        assert!((r - 0.0025 * g * g / (4.0 * g)).abs() < 1e-15);
        assert!((r - 4.81e-4).abs() < 1e-6);
        let decoherence_only =
            zeno_jump_rate(&setup(G, G, 0.0, QubitEnvironment::new(4.0, 4.0, 0.0)));
        assert!((decoherence_only - 0.125).abs() < 1e-15);
    }

    #[test]
    fn zeno_cross_correlator_is_nearly_exponential() {
        let s = setup(G, G, 0.05, QubitEnvironment::ideal());
        let rate = 2.0 * zeno_jump_rate(&s);
        let n = 200;
        for k in 0..=n {
            let tau = 2.0 / G * k as f64 / n as f64;
            let exact = correlator_closed_form(&s, Channel::Z, Channel::Phi, tau).unwrap();
            let approx = (-rate * tau).exp();
            assert!(((exact - approx) / approx).abs() < 0.02);
        }
    }

    #[test]
    fn antisymmetric_examples() {
        let s = setup(G, 1.2, 1.1, QubitEnvironment::new(60.0, 30.0, 0.3));
        assert_eq!(antisym_cross_correlator(&s, 0.0), 0.0);
        assert!(antisym_cross_correlator(&s.with_rabi_mismatch(0.0), 0.8).abs() < 1e-15);
        for phi in [0.0, PI] {
            let a = setup(G, 1.2, phi, QubitEnvironment::new(60.0, 30.0, 0.3));
            assert!(antisym_cross_correlator(&a, 0.8).abs() < 1e-15);
        }
    }

    #[test]
    fn antisymmetric_matches_difference_and_explicit_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let s = random_setup(&mut rng);
            let tau = rng.random_range(0.0..3.0);
            let diff = correlator_closed_form(&s, Channel::Z, Channel::Phi, tau).unwrap()
                - correlator_closed_form(&s, Channel::Phi, Channel::Z, tau).unwrap();
            assert!((antisym_cross_correlator(&s, tau) - diff).abs() < 1e-12);
            let r = decay_rates(&s);
            if r.discriminant > 1e-3 {
                let (gp, gm) = (r.gamma_plus.re, r.gamma_minus.re);
                let explicit = 2.0 * s.environment.rabi_mismatch * s.relative_angle().sin()
                    / (gp - gm)
                    * ((-gm * tau).exp() - (-gp * tau).exp());
                assert!((antisym_cross_correlator(&s, tau) - explicit).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn analytic_curve_uses_all_lags() {
        let s = setup(G, G, FRAC_PI_4, reference_env());
        let lags = crate::curve::lag_grid(0.1, 1.0);
        let c = analytic_curve(&s, CurveKind::Antisymmetric, &lags).unwrap();
        assert_eq!(c.len(), 11);
        let zz = analytic_curve(&s, CurveKind::Pair(Channel::Z, Channel::Z), &lags).unwrap();
        assert_eq!(zz.values[0], 1.0);
    }

    proptest! {
        #[test]
        fn averaged_evolution_stays_in_ball(
            gz in 0.1..3.0f64, gp in 0.1..3.0f64, phi in -3.0..3.0f64, omega in -1.0..1.0f64, t in 0.0..10.0f64,
            theta in 0.0..PI, az in -PI..PI,
        ) {
            let s = setup(gz, gp, phi, QubitEnvironment::new(30.0, 40.0, omega));
            let r0 = BlochVector::new(theta.sin() * az.cos(), theta.sin() * az.sin(), theta.cos());
            prop_assert!(propagate_average(r0, t, &s).norm() <= 1.0 + 1e-12);
        }
    }
}
