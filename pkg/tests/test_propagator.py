import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.linalg import expm

from pulsedsbs.model import PumpEnvelope
from pulsedsbs.propagator import (
    ANTI_STOKES,
    STOKES,
    ChannelMoments,
    ChannelParams,
    ClosedFormValidityError,
    EffectiveParams,
    Propagator2,
    adaptive_simpson,
    commutator_matrix,
    drift_matrix,
    evolve_moments,
    noise_diffusion,
    noise_moment_integral,
    propagator_between,
    propagator_closed_form,
    propagator_numeric,
    propagator_time_ordered,
)

from oracles import covariance_ode_oracle, piecewise_van_loan_noise, van_loan_noise_integral


def channel(process, g, Gamma=0.0, gamma=0.0, detuning=0.0):
    """ChannelParams with c_g = 1 so delta equals the detuning."""
    return ChannelParams(
        process=process,
        coupling=g,
        acoustic_dissipation=Gamma,
        optical_dissipation=gamma,
        delta=detuning,
        optical_group_velocity=1.0,
    )


def random_channels(n, seed, g_over_gamma=(0.1, 30.0), det_over_gamma=(-20.0, 20.0),
                    gamma_frac=(0.0, 0.1), processes=(STOKES, ANTI_STOKES)):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        Gamma = 10.0 ** rng.uniform(-2, 6)
        out.append(
            channel(
                rng.choice(processes),
                g=Gamma * 10.0 ** rng.uniform(*np.log10(g_over_gamma)),
                Gamma=Gamma,
                gamma=Gamma * rng.uniform(*gamma_frac),
                detuning=Gamma * rng.uniform(*det_over_gamma),
            )
        )
    return out


class TestDriftMatrix:
    def test_all_zero(self):
        P = drift_matrix(channel(ANTI_STOKES, g=0.0))
        assert_allclose(P, np.zeros((2, 2)))

    def test_anti_stokes_entries(self):
        P = drift_matrix(channel(ANTI_STOKES, g=1.0))
        assert_allclose(P, np.array([[0.0, -0.5j], [-1j, 0.0]]))

    def test_stokes_entries(self):
        P = drift_matrix(channel(STOKES, g=1.0))
        assert_allclose(P, np.array([[0.0, -0.5j], [1j, 0.0]]))

    def test_dissipative_detuned_entries(self):
        p = channel(STOKES, g=2.0, Gamma=3.0, gamma=0.2, detuning=5.0)
        P = drift_matrix(p)
        assert P[0, 0] == pytest.approx(-(0.2 + 10j) / 4)
        assert P[1, 1] == pytest.approx(-(10j + 3.0) / 2)


class TestNumericPropagator:
    def test_zero_drift_is_identity(self):
        G = propagator_numeric(np.zeros((2, 2)), 1.0)
        assert_allclose(G.entries, np.eye(2))
        assert G.provenance == "numeric_expm"

    def test_diagonal(self):
        G = propagator_numeric(np.diag([-1.0, -2.0]), 1.0)
        assert_allclose(np.diag(G.entries), [math.exp(-1.0), math.exp(-2.0)], rtol=1e-14)

    def test_lossless_pi_over_2(self):
        # |G12| = sin(pi/2)/sqrt(2), G11 = cos(pi/2) = 0 at g*eta = pi/sqrt(2)
        p = channel(ANTI_STOKES, g=1.0)
        G = propagator_numeric(drift_matrix(p), math.pi / math.sqrt(2.0))
        assert abs(G[0, 1]) == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-12)
        assert abs(G[0, 0]) < 1e-12

    def test_negative_eta_rejected(self):
        with pytest.raises(ValueError):
            propagator_numeric(np.zeros((2, 2)), -1.0)


class TestClosedForm:
    def test_identity_at_zero(self):
        for proc in (STOKES, ANTI_STOKES):
            G = propagator_closed_form(channel(proc, g=2.0, Gamma=1.0, detuning=0.5), 0.0)
            assert_allclose(G.entries, np.eye(2), atol=1e-15)
            assert G.provenance == "closed_form"

    def test_anti_stokes_lossless_pi_over_2(self):
        G = propagator_closed_form(channel(ANTI_STOKES, g=1.0), math.pi / math.sqrt(2.0))
        assert abs(G[0, 0]) < 1e-12 and abs(G[1, 1]) < 1e-12
        assert abs(G[0, 1]) == pytest.approx(1.0 / math.sqrt(2.0), rel=1e-12)
        assert abs(G[1, 0]) == pytest.approx(math.sqrt(2.0), rel=1e-12)
        # backscatter asymmetry |G21| = 2 |G12|
        assert abs(G[1, 0]) == pytest.approx(2.0 * abs(G[0, 1]), rel=1e-12)

    def test_stokes_lossless_hyperbolic(self):
        g, eta = 1.3, 0.9
        th = g * eta / math.sqrt(2.0)
        G = propagator_closed_form(channel(STOKES, g=g), eta)
        assert abs(G[0, 0]) == pytest.approx(math.cosh(th), rel=1e-12)
        assert abs(G[1, 1]) == pytest.approx(math.cosh(th), rel=1e-12)
        assert abs(G[0, 1]) == pytest.approx(math.sinh(th) / math.sqrt(2.0), rel=1e-12)
        assert abs(G[1, 0]) == pytest.approx(math.sqrt(2.0) * math.sinh(th), rel=1e-12)

    def test_validity_gate(self):
        with pytest.raises(ClosedFormValidityError):
            propagator_closed_form(channel(ANTI_STOKES, g=1.0, Gamma=1.0, gamma=0.3), 1.0)

    def test_matches_expm_over_random_draws(self):
        for p in random_channels(250, seed=7):
            eta = 2.0 / max(p.coupling, p.acoustic_dissipation)
            Gc = propagator_closed_form(p, eta).entries
            Gn = expm(drift_matrix(p) * eta)
            scale = max(np.max(np.abs(Gn)), 1e-300)
            assert np.max(np.abs(Gc - Gn)) / scale < 1e-9

    def test_effective_coupling_branch(self):
        for p in random_channels(100, seed=11):
            assert EffectiveParams.from_channel(p).g_e.real >= 0.0

    def test_degenerate_effective_coupling(self):
        # g_e = 0 exactly: g = Gamma / (2 sqrt(2)) on resonance, lossless channel
        Gamma = 1.0
        p = channel(ANTI_STOKES, g=Gamma / (2.0 * math.sqrt(2.0)), Gamma=Gamma)
        eta = 3.0
        assert_allclose(
            propagator_closed_form(p, eta).entries,
            expm(drift_matrix(p) * eta),
            rtol=1e-9,
            atol=1e-12,
        )


class TestTimeOrdered:
    def test_single_segment_matches_numeric(self):
        p = channel(ANTI_STOKES, g=2.0, Gamma=0.7, detuning=1.1)
        env = PumpEnvelope.rectangular(2.0, 1.5)
        Gt = propagator_time_ordered(env, p, 1.2).entries
        Gn = propagator_numeric(drift_matrix(p.with_coupling(2.0)), 1.2).entries
        assert_allclose(Gt, Gn, rtol=1e-12, atol=1e-14)

    def test_semigroup_split(self):
        p = channel(STOKES, g=1.7, Gamma=0.4, detuning=-0.8)
        whole = PumpEnvelope.rectangular(1.7, 2.0)
        halves = PumpEnvelope(((1.0, 1.7), (1.0, 1.7)))
        G1 = propagator_time_ordered(whole, p, 2.0).entries
        G2 = propagator_time_ordered(halves, p, 2.0).entries
        assert_allclose(G1, G2, rtol=1e-12)

    def test_order_matters_for_unequal_couplings(self):
        p = channel(ANTI_STOKES, g=0.0, Gamma=1.0, detuning=2.0)
        ab = PumpEnvelope(((0.7, 1.0), (0.5, 3.0)))
        ba = PumpEnvelope(((0.5, 3.0), (0.7, 1.0)))
        Gab = propagator_time_ordered(ab, p, 1.2).entries
        Gba = propagator_time_ordered(ba, p, 1.2).entries
        # direct matrix-product oracle
        Pa = drift_matrix(p.with_coupling(1.0))
        Pb = drift_matrix(p.with_coupling(3.0))
        assert_allclose(Gab, expm(Pb * 0.5) @ expm(Pa * 0.7), rtol=1e-12)
        assert_allclose(Gba, expm(Pa * 0.7) @ expm(Pb * 0.5), rtol=1e-12)
        assert np.max(np.abs(Gab - Gba)) > 1e-3

    def test_zero_padding_past_support(self):
        p = channel(ANTI_STOKES, g=0.0, Gamma=2.0)
        env = PumpEnvelope.rectangular(1.0, 0.5)
        G = propagator_time_ordered(env, p, 1.5).entries
        tail = expm(drift_matrix(p.with_coupling(0.0)) * 1.0)
        pulse = expm(drift_matrix(p.with_coupling(1.0)) * 0.5)
        assert_allclose(G, tail @ pulse, rtol=1e-12)


class TestConservationLaws:
    TILDE = np.diag([math.sqrt(2.0), 1.0])

    def tilde(self, G):
        return self.TILDE @ G @ np.linalg.inv(self.TILDE)

    def test_anti_stokes_lossless_unitary(self):
        for p in random_channels(150, seed=3, gamma_frac=(0.0, 0.0), processes=(ANTI_STOKES,)):
            p = channel(ANTI_STOKES, g=p.coupling, Gamma=0.0, detuning=p.detuning)
            Gt = self.tilde(propagator_closed_form(p, 1.3 / p.coupling).entries)
            assert np.max(np.abs(Gt.conj().T @ Gt - np.eye(2))) < 1e-10

    def test_stokes_lossless_symplectic(self):
        for p in random_channels(150, seed=4, processes=(STOKES,)):
            p = channel(STOKES, g=p.coupling, Gamma=0.0, detuning=p.detuning)
            Gt = self.tilde(propagator_closed_form(p, 1.3 / p.coupling).entries)
            J = np.diag([1.0, -1.0])
            scale = max(1.0, np.max(np.abs(Gt)) ** 2)
            assert np.max(np.abs(Gt @ J @ Gt.conj().T - J)) / scale < 1e-10
            assert abs(abs(Gt[0, 0]) ** 2 - abs(Gt[0, 1]) ** 2 - 1.0) / scale < 1e-10

    def test_commutator_preservation_with_noise(self):
        # G C G^+ + s * Gamma * int G diag(0,1) G^+ = C  (gamma = 0)
        env_cache = {}
        for p in random_channels(40, seed=5, gamma_frac=(0.0, 0.0)):
            eta = 1.5 / max(p.coupling, p.acoustic_dissipation)
            env = PumpEnvelope.rectangular(p.coupling, 2 * eta)
            C = commutator_matrix(p.process)
            s = 1.0 if p.process == ANTI_STOKES else -1.0
            G = propagator_closed_form(p, eta).entries
            M = G @ C @ G.conj().T + s * noise_moment_integral(p, env, eta, d_b=1.0)
            scale = max(1.0, np.max(np.abs(G)) ** 2)
            assert np.max(np.abs(M - C)) / scale < 1e-7

    def test_phase_covariance_even_in_delta(self):
        rng = np.random.default_rng(12)
        for _ in range(30):
            g, Gamma, det = rng.uniform(0.5, 5), 1.0, rng.uniform(0.1, 10)
            eta = rng.uniform(0.1, 2.0)
            for proc in (STOKES, ANTI_STOKES):
                Gp = propagator_closed_form(channel(proc, g, Gamma, 0.0, det), eta).entries
                Gm = propagator_closed_form(channel(proc, g, Gamma, 0.0, -det), eta).entries
                assert_allclose(np.abs(Gp), np.abs(Gm), rtol=1e-11, atol=1e-14)

    def test_decoupled_phase_factors(self):
        # g = 0: diagonal phases e^{-i c_g D eta / 2} and e^{-i c_g D eta}
        det, eta = 3.0, 0.7
        G = propagator_closed_form(channel(ANTI_STOKES, 0.0, 1.0, 0.0, det), eta).entries
        assert G[0, 0] == pytest.approx(np.exp(-0.5j * det * eta), rel=1e-12)
        assert G[1, 1] == pytest.approx(np.exp(-(1j * det + 0.5) * eta), rel=1e-12)


class TestNoiseIntegral:
    def test_matches_van_loan_constant_pump(self):
        for p in random_channels(30, seed=21):
            eta = 1.2 / max(p.coupling, p.acoustic_dissipation)
            env = PumpEnvelope.rectangular(p.coupling, 2 * eta)
            ours = noise_moment_integral(p, env, eta, d_b=1.7)
            D = np.diag([0.0, 1.7]).astype(complex)
            ref = p.acoustic_dissipation * van_loan_noise_integral(
                drift_matrix(p), D, eta
            )
            assert_allclose(ours, ref, rtol=1e-6, atol=1e-12 * max(1, np.max(np.abs(ref))))

    def test_matches_van_loan_piecewise_pump(self):
        p = channel(STOKES, g=0.0, Gamma=1.0, gamma=0.05, detuning=2.0)
        segments = ((0.4, 2.0), (0.3, 0.5), (0.6, 1.2))
        env = PumpEnvelope(segments)
        eta = 1.1
        ours = noise_moment_integral(p, env, eta, d_b=2.5)
        D = np.diag([0.0, 2.5]).astype(complex)
        ref = p.acoustic_dissipation * piecewise_van_loan_noise(
            lambda g: drift_matrix(p.with_coupling(g)), segments, eta, D
        )
        assert_allclose(ours, ref, rtol=1e-6)

    def test_adaptive_simpson_on_known_integral(self):
        val = adaptive_simpson(lambda x: np.array([math.sin(x), x**3]), 0.0, 2.0, rtol=1e-10)
        assert val[0] == pytest.approx(1.0 - math.cos(2.0), rel=1e-9)
        assert val[1] == pytest.approx(4.0, rel=1e-9)


class TestChannelMoments:
    def test_thermal_fixed_point_both_bases(self):
        # g = 0: <b^+ b>(eta) = n0 e^{-Gamma eta} + n_th (1 - e^{-Gamma eta})
        n0, nth, Gamma, eta = 0.4, 2.0, 1.3, 0.9
        expected = n0 * math.exp(-Gamma * eta) + nth * (1.0 - math.exp(-Gamma * eta))
        for proc in (STOKES, ANTI_STOKES):
            p = channel(proc, g=0.0, Gamma=Gamma, detuning=0.7)
            env = PumpEnvelope.rectangular(0.0, 2 * eta)
            m0 = ChannelMoments.initial(proc, n_0=n0)
            m = evolve_moments(m0, p, env, nth, eta)
            assert m.phonon_occupancy() == pytest.approx(expected, rel=1e-8)

    def test_anti_stokes_coherent_readout_mean(self):
        # <a>(eta) = G12 * beta0 from an initial coherent phonon
        beta0 = 1.3 - 0.4j
        p = channel(ANTI_STOKES, g=2.0, Gamma=0.3, detuning=1.0)
        env = PumpEnvelope.rectangular(2.0, 3.0)
        m0 = ChannelMoments.initial(ANTI_STOKES, coherent_phonon=beta0)
        eta = 0.8
        m = evolve_moments(m0, p, env, 0.0, eta)
        G = propagator_closed_form(p, eta).entries
        assert m.mean[0] == pytest.approx(G[0, 1] * beta0, rel=1e-10)

    def test_stokes_vacuum_photon_growth(self):
        # lossless: <a^+ a> = sinh^2(g eta / sqrt 2) / 2
        g, eta = 1.4, 1.1
        p = channel(STOKES, g=g)
        env = PumpEnvelope.rectangular(g, 2.0)
        m = evolve_moments(ChannelMoments.initial(STOKES), p, env, 0.0, eta)
        assert m.photon_occupancy() == pytest.approx(
            math.sinh(g * eta / math.sqrt(2.0)) ** 2 / 2.0, rel=1e-9
        )

    @pytest.mark.parametrize("proc", [STOKES, ANTI_STOKES])
    def test_second_moments_against_covariance_ode(self, proc):
        g, Gamma, gamma, det = 1.8, 1.0, 0.08, 2.5
        n0, nth, eta = 0.7, 1.9, 0.9
        p = channel(proc, g=g, Gamma=Gamma, gamma=gamma, detuning=det)
        env = PumpEnvelope.rectangular(g, 2.0)
        m = evolve_moments(ChannelMoments.initial(proc, n_0=n0), p, env, nth, eta)
        D = Gamma * noise_diffusion(proc, nth)
        ref, anomalous = covariance_ode_oracle(
            drift_matrix(p), D, ChannelMoments.initial(proc, n_0=n0).corr, eta
        )
        assert_allclose(m.corr, ref, rtol=1e-7, atol=1e-9)
        # the (a, b)-type anomalous moments <v_i v_j> stay zero in these bases
        assert np.max(np.abs(anomalous)) < 1e-8

    def test_corr_stays_hermitian_psd(self):
        p = channel(STOKES, g=2.2, Gamma=1.0, gamma=0.05, detuning=-3.0)
        env = PumpEnvelope.rectangular(2.2, 2.0)
        m = evolve_moments(ChannelMoments.initial(STOKES, n_0=0.3), p, env, 1.1, 1.4)
        assert_allclose(m.corr, m.corr.conj().T, atol=1e-10 * np.max(np.abs(m.corr)))
        eigs = np.linalg.eigvalsh(m.corr)
        assert eigs.min() > -1e-10 * eigs.max()

    def test_process_mismatch_rejected(self):
        p = channel(STOKES, g=1.0)
        env = PumpEnvelope.rectangular(1.0, 1.0)
        with pytest.raises(ValueError):
            evolve_moments(ChannelMoments.initial(ANTI_STOKES), p, env, 0.0, 0.5)


class TestPropagator2Type:
    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            Propagator2(entries=np.array([[np.inf, 0], [0, 1]]), eta=0.0, provenance="numeric_expm")

    def test_rejects_bad_shape(self):
        with pytest.raises(ValueError):
            Propagator2(entries=np.eye(3), eta=0.0, provenance="numeric_expm")

    def test_entries_read_only(self):
        G = propagator_numeric(np.zeros((2, 2)), 0.0)
        with pytest.raises(ValueError):
            G.entries[0, 0] = 5.0


class TestSemigroup:
    def test_constant_pump_semigroup(self):
        for p in random_channels(40, seed=9):
            e1 = 0.6 / max(p.coupling, p.acoustic_dissipation)
            e2 = 1.1 / max(p.coupling, p.acoustic_dissipation)
            G1 = propagator_closed_form(p, e1).entries
            G2 = propagator_closed_form(p, e2).entries
            G12 = propagator_closed_form(p, e1 + e2).entries
            scale = max(np.max(np.abs(G12)), 1.0)
            assert np.max(np.abs(G2 @ G1 - G12)) / scale < 1e-12

    def test_two_time_propagator_consistency(self):
        p = channel(ANTI_STOKES, g=0.0, Gamma=0.8, detuning=1.0)
        env = PumpEnvelope(((0.5, 2.0), (0.8, 0.7)))
        full = propagator_between(env, p, 0.0, 1.1)
        first = propagator_between(env, p, 0.0, 0.4)
        second = propagator_between(env, p, 0.4, 1.1)
        assert_allclose(second @ first, full, rtol=1e-12)
