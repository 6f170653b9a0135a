import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvclone.errors import InvalidArgument
from cvclone.gaussian import (
    GaussianState,
    apply,
    beam_splitter,
    coherent,
    epr_state,
    reduce_to,
    tensor,
    two_mode_squeeze,
    vacuum,
)
from cvclone.measurement import (
    DetectorModel,
    FeedforwardGains,
    Quadrature,
    amplifier_stage,
    condition,
    feedforward_amplifier,
    feedforward_conditioning,
    feedforward_unconditional,
    homodyne,
    ideal_g1,
    joint_pc_measurement,
)


def test_detector_validation():
    with pytest.raises(InvalidArgument):
        DetectorModel(0.0)
    with pytest.raises(InvalidArgument):
        DetectorModel(1.2)
    with pytest.raises(InvalidArgument):
        DetectorModel(0.9, -0.1)


class TestHomodyne:
    def test_vacuum_shot_noise(self, rng):
        values = [homodyne(vacuum(1), 0, "x", rng=rng)[0].value for _ in range(4000)]
        assert np.var(values) == pytest.approx(1.0, abs=5 * np.sqrt(2 / 4000))

    def test_coherent_mean(self, rng):
        cond = condition(coherent([1.0]), [Quadrature.X.row(0)])
        y = cond.sample(rng, 100_000)
        assert y.mean() == pytest.approx(2.0, abs=5 / np.sqrt(100_000))

    def test_single_shot_outcome_type(self, rng):
        out, post = homodyne(tensor(coherent([1.0]), vacuum(1)), 0, Quadrature.P, rng=rng)
        assert out.quadrature is Quadrature.P and out.mode == 0
        assert post.n_modes == 1

    def test_measuring_the_only_mode(self, rng):
        assert homodyne(vacuum(1), 0, "p", rng=rng)[1] is None

    def test_invalid_mode(self, rng):
        with pytest.raises(InvalidArgument):
            homodyne(vacuum(1), 3, "x", rng=rng)

    def test_epr_conditioning_matches_schur_complement(self, rng):
        r = 1.0
        s = epr_state(r)
        # closed form of V22 - V21 V11^-1 V12 restricted to x
        ch, sh = np.cosh(2 * r), np.sinh(2 * r)
        expected_var_x2 = ch - sh**2 / ch
        _, post = homodyne(s, 0, "x", rng=rng)
        assert post.var_x(0) == pytest.approx(expected_var_x2, abs=1e-12)
        assert post.var_x(0) < 1.0
        assert post.var_p(0) == pytest.approx(ch, abs=1e-12)

    def test_conditional_mean_follows_outcome(self):
        s = epr_state(1.0)
        cond = condition(s, [0])
        ch, sh = np.cosh(2.0), np.sinh(2.0)
        np.testing.assert_allclose(cond.conditional_mean([1.5]), [1.5 * sh / ch, 0.0])

    def test_singular_measurement_uses_pinv(self):
        # infinitely squeezed x on a measured mode gives a near-singular outcome variance
        V = np.diag([1e-14, 1e14, 1.0, 1.0])
        cond = condition(GaussianState(np.zeros(4), V), [0])
        assert np.all(np.isfinite(cond.gain))

    @pytest.mark.parametrize("eta", [1.0, 0.7, 0.3, 1e-9])
    def test_efficiency_weakens_conditioning(self, eta):
        s = epr_state(1.0)
        cond = condition(s, [0], DetectorModel(eta))
        ch, sh = np.cosh(2.0), np.sinh(2.0)
        expected = ch - eta * sh**2 / (eta * ch + 1 - eta)
        assert cond.rest_cov[0, 0] == pytest.approx(expected, rel=1e-12)

    def test_efficiency_monotone_and_vanishing(self):
        s = epr_state(0.8)
        vals = [condition(s, [0], DetectorModel(e)).rest_cov[0, 0] for e in (1.0, 0.8, 0.5, 0.2, 1e-12)]
        assert all(a < b for a, b in zip(vals, vals[1:]))
        assert vals[-1] == pytest.approx(s.var_x(1), rel=1e-9)

    def test_electronic_noise_adds_outcome_variance(self):
        cond = condition(vacuum(2), [0], DetectorModel(0.9, 0.05))
        assert cond.outcome_cov[0, 0] == pytest.approx(0.9 + 0.1 + 0.05)


class TestJointMeasurement:
    def test_phase_conjugate_signals_both_survive(self):
        a = 0.8 + 0.6j
        s = tensor(coherent([a, a.conjugate()]), vacuum(1))
        mixed = apply(beam_splitter(0.5, (0, 1)), s)
        cond = condition(mixed, [0, 3])
        x_sum, minus_p_diff = cond.outcome_mean
        assert x_sum == pytest.approx(2 * 2 * a.real / np.sqrt(2))
        assert -minus_p_diff == pytest.approx(2 * 2 * a.imag / np.sqrt(2))

    def test_identical_inputs_extinguish_phase(self, rng):
        a = 0.8 + 0.6j
        pd = [joint_pc_measurement(coherent([a, a]), 0, 1, rng=rng)[1] for _ in range(1500)]
        assert np.mean(pd) == pytest.approx(0.0, abs=5 / np.sqrt(1500))

    def test_vacuum_statistics(self, rng):
        samples = np.array([joint_pc_measurement(vacuum(2), 0, 1, rng=rng)[:2] for _ in range(4000)])
        tol = 5 * np.sqrt(2 / 4000)
        assert samples[:, 0].var() == pytest.approx(1.0, abs=tol)
        assert samples[:, 1].var() == pytest.approx(1.0, abs=tol)

    def test_mode_collision(self, rng):
        with pytest.raises(InvalidArgument):
            joint_pc_measurement(vacuum(2), 1, 1, rng=rng)

    def test_exchange_symmetry(self):
        # swapping the inputs leaves x_sum and flips p_diff
        s = tensor(coherent([0.3 + 0.7j, -0.2 + 0.1j]), vacuum(1))
        swapped = reduce_to(s, [1, 0, 2])
        c1 = condition(apply(beam_splitter(0.5, (0, 1)), s), [0, 3])
        c2 = condition(apply(beam_splitter(0.5, (0, 1)), swapped), [0, 3])
        flip = np.diag([1.0, -1.0])
        np.testing.assert_allclose(c2.outcome_mean, flip @ c1.outcome_mean, atol=1e-14)
        np.testing.assert_allclose(c2.outcome_cov, flip @ c1.outcome_cov @ flip, atol=1e-14)


class TestFeedforward:
    def test_ideal_g1_values(self):
        assert ideal_g1(1.0) == 0.0
        assert ideal_g1(8 / 9) == pytest.approx(0.5, abs=1e-15)
        assert ideal_g1(3 / 4) == pytest.approx(np.sqrt(2 / 3), abs=1e-15)
        assert ideal_g1(3 / 4) == pytest.approx(0.8165, abs=5e-5)
        with pytest.raises(InvalidArgument):
            ideal_g1(0.0)

    @staticmethod
    def _inputs(alpha=0j):
        return tensor(coherent([alpha, np.conj(alpha)]), vacuum(1))

    def test_unit_transmission_is_identity(self):
        a = 0.4 - 0.3j
        out = feedforward_amplifier(self._inputs(a), 0, 1, 2, 1.0)
        assert out.allclose(coherent([a]), atol=1e-12)

    @pytest.mark.parametrize("T", [0.5, 0.75, 8 / 9])
    def test_input_output_relation(self, T):
        out = feedforward_amplifier(self._inputs(), 0, 1, 2, T)
        # x_out = x_c1/sqrt(T) + sqrt((1-T)/T) x_c2 with vacuum inputs
        expected = 1 / T + (1 - T) / T
        assert out.var_x(0) == pytest.approx(expected, abs=1e-12)
        assert out.var_p(0) == pytest.approx(expected, abs=1e-12)

    def test_half_transmission_variance(self):
        assert feedforward_amplifier(self._inputs(), 0, 1, 2, 0.5).var_x(0) == pytest.approx(3.0)

    def test_mean_gain(self):
        T = 3 / 4
        a = 1.0 + 0.5j
        out = feedforward_amplifier(self._inputs(a), 0, 1, 2, T)
        gain = (1 + np.sqrt(1 - T)) / np.sqrt(T)
        assert gain == pytest.approx(np.sqrt(3))
        np.testing.assert_allclose(out.mean, gain * np.array([2 * a.real, 2 * a.imag]))

    def test_pure_state_output(self):
        # ideal loop with vacuum ancilla keeps the output valid
        out = feedforward_amplifier(self._inputs(0.2j), 0, 1, 2, 0.6)
        assert np.all(out.symplectic_eigenvalues() >= 1 - 1e-9)

    def test_monte_carlo_matches_unconditional(self, rng):
        T = 0.75
        det = DetectorModel(0.93, 0.01)
        stage = amplifier_stage(self._inputs(0.5 + 0.5j), 0, 1, 2, T, FeedforwardGains(0.7))
        exact = feedforward_unconditional(stage, det)
        cond, disp = feedforward_conditioning(stage, det)
        shots = 200_000
        y = cond.sample(rng, shots)
        means = cond.conditional_mean(y) + y @ disp.T
        samples = means + rng.multivariate_normal(np.zeros(2), cond.rest_cov, size=shots)
        for q in range(2):
            v = exact.cov[q, q]
            se = v * np.sqrt(2 / (shots - 1))
            assert abs(samples[:, q].var(ddof=1) - v) < 5 * se
            assert abs(samples[:, q].mean() - exact.mean[q]) < 5 * np.sqrt(v / shots)

    def test_single_shot_path(self, rng):
        s = self._inputs(1.0)
        shots = [feedforward_amplifier(s, 0, 1, 2, 0.75, rng=rng).mean[0] for _ in range(1500)]
        exact = feedforward_amplifier(s, 0, 1, 2, 0.75)
        assert np.mean(shots) == pytest.approx(exact.mean[0], abs=5 * np.sqrt(exact.var_x(0) / 1500))


@settings(max_examples=40, deadline=None)
@given(
    st.floats(0.05, 1.0),
    st.floats(0.0, 1.5),
    st.floats(0.0, 2.0),
    st.floats(0.01, 1.0),
)
def test_conditioning_keeps_states_valid(T, r, g, eta):
    s = tensor(coherent([0.3, 0.3]), vacuum(2))
    s = apply(two_mode_squeeze(r, (2, 3)), s)
    stage = amplifier_stage(s, 0, 1, 2, T, FeedforwardGains(g, 1.0, -1.0), anticlone=3)
    cond, _ = feedforward_conditioning(stage, DetectorModel(eta))
    post = GaussianState(cond.rest_mean, cond.rest_cov)
    assert np.linalg.eigvalsh(post.cov).min() > 0
    if eta == 1.0:
        np.testing.assert_allclose(post.symplectic_eigenvalues(), 1.0, atol=1e-9)
