"""Amplitude-model tests: emission, probe attachment, collapse, the beam
splitter, detection sampling, and the probe discrimination measurement."""

import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import assert_within_3sigma, rng_with

from cqca.photonics import (
    Action,
    Arm,
    EveProbePair,
    JointState,
    Outcome,
    apply_party_action,
    attach_eve_probe,
    emit,
    helstrom_guess,
    helstrom_success_probability,
    probe_branch_vectors,
    recombine_at_bs,
    sample_detection,
)


def _norm2(amp):
    return sum(abs(z) ** 2 for z in amp)


def _inner(u, v):
    return sum(a.conjugate() * b for a, b in zip(u, v))


class TestEmit:
    def test_equal_superposition(self):
        state = emit()
        assert _norm2(state.amp_b) == pytest.approx(0.5, abs=1e-15)
        assert _norm2(state.amp_c) == pytest.approx(0.5, abs=1e-15)

    def test_reflected_arm_carries_phase_i(self):
        state = emit()
        ratio = state.amp_b[0] / state.amp_c[0]
        assert cmath.isclose(ratio, 1j, abs_tol=1e-15)

    def test_unit_norm_and_trivial_probe(self):
        state = emit()
        assert state.norm2() == pytest.approx(1.0, abs=1e-15)
        assert state.probe_dim == 1
        state.validate()


class TestProbeAttachment:
    def test_theta_zero_probes_identical(self):
        state = attach_eve_probe(emit(), 0.0)
        assert state.probe_dim == 4
        # both branches ride on |y,y>; the stats cannot differ from no attack
        assert state.amp_b[1] == 0 and state.amp_b[2] == 0 and state.amp_b[3] == 0
        assert state.amp_c[1] == 0 and state.amp_c[2] == 0 and state.amp_c[3] == 0

    def test_theta_pi_half_probes_orthogonal(self):
        vec_b, vec_c = probe_branch_vectors(math.pi / 2)
        assert abs(_inner(vec_b, vec_c)) < 1e-15
        assert vec_b[1] == pytest.approx(1.0)  # |y,yp>
        assert vec_c[2] == pytest.approx(1.0)  # |yp,y>

    def test_overlap_is_cos_squared(self):
        rng = rng_with(11)
        for theta in rng.uniform(0.0, math.pi / 2, size=100):
            vec_b, vec_c = probe_branch_vectors(theta)
            overlap = _inner(vec_b, vec_c)
            assert abs(overlap - math.cos(theta) ** 2) < 1e-12

    def test_overlap_at_pi_quarter(self):
        vec_b, vec_c = probe_branch_vectors(math.pi / 4)
        assert _inner(vec_b, vec_c).real == pytest.approx(0.5, abs=1e-12)

    def test_norm_preserved(self):
        state = attach_eve_probe(emit(), 0.7)
        assert state.norm2() == pytest.approx(1.0, abs=1e-12)

    def test_rejects_out_of_range_theta(self):
        with pytest.raises(ValueError):
            attach_eve_probe(emit(), -0.1)
        with pytest.raises(ValueError):
            attach_eve_probe(emit(), math.pi / 2 + 0.1)

    def test_rejects_double_attachment(self):
        state = attach_eve_probe(emit(), 0.4)
        with pytest.raises(ValueError):
            attach_eve_probe(state, 0.4)


class TestPartyAction:
    def test_reflect_is_identity(self):
        rng = rng_with(0)
        state = attach_eve_probe(emit(), 0.3)
        after, absorbed = apply_party_action(state, Arm.B, Action.F, rng)
        assert not absorbed
        assert after == state

    def test_absorption_probability_half_on_fresh_state(self):
        rng = rng_with(5)
        n = 20_000
        absorbed = sum(
            apply_party_action(emit(), Arm.B, Action.A, rng)[1] for _ in range(n)
        )
        assert_within_3sigma(absorbed / n, 0.5, 0.5, n, "P(absorb)")

    def test_negative_test_zeroes_arm_without_renormalizing(self):
        rng = rng_with(1)
        for _ in range(50):
            state, absorbed = apply_party_action(emit(), Arm.B, Action.A, rng)
            if not absorbed:
                assert all(z == 0 for z in state.amp_b)
                assert state.norm2() == pytest.approx(0.5, abs=1e-12)

    def test_both_absorbers_fire_exactly_once(self):
        rng = rng_with(9)
        for _ in range(5_000):
            state = emit()
            state, absorbed_b = apply_party_action(state, Arm.B, Action.A, rng)
            state, absorbed_c = apply_party_action(state, Arm.C, Action.A, rng)
            assert absorbed_b != absorbed_c  # one and only one detector clicks

    def test_absorption_order_is_observationally_irrelevant(self):
        n = 20_000
        counts = {}
        for label, order in (("bc", (Arm.B, Arm.C)), ("cb", (Arm.C, Arm.B))):
            rng = rng_with(33)
            hits_b = 0
            for _ in range(n):
                state = emit()
                absorbed = {}
                for arm in order:
                    state, absorbed[arm] = apply_party_action(state, arm, Action.A, rng)
                assert absorbed[Arm.B] != absorbed[Arm.C]
                hits_b += absorbed[Arm.B]
            counts[label] = hits_b / n
        assert_within_3sigma(counts["bc"], 0.5, 0.5, n, "P(DB), B first")
        assert_within_3sigma(counts["cb"], 0.5, 0.5, n, "P(DB), C first")


def _random_state(rng) -> JointState:
    dim = 1 if rng.random() < 0.5 else 4
    raw_b = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    raw_c = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    scale = math.sqrt(_norm2(raw_b) + _norm2(raw_c)) / math.sqrt(rng.uniform(0.1, 1.0))
    return JointState(
        amp_b=tuple(complex(z / scale) for z in raw_b),
        amp_c=tuple(complex(z / scale) for z in raw_c),
    )


class TestRecombination:
    def test_norm_conservation_over_random_states(self):
        rng = rng_with(21)
        for _ in range(10_000):
            state = _random_state(rng)
            amp_d1, amp_d2 = recombine_at_bs(state)
            assert abs(_norm2(amp_d1) + _norm2(amp_d2) - state.norm2()) < 1e-12

    def test_honest_double_reflection_dark_port_exact(self):
        amp_d1, amp_d2 = recombine_at_bs(emit())
        # counterfactual phase check: exact zero, not merely small
        assert _norm2(amp_d1) == 0.0
        assert _norm2(amp_d2) == pytest.approx(1.0, abs=1e-12)

    def test_single_arm_splits_evenly(self):
        # Bob absorbed nothing on his A test, Charlie reflected
        state = JointState(amp_b=(0j,), amp_c=(complex(1 / math.sqrt(2)),))
        amp_d1, amp_d2 = recombine_at_bs(state)
        assert _norm2(amp_d1) == pytest.approx(0.25, abs=1e-12)
        assert _norm2(amp_d2) == pytest.approx(0.25, abs=1e-12)

    def test_probed_double_reflection_at_pi_half(self):
        state = attach_eve_probe(emit(), math.pi / 2)
        amp_d1, amp_d2 = recombine_at_bs(state)
        assert _norm2(amp_d1) == pytest.approx(0.5, abs=1e-12)
        assert _norm2(amp_d2) == pytest.approx(0.5, abs=1e-12)

    def test_probed_dark_port_follows_half_sin_squared(self):
        for theta in (0.2, 0.7, 1.1):
            state = attach_eve_probe(emit(), theta)
            amp_d1, _ = recombine_at_bs(state)
            assert _norm2(amp_d1) == pytest.approx(0.5 * math.sin(theta) ** 2, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(
    st.integers(min_value=0, max_value=1),
    st.lists(st.complex_numbers(max_magnitude=1.0, allow_nan=False, allow_infinity=False), min_size=8, max_size=8),
)
def test_recombination_conserves_norm_property(dim_choice, raw):
    dim = (1, 4)[dim_choice]
    amp_b = tuple(raw[:dim])
    amp_c = tuple(raw[4 : 4 + dim])
    total = _norm2(amp_b) + _norm2(amp_c)
    if total > 1.0:
        scale = math.sqrt(total)
        amp_b = tuple(z / scale for z in amp_b)
        amp_c = tuple(z / scale for z in amp_c)
    state = JointState(amp_b=amp_b, amp_c=amp_c)
    amp_d1, amp_d2 = recombine_at_bs(state)
    assert abs(_norm2(amp_d1) + _norm2(amp_d2) - state.norm2()) < 1e-12


class TestDetectionSampling:
    def test_certain_event(self):
        rng = rng_with(2)
        for _ in range(100):
            sample = sample_detection((0j,), (1 + 0j,), 0.0, 0.0, rng)
            assert sample.outcome is Outcome.D2
            assert sample.click_count == 1

    def test_loss_thins_detections(self):
        rng = rng_with(3)
        n = 20_000
        nulls = 0
        for _ in range(n):
            amp_d1, amp_d2 = recombine_at_bs(emit())
            if sample_detection(amp_d1, amp_d2, 0.1, 0.0, rng).outcome is Outcome.NULL:
                nulls += 1
        assert_within_3sigma(nulls / n, 0.1, 0.1, n, "NULL under loss")

    def test_full_round_one_absorber_gives_quarter_d1(self):
        rng = rng_with(4)
        n = 20_000
        d1 = 0
        for _ in range(n):
            state = emit()
            state, absorbed = apply_party_action(state, Arm.B, Action.A, rng)
            if absorbed:
                continue
            amp_d1, amp_d2 = recombine_at_bs(state)
            if sample_detection(amp_d1, amp_d2, 0.0, 0.0, rng).outcome is Outcome.D1:
                d1 += 1
        assert_within_3sigma(d1 / n, 0.25, 0.25, n, "P(D1|AF)")

    def test_dark_counts_fire_idle_detectors(self):
        rng = rng_with(6)
        n = 20_000
        dark = 0.05
        clicks = 0
        for _ in range(n):
            sample = sample_detection((0j,), (0j,), 0.0, dark, rng)
            if sample.click_count:
                assert sample.outcome is not Outcome.NULL
            clicks += 1 if sample.click_count else 0
        expected = 1.0 - (1.0 - dark) ** 2
        assert_within_3sigma(clicks / n, expected, expected, n, "dark click rate")

    def test_double_click_flags_multiple_count(self):
        rng = rng_with(7)
        seen_double = False
        for _ in range(5_000):
            sample = sample_detection((0j,), (1 + 0j,), 0.0, 0.2, rng)
            if sample.click_count == 2:
                seen_double = True
        assert seen_double


class TestHelstrom:
    def test_closed_form_matches_trace_norm_oracle(self):
        # independent oracle: optimal success is 1/2 + |P1 - P0|_1 / 4
        for theta in np.linspace(0.0, math.pi / 2, 25):
            vec_b, vec_c = probe_branch_vectors(theta)
            v1 = np.asarray(vec_b)
            v0 = np.asarray(vec_c)
            gamma = np.outer(v1, v1.conj()) - np.outer(v0, v0.conj())
            trace_norm = float(np.abs(np.linalg.eigvalsh(gamma)).sum())
            assert helstrom_success_probability(theta) == pytest.approx(
                0.5 + trace_norm / 4.0, abs=1e-12
            )

    def test_value_at_pi_quarter(self):
        assert helstrom_success_probability(math.pi / 4) == pytest.approx(
            0.9330127018922193, abs=1e-12
        )

    def test_guess_success_rates(self):
        rng = rng_with(8)
        for theta, n in ((0.0, 4_000), (0.4, 4_000), (math.pi / 4, 4_000)):
            vec_b, vec_c = probe_branch_vectors(theta)
            correct = 0
            for i in range(n):
                bit = i % 2
                collapsed = vec_b if bit == 1 else vec_c
                probe = EveProbePair(theta=theta, collapsed_state=collapsed)
                correct += helstrom_guess(probe, rng) == bit
            expected = helstrom_success_probability(theta)
            assert_within_3sigma(correct / n, expected, max(expected, 0.5), n, f"theta={theta}")

    def test_orthogonal_probes_always_distinguished(self):
        rng = rng_with(10)
        theta = math.pi / 2
        vec_b, vec_c = probe_branch_vectors(theta)
        for bit, collapsed in ((1, vec_b), (0, vec_c)):
            for _ in range(200):
                assert helstrom_guess(EveProbePair(theta, collapsed), rng) == bit

    def test_random_measurements_never_beat_helstrom(self):
        rng = rng_with(12)
        theta = 0.6
        vec_b, vec_c = probe_branch_vectors(theta)
        v1 = np.asarray(vec_b)
        v0 = np.asarray(vec_c)
        best = 0.0
        for _ in range(200):
            random_matrix = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
            basis, _ = np.linalg.qr(random_matrix)
            for split in range(1, 4):
                projector = basis[:, :split] @ basis[:, :split].conj().T
                p1 = float(np.real(v1.conj() @ projector @ v1))
                p0 = 1.0 - float(np.real(v0.conj() @ projector @ v0))
                best = max(best, 0.5 * (p1 + p0))
        assert best <= helstrom_success_probability(theta) + 1e-9

    def test_rejects_null_probe(self):
        rng = rng_with(13)
        with pytest.raises(ValueError):
            helstrom_guess(EveProbePair(0.3, (0j, 0j, 0j, 0j)), rng)
