"""Figure-of-merit estimators, channel-rate estimates with their
enumeration oracles, and the abort policy."""

import itertools
import math

import pytest

from conftest import binom_sigma

from cqca.analysis import error_rate_theory, visibility_theory
from cqca.channel import AttackConfig, ChannelConfig
from cqca.metrics import (
    InsufficientSample,
    MeritReport,
    TolerancePolicy,
    abort_decision,
    compute_merit_report,
    estimate_bias,
    estimate_coincidence_rate,
    estimate_error_rate,
    estimate_multi_and_loss_rates,
    estimate_visibility,
    expected_multi_rate,
    report_csv_row,
    report_text_block,
)
from cqca.parties import RoundRecord, run_rounds
from cqca.photonics import Action, Outcome


def _record(sb, sc, outcome, click_b=False, click_c=False, multi=False, rid=0):
    return RoundRecord(rid, sb, sc, outcome, click_b, click_c, multi)


class TestEstimators:
    def test_coincidence_rate_counts_double_clicks(self):
        sample = [
            _record(Action.A, Action.A, Outcome.NULL, click_b=True, click_c=True),
            _record(Action.A, Action.A, Outcome.NULL, click_b=True),
            _record(Action.F, Action.F, Outcome.D2),
        ]
        assert estimate_coincidence_rate(sample) == 0.5

    def test_coincidence_rate_needs_aa_rounds(self):
        with pytest.raises(InsufficientSample):
            estimate_coincidence_rate([_record(Action.F, Action.F, Outcome.D2)])

    def test_visibility_contrast(self):
        sample = (
            [_record(Action.F, Action.F, Outcome.D2)] * 3
            + [_record(Action.F, Action.F, Outcome.D1)]
            + [_record(Action.F, Action.F, Outcome.NULL)]  # no click: excluded
        )
        assert estimate_visibility(sample) == pytest.approx(0.5)

    def test_visibility_needs_ff_clicks(self):
        with pytest.raises(InsufficientSample):
            estimate_visibility([_record(Action.F, Action.F, Outcome.NULL)])

    def test_bias_is_max_over_cells(self):
        sample = (
            [_record(Action.A, Action.F, Outcome.D1)] * 3
            + [_record(Action.A, Action.F, Outcome.D2)]
            + [_record(Action.F, Action.A, Outcome.D1)]
            + [_record(Action.F, Action.A, Outcome.D2)]
        )
        # AF cell: |3 - 1| / 4 = 0.5; FA cell: 0
        assert estimate_bias(sample) == pytest.approx(0.5)

    def test_bias_needs_anticorrelated_rounds(self):
        with pytest.raises(InsufficientSample):
            estimate_bias([_record(Action.F, Action.F, Outcome.D2)])

    def test_error_rate_conditions_on_d1(self):
        sample = [
            _record(Action.F, Action.F, Outcome.D1),
            _record(Action.A, Action.F, Outcome.D1),
            _record(Action.F, Action.A, Outcome.D1),
            _record(Action.A, Action.A, Outcome.D1),
            _record(Action.F, Action.F, Outcome.D2),  # not D1: ignored
        ]
        assert estimate_error_rate(sample) == pytest.approx(0.5)

    def test_error_rate_needs_d1_rounds(self):
        with pytest.raises(InsufficientSample):
            estimate_error_rate([_record(Action.F, Action.F, Outcome.D2)])

    def test_multi_and_loss_on_synthetic_stream(self):
        rounds = (
            [_record(Action.F, Action.F, Outcome.D2, multi=True)]
            + [_record(Action.F, Action.F, Outcome.D2)]
            + [_record(Action.A, Action.A, Outcome.NULL, click_b=True)] * 2
        )
        multi, loss = estimate_multi_and_loss_rates(rounds, 4)
        assert multi == 0.25
        assert loss == 0.0  # null fraction 1/2 is the honest baseline

    def test_loss_estimate_inverts_null_law(self):
        nulls = [_record(Action.A, Action.A, Outcome.NULL)] * 55
        clicks = [_record(Action.F, Action.F, Outcome.D2)] * 45
        _, loss = estimate_multi_and_loss_rates(nulls + clicks, 100)
        assert loss == pytest.approx(0.1, abs=1e-12)


class TestChannelRateEstimates:
    def test_loss_rate_recovered_from_simulation(self):
        n = 30_000
        loss = 0.08
        result = run_rounds(n, channel_cfg=ChannelConfig(loss_rate=loss), seed=201)
        report = compute_merit_report(result.rounds, result.rounds, n)
        sigma = 2.0 * binom_sigma((1 + loss) / 2, n)
        assert abs(report.loss_rate - loss) <= 3 * sigma

    def test_multi_rate_matches_dark_model(self):
        n = 30_000
        dark = 0.01
        result = run_rounds(n, channel_cfg=ChannelConfig(dark_rate=dark), seed=202)
        report = compute_merit_report(result.rounds, result.rounds, n)
        expected = expected_multi_rate(dark)
        sigma = binom_sigma(expected, n)
        assert abs(report.multi_rate - expected) <= 3 * sigma

    def test_expected_multi_rate_against_enumeration_oracle(self):
        # enumerate the honest click layout exactly: one real click placed
        # per the outcome law, then every other active detector dark-fires
        # independently
        dark = 0.03

        def cell_multi(active_free: int, real_clicks: int, weight: float) -> float:
            total = 0.0
            for fires in itertools.product((0, 1), repeat=active_free):
                prob = 1.0
                for f in fires:
                    prob *= dark if f else (1.0 - dark)
                if real_clicks + sum(fires) >= 2:
                    total += prob
            return weight * total

        # (F,F): real D2 click, D1 free             -> 1 free detector
        # (A,F)/(F,A): absorbed half: station click, D1+D2 free;
        #              surviving half: source click, other port + station free
        # (A,A): one station click, other station + both ports free
        oracle = (
            cell_multi(1, 1, 0.25)
            + 2 * (cell_multi(2, 1, 0.125) + cell_multi(2, 1, 0.125))
            + cell_multi(3, 1, 0.25)
        )
        assert expected_multi_rate(dark) == pytest.approx(oracle, abs=1e-12)

    def test_coincidence_floor_under_dark_counts(self):
        n = 40_000
        dark = 0.02
        result = run_rounds(n, channel_cfg=ChannelConfig(dark_rate=dark), seed=203)
        report = compute_merit_report(result.rounds, result.rounds, n)
        m_aa = report.counts["aa"]
        assert abs(report.coincidence_rate - dark) <= 3 * binom_sigma(dark, m_aa)


def _theory_report(theta: float, n: int = 100_000) -> MeritReport:
    quarter = n // 4
    return MeritReport(
        n=n,
        coincidence_rate=0.0,
        visibility=visibility_theory(theta),
        bias=0.0,
        error_rate=error_rate_theory(theta),
        multi_rate=0.0,
        loss_rate=0.0,
        counts={"aa": quarter, "af": quarter, "fa": quarter, "ff_clicks": quarter, "d1": n // 8},
    )


class TestAbortDecision:
    def test_honest_simulation_passes(self):
        n = 20_000
        result = run_rounds(n, seed=204)
        report = compute_merit_report(result.rounds, result.rounds, n)
        verdict = abort_decision(report, TolerancePolicy())
        assert verdict.key_produced, verdict.abort_reasons

    def test_weak_probe_passes_with_shortened_key(self):
        # error rate 0.038 and visibility 0.96 stay under the security
        # ceiling, so the run passes and privacy amplification absorbs the leak
        verdict = abort_decision(_theory_report(0.2), TolerancePolicy())
        assert verdict.key_produced

    def test_strong_probe_aborts_on_error_rate(self):
        verdict = abort_decision(_theory_report(0.6), TolerancePolicy())
        assert not verdict.key_produced
        assert "errorRate" in verdict.abort_reasons
        assert "visibility" in verdict.abort_reasons

    def test_abort_monotone_in_probe_strength(self):
        policy = TolerancePolicy()
        grid = [i * math.pi / 40 for i in range(1, 20)]
        aborted = [not abort_decision(_theory_report(t), policy).key_produced for t in grid]
        first_abort = aborted.index(True)
        assert all(aborted[first_abort:])

    def test_coincidence_gate(self):
        report = MeritReport(
            n=10_000,
            coincidence_rate=0.3,
            visibility=1.0,
            bias=0.0,
            error_rate=0.0,
            multi_rate=0.0,
            loss_rate=0.0,
            counts={"aa": 2500, "af": 2500, "fa": 2500, "d1": 1250},
        )
        verdict = abort_decision(report, TolerancePolicy())
        assert verdict.abort_reasons == ("coincidence",)

    def test_unexpected_loss_gate(self):
        report = MeritReport(
            n=10_000,
            coincidence_rate=0.0,
            visibility=1.0,
            bias=0.0,
            error_rate=0.0,
            multi_rate=0.0,
            loss_rate=0.2,
            counts={"aa": 2500, "af": 2500, "fa": 2500, "d1": 1250},
        )
        assert abort_decision(report, TolerancePolicy()).abort_reasons == ("lossRate",)
        tolerant = TolerancePolicy(expected_loss=0.2)
        assert abort_decision(report, tolerant).key_produced


class TestReportSerialization:
    def test_csv_row_shape(self):
        report = _theory_report(0.0, n=1000)
        verdict = abort_decision(report, TolerancePolicy())
        row = report_csv_row(report, verdict)
        fields = row.split(",")
        assert fields[0] == "1000"
        assert fields[-1] == "pass"
        assert len(fields) == 8

    def test_csv_row_abort_reasons_joined(self):
        report = _theory_report(0.6)
        verdict = abort_decision(report, TolerancePolicy())
        assert report_csv_row(report, verdict).endswith("abort:visibility+errorRate")

    def test_text_block_mentions_every_figure(self):
        report = _theory_report(0.0, n=1000)
        verdict = abort_decision(report, TolerancePolicy())
        block = report_text_block(report, verdict, expected={"visibility": 1.0})
        for token in ("kappa", "visibility", "bias", "errorRate", "r =", "lambda", "verdict"):
            assert token in block
        assert "(expected 1.000000)" in block
