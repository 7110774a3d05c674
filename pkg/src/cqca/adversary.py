"""Adversary models and their information extraction.

Two adversaries are simulated.  A semihonest source operator can replace a
round's split photon with bare probe photons: down one arm (learning that
station's setting from the return, then faking her public announcement) or
down both arms (learning both settings, then mimicking the honest outcome
law; the double clicks she causes when both stations absorb are what the
coincidence check looks for).  An eavesdropper entangles a probe pair with
the arms on the onward leg and measures it after the announcements with the
minimum-error (Helstrom) measurement, whose extracted information the
closed-form Holevo bound must dominate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .channel import FakeStrategy
from .photonics import Action, EveProbePair, Outcome, helstrom_guess


class ProbeResult(Enum):
    RETURNED = "returned"
    NOT_RETURNED = "not-returned"
    NOT_APPLICABLE = "n/a"


@dataclass(frozen=True, slots=True)
class AliceAttackState:
    """What the semihonest source learned and announced on one round."""

    attacked_round: bool
    probe_result: ProbeResult
    fake_announcement: Outcome


@dataclass(frozen=True, slots=True)
class EveRecord:
    """Eavesdropper's per-round book-keeping: her measured guess and, where
    one is defined, the bit the stations actually shared."""

    round_id: int
    guess: int | None
    true_bit: int | None


def fake_announcement(strategy: FakeStrategy, rng: np.random.Generator) -> Outcome:
    """Announcement the single-path attacker fabricates once her photon
    returned.  RANDOM_QUARTER reproduces the honest conditional law (D1 with
    probability 1/4, D2 with 3/4); ALWAYS_D2 suppresses D1 at the price of a
    detectable announcement bias."""
    if strategy is FakeStrategy.ALWAYS_D2:
        return Outcome.D2
    return Outcome.D1 if rng.random() < 0.25 else Outcome.D2


def alice_single_path(
    strategy: FakeStrategy, returned: bool, rng: np.random.Generator
) -> tuple[Outcome, AliceAttackState]:
    """One single-path attacked round, given whether the probe photon came
    back (it returns exactly when the probed station reflected).

    A non-returned photon was registered by the probed station, so the only
    announcement consistent with a later disclosure is NULL and no key bit
    arises.  The attacker learns the probed station's setting either way but
    stays ignorant of the other station's coin.
    """
    if not returned:
        state = AliceAttackState(True, ProbeResult.NOT_RETURNED, Outcome.NULL)
        return Outcome.NULL, state
    announced = fake_announcement(strategy, rng)
    return announced, AliceAttackState(True, ProbeResult.RETURNED, announced)


def honest_outcome_sample(
    setting_b: Action, setting_c: Action, rng: np.random.Generator
) -> Outcome:
    """Sample an announcement from the honest per-cell outcome law.

    Double reflection gives D2 with certainty, double absorption NULL, and
    anti-correlated settings D1 or D2 with probability 1/4 each (NULL
    otherwise).  Used by the double-path attacker to mimic an honest source
    once she has inferred both settings.
    """
    if setting_b is Action.F and setting_c is Action.F:
        return Outcome.D2
    if setting_b is Action.A and setting_c is Action.A:
        return Outcome.NULL
    u = rng.random()
    if u < 0.25:
        return Outcome.D1
    if u < 0.5:
        return Outcome.D2
    return Outcome.NULL


def alice_double_path(
    setting_b: Action, setting_c: Action, rng: np.random.Generator
) -> tuple[Outcome, tuple[Action, Action]]:
    """One double-path attacked round: bare photons down both arms.

    The return pattern reveals both settings deterministically, so the
    attacker knows every would-be key bit; she then announces an outcome
    drawn from the honest law for the inferred settings.  Rounds where both
    stations absorbed leave clicks at both station detectors, which is the
    signature the coincidence check measures.
    """
    inferred = (setting_b, setting_c)
    return honest_outcome_sample(setting_b, setting_c, rng), inferred


def eve_extract_bit(
    probe: EveProbePair, announced: Outcome, rng: np.random.Generator
) -> int:
    """Measure the probe pair after the public announcement.

    Only D1 rounds generate key material, so measuring on anything else is
    a caller bug.
    """
    if announced is not Outcome.D1:
        raise ValueError("probe measurement is only defined after a D1 announcement")
    return helstrom_guess(probe, rng)


def empirical_mutual_information(records: list[EveRecord]) -> tuple[float, float, int]:
    """Plug-in mutual information between the shared bit and the guess.

    Uses the records where both are defined.  Returns (mi, sigma, count)
    where sigma is a delta-method standard error of the binary-symmetric
    estimate, floored at 1/count so boundary cases keep a usable tolerance.
    """
    pairs = [(r.true_bit, r.guess) for r in records if r.true_bit is not None and r.guess is not None]
    m = len(pairs)
    if m == 0:
        return 0.0, float("inf"), 0
    counts = np.zeros((2, 2))
    for bit, guess in pairs:
        counts[bit, guess] += 1
    joint = counts / m
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    mi = 0.0
    for i in range(2):
        for j in range(2):
            if joint[i, j] > 0.0:
                mi += joint[i, j] * math.log2(joint[i, j] / (px[i] * py[j]))
    mismatch = float(counts[0, 1] + counts[1, 0]) / m
    q = min(max(mismatch, 0.5 / m), 1.0 - 0.5 / m)
    slope = abs(math.log2((1.0 - q) / q))
    sigma = max(slope * math.sqrt(q * (1.0 - q) / m), 1.0 / m)
    return mi, sigma, m
