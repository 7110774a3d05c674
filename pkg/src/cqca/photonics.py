"""Amplitude-exact model of a single photon in a two-arm interferometer.

The source splits each photon into a superposition of arm B (reflected
branch, toward Bob) and arm C (transmitted branch, toward Charlie).  An
optional eavesdropper probe pair extends each branch into a four-dimensional
product space spanned by {|y,y>, |y,yp>, |yp,y>, |yp,yp>}, where |y> is a
probe's ready state and |yp> the state orthogonal to it.

Probabilities are bookkept on the amplitudes themselves: a negative
absorption test zeroes the tested arm *without* renormalizing, so squared
norms shrink monotonically, and every later sampling step conditions on the
surviving total norm.  This reproduces the exact per-round outcome law
(dark port strictly empty on double reflection, absorption at exactly one
detector when both parties absorb) rather than an approximation of it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

INV_SQRT2 = 1.0 / math.sqrt(2.0)

#: Probe space sizes: a bare photon carries a trivial one-dimensional probe
#: factor; an attached probe pair expands it to the 2x2 product space.
PROBE_DIM_OFF = 1
PROBE_DIM_ON = 4
PROBE_LABELS = ("y,y", "y,yp", "yp,y", "yp,yp")

_NORM_EPS = 1e-12


class Arm(Enum):
    """Interferometer arm: B runs to Bob's station, C to Charlie's."""

    B = "B"
    C = "C"


class Action(Enum):
    """Per-round station operation: Faraday reflect (F) or absorb (A)."""

    F = "F"
    A = "A"


class Outcome(Enum):
    """Detector tags.  D1/D2 are the source's interferometer ports, DB/DC
    the stations' photon-number-resolving detectors, NULL means no click."""

    D1 = "1"
    D2 = "2"
    DB = "B"
    DC = "C"
    NULL = "N"


@dataclass(frozen=True, slots=True)
class JointState:
    """Pure state of (photon arm occupancy) x (optional probe pair).

    ``amp_b`` / ``amp_c`` hold the complex amplitudes of the photon-in-B and
    photon-in-C branches over the probe basis (length 1 without a probe,
    4 with one attached).
    """

    amp_b: tuple[complex, ...]
    amp_c: tuple[complex, ...]

    @property
    def probe_dim(self) -> int:
        return len(self.amp_b)

    def arm_amplitudes(self, arm: Arm) -> tuple[complex, ...]:
        return self.amp_b if arm is Arm.B else self.amp_c

    def norm2(self) -> float:
        return _norm2(self.amp_b) + _norm2(self.amp_c)

    def validate(self) -> None:
        """Assert representation invariants (used by tests, not hot paths)."""
        if len(self.amp_b) != len(self.amp_c):
            raise ValueError("branch probe dimensions differ")
        if self.probe_dim not in (PROBE_DIM_OFF, PROBE_DIM_ON):
            raise ValueError(f"unsupported probe dimension {self.probe_dim}")
        total = self.norm2()
        if not math.isfinite(total) or total > 1.0 + 1e-12:
            raise ValueError(f"state norm {total} outside [0, 1]")


@dataclass(frozen=True, slots=True)
class DetectionSample:
    """One sampled read-out of the source's detector pair.

    ``click_count`` includes injected dark clicks; two clicks in one round
    flag a multiple-count candidate.
    """

    outcome: Outcome
    click_count: int


@dataclass(frozen=True, slots=True)
class EveProbePair:
    """Probe pair state conditioned on the public announcement of a round.

    ``collapsed_state`` is the (possibly unnormalized) probe vector left
    after the photon outcome collapsed the branch structure.
    """

    theta: float
    collapsed_state: tuple[complex, ...]


def _norm2(amp: tuple[complex, ...]) -> float:
    total = 0.0
    for z in amp:
        total += z.real * z.real + z.imag * z.imag
    return total


def emit() -> JointState:
    """Fresh photon behind the source beam splitter.

    The transmitted (Charlie) branch carries amplitude 1/sqrt(2), the
    reflected (Bob) branch i/sqrt(2); no probe attached.
    """
    return JointState(amp_b=(1j * INV_SQRT2,), amp_c=(INV_SQRT2 + 0j,))


def probe_branch_vectors(theta: float) -> tuple[tuple[complex, ...], tuple[complex, ...]]:
    """Probe pair vectors riding on each branch after an onward-leg probe.

    The photon-in-B branch carries |y,n> and the photon-in-C branch |n,y>,
    with |n> = cos(theta)|y> + sin(theta)|yp>, expanded in the product basis
    {|y,y>, |y,yp>, |yp,y>, |yp,yp>}.  Their overlap is cos(theta)^2.
    """
    c = complex(math.cos(theta))
    s = complex(math.sin(theta))
    return (c, s, 0j, 0j), (c, 0j, s, 0j)


def attach_eve_probe(state: JointState, theta: float) -> JointState:
    """Entangle a fresh probe pair with the two arms (number preserving).

    Requires a freshly emitted state (trivial probe factor) and a coupling
    angle in [0, pi/2].  The total norm is unchanged.
    """
    if not 0.0 <= theta <= math.pi / 2:
        raise ValueError(f"probe angle {theta} outside [0, pi/2]")
    if state.probe_dim != PROBE_DIM_OFF:
        raise ValueError("probe already attached to this state")
    vec_b, vec_c = probe_branch_vectors(theta)
    b = state.amp_b[0]
    c = state.amp_c[0]
    return JointState(
        amp_b=tuple(b * x for x in vec_b),
        amp_c=tuple(c * x for x in vec_c),
    )


def apply_party_action(
    state: JointState, arm: Arm, action: Action, rng: np.random.Generator
) -> tuple[JointState, bool]:
    """Apply a station's per-round operation to its arm.

    F reflects without adding a phase, returning the state untouched.  A
    tests for the photon: the absorption probability is the arm's share of
    the surviving norm, so a second absorber facing the only remaining
    branch fires with certainty.  On a click the other branch is projected
    away and the absorbed arm keeps its (unnormalized) probe amplitudes as
    the collapsed record; on a negative test the tested arm is zeroed
    without renormalizing.
    """
    if action is Action.F:
        return state, False
    total = state.norm2()
    p_absorb = 0.0
    if total > _NORM_EPS:
        p_absorb = min(1.0, _norm2(state.arm_amplitudes(arm)) / total)
    zeros = (0j,) * state.probe_dim
    absorbed = rng.random() < p_absorb
    if arm is Arm.B:
        kept = JointState(state.amp_b, zeros) if absorbed else JointState(zeros, state.amp_c)
    else:
        kept = JointState(zeros, state.amp_c) if absorbed else JointState(state.amp_b, zeros)
    return kept, absorbed


def recombine_at_bs(state: JointState) -> tuple[tuple[complex, ...], tuple[complex, ...]]:
    """Mix the returning arms on the source beam splitter.

    amp_d1 = (amp_b - i amp_c)/sqrt(2), amp_d2 = (amp_b + i amp_c)/sqrt(2);
    the total squared norm is preserved.  With the emission phases above the
    honest double-reflection round leaves port D1 strictly dark.
    """
    amp_d1 = tuple((b - 1j * c) * INV_SQRT2 for b, c in zip(state.amp_b, state.amp_c))
    amp_d2 = tuple((b + 1j * c) * INV_SQRT2 for b, c in zip(state.amp_b, state.amp_c))
    return amp_d1, amp_d2


def sample_detection(
    amp_d1: tuple[complex, ...],
    amp_d2: tuple[complex, ...],
    loss_rate: float,
    dark_rate: float,
    rng: np.random.Generator,
) -> DetectionSample:
    """Sample which of the source's detectors fires this round.

    The real click lands on D1 or D2 with the ports' share of the surviving
    norm, thinned once by the aggregate channel loss; NULL otherwise.  Dark
    counts then fire each idle detector independently.  The reported outcome
    is the real click when there is one, else a dark click; two clicks flag
    a multiple-count candidate via ``click_count``.
    """
    n1 = _norm2(amp_d1)
    n2 = _norm2(amp_d2)
    total = n1 + n2
    real = Outcome.NULL
    if total > _NORM_EPS:
        keep = 1.0 - loss_rate
        u = rng.random()
        if u < keep * n1 / total:
            real = Outcome.D1
        elif u < keep * (n1 + n2) / total:
            real = Outcome.D2
    clicked = [real] if real is not Outcome.NULL else []
    if dark_rate > 0.0:
        for detector in (Outcome.D1, Outcome.D2):
            if detector is not real and rng.random() < dark_rate:
                clicked.append(detector)
    if real is not Outcome.NULL:
        outcome = real
    elif len(clicked) == 1:
        outcome = clicked[0]
    elif len(clicked) == 2:
        outcome = clicked[0] if rng.random() < 0.5 else clicked[1]
    else:
        outcome = Outcome.NULL
    return DetectionSample(outcome=outcome, click_count=len(clicked))


def helstrom_success_probability(theta: float) -> float:
    """Success probability of the minimum-error two-state discrimination.

    The two equiprobable probe states |y,n> and |n,y> overlap by
    cos(theta)^2, giving (1 + sqrt(1 - cos(theta)^4)) / 2.
    """
    overlap = math.cos(theta) ** 2
    return 0.5 * (1.0 + math.sqrt(max(0.0, 1.0 - overlap * overlap)))


@lru_cache(maxsize=64)
def _helstrom_positive_projector(theta: float) -> np.ndarray:
    """Projector onto the positive eigenspace of (P_bit1 - P_bit0).

    bit 1 corresponds to the photon-in-B probe |y,n>, bit 0 to |n,y>.
    Probability mass in the null eigenspace is split evenly by the caller.
    """
    vec_b, vec_c = probe_branch_vectors(theta)
    v1 = np.asarray(vec_b, dtype=complex)
    v0 = np.asarray(vec_c, dtype=complex)
    gamma = np.outer(v1, v1.conj()) - np.outer(v0, v0.conj())
    vals, vecs = np.linalg.eigh(gamma)
    positive = vecs[:, vals > 1e-12]
    null = vecs[:, np.abs(vals) <= 1e-12]
    return positive @ positive.conj().T + 0.5 * (null @ null.conj().T)


def helstrom_guess(probe: EveProbePair, rng: np.random.Generator) -> int:
    """Measure a collapsed probe pair with the minimum-error measurement.

    Returns the guessed secret bit.  For a probe conditioned on an
    anti-correlated D1 round the success probability equals
    ``helstrom_success_probability(theta)``.
    """
    psi = np.asarray(probe.collapsed_state, dtype=complex)
    norm = np.linalg.norm(psi)
    if norm <= _NORM_EPS:
        raise ValueError("collapsed probe state is null")
    psi = psi / norm
    effect = _helstrom_positive_projector(probe.theta)
    p_one = float(np.real(psi.conj() @ effect @ psi))
    return 1 if rng.random() < min(1.0, max(0.0, p_one)) else 0
