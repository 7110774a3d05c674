"""Shared helpers for the statistical test suite."""

import math

import numpy as np


def binom_sigma(p: float, m: int) -> float:
    return math.sqrt(p * (1.0 - p) / m)


def assert_within_3sigma(observed: float, expected: float, p: float, m: int, label: str = ""):
    """Binomial 3-sigma band around the expected rate; p is the success
    probability governing the variance (usually the expected rate itself,
    but ratio estimators pass their own)."""
    tol = 3.0 * binom_sigma(p, m)
    assert abs(observed - expected) <= tol, (
        f"{label}: observed {observed:.5f} vs expected {expected:.5f} "
        f"(tolerance {tol:.5f}, m={m})"
    )


def rng_with(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)
