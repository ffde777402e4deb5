"""
Reproducible families of membrane specs for property and acceptance runs.

``generator_suite`` draws each membrane row with support ``{-1, +1}`` plus
up to three further offsets from ``[-6, 6]``.  Masses are
``0.8 * Dirichlet(2) + 0.1`` on each unit step, so every state can cross
in both directions.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .membrane import JumpPmf, MembraneSpec

SUITE_SEED = 20261015
SUITE_SIZE = 60
MAX_JUMP = 6
_EXTRA = tuple(o for o in range(-MAX_JUMP, MAX_JUMP + 1) if o not in (-1, 1))


def random_spec(rng: np.random.Generator, m: int) -> MembraneSpec:
    rows = {}
    for i in range(-m, m + 1):
        k = int(rng.integers(0, 4))
        offs = [-1, 1] + [int(o) for o in rng.choice(_EXTRA, size=k, replace=False)]
        w = 0.8 * rng.dirichlet(2.0 * np.ones(len(offs)))
        w[0] += 0.1
        w[1] += 0.1
        rows[i] = JumpPmf(tuple(offs), tuple(float(x) for x in w))
    return MembraneSpec(m, rows)


def generator_suite(size: int = SUITE_SIZE, seed: int = SUITE_SEED, max_m: int = 3) -> list[MembraneSpec]:
    """``size`` specs with ``m = k mod (max_m + 1)`` for the k-th draw."""
    rng = np.random.default_rng(seed)
    return [random_spec(rng, k % (max_m + 1)) for k in range(size)]


def rational_spec(spec: MembraneSpec, denominator: int = 1000) -> MembraneSpec:
    """Round every mass to a fraction with the given denominator, keeping rows normalized."""
    rows = {}
    for i, law in spec.rows.items():
        q = [Fraction(round(float(w) * denominator), denominator) for w in law.masses]
        q[0] += 1 - sum(q)
        rows[i] = JumpPmf(law.offsets, tuple(q))
    return MembraneSpec(spec.m, rows)


def asymmetric_m1_spec() -> MembraneSpec:
    """Fair at +-1, upward-biased lazy row at 0; gamma = 1/2."""
    half = Fraction(1, 2)
    return MembraneSpec(1, {
        -1: JumpPmf((-1, 1), (half, half)),
        0: JumpPmf((-1, 0, 1), (Fraction(1, 5), Fraction(1, 5), Fraction(3, 5))),
        1: JumpPmf((-1, 1), (half, half)),
    })
