"""Random inputs shared by the property and acceptance tests."""

import numpy as np

from skewwalk.pathops import DeletionSchedule, Path


def random_pl_path(rng, horizon, pieces=None, scale=1.0):
    """Continuous piecewise-linear path with random breakpoints on [0, horizon]."""
    k = int(rng.integers(1, 40)) if pieces is None else pieces
    inner = np.sort(rng.uniform(0, horizon, k - 1))
    times = np.unique(np.concatenate(([0.0], inner, [horizon])))
    steps = rng.normal(scale=scale * np.sqrt(np.diff(times)))
    return Path(times, np.concatenate(([rng.normal()], steps)).cumsum())


def random_schedule(rng, span, budget, max_intervals=4):
    """Disjoint deleted intervals inside [0, span] of total length <= budget."""
    k = int(rng.integers(0, max_intervals + 1))
    if k == 0:
        return DeletionSchedule.empty()
    lengths = rng.dirichlet(np.ones(k)) * budget * rng.uniform(0.05, 1.0)
    gaps = rng.dirichlet(np.ones(k + 1)) * (span - lengths.sum())
    gaps[1:-1] = np.maximum(gaps[1:-1], 1e-9)
    tau, sigma = [], []
    t = 0.0
    for g, ell in zip(gaps[:-1], lengths):
        t += g
        tau.append(t)
        t += max(ell, 1e-9)
        sigma.append(t)
    return DeletionSchedule(tau, sigma)


def random_lemma_case(rng):
    """(path, schedule, delta, T) meeting the deleted-length hypothesis."""
    T = float(rng.uniform(0.2, 3.0))
    horizon = T + 1 + float(rng.uniform(0.0, 1.0))
    delta = float(rng.uniform(0.01, 1.0))
    path = random_pl_path(rng, horizon)
    span = T + 1 if rng.random() < 0.8 else horizon
    schedule = random_schedule(rng, span, delta)
    return path, schedule, delta, T
