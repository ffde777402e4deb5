"""
Statistical checks of the scaling limit.

Empirical CDFs and Kolmogorov-Smirnov distances, the half-normal law of
zero-visit counts, and Monte Carlo experiments that compare rescaled
membrane walks with skew Brownian motion.  Every experiment draws path
``k`` from ``path_rng(seed, k)``, so results are bitwise reproducible for
any thread count.

Experiments report a statistic next to a threshold; deciding what counts
as acceptable is left to the caller.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import erf

from .membrane import (
    MembraneSpec,
    SpecError,
    exit_laws,
    simulate_walks,
    sojourn_law,
    validate,
)
from .pathops import _band_time
from .skewbm import SkewBmParams, skew_cdf
from .skewness import gamma_exact

KS_LEVEL_COEF = 1.63  # asymptotic 1% critical value of sqrt(N) * D_N


@dataclass(frozen=True, eq=False)
class EmpiricalSample:
    """A sorted multiset of real observations."""

    values: np.ndarray

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float).ravel())
        if v.size == 0:
            raise ValueError("empirical sample must hold at least one value")
        object.__setattr__(self, "values", v)

    @property
    def size(self):
        return int(self.values.size)

    def ecdf(self, x):
        """Fraction of observations <= x."""
        return np.searchsorted(self.values, x, side="right") / self.size

    def quantile(self, q):
        return float(np.quantile(self.values, q))

    def fraction_above(self, level=0.0):
        return float(np.count_nonzero(self.values > level)) / self.size


def ks_distance(sample, cdf) -> float:
    """sup_x |ECDF(x) - cdf(x)| for a continuous ``cdf``.

    Both one-sided envelopes are evaluated at the order statistics; ties
    are handled because the ECDF jumps only at the last copy of a value.
    """
    if not isinstance(sample, EmpiricalSample):
        sample = EmpiricalSample(sample)
    x = sample.values
    n = x.size
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - F)
    d_minus = np.max(F - (i - 1) / n)
    return float(max(d_plus, d_minus, 0.0))


def half_normal_cdf(x):
    """P(|Z| <= x) = erf(x / sqrt 2) for x >= 0."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("half-normal CDF is defined on x >= 0")
    out = erf(arr / math.sqrt(2.0))
    return out if out.ndim else float(out)


HALF_NORMAL_MEDIAN = math.sqrt(2.0) * 0.4769362762044699  # sqrt(2) erfinv(1/2)


def ks_threshold(N: int, n: int | None = None, coef: float = KS_LEVEL_COEF) -> float:
    """``coef/sqrt(N)``, plus ``1/sqrt(n)`` for samples on a lattice of pitch 1/sqrt(n)."""
    out = coef / math.sqrt(N)
    if n is not None:
        out += 1.0 / math.sqrt(n)
    return out


@dataclass
class ExperimentRecord:
    """One experiment: parameters, statistic, threshold and verdict."""

    experiment: str
    params: dict
    statistic: float
    threshold: float | None
    extras: dict = field(default_factory=dict)

    @property
    def verdict(self):
        if self.threshold is None:
            return "INFO"
        return "PASS" if self.statistic <= self.threshold else "FAIL"

    def to_dict(self):
        d = asdict(self)
        d["verdict"] = self.verdict
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, default=_jsonable)


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


def write_records(records: Sequence[ExperimentRecord], fh):
    """One JSON object per line."""
    for r in records:
        fh.write(r.to_json() + "\n")


def write_records_csv(records: Sequence[ExperimentRecord], fh):
    """Flat CSV; params and extras become ``params.*`` and ``extras.*`` columns."""
    rows = []
    for r in records:
        row = {"experiment": r.experiment, "statistic": r.statistic,
               "threshold": r.threshold, "verdict": r.verdict}
        row.update({f"params.{k}": v for k, v in r.params.items()})
        row.update({f"extras.{k}": v for k, v in r.extras.items()})
        rows.append(row)
    cols = []
    for row in rows:
        cols.extend(c for c in row if c not in cols)
    w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: _csv_cell(v) for k, v in row.items()})


def _csv_cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return " ".join(map(str, v))
    return v


def _require_valid(spec: MembraneSpec):
    report = validate(spec)
    if not report.ok:
        raise SpecError(report.errors)


def spec_gamma(spec: MembraneSpec) -> float:
    """Skewness of the limit; raises DegenerateModelError if it is undefined."""
    xi_plus, xi_minus = exit_laws(spec)
    return float(gamma_exact(xi_plus, xi_minus))


@dataclass
class MarginalResult:
    sample: EmpiricalSample
    ks: float
    threshold: float
    gamma: float
    frac_positive: float
    record: ExperimentRecord


def marginal_panel(spec: MembraneSpec, n: int, N: int, times: Sequence[float], seed: int,
                   threshold: float | None = None, threads: int = 1) -> list[MarginalResult]:
    """Compare X_n(t) with the skew-BM marginal at each t, from one batch of paths."""
    _require_valid(spec)
    gamma = spec_gamma(spec)
    params = SkewBmParams(gamma)
    times = [float(t) for t in times]
    if not times or min(times) <= 0:
        raise ValueError("evaluation times must be positive")
    steps = int(math.ceil(n * max(times) - 1e-9))
    thr = ks_threshold(N, n) if threshold is None else float(threshold)

    def reducer(block):
        return np.stack([_scaled(block, n, t) for t in times], axis=1)

    vals = simulate_walks(spec, steps, N, seed=seed, reducer=reducer, threads=threads)
    out = []
    for j, t in enumerate(times):
        sample = EmpiricalSample(vals[:, j])
        ks = ks_distance(sample, lambda y, t=t: skew_cdf(params, t, 0.0, y))
        pos = sample.fraction_above(0.0)
        rec = ExperimentRecord(
            "marginal",
            {"m": spec.m, "n": n, "paths": N, "t": t, "seed": seed},
            ks, thr,
            {"gamma": gamma, "frac_positive": pos,
             "frac_positive_limit": float(1.0 - skew_cdf(params, t, 0.0, 0.0))},
        )
        out.append(MarginalResult(sample, ks, thr, gamma, pos, rec))
    return out


def _scaled(block, n, t):
    s = n * t
    k = int(math.floor(s + 1e-9))
    frac = s - k
    v = block[:, k].astype(float)
    if frac > 1e-9:
        v = v + frac * (block[:, k + 1] - block[:, k])
    return v / math.sqrt(n)


def marginal_experiment(spec: MembraneSpec, n: int, N: int, t: float = 1.0, seed: int = 0,
                        threshold: float | None = None, threads: int = 1) -> MarginalResult:
    """KS distance between N simulated values of X_n(t) and the skew-BM marginal.

    The limit uses gamma from the exit laws of ``spec``.  The default
    threshold is ``ks_threshold(N, n)``.
    """
    return marginal_panel(spec, n, N, [t], seed, threshold, threads)[0]


@dataclass
class ZeroVisitResult:
    sample: EmpiricalSample
    ks: float
    threshold: float
    median: float
    record: ExperimentRecord


def zero_visit_experiment(n: int, N: int, seed: int = 0, threshold: float | None = None,
                          threads: int = 1) -> ZeroVisitResult:
    """KS distance of r(n)/sqrt(n) from the half-normal law.

    r(n) counts the times ``0 <= k <= n`` at which a fair unit walk from 0
    sits at 0.
    """
    if n <= 0 or N <= 0:
        raise ValueError("n and N must be positive")
    thr = ks_threshold(N, n) if threshold is None else float(threshold)

    def reducer(block):
        return np.count_nonzero(block == 0, axis=1)

    r = simulate_walks(MembraneSpec.fair(0), n, N, seed=seed, reducer=reducer, threads=threads)
    sample = EmpiricalSample(r / math.sqrt(n))
    ks = ks_distance(sample, half_normal_cdf)
    med = sample.quantile(0.5)
    rec = ExperimentRecord("zero_visits", {"n": n, "paths": N, "seed": seed}, ks, thr,
                           {"median": med, "median_limit": HALF_NORMAL_MEDIAN,
                            "mean_visits": float(np.mean(r))})
    return ZeroVisitResult(sample, ks, thr, med, rec)


@dataclass
class OccupationResult:
    alphas: tuple
    mean_occupation: np.ndarray
    band_time: float
    band_time_max: float
    mean_entrances: float
    mean_sojourn: float
    sojourn_bound: float
    records: list


def occupation_experiment(spec: MembraneSpec, n: int, N: int, alphas: Sequence[float],
                          T: float = 1.0, seed: int = 0, threads: int = 1,
                          chunk_size: int = 256) -> OccupationResult:
    """Mean of the time spent by X_n in [-alpha, alpha] over [0, T].

    Occupation is exact for the piecewise-linear interpolation.  Also
    returned: the membrane-band time (alpha = m/sqrt(n)), the mean number
    of entrances into the membrane and the bound
    ``mean sojourn * mean entrances / n`` on the band time.
    """
    alphas = tuple(float(a) for a in alphas)
    if any(a <= 0 for a in alphas):
        raise ValueError("alphas must be positive")
    if any(b >= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("alphas must be strictly decreasing")
    if T <= 0:
        raise ValueError("T must be positive")
    _require_valid(spec)
    steps = int(math.ceil(n * T - 1e-9))
    times = np.arange(steps + 1) / n
    times[-1] = T
    band = spec.m / math.sqrt(n)
    levels = alphas + (band,)
    m = spec.m

    def reducer(block):
        v = block / math.sqrt(n)
        cols = [_band_time(times, v, -a, a).sum(axis=1) for a in levels]
        inside = np.abs(block[:, :steps]) <= m
        entr = inside[:, 0].astype(np.int64) + np.count_nonzero(inside[:, 1:] & ~inside[:, :-1], axis=1)
        cols.append(entr.astype(float))
        return np.stack(cols, axis=1)

    res = simulate_walks(spec, steps, N, seed=seed, reducer=reducer, threads=threads,
                         chunk_size=chunk_size)
    means = res[:, : len(alphas)].mean(axis=0)
    band_vals = res[:, len(alphas)]
    entrances = float(res[:, -1].mean())
    sojourn = 0.5 * (sojourn_law(spec, 1).mean + sojourn_law(spec, -1).mean)
    bound = sojourn * entrances / n
    base = {"m": spec.m, "n": n, "paths": N, "T": T, "seed": seed}
    records = [ExperimentRecord("occupation", {**base, "alpha": a}, float(mu), None)
               for a, mu in zip(alphas, means)]
    records.append(ExperimentRecord(
        "membrane_band", {**base, "alpha": band}, float(band_vals.mean()), None,
        {"max": float(band_vals.max()), "mean_entrances": entrances,
         "mean_sojourn": float(sojourn), "sojourn_bound": float(bound)},
    ))
    return OccupationResult(alphas, means, float(band_vals.mean()), float(band_vals.max()),
                            entrances, float(sojourn), float(bound), records)
