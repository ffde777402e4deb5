"""
Path calculus on piecewise-linear trajectories.

Deleting time intervals from a path, the clocks ``L`` and ``A`` behind that
operation, concatenation of segment sequences, detection of
entrance/exit schedules around a point, and a few exact functionals
(modulus of continuity, occupation time, visit counts).

Paths are piecewise linear between explicit breakpoints.  A time may appear
twice in a row to encode a jump: the first value is the left limit, the
second the (right-continuous) value.  All sup and measure computations are
exact on this class.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np


@dataclass(frozen=True, eq=False)
class Path:
    """Piecewise-linear cadlag path on ``[0, horizon]``."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape or times.size == 0:
            raise ValueError("times and values must be equal-length non-empty 1-d arrays")
        if times[0] != 0:
            raise ValueError("path times must start at 0")
        dt = np.diff(times)
        if np.any(dt < 0) or np.any(~np.isfinite(times)):
            raise ValueError("path times must be finite and nondecreasing")
        if dt.size > 1 and np.any((dt[1:] == 0) & (dt[:-1] == 0)):
            raise ValueError("a time may appear at most twice")
        if dt.size and (dt[0] == 0 or dt[-1] == 0):
            raise ValueError("jumps are not allowed at the end points")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def is_continuous(self) -> bool:
        return bool(np.all(np.diff(self.times) > 0))

    def __len__(self):
        return self.times.size

    def __call__(self, t):
        """Right-continuous evaluation."""
        t = np.asarray(t, dtype=float)
        if self.times.size == 1:
            return np.full(t.shape, self.values[0]) if t.ndim else float(self.values[0])
        idx = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, self.times.size - 2)
        out = self._interp(idx, t)
        return out if out.ndim else float(out)

    def left_limit(self, t):
        """Left limit f(t-); equals f(0) at t = 0."""
        t = np.asarray(t, dtype=float)
        if self.times.size == 1:
            return np.full(t.shape, self.values[0]) if t.ndim else float(self.values[0])
        idx = np.clip(np.searchsorted(self.times, t, side="left") - 1, 0, self.times.size - 2)
        out = self._interp(idx, t)
        return out if out.ndim else float(out)

    def _interp(self, idx, t):
        t0, t1 = self.times[idx], self.times[idx + 1]
        v0, v1 = self.values[idx], self.values[idx + 1]
        span = t1 - t0
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(span > 0, (t - t0) / np.where(span > 0, span, 1.0), 1.0)
        return v0 + w * (v1 - v0)

    def restrict(self, start, end) -> "Path":
        """The piece on ``[start, end]`` shifted to start at time 0.

        The first value is the right value at ``start``, the last one the left
        limit at ``end``.
        """
        times, values = _piece(self, start, end)
        return Path(times - start, values)

    def to_csv(self, file):
        """Write two columns ``time,value``."""
        own = isinstance(file, (str, bytes)) or hasattr(file, "__fspath__")
        fh = open(file, "w", newline="") if own else file
        try:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["time", "value"])
            for t, v in zip(self.times, self.values):
                writer.writerow([repr(float(t)), repr(float(v))])
        finally:
            if own:
                fh.close()

    def allclose(self, other: "Path", atol=1e-12) -> bool:
        return (
            self.times.shape == other.times.shape
            and np.allclose(self.times, other.times, rtol=0, atol=atol)
            and np.allclose(self.values, other.values, rtol=0, atol=atol)
        )


ContinuousPath = Path


def _piece(path: Path, start, end):
    if not 0 <= start <= end <= path.horizon:
        raise ValueError(f"piece [{start}, {end}] outside path horizon {path.horizon}")
    lo = np.searchsorted(path.times, start, side="right")
    hi = np.searchsorted(path.times, end, side="left")
    if end == start:
        return np.array([start], dtype=float), np.array([path(start)], dtype=float)
    times = np.concatenate(([start], path.times[lo:hi], [end]))
    values = np.concatenate(([path(start)], path.values[lo:hi], [path.left_limit(end)]))
    return times, values


def _join(chunks):
    """Concatenate (times, values) chunks; equal seam values are merged."""
    times, values = [chunks[0][0]], [chunks[0][1]]
    for t, v in chunks[1:]:
        if v[0] == values[-1][-1]:
            t, v = t[1:], v[1:]
        times.append(t)
        values.append(v)
    return np.concatenate(times), np.concatenate(values)


# ---------------------------------------------------------------------------
# Deletion schedules and clocks


@dataclass(frozen=True, eq=False)
class DeletionSchedule:
    """Deleted intervals ``[tau[k], sigma[k])``.

    Ordering follows ``0 <= tau[0] <= sigma[0] < tau[1] < sigma[1] < ...``.
    The last ``sigma`` may be ``inf`` when a path enters the inner band and
    never leaves the outer one within its horizon.
    """

    tau: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=float).reshape(-1)
        sigma = np.asarray(self.sigma, dtype=float).reshape(-1)
        if tau.shape != sigma.shape:
            raise ValueError("tau and sigma must have equal length")
        if tau.size:
            if not 0 <= tau[0] <= sigma[0]:
                raise ValueError("schedule must satisfy 0 <= tau_0 <= sigma_0")
            if np.any(~np.isfinite(tau)) or np.any(~np.isfinite(sigma[:-1])):
                raise ValueError("only the last sigma may be infinite")
            if np.any(tau[1:] >= sigma[1:]):
                raise ValueError("schedule must satisfy tau_k < sigma_k for k >= 1")
            if np.any(sigma[:-1] >= tau[1:]):
                raise ValueError("schedule must satisfy sigma_k < tau_(k+1)")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "sigma", sigma)

    @classmethod
    def empty(cls):
        return cls(np.empty(0), np.empty(0))

    def __len__(self):
        return self.tau.size

    def kept_intervals(self):
        """Start and end points of the kept intervals, empty ones dropped."""
        starts = np.concatenate(([0.0], self.sigma))
        ends = np.concatenate((self.tau, [np.inf]))
        keep = (ends > starts) & np.isfinite(starts)
        return starts[keep], ends[keep]

    def deleted_length(self, t):
        """Lebesgue measure of the deleted set inside ``[0, t]``."""
        t = np.asarray(t, dtype=float)
        seg = np.minimum.outer(t, self.sigma) - self.tau
        out = np.clip(seg, 0.0, None).sum(axis=-1)
        return out if out.ndim else float(out)


def clock_L(schedule: DeletionSchedule, t):
    """Kept time up to ``t``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("clock argument must be nonnegative")
    out = t - schedule.deleted_length(t)
    return out if np.ndim(out) else float(out)


def clock_A(schedule: DeletionSchedule, t, side="right"):
    """Generalised inverse of :func:`clock_L`.

    ``side="right"`` gives ``inf{s : L(s) > t}`` (right-continuous, so a
    deleted initial interval is skipped at ``t = 0``); ``side="left"`` gives
    ``inf{s : L(s) >= t}``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("clock argument must be nonnegative")
    starts, ends = schedule.kept_intervals()
    lengths = ends - starts
    cum_end = np.cumsum(lengths)
    cum_start = np.concatenate(([0.0], cum_end[:-1]))
    j = np.searchsorted(cum_end, t, side=side)
    if np.any(j >= starts.size):
        raise ValueError(f"clock value beyond total kept length {cum_end[-1]}")
    out = starts[j] + (t - cum_start[j])
    if side == "left":
        out = np.where(t == 0, 0.0, out)
    return out if out.ndim else float(out)


def delete_time(path: Path, schedule: DeletionSchedule) -> Path:
    """Compose ``path`` with the inverse clock, removing the deleted intervals.

    The result lives on ``[0, L(horizon)]``.  Seams where the path value
    differs on both sides become jumps.
    """
    horizon = path.horizon
    starts, ends = schedule.kept_intervals()
    lengths = np.minimum(ends, horizon) - starts
    lengths = lengths[lengths > 0]
    # summed in the same order as clock_A, so the endpoint stays in range
    cum = np.cumsum(lengths)
    total = float(cum[-1]) if cum.size else 0.0
    if total <= 0:
        if horizon == 0 and len(schedule) == 0:
            return Path([0.0], [path.values[0]])
        raise ValueError("no kept time within the path horizon")
    seams = cum[:-1]
    # L maps a deleted stretch onto its seam only up to rounding; snap it there
    anchors = np.concatenate(([0.0], seams, [total]))
    lt = np.atleast_1d(clock_L(schedule, path.times))
    k = np.clip(np.searchsorted(anchors, lt), 1, anchors.size - 1)
    near = np.where(lt - anchors[k - 1] < anchors[k] - lt, anchors[k - 1], anchors[k])
    lt = np.where(np.abs(lt - near) <= 1e-12 * max(1.0, total), near, lt)
    grid = np.unique(np.concatenate((lt, anchors)))
    grid = grid[grid <= total]

    # right values on [0, total), left limits on (0, total]
    right = path(clock_A(schedule, grid[:-1]))
    left = path.left_limit(clock_A(schedule, grid[1:], side="left"))
    inner = grid[1:-1]
    lv, rv = left[:-1], right[1:]
    mask = np.column_stack((np.ones(inner.size, dtype=bool), rv != lv)).ravel()
    times = np.concatenate(([grid[0]], np.repeat(inner, 2)[mask], [grid[-1]]))
    values = np.concatenate(([right[0]], np.column_stack((lv, rv)).ravel()[mask], [left[-1]]))
    return Path(times, values)


# ---------------------------------------------------------------------------
# Entrance / exit schedules


def _first_hit(path: Path, t0, lo, hi, inside):
    """First time >= t0 at which the path enters a closed set.

    ``inside=True``: the set is ``[lo, hi]``; otherwise it is
    ``(-inf, lo] U [hi, inf)``.  Returns ``inf`` if never.
    """
    def member(v):
        return (lo <= v) & (v <= hi) if inside else (v <= lo) | (v >= hi)

    if member(path(t0)):
        return float(t0)
    i0 = np.searchsorted(path.times, t0, side="right")
    if i0 >= path.times.size:
        return np.inf
    ta = np.concatenate(([t0], path.times[i0:-1]))
    va = np.concatenate(([path(t0)], path.values[i0:-1]))
    tb = path.times[i0:]
    vb = path.values[i0:]
    if inside:
        hit = (np.minimum(va, vb) <= hi) & (np.maximum(va, vb) >= lo)
    else:
        hit = (np.minimum(va, vb) <= lo) | (np.maximum(va, vb) >= hi)
    if not hit.any():
        return np.inf
    k = int(np.argmax(hit))
    a, b, s, e = va[k], vb[k], ta[k], tb[k]
    if member(a):
        return float(s)
    if e == s:
        return float(s)
    if inside:
        level = lo if a < lo else hi
    else:
        level = hi if b >= hi else lo
    return float(s + (level - a) / (b - a) * (e - s))


def detect_schedule(path: Path, x_star, alpha1, alpha, lattice_step=None) -> DeletionSchedule:
    """Alternating entrances into ``[x*-alpha1, x*+alpha1]`` and exits from
    ``(x*-alpha, x*+alpha)``, starting the search at time 0.

    With ``lattice_step`` the search is restricted to times in
    ``lattice_step * Z_+``; otherwise crossing times are found by exact
    linear inversion on each piece.
    """
    if not 0 < alpha1 < alpha:
        raise ValueError("need 0 < alpha1 < alpha")
    tau, sigma = [], []
    if lattice_step is None:
        t = 0.0
        while True:
            t = _first_hit(path, t, x_star - alpha1, x_star + alpha1, inside=True)
            if not np.isfinite(t):
                break
            tau.append(t)
            t = _first_hit(path, t, x_star - alpha, x_star + alpha, inside=False)
            sigma.append(t)
            if not np.isfinite(t):
                break
        return DeletionSchedule(tau, sigma)

    if not lattice_step > 0:
        raise ValueError("lattice step must be positive")
    count = int(np.floor(path.horizon / lattice_step + 1e-9)) + 1
    grid = np.arange(count) * lattice_step
    dist = np.abs(path(grid) - x_star)
    enter = np.flatnonzero(dist <= alpha1)
    leave = np.flatnonzero(dist >= alpha)
    k = 0
    while True:
        i = np.searchsorted(enter, k)
        if i == enter.size:
            break
        k = enter[i]
        tau.append(grid[k])
        j = np.searchsorted(leave, k)
        if j == leave.size:
            sigma.append(np.inf)
            break
        k = leave[j]
        sigma.append(grid[k])
    return DeletionSchedule(tau, sigma)


# ---------------------------------------------------------------------------
# Functionals


def modulus_of_continuity(path: Path, delta, T) -> float:
    """sup |f(s) - f(t)| over s, t in [0, T] with |s - t| <= delta.

    For a piecewise-linear path the supremum is attained at a pair of
    breakpoints, or at a breakpoint paired with a point exactly ``delta``
    away.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    if T > path.horizon:
        raise ValueError(f"horizon {path.horizon} shorter than T={T}")
    times, values = _piece(path, 0.0, T)
    best = 0.0
    for d in range(1, times.size):
        close = times[d:] - times[:-d] <= delta
        if not close.any():
            break
        best = max(best, float(np.max(np.abs(values[d:] - values[:-d])[close])))
    for shift in (delta, -delta):
        other = times + shift
        ok = (other >= 0) & (other <= T)
        if ok.any():
            for ev in (path, path.left_limit):
                best = max(best, float(np.max(np.abs(ev(other[ok]) - values[ok]))))
    return best


def sup_distance(f: Path, g: Path, T) -> float:
    """sup over [0, T] of |f(t) - g(t)|, exact for piecewise-linear paths."""
    if T > f.horizon or T > g.horizon:
        raise ValueError("both paths must be defined on [0, T]")
    grid = np.unique(np.concatenate((f.times, g.times, [0.0, T])))
    grid = grid[grid <= T]
    right = np.abs(f(grid) - g(grid))
    left = np.abs(f.left_limit(grid) - g.left_limit(grid))
    # the value at the domain end of either path is its left limit
    return float(max(right[grid < T].max(initial=0.0), left.max()))


class Lemma1Check(NamedTuple):
    deleted_length: float
    lhs: float
    rhs: float
    holds: bool | None

    @property
    def hypothesis_met(self):
        return self.holds is not None


def lemma1_bound_check(path: Path, schedule: DeletionSchedule, delta, T) -> Lemma1Check:
    """Compare sup_{[0,T]} |f - f^{tau,sigma}| with the modulus of continuity
    of ``f`` on ``[0, T+1]`` at ``delta``.

    When the deleted length in ``[0, T+1]`` exceeds ``delta`` (or
    ``delta > 1``) the comparison is skipped and ``holds`` is ``None``.
    """
    if T + 1 > path.horizon:
        raise ValueError("path horizon must be at least T + 1")
    deleted = (T + 1) - clock_L(schedule, T + 1)
    if not (deleted <= delta + 1e-12 and delta <= 1):
        return Lemma1Check(deleted, np.nan, np.nan, None)
    reduced = delete_time(path, schedule)
    lhs = sup_distance(path, reduced, T)
    rhs = modulus_of_continuity(path, delta, T + 1)
    return Lemma1Check(deleted, lhs, rhs, bool(lhs <= rhs + 1e-12))


@dataclass(frozen=True, eq=False)
class SegmentSequence:
    """Segments ``f_k`` with durations ``t_k``; ``f_k`` is used on ``[0, t_k]``."""

    segments: Sequence[Path]
    durations: np.ndarray

    def __post_init__(self):
        durations = np.asarray(self.durations, dtype=float).reshape(-1)
        if len(self.segments) != durations.size or durations.size == 0:
            raise ValueError("need one positive duration per segment")
        if np.any(~(durations > 0)):
            raise ValueError("durations must be positive")
        if np.any(~np.isfinite(durations[:-1])):
            raise ValueError("only the last duration may be infinite")
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "durations", durations)


def concatenate_F(seq: SegmentSequence) -> Path:
    """Lay the segments end to end: on ``[T_(k-1), T_k)`` the path is
    ``f_k(t - T_(k-1))`` with ``T_k`` the partial sums of the durations.

    A last duration reaching past the last segment (``inf`` included) uses
    the whole segment; earlier segments must cover their durations.
    """
    chunks = []
    offset = 0.0
    last = len(seq.segments) - 1
    for k, (f, d) in enumerate(zip(seq.segments, seq.durations)):
        if k == last and d >= f.horizon:
            d = f.horizon
        elif d > f.horizon:
            raise ValueError(f"segment of horizon {f.horizon} shorter than its duration {d}")
        t, v = _piece(f, 0.0, d)
        chunks.append((t + offset, v))
        offset += d
    times, values = _join(chunks)
    return Path(times, values)


def kept_segments(path: Path, schedule: DeletionSchedule) -> SegmentSequence:
    """Excursion pieces of ``path`` between deletions, as a segment sequence."""
    starts, ends = schedule.kept_intervals()
    segs, durs = [], []
    for s, e in zip(starts, np.minimum(ends, path.horizon)):
        if e > s:
            segs.append(path.restrict(s, e))
            durs.append(e - s)
    return SegmentSequence(segs, durs)


def occupation_time(path: Path, x_star, alpha, T) -> float:
    """Lebesgue measure of ``{t <= T : |path(t) - x*| <= alpha}``."""
    if T > path.horizon:
        raise ValueError(f"horizon {path.horizon} shorter than T={T}")
    if T <= 0:
        return 0.0
    times, values = _piece(path, 0.0, T)
    return float(_band_time(times, values, x_star - alpha, x_star + alpha).sum())


def _band_time(times, values, lo, hi):
    """Per-piece time spent in [lo, hi]; works along the last axis."""
    dt = np.diff(times, axis=-1)
    va, vb = values[..., :-1], values[..., 1:]
    dv = vb - va
    flat = dv == 0
    safe = np.where(flat, 1.0, dv)
    s1 = (lo - va) / safe
    s2 = (hi - va) / safe
    a = np.clip(np.minimum(s1, s2), 0.0, 1.0)
    b = np.clip(np.maximum(s1, s2), 0.0, 1.0)
    frac = np.where(flat, ((va >= lo) & (va <= hi)).astype(float), b - a)
    return frac * dt


def count_visits(path, target_set, k=None) -> int:
    """Entrances into ``target_set`` during steps ``0..k``.

    A visit is a step ``j`` with ``path[j]`` in the set and ``path[j-1]``
    outside it; being in the set at step 0 counts once.
    """
    arr = np.asarray(path.values if isinstance(path, Path) else path)
    if k is None:
        k = arr.size - 1
    if k >= arr.size:
        raise ValueError("k exceeds path length")
    inside = np.isin(arr[: k + 1], np.fromiter(target_set, dtype=arr.dtype))
    return int(inside[0]) + int(np.count_nonzero(inside[1:] & ~inside[:-1]))
