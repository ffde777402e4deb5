"""
Random walk with a membrane ``[-m, m]``.

Outside the membrane the walk makes fair unit steps.  From a state ``i``
with ``|i| <= m`` it jumps by an offset drawn from an arbitrary finite
law (one row of a MembraneSpec).  This module holds the model types, their file
format, the exact exit and sojourn laws of the membrane obtained from the
absorbing chain on the membrane states, and trajectory simulation.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Callable, Iterable, Mapping

import numpy as np
import scipy.linalg
import yaml

from .pathops import Path


MASS_TOL = 1e-12

LatticePath = np.ndarray


class SpecError(ValueError):
    """A membrane spec violates the model invariants."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class ConnectednessError(ValueError):
    """The walk can be trapped inside the membrane."""


def _is_exact(x):
    return isinstance(x, Rational)


@dataclass(frozen=True)
class JumpPmf:
    """Finite-support law on the integers.

    Masses may be floats or :class:`fractions.Fraction`; moments keep exact
    arithmetic for rational masses.  Total mass may fall short of 1 for
    truncated laws; ``deficit`` reports the shortfall.
    """

    offsets: tuple
    masses: tuple

    def __post_init__(self):
        if len(self.offsets) != len(self.masses):
            raise ValueError("offsets and masses differ in length")
        merged: dict[int, object] = {}
        for j, w in zip(self.offsets, self.masses):
            if int(j) != j:
                raise ValueError(f"offset {j!r} is not an integer")
            if w < 0:
                raise ValueError(f"negative mass {w!r} at offset {j}")
            merged[int(j)] = merged.get(int(j), 0) + w
        items = sorted((j, w) for j, w in merged.items() if w != 0)
        if sum(w for _, w in items) > 1 + MASS_TOL:
            raise ValueError("total mass exceeds 1")
        object.__setattr__(self, "offsets", tuple(j for j, _ in items))
        object.__setattr__(self, "masses", tuple(w for _, w in items))

    @classmethod
    def from_mapping(cls, mapping: Mapping[int, object]) -> "JumpPmf":
        return cls(tuple(mapping.keys()), tuple(mapping.values()))

    @classmethod
    def from_pairs(cls, pairs: Iterable) -> "JumpPmf":
        pairs = list(pairs)
        return cls(tuple(j for j, _ in pairs), tuple(w for _, w in pairs))

    @classmethod
    def from_function(cls, mass: Callable[[int], float], K: int):
        """Tail-truncation adapter for infinite-support laws.

        Keeps offsets ``|j| <= K``, renormalises, and returns the law with the
        dropped mass (computed as one minus the kept mass).
        """
        pairs = [(j, mass(j)) for j in range(-K, K + 1)]
        kept = sum(w for _, w in pairs)
        if kept <= 0:
            raise ValueError("no mass within the truncation window")
        return cls.from_pairs((j, w / kept) for j, w in pairs), 1 - kept

    def as_dict(self):
        return dict(zip(self.offsets, self.masses))

    def __len__(self):
        return len(self.offsets)

    @property
    def exact(self):
        return all(_is_exact(w) for w in self.masses)

    @property
    def total(self):
        return sum(self.masses, start=0 * self.masses[0]) if self.masses else 0

    @property
    def deficit(self):
        return 1 - self.total

    def is_normalized(self, tol=MASS_TOL):
        if self.exact:
            return self.total == 1
        return abs(float(self.total) - 1.0) <= tol

    def _sum(self, terms):
        return sum(terms, start=Fraction(0) if self.exact else 0.0)

    def prob_pos(self):
        return self._sum(w for j, w in zip(self.offsets, self.masses) if j > 0)

    def prob_neg(self):
        return self._sum(w for j, w in zip(self.offsets, self.masses) if j < 0)

    def mean(self):
        return self._sum(j * w for j, w in zip(self.offsets, self.masses))

    def abs_mean(self):
        return self._sum(abs(j) * w for j, w in zip(self.offsets, self.masses))

    def pos_part_mean(self):
        """E(xi v 0)."""
        return self._sum(j * w for j, w in zip(self.offsets, self.masses) if j > 0)

    def neg_part_mean(self):
        """E(xi ^ 0), a nonpositive number."""
        return self._sum(j * w for j, w in zip(self.offsets, self.masses) if j < 0)

    def truncate(self, K) -> "JumpPmf":
        """Drop the mass with ``|offset| > K`` without renormalising."""
        return JumpPmf.from_pairs((j, w) for j, w in zip(self.offsets, self.masses) if abs(j) <= K)

    def to_float(self) -> "JumpPmf":
        return JumpPmf(self.offsets, tuple(float(w) for w in self.masses))

    def arrays(self):
        return np.asarray(self.offsets, dtype=np.int64), np.asarray(self.masses, dtype=float)


@dataclass(frozen=True)
class MembraneSpec:
    """Membrane half-width ``m`` and jump laws (as offsets) for ``|i| <= m``."""

    m: int
    rows: Mapping[int, JumpPmf] = field(default_factory=dict)

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 0:
            raise SpecError(f"m must be a nonnegative integer, got {self.m!r}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "rows", {int(i): r for i, r in sorted(self.rows.items())})

    @property
    def states(self):
        return range(-self.m, self.m + 1)

    def row(self, i) -> JumpPmf:
        if abs(i) > self.m:
            return FAIR_STEP
        return self.rows[i]

    @property
    def exact(self):
        return all(r.exact for r in self.rows.values())

    @classmethod
    def fair(cls, m=0):
        return cls(m, {i: FAIR_STEP for i in range(-m, m + 1)})

    @classmethod
    def harrison_shepp(cls, p):
        """m = 0 with a biased step from the origin: +1 w.p. p, -1 w.p. 1-p."""
        return cls(0, {0: JumpPmf.from_mapping({1: p, -1: 1 - p})})

    # -- serialisation ---------------------------------------------------

    @classmethod
    def loads(cls, text: str) -> "MembraneSpec":
        return parse_spec(text)

    @classmethod
    def load(cls, filename) -> "MembraneSpec":
        with open(filename) as fh:
            return parse_spec(fh.read())

    def dumps(self) -> str:
        lines = [f"m: {self.m}", "rows:"]
        for i, row in self.rows.items():
            pairs = ", ".join(f"[{j}, {_format_mass(w)}]" for j, w in zip(row.offsets, row.masses))
            lines.append(f"  {i}: [{pairs}]")
        return "\n".join(lines) + "\n"


FAIR_STEP = JumpPmf((-1, 1), (Fraction(1, 2), Fraction(1, 2)))


def _format_mass(w):
    if isinstance(w, Fraction):
        return f'"{w}"' if w.denominator != 1 else str(w.numerator)
    return repr(float(w))


def _parse_mass(text):
    if "/" in text:
        return Fraction(text.strip())
    return float(text)


def parse_spec(text: str) -> MembraneSpec:
    """Parse the YAML spec format.

    ::

        m: 1
        rows:
          -1: [[-1, 0.5], [1, 0.5]]
          0: [[-1, "1/4"], [0, "1/2"], [1, "1/4"]]
          1: [[-1, 0.5], [1, 0.5]]

    Masses are numbers or ``"a/b"`` strings (kept as exact fractions).
    Every problem found is reported with its line number.
    """
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        raise SpecError(f"unparseable spec: {exc}") from exc
    if not isinstance(root, yaml.MappingNode):
        raise SpecError("line 1: spec must be a mapping with keys 'm' and 'rows'")

    problems: list[str] = []
    top = {k.value: (k, v) for k, v in root.value}
    for key, (knode, _) in top.items():
        if key not in ("m", "rows"):
            problems.append(f"line {knode.start_mark.line + 1}: unknown key {key!r}")
    if "m" not in top or "rows" not in top:
        raise SpecError(problems + ["spec needs both 'm' and 'rows'"])

    mnode = top["m"][1]
    try:
        m = int(mnode.value)
        if m < 0:
            raise ValueError
    except (TypeError, ValueError):
        raise SpecError(problems + [f"line {mnode.start_mark.line + 1}: m must be a nonnegative integer"])

    rows: dict[int, JumpPmf] = {}
    seen: set[int] = set()
    rnode = top["rows"][1]
    if not isinstance(rnode, yaml.MappingNode):
        raise SpecError(problems + [f"line {rnode.start_mark.line + 1}: rows must be a mapping"])
    for knode, vnode in rnode.value:
        line = knode.start_mark.line + 1
        try:
            state = int(knode.value)
        except ValueError:
            problems.append(f"line {line}: row key {knode.value!r} is not an integer")
            continue
        if abs(state) > m:
            problems.append(f"line {line}: row {state} lies outside the membrane [-{m}, {m}]")
            continue
        if state in seen:
            problems.append(f"line {line}: duplicate row {state}")
            continue
        seen.add(state)
        try:
            if not isinstance(vnode, yaml.SequenceNode):
                raise ValueError("row must be a list of [offset, mass] pairs")
            pairs = []
            for pnode in vnode.value:
                if not isinstance(pnode, yaml.SequenceNode) or len(pnode.value) != 2:
                    raise ValueError("row must be a list of [offset, mass] pairs")
                off, mass = pnode.value
                pairs.append((int(off.value), _parse_mass(mass.value)))
            masses = [w for _, w in pairs]
            if any(not w > 0 for w in masses):
                raise ValueError("masses must be positive")
            pmf = JumpPmf.from_pairs(pairs)
            if not pmf.is_normalized():
                raise ValueError(f"masses sum to {float(pmf.total)!r}, not 1")
        except (ValueError, ZeroDivisionError) as exc:
            problems.append(f"line {line}: row {state}: {exc}")
            continue
        rows[state] = pmf
    missing = [i for i in range(-m, m + 1) if i not in seen]
    if missing:
        problems.append(f"line {rnode.start_mark.line + 1}: missing rows for states {missing}")
    if problems:
        raise SpecError(problems)
    return MembraneSpec(m, rows)


# ---------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self):
        """No invariant violations; one-sided warnings are allowed."""
        return not self.errors

    @property
    def connected(self):
        return not self.errors and not self.warnings

    def __str__(self):
        lines = [f"error: {e}" for e in self.errors] + [f"warning: {w}" for w in self.warnings]
        return "\n".join(lines) if lines else "valid"


def _exit_reachability(spec: MembraneSpec):
    """For each membrane state: (can exit upward, can exit downward)."""
    m = spec.m
    up = {i: False for i in spec.states}
    down = dict(up)
    succ = {}
    for i in spec.states:
        row = spec.rows.get(i)
        succ[i] = set()
        if row is None:
            continue
        for off in row.offsets:
            j = i + off
            if j > m:
                up[i] = True
            elif j < -m:
                down[i] = True
            else:
                succ[i].add(j)
    changed = True
    while changed:
        changed = False
        for i in spec.states:
            for j in succ[i]:
                if up[j] and not up[i]:
                    up[i] = changed = True
                if down[j] and not down[i]:
                    down[i] = changed = True
    return up, down


def validate(spec: MembraneSpec) -> ValidationReport:
    """Check row laws and reachability of both exits from every membrane state."""
    report = ValidationReport()
    for i in spec.states:
        row = spec.rows.get(i)
        if row is None:
            report.errors.append(f"state {i}: missing row")
        elif not row.is_normalized():
            report.errors.append(f"state {i}: row masses sum to {float(row.total)!r}")
    for i in spec.rows:
        if abs(i) > spec.m:
            report.errors.append(f"state {i}: row outside the membrane")
    if report.errors:
        return report
    up, down = _exit_reachability(spec)
    for i in spec.states:
        if not up[i] and not down[i]:
            report.errors.append(f"state {i}: walk is trapped in the membrane")
        elif not down[i]:
            report.warnings.append(f"state {i}: no downward exit")
        elif not up[i]:
            report.warnings.append(f"state {i}: no upward exit")
    return report


# ---------------------------------------------------------------------------
# absorbing chain on the membrane


@dataclass(frozen=True)
class _Blocks:
    Q: object
    R: object
    exits: tuple


def _blocks(spec: MembraneSpec, exact=False) -> _Blocks:
    m = spec.m
    size = 2 * m + 1
    exits = sorted({i + off for i in spec.states for off in spec.rows[i].offsets if abs(i + off) > m})
    col = {j: c for c, j in enumerate(exits)}
    if exact:
        Q = [[Fraction(0)] * size for _ in range(size)]
        R = [[Fraction(0)] * len(exits) for _ in range(size)]
    else:
        Q = np.zeros((size, size))
        R = np.zeros((size, len(exits)))
    for i in spec.states:
        for off, w in zip(spec.rows[i].offsets, spec.rows[i].masses):
            j = i + off
            w = Fraction(w) if exact else float(w)
            if abs(j) <= m:
                Q[i + m][j + m] += w
            else:
                R[i + m][col[j]] += w
    return _Blocks(Q, R, tuple(exits))


def _check_not_trapped(spec: MembraneSpec):
    report = validate(spec)
    if report.errors:
        raise ConnectednessError("; ".join(report.errors))


def _solve(spec: MembraneSpec, rhs_kind: str, exact: bool):
    """Solve (I - Q) X = B with B the exit block or the ones vector."""
    _check_not_trapped(spec)
    blk = _blocks(spec, exact)
    size = 2 * spec.m + 1
    if exact:
        import sympy

        I_Q = sympy.Matrix(size, size, lambda a, b: sympy.Rational((a == b) - blk.Q[a][b]))
        if rhs_kind == "exit":
            B = sympy.Matrix(size, len(blk.exits), lambda a, b: sympy.Rational(blk.R[a][b]))
        else:
            B = sympy.ones(size, 1)
        X = I_Q.LUsolve(B)
        X = [[Fraction(int(X[a, b].p), int(X[a, b].q)) for b in range(X.cols)] for a in range(size)]
        return blk, X
    lu = scipy.linalg.lu_factor(np.eye(size) - blk.Q)
    B = blk.R if rhs_kind == "exit" else np.ones((size, 1))
    X = scipy.linalg.lu_solve(lu, B)
    if not np.all(np.isfinite(X)):
        raise ConnectednessError("singular membrane system")
    return blk, X


@dataclass(frozen=True)
class ExitLaw:
    """Law of the centred exit position ``X(tau) - m sign X(tau)``."""

    side: int
    start: int
    law: JumpPmf


def exit_law(spec: MembraneSpec, side: int = 1, start: int | None = None, exact=False) -> ExitLaw:
    """Exact law of the centred exit jump from the membrane.

    Parameters
    ----------
    spec : MembraneSpec
    side : {+1, -1}
        Entry side; the walk starts at ``side * m``.
    start : int, optional
        Any membrane state to start from instead of ``side * m``.
    exact : bool
        Solve in rational arithmetic (masses converted with ``Fraction``).
    """
    if side not in (1, -1):
        raise ValueError("side must be +1 or -1")
    m = spec.m
    start = side * m if start is None else int(start)
    if abs(start) > m:
        raise ValueError(f"start state {start} outside the membrane")
    blk, H = _solve(spec, "exit", exact)
    row = H[start + m]
    pairs = []
    for j, w in zip(blk.exits, row):
        if not exact:
            w = float(w)
            if w <= 0:
                continue
        pairs.append((j - m * (1 if j > 0 else -1), w))
    law = JumpPmf.from_pairs(pairs)
    if not law.is_normalized(1e-10):
        raise ConnectednessError(f"exit law mass {float(law.total)!r} differs from 1")
    return ExitLaw(side, start, law)


def exit_laws(spec: MembraneSpec, exact=False):
    """The pair (xi_plus, xi_minus) of centred exit laws from +m and -m."""
    return exit_law(spec, 1, exact=exact).law, exit_law(spec, -1, exact=exact).law


@dataclass(frozen=True)
class SojournLaw:
    """Number of steps spent in the membrane after entering at ``side * m``."""

    side: int
    mean: float
    law: JumpPmf | None = None
    deficit: float = 0.0


def sojourn_law(spec: MembraneSpec, side: int = 1, cap: int = 0) -> SojournLaw:
    """Mean sojourn from the fundamental matrix; with ``cap > 0`` also the
    law of the step count up to ``cap`` by forward iteration, with the
    unaccounted tail mass in ``deficit``."""
    if side not in (1, -1):
        raise ValueError("side must be +1 or -1")
    m = spec.m
    start = side * m + m
    blk, t = _solve(spec, "time", exact=False)
    mean = float(t[start, 0])
    if cap <= 0:
        return SojournLaw(side, mean)
    v = np.zeros(2 * m + 1)
    v[start] = 1.0
    survive = [1.0]
    for _ in range(cap):
        v = v @ blk.Q
        survive.append(float(v.sum()))
    survive = np.asarray(survive)
    probs = survive[:-1] - survive[1:]
    pairs = [(k, float(w)) for k, w in enumerate(probs, start=1) if w > 0]
    return SojournLaw(side, mean, JumpPmf.from_pairs(pairs), float(survive[-1]))


# ---------------------------------------------------------------------------
# simulation


def is_fair(spec: MembraneSpec) -> bool:
    """True when every membrane row is the fair unit step."""
    return all(row.is_normalized() and row.to_float().as_dict() == {-1: 0.5, 1: 0.5}
               for row in spec.rows.values())


def path_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for path ``index`` under master ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


class _StepTable:
    """Inverse-CDF lookup for the membrane rows."""

    def __init__(self, spec: MembraneSpec):
        self.m = spec.m
        rows = [spec.rows[i].to_float().arrays() for i in spec.states]
        width = max(len(off) for off, _ in rows)
        self.offsets = np.zeros((len(rows), width), dtype=np.int64)
        self.cum = np.full((len(rows), width), np.inf)
        self.length = np.array([len(off) for off, _ in rows])
        for r, (off, w) in enumerate(rows):
            self.offsets[r, : off.size] = off
            self.cum[r, : off.size] = np.cumsum(w)

    def inside_steps(self, x, u):
        r = x + self.m
        idx = np.count_nonzero(u[:, None] >= self.cum[r], axis=1)
        idx = np.minimum(idx, self.length[r] - 1)
        return self.offsets[r, idx]


def _fair_steps(u):
    return np.where(u < 0.5, -1, 1).astype(np.int64)


def _run_block(table: _StepTable, U: np.ndarray, x0: int) -> np.ndarray:
    """Advance all rows of ``U`` in lockstep; row ``k`` of the output is a path."""
    n_paths, steps = U.shape
    X = np.empty((n_paths, steps + 1), dtype=np.int64)
    X[:, 0] = x0
    m = table.m
    for k in range(steps):
        x = X[:, k]
        u = U[:, k]
        nxt = x + _fair_steps(u)
        ins = np.flatnonzero(np.abs(x) <= m)
        if ins.size:
            nxt[ins] = x[ins] + table.inside_steps(x[ins], u[ins])
        X[:, k + 1] = nxt
    return X


def _run_single(table: _StepTable, u: np.ndarray, x0: int) -> np.ndarray:
    """Same map as :func:`_run_block` for one path, skipping through fair
    stretches outside the membrane in vectorised blocks."""
    steps = u.size
    X = np.empty(steps + 1, dtype=np.int64)
    X[0] = x = x0
    m = table.m
    pos = 0
    block = 256
    while pos < steps:
        if abs(x) <= m:
            x = x + int(table.inside_steps(np.array([x]), u[pos:pos + 1])[0])
            pos += 1
            X[pos] = x
            continue
        end = min(steps, pos + block)
        seg = x + np.cumsum(_fair_steps(u[pos:end]))
        hit = np.flatnonzero(np.abs(seg) <= m)
        stop = hit[0] + 1 if hit.size else seg.size
        X[pos + 1:pos + 1 + stop] = seg[:stop]
        pos += stop
        x = int(X[pos])
        block = 256 if hit.size else min(4 * block, 1 << 20)
    return X


def simulate_walk(spec: MembraneSpec, steps: int, seed: int = 0, x0: int = 0, path_index: int = 0) -> LatticePath:
    """One trajectory ``X(0..steps)`` drawn from stream ``path_index``."""
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    u = path_rng(seed, path_index).random(steps)
    return _run_single(_StepTable(spec), u, int(x0))


def simulate_walks(
    spec: MembraneSpec,
    steps: int,
    n_paths: int,
    seed: int = 0,
    x0: int = 0,
    reducer: Callable[[np.ndarray], np.ndarray] | None = None,
    threads: int = 1,
    chunk_size: int = 1024,
) -> np.ndarray:
    """Simulate ``n_paths`` walks; path ``k`` uses stream ``path_rng(seed, k)``.

    ``reducer`` maps a block of paths (rows) to one result per path, which
    keeps memory bounded for long walks.  Output does not depend on
    ``threads`` or ``chunk_size``.
    """
    if steps < 0 or n_paths < 0:
        raise ValueError("steps and n_paths must be nonnegative")
    table = _StepTable(spec)
    fair = is_fair(spec)

    def work(lo):
        hi = min(n_paths, lo + chunk_size)
        U = np.empty((hi - lo, steps))
        for r, k in enumerate(range(lo, hi)):
            U[r] = path_rng(seed, k).random(steps)
        if fair:
            X = np.empty((hi - lo, steps + 1), dtype=np.int64)
            X[:, 0] = x0
            np.cumsum(_fair_steps(U), axis=1, out=X[:, 1:])
            X[:, 1:] += x0
        else:
            X = _run_block(table, U, int(x0))
        return X if reducer is None else reducer(X)

    starts = range(0, n_paths, chunk_size)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, starts))
    else:
        parts = [work(lo) for lo in starts]
    if not parts:
        return np.empty((0, steps + 1), dtype=np.int64) if reducer is None else np.empty(0)
    return np.concatenate(parts, axis=0)


def scale_path(path: LatticePath, n: int, horizon: float | None = None) -> Path:
    """Diffusive rescaling ``X_n(k/n) = X(k)/sqrt(n)``, linear in between."""
    if n <= 0:
        raise ValueError("n must be positive")
    path = np.asarray(path)
    if horizon is not None:
        need = int(np.ceil(n * horizon - 1e-9))
        if path.size < need + 1:
            raise ValueError(f"path of {path.size - 1} steps is shorter than n*T = {n * horizon}")
        path = path[: need + 1]
    return Path(np.arange(path.size) / n, path / np.sqrt(n))


def scaled_value(paths: np.ndarray, n: int, t: float) -> np.ndarray:
    """``X_n(t)`` for each row of a block of lattice paths."""
    s = n * t
    k = int(np.floor(s + 1e-9))
    frac = s - k
    vals = paths[..., k].astype(float)
    if frac > 1e-9:
        vals = vals + frac * (paths[..., k + 1] - paths[..., k])
    return vals / np.sqrt(n)
