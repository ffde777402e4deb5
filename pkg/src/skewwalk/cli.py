"""
Command-line front end.

    skewwalk gamma --spec membrane.yaml
    skewwalk rho --spec membrane.yaml --n 1000000 --alpha 1
    skewwalk verify-marginal --spec builtin:harrison-shepp:7/10 --n 2500 --paths 20000

``--spec`` takes a YAML file or one of the built-ins ``builtin:fair:M`` and
``builtin:harrison-shepp:P``.  Exit status: 0 success, 1 usage, 2 invalid
spec, 3 degenerate model, 4 failed verification.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import __version__
from .membrane import (
    ConnectednessError,
    MembraneSpec,
    SpecError,
    exit_laws,
    scale_path,
    simulate_walk,
    simulate_walks,
    validate,
)
from .pathops import delete_time, detect_schedule, lemma1_bound_check
from .skewness import (
    DegenerateModelError,
    boundary_level,
    gamma_exact,
    rho_closed_form,
    rho_direct_solve,
    rho_limit,
)
from .stats import (
    ExperimentRecord,
    marginal_experiment,
    occupation_experiment,
    write_records,
    write_records_csv,
    zero_visit_experiment,
)

DEFAULT_SEED = 12345

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SPEC = 2
EXIT_DEGENERATE = 3
EXIT_FAIL = 4

COMMANDS = ("gamma", "rho", "simulate", "verify-marginal", "verify-visits",
            "verify-occupation", "surgery-demo")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="skewwalk", description="Membrane random walks and their skew Brownian limit.")
    p.add_argument("--version", action="version", version=f"skewwalk {__version__}")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--spec", default="builtin:fair:0",
                   help="YAML membrane file, builtin:fair:M or builtin:harrison-shepp:P")
    p.add_argument("--n", type=int, default=2500, help="scaling parameter")
    p.add_argument("--paths", type=int, default=20000, help="Monte Carlo path count")
    p.add_argument("--t", type=float, default=1.0, help="evaluation time")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--alpha1", type=float, default=0.5)
    p.add_argument("--alphas", default="0.4,0.2,0.1,0.05",
                   help="decreasing band half-widths for verify-occupation")
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--threshold", type=float, default=None,
                   help="KS threshold (default 1.63/sqrt(paths) + 1/sqrt(n))")
    p.add_argument("--exact", action="store_true", help="rational arithmetic where available")
    p.add_argument("--out", default=None, help="artifact file (stdout summary only if omitted)")
    p.add_argument("--format", choices=("csv", "records"), default="records")
    return p


@dataclass
class RunConfig:
    command: str
    spec: str
    n: int
    paths: int
    t: float
    alpha: float
    alpha1: float
    alphas: tuple
    horizon: float
    seed: int
    threads: int
    threshold: float | None
    exact: bool
    out: str | None
    format: str

    @classmethod
    def from_args(cls, ns) -> "RunConfig":
        try:
            alphas = tuple(float(a) for a in ns.alphas.split(","))
        except ValueError:
            raise UsageError(f"bad --alphas list {ns.alphas!r}") from None
        cfg = cls(ns.command, ns.spec, ns.n, ns.paths, ns.t, ns.alpha, ns.alpha1, alphas,
                  ns.horizon, ns.seed, ns.threads, ns.threshold, ns.exact, ns.out, ns.format)
        cfg.check()
        return cfg

    def check(self):
        for name in ("n", "paths", "threads"):
            if getattr(self, name) <= 0:
                raise UsageError(f"--{name} must be positive")
        for name in ("t", "alpha", "alpha1", "horizon"):
            if not getattr(self, name) > 0:
                raise UsageError(f"--{name} must be positive")
        if self.alpha1 >= self.alpha:
            raise UsageError("--alpha1 must be smaller than --alpha")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise UsageError("--seed must be an unsigned 64-bit integer")
        if any(a <= 0 for a in self.alphas) or any(b >= a for a, b in zip(self.alphas, self.alphas[1:])):
            raise UsageError("--alphas must be positive and strictly decreasing")

    def header(self) -> list[str]:
        lines = [f"# skewwalk {__version__}"]
        for k, v in vars(self).items():
            if k == "alphas":
                v = ",".join(map(repr, v))
            lines.append(f"# {k} = {v}")
        return lines


def load_spec(text: str) -> MembraneSpec:
    """Resolve ``--spec``: a YAML path or a ``builtin:`` shorthand."""
    if text.startswith("builtin:"):
        parts = text.split(":")
        try:
            if len(parts) == 3 and parts[1] == "fair":
                return MembraneSpec.fair(int(parts[2]))
            if len(parts) == 3 and parts[1] == "harrison-shepp":
                return MembraneSpec.harrison_shepp(Fraction(parts[2]))
        except (ValueError, ZeroDivisionError) as exc:
            raise SpecError([f"bad builtin spec {text!r}: {exc}"]) from None
        raise SpecError([f"unknown builtin spec {text!r}"])
    try:
        with open(text) as fh:
            body = fh.read()
    except OSError as exc:
        raise SpecError([f"cannot read spec file {text!r}: {exc.strerror}"]) from None
    return MembraneSpec.loads(body)


@dataclass
class Outcome:
    summary: list = field(default_factory=list)
    records: list = field(default_factory=list)
    table: tuple | None = None  # (columns, rows) for csv output
    failed: bool = False


def _num(x):
    return str(x) if isinstance(x, Fraction) else repr(float(x))


def _show(x, exact):
    """Summary form: the fraction under --exact, else 15 significant digits."""
    if exact and isinstance(x, Fraction):
        return str(x)
    return f"{float(x):.15g}"


def _exact(cfg, spec):
    return cfg.exact or spec.exact


def cmd_gamma(cfg, spec) -> Outcome:
    exact = _exact(cfg, spec)
    xp, xm = exit_laws(spec, exact=exact)
    g = gamma_exact(xp, xm, exact=exact)
    p = rho_limit(xp, xm, exact=exact)
    rec = ExperimentRecord("gamma", {"m": spec.m, "exact": cfg.exact}, float(g), None,
                           {"gamma": _num(g), "p": _num(p),
                            "xi_plus": {int(k): _num(v) for k, v in xp.as_dict().items()},
                            "xi_minus": {int(k): _num(v) for k, v in xm.as_dict().items()}})
    return Outcome([f"gamma = {_show(g, cfg.exact)}", f"p = {_show(p, cfg.exact)}"], [rec])


def cmd_rho(cfg, spec) -> Outcome:
    exact = _exact(cfg, spec)
    xp, xm = exit_laws(spec, exact=exact)
    rm, rmm, closed = rho_closed_form(xp, xm, spec.m, cfg.n, cfg.alpha, exact=exact)
    direct = rho_direct_solve(spec, cfg.n, cfg.alpha)
    limit = rho_limit(xp, xm, exact=exact)
    gap = abs(float(rm) - float(limit))
    agree = float(np.nanmax(np.abs(closed.rho - direct.rho)))
    c_n = boundary_level(cfg.n, cfg.alpha)
    rec = ExperimentRecord(
        "rho", {"m": spec.m, "n": cfg.n, "alpha": cfg.alpha, "c_n": c_n}, gap, None,
        {"rho_m": _num(rm), "rho_minus_m": _num(rmm), "limit": _num(limit),
         "closed_vs_direct": agree,
         "collinearity": max(closed.collinearity_deviation(), direct.collinearity_deviation())},
    )
    summary = [f"C_n = {c_n}",
               f"rho_m = {_show(rm, cfg.exact)}" if spec.m else f"rho_0 = {_show(rm, cfg.exact)}"]
    if spec.m:
        summary.append(f"rho_-m = {_show(rmm, cfg.exact)}")
    summary += [f"limit p = {_show(limit, cfg.exact)}", f"gap = {gap!r}",
                f"closed form vs direct solve = {agree!r}"]
    rows = [(int(i), repr(float(c)), repr(float(d)))
            for i, c, d in zip(direct.states, closed.rho, direct.rho)]
    return Outcome(summary, [rec], (("state", "rho_closed_form", "rho_direct"), rows))


def cmd_simulate(cfg, spec) -> Outcome:
    steps = int(math.ceil(cfg.n * cfg.horizon - 1e-9))
    X = simulate_walks(spec, steps, cfg.paths, seed=cfg.seed, threads=cfg.threads)
    scaled = X / math.sqrt(cfg.n)
    times = np.arange(steps + 1) / cfg.n
    end = scaled[:, -1]
    rec = ExperimentRecord("simulate", {"m": spec.m, "n": cfg.n, "paths": cfg.paths,
                                        "horizon": cfg.horizon, "seed": cfg.seed},
                           float(np.mean(end)), None,
                           {"frac_positive": float(np.mean(end > 0)), "steps": steps})
    rows = [(k, repr(float(t)), repr(float(v)))
            for k in range(cfg.paths) for t, v in zip(times, scaled[k])]
    summary = [f"simulated {cfg.paths} paths of {steps} steps",
               f"mean X_n(horizon) = {float(np.mean(end))!r}",
               f"P(X_n(horizon) > 0) = {float(np.mean(end > 0))!r}"]
    return Outcome(summary, [rec], (("path", "time", "value"), rows))


def cmd_verify_marginal(cfg, spec) -> Outcome:
    res = marginal_experiment(spec, cfg.n, cfg.paths, cfg.t, cfg.seed, cfg.threshold, cfg.threads)
    r = res.record
    summary = [f"gamma = {res.gamma!r}",
               f"KS = {res.ks!r} (threshold {res.threshold!r})",
               f"P(X_n(t) > 0) = {res.frac_positive!r} (limit {r.extras['frac_positive_limit']!r})",
               r.verdict]
    return Outcome(summary, [r], failed=r.verdict == "FAIL")


def cmd_verify_visits(cfg, spec) -> Outcome:
    res = zero_visit_experiment(cfg.n, cfg.paths, cfg.seed, cfg.threshold, cfg.threads)
    r = res.record
    summary = [f"KS = {res.ks!r} (threshold {res.threshold!r})",
               f"median r(n)/sqrt(n) = {res.median!r}", r.verdict]
    return Outcome(summary, [r], failed=r.verdict == "FAIL")


def cmd_verify_occupation(cfg, spec) -> Outcome:
    res = occupation_experiment(spec, cfg.n, cfg.paths, cfg.alphas, cfg.horizon, cfg.seed,
                                cfg.threads)
    decreasing = bool(np.all(np.diff(res.mean_occupation) < 0))
    within = res.band_time <= 5 * res.sojourn_bound
    summary = [f"alpha = {a!r}: mean occupation {float(mu)!r}"
               for a, mu in zip(res.alphas, res.mean_occupation)]
    summary += [f"membrane band time = {res.band_time!r}",
                f"sojourn bound = {res.sojourn_bound!r}",
                "decreasing in alpha" if decreasing else "NOT decreasing in alpha",
                "PASS" if decreasing and within else "FAIL"]
    return Outcome(summary, res.records, failed=not (decreasing and within))


def cmd_surgery_demo(cfg, spec) -> Outcome:
    T = cfg.horizon
    steps = int(math.ceil(cfg.n * (T + 1) - 1e-9))
    walk = simulate_walk(spec, steps, seed=cfg.seed)
    path = scale_path(walk, cfg.n, T + 1)
    schedule = detect_schedule(path, 0.0, cfg.alpha1, cfg.alpha)
    reduced = delete_time(path, schedule)
    check = lemma1_bound_check(path, schedule, 1.0, T)
    deleted = check.deleted_length
    if check.holds is None:
        verdict = "skipped: deleted length exceeds 1"
    else:
        check = lemma1_bound_check(path, schedule, max(deleted, 1.0 / cfg.n), T)
        verdict = "bound holds" if check.holds else "bound violated"
    rec = ExperimentRecord("surgery", {"m": spec.m, "n": cfg.n, "horizon": T, "seed": cfg.seed,
                                       "alpha": cfg.alpha, "alpha1": cfg.alpha1},
                           float(check.lhs), float(check.rhs),
                           {"deleted_length": float(deleted), "intervals": len(schedule.tau)})
    rows = [("original", repr(float(t)), repr(float(v))) for t, v in zip(path.times, path.values)]
    rows += [("deleted", repr(float(t)), repr(float(v)))
             for t, v in zip(reduced.times, reduced.values) if t <= T + 1]
    summary = [f"deleted intervals = {len(schedule.tau)}",
               f"deleted length on [0, T+1] = {float(deleted)!r}",
               f"sup distance = {float(check.lhs)!r}", f"modulus = {float(check.rhs)!r}", verdict]
    return Outcome(summary, [rec], (("series", "time", "value"), rows),
                   failed=check.holds is False)


HANDLERS = {
    "gamma": cmd_gamma,
    "rho": cmd_rho,
    "simulate": cmd_simulate,
    "verify-marginal": cmd_verify_marginal,
    "verify-visits": cmd_verify_visits,
    "verify-occupation": cmd_verify_occupation,
    "surgery-demo": cmd_surgery_demo,
}


def render(cfg: RunConfig, outcome: Outcome) -> str:
    buf = io.StringIO()
    buf.write("\n".join(cfg.header()) + "\n")
    if cfg.format == "records":
        write_records(outcome.records, buf)
    elif outcome.table is not None:
        cols, rows = outcome.table
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        w.writerows(rows)
    else:
        write_records_csv(outcome.records, buf)
    return buf.getvalue()


def run(cfg: RunConfig, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        spec = load_spec(cfg.spec)
        report = validate(spec)
        for w in report.warnings:
            print(f"warning: {w}", file=stderr)
        if not report.ok:
            raise SpecError(report.errors)
        outcome = HANDLERS[cfg.command](cfg, spec)
    except (SpecError, ConnectednessError) as exc:
        problems = getattr(exc, "problems", None) or [str(exc)]
        for p in problems:
            print(f"spec error: {p}", file=stderr)
        return EXIT_SPEC
    except DegenerateModelError as exc:
        print(f"degenerate model: {exc}", file=stderr)
        return EXIT_DEGENERATE
    except ValueError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_USAGE

    print("\n".join(cfg.header()), file=stdout)
    for line in outcome.summary:
        print(line, file=stdout)
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(render(cfg, outcome))
    return EXIT_FAIL if outcome.failed else EXIT_OK


def main(argv=None) -> int:
    try:
        cfg = RunConfig.from_args(build_parser().parse_args(argv))
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
