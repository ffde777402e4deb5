"""Acceptance criteria, one test each.

Every test appends a ``PASS``/``FAIL`` line to the run summary (printed at
the end of the session) before asserting.  Tolerances are the stated ones.
"""

import math

import numpy as np
import pytest
from scipy import integrate

from conftest import ACCEPTANCE_LINES
from helpers import random_lemma_case
from skewwalk.membrane import JumpPmf, MembraneSpec, exit_laws
from skewwalk.pathops import lemma1_bound_check
from skewwalk.skewbm import SkewBmParams, sample_skew_path, skew_cdf, skew_density
from skewwalk.skewness import (
    boundary_level,
    gamma_exact,
    rho_closed_form,
    rho_direct_solve,
    rho_limit,
)
from skewwalk.stats import ks_distance, marginal_experiment, occupation_experiment, zero_visit_experiment
from skewwalk.suite import asymmetric_m1_spec, rational_spec

MASTER_SEED = 12345


def verdict(k, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _levels(m):
    """(n, alpha) pairs with C_n from just above the membrane up to 2000."""
    return [((m + 4) ** 2, 1), (10**4, 1), (10**6, 1), (4 * 10**6, 1), (10**6, 0.37)]


def _systems(spec):
    xp, xm = exit_laws(spec)
    for n, alpha in _levels(spec.m):
        _, _, closed = rho_closed_form(xp, xm, spec.m, n, alpha)
        yield closed, rho_direct_solve(spec, n, alpha)


def test_criterion_01_harrison_shepp_reduction():
    worst = 0.0
    for p in (0.5, 0.6, 0.7, 0.9):
        law = JumpPmf.from_mapping({1: p, -1: 1 - p})
        xp, xm = exit_laws(MembraneSpec(0, {0: law}))
        worst = max(worst, abs(gamma_exact(xp, xm) - (2 * p - 1)))
    verdict(1, worst <= 1e-12, f"max |gamma - (2p-1)| = {worst:.3e} (tol 1e-12)")


def test_criterion_02_closed_form_vs_direct(suite):
    assert len(suite) >= 50
    assert all(s.m <= 3 and max(abs(o) for r in s.rows.values() for o in r.offsets) <= 6 for s in suite)
    worst, largest_c = 0.0, 0
    for spec in suite:
        for closed, direct in _systems(spec):
            assert closed.c_n <= 2000
            largest_c = max(largest_c, closed.c_n)
            mask = ~np.isnan(closed.rho)
            worst = max(worst, float(np.max(np.abs(closed.rho[mask] - direct.rho[mask]))))
    verdict(2, worst <= 1e-10,
            f"{len(suite)} specs, C_n up to {largest_c}: max componentwise gap {worst:.3e} (tol 1e-10)")


def test_criterion_03_limit_consistency(suite):
    assert boundary_level(10**6, 1) == 1000
    worst = 0.0
    for spec in suite:
        xp, xm = exit_laws(spec)
        rm, _, _ = rho_closed_form(xp, xm, spec.m, 10**6, 1)
        worst = max(worst, abs(rm - rho_limit(xp, xm)))
    exact_ok = True
    for spec in suite:
        xp, xm = exit_laws(rational_spec(spec), exact=True)
        exact_ok &= rho_limit(xp, xm, exact=True) == (1 + gamma_exact(xp, xm, exact=True)) / 2
    verdict(3, worst <= 0.01 and exact_ok,
            f"max |rho_m - limit| at C_n = 1000 is {worst:.4f} (tol 0.01); "
            f"rational identity {'holds' if exact_ok else 'fails'}")


def test_criterion_04_collinearity(suite):
    worst, count = 0.0, 0
    for spec in suite:
        for closed, direct in _systems(spec):
            worst = max(worst, closed.collinearity_deviation(), direct.collinearity_deviation())
            count += 2
    verdict(4, worst <= 1e-10, f"{count} systems: max line deviation {worst:.3e} (tol 1e-10)")


def _marginal(spec):
    return marginal_experiment(spec, 2500, 20000, 1.0, MASTER_SEED)


def test_criterion_05_marginal_convergence():
    res = _marginal(MembraneSpec.harrison_shepp(0.7))
    in_band = 0.69 <= res.frac_positive <= 0.71
    ks_ok = res.ks <= 0.025
    verdict(5, in_band and ks_ok,
            f"P(X_n(1) > 0) = {res.frac_positive:.4f} (want [0.69, 0.71]); "
            f"KS = {res.ks:.4f} (tol 0.025); seed {MASTER_SEED}")


def test_criterion_06_membrane_end_to_end():
    spec = asymmetric_m1_spec()
    res = _marginal(spec)
    xp, xm = exit_laws(spec, exact=True)
    assert res.gamma == float(gamma_exact(xp, xm))
    verdict(6, res.ks <= 0.025,
            f"m = 1, gamma = {res.gamma}: KS = {res.ks:.4f} (tol 0.025), "
            f"P(X_n(1) > 0) = {res.frac_positive:.4f}")


def test_criterion_07_zero_visit_law():
    res = zero_visit_experiment(10**4, 10**4, MASTER_SEED)
    verdict(7, res.ks <= 0.05, f"KS(r(n)/sqrt n, half-normal) = {res.ks:.4f} (tol 0.05)")


@pytest.mark.slow
def test_criterion_08_occupation_vanishing(suite):
    alphas = [0.4, 0.2, 0.1, 0.05]
    decreasing, bands = True, []
    for spec in suite:
        res = occupation_experiment(spec, 10**4, 1000, alphas, 1.0, MASTER_SEED, chunk_size=500)
        decreasing &= bool(np.all(np.diff(res.mean_occupation) < 0))
        bands.append(res.band_time)
    bands = np.array(bands)
    over = int(np.sum(bands >= 0.01))
    verdict(8, decreasing and over == 0,
            f"decreasing in alpha: {decreasing}; membrane-band time max {bands.max():.4f} "
            f"(tol < 0.01), {over}/{len(bands)} specs at or above")


def test_criterion_09_lemma1_suite():
    rng = np.random.default_rng(MASTER_SEED)
    worst_slack, failures = np.inf, 0
    for _ in range(10**4):
        path, schedule, delta, T = random_lemma_case(rng)
        check = lemma1_bound_check(path, schedule, delta, T)
        assert check.hypothesis_met
        failures += not check.holds
        worst_slack = min(worst_slack, check.rhs - check.lhs)
    verdict(9, failures == 0, f"10^4 cases, {failures} violations, min slack {worst_slack:.3e}")


def _quad(f):
    a, _ = integrate.quad(f, -np.inf, 0.0, epsabs=1e-13, epsrel=1e-12, limit=200)
    b, _ = integrate.quad(f, 0.0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=200)
    return a + b


def test_criterion_10_skew_bm_self_consistency():
    norm_err = ck_err = fd_err = ks_worst = 0.0
    h = 1e-5
    for g in (-0.8, 0.0, 0.4, 1.0):
        par = SkewBmParams(g)
        for t, x in [(0.3, 0.0), (1.0, 0.8), (2.5, -1.3)]:
            norm_err = max(norm_err, abs(_quad(lambda y: skew_density(par, t, x, y)) - 1))
        for s, t, x, y in [(0.4, 0.7, 0.2, -0.5), (1.0, 1.0, -0.6, 1.1), (0.2, 2.0, 0.0, 0.3)]:
            lhs = _quad(lambda z: skew_density(par, s, x, z) * skew_density(par, t, z, y))
            ck_err = max(ck_err, abs(lhs - skew_density(par, s + t, x, y)))
        for x in (-1.0, 0.0, 0.5):
            for y in np.linspace(-2.5, 2.5, 26):
                fd = (skew_cdf(par, 1.0, x, y + h) - skew_cdf(par, 1.0, x, y - h)) / (2 * h)
                fd_err = max(fd_err, abs(fd - skew_density(par, 1.0, x, y)))
        w = sample_skew_path(par, MASTER_SEED, [0.0, 1.0], size=20000)[:, -1]
        ks_worst = max(ks_worst, ks_distance(w, lambda y: skew_cdf(par, 1.0, 0.0, y)))
    ok = norm_err <= 1e-8 and ck_err <= 1e-6 and fd_err <= 1e-5 and ks_worst <= 0.02
    verdict(10, ok, f"normalization {norm_err:.1e}, Chapman-Kolmogorov {ck_err:.1e}, "
                    f"CDF/density {fd_err:.1e}, sampler KS {ks_worst:.4f}")
    assert math.isfinite(ks_worst)
