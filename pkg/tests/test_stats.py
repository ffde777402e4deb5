import io
import json
import math
from math import comb

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from skewwalk.membrane import MembraneSpec, SpecError
from skewwalk.skewness import DegenerateModelError
from skewwalk.stats import (
    HALF_NORMAL_MEDIAN,
    EmpiricalSample,
    ExperimentRecord,
    half_normal_cdf,
    ks_distance,
    ks_threshold,
    marginal_experiment,
    marginal_panel,
    occupation_experiment,
    write_records,
    write_records_csv,
    zero_visit_experiment,
)
from skewwalk.suite import asymmetric_m1_spec

MASTER_SEED = 12345


def test_empirical_sample():
    s = EmpiricalSample([3.0, 1.0, 2.0, 2.0])
    assert s.size == 4
    assert s.ecdf(2.0) == 0.75
    assert s.fraction_above(1.5) == 0.75
    with pytest.raises(ValueError):
        EmpiricalSample([])


@pytest.mark.parametrize("N", [1, 10, 1000])
def test_ks_quantile_construction(N):
    x = stats.norm.ppf((np.arange(1, N + 1) - 0.5) / N)
    assert ks_distance(x, stats.norm.cdf) <= 0.5 / N + 1e-12


def test_ks_shifted_cdf():
    x = stats.norm.ppf((np.arange(1, 2001) - 0.5) / 2000)
    assert ks_distance(x, lambda y: stats.norm.cdf(y - 1.0)) > 0.3


def test_ks_normal_draws():
    x = np.random.default_rng(MASTER_SEED).standard_normal(10**4)
    assert ks_distance(x, stats.norm.cdf) < 1.63 / math.sqrt(10**4)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=60))
def test_ks_matches_scipy(values):
    ours = ks_distance(values, stats.norm.cdf)
    ref = stats.kstest(values, stats.norm.cdf).statistic
    assert ours == pytest.approx(ref, abs=1e-12)
    assert ours >= 0


def test_half_normal_values():
    assert half_normal_cdf(0.0) == 0.0
    assert half_normal_cdf(1.0) == pytest.approx(0.6826894921370859, abs=1e-12)
    assert half_normal_cdf(40.0) == 1.0
    assert half_normal_cdf(HALF_NORMAL_MEDIAN) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(ValueError):
        half_normal_cdf(-0.1)


@given(st.floats(0, 8))
def test_half_normal_quadrature(x):
    q, _ = integrate.quad(lambda z: math.sqrt(2 / math.pi) * math.exp(-z * z / 2), 0, x, epsabs=1e-13)
    assert half_normal_cdf(x) == pytest.approx(q, abs=1e-10)


def test_threshold_config():
    assert ks_threshold(20000, 2500) == pytest.approx(1.63 / math.sqrt(20000) + 0.02)
    assert ks_threshold(100) == pytest.approx(0.163)


def test_donsker_case():
    res = marginal_experiment(MembraneSpec.fair(0), 2500, 20000, 1.0, MASTER_SEED)
    assert res.gamma == 0
    assert res.ks <= 0.02
    assert res.record.verdict == "PASS"


def test_harrison_shepp_exact_finite_n():
    """P(X_n(1) > 0) for the walk with a biased origin is p (1 - P(S_n = 0)),
    since the walk's excursion signs are i.i.d. with bias p and
    |X| is a fair reflected walk."""
    n, N = 2500, 20000
    expect = 0.7 * (1 - comb(n, n // 2) / 2**n)
    res = marginal_experiment(MembraneSpec.harrison_shepp(0.7), n, N, 1.0, MASTER_SEED)
    se = math.sqrt(expect * (1 - expect) / N)
    assert abs(res.frac_positive - expect) < 4 * se
    assert res.record.extras["frac_positive_limit"] == pytest.approx(0.7)


def test_marginal_reproducible_and_thread_independent():
    spec = asymmetric_m1_spec()
    a = marginal_experiment(spec, 100, 3000, 1.0, 9)
    b = marginal_experiment(spec, 100, 3000, 1.0, 9, threads=4)
    np.testing.assert_array_equal(a.sample.values, b.sample.values)
    assert a.record.to_json() == b.record.to_json()


def test_marginal_panel_times():
    res = marginal_panel(MembraneSpec.fair(0), 400, 2000, [0.5, 1.0, 1.5], MASTER_SEED)
    assert [r.record.params["t"] for r in res] == [0.5, 1.0, 1.5]
    assert all(r.ks < r.threshold for r in res)


def test_marginal_errors():
    degenerate = MembraneSpec.loads("""
m: 1
rows:
  -1: [[-1, 1.0]]
  0: [[-1, 0.5], [1, 0.5]]
  1: [[1, 1.0]]
""")
    with pytest.raises(DegenerateModelError):
        marginal_experiment(degenerate, 100, 10, 1.0, 0)
    broken = MembraneSpec(0, {})
    with pytest.raises(SpecError):
        marginal_experiment(broken, 100, 10, 1.0, 0)


def test_zero_visits_small_and_median():
    res = zero_visit_experiment(2500, 4000, MASTER_SEED)
    assert res.ks < res.threshold
    assert abs(res.median - HALF_NORMAL_MEDIAN) < 0.05
    # pre-asymptotic regime: only reported
    small = zero_visit_experiment(4, 4000, MASTER_SEED)
    assert small.ks > res.ks


def test_occupation_whole_range_and_scaling():
    spec = MembraneSpec.fair(0)
    res = occupation_experiment(spec, 400, 2000, [50.0], 1.0, MASTER_SEED)
    assert res.mean_occupation[0] == pytest.approx(1.0)
    res = occupation_experiment(spec, 2500, 4000, [0.2, 0.1], 1.0, MASTER_SEED)
    ratio = res.mean_occupation[0] / res.mean_occupation[1]
    assert ratio == pytest.approx(2.0, rel=0.1)
    assert res.band_time == 0.0


def test_occupation_band_bound():
    spec = asymmetric_m1_spec()
    res = occupation_experiment(spec, 2500, 1000, [0.4, 0.2], 1.0, MASTER_SEED)
    assert res.band_time <= 5 * res.sojourn_bound
    assert np.all(np.diff(res.mean_occupation) < 0)


def test_occupation_argument_checks():
    spec = MembraneSpec.fair(0)
    with pytest.raises(ValueError):
        occupation_experiment(spec, 10, 10, [0.1, 0.2], 1.0, 0)
    with pytest.raises(ValueError):
        occupation_experiment(spec, 10, 10, [0.1], 0.0, 0)


def test_record_output_deterministic():
    rec = ExperimentRecord("x", {"n": 3}, 0.1, 0.2, {"note": 1})
    assert rec.verdict == "PASS"
    assert ExperimentRecord("x", {}, 0.3, 0.2).verdict == "FAIL"
    assert ExperimentRecord("x", {}, 0.3, None).verdict == "INFO"
    buf = io.StringIO()
    write_records([rec], buf)
    assert json.loads(buf.getvalue())["verdict"] == "PASS"
    buf = io.StringIO()
    write_records_csv([rec, ExperimentRecord("y", {"m": 1}, 0.5, None)], buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "experiment,statistic,threshold,verdict,params.n,extras.note,params.m"
    assert len(lines) == 3
