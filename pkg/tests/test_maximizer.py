import math

import numpy as np
import pytest

from context import momentdet  # noqa: F401
from momentdet.catalog import catalog_entry, example2, exponential, gaussian, geometric
from momentdet.distmodel import log_density_derivative, log_mass
from momentdet.core import DomainError, TraceInvariantError
from momentdet.maximizer import symmetric_version
from momentdet.schemas import DivergenceClass, TraceCase


@pytest.fixture(scope="module")
def gaussian_trace(client):
    return client.maximizer.build_trace(gaussian(1.0), 30)


def test_gaussian_maximizers(gaussian_trace):
    for point in gaussian_trace.points:
        assert point.x == pytest.approx(math.sqrt(2 * point.k), rel=1e-6)
    assert gaussian_trace.case == TraceCase.Continuous


def test_gaussian_k_star_and_constant(gaussian_trace):
    # w_k(x_k) first exceeds 1 at k = 3
    assert gaussian_trace.k_star == 3
    w_1 = math.exp(gaussian_trace.point(1).log_weight)
    assert gaussian_trace.c_tilde == pytest.approx(2 * (1 + w_1 / math.sqrt(6)))
    assert gaussian_trace.growth_exponent == pytest.approx(0.5, abs=0.01)


def test_peak_weights_increase_past_k_star(gaussian_trace):
    tail = [p for p in gaussian_trace.points if p.k >= gaussian_trace.k_star]
    assert all(p.log_weight > 0 for p in tail)
    assert all(b.log_weight > a.log_weight for a, b in zip(tail, tail[1:]))


def test_step5_bound(client, gaussian_trace):
    rows = client.maximizer.verify_step5_bound(gaussian(1.0), gaussian_trace)
    assert [r.k for r in rows] == list(range(3, 30))
    assert min(r.slack for r in rows) >= -1e-8


def test_step6_and_reciprocal_sum(client, gaussian_trace):
    rows = client.maximizer.step6_rows(gaussian(1.0), gaussian_trace)
    assert all(r.reciprocal_sum >= r.integral_bound for r in rows)
    verdict = client.maximizer.recip_sum_check(gaussian(1.0), gaussian_trace)
    assert verdict.klass == DivergenceClass.Divergent


def test_stieltjes_trace_runs_on_symmetrized_density(client):
    # h(x) = x·exp(−x²) gives x_k = √((2k + 1)/2)
    trace = client.maximizer.build_trace(exponential(1.0), 12)
    assert trace.point(5).x == pytest.approx(math.sqrt(5.5), rel=1e-6)
    rows = client.maximizer.verify_step5_bound(exponential(1.0), trace)
    assert min(r.slack for r in rows) >= -1e-8


def test_discrete_trace(client):
    trace = client.maximizer.build_trace(geometric(0.5), 40)
    assert trace.case == TraceCase.Discrete
    # j^{2k}·2^{−j} peaks near 2k/ln 2
    assert trace.point(10).x in (math.floor(20 / math.log(2)), math.ceil(20 / math.log(2)))
    assert all(b.x >= a.x for a, b in zip(trace.points, trace.points[1:]))
    client.maximizer.verify_step5_bound(geometric(0.5), trace)
    assert client.maximizer.recip_sum_check(geometric(0.5), trace).klass == DivergenceClass.Divergent


def test_example2_trace_invariants(client):
    trace = client.maximizer.build_trace(example2(), 40)
    client.maximizer.verify_step5_bound(example2(), trace)
    client.maximizer.step6_rows(example2(), trace)


def test_short_range_has_no_k_star(client):
    with pytest.raises(TraceInvariantError) as e:
        client.maximizer.build_trace(gaussian(1.0), 2)
    assert e.value.step == "Step 1"


def test_argument_guards(client):
    with pytest.raises(DomainError):
        client.maximizer.log_weight(gaussian(1.0), 1, 0.0)
    with pytest.raises(ValueError):
        client.maximizer.build_trace(gaussian(1.0), 1)


SMOOTH_FAMILIES = ["gaussian", "exp", "exp_power_1.5", "example2", "lognormal", "exp_symmetrized"]


@pytest.mark.parametrize(
    "name", [*SMOOTH_FAMILIES, "example2_ceil_argument", "example2_ceil_value", "geometric", "sym_exp_pmf"]
)
def test_warm_and_cold_starts_agree_across_families(client, name):
    spec = symmetric_version(catalog_entry(name).spec)
    warm = None
    for k in range(1, 31):
        x_warm, value_warm = client.maximizer.find_max_point(spec, k, warm)
        x_cold, value_cold = client.maximizer.find_max_point(spec, k)
        assert x_warm == pytest.approx(x_cold, rel=1e-8), k
        assert value_warm == pytest.approx(value_cold, rel=1e-12, abs=1e-12)
        warm = x_warm


@pytest.mark.parametrize("name", SMOOTH_FAMILIES)
def test_continuous_peaks_zero_the_log_weight_slope(client, name):
    spec = symmetric_version(catalog_entry(name).spec)
    for k in (5, 12, 30):
        x, _ = client.maximizer.find_max_point(spec, k)
        if x > spec.threshold:
            assert abs(2 * k / x + log_density_derivative(spec, x)) * x < 1e-6


@pytest.mark.parametrize(
    "name, k_max",
    [("geometric", 30), ("sym_exp_pmf", 30), ("sym_sqrt_pmf", 15)],
)
def test_discrete_scan_matches_brute_force_above_threshold(client, name, k_max):
    spec = symmetric_version(catalog_entry(name).spec)
    js = np.arange(int(spec.threshold), 10**4 + 1, dtype=np.int64)
    warm = None
    for k in range(1, k_max + 1):
        values = 2 * k * np.log(js) + log_mass(spec, js)
        # argmax keeps the first (smallest) maximizing point
        expected = js[int(np.argmax(values))]
        x, value = client.maximizer.find_max_point(spec, k, warm)
        assert x == expected, k
        assert value == pytest.approx(float(values.max()), rel=1e-12)
        warm = x


def test_discrete_scan_ignores_points_below_threshold(client):
    # 2·ln j − j peaks at j = 2, below the threshold of 4
    spec = catalog_entry("sym_exp_pmf").spec
    x, _ = client.maximizer.find_max_point(spec, 1)
    assert x == spec.threshold
