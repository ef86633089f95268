import math

import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given, settings
from pydantic import ValidationError

from context import momentdet  # noqa: F401
from momentdet.catalog import catalog, catalog_entry, example2, exponential, gaussian, geometric, sym_power_pmf
from momentdet.core import DomainError, InvalidTransformError
from momentdet.distmodel import (
    NONSMOOTH,
    OSCILLATING,
    DensitySpec,
    ceiling_u_variant,
    eval_log_density,
    floor_discretize,
    jump_breaks,
    log_mass,
    perturb_bounded_sin,
    raw_u_ratio,
    square_pushforward,
    symmetrize_pmf,
    symmetrize_sqrt,
    u_ratio,
)
from momentdet.numerics import log_integral, log_sum_terms
from momentdet.schemas import CeilMode, SupportKind

LN_SQRT_2PI = 0.5 * math.log(2 * math.pi)


def test_gaussian_log_density():
    spec = gaussian(1.0)
    assert eval_log_density(spec, 0.0) == pytest.approx(-LN_SQRT_2PI, abs=1e-15)
    assert eval_log_density(spec, -2.0) == eval_log_density(spec, 2.0)


def test_stieltjes_rejects_negative_argument():
    with pytest.raises(DomainError):
        log_mass(exponential(1.0), -1.0)


def test_pmf_rejects_non_integer_argument():
    with pytest.raises(DomainError):
        log_mass(geometric(0.5), 1.5)


def test_u_ratio_needs_x_above_one():
    with pytest.raises(DomainError):
        u_ratio(gaussian(1.0), 1.0)
    with pytest.raises(DomainError):
        u_ratio(gaussian(1.0), np.array([0.5, 2.0]))


def test_threshold_must_exceed_one():
    with pytest.raises(ValidationError):
        DensitySpec(
            name="bad",
            support=SupportKind.Stieltjes,
            log_density=lambda x: -x,
            threshold=1.0,
        )


def test_pmf_normalization_by_summation():
    # Σ_{j∈ℤ} e^{−|j|} = coth(1/2)
    spec = sym_power_pmf(1.0)
    assert spec.log_c == pytest.approx(-math.log(1 / math.tanh(0.5)), abs=1e-12)


def test_density_normalization_by_quadrature():
    # unnormalized exp(−x) on [0, ∞) has mass 1
    spec = DensitySpec(
        name="raw_exp",
        support=SupportKind.Stieltjes,
        log_density=lambda x: -np.asarray(x, dtype=float),
        threshold=math.e,
    )
    assert spec.log_c == pytest.approx(0.0, abs=1e-10)


@given(st.floats(min_value=1.01, max_value=1e4))
@settings(max_examples=50, deadline=None)
def test_symmetrized_u_ratio_identity(x):
    # u_h(x) = 2·u_g(x²) − 1 for h(x) = |x|·g(x²)
    g = exponential(1.0)
    h = symmetrize_sqrt(g)
    assert float(u_ratio(h, x)) == pytest.approx(2 * float(u_ratio(g, x * x)) - 1, abs=1e-12 * max(1.0, x * x))


def test_symmetrize_sqrt_threshold_and_support():
    h = symmetrize_sqrt(example2())
    assert h.support == SupportKind.HamburgerSymmetric
    assert h.threshold == pytest.approx(math.sqrt(5.0))


def test_symmetrize_pmf_halves_off_center_mass():
    p = geometric(0.5)
    q = symmetrize_pmf(p)
    assert log_mass(q, 0) == pytest.approx(log_mass(p, 0))
    assert log_mass(q, 3) == pytest.approx(log_mass(p, 3) - math.log(2))
    assert log_mass(q, -3) == log_mass(q, 3)


def test_square_pushforward_of_gaussian_is_chi_square():
    chi = square_pushforward(gaussian(1.0))
    assert log_mass(chi, 1.0) == pytest.approx(-0.5 - LN_SQRT_2PI, abs=1e-14)
    assert chi.threshold == pytest.approx(1.44)


def test_transforms_check_support_kind():
    with pytest.raises(InvalidTransformError):
        symmetrize_sqrt(gaussian(1.0))
    with pytest.raises(InvalidTransformError):
        square_pushforward(exponential(1.0))
    with pytest.raises(InvalidTransformError):
        symmetrize_pmf(sym_power_pmf(1.0))


@pytest.mark.parametrize("amplitude", [-0.1, 1.0, 1.5])
def test_perturb_rejects_amplitude_outside_unit_interval(amplitude):
    with pytest.raises(InvalidTransformError):
        perturb_bounded_sin(example2(), amplitude)


def test_perturb_is_flagged_and_renormalized():
    spec = perturb_bounded_sin(example2(), 0.5)
    assert spec.has_flag(OSCILLATING)
    assert spec.base.name == "example2"
    assert math.isfinite(spec.log_c)
    assert abs(spec.log_c) < math.log(2.0)


@pytest.mark.parametrize("mode", [CeilMode.CeilArgument, CeilMode.CeilValue])
def test_ceiling_variants_dominate_u(mode):
    base = example2()
    variant = ceiling_u_variant(base, mode)
    assert variant.has_flag(NONSMOOTH)
    xs = np.geomspace(base.threshold, 1e6, 200)
    assert np.all(raw_u_ratio(variant, xs) >= u_ratio(base, xs) - 1e-12)


def test_floor_discretize_of_exponential_is_geometric():
    pmf = floor_discretize(exponential(1.0))
    assert pmf.support == SupportKind.NonnegativeInteger
    for n in (0, 3, 40):
        expected = -n + math.log1p(-math.exp(-1.0))
        assert log_mass(pmf, n) == pytest.approx(expected, abs=1e-9)


def log_total_mass(spec) -> float:
    if spec.is_pmf:
        head = log_mass(spec, 0)
        tail, _ = log_sum_terms(lambda j: log_mass(spec, j), 1)
        fold = math.log(2) if spec.support.is_symmetric else 0.0
        return float(np.logaddexp(head, tail + fold))

    def f(x):
        return log_mass(spec, x)

    breaks = (1.0, spec.threshold, *jump_breaks(spec, f, 1.0))
    value, _ = log_integral(f, 1.0, breaks=breaks)
    return value + (math.log(2) if spec.support.is_symmetric else 0.0)


@pytest.mark.parametrize("entry", catalog(), ids=lambda e: e.name)
def test_catalog_specs_have_unit_mass(entry):
    assert log_total_mass(entry.spec) == pytest.approx(0.0, abs=1e-8)


@pytest.mark.parametrize("spec", [example2(), square_pushforward(gaussian(1.0))], ids=["example2", "chi_square"])
def test_stieltjes_densities_vanish_at_the_origin(spec):
    assert log_mass(spec, 0.0) == -math.inf
    assert float(spec.log_density(-1.0)) == -math.inf
    assert np.all(np.asarray(spec.log_density(np.array([0.0, -2.0]))) == -np.inf)


@pytest.mark.parametrize("spec", [gaussian(1.0), gaussian(2.5), catalog_entry("example1").spec])
def test_square_then_symmetrize_restores_the_density(spec):
    restored = symmetrize_sqrt(square_pushforward(spec))
    xs = np.geomspace(spec.threshold, 40.0, 25)
    assert np.allclose(log_mass(restored, xs), log_mass(spec, xs), rtol=1e-9, atol=1e-9)
    assert log_mass(restored, -xs[3]) == pytest.approx(log_mass(spec, xs[3]), abs=1e-9)


def test_symmetrize_then_square_restores_the_density():
    g = exponential(1.0)
    restored = square_pushforward(symmetrize_sqrt(g))
    ys = np.geomspace(0.1, 50.0, 25)
    assert np.allclose(log_mass(restored, ys), log_mass(g, ys), rtol=1e-9, atol=1e-9)
