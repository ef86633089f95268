import pytest

from context import momentdet  # noqa: F401
from momentdet.catalog import (
    catalog_entry,
    example1,
    example2,
    exponential,
    gaussian,
    geometric,
    lognormal,
    sym_power_pmf,
)
from momentdet.core import DomainError
from momentdet.distmodel import symmetrize_pmf
from momentdet.schemas import ConditionId, ConditionVerdict

HOLDS = ConditionVerdict.Holds
FAILS = ConditionVerdict.FailsToHold
INCONCLUSIVE = ConditionVerdict.Inconclusive


def test_condition_displays():
    assert ConditionId.KstarH.display == "(1)"
    assert ConditionId.ConverseKreinS.display == "(6S)"
    assert ConditionId.UMonotoneDiscreteS.display == "(12)"


def test_gaussian_conditions(client):
    spec = gaussian(1.0)
    assert client.conditions.check_kstar(spec).verdict == HOLDS
    report = client.conditions.check_u_monotone(spec)
    assert report.id == ConditionId.UMonotoneH
    assert report.verdict == HOLDS
    # u decreases just above 1.2 and increases from 2.4 on
    assert report.monotone.escalations == 1
    assert report.monotone.effective_threshold == pytest.approx(2.4)
    assert client.conditions.check_condition_L(spec).verdict == HOLDS
    krein, converse = client.conditions.check_krein_pair(spec)
    assert (krein.verdict, converse.verdict) == (FAILS, HOLDS)


def test_exponential_conditions(client):
    spec = exponential(1.0)
    kstar = client.conditions.check_kstar(spec)
    assert kstar.id == ConditionId.KstarS
    assert kstar.verdict == HOLDS
    assert any("tail" in note for note in kstar.notes)
    assert client.conditions.check_u_monotone(spec).verdict == HOLDS


def test_lognormal_satisfies_krein(client):
    krein = client.conditions.check_krein(lognormal(), direction="Finite")
    assert krein.id == ConditionId.KreinS
    assert krein.verdict == HOLDS
    assert krein.evidence.value_estimate is not None
    converse = client.conditions.check_krein(lognormal(), direction="Infinite")
    assert converse.verdict == FAILS


@pytest.mark.parametrize("alpha", [0.5, 1.0])
def test_example1_conditions(client, alpha):
    spec = example1(alpha)
    assert client.conditions.check_kstar(spec).verdict == FAILS
    assert client.conditions.check_krein(spec, direction="Infinite").verdict == HOLDS
    assert client.conditions.check_condition_L(spec).verdict == HOLDS


def test_discrete_conditions(client):
    geo = geometric(0.5)
    assert client.conditions.check_discrete_kstar(geo).verdict == HOLDS
    assert client.conditions.check_u_monotone(geo).verdict == HOLDS

    sym_exp = sym_power_pmf(1.0)
    kstar = client.conditions.check_discrete_kstar(sym_exp)
    assert kstar.id == ConditionId.KstarDiscreteH
    assert kstar.verdict == HOLDS
    assert client.conditions.check_u_monotone(sym_exp).verdict == HOLDS
    assert client.conditions.check_pedersen(sym_exp).verdict == FAILS

    sym_sqrt = catalog_entry("sym_sqrt_pmf").spec
    assert client.conditions.check_pedersen(sym_sqrt).verdict == HOLDS
    assert client.conditions.check_discrete_kstar(sym_sqrt).verdict == FAILS


def test_nonnegative_ratio_matches_symmetrized_pmf(client):
    geo = geometric(0.5)
    direct = client.conditions.check_u_monotone(geo)
    symmetrized = client.conditions.check_u_monotone(symmetrize_pmf(geo))
    assert direct.id == ConditionId.UMonotoneDiscreteS
    assert symmetrized.id == ConditionId.UMonotoneDiscreteH
    assert direct.verdict == symmetrized.verdict
    assert direct.monotone.first_value == pytest.approx(symmetrized.monotone.first_value, rel=1e-12)


def test_irregular_densities_are_inconclusive(client):
    sin_spec = catalog_entry("example2_sin").spec
    assert client.conditions.check_u_monotone(sin_spec).verdict == INCONCLUSIVE
    assert client.conditions.check_condition_L(sin_spec).verdict == INCONCLUSIVE
    ceil_spec = catalog_entry("example2_ceil_value").spec
    report = client.conditions.check_condition_L(ceil_spec)
    assert report.verdict == INCONCLUSIVE
    assert "derivative unavailable" in report.notes[0]


def test_carleman_reports(client):
    assert client.conditions.check_carleman(gaussian(1.0)).verdict == HOLDS
    report = client.conditions.check_carleman(lognormal())
    assert report.id == ConditionId.CarlemanS
    assert report.verdict == FAILS


def test_support_mismatches(client):
    with pytest.raises(DomainError):
        client.conditions.check_kstar(geometric(0.5))
    with pytest.raises(DomainError):
        client.conditions.check_pedersen(geometric(0.5))
    with pytest.raises(DomainError):
        client.conditions.check_discrete_kstar(gaussian(1.0))
    with pytest.raises(ValueError):
        client.conditions.check_krein(gaussian(1.0), direction="Sideways")


@pytest.mark.parametrize("M", [1, 5, 10])
def test_lemma2_decay(client, M):
    for spec in (gaussian(1.0), exponential(1.0), example2(), geometric(0.5)):
        report = client.conditions.lemma2_decay(spec, M)
        assert report.holds
        assert report.details["x_M"] >= spec.threshold


def test_lemma1_growth(client):
    assert client.conditions.lemma1_growth(gaussian(1.0)).holds
    assert client.conditions.lemma1_growth(exponential(1.0)).holds


@pytest.mark.parametrize("name", ["gaussian", "exp_power_0.5", "exp_power_1.5", "example1", "exp_symmetrized"])
def test_lemma3_implication(client, name):
    assert client.conditions.lemma3_implication(catalog_entry(name).spec).holds


def test_lemma3_needs_symmetric_density(client):
    with pytest.raises(DomainError):
        client.conditions.lemma3_implication(exponential(1.0))
