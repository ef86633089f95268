import math

import pytest

from context import momentdet  # noqa: F401
from momentdet.catalog import catalog_entry, example2, exponential, gaussian, lognormal, symmetrize_sqrt
from momentdet.core import ContradictionError
from momentdet.schemas import (
    Conclusion,
    ConditionId,
    ConditionReport,
    ConditionVerdict,
    DeterminacyVerdict,
    DominationKind,
    DominationRelation,
    FiredRule,
    RuleId,
)
from momentdet.verdict import regular_head

HOLDS = ConditionVerdict.Holds
FAILS = ConditionVerdict.FailsToHold
INCONCLUSIVE = ConditionVerdict.Inconclusive


def report(cid: ConditionId, verdict: ConditionVerdict) -> ConditionReport:
    return ConditionReport(id=cid, verdict=verdict, window=(2.0, 3.0))


def battery(**verdicts: ConditionVerdict) -> list[ConditionReport]:
    return [report(ConditionId(name), verdict) for name, verdict in verdicts.items()]


def test_theorem1_fires_with_square_corollary(client):
    verdict = client.verdict.decide(gaussian(1.0), battery(KstarH=HOLDS, UMonotoneH=HOLDS))
    assert verdict.conclusion == Conclusion.Determinate
    assert verdict.fired(RuleId.Thm1)
    assert verdict.fired(RuleId.Thm1Star)
    assert any("X² determinate" in c for c in verdict.corollaries)


def test_missing_or_inconclusive_premises_give_unknown(client):
    assert client.verdict.decide(gaussian(1.0), battery(KstarH=HOLDS)).conclusion == Conclusion.Unknown
    verdict = client.verdict.decide(gaussian(1.0), battery(KstarH=HOLDS, UMonotoneH=INCONCLUSIVE))
    assert verdict.conclusion == Conclusion.Unknown
    assert verdict.fired_rules == []


def test_failed_determinacy_condition_never_implies_indeterminacy(client):
    verdict = client.verdict.decide(
        gaussian(1.0), battery(KstarH=FAILS, UMonotoneH=FAILS, ConverseKreinH=FAILS, CondL=FAILS)
    )
    assert verdict.conclusion == Conclusion.Unknown


def test_krein_indeterminacy(client):
    verdict = client.verdict.decide(lognormal(), battery(KreinS=HOLDS, ConverseKreinS=FAILS))
    assert verdict.conclusion == Conclusion.Indeterminate
    assert verdict.fired(RuleId.KreinIndetS)
    assert verdict.corollaries == []


def test_lin_rule(client):
    spec = catalog_entry("example1").spec
    verdict = client.verdict.decide(spec, battery(KstarH=FAILS, ConverseKreinH=HOLDS, CondL=HOLDS))
    assert verdict.conclusion == Conclusion.Determinate
    assert [r.rule for r in verdict.fired_rules] == [RuleId.LinDet]


def test_nonsmooth_density_blocks_theorem2(client):
    spec = catalog_entry("example2_ceil_value").spec
    verdict = client.verdict.decide(spec, battery(KstarS=HOLDS, UMonotoneS=HOLDS))
    assert verdict.conclusion == Conclusion.Unknown


def test_regular_head():
    assert regular_head(gaussian(1.0))
    assert regular_head(example2())
    assert regular_head(catalog_entry("example1").spec)


def test_conflict_raises_with_unknown_verdict(client):
    with pytest.raises(ContradictionError) as e:
        client.verdict.decide(gaussian(1.0), battery(KstarH=HOLDS, UMonotoneH=HOLDS, KreinH=HOLDS))
    verdict = e.value.verdict
    assert verdict.conclusion == Conclusion.Unknown
    assert verdict.conflicts
    assert "Thm1" in verdict.conflicts[0] and "KreinIndetH" in verdict.conflicts[0]


def test_strengthening_premises_never_flips_a_decision(client):
    spec = gaussian(1.0)
    weak = client.verdict.decide(spec, battery(KstarH=HOLDS, UMonotoneH=INCONCLUSIVE, KreinH=FAILS))
    strong = client.verdict.decide(spec, battery(KstarH=HOLDS, UMonotoneH=HOLDS, KreinH=FAILS))
    assert weak.conclusion == Conclusion.Unknown
    assert strong.conclusion == Conclusion.Determinate


def test_verdict_invariants_are_validated():
    with pytest.raises(ValueError):
        DeterminacyVerdict(conclusion=Conclusion.Determinate)
    with pytest.raises(ValueError):
        DeterminacyVerdict(
            conclusion=Conclusion.Determinate,
            fired_rules=[FiredRule(rule=RuleId.Thm1, premises=[])],
            conflicts=["x"],
        )


def test_domination_propagates_from_carleman_determinate_base(client):
    base_verdict = client.verdict.decide(example2(), battery(KstarS=HOLDS, UMonotoneS=HOLDS))
    relation = DominationRelation(kind=DominationKind.Lemma4, base="example2", probes=128, label="grid-verified")
    spec = catalog_entry("example2_ceil_value").spec
    verdict = client.verdict.decide(spec, [], [(relation, base_verdict)])
    assert verdict.fired(RuleId.Lemma4Domination)

    lin_only = DeterminacyVerdict(
        conclusion=Conclusion.Determinate,
        fired_rules=[FiredRule(rule=RuleId.LinDet, premises=[])],
    )
    assert client.verdict.decide(spec, [], [(relation, lin_only)]).conclusion == Conclusion.Unknown


@pytest.mark.parametrize("name", ["example2_ceil_value", "example2_ceil_argument"])
def test_ceiling_variants_dominate_pointwise(client, name):
    entry = catalog_entry(name)
    relation = client.verdict.check_domination(entry.spec, entry.spec.base)
    assert relation.kind == DominationKind.Lemma4
    assert "grid-verified" in relation.label
    assert relation.probes == 128


def test_sin_perturbation_dominates_by_moments(client):
    entry = catalog_entry("example2_sin")
    relation = client.verdict.check_domination(entry.spec, entry.spec.base)
    assert relation.kind == DominationKind.MomentDomination
    # g̃ = c̃·g·(1 + a·sin x) ≤ (1 + a)·c̃·g with a = 1/2
    c_tilde = math.exp(entry.spec.log_c)
    assert 0 < relation.constant <= 1.5 * c_tilde * (1 + 1e-6)
    assert relation.constant <= 2 * c_tilde


def test_floor_discretization_dominates_by_moments(client):
    entry = catalog_entry("example2_floor")
    relation = client.verdict.check_domination(entry.spec, entry.spec.base)
    assert relation.kind == DominationKind.MomentDomination
    assert relation.constant <= 1.0 + 1e-9


def test_no_domination_across_cases(client):
    assert client.verdict.check_domination(gaussian(1.0), exponential(1.0)) is None


def test_gaussian_not_claimed_against_symmetrized_exponential(client):
    # u_gauss(x) = x²/(2 ln x) stays below u_h(x) = x²/ln x − 1 far out
    assert client.verdict.check_domination(gaussian(1.0), symmetrize_sqrt(exponential(1.0))) is None
