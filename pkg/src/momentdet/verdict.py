import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .core import ContradictionError, DeterminacyAPI, MomentDetException
from .distmodel import NONSMOOTH, AnySpec, log_mass, raw_u_ratio, u_ratio
from .schemas import (
    Case,
    Conclusion,
    ConditionId,
    ConditionReport,
    ConditionVerdict,
    DeterminacyVerdict,
    DominationKind,
    DominationRelation,
    FiredRule,
    Premise,
    RuleId,
    SupportKind,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Rule:
    """A theorem as data: every premise group needs one member that Holds."""

    id: RuleId
    conclusion: Conclusion
    supports: tuple[SupportKind, ...]
    premises: tuple[tuple[ConditionId, ...], ...]
    smooth_tail: bool = False
    regular_head: bool = False
    square_corollary: Optional[str] = None
    notes: tuple[str, ...] = field(default=())


DET = Conclusion.Determinate
INDET = Conclusion.Indeterminate
H = SupportKind.HamburgerSymmetric
S = SupportKind.Stieltjes

RULES = (
    Rule(RuleId.Thm1, DET, (H,), ((ConditionId.KstarH,), (ConditionId.UMonotoneH,)),
         smooth_tail=True, regular_head=True, square_corollary="X² determinate on ℝ₊"),
    Rule(RuleId.Thm1Star, DET, (H,), ((ConditionId.KstarH,), (ConditionId.UMonotoneH,)),
         smooth_tail=True, square_corollary="X² determinate on ℝ₊"),
    Rule(RuleId.Thm2, DET, (S,), ((ConditionId.KstarS,), (ConditionId.UMonotoneS,)),
         smooth_tail=True, regular_head=True),
    Rule(RuleId.Thm2Star, DET, (S,), ((ConditionId.KstarS,), (ConditionId.UMonotoneS,)),
         smooth_tail=True),
    Rule(RuleId.Thm3, DET, (SupportKind.IntegerSymmetric,),
         ((ConditionId.KstarDiscreteH,), (ConditionId.UMonotoneDiscreteH,)),
         square_corollary="X² determinate on ℕ₀"),
    Rule(RuleId.Thm4, DET, (SupportKind.NonnegativeInteger,),
         ((ConditionId.KstarDiscreteS,), (ConditionId.UMonotoneDiscreteS,)),
         square_corollary="Y² determinate on ℕ₀"),
    Rule(RuleId.KreinIndetH, INDET, (H,), ((ConditionId.KreinH,),)),
    Rule(RuleId.KreinIndetS, INDET, (S,), ((ConditionId.KreinS,),)),
    Rule(RuleId.PedersenIndet, INDET, (SupportKind.IntegerSymmetric,),
         ((ConditionId.PedersenDiscrete,),)),
    Rule(RuleId.LinDet, DET, (H, S),
         ((ConditionId.ConverseKreinH, ConditionId.ConverseKreinS), (ConditionId.CondL,)),
         notes=("condition (L) read on the original density",)),
)

# rules whose conclusion comes with Carleman's condition
CARLEMAN_RULES = {
    RuleId.Thm1,
    RuleId.Thm1Star,
    RuleId.Thm2,
    RuleId.Thm2Star,
    RuleId.Thm3,
    RuleId.Thm4,
    RuleId.Lemma4Domination,
    RuleId.MomentDomination,
}


def regular_head(spec: AnySpec, probes: int = 32) -> bool:
    """Finite (or zero) density on a probe grid of (0, threshold)."""
    if spec.is_pmf:
        return True
    grid = np.geomspace(1e-6 * spec.threshold, spec.threshold * (1 - 1e-9), probes)
    try:
        values = np.asarray(log_mass(spec, grid), dtype=float)
    except MomentDetException:
        return False
    return bool(np.all(np.isfinite(values) | np.isneginf(values)))


def carleman_determinate(verdict: Optional[DeterminacyVerdict]) -> bool:
    if verdict is None or verdict.conclusion != Conclusion.Determinate:
        return False
    return any(r.rule in CARLEMAN_RULES for r in verdict.fired_rules)


class Verdict(DeterminacyAPI):
    """Combines condition reports into a determinacy verdict."""

    def decide(
        self,
        spec: AnySpec,
        battery: Iterable[ConditionReport],
        dominations: Iterable[tuple[DominationRelation, DeterminacyVerdict]] = (),
    ) -> DeterminacyVerdict:
        """
        Evaluates every rule (no short-circuit) and returns the combined verdict.

        Raises ContradictionError, carrying the Unknown verdict, when rules
        with opposite conclusions both fire.
        """
        if spec is None:
            raise TypeError("spec cannot be None.")
        reports = {r.id: r for r in battery}
        fired = []
        for rule in RULES:
            result = self._fire(spec, rule, reports)
            if result is not None:
                fired.append(result)
        for relation, base_verdict in dominations:
            result = self._fire_domination(relation, base_verdict)
            if result is not None:
                fired.append(result)

        corollaries = []
        for result in fired:
            rule = next((r for r in RULES if r.id == result.rule), None)
            if rule is not None and rule.square_corollary:
                corollaries.append(f"{RuleId.SquareCorollary}: {rule.square_corollary} (via {rule.id})")

        conclusions = {r.conclusion for r in fired}
        conflicts = []
        if DET in conclusions and INDET in conclusions:
            det = ", ".join(str(r.rule) for r in fired if r.conclusion == DET)
            indet = ", ".join(str(r.rule) for r in fired if r.conclusion == INDET)
            conflicts.append(f"Determinate via {det} contradicts Indeterminate via {indet}")
        if conflicts or not conclusions:
            conclusion = Conclusion.Unknown
        else:
            conclusion = conclusions.pop()

        verdict = DeterminacyVerdict(
            conclusion=conclusion,
            fired_rules=fired,
            corollaries=corollaries if conclusion == DET else [],
            conflicts=conflicts,
        )
        if conflicts:
            logger.error(f"{spec.name}: {conflicts[0]}")
            raise ContradictionError(conflicts[0], verdict=verdict)
        logger.info(f"{spec.name}: {conclusion} ({', '.join(str(r.rule) for r in fired) or 'no rule fired'})")
        return verdict

    @staticmethod
    def _fire(spec: AnySpec, rule: Rule, reports: dict) -> Optional[FiredRule]:
        if spec.support not in rule.supports:
            return None
        premises = []
        for group in rule.premises:
            present = [reports[c] for c in group if c in reports]
            holding = [r for r in present if r.verdict == ConditionVerdict.Holds]
            if not holding:
                return None
            premises.append(Premise(name=holding[0].id.value, verdict=str(holding[0].verdict)))
        if rule.smooth_tail:
            if spec.has_flag(NONSMOOTH):
                return None
            premises.append(Premise(name="continuous on [threshold, ∞)", verdict="Holds"))
        if rule.regular_head:
            if not regular_head(spec):
                return None
            premises.append(Premise(name="regular on (0, threshold)", verdict="Holds"))
        for note in rule.notes:
            premises.append(Premise(name=note, verdict="Holds"))
        return FiredRule(rule=rule.id, premises=premises)

    @staticmethod
    def _fire_domination(
        relation: DominationRelation, base_verdict: Optional[DeterminacyVerdict]
    ) -> Optional[FiredRule]:
        if not carleman_determinate(base_verdict):
            return None
        base_rules = ", ".join(str(r.rule) for r in base_verdict.fired_rules)
        premises = [
            Premise(name=f"{relation.base} Determinate via {base_rules}", verdict="Holds"),
            Premise(name=relation.label, verdict="Holds"),
        ]
        rule = RuleId.Lemma4Domination if relation.kind == DominationKind.Lemma4 else RuleId.MomentDomination
        return FiredRule(rule=rule, premises=premises)

    def check_domination(self, candidate: AnySpec, base: AnySpec) -> Optional[DominationRelation]:
        """
        Lemma-4 pointwise domination of u on a geometric grid, falling back to
        domination of the moment sequence by a fitted constant.
        """
        if candidate is None or base is None:
            raise TypeError("candidate and base cannot be None.")
        if Case.of(candidate.support) != Case.of(base.support):
            return None
        relation = None
        if candidate.is_pmf == base.is_pmf:
            relation = self._pointwise(candidate, base)
        if relation is None:
            try:
                relation = self._moment_route(candidate, base)
            except MomentDetException as e:
                logger.warning(f"moment domination of {candidate.name} by {base.name} not checked: {e}")
        return relation

    def _pointwise(self, candidate: AnySpec, base: AnySpec) -> Optional[DominationRelation]:
        cfg = self.settings.verdict
        a = max(candidate.threshold, base.threshold)
        grid = np.geomspace(a, a * cfg.domination_span, cfg.domination_grid)
        if candidate.is_pmf:
            grid = np.unique(np.floor(grid).astype(np.int64))
        with np.errstate(invalid="ignore"):
            dominated = raw_u_ratio(candidate, grid) >= u_ratio(base, grid) - 1e-12
        if not np.all(dominated):
            return None
        return DominationRelation(
            kind=DominationKind.Lemma4,
            base=base.name,
            probes=len(grid),
            label=f"grid-verified u ≥ u_base on [{a:.6g}, {a * cfg.domination_span:.6g}]",
        )

    def _moment_route(self, candidate: AnySpec, base: AnySpec) -> Optional[DominationRelation]:
        cfg = self.settings.verdict
        step = 2 if candidate.support.is_symmetric else 1
        orders = np.arange(1, cfg.domination_orders + 1)
        moments = self.client.moments
        d = np.array(
            [
                moments.log_moment(candidate, step * int(n)).log_value
                - moments.log_moment(base, step * int(n)).log_value
                for n in orders
            ]
        )
        half = len(orders) // 2
        slope = float(np.polyfit(orders[half:], d[half:], 1)[0])
        if slope > cfg.domination_slope_tol:
            logger.debug(f"{candidate.name}: moment ratio to {base.name} grows (slope {slope:.4g})")
            return None
        constant = math.exp(float(np.max(d)))
        return DominationRelation(
            kind=DominationKind.MomentDomination,
            base=base.name,
            constant=constant,
            probes=len(orders),
            label=f"m_n ≤ {constant:.6g}·m_n(base) for n ≤ {cfg.domination_orders}",
        )
