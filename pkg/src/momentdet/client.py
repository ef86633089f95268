import logging
from typing import Callable, Iterable, Optional, Union

from .catalog import catalog
from .conditions import Conditions
from .core import ContradictionError, DomainError, MomentDetException
from .distmodel import AnySpec, CatalogEntry
from .maximizer import Maximizer
from .moments import Moments
from .schemas import (
    Analysis,
    Case,
    ConditionId,
    ConditionReport,
    ConditionVerdict,
    DeterminacyVerdict,
    SupportKind,
)
from .settings import Settings
from .tailfit import TailFit
from .verdict import Verdict

logger = logging.getLogger(__name__)

# --only names that are computed together
PARTNERS = {
    ConditionId.KreinH: ConditionId.ConverseKreinH,
    ConditionId.ConverseKreinH: ConditionId.KreinH,
    ConditionId.KreinS: ConditionId.ConverseKreinS,
    ConditionId.ConverseKreinS: ConditionId.KreinS,
}

BATTERIES = {
    SupportKind.HamburgerSymmetric: (
        ConditionId.KstarH,
        ConditionId.UMonotoneH,
        ConditionId.CondL,
        ConditionId.ConverseKreinH,
        ConditionId.KreinH,
        ConditionId.CarlemanH,
    ),
    SupportKind.Stieltjes: (
        ConditionId.KstarS,
        ConditionId.UMonotoneS,
        ConditionId.CondL,
        ConditionId.ConverseKreinS,
        ConditionId.KreinS,
        ConditionId.CarlemanS,
    ),
    SupportKind.IntegerSymmetric: (
        ConditionId.PedersenDiscrete,
        ConditionId.KstarDiscreteH,
        ConditionId.UMonotoneDiscreteH,
        ConditionId.CarlemanH,
    ),
    SupportKind.NonnegativeInteger: (
        ConditionId.KstarDiscreteS,
        ConditionId.UMonotoneDiscreteS,
        ConditionId.CarlemanS,
    ),
}


class DeterminacyClient:
    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or Settings()
        # API modules
        self.tailfit = TailFit(self)
        self.moments = Moments(self)
        self.maximizer = Maximizer(self)
        self.conditions = Conditions(self)
        self.verdict = Verdict(self)
        self._base_verdicts: dict[tuple, Optional[DeterminacyVerdict]] = {}

    def resolve_case(self, spec: AnySpec, case: Union[Case, str, None] = None) -> Case:
        """case=None or "auto" resolves from the support kind."""
        natural = Case.of(spec.support)
        if case is None or case == "auto":
            return natural
        case = Case(case)
        if case != natural:
            raise DomainError(f"{spec.name} has {spec.support} support; the {case} case does not apply")
        return case

    def battery(self, spec: AnySpec, only: Optional[Iterable[ConditionId]] = None) -> list[ConditionId]:
        ids = list(BATTERIES[spec.support])
        if only is None:
            return ids
        wanted = {ConditionId(c) for c in only}
        wanted |= {PARTNERS[c] for c in wanted if c in PARTNERS}
        unknown = wanted - set(ids)
        if unknown:
            raise DomainError(
                f"{', '.join(sorted(c.value for c in unknown))} not in the battery for {spec.support}"
            )
        return [c for c in ids if c in wanted]

    def _checkers(self, spec: AnySpec) -> dict[ConditionId, Callable[[], list[ConditionReport]]]:
        conditions = self.conditions
        return {
            ConditionId.KstarH: lambda: [conditions.check_kstar(spec)],
            ConditionId.KstarS: lambda: [conditions.check_kstar(spec)],
            ConditionId.UMonotoneH: lambda: [conditions.check_u_monotone(spec)],
            ConditionId.UMonotoneS: lambda: [conditions.check_u_monotone(spec)],
            ConditionId.UMonotoneDiscreteH: lambda: [conditions.check_u_monotone(spec)],
            ConditionId.UMonotoneDiscreteS: lambda: [conditions.check_u_monotone(spec)],
            ConditionId.CondL: lambda: [conditions.check_condition_L(spec)],
            ConditionId.KreinH: lambda: list(conditions.check_krein_pair(spec)),
            ConditionId.KreinS: lambda: list(conditions.check_krein_pair(spec)),
            ConditionId.PedersenDiscrete: lambda: [conditions.check_pedersen(spec)],
            ConditionId.KstarDiscreteH: lambda: [conditions.check_discrete_kstar(spec)],
            ConditionId.KstarDiscreteS: lambda: [conditions.check_discrete_kstar(spec)],
            ConditionId.CarlemanH: lambda: [conditions.check_carleman(spec)],
            ConditionId.CarlemanS: lambda: [conditions.check_carleman(spec)],
        }

    def run_battery(
        self,
        spec: AnySpec,
        case: Union[Case, str, None] = None,
        only: Optional[Iterable[ConditionId]] = None,
    ) -> list[ConditionReport]:
        """
        Runs the condition checkers for the spec's case in battery order.

        A checker that fails numerically yields an Inconclusive report
        carrying the error message instead of aborting the battery.
        """
        if spec is None:
            raise TypeError("spec cannot be None.")
        self.resolve_case(spec, case)
        ids = self.battery(spec, only)
        checkers = self._checkers(spec)
        reports: dict[ConditionId, ConditionReport] = {}
        for cid in ids:
            if cid in reports:
                continue
            # the converse Krein report is produced together with the Krein one
            run = checkers.get(cid) or checkers[PARTNERS[cid]]
            try:
                produced = run()
            except MomentDetException as e:
                logger.warning(f"{spec.name}: {cid} inconclusive: {e}")
                produced = [
                    ConditionReport(
                        id=c,
                        verdict=ConditionVerdict.Inconclusive,
                        window=(float(spec.threshold), float(spec.threshold)),
                        notes=[f"{type(e).__name__}: {e}"],
                    )
                    for c in ([cid, PARTNERS[cid]] if cid in PARTNERS else [cid])
                ]
            for report in produced:
                reports[report.id] = report
        return [reports[c] for c in ids]

    def base_verdict(self, base: AnySpec) -> Optional[DeterminacyVerdict]:
        """Verdict of a transform's base spec, computed once per base."""
        key = (base.name, base.threshold, tuple(sorted(base.params.items())))
        if key not in self._base_verdicts:
            try:
                self._base_verdicts[key] = self.analyze(base).verdict
            except ContradictionError as e:
                logger.error(f"base {base.name} is contradictory: {e}")
                self._base_verdicts[key] = None
        return self._base_verdicts[key]

    def analyze(
        self,
        spec: AnySpec,
        case: Union[Case, str, None] = None,
        only: Optional[Iterable[ConditionId]] = None,
    ) -> Analysis:
        """Full battery, domination checks against the spec's base, and the combined verdict."""
        resolved = self.resolve_case(spec, case)
        reports = self.run_battery(spec, resolved, only)
        dominations = []
        if spec.base is not None:
            base_verdict = self.base_verdict(spec.base)
            relation = self.verdict.check_domination(spec, spec.base)
            if relation is not None:
                dominations.append((relation, base_verdict))
        try:
            verdict = self.verdict.decide(spec, reports, dominations)
        except ContradictionError as e:
            e.analysis = Analysis(
                spec=spec.name,
                case=resolved,
                verdict=e.verdict,
                reports=reports,
                dominations=[r for r, _ in dominations],
            )
            raise
        return Analysis(
            spec=spec.name,
            case=resolved,
            verdict=verdict,
            reports=reports,
            dominations=[r for r, _ in dominations],
        )

    def run_catalog(self, entries: Optional[list[CatalogEntry]] = None) -> list[tuple[CatalogEntry, Analysis]]:
        results = []
        for entry in entries or catalog():
            logger.info(f"catalog: analyzing {entry.name}")
            results.append((entry, self.analyze(entry.spec)))
        return results
