import math
from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, PlainSerializer, model_serializer, model_validator
from typing_extensions import Annotated, Self

# momentdet enumerable types


class MomentEnum(Enum):
    def __str__(self):
        return self.value


class SupportKind(MomentEnum):
    HamburgerSymmetric = "HamburgerSymmetric"
    Stieltjes = "Stieltjes"
    IntegerSymmetric = "IntegerSymmetric"
    NonnegativeInteger = "NonnegativeInteger"

    @property
    def is_continuous(self) -> bool:
        return self in (SupportKind.HamburgerSymmetric, SupportKind.Stieltjes)

    @property
    def is_symmetric(self) -> bool:
        return self in (SupportKind.HamburgerSymmetric, SupportKind.IntegerSymmetric)


class Case(MomentEnum):
    Hamburger = "hamburger"
    Stieltjes = "stieltjes"

    @classmethod
    def of(cls, support: SupportKind) -> "Case":
        return cls.Hamburger if support.is_symmetric else cls.Stieltjes


class DivergenceClass(MomentEnum):
    Convergent = "Convergent"
    Divergent = "Divergent"
    Inconclusive = "Inconclusive"


class ConditionId(MomentEnum):
    KstarH = "KstarH"
    UMonotoneH = "UMonotoneH"
    KstarS = "KstarS"
    UMonotoneS = "UMonotoneS"
    CondL = "CondL"
    ConverseKreinH = "ConverseKreinH"
    ConverseKreinS = "ConverseKreinS"
    KreinH = "KreinH"
    KreinS = "KreinS"
    PedersenDiscrete = "PedersenDiscrete"
    KstarDiscreteH = "KstarDiscreteH"
    UMonotoneDiscreteH = "UMonotoneDiscreteH"
    KstarDiscreteS = "KstarDiscreteS"
    UMonotoneDiscreteS = "UMonotoneDiscreteS"
    CarlemanH = "CarlemanH"
    CarlemanS = "CarlemanS"

    @property
    def display(self) -> str:
        """The numbered display this identifier stands for."""
        return _CONDITION_DISPLAYS[self]


_CONDITION_DISPLAYS = {
    ConditionId.KstarH: "(1)",
    ConditionId.UMonotoneH: "(2)",
    ConditionId.KstarS: "(3)",
    ConditionId.UMonotoneS: "(4)",
    ConditionId.CondL: "(5)",
    ConditionId.ConverseKreinH: "(6H)",
    ConditionId.ConverseKreinS: "(6S)",
    ConditionId.KreinH: "(7H)",
    ConditionId.KreinS: "(7S)",
    ConditionId.PedersenDiscrete: "(8)",
    ConditionId.KstarDiscreteH: "(9)",
    ConditionId.UMonotoneDiscreteH: "(10)",
    ConditionId.KstarDiscreteS: "(11)",
    ConditionId.UMonotoneDiscreteS: "(12)",
    ConditionId.CarlemanH: "Carleman (Hamburger)",
    ConditionId.CarlemanS: "Carleman (Stieltjes)",
}


class ConditionVerdict(MomentEnum):
    Holds = "Holds"
    FailsToHold = "FailsToHold"
    Inconclusive = "Inconclusive"


class RuleId(MomentEnum):
    Thm1 = "Thm1"
    Thm1Star = "Thm1Star"
    Thm2 = "Thm2"
    Thm2Star = "Thm2Star"
    Thm3 = "Thm3"
    Thm4 = "Thm4"
    KreinIndetH = "KreinIndetH"
    KreinIndetS = "KreinIndetS"
    PedersenIndet = "PedersenIndet"
    LinDet = "LinDet"
    Lemma4Domination = "Lemma4Domination"
    MomentDomination = "MomentDomination"
    SquareCorollary = "SquareCorollary"


class Conclusion(MomentEnum):
    Determinate = "Determinate"
    Indeterminate = "Indeterminate"
    Unknown = "Unknown"


class CeilMode(MomentEnum):
    CeilArgument = "CeilArgument"
    CeilValue = "CeilValue"


class DominationKind(MomentEnum):
    Lemma4 = "Lemma4"
    MomentDomination = "MomentDomination"


class TraceCase(MomentEnum):
    Continuous = "continuous"
    Discrete = "discrete"


# Object schemas


def round_real(value: Optional[float]) -> Optional[float]:
    """Fixes floats to 12 significant digits so emitted files are stable."""
    if value is None or not math.isfinite(value):
        return value
    return float(f"{value:.12g}")


Real = Annotated[float, PlainSerializer(round_real, return_type=Optional[float])]


class MomentSchema(BaseModel):
    model_config = ConfigDict(use_enum_values=False, extra="forbid", ser_json_inf_nan="constants")


class TailFitModel(MomentSchema):
    """Fit of ln φ(x) = logC − p·ln x − q·ln ln x on a geometric ladder."""

    logC: Real
    p: Real
    q: Real
    residual_rms: Real = Field(ge=0)
    window: tuple[Real, Real]
    q_determined: bool = True
    power_only: bool = False
    clamped: bool = False


class PartialValue(MomentSchema):
    T: Real
    value: Real


class DivergenceVerdict(MomentSchema):
    klass: DivergenceClass = Field(alias="class")
    value_estimate: Optional[Real] = None
    fit: TailFitModel
    partials: list[PartialValue] = []
    diagnostics: list[str] = []

    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    @model_validator(mode="after")
    def check_class_evidence(self) -> Self:
        if self.klass == DivergenceClass.Convergent:
            assert (
                self.value_estimate is not None
            ), "value_estimate cannot be null when the class is Convergent."
            if self.partials:
                assert (
                    self.value_estimate >= self.partials[-1].value * (1 - 1e-12)
                ), "value_estimate cannot be below the last partial value."
        if self.klass == DivergenceClass.Divergent:
            assert all(
                cur.value > prev.value for prev, cur in zip(self.partials, self.partials[1:])
            ), "partials must be strictly increasing when the class is Divergent."
        if self.klass == DivergenceClass.Inconclusive:
            assert self.diagnostics, "diagnostics cannot be empty when Inconclusive."
        return self


class MonotoneRecord(MomentSchema):
    """Outcome of a scan of u(x) or L(x) over a geometric grid."""

    quantity: str
    effective_threshold: Real
    escalations: int
    strictly_increasing: bool
    growth: Real
    growth_slope: Real
    first_value: Real
    last_value: Real


class ConditionReport(MomentSchema):
    id: ConditionId
    verdict: ConditionVerdict
    evidence: Optional[DivergenceVerdict] = None
    monotone: Optional[MonotoneRecord] = None
    window: tuple[Real, Real]
    notes: list[str] = []

    @property
    def holds(self) -> bool:
        return self.verdict == ConditionVerdict.Holds


class LemmaReport(MomentSchema):
    name: str
    holds: bool
    details: dict[str, Real] = {}
    notes: list[str] = []


class MomentEstimate(MomentSchema):
    """ln m_k with a forwarded (non-rigorous) relative error estimate."""

    k: int
    log_value: Real
    error: Real = Field(ge=0)
    vanishes: bool = False


class MomentTable(MomentSchema):
    spec_id: str
    case: "Case"
    entries: list[MomentEstimate]

    @model_validator(mode="after")
    def check_entries(self) -> Self:
        orders = [e.k for e in self.entries]
        assert orders == sorted(orders), "entries must be sorted by k."
        if self.case == Case.Hamburger:
            assert all(k % 2 == 0 for k in orders), "Hamburger tables hold even orders only."
        assert all(
            math.isfinite(e.log_value) for e in self.entries
        ), "stored ln m_k must be finite."
        return self

    def log_moment(self, k: int) -> float:
        for entry in self.entries:
            if entry.k == k:
                return entry.log_value
        raise KeyError(k)


class TracePoint(MomentSchema):
    k: int
    x: Real
    log_weight: Real


class MaximizerTrace(MomentSchema):
    spec_id: str
    k_range: tuple[int, int]
    points: list[TracePoint]
    k_star: int
    c_tilde: Real
    case: TraceCase
    growth_exponent: Optional[Real] = None
    diagnostics: list[str] = []

    def point(self, k: int) -> TracePoint:
        return self.points[k - self.k_range[0]]


class BoundRow(MomentSchema):
    k: int
    log_moment: Real
    log_bound: Real
    slack: Real


class Step6Row(MomentSchema):
    n: int
    reciprocal_sum: Real
    integral_bound: Real


class Premise(MomentSchema):
    name: str
    verdict: str


INDETERMINACY_RULES = frozenset({RuleId.KreinIndetH, RuleId.KreinIndetS, RuleId.PedersenIndet})


class FiredRule(MomentSchema):
    rule: RuleId
    premises: list[Premise]

    @property
    def conclusion(self) -> Conclusion:
        if self.rule in INDETERMINACY_RULES:
            return Conclusion.Indeterminate
        return Conclusion.Determinate


class DeterminacyVerdict(MomentSchema):
    conclusion: Conclusion
    fired_rules: list[FiredRule] = []
    corollaries: list[str] = []
    conflicts: list[str] = []

    @model_validator(mode="after")
    def check_conclusion(self) -> Self:
        if self.conflicts:
            assert (
                self.conclusion == Conclusion.Unknown
            ), "conclusion must be Unknown when conflicts are present."
        if self.conclusion != Conclusion.Unknown:
            assert any(
                r.conclusion == self.conclusion for r in self.fired_rules
            ), "a decided conclusion needs at least one fired rule."
        return self

    def fired(self, rule: RuleId) -> bool:
        return any(r.rule == rule for r in self.fired_rules)


class DominationRelation(MomentSchema):
    kind: DominationKind
    base: str
    constant: Optional[Real] = None
    probes: int
    label: str


class ExpectedVerdict(MomentSchema):
    conclusion: Conclusion
    rule: RuleId


VERDICT_KEYS = tuple(DeterminacyVerdict.model_fields)


class Analysis(MomentSchema):
    """
    Verdict of one spec with its evidence.

    Serializes flat: the verdict's own keys (conclusion, fired_rules,
    corollaries, conflicts) at the top level, followed by spec, case,
    reports and dominations.
    """

    spec: str
    case: Case
    verdict: DeterminacyVerdict
    reports: list[ConditionReport]
    dominations: list[DominationRelation] = []

    @model_validator(mode="before")
    @classmethod
    def nest_verdict(cls, data):
        if isinstance(data, dict) and "verdict" not in data:
            data = dict(data)
            data["verdict"] = {key: data.pop(key) for key in VERDICT_KEYS if key in data}
        return data

    @model_serializer(mode="wrap")
    def flatten_verdict(self, handler):
        data = handler(self)
        return {**data.pop("verdict"), **data}


MomentTable.model_rebuild()
