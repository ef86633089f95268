import logging
import math
from typing import Callable, Optional

import numpy as np

from .core import DeterminacyAPI, DomainError
from .distmodel import (
    NONSMOOTH,
    OSCILLATING,
    AnySpec,
    DensitySpec,
    PmfSpec,
    log_density_derivative,
    log_mass,
    u_ratio,
)
from .schemas import (
    Case,
    ConditionId,
    ConditionReport,
    ConditionVerdict,
    DivergenceClass,
    DivergenceVerdict,
    LemmaReport,
    MonotoneRecord,
    SupportKind,
)

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)

STIELTJES_NOTE = (
    "evaluated on [max(threshold, e), ∞) only; the class is decided by the tail"
)

KSTAR_IDS = {Case.Hamburger: ConditionId.KstarH, Case.Stieltjes: ConditionId.KstarS}
KREIN_IDS = {Case.Hamburger: ConditionId.KreinH, Case.Stieltjes: ConditionId.KreinS}
CONVERSE_KREIN_IDS = {
    Case.Hamburger: ConditionId.ConverseKreinH,
    Case.Stieltjes: ConditionId.ConverseKreinS,
}
U_MONOTONE_IDS = {
    SupportKind.HamburgerSymmetric: ConditionId.UMonotoneH,
    SupportKind.Stieltjes: ConditionId.UMonotoneS,
    SupportKind.IntegerSymmetric: ConditionId.UMonotoneDiscreteH,
    SupportKind.NonnegativeInteger: ConditionId.UMonotoneDiscreteS,
}
DISCRETE_KSTAR_IDS = {
    SupportKind.IntegerSymmetric: ConditionId.KstarDiscreteH,
    SupportKind.NonnegativeInteger: ConditionId.KstarDiscreteS,
}


def _verdict_when(evidence: DivergenceVerdict, holds_on: DivergenceClass) -> ConditionVerdict:
    if evidence.klass == DivergenceClass.Inconclusive:
        return ConditionVerdict.Inconclusive
    if evidence.klass == holds_on:
        return ConditionVerdict.Holds
    return ConditionVerdict.FailsToHold


def _window(evidence: DivergenceVerdict, start: float) -> tuple[float, float]:
    end = evidence.partials[-1].T if evidence.partials else evidence.fit.window[1]
    return (start, end)


class Conditions(DeterminacyAPI):
    """Checkers for the integral, series and monotone-ratio conditions."""

    # continuous integral conditions

    def _continuous_case(self, spec: AnySpec, case: Optional[Case]) -> Case:
        if spec is None:
            raise TypeError("spec cannot be None.")
        if spec.is_pmf:
            raise DomainError(f"{spec.name} is a pmf; this condition needs a density")
        natural = Case.of(spec.support)
        case = Case(case) if case is not None else natural
        if case != natural:
            raise DomainError(f"{spec.name} has {spec.support} support, not the {case} case")
        return case

    @staticmethod
    def _neg_log_density(spec: DensitySpec, case: Case) -> Callable:
        """−ln f(x) (Hamburger) or −ln g(x²) (Stieltjes)."""
        if case == Case.Hamburger:
            return lambda x: -log_mass(spec, x)
        return lambda x: -log_mass(spec, np.square(x))

    def check_kstar(self, spec: DensitySpec, case: Optional[Case] = None) -> ConditionReport:
        """K* divergence: ∫ (−ln f(x))/(x² ln x) dx = ∞, with g(x²) in the Stieltjes case."""
        case = self._continuous_case(spec, case)
        a = max(spec.threshold, math.e)
        neg_log = self._neg_log_density(spec, case)

        def integrand(x):
            x = np.asarray(x, dtype=float)
            return neg_log(x) / (x * x * np.log(x))

        evidence = self.client.tailfit.classify_integral(integrand, a)
        notes = [STIELTJES_NOTE] if case == Case.Stieltjes else []
        return ConditionReport(
            id=KSTAR_IDS[case],
            verdict=_verdict_when(evidence, DivergenceClass.Divergent),
            evidence=evidence,
            window=_window(evidence, a),
            notes=notes,
        )

    def check_krein_pair(
        self, spec: DensitySpec, case: Optional[Case] = None
    ) -> tuple[ConditionReport, ConditionReport]:
        """(Krein, converse Krein) reports sharing one classification of the log integral."""
        case = self._continuous_case(spec, case)
        a = max(spec.threshold, math.e)
        neg_log = self._neg_log_density(spec, case)

        def integrand(x):
            x = np.asarray(x, dtype=float)
            return neg_log(x) / (1 + x * x)

        evidence = self.client.tailfit.classify_integral(integrand, a)
        notes = [STIELTJES_NOTE] if case == Case.Stieltjes else []
        krein = ConditionReport(
            id=KREIN_IDS[case],
            verdict=_verdict_when(evidence, DivergenceClass.Convergent),
            evidence=evidence,
            window=_window(evidence, a),
            notes=notes,
        )
        converse = ConditionReport(
            id=CONVERSE_KREIN_IDS[case],
            verdict=_verdict_when(evidence, DivergenceClass.Divergent),
            evidence=evidence,
            window=_window(evidence, a),
            notes=notes,
        )
        return krein, converse

    def check_krein(
        self, spec: DensitySpec, case: Optional[Case] = None, direction: str = "Finite"
    ) -> ConditionReport:
        """direction="Finite" checks Krein's condition, "Infinite" its converse."""
        if direction not in ("Finite", "Infinite"):
            raise ValueError("direction must be 'Finite' or 'Infinite'.")
        krein, converse = self.check_krein_pair(spec, case)
        return krein if direction == "Finite" else converse

    # monotone ratios

    def _grid(self, start: float, discrete: bool, extra_span: int = 0) -> np.ndarray:
        cfg = self.settings.conditions
        end = start * 1.5 ** (cfg.grid_span + extra_span)
        if not discrete:
            return np.geomspace(start, end, cfg.grid_points)
        start = int(math.ceil(start))
        dense_end = max(start, min(cfg.discrete_dense_limit, int(end)))
        dense = np.arange(start, dense_end + 1, dtype=np.int64)
        sparse = np.floor(np.geomspace(dense_end, end, cfg.grid_points)).astype(np.int64)
        return np.union1d(dense, sparse)

    def _scan(
        self,
        ratio: Callable[[np.ndarray], np.ndarray],
        threshold: float,
        discrete: bool,
        quantity: str,
    ) -> tuple[ConditionVerdict, MonotoneRecord, list[str]]:
        """Monotone-to-infinity scan with threshold escalation."""
        cfg = self.settings.conditions
        start = threshold
        escalations = 0
        while True:
            grid = self._grid(start, discrete)
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                values = np.asarray(ratio(grid), dtype=float)
            if np.any(np.isnan(values)):
                raise DomainError(f"{quantity} undefined on the grid from {start:.6g}")
            drops = np.diff(values) < -cfg.monotone_tol * np.maximum(1.0, np.abs(values[:-1]))
            if not drops.any():
                break
            if start * 2 > cfg.escalation_cap:
                break
            start = math.ceil(start * 2) if discrete else start * 2
            escalations += 1
            logger.debug(f"{quantity} decreases beyond {start / 2:.6g}; escalating to {start:.6g}")

        increasing = not drops.any()
        half = len(grid) // 2
        lnln = np.log(np.log(grid[half:].astype(float)))
        slope = float(np.polyfit(lnln, values[half:], 1)[0])
        growth = float(values[-1] - values[0])
        record = MonotoneRecord(
            quantity=quantity,
            effective_threshold=float(start),
            escalations=escalations,
            strictly_increasing=increasing,
            growth=growth,
            growth_slope=slope,
            first_value=float(values[0]),
            last_value=float(values[-1]),
        )
        notes = []
        if not increasing:
            notes.append(f"{quantity} decreases on every grid up to threshold {start:.6g}")
            return ConditionVerdict.FailsToHold, record, notes
        if slope > 0 or growth >= cfg.growth_margin:
            return ConditionVerdict.Holds, record, notes
        notes.append(f"{quantity} increases but appears to plateau (growth {growth:.4g})")
        return ConditionVerdict.Inconclusive, record, notes

    def _ratio(self, spec: AnySpec) -> tuple[Callable, str]:
        if spec.support == SupportKind.NonnegativeInteger:
            # (12) uses −ln(½p_n)/ln n
            return (lambda n: (LN2 - log_mass(spec, n)) / np.log(n.astype(float))), "-ln(p_n/2)/ln n"
        return (lambda x: u_ratio(spec, x)), "u"

    def check_u_monotone(self, spec: AnySpec) -> ConditionReport:
        """u(x) = −ln f(x)/ln x increases to ∞ beyond the (possibly escalated) threshold."""
        if spec is None:
            raise TypeError("spec cannot be None.")
        ratio, quantity = self._ratio(spec)
        verdict, record, notes = self._scan(ratio, spec.threshold, spec.is_pmf, quantity)
        if spec.has_flag(OSCILLATING):
            verdict = ConditionVerdict.Inconclusive
            notes.append("oscillating density: the monotone ratio condition cannot be considered")
        if spec.support == SupportKind.Stieltjes:
            notes.append(STIELTJES_NOTE)
        return ConditionReport(
            id=U_MONOTONE_IDS[spec.support],
            verdict=verdict,
            monotone=record,
            window=(record.effective_threshold, record.effective_threshold * 1.5 ** self.settings.conditions.grid_span),
            notes=notes,
        )

    def _L(self, spec: DensitySpec) -> Callable:
        step = self.settings.conditions.derivative_step

        def L(xs):
            return np.array([-x * log_density_derivative(spec, float(x), step) for x in xs])

        return L

    def check_condition_L(self, spec: DensitySpec) -> ConditionReport:
        """L(x) = −x·f′(x)/f(x) increases to ∞."""
        if spec is None:
            raise TypeError("spec cannot be None.")
        if spec.is_pmf:
            raise DomainError(f"{spec.name} is a pmf; condition (L) needs a density")
        cfg = self.settings.conditions
        window = (spec.threshold, spec.threshold * 1.5**cfg.grid_span)
        reason = None
        if spec.has_flag(NONSMOOTH):
            reason = "derivative unavailable: density is not differentiable"
        elif spec.has_flag(OSCILLATING):
            reason = "oscillating density: condition (L) cannot be considered"
        elif spec.log_density_derivative is None and not cfg.numeric_derivative:
            reason = "derivative unavailable and numeric differentiation disabled"
        if reason is not None:
            return ConditionReport(
                id=ConditionId.CondL,
                verdict=ConditionVerdict.Inconclusive,
                window=window,
                notes=[reason],
            )
        verdict, record, notes = self._scan(self._L(spec), spec.threshold, False, "L")
        if spec.log_density_derivative is None:
            notes.append("derivative by central differences")
        if spec.support == SupportKind.Stieltjes:
            notes.append("condition (L) applied to the density g itself")
        return ConditionReport(
            id=ConditionId.CondL,
            verdict=verdict,
            monotone=record,
            window=(record.effective_threshold, window[1]),
            notes=notes,
        )

    # discrete series conditions

    def _pmf(self, spec: PmfSpec, *kinds: SupportKind) -> PmfSpec:
        if spec is None:
            raise TypeError("spec cannot be None.")
        if not spec.is_pmf or spec.support not in kinds:
            raise DomainError(f"{spec.name} does not have {' or '.join(str(k) for k in kinds)} support")
        return spec

    def check_discrete_kstar(self, spec: PmfSpec, case: Optional[Case] = None) -> ConditionReport:
        """Σ (−ln p_j)/(j² ln |j|) = ∞ over |j| ≥ j₀ (or n ≥ n₀ on ℕ₀)."""
        self._pmf(spec, SupportKind.IntegerSymmetric, SupportKind.NonnegativeInteger)
        if case is not None and Case(case) != Case.of(spec.support):
            raise DomainError(f"{spec.name} has {spec.support} support, not the {case} case")
        fold = 2.0 if spec.support == SupportKind.IntegerSymmetric else 1.0

        def terms(j):
            jf = j.astype(float)
            return fold * -log_mass(spec, j) / (jf * jf * np.log(jf))

        evidence = self.client.tailfit.classify_series(terms, spec.threshold)
        notes = ["sum over ±j folded to 2·Σ_{j≥j0}"] if fold == 2.0 else []
        return ConditionReport(
            id=DISCRETE_KSTAR_IDS[spec.support],
            verdict=_verdict_when(evidence, DivergenceClass.Divergent),
            evidence=evidence,
            window=_window(evidence, spec.threshold),
            notes=notes,
        )

    def check_pedersen(self, spec: PmfSpec) -> ConditionReport:
        """Σ_j (−ln p_j)/(1+j²) < ∞ over ℤ: the tail is classified, the head summed exactly."""
        self._pmf(spec, SupportKind.IntegerSymmetric)
        t = spec.threshold
        head_j = np.arange(0, t, dtype=np.int64)
        head_terms = -log_mass(spec, head_j) / (1.0 + head_j.astype(float) ** 2)
        head = float(head_terms[0] + 2 * np.sum(head_terms[1:]))

        def terms(j):
            jf = j.astype(float)
            return 2 * -log_mass(spec, j) / (1 + jf * jf)

        evidence = self.client.tailfit.classify_series(terms, t, head=head)
        return ConditionReport(
            id=ConditionId.PedersenDiscrete,
            verdict=_verdict_when(evidence, DivergenceClass.Convergent),
            evidence=evidence,
            window=_window(evidence, t),
            notes=[f"head Σ_{{|j|<{t}}} = {head:.6g} added to partial sums"],
        )

    def check_carleman(self, spec: AnySpec, k_max: Optional[int] = None) -> ConditionReport:
        if spec is None:
            raise TypeError("spec cannot be None.")
        case = Case.of(spec.support)
        evidence = self.client.moments.carleman_check(spec, case, k_max)
        verdict = _verdict_when(evidence, DivergenceClass.Divergent)
        notes = []
        if verdict == ConditionVerdict.FailsToHold:
            notes.append("Carleman sum converges on the computed range: condition not established")
        return ConditionReport(
            id=ConditionId.CarlemanH if case == Case.Hamburger else ConditionId.CarlemanS,
            verdict=verdict,
            evidence=evidence,
            window=(float(evidence.partials[0].T), float(evidence.partials[-1].T)),
            notes=notes,
        )

    # lemma cross-checks

    def lemma1_growth(self, spec: AnySpec) -> LemmaReport:
        """u (and L where available) keep growing when the grid end moves out by 1.5¹⁰."""
        cfg = self.settings.conditions
        quantities = {"u": self._ratio(spec)[0]}
        if not spec.is_pmf and not (spec.has_flag(NONSMOOTH) or spec.has_flag(OSCILLATING)):
            quantities["L"] = self._L(spec)
        details = {}
        notes = []
        for name, fn in quantities.items():
            base = fn(self._grid(spec.threshold, spec.is_pmf))
            extended = fn(self._grid(spec.threshold, spec.is_pmf, extra_span=10))
            growth = float(np.max(extended) - np.max(base))
            details[f"{name}_growth"] = growth
            if growth < cfg.growth_margin:
                notes.append(f"{name} grows by only {growth:.4g}: plateau suspected")
        return LemmaReport(name="lemma1_growth", holds=not notes, details=details, notes=notes)

    def lemma2_decay(self, spec: AnySpec, M: float) -> LemmaReport:
        """Finds a grid point x_M beyond which ln f(x) < −M·ln x on every later grid point."""
        grid = self._grid(spec.threshold, spec.is_pmf)
        below = log_mass(spec, grid) < -M * np.log(grid.astype(float))
        tail_ok = np.flip(np.logical_and.accumulate(np.flip(below)))
        if not tail_ok.any() or tail_ok.sum() < 2:
            return LemmaReport(
                name="lemma2_decay",
                holds=False,
                details={"M": M},
                notes=[f"density not below x^-{M:g} at the end of the grid"],
            )
        x_m = float(grid[np.argmax(tail_ok)])
        return LemmaReport(name="lemma2_decay", holds=True, details={"M": M, "x_M": x_m})

    def lemma3_implication(self, spec: DensitySpec) -> LemmaReport:
        """K*-divergence implies the converse Krein condition once f < 1 beyond max(x₀, 4)."""
        if spec is None or spec.support != SupportKind.HamburgerSymmetric:
            raise DomainError("the implication is stated for symmetric densities")
        shifted = spec.model_copy(update={"threshold": max(spec.threshold, 4.0)})
        grid = self._grid(shifted.threshold, False)
        if np.any(log_mass(shifted, grid) >= 0):
            return LemmaReport(
                name="lemma3_implication", holds=True, notes=["f ≥ 1 on the grid: not applicable"]
            )
        kstar = self.check_kstar(shifted)
        _, converse = self.check_krein_pair(shifted)
        notes = [f"K*: {kstar.verdict}", f"converse Krein: {converse.verdict}"]
        if kstar.holds and converse.verdict == ConditionVerdict.Inconclusive:
            notes.append("converse Krein inconclusive: exempt")
            return LemmaReport(name="lemma3_implication", holds=True, notes=notes)
        holds = not (kstar.holds and converse.verdict == ConditionVerdict.FailsToHold)
        return LemmaReport(name="lemma3_implication", holds=holds, notes=notes)
