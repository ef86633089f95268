import logging
import math
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .core import DeterminacyAPI, DomainError, NumericError, TraceInvariantError
from .distmodel import (
    NONSMOOTH,
    AnySpec,
    log_density_derivative,
    log_mass,
    symmetrize_pmf,
    symmetrize_sqrt,
    u_ratio,
)
from .numerics import locate_peak, log_integral
from .schemas import (
    BoundRow,
    DivergenceVerdict,
    MaximizerTrace,
    Step6Row,
    SupportKind,
    TraceCase,
    TracePoint,
)

logger = logging.getLogger(__name__)


def symmetric_version(spec: AnySpec) -> AnySpec:
    """The symmetric spec whose even moments are the moments of spec."""
    if spec.support == SupportKind.Stieltjes:
        return symmetrize_sqrt(spec)
    if spec.support == SupportKind.NonnegativeInteger:
        return symmetrize_pmf(spec)
    return spec


class Maximizer(DeterminacyAPI):
    def log_weight(self, spec: AnySpec, k: int, x: float) -> float:
        """ln w_k(x) = 2k·ln x + ln f(x) (or ln p_x)."""
        if spec is None:
            raise TypeError("spec cannot be None.")
        if k < 1:
            raise ValueError("k must be at least 1.")
        if x <= 0:
            raise DomainError(f"weights are defined for x > 0; got {x}")
        return 2 * k * math.log(x) + log_mass(spec, x)

    def peak(self, spec: AnySpec, power: float, start: float = 1.0, lo: float = 0.0):
        """
        Location and log value of the maximum of x^power·f(x) on [lo, ∞).

        The golden-section result is polished by a root search on the
        derivative power/x + (ln f)'(x) when the density is smooth there.
        """
        cfg = self.settings.maximizer

        def f(x):
            if x <= 0:
                return -math.inf
            return power * math.log(x) + log_mass(spec, x)

        x, value = locate_peak(f, start, lo=lo, cap=cfg.window_cap, xtol=cfg.xtol)
        if spec.is_pmf:
            return x, value
        left, right = max(x * (1 - cfg.polish_window), lo), x * (1 + cfg.polish_window)
        if spec.has_flag(NONSMOOTH):
            return self._snap_to_jump(spec, f, x, value, lo)

        def slope(t):
            return power / t + log_density_derivative(spec, t)

        try:
            if left > 0 and slope(left) > 0 > slope(right):
                polished = brentq(slope, left, right, xtol=1e-15 * x, rtol=4e-16)
                polished_value = f(polished)
                if polished_value >= value - 1e-12 * max(1.0, abs(value)):
                    return polished, polished_value
        except (ValueError, ZeroDivisionError):
            logger.debug(f"{spec.name}: derivative polish skipped at x={x:.12g}")
        return x, value

    @staticmethod
    def _snap_to_jump(spec: AnySpec, f, x: float, value: float, lo: float):
        """
        Best jump point of a piecewise density within a factor of 2 of x.

        Golden-section search on a sawtooth weight may settle on a neighbouring
        tooth or just short of a jump; the weight peaks at a jump (or its left
        limit or right limit), so every jump in [x/2, 2x] is compared directly.
        """
        if spec.breakpoints is None:
            return x, value
        best = (x, value)
        left = max(x / 2, lo)
        for jump in spec.breakpoints(left, 2 * x):
            if not left <= jump <= 2 * x:
                continue
            for candidate in (float(np.nextafter(jump, 0.0)), jump, float(np.nextafter(jump, math.inf))):
                if candidate < lo:
                    continue
                candidate_value = f(candidate)
                if candidate_value > best[1] or (candidate_value == best[1] and candidate < best[0]):
                    best = (candidate, candidate_value)
        return best

    def find_max_point(
        self, spec: AnySpec, k: int, warm: Optional[float] = None
    ) -> tuple[float, float]:
        """
        Maximizer of w_k on [threshold, ∞), warm-started from x_{k−1} when given.

        For pmfs the scan covers integers j ≥ max(threshold, x_{k−1}) only, so a
        heavier point below the threshold is never reported. Ties between integer
        points resolve to the smallest one.
        """
        if spec is None:
            raise TypeError("spec cannot be None.")
        start = max(spec.threshold, warm or spec.threshold)
        if spec.is_pmf:
            return self._scan_integers(spec, k, int(start))
        x, value = self.peak(spec, 2 * k, start=start, lo=spec.threshold)
        return float(x), float(value)

    def _scan_integers(self, spec: AnySpec, k: int, start: int) -> tuple[float, float]:
        cfg = self.settings.maximizer
        best_j, best = start, -math.inf
        previous = -math.inf
        drops = 0
        j = start
        block = 64
        while True:
            js = np.arange(j, j + block, dtype=np.int64)
            values = 2 * k * np.log(js) + log_mass(spec, js)
            for jj, value in zip(js, values):
                if value > best:
                    best_j, best = int(jj), float(value)
                drops = drops + 1 if value < previous else 0
                previous = value
                if drops >= cfg.patience and int(jj) > best_j:
                    return float(best_j), best
            j += block
            if j > cfg.window_cap:
                raise NumericError(f"no interior maximum for k={k} below j={j}")
            block = min(block * 2, 1 << 14)

    def build_trace(self, spec: AnySpec, k_max: Optional[int] = None) -> MaximizerTrace:
        """Runs the maximizer chain for k = 1..k_max on the symmetric version of spec."""
        if spec is None:
            raise TypeError("spec cannot be None.")
        k_max = k_max or self.settings.maximizer.k_max
        if k_max < 2:
            raise ValueError("k_max must be at least 2.")
        sym = symmetric_version(spec)
        points = []
        warm = None
        for k in range(1, k_max + 1):
            x, value = self.find_max_point(sym, k, warm)
            points.append(TracePoint(k=k, x=x, log_weight=value))
            warm = x

        k_star = self._find_k_star(points)
        x_1 = points[0].x
        w_1 = math.exp(points[0].log_weight)
        x_star = points[k_star - 1].x
        c_tilde = 2 * (1 + w_1 / x_star)
        diagnostics = []
        if k_star > 1:
            diagnostics.append(
                f"k*={k_star}: c̃ keeps w_1(x_1) with x_1={x_1:.6g}, an upper bound since w_1(x_1) ≥ w_1(x_(k+1))"
            )
        growth = None
        tail = [p for p in points if p.k >= k_star]
        if len(tail) >= 3:
            growth = float(np.polyfit(np.log([p.k for p in tail]), np.log([p.x for p in tail]), 1)[0])
        trace = MaximizerTrace(
            spec_id=spec.name,
            k_range=(1, k_max),
            points=points,
            k_star=k_star,
            c_tilde=c_tilde,
            case=TraceCase.Discrete if sym.is_pmf else TraceCase.Continuous,
            growth_exponent=growth,
            diagnostics=diagnostics,
        )
        self._validate(sym, trace)
        logger.debug(f"trace for {spec.name}: k*={k_star}, c̃={c_tilde:.6g}")
        return trace

    @staticmethod
    def _find_k_star(points: list[TracePoint]) -> int:
        """First k whose peak weight exceeds 1 and keeps increasing to the end of the range."""
        k_star = None
        for i in range(len(points) - 1, -1, -1):
            p = points[i]
            if p.log_weight <= 0:
                break
            if i + 1 < len(points) and points[i + 1].log_weight <= p.log_weight:
                break
            k_star = p.k
        if k_star is None or k_star == points[-1].k:
            raise TraceInvariantError(
                "peak weights never exceed 1 while increasing", step="Step 1"
            )
        return k_star

    def _validate(self, sym: AnySpec, trace: MaximizerTrace):
        tail = [p for p in trace.points if p.k >= trace.k_star]
        for prev, cur in zip(tail, tail[1:]):
            if cur.x < prev.x:
                raise TraceInvariantError(
                    f"x_{cur.k}={cur.x:.10g} < x_{prev.k}={prev.x:.10g}", step="Step 2"
                )
        for p in tail:
            exponent = 2 * p.k - float(u_ratio(sym, p.x))
            if not exponent > 0:
                raise TraceInvariantError(
                    f"2k − u(x_k) = {exponent:.6g} at k={p.k}", step="Step 4"
                )

    def verify_step5_bound(self, spec: AnySpec, trace: MaximizerTrace) -> list[BoundRow]:
        """Checks m_{2k} ≤ c̃·x_{k+1}^{2k} for k_star ≤ k < k_max."""
        sym = symmetric_version(spec)
        tol = self.settings.maximizer.bound_tol
        rows = []
        for k in range(trace.k_star, trace.k_range[1]):
            moment = self.client.moments.log_moment(sym, 2 * k)
            bound = math.log(trace.c_tilde) + 2 * k * math.log(trace.point(k + 1).x)
            slack = bound - moment.log_value
            if slack < -(tol + moment.error):
                raise TraceInvariantError(
                    f"ln m_{2 * k} = {moment.log_value:.10g} exceeds ln(c̃·x_{k + 1}^{2 * k}) = {bound:.10g}",
                    step="Step 5",
                )
            rows.append(BoundRow(k=k, log_moment=moment.log_value, log_bound=bound, slack=slack))
        return rows

    def step6_rows(self, spec: AnySpec, trace: MaximizerTrace) -> list[Step6Row]:
        """Σ_{j=k*}^{n} 1/x_j against (1/(2k*+2))·∫_{x_k*}^{x_n} u(x)/x² dx for each n."""
        sym = symmetric_version(spec)
        k_star = trace.k_star
        scale = 1.0 / (2 * k_star + 2)
        x_star = trace.point(k_star).x
        rows = []
        reciprocal = 0.0
        integral = 0.0
        lo = x_star
        for n in range(k_star, trace.k_range[1] + 1):
            x_n = trace.point(n).x
            reciprocal += 1.0 / x_n
            if x_n > lo:
                integral += self._u_over_square(sym, lo, x_n)
                lo = x_n
            rows.append(Step6Row(n=n, reciprocal_sum=reciprocal, integral_bound=scale * integral))
            if reciprocal < scale * integral * (1 - 1e-9):
                raise TraceInvariantError(
                    f"Σ 1/x_j = {reciprocal:.10g} < {scale * integral:.10g} at n={n}", step="Step 6"
                )
        return rows

    @staticmethod
    def _u_over_square(spec: AnySpec, lo: float, hi: float) -> float:
        if spec.is_pmf:
            js = np.arange(int(lo), int(hi), dtype=np.int64)
            return float(np.sum(u_ratio(spec, js) / js.astype(float) ** 2))

        def integrand(x):
            return math.log(float(u_ratio(spec, x))) - 2 * math.log(x)

        value, _ = log_integral(integrand, math.sqrt(lo * hi), lo=lo, hi=hi, octaves=0)
        return math.exp(value)

    def recip_sum_check(self, spec: AnySpec, trace: MaximizerTrace) -> DivergenceVerdict:
        """Classifies Σ 1/x_k and verifies the Step-6 inequality along the trace."""
        rows = self.step6_rows(spec, trace)
        xs = {p.k: p.x for p in trace.points}

        def log_terms(ks):
            return np.array([-math.log(xs[int(k)]) for k in np.atleast_1d(ks)])

        verdict = self.client.tailfit.classify_series(
            log_terms, trace.k_star, n_max=trace.k_range[1], log=True
        )
        verdict.diagnostics.append(f"Step 6 inequality verified on {len(rows)} rows")
        return verdict
