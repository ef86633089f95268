import logging
import math
from typing import Callable, Optional

import numpy as np

from .core import DeterminacyAPI, DomainError, NumericError
from .numerics import geometric_ladder, integer_ladder, log_integral
from .schemas import DivergenceClass, DivergenceVerdict, PartialValue, TailFitModel

logger = logging.getLogger(__name__)

Sampler = Callable[[np.ndarray], np.ndarray]


def _evaluate(sampler: Sampler, xs: np.ndarray) -> np.ndarray:
    """Calls sampler on the whole ladder, falling back to pointwise calls."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        values = np.asarray(sampler(xs), dtype=float)
        if values.shape != xs.shape:
            values = np.array([float(sampler(x)) for x in xs])
    return values


class TailFit(DeterminacyAPI):
    """
    Convergence classification of ∫_a^∞ φ and Σ t_n by fitting
    ln φ(x) = logC − p·ln x − q·ln ln x on a geometric ladder.
    """

    def _log_samples(
        self, sampler: Sampler, xs: np.ndarray, log: bool
    ) -> tuple[np.ndarray, np.ndarray]:
        values = _evaluate(sampler, xs)
        if np.any(np.isnan(values)):
            raise DomainError(f"sampler undefined on the ladder near x={xs[np.isnan(values)][0]:.6g}")
        if log:
            if np.any(values == math.inf):
                raise DomainError("sampler returned ln φ = +inf on the ladder")
            clamped = values == -math.inf
            floor = math.log(self.settings.tailfit.clamp)
            return np.where(clamped, floor, values), clamped
        if np.any(values < 0):
            raise DomainError(f"sampler negative at x={xs[values < 0][0]:.6g}")
        clamped = values < self.settings.tailfit.clamp
        return np.log(np.maximum(values, self.settings.tailfit.clamp)), clamped

    def _fit(
        self,
        xs: np.ndarray,
        ln_phi: np.ndarray,
        clamped: np.ndarray,
        power_only: bool = False,
    ) -> TailFitModel:
        keep = ~clamped
        if keep.sum() >= 5:
            fit_x, fit_y = xs[keep], ln_phi[keep]
        else:
            fit_x, fit_y = xs, ln_phi
        lx = np.log(fit_x)
        q_determined = not power_only
        if np.ptp(fit_y) <= 1e-12 * max(1.0, float(np.max(np.abs(fit_y)))):
            q_determined = False
        columns = [np.ones_like(lx), -lx]
        if q_determined:
            columns.append(-np.log(lx))
        design = np.column_stack(columns)
        coef, _, rank, _ = np.linalg.lstsq(design, fit_y, rcond=None)
        if rank < design.shape[1]:
            q_determined = False
            design = design[:, :2]
            coef, _, rank, _ = np.linalg.lstsq(design, fit_y, rcond=None)
        residual = fit_y - design @ coef
        return TailFitModel(
            logC=float(coef[0]),
            p=float(coef[1]),
            q=float(coef[2]) if q_determined else 0.0,
            residual_rms=float(np.sqrt(np.mean(residual**2))),
            window=(float(fit_x[0]), float(fit_x[-1])),
            q_determined=q_determined,
            power_only=power_only,
            clamped=bool(np.any(clamped)),
        )

    def _ladder(self, a: float) -> np.ndarray:
        cfg = self.settings.tailfit
        return geometric_ladder(max(a, math.e), cfg.ratio, cfg.points)

    def fit_tail_exponents(self, sampler: Sampler, a: float, log: bool = False) -> TailFitModel:
        """Least-squares fit of the tail model past the burn-in rungs of the ladder."""
        if sampler is None:
            raise TypeError("sampler cannot be None.")
        if not a > 1:
            raise DomainError(f"tail fits need a > 1; got {a}")
        xs = self._ladder(a)
        ln_phi, clamped = self._log_samples(sampler, xs, log)
        burn = min(self.settings.tailfit.burn_in, len(xs) - 4)
        return self._fit(xs[burn:], ln_phi[burn:], clamped[burn:])

    def _decide(
        self, fit: TailFitModel, xs: np.ndarray, ln_phi: np.ndarray
    ) -> tuple[DivergenceClass, list[str], tuple[float, float]]:
        """Returns the class, diagnostics and the (p, q) pair used for tail extrapolation."""
        cfg = self.settings.tailfit
        notes = [f"fit p={fit.p:.4f} q={fit.q:.4f} rms={fit.residual_rms:.3g}"]
        p = fit.p
        q = fit.q if fit.q_determined else 0.0
        if fit.residual_rms > cfg.residual_limit:
            # clamped samples beyond the fit window carry no slope information
            inside = xs <= fit.window[1]
            xs, ln_phi = xs[inside], ln_phi[inside]
            quarter = min(len(xs), max(3, len(xs) // 4))
            slope = np.polyfit(np.log(xs[-quarter:]), ln_phi[-quarter:], 1)[0]
            p, q = float(-slope), 0.0
            notes.append(f"tail model inadequate; local exponent {p:.4f} over the last {quarter} rungs")
            fit_power_only = True
        else:
            fit_power_only = fit.power_only
        if p > 1 + cfg.tau_p:
            return DivergenceClass.Convergent, notes, (p, q)
        if p < 1 - cfg.tau_p:
            return DivergenceClass.Divergent, notes, (p, q)
        if fit_power_only or not fit.q_determined:
            notes.append(f"exponent {p:.4f} within {cfg.tau_p} of 1")
            return DivergenceClass.Inconclusive, notes, (p, q)
        if q > 1 + cfg.tau_q:
            return DivergenceClass.Convergent, notes, (p, q)
        if q <= 1 - cfg.tau_q:
            return DivergenceClass.Divergent, notes, (p, q)
        # p ~ 1, q ~ 1: refit q with p pinned to 1 on the upper half of the window
        half = len(xs) // 2
        lx = np.log(xs[half:])
        design = np.column_stack([np.ones_like(lx), -np.log(lx)])
        coef = np.linalg.lstsq(design, ln_phi[half:] + lx, rcond=None)[0]
        q1 = float(coef[1])
        notes.append(f"log-boundary refit with p=1: q={q1:.4f}")
        if q1 <= 1 + cfg.q_boundary:
            return DivergenceClass.Divergent, notes, (1.0, q1)
        notes.append("boundary case p≈1, q≈1 not resolved")
        return DivergenceClass.Inconclusive, notes, (p, q)

    def _check_increments(
        self, klass: DivergenceClass, partials: list[PartialValue], notes: list[str]
    ) -> DivergenceClass:
        cfg = self.settings.tailfit
        values = np.array([pv.value for pv in partials])
        if klass == DivergenceClass.Divergent and np.any(np.diff(values) <= 0):
            notes.append("partial values stall against a divergent fit")
            return DivergenceClass.Inconclusive
        if len(values) < cfg.increment_rungs + 2:
            return klass
        increments = np.diff(values)[-(cfg.increment_rungs + 1):]
        ratios = np.divide(
            increments[1:],
            increments[:-1],
            out=np.zeros(len(increments) - 1),
            where=increments[:-1] > 0,
        )
        if klass == DivergenceClass.Divergent and np.all(ratios < cfg.increment_ratio):
            notes.append(
                f"increments shrink geometrically (max ratio {ratios.max():.3f}) against a divergent fit"
            )
            return DivergenceClass.Inconclusive
        if klass == DivergenceClass.Convergent and np.all(ratios >= 1):
            notes.append(
                f"increments do not shrink (min ratio {ratios.min():.3f}) against a convergent fit"
            )
            return DivergenceClass.Inconclusive
        return klass

    @staticmethod
    def _check_monotone(partials: list[PartialValue]):
        for prev, cur in zip(partials, partials[1:]):
            if cur.value < prev.value - 1e-12 * abs(prev.value):
                raise NumericError(
                    f"partial values decrease between T={prev.T:.6g} and T={cur.T:.6g}"
                )

    def _model_tail(self, x0: float, ln_anchor: float, exponents: tuple[float, float]) -> float:
        """∫_{x0}^∞ of the fitted model rescaled to pass through (x0, exp(ln_anchor))."""
        if ln_anchor == -math.inf:
            return 0.0
        p, q = max(exponents[0], 1.0), exponents[1]
        if p == 1.0 and q <= 1.0:
            return math.inf
        s0 = math.log(x0)
        ls0 = math.log(s0)

        def integrand(s):
            return ln_anchor + s - p * (s - s0) - q * (math.log(s) - ls0)

        value, _ = log_integral(integrand, s0, lo=s0, allow_zero=True)
        return math.exp(value)

    def classify_integral(
        self, sampler: Sampler, a: float, log: bool = False, head: float = 0.0
    ) -> DivergenceVerdict:
        """
        Classifies ∫_a^∞ φ(x) dx. With log=True the sampler returns ln φ.

        head is a known contribution added to every partial value.
        """
        if sampler is None:
            raise TypeError("sampler cannot be None.")
        if not a > 1:
            raise DomainError(f"integrals are classified from a > 1; got {a}")
        cfg = self.settings.tailfit
        xs = self._ladder(a)
        ln_phi, clamped = self._log_samples(sampler, xs, log)
        burn = min(cfg.burn_in, len(xs) - 4)
        fit = self._fit(xs[burn:], ln_phi[burn:], clamped[burn:])
        klass, notes, exponents = self._decide(fit, xs[burn:], ln_phi[burn:])
        if fit.clamped:
            notes.append(f"samples below {cfg.clamp:g} were clamped")

        if log:

            def log_phi(x):
                with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                    return float(sampler(x))

        else:

            def log_phi(x):
                with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                    value = float(sampler(x))
                return math.log(value) if value > 0 else -math.inf

        partials = []
        total = head
        edges = [a, *xs] if a < xs[0] else list(xs)
        if a >= xs[0]:
            partials.append(PartialValue(T=float(xs[0]), value=total))
        for lo, hi in zip(edges[:-1], edges[1:]):
            if hi > lo:
                value, _ = log_integral(
                    log_phi, math.sqrt(lo * hi), lo=lo, hi=hi, octaves=0,
                    epsrel=self.settings.moments.epsrel, allow_zero=True,
                )
                total += math.exp(value)
            partials.append(PartialValue(T=float(hi), value=total))
        self._check_monotone(partials)
        klass = self._check_increments(klass, partials, notes)

        value_estimate = None
        if klass == DivergenceClass.Convergent:
            value_estimate = total + self._model_tail(float(xs[-1]), float(ln_phi[-1]), exponents)
            if not math.isfinite(value_estimate):
                value_estimate = total
        logger.debug(f"integral from {a:.6g}: {klass} ({'; '.join(notes)})")
        return DivergenceVerdict(
            klass=klass,
            value_estimate=value_estimate,
            fit=fit,
            partials=partials,
            diagnostics=notes,
        )

    def classify_series(
        self,
        terms: Sampler,
        n0: int,
        n_max: Optional[int] = None,
        log: bool = False,
        power_only: bool = False,
        head: float = 0.0,
    ) -> DivergenceVerdict:
        """
        Classifies Σ_{n≥n0} t_n; terms must accept integer arrays.

        With n_max the sequence is finite: every available term enters the
        fit and the partial sums, and a convergent sum is completed by the
        fitted model beyond n_max. power_only fits t_n ≈ C·n^{−p} alone.
        """
        if terms is None:
            raise TypeError("terms cannot be None.")
        if n0 < 1:
            raise DomainError(f"series start at n0 ≥ 1; got {n0}")
        cfg = self.settings.tailfit
        start = max(n0, 3)
        if n_max is not None:
            if n_max - start < 4:
                raise DomainError(f"need at least 5 terms beyond n={start}; n_max={n_max}")
            ns = np.arange(start, n_max + 1, dtype=np.int64)
            fit_from = 0
            direct = n_max
        else:
            ns = integer_ladder(start, cfg.ratio, cfg.points)
            fit_from = min(cfg.burn_in, len(ns) - 4)
            direct = max(cfg.direct_terms, n0 + 100)
        ln_t, clamped = self._log_samples(terms, ns, log)
        fit = self._fit(
            ns[fit_from:].astype(float), ln_t[fit_from:], clamped[fit_from:], power_only=power_only
        )
        klass, notes, exponents = self._decide(fit, ns[fit_from:].astype(float), ln_t[fit_from:])
        if fit.clamped:
            notes.append(f"terms below {cfg.clamp:g} were clamped")

        # exact partial sums up to `direct`, the anchored model beyond
        exact_n = np.arange(n0, direct + 1, dtype=np.int64)
        ln_exact, _ = self._log_samples(terms, exact_n, log)
        sums = head + np.cumsum(np.exp(ln_exact))
        ln_anchor = float(ln_exact[-1])
        partials = []
        for n in ns:
            if n <= direct:
                value = float(sums[n - n0])
            else:
                value = float(sums[-1]) + self._model_between(direct + 0.5, n + 0.5, ln_anchor, direct, exponents)
            partials.append(PartialValue(T=float(n), value=value))
        self._check_monotone(partials)
        klass = self._check_increments(klass, partials, notes)

        value_estimate = None
        if klass == DivergenceClass.Convergent:
            value_estimate = float(sums[-1]) + self._tail_beyond(direct, ln_anchor, exponents)
            if not math.isfinite(value_estimate):
                value_estimate = partials[-1].value
            value_estimate = max(value_estimate, partials[-1].value)
        logger.debug(f"series from {n0}: {klass} ({'; '.join(notes)})")
        return DivergenceVerdict(
            klass=klass,
            value_estimate=value_estimate,
            fit=fit,
            partials=partials,
            diagnostics=notes,
        )

    @staticmethod
    def _model_log(x: float, n: int, ln_anchor: float, exponents: tuple[float, float]) -> float:
        """ln of the fitted model at x, rescaled to pass through (n, exp(ln_anchor))."""
        p, q = exponents
        return ln_anchor - p * (math.log(x) - math.log(n)) - q * (
            math.log(math.log(x)) - math.log(math.log(n))
        )

    def _tail_beyond(self, n: int, ln_anchor: float, exponents: tuple[float, float]) -> float:
        x0 = n + 0.5
        return self._model_tail(x0, self._model_log(x0, n, ln_anchor, exponents), exponents)

    def _model_between(
        self, lo: float, hi: float, ln_anchor: float, n: int, exponents: tuple[float, float]
    ) -> float:
        value, _ = log_integral(
            lambda x: self._model_log(x, n, ln_anchor, exponents),
            math.sqrt(lo * hi),
            lo=lo,
            hi=hi,
            allow_zero=True,
        )
        return math.exp(value)
