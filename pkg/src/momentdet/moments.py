import logging
import math
from typing import Optional

import numpy as np

from .core import DeterminacyAPI, DomainError
from .distmodel import AnySpec, jump_breaks, log_mass, symmetrize_sqrt
from .numerics import log_integral, log_sum_terms
from .schemas import Case, DivergenceVerdict, MomentEstimate, MomentTable, SupportKind

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)


class Moments(DeterminacyAPI):
    def log_moment(self, spec: AnySpec, k: int) -> MomentEstimate:
        """
        ln m_k computed in the log domain.

        Symmetric specs report odd orders as vanishing (m_k = 0, ln m_k = -inf).
        """
        if spec is None:
            raise TypeError("spec cannot be None.")
        if k < 1:
            raise ValueError("k must be at least 1.")
        if spec.support.is_symmetric and k % 2 == 1:
            return MomentEstimate(k=k, log_value=-math.inf, error=0.0, vanishes=True)
        if spec.is_pmf:
            return self._log_moment_pmf(spec, k)
        return self._log_moment_density(spec, k)

    def _log_moment_density(self, spec: AnySpec, k: int) -> MomentEstimate:
        cfg = self.settings.moments

        def integrand(x):
            if x <= 0:
                return -math.inf
            return k * math.log(x) + log_mass(spec, x)

        center, _ = self.client.maximizer.peak(spec, k)
        center = max(center, 1e-8)
        log_value, error = log_integral(
            integrand,
            center,
            breaks=(1.0, spec.threshold, *jump_breaks(spec, integrand, center)),
            octaves=cfg.panel_octaves,
            epsrel=cfg.epsrel,
        )
        if spec.support == SupportKind.HamburgerSymmetric:
            log_value += LN2
        return MomentEstimate(k=k, log_value=log_value, error=error)

    def _log_moment_pmf(self, spec: AnySpec, k: int) -> MomentEstimate:
        def terms(j):
            return k * np.log(j) + log_mass(spec, j)

        log_value, error = log_sum_terms(
            terms, 1, cutoff_nats=self.settings.moments.tail_cutoff_nats
        )
        if spec.support == SupportKind.IntegerSymmetric:
            log_value += LN2
        return MomentEstimate(k=k, log_value=log_value, error=error)

    def moment_table(self, spec: AnySpec, k_max: Optional[int] = None) -> MomentTable:
        """
        Moments needed for k_max Carleman terms: orders 2, 4, ..., 2·k_max for
        symmetric specs and 1, ..., k_max otherwise.
        """
        if k_max is None:
            cfg = self.settings.moments
            k_max = cfg.k_max_discrete if spec.is_pmf else cfg.k_max_continuous
        case = Case.of(spec.support)
        if case == Case.Hamburger:
            orders = range(2, 2 * k_max + 1, 2)
        else:
            orders = range(1, k_max + 1)
        entries = [self.log_moment(spec, k) for k in orders]
        logger.debug(f"moment table for {spec.name}: {len(entries)} orders")
        return MomentTable(spec_id=spec.name, case=case, entries=entries)

    def carleman_terms(self, table: MomentTable) -> list[tuple[int, float]]:
        """t_k = m_{2k}^{−1/(2k)} (Hamburger) or m_k^{−1/(2k)} (Stieltjes)."""
        terms = []
        for entry in table.entries:
            k = entry.k // 2 if table.case == Case.Hamburger else entry.k
            terms.append((k, math.exp(-entry.log_value / (2 * k))))
        indices = [k for k, _ in terms]
        if indices != list(range(indices[0], indices[0] + len(indices))):
            raise DomainError(f"moment table for {table.spec_id} has missing orders")
        return terms

    def carleman_check(
        self, spec: AnySpec, case: Optional[Case] = None, k_max: Optional[int] = None
    ) -> DivergenceVerdict:
        """
        Fits t_k ≈ C·k^{−β}: a divergent sum (β ≤ 1) means Carleman's condition holds.
        """
        if spec is None:
            raise TypeError("spec cannot be None.")
        natural = Case.of(spec.support)
        case = Case(case) if case is not None else natural
        if case != natural:
            if case == Case.Hamburger and spec.support == SupportKind.Stieltjes:
                spec = symmetrize_sqrt(spec)
            else:
                raise DomainError(f"{spec.name} cannot be checked in the {case} case")
        if k_max is not None and k_max < 8:
            raise ValueError("k_max must be at least 8.")
        table = self.moment_table(spec, k_max)
        terms = dict(self.carleman_terms(table))
        last = max(terms)

        def log_terms(ks):
            return np.array([math.log(terms[int(k)]) for k in np.atleast_1d(ks)])

        k_min = self.settings.moments.carleman_k_min
        verdict = self.client.tailfit.classify_series(
            log_terms, k_min, n_max=last, log=True, power_only=True
        )
        verdict.diagnostics.append(f"beta={verdict.fit.p:.4f}")
        return verdict
