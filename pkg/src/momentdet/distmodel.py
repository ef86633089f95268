import functools
import logging
import math
from typing import Any, Callable, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator
from scipy.optimize import brentq

from .core import DomainError, InvalidTransformError, NumericError
from .numerics import locate_peak, log_integral, log_sum_terms
from .schemas import CeilMode, Conclusion, ExpectedVerdict, SupportKind

logger = logging.getLogger(__name__)

OSCILLATING = "oscillating"
NONSMOOTH = "nonsmooth"

LN2 = math.log(2.0)

ArrayLike = Union[float, int, np.ndarray]


class DensitySpec(BaseModel):
    """
    A continuous density on ℝ (symmetric) or on [0, ∞).

    log_density is the raw, possibly unnormalized log density on x ≥ 0 and
    must accept numpy arrays; symmetric densities are evaluated at |x|.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True, extra="forbid")

    name: str
    support: SupportKind
    log_density: Callable[[Any], Any]
    log_density_derivative: Optional[Callable[[Any], Any]] = None
    # jump locations of the density inside [lo, hi], sorted
    breakpoints: Optional[Callable[[float, float], list[float]]] = None
    threshold: float = Field(gt=1)
    normalized: bool = False
    log_norm_constant: Optional[float] = None
    flags: tuple[str, ...] = ()
    provenance: tuple[str, ...] = ()
    params: dict[str, float] = {}
    base: Optional[Any] = None

    _log_c: Optional[float] = PrivateAttr(None)

    @field_validator("support")
    @classmethod
    def check_support(cls, v: SupportKind) -> SupportKind:
        assert v.is_continuous, "DensitySpec support must be a continuous kind."
        return v

    @property
    def is_pmf(self) -> bool:
        return False

    @property
    def log_c(self) -> float:
        """ln of the normalizing constant, computed by quadrature on first use."""
        if self._log_c is None:
            self._log_c = _density_log_c(self)
        return self._log_c

    def has_flag(self, flag: str) -> bool:
        return flag in self.flags


class PmfSpec(BaseModel):
    """
    An integer pmf on ℤ (symmetric) or on ℕ₀.

    log_pmf is the raw log mass on n ≥ 0, vectorized over integer arrays;
    symmetric pmfs are evaluated at |j|.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True, extra="forbid")

    name: str
    support: SupportKind
    log_pmf: Callable[[Any], Any]
    threshold: int = Field(ge=2)
    normalized: bool = False
    log_norm_constant: Optional[float] = None
    flags: tuple[str, ...] = ()
    provenance: tuple[str, ...] = ()
    params: dict[str, float] = {}
    base: Optional[Any] = None

    _log_c: Optional[float] = PrivateAttr(None)

    @field_validator("support")
    @classmethod
    def check_support(cls, v: SupportKind) -> SupportKind:
        assert not v.is_continuous, "PmfSpec support must be an integer kind."
        return v

    @property
    def is_pmf(self) -> bool:
        return True

    @property
    def log_c(self) -> float:
        if self._log_c is None:
            self._log_c = _pmf_log_c(self)
        return self._log_c

    def has_flag(self, flag: str) -> bool:
        return flag in self.flags


AnySpec = Union[DensitySpec, PmfSpec]


class CatalogEntry(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    parameters: dict[str, float] = {}
    spec: Union[DensitySpec, PmfSpec]
    expected_verdict: Optional[ExpectedVerdict] = None
    notes: str = ""

    def expects(self, conclusion: Conclusion) -> bool:
        return self.expected_verdict is not None and self.expected_verdict.conclusion == conclusion


def _raw(spec: AnySpec, x: ArrayLike):
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if spec.is_pmf:
            return spec.log_pmf(x)
        return spec.log_density(x)


def jump_breaks(
    spec: DensitySpec, log_f: Callable[[float], float], center: float, nats: float = 30.0
) -> list[float]:
    """Jump points of spec inside the octaves around center where log_f stays within nats of its peak."""
    if spec.is_pmf or spec.breakpoints is None:
        return []
    top = log_f(center)
    if not math.isfinite(top):
        return []
    lo = hi = center
    while lo > 1e-12 and log_f(lo) > top - nats:
        lo *= 0.5
    while hi < 1e300 and log_f(hi) > top - nats:
        hi *= 2.0
    return list(spec.breakpoints(lo, hi))


def _density_log_c(spec: DensitySpec) -> float:
    if spec.normalized:
        return spec.log_norm_constant or 0.0
    if spec.log_norm_constant is not None:
        return spec.log_norm_constant

    def raw(x):
        return float(_raw(spec, x))

    center, _ = locate_peak(raw, 1.0, lo=0.0)
    center = max(center, 1.0)
    breaks = (1.0, spec.threshold, *jump_breaks(spec, raw, center))
    log_mass, err = log_integral(raw, center, breaks=breaks)
    if spec.support == SupportKind.HamburgerSymmetric:
        log_mass += LN2
    if not math.isfinite(log_mass):
        raise NumericError(f"normalization of {spec.name} failed")
    logger.debug(f"normalized {spec.name}: ln c = {-log_mass:.12g} (rel. err {err:.2g})")
    return -log_mass


def _pmf_log_c(spec: PmfSpec) -> float:
    if spec.normalized:
        return spec.log_norm_constant or 0.0
    if spec.log_norm_constant is not None:
        return spec.log_norm_constant
    if spec.support == SupportKind.IntegerSymmetric:
        head = float(_raw(spec, np.array([0]))[0])
        tail, _ = log_sum_terms(lambda j: _raw(spec, j), 1)
        log_mass = float(np.logaddexp(head, LN2 + tail))
    else:
        log_mass, _ = log_sum_terms(lambda j: _raw(spec, j), 0)
    logger.debug(f"normalized {spec.name}: ln c = {-log_mass:.12g}")
    return -log_mass


def _check_domain(spec: AnySpec, x: ArrayLike):
    arr = np.asarray(x)
    if spec.support in (SupportKind.Stieltjes, SupportKind.NonnegativeInteger):
        if np.any(arr < 0):
            raise DomainError(f"{spec.name} is supported on [0, ∞); got x={x}")
    if spec.is_pmf and not np.all(np.equal(np.mod(arr, 1), 0)):
        raise DomainError(f"{spec.name} is an integer pmf; got non-integer {x}")
    return arr


def log_mass(spec: AnySpec, x: ArrayLike):
    """Normalized ln f(x) or ln p_x, vectorized."""
    arr = _check_domain(spec, x)
    if spec.is_pmf:
        arr = np.abs(arr).astype(np.int64)
    else:
        arr = np.abs(arr.astype(float))
    value = _raw(spec, arr) + spec.log_c
    if np.ndim(x) == 0:
        return float(value)
    return value


def eval_log_density(spec: DensitySpec, x: ArrayLike):
    if spec is None:
        raise TypeError("spec cannot be None.")
    if spec.is_pmf:
        raise DomainError(f"{spec.name} is a pmf; use log_mass")
    return log_mass(spec, x)


def u_ratio(spec: AnySpec, x: ArrayLike):
    """u(x) = −ln f(x) / ln x with the normalized log mass."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 1):
        raise DomainError(f"u-ratio needs x > 1; got {x}")
    return -log_mass(spec, x) / np.log(arr)


def raw_u_ratio(spec: AnySpec, x: ArrayLike):
    """u(x) computed from the raw (unnormalized) log mass."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 1):
        raise DomainError(f"u-ratio needs x > 1; got {x}")
    return -_raw(spec, np.abs(arr) if not spec.is_pmf else np.abs(arr).astype(np.int64)) / np.log(arr)


def log_density_derivative(spec: DensitySpec, x: float, step: float = 1e-6) -> float:
    """(ln f)'(x), from the supplied evaluator or by central differences."""
    if spec.log_density_derivative is not None:
        with np.errstate(divide="ignore", invalid="ignore"):
            return float(spec.log_density_derivative(x))
    h = step * max(abs(x), 1.0)
    return (float(_raw(spec, x + h)) - float(_raw(spec, x - h))) / (2 * h)


# Transforms


def _require(spec: AnySpec, *kinds: SupportKind, op: str):
    if spec is None:
        raise TypeError("spec cannot be None.")
    if spec.support not in kinds:
        raise InvalidTransformError(
            f"{op} expects {', '.join(str(k) for k in kinds)}; {spec.name} is {spec.support}"
        )


def symmetrize_sqrt(spec: DensitySpec) -> DensitySpec:
    """Density h(x) = |x|·g(x²) of the symmetrized square root of Y ~ g."""
    _require(spec, SupportKind.Stieltjes, op="symmetrize_sqrt")
    raw_g = spec.log_density

    def log_h(x):
        x = np.asarray(x, dtype=float)
        out = np.log(np.where(x > 0, x, 1.0)) + raw_g(x * x)
        return np.where(x > 0, out, -np.inf)

    derivative = None
    if spec.log_density_derivative is not None:
        dg = spec.log_density_derivative

        def derivative(x):
            return 1.0 / x + 2.0 * x * dg(x * x)

    breakpoints = None
    if spec.breakpoints is not None:
        jumps_g = spec.breakpoints

        def breakpoints(lo, hi):
            return [math.sqrt(y) for y in jumps_g(lo * lo, hi * hi)]

    return DensitySpec(
        name=f"symmetrize_sqrt({spec.name})",
        support=SupportKind.HamburgerSymmetric,
        log_density=log_h,
        log_density_derivative=derivative,
        breakpoints=breakpoints,
        threshold=max(math.sqrt(spec.threshold), 1.0 + 1e-3),
        normalized=True,
        log_norm_constant=spec.log_c,
        flags=spec.flags,
        provenance=spec.provenance + ("symmetrize_sqrt",),
        params=spec.params,
    )


def symmetrize_pmf(spec: PmfSpec) -> PmfSpec:
    """q₀ = p₀ and q_j = ½p_{|j|} for j ≠ 0."""
    _require(spec, SupportKind.NonnegativeInteger, op="symmetrize_pmf")
    raw_p = spec.log_pmf

    def log_q(j):
        j = np.asarray(j)
        return np.where(j == 0, raw_p(j), raw_p(j) - LN2)

    return PmfSpec(
        name=f"symmetrize_pmf({spec.name})",
        support=SupportKind.IntegerSymmetric,
        log_pmf=log_q,
        threshold=spec.threshold,
        normalized=True,
        log_norm_constant=spec.log_c,
        flags=spec.flags,
        provenance=spec.provenance + ("symmetrize_pmf",),
        params=spec.params,
    )


def square_pushforward(spec: DensitySpec) -> DensitySpec:
    """Density of X² for a symmetric X ~ f: f(√y)/√y on (0, ∞)."""
    _require(spec, SupportKind.HamburgerSymmetric, op="square_pushforward")
    raw_f = spec.log_density

    def log_g(y):
        y = np.asarray(y, dtype=float)
        safe = np.where(y > 0, y, 1.0)
        return np.where(y > 0, raw_f(np.sqrt(safe)) - 0.5 * np.log(safe), -np.inf)

    derivative = None
    if spec.log_density_derivative is not None:
        df = spec.log_density_derivative

        def derivative(y):
            root = np.sqrt(y)
            return df(root) / (2.0 * root) - 0.5 / y

    breakpoints = None
    if spec.breakpoints is not None:
        jumps_f = spec.breakpoints

        def breakpoints(lo, hi):
            return [x * x for x in jumps_f(math.sqrt(lo), math.sqrt(hi))]

    return DensitySpec(
        name=f"square_pushforward({spec.name})",
        support=SupportKind.Stieltjes,
        log_density=log_g,
        log_density_derivative=derivative,
        breakpoints=breakpoints,
        threshold=max(spec.threshold**2, 1.0 + 1e-3),
        normalized=True,
        log_norm_constant=spec.log_c,
        flags=spec.flags,
        provenance=spec.provenance + ("square_pushforward",),
        params=spec.params,
    )


def perturb_bounded_sin(spec: DensitySpec, amplitude: float) -> DensitySpec:
    """g̃(x) = c̃·g(x)·[1 + amplitude·sin x], renormalized numerically."""
    _require(spec, SupportKind.Stieltjes, op="perturb_bounded_sin")
    if amplitude is None:
        raise TypeError("amplitude cannot be None.")
    if not 0 <= amplitude < 1:
        raise InvalidTransformError(
            f"amplitude must lie in [0, 1) so the density stays positive; got {amplitude}"
        )
    raw_g = spec.log_density
    log_c = spec.log_c

    def log_g_tilde(x):
        x = np.asarray(x, dtype=float)
        return raw_g(x) + log_c + np.log1p(amplitude * np.sin(x))

    return DensitySpec(
        name=f"perturb_bounded_sin({spec.name}, {amplitude:g})",
        support=SupportKind.Stieltjes,
        log_density=log_g_tilde,
        breakpoints=spec.breakpoints,
        threshold=spec.threshold,
        normalized=amplitude == 0,
        log_norm_constant=0.0 if amplitude == 0 else None,
        flags=tuple(sorted(set(spec.flags) | {OSCILLATING})),
        provenance=spec.provenance + (f"perturb_bounded_sin({amplitude:g})",),
        params={**spec.params, "amplitude": amplitude},
        base=spec,
    )


def ceiling_u_variant(spec: DensitySpec, mode: CeilMode) -> DensitySpec:
    """
    Replaces u by u(⌈x⌉) (CeilArgument) or ⌈u(x)⌉ (CeilValue) on [threshold, ∞).

    Below the threshold the density of spec is kept unchanged. The cut sits at
    spec's threshold; with_threshold rebuilds the variant from its base.
    """
    _require(spec, SupportKind.Stieltjes, op="ceiling_u_variant")
    mode = CeilMode(mode)
    raw_g = spec.log_density
    log_c = spec.log_c
    a = spec.threshold

    def u(x):
        return -(raw_g(x) + log_c) / np.log(x)

    def log_variant(x):
        x = np.asarray(x, dtype=float)
        tail = np.where(x >= a, x, a)
        if mode == CeilMode.CeilArgument:
            u_i = u(np.ceil(tail))
        else:
            u_i = np.ceil(u(tail))
        return np.where(x >= a, -u_i * np.log(tail), raw_g(x) + log_c)

    def breakpoints(lo, hi):
        lo = max(lo, a)
        if hi <= lo:
            return []
        jumps = [a] if lo <= a else []
        if mode == CeilMode.CeilArgument:
            jumps += [float(n) for n in range(math.ceil(lo), math.floor(hi) + 1) if n > a]
            return jumps
        grid = np.geomspace(lo, hi, 512)
        levels = np.ceil(u(grid))
        for i in np.flatnonzero(levels[1:] != levels[:-1]):
            left, right = grid[i], grid[i + 1]
            step = 1 if levels[i + 1] > levels[i] else -1
            for m in np.arange(levels[i], levels[i + 1], step):
                # u crosses the integer m (upward) or m - 1 (downward) inside the cell
                level = m if step == 1 else m - 1
                jumps.append(brentq(lambda x: float(u(x)) - level, left, right, xtol=1e-12, rtol=1e-14))
        return sorted(jumps)

    return DensitySpec(
        name=f"ceiling_u_variant({spec.name}, {mode})",
        support=SupportKind.Stieltjes,
        log_density=log_variant,
        breakpoints=breakpoints,
        threshold=a,
        flags=tuple(sorted(set(spec.flags) | {NONSMOOTH})),
        provenance=spec.provenance + (f"ceiling_u_variant({mode})",),
        params=spec.params,
        base=spec,
    )


def floor_discretize(spec: DensitySpec) -> PmfSpec:
    """p_n = ∫_n^{n+1} g(x) dx, integrated in the log domain per unit interval."""
    _require(spec, SupportKind.Stieltjes, op="floor_discretize")
    raw_g = spec.log_density
    log_c = spec.log_c

    def log_g(x):
        return float(raw_g(np.float64(x))) + log_c

    @functools.lru_cache(maxsize=None)
    def log_cell(n: int) -> float:
        value, _ = log_integral(log_g, n + 0.5, lo=float(n), hi=float(n + 1), octaves=0)
        return value

    def log_p(n):
        n = np.asarray(n, dtype=np.int64)
        if n.ndim == 0:
            return log_cell(int(n))
        return np.array([log_cell(int(i)) for i in n.ravel()]).reshape(n.shape)

    return PmfSpec(
        name=f"floor_discretize({spec.name})",
        support=SupportKind.NonnegativeInteger,
        log_pmf=log_p,
        threshold=max(2, math.ceil(spec.threshold)),
        normalized=True,
        log_norm_constant=0.0,
        flags=spec.flags,
        provenance=spec.provenance + ("floor_discretize",),
        params=spec.params,
        base=spec,
    )
