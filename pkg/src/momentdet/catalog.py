import inspect
import json
import logging
import math
from typing import Any, Callable, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError
from scipy.special import gammaln

from .core import InvalidTransformError, MomentDetException, SpecError
from .distmodel import (
    AnySpec,
    CatalogEntry,
    DensitySpec,
    PmfSpec,
    ceiling_u_variant,
    floor_discretize,
    perturb_bounded_sin,
    square_pushforward,
    symmetrize_pmf,
    symmetrize_sqrt,
)
from .schemas import CeilMode, Conclusion, ExpectedVerdict, RuleId, SupportKind

logger = logging.getLogger(__name__)

LN_SQRT_2PI = 0.5 * math.log(2 * math.pi)
CEILING_STEP = "ceiling_u_variant("


def _safe_log(x):
    x = np.asarray(x, dtype=float)
    return np.log(np.where(x > 0, x, 1.0))


# Families


def gaussian(sigma: float = 1.0, threshold: float = 1.2) -> DensitySpec:
    if sigma <= 0:
        raise ValueError("sigma must be positive.")
    s2 = sigma * sigma
    return DensitySpec(
        name="gaussian",
        support=SupportKind.HamburgerSymmetric,
        log_density=lambda x: -np.square(x) / (2 * s2),
        log_density_derivative=lambda x: -x / s2,
        threshold=threshold,
        normalized=True,
        log_norm_constant=-(LN_SQRT_2PI + math.log(sigma)),
        provenance=(f"gaussian(sigma={sigma:g})",),
        params={"sigma": sigma},
    )


def exponential(lam: float = 1.0, threshold: float = math.e) -> DensitySpec:
    if lam <= 0:
        raise ValueError("lam must be positive.")
    return DensitySpec(
        name="exp",
        support=SupportKind.Stieltjes,
        log_density=lambda x: -lam * np.asarray(x, dtype=float),
        log_density_derivative=lambda x: -lam + 0.0 * np.asarray(x, dtype=float),
        threshold=threshold,
        normalized=True,
        log_norm_constant=math.log(lam),
        provenance=(f"exp(lam={lam:g})",),
        params={"lam": lam},
    )


def exp_power(lam: float = 1.0, threshold: float = 4.0) -> DensitySpec:
    """f(x) = c·exp(−|x|^λ) with c = λ / (2Γ(1/λ))."""
    if lam <= 0:
        raise ValueError("lam must be positive.")
    return DensitySpec(
        name="exp_power",
        support=SupportKind.HamburgerSymmetric,
        log_density=lambda x: -np.power(np.abs(x), lam),
        log_density_derivative=lambda x: -lam * np.power(x, lam - 1),
        threshold=threshold,
        normalized=True,
        log_norm_constant=math.log(lam) - math.log(2) - float(gammaln(1 / lam)),
        provenance=(f"exp_power(lam={lam:g})",),
        params={"lam": lam},
    )


def example1(alpha: float = 1.0, threshold: float = 10.0) -> DensitySpec:
    """f(x) = c·exp(−|x|/(ln|x|)^α) for |x| > 1, and 0 on [−1, 1]."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1].")

    def log_f(x):
        x = np.asarray(x, dtype=float)
        lx = np.log(np.where(x > 1, x, math.e))
        return np.where(x > 1, -x / np.power(lx, alpha), -np.inf)

    def d_log_f(x):
        lx = np.log(x)
        return -np.power(lx, -alpha) + alpha * np.power(lx, -alpha - 1)

    return DensitySpec(
        name="example1",
        support=SupportKind.HamburgerSymmetric,
        log_density=log_f,
        log_density_derivative=d_log_f,
        threshold=threshold,
        provenance=(f"example1(alpha={alpha:g})",),
        params={"alpha": alpha},
    )


def lognormal(mu: float = 0.0, sigma: float = 1.0, threshold: float = 4.0) -> DensitySpec:
    if sigma <= 0:
        raise ValueError("sigma must be positive.")
    s2 = sigma * sigma

    def log_g(x):
        x = np.asarray(x, dtype=float)
        lx = _safe_log(x)
        return np.where(x > 0, -lx - np.square(lx - mu) / (2 * s2), -np.inf)

    return DensitySpec(
        name="lognormal",
        support=SupportKind.Stieltjes,
        log_density=log_g,
        log_density_derivative=lambda x: -1 / x - (np.log(x) - mu) / (s2 * x),
        threshold=threshold,
        normalized=True,
        log_norm_constant=-(LN_SQRT_2PI + math.log(sigma)),
        provenance=(f"lognormal(mu={mu:g}, sigma={sigma:g})",),
        params={"mu": mu, "sigma": sigma},
    )


def example2(threshold: float = 5.0) -> DensitySpec:
    """Density of ξ^{3/2} for ξ ~ Exp(1): g(x) = (2/3)x^{−1/3}exp(−x^{2/3})."""

    def log_g(x):
        x = np.asarray(x, dtype=float)
        out = math.log(2 / 3) - _safe_log(x) / 3 - np.power(np.abs(x), 2 / 3)
        return np.where(x > 0, out, -np.inf)

    return DensitySpec(
        name="example2",
        support=SupportKind.Stieltjes,
        log_density=log_g,
        log_density_derivative=lambda x: -1 / (3 * x) - (2 / 3) * np.power(x, -1 / 3),
        threshold=threshold,
        normalized=True,
        log_norm_constant=0.0,
        provenance=("example2",),
    )


def geometric(q: float = 0.5, threshold: int = 5) -> PmfSpec:
    """p_n = (1 − q)·qⁿ on ℕ₀."""
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1).")
    log_q = math.log(q)
    return PmfSpec(
        name="geometric",
        support=SupportKind.NonnegativeInteger,
        log_pmf=lambda n: math.log1p(-q) + np.asarray(n, dtype=float) * log_q,
        threshold=threshold,
        normalized=True,
        log_norm_constant=0.0,
        provenance=(f"geometric(q={q:g})",),
        params={"q": q},
    )


def sym_power_pmf(lam: float = 1.0, threshold: int = 4) -> PmfSpec:
    """p_j = c·exp(−|j|^λ) on ℤ."""
    if lam <= 0:
        raise ValueError("lam must be positive.")
    return PmfSpec(
        name="sym_power_pmf",
        support=SupportKind.IntegerSymmetric,
        log_pmf=lambda j: -np.power(np.abs(np.asarray(j, dtype=float)), lam),
        threshold=threshold,
        provenance=(f"sym_power_pmf(lam={lam:g})",),
        params={"lam": lam},
    )


FAMILIES: dict[str, Callable[..., AnySpec]] = {
    "gaussian": gaussian,
    "exp": exponential,
    "exp_power": exp_power,
    "example1": example1,
    "lognormal": lognormal,
    "example2": example2,
    "geometric": geometric,
    "sym_power_pmf": sym_power_pmf,
}

TRANSFORMS: dict[str, Callable[..., AnySpec]] = {
    "symmetrize_sqrt": symmetrize_sqrt,
    "symmetrize_pmf": symmetrize_pmf,
    "square_pushforward": square_pushforward,
    "perturb_bounded_sin": perturb_bounded_sin,
    "ceiling_u_variant": ceiling_u_variant,
    "floor_discretize": floor_discretize,
}


def _expect(conclusion: Conclusion, rule: RuleId) -> ExpectedVerdict:
    return ExpectedVerdict(conclusion=conclusion, rule=rule)


DET = Conclusion.Determinate
INDET = Conclusion.Indeterminate


def _named(spec: AnySpec, name: str) -> AnySpec:
    return spec.model_copy(update={"name": name})


def catalog() -> list[CatalogEntry]:
    """Built-in distributions with the verdicts fixed by theory."""
    base2 = example2()
    entries = [
        CatalogEntry(
            name="gaussian",
            parameters={"sigma": 1.0},
            spec=gaussian(1.0),
            expected_verdict=_expect(DET, RuleId.Thm1),
            notes="(1) and (2) hold analytically; K* integrand ~ 1/(2 ln x).",
        ),
        CatalogEntry(
            name="exp",
            parameters={"lam": 1.0},
            spec=exponential(1.0),
            expected_verdict=_expect(DET, RuleId.Thm2),
            notes="(3) integrand 1/ln x; u(x) = x/ln x increasing beyond e.",
        ),
        CatalogEntry(
            name="exp_power_0.5",
            parameters={"lam": 0.5},
            spec=_named(exp_power(0.5, threshold=8.0), "exp_power_0.5"),
            expected_verdict=_expect(INDET, RuleId.KreinIndetH),
            notes="Krein integrand ~ x^{-3/2} is integrable.",
        ),
        CatalogEntry(
            name="exp_power_1.5",
            parameters={"lam": 1.5},
            spec=_named(exp_power(1.5, threshold=2.0), "exp_power_1.5"),
            expected_verdict=_expect(DET, RuleId.Thm1),
        ),
        CatalogEntry(
            name="example1",
            parameters={"alpha": 1.0},
            spec=example1(1.0),
            expected_verdict=_expect(DET, RuleId.LinDet),
            notes="K* finite, converse Krein infinite, condition (L) holds.",
        ),
        CatalogEntry(
            name="example1_alpha_0.5",
            parameters={"alpha": 0.5},
            spec=_named(example1(0.5), "example1_alpha_0.5"),
            expected_verdict=_expect(DET, RuleId.LinDet),
        ),
        CatalogEntry(
            name="lognormal",
            parameters={"mu": 0.0, "sigma": 1.0},
            spec=lognormal(),
            expected_verdict=_expect(INDET, RuleId.KreinIndetS),
            notes="Classical indeterminate law; (7S) integrand ~ 2(ln x)²/x².",
        ),
        CatalogEntry(
            name="example2",
            spec=base2,
            expected_verdict=_expect(DET, RuleId.Thm2),
            notes="Density of ξ^{3/2}, ξ ~ Exp(1).",
        ),
        CatalogEntry(
            name="example2_ceil_argument",
            spec=_named(ceiling_u_variant(base2, CeilMode.CeilArgument), "example2_ceil_argument"),
            expected_verdict=_expect(DET, RuleId.Lemma4Domination),
            notes="u(⌈x⌉) ≥ u(x); not differentiable.",
        ),
        CatalogEntry(
            name="example2_ceil_value",
            spec=_named(ceiling_u_variant(base2, CeilMode.CeilValue), "example2_ceil_value"),
            expected_verdict=_expect(DET, RuleId.Lemma4Domination),
            notes="⌈u(x)⌉ ≥ u(x); not differentiable.",
        ),
        CatalogEntry(
            name="example2_sin",
            parameters={"amplitude": 0.5},
            spec=_named(perturb_bounded_sin(base2, 0.5), "example2_sin"),
            expected_verdict=_expect(DET, RuleId.MomentDomination),
            notes="Oscillating perturbation; (4) and (5) are not applicable.",
        ),
        CatalogEntry(
            name="example2_floor",
            spec=_named(floor_discretize(base2), "example2_floor"),
            expected_verdict=_expect(DET, RuleId.MomentDomination),
            notes="⌊ξ^{3/2}⌋ has moments below those of ξ^{3/2}.",
        ),
        CatalogEntry(
            name="geometric",
            parameters={"q": 0.5},
            spec=geometric(0.5),
            expected_verdict=_expect(DET, RuleId.Thm4),
        ),
        CatalogEntry(
            name="sym_exp_pmf",
            parameters={"lam": 1.0},
            spec=_named(sym_power_pmf(1.0, threshold=4), "sym_exp_pmf"),
            expected_verdict=_expect(DET, RuleId.Thm3),
        ),
        CatalogEntry(
            name="sym_sqrt_pmf",
            parameters={"lam": 0.5},
            spec=_named(sym_power_pmf(0.5, threshold=8), "sym_sqrt_pmf"),
            expected_verdict=_expect(INDET, RuleId.PedersenIndet),
            notes="Σ √j/(1+j²) converges.",
        ),
        CatalogEntry(
            name="exp_symmetrized",
            spec=_named(symmetrize_sqrt(exponential(1.0)), "exp_symmetrized"),
            expected_verdict=_expect(DET, RuleId.Thm1),
            notes="h(x) = |x|e^{−x²}.",
        ),
        CatalogEntry(
            name="chi_square",
            spec=_named(square_pushforward(gaussian(1.0)), "chi_square"),
            expected_verdict=_expect(DET, RuleId.Thm2),
            notes="Square of a standard normal.",
        ),
    ]
    names = [e.name for e in entries]
    assert len(names) == len(set(names)), "catalog names must be unique."
    return entries


def catalog_entry(name: str) -> CatalogEntry:
    for entry in catalog():
        if entry.name == name:
            return entry
    raise SpecError(f"Unknown catalog entry '{name}'.")


# Spec documents


class TransformStep(BaseModel):
    model_config = ConfigDict(extra="forbid")

    op: str
    args: dict[str, Any] = {}


class SpecDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    family: str
    params: dict[str, float] = {}
    transforms: list[TransformStep] = []
    threshold: Optional[float] = None


def _line_of(text: str, key: Union[str, int]) -> Optional[int]:
    needle = f'"{key}"'
    for lineno, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return lineno
    return 1 if text.strip() else None


def _call(func: Callable[..., AnySpec], args: dict, *positional) -> AnySpec:
    accepted = list(inspect.signature(func).parameters)[len(positional):]
    unknown = sorted(set(args) - set(accepted))
    if unknown:
        raise ValueError(f"unknown argument(s) {', '.join(unknown)} for {func.__name__}")
    return func(*positional, **args)


def build_spec(document: SpecDocument, text: str = "") -> AnySpec:
    """Builds a spec from a validated document; transforms apply left to right."""
    if document.family not in FAMILIES:
        raise SpecError(f"Unknown family '{document.family}'.", _line_of(text, "family"))
    try:
        spec = _call(FAMILIES[document.family], document.params)
    except (ValueError, TypeError) as e:
        raise SpecError(f"Invalid params for {document.family}: {e}", _line_of(text, "params"))
    for step in document.transforms:
        if step.op not in TRANSFORMS:
            raise SpecError(f"Unknown transform '{step.op}'.", _line_of(text, step.op))
        try:
            spec = _call(TRANSFORMS[step.op], step.args, spec)
        except (ValueError, TypeError, InvalidTransformError) as e:
            raise SpecError(f"Transform {step.op} failed: {e}", _line_of(text, step.op))
    if document.threshold is not None:
        spec = with_threshold(spec, document.threshold, _line_of(text, "threshold"))
    logger.debug(f"built spec {spec.name} with provenance {spec.provenance}")
    return spec


def with_threshold(spec: AnySpec, threshold: float, line: Optional[int] = None) -> AnySpec:
    if spec.is_pmf:
        if threshold != int(threshold) or threshold < 2:
            raise SpecError("pmf threshold must be an integer ≥ 2.", line)
        threshold = int(threshold)
    elif not threshold > 1:
        raise SpecError("density threshold must exceed 1.", line)
    last = spec.provenance[-1] if spec.provenance else ""
    if last.startswith(CEILING_STEP) and spec.base is not None:
        # the ceiling cut follows the threshold
        mode = CeilMode(last[len(CEILING_STEP) : -1])
        base = spec.base.model_copy(update={"threshold": threshold})
        return ceiling_u_variant(base, mode).model_copy(update={"name": spec.name})
    return spec.model_copy(update={"threshold": threshold})


def load_spec_json(text: str) -> AnySpec:
    """Parses spec JSON text; every error is reported as a SpecError with a line number."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise SpecError(f"Malformed JSON: {e.msg}", e.lineno)
    if not isinstance(raw, dict):
        raise SpecError("Spec must be a JSON object.", 1)
    try:
        document = SpecDocument.model_validate(raw)
    except ValidationError as e:
        error = e.errors()[0]
        key = error["loc"][0] if error["loc"] else ""
        raise SpecError(f"{'.'.join(str(p) for p in error['loc'])}: {error['msg']}", _line_of(text, key))
    try:
        return build_spec(document, text)
    except SpecError:
        raise
    except MomentDetException as e:
        raise SpecError(str(e), 1)


def load_spec_file(path: str) -> AnySpec:
    with open(path, encoding="utf-8") as f:
        return load_spec_json(f.read())
