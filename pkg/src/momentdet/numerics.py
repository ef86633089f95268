import logging
import math
import warnings
from typing import Callable, Iterable, Optional

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.special import logsumexp

from .core import NumericError

logger = logging.getLogger(__name__)

INV_PHI = (math.sqrt(5) - 1) / 2  # 1 / phi
INV_PHI_SQUARE = (3 - math.sqrt(5)) / 2  # 1 / phi^2

LogFunction = Callable[[float], float]


def golden_section_max(
    f: LogFunction, a: float, b: float, xtol: float = 1e-10
) -> tuple[float, float]:
    """
    Golden-section search for the maximum of a unimodal f on [a, b].

    xtol is relative to the magnitude of the bracket. Returns the best
    point seen together with its value; a maximum sitting on an endpoint
    is returned as that endpoint.
    """
    a, b = min(a, b), max(a, b)
    h = b - a
    tol = xtol * max(abs(a), abs(b), 1.0)
    fa, fb = f(a), f(b)
    best = (a, fa) if fa >= fb else (b, fb)
    if h <= tol:
        return best

    n = int(math.ceil(math.log(tol / h) / math.log(INV_PHI)))

    c = a + INV_PHI_SQUARE * h
    d = a + INV_PHI * h
    yc = f(c)
    yd = f(d)

    for _ in range(n - 1):
        if yc > yd:
            b = d
            d = c
            yd = yc
            h = INV_PHI * h
            c = a + INV_PHI_SQUARE * h
            yc = f(c)
        else:
            a = c
            c = d
            yc = yd
            h = INV_PHI * h
            d = a + INV_PHI * h
            yd = f(d)

    inner = (c, yc) if yc >= yd else (d, yd)
    # endpoints win only when strictly better, so ties resolve to the interior
    if best[1] > inner[1]:
        return best
    return inner


def locate_peak(
    f: LogFunction,
    start: float,
    lo: float = 0.0,
    cap: float = 1e15,
    xtol: float = 1e-10,
) -> tuple[float, float]:
    """
    Brackets the maximum of a unimodal f on [lo, cap] by doubling (or halving)
    from start, then refines it by golden-section search.

    Raises NumericError when f still increases at cap.
    """
    if start <= lo:
        start = max(lo * 2, lo + 1.0) if lo > 0 else 1.0
    x, fx = start, f(start)
    up = 2 * x
    fup = f(up)
    if fup > fx:
        while fup > fx:
            x, fx = up, fup
            up = 2 * x
            if up > cap:
                raise NumericError(
                    f"no interior maximum: function still increasing at x={x:.6g}"
                )
            fup = f(up)
        left = max(x / 2, lo)
    else:
        left = max(x / 2, lo)
        floor = max(lo, 1e-12)
        while left > floor:
            f_left = f(left)
            if f_left <= fx:
                break
            up, x, fx = x, left, f_left
            left = max(x / 2, lo)
        else:
            left = lo
    return golden_section_max(f, left, up, xtol)


def geometric_ladder(start: float, ratio: float, points: int) -> np.ndarray:
    return start * ratio ** np.arange(points, dtype=float)


def integer_ladder(start: int, ratio: float, points: int) -> np.ndarray:
    """Distinct integers start·ratio^i (rounded), increasing."""
    raw = np.floor(start * ratio ** np.arange(points, dtype=float))
    return np.unique(raw.astype(np.int64))


def _quad_panel(f: LogFunction, shift: float, a: float, b: float, epsrel: float):
    def integrand(x):
        value = f(x) - shift
        if value == -math.inf or math.isnan(value):
            return 0.0
        return math.exp(min(value, 700.0))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        value, error = quad(integrand, a, b, epsabs=0.0, epsrel=epsrel, limit=400)
    return value, error


def _extend_cuts(f: LogFunction, cuts: list, lo: float, hi: float, floor: float, steps: int):
    """Adds doubling cuts above and halving cuts below until f drops to floor."""
    x = cuts[-1]
    upper = []
    for _ in range(steps):
        if not f(x) > floor:
            break
        x *= 2.0
        if x >= hi:
            break
        upper.append(x)
    x = cuts[0]
    lower = []
    for _ in range(steps):
        if not f(x) > floor:
            break
        x *= 0.5
        if x <= lo:
            break
        lower.append(x)
    return [*reversed(lower), *cuts, *upper]


def log_integral(
    f: LogFunction,
    center: float,
    lo: float = 0.0,
    hi: float = math.inf,
    breaks: Iterable[float] = (),
    octaves: int = 6,
    epsrel: float = 1e-12,
    allow_zero: bool = False,
    tail_nats: float = 60.0,
    max_extension: int = 64,
) -> tuple[float, float]:
    """
    Computes ln ∫_lo^hi exp(f(x)) dx on panels center·2^j, j = -octaves..octaves.

    Returns (log value, relative error estimate). The integrand is shifted by
    the largest sampled value of f so panels neither overflow nor underflow.
    Panels keep doubling (halving) past the outer octaves while f stays within
    tail_nats of that value; an infinite hi is clipped at the first cut below
    it. With allow_zero, an integrand that vanishes on the range gives (-inf, 0).
    """
    if hi <= lo:
        raise NumericError(f"empty integration range [{lo:.6g}, {hi:.6g}]")
    cuts = {center * 2.0**j for j in range(-octaves, octaves + 1)}
    cuts.update(breaks)
    cuts = sorted(c for c in cuts if lo < c < hi)

    probes = [f(c) for c in cuts] or [f(0.5 * (lo + hi)) if math.isfinite(hi) else f(lo + 1.0)]
    finite = [p for p in probes if math.isfinite(p)]
    if not finite:
        if allow_zero:
            return -math.inf, 0.0
        raise NumericError(f"integrand vanishes on every probe near x={center:.6g}")
    shift = max(finite)

    if cuts and octaves > 0:
        cuts = _extend_cuts(f, cuts, lo, hi, shift - tail_nats, max_extension)
        shift = max([shift, *(v for v in (f(cuts[0]), f(cuts[-1])) if math.isfinite(v))])
        if math.isinf(hi) and not f(cuts[-1]) > shift - tail_nats:
            hi = cuts.pop()
    edges = [lo, *cuts, hi]

    total = 0.0
    error = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        value, err = _quad_panel(f, shift, a, b, epsrel)
        if not math.isfinite(value) or value < 0:
            raise NumericError(f"quadrature failed on panel [{a:.6g}, {b:.6g}]")
        total += value
        error += err
    if total <= 0:
        if allow_zero:
            return -math.inf, 0.0
        raise NumericError(f"integral underflowed on [{lo:.6g}, {hi:.6g}]")
    return shift + math.log(total), error / total


def log_sum_terms(
    f: Callable[[np.ndarray], np.ndarray],
    start: int,
    stop: Optional[int] = None,
    cutoff_nats: float = 60.0,
    block: int = 256,
    max_terms: int = 10**8,
) -> tuple[float, float]:
    """
    Computes ln Σ_{j=start}^{stop} exp(f(j)) with f vectorized over integers.

    With stop=None the summation runs until the terms have fallen cutoff_nats
    below the running maximum while decreasing; the remainder is bounded by a
    geometric tail and returned as a relative error estimate.
    """
    parts = []
    running_max = -math.inf
    j = start
    size = block
    while True:
        end = j + size if stop is None else min(j + size, stop + 1)
        if end <= j:
            break
        values = np.asarray(f(np.arange(j, end, dtype=np.int64)), dtype=float)
        if np.any(np.isnan(values)):
            raise NumericError(f"series term undefined near j={j}")
        parts.append(logsumexp(values))
        running_max = max(running_max, float(np.max(values)))
        j = end
        if stop is not None:
            if j > stop:
                break
            continue
        last = values[-1]
        decreasing = values.size < 2 or values[-1] <= values[-2]
        if last < running_max - cutoff_nats and decreasing:
            break
        if j - start > max_terms:
            raise NumericError(f"series did not decay within {max_terms} terms")
        size = min(size * 2, 1 << 16)

    if not parts:
        raise NumericError(f"empty summation range starting at j={start}")
    total = float(logsumexp(parts))
    if not math.isfinite(total):
        raise NumericError(f"series starting at j={start} vanished or overflowed")
    if stop is not None or values.size < 2:
        return total, 0.0
    log_ratio = float(values[-1] - values[-2])
    if log_ratio >= 0:
        return total, math.inf
    rho = math.exp(log_ratio)
    log_tail = float(values[-1]) + math.log(rho / (1 - rho))
    return total, math.exp(log_tail - total)
