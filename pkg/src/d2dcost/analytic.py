"""Closed-form expected costs under periodic repair.

Within one repair interval the number of live storage nodes is a pure death
process started at ``n`` with rate ``i * mu`` in state ``i``.  Because the
rates are integer multiples of ``mu``, the partial-fraction weights of the
hypoexponential passage time are rationals that do not depend on ``mu``; they
are computed exactly to avoid cancellation between alternating terms.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from scipy.special import gammaincc

from .model import NetworkParams, StorageCode

__all__ = [
    "NumericalInstabilityError",
    "CostBreakdown",
    "RepairSplit",
    "binomial_pmf",
    "expected_repairs",
    "repair_cost",
    "d2d_download_probability",
    "download_cost",
    "total_cost",
    "limit_delta_zero",
    "limit_delta_infinity",
    "hypoexp_pdf",
    "hypoexp_mean",
    "wrapped_erlang_pdf",
    "erlang_pdf",
]

# Largest tolerated negative excursion before a probability is clamped.
CLAMP_TOLERANCE = 1e-9
# Truncation bound for the wrapped Erlang series.
SERIES_TAIL = 1e-12


class NumericalInstabilityError(ArithmeticError):
    pass


@dataclass(frozen=True)
class CostBreakdown:
    """Expected cost rates in c.u./(bit t.u.) at repair interval ``delta``."""

    delta: float
    repair: float
    download: float
    total: float
    normalized_total: float

    @classmethod
    def from_parts(cls, delta, repair, download, params: NetworkParams):
        total = repair + download
        scale = params.N * params.omega * params.rho_bs
        normalized = total / scale if scale > 0 else math.nan
        return cls(delta, repair, download, total, normalized)


@dataclass(frozen=True)
class RepairSplit:
    """Expected repairs per interval, by source, and the survival probability."""

    d2d: float
    bs: float
    p: float

    @property
    def total(self) -> float:
        return self.d2d + self.bs


def _log_binomial_pmf(i, n, p, q):
    if p == 0.0:
        return 0.0 if i == 0 else -math.inf
    if q == 0.0:
        return 0.0 if i == n else -math.inf
    log_c = math.lgamma(n + 1) - math.lgamma(i + 1) - math.lgamma(n - i + 1)
    return log_c + i * math.log(p) + (n - i) * math.log(q)


def binomial_pmf(i: int, n: int, p: float, q: float | None = None) -> float:
    """``C(n, i) p^i (1-p)^(n-i)``, evaluated in log space.

    ``q`` may be passed as an accurately computed ``1 - p`` (e.g. from
    ``expm1``) when ``p`` is close to one.
    """
    if not 0 <= i <= n:
        raise ValueError(f"i={i} outside [0, {n}]")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0, 1]")
    if q is None:
        q = 1.0 - p
    return math.exp(_log_binomial_pmf(i, n, p, q))


def _survival(mu, delta):
    x = mu * delta
    if math.isinf(x):
        return 0.0, 1.0
    return math.exp(-x), -math.expm1(-x)


def expected_repairs(n: int, r: int, mu: float, delta: float) -> RepairSplit:
    """Expected repairs per interval served by D2D (``i >= r`` survivors) and by the BS."""
    if delta < 0:
        raise ValueError("delta must be >= 0")
    if not 1 <= r <= n:
        raise ValueError(f"r={r} outside [1, {n}]")
    p, q = _survival(mu, delta)
    terms = [(n - i) * binomial_pmf(i, n, p, q) for i in range(n + 1)]
    return RepairSplit(d2d=math.fsum(terms[r:]), bs=math.fsum(terms[:r]), p=p)


def _check_delta(delta):
    if delta == 0:
        raise ZeroDivisionError("delta = 0 is the instantaneous-repair limit; use limit_delta_zero")
    if not delta > 0:
        raise ValueError(f"delta must be > 0, got {delta!r}")


def repair_cost(code: StorageCode, params: NetworkParams, delta: float) -> float:
    _check_delta(delta)
    if math.isinf(delta):
        return 0.0
    split = expected_repairs(code.n, code.r, params.mu, delta)
    spent = (params.rho_bs * code.gamma_bs * split.bs
             + params.rho_d2d * code.gamma_d2d * split.d2d)
    return spent / (params.M * delta)


@lru_cache(maxsize=None)
def _stage_weights(n: int, h: int) -> tuple[Fraction, ...]:
    """Exact ``prod_{j != i} j / (j - i)`` for ``i = h..n``."""
    weights = []
    for i in range(h, n + 1):
        w = Fraction(1)
        for j in range(h, n + 1):
            if j != i:
                w *= Fraction(j, j - i)
        weights.append(w)
    return tuple(weights)


def _clamp_probability(value, what):
    if value < -CLAMP_TOLERANCE or value > 1 + CLAMP_TOLERANCE:
        raise NumericalInstabilityError(f"{what} evaluated to {value!r}, outside [0, 1]")
    return min(max(value, 0.0), 1.0)


def _check_access(n, h):
    if not 1 <= h <= n:
        raise ValueError(f"h={h} outside [1, {n}]")


def _shortfall(x):
    """``1 - (1 - exp(-x)) / x``, accurate for small ``x``."""
    if x < 0.1:
        # sum_{m>=1} (-1)^(m+1) x^m / (m+1)!
        term = total = x / 2
        for m in range(2, 12):
            term *= -x / (m + 1)
            total += term
        return total
    return (x + math.expm1(-x)) / x


@lru_cache(maxsize=None)
def _miss_series(n: int, h: int, terms: int = 80) -> tuple[float, ...]:
    """Coefficients of the expansion of Pr{BS download} in powers of ``mu * delta``.

    Moments ``sum_i w_i i^m`` vanish for ``1 <= m <= n - h``, so the expansion
    starts at power ``n - h + 1``; coefficient ``m`` is
    ``(-1)^(m+1) sum_i w_i i^m / (m+1)!``.
    """
    weights = _stage_weights(n, h)
    first = n - h + 1
    coefs = []
    for m in range(first, first + terms):
        moment = sum(w * i ** m for w, i in zip(weights, range(h, n + 1)))
        coefs.append(float((-1) ** (m + 1) * moment / math.factorial(m + 1)))
    return tuple(coefs)


def _rounding_bound(terms):
    return 8 * sys.float_info.epsilon * math.fsum(abs(t) for t in terms)


def d2d_download_probability(n: int, h: int, mu: float, delta: float) -> float:
    """Fraction of a repair interval during which at least ``h`` storage nodes are live.

    Three algebraically equal forms are evaluated: the direct time average,
    one minus the time-averaged probability of having dropped below ``h``
    (using that the stage weights sum to one), and the power series of the
    latter, whose low-order terms vanish exactly.  The form with the smallest
    rounding bound is returned.
    """
    _check_access(n, h)
    _check_delta(delta)
    if mu == 0:
        return 1.0
    if math.isinf(delta):
        return 0.0
    x = mu * delta
    weights = [float(w) for w in _stage_weights(n, h)]
    stages = [i * x for i in range(h, n + 1)]

    hit_terms = [w * -math.expm1(-s) / s for w, s in zip(weights, stages)]
    candidates = [(_rounding_bound(hit_terms), math.fsum(hit_terms))]
    miss_terms = [w * _shortfall(s) for w, s in zip(weights, stages)]
    candidates.append((_rounding_bound(miss_terms), 1.0 - math.fsum(miss_terms)))
    if n * x <= 8:
        first = n - h + 1
        series = [c * x ** (first + k) for k, c in enumerate(_miss_series(n, h))]
        if abs(series[-1]) + abs(series[-2]) <= sys.float_info.epsilon * abs(series[0]):
            candidates.append((_rounding_bound(series), 1.0 - math.fsum(series)))
    _, value = min(candidates)
    return _clamp_probability(value, "Pr{D2D download}")


def download_cost(code: StorageCode, params: NetworkParams, delta: float) -> float:
    pr = d2d_download_probability(code.n, code.h, params.mu, delta)
    d2d_per_bit = params.rho_d2d * code.h * code.alpha / params.M
    return params.N * params.omega * (params.rho_bs + (d2d_per_bit - params.rho_bs) * pr)


def limit_delta_zero(code: StorageCode, params: NetworkParams) -> CostBreakdown:
    """Instantaneous repair: every repair and every download goes D2D."""
    repair = params.rho_d2d * code.n * params.mu * code.gamma_d2d / params.M
    download = params.rho_d2d * params.N * params.omega * code.h * code.alpha / params.M
    return CostBreakdown.from_parts(0.0, repair, download, params)


def limit_delta_infinity(params: NetworkParams) -> float:
    """Never repairing: all downloads eventually come from the BS."""
    if not params.mu > 0:
        raise ValueError("the delta -> infinity limit requires mu > 0")
    return params.N * params.omega * params.rho_bs


def total_cost(code: StorageCode, params: NetworkParams, delta: float) -> CostBreakdown:
    if delta == 0:
        return limit_delta_zero(code, params)
    if math.isinf(delta) and params.mu > 0:
        return CostBreakdown.from_parts(delta, 0.0, limit_delta_infinity(params), params)
    return CostBreakdown.from_parts(
        delta,
        repair_cost(code, params, delta),
        download_cost(code, params, delta),
        params,
    )


def hypoexp_pdf(n: int, h: int, mu: float, t: float) -> float:
    """Density of the time for the death process to fall from ``n`` to ``h - 1`` live nodes."""
    _check_access(n, h)
    if t < 0:
        raise ValueError("t must be >= 0")
    if not mu > 0:
        raise ValueError("mu must be > 0")
    terms = [float(w) * i * mu * math.exp(-i * mu * t)
             for i, w in zip(range(h, n + 1), _stage_weights(n, h))]
    value = math.fsum(terms)
    # each term carries a relative rounding error of a few ulps
    noise = 64 * sys.float_info.epsilon * math.fsum(abs(x) for x in terms)
    if value < -max(noise, CLAMP_TOLERANCE):
        raise NumericalInstabilityError(f"hypoexponential density evaluated to {value!r}")
    return max(value, 0.0)


def hypoexp_mean(n: int, h: int, mu: float) -> float:
    return math.fsum(1.0 / (i * mu) for i in range(h, n + 1))


def erlang_pdf(l: int, omega: float, t: float) -> float:
    """Density of the time of the ``l``-th event of a rate-``omega`` Poisson process."""
    if t < 0:
        return 0.0
    if t == 0:
        return omega if l == 1 else 0.0
    return math.exp(l * math.log(omega) + (l - 1) * math.log(t) - omega * t - math.lgamma(l))


def _erlang_sf(l, omega, t):
    return float(gammaincc(l, omega * t))


def wrapped_erlang_pdf(l: int, omega: float, delta: float, t: float) -> float:
    """Density of ``W_l mod delta`` on ``[0, delta)``.

    The series over wrapped copies stops at the first copy ``x`` past the
    Erlang mode with ``P(W_l > x) / delta < SERIES_TAIL``; past the mode the
    density is decreasing, which bounds the sum of all later copies by that
    quantity.
    """
    if int(l) != l or l < 1:
        raise ValueError(f"l must be a positive integer, got {l!r}")
    if not delta > 0 or not omega > 0:
        raise ValueError("omega and delta must be > 0")
    if not 0 <= t < delta:
        raise ValueError(f"t={t!r} outside [0, {delta!r})")
    mode = (l - 1) / omega
    terms = []
    i = 0
    while True:
        x = t + i * delta
        terms.append(erlang_pdf(l, omega, x))
        if x >= mode and _erlang_sf(l, omega, x) / delta < SERIES_TAIL:
            break
        i += 1
    return math.fsum(terms)
