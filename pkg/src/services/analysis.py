"""Pólya numbers and asymptotic fits from exact term prefixes.

Both work on the normalized sequence t(n) = r(n) / q^n (or r(2n) / q^(2n) when
odd terms vanish), whose tail behaves like C n^(-beta) (1 + a/n + ...).
Limits of slowly converging sequences are taken with Richardson extrapolation.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import mpmath
from mpmath import mpf

from src.services.errors import InsufficientTermsError
from src.services.settings import get_settings
from src.services.termtable import Normalization, TermTable

_LOGGER = logging.getLogger(__name__)

RICHARDSON_ORDER = 8
RECURRENT_BETA = 1.05
TRANSIENT_BETA = 1.2
SNAP_TOLERANCE = 1e-3
CONFIDENT_TERMS = 200


@dataclass(frozen=True)
class PolyaEstimate:
    value: float
    tail_bound: float
    terms_used: int
    status: str
    green_value: float
    beta: float
    C: float

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "tail_bound": self.tail_bound,
            "terms_used": self.terms_used,
            "status": self.status,
            "green_value": self.green_value if math.isfinite(self.green_value) else None,
            "beta": self.beta,
            "C": self.C,
        }


@dataclass(frozen=True)
class AsymptoticFit:
    rho: float
    alpha: float
    C: float
    residual: float
    alpha_snapped: bool
    low_confidence: bool
    normalization: str

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "alpha": self.alpha,
            "C": self.C,
            "residual": self.residual,
            "alpha_snapped": self.alpha_snapped,
            "low_confidence": self.low_confidence,
            "normalization": self.normalization,
        }


def richardson(A: Callable[[int], mpf], n: int, order: int) -> mpf:
    r"""Richardson extrapolation of lim A(k) from A(n), ..., A(n + order).

    .. math:: \sum_{j=0}^{N} A(n+j) (n+j)^N (-1)^{j+N} / (j! (N-j)!)

    Exact when A(k) is a polynomial of degree `order` in 1/k. Unlike
    mpmath.richardson, which starts at index `order`, the window may start
    anywhere, so the last terms of a long table can be used.

    Parameters
    ----------
    A : callable
        Sequence accessor, A(k) for integer k.
    n : int
        First index used; must be positive.
    order : int
        Number of 1/k correction terms eliminated.

    Returns
    -------
    limit : mpf
        Extrapolated limit.
    """
    if n < 1:
        raise ValueError(f"Richardson start index must be positive, got {n}")
    total = mpf(0)
    for j in range(order + 1):
        sign = -1 if (j + order) % 2 else 1
        total += sign * A(n + j) * mpf(n + j) ** order / (math.factorial(j) * math.factorial(order - j))
    return total


def _extrapolate(A: Callable[[int], mpf], last: int, order: int = RICHARDSON_ORDER) -> tuple[mpf, mpf]:
    """Limit from the indices ending at last, and |difference| to one order lower."""
    order = min(order, last - 1)
    if order < 1:
        raise InsufficientTermsError("too few terms to extrapolate", required=RICHARDSON_ORDER + 3)
    value = richardson(A, last - order, order)
    lower = richardson(A, last - order + 1, order - 1)
    return value, abs(value - lower)


def _snap_half(x: mpf) -> tuple[mpf, bool]:
    nearest = mpf(round(float(x) * 2)) / 2
    if abs(x - nearest) < SNAP_TOLERANCE:
        return nearest, True
    return x, False


def _sequence_view(terms: TermTable) -> tuple[Sequence[int], int, Normalization]:
    """
    Smooth sequence and its step base.

    Raw tables with vanishing odd terms are replaced by their even part.
    """
    if not terms.is_exact:
        raise ValueError("analysis needs exact terms")
    if terms.normalization is Normalization.TILDE_ODD:
        raise ValueError("analysis needs a raw or tilde table")
    if terms.normalization is Normalization.RAW and terms.spec.parity_vanishing:
        terms = terms.to_tilde()
    return terms.terms, terms.step_base, terms.normalization


def _normalized(values: Sequence[int], base: int) -> list[mpf]:
    b = mpf(base)
    return [mpf(v) / b ** n for n, v in enumerate(values)]


def _hurwitz_tail(beta: mpf, C: mpf, C1: mpf, start: int) -> mpf:
    """sum_{n >= start} (C n^-beta + C1 n^(-beta-1))."""
    return C * mpmath.zeta(beta, start) + C1 * mpmath.zeta(beta + 1, start)


def polya_estimate(terms: TermTable, tolerance: float = 5e-4) -> PolyaEstimate:
    """Return probability 1 - 1/P(0,1) with a fitted tail.

    Parameters
    ----------
    terms : TermTable
        Exact raw or tilde prefix of the return-count sequence.
    tolerance : float
        Largest acceptable bound on the truncation error of the result.

    Returns
    -------
    estimate : PolyaEstimate
        Recurrent lattices give value 1 and an infinite green_value.

    Raises
    ------
    InsufficientTermsError
        The tail exponent is too close to 1 to classify, or the tail bound
        exceeds `tolerance`; `required` projects the table length needed.
    """
    values, base, normalization = _sequence_view(terms)
    count = len(values)
    if count < RICHARDSON_ORDER + 4:
        raise InsufficientTermsError(f"{count} terms are too few for a Pólya estimate", required=RICHARDSON_ORDER + 4)

    with mpmath.workdps(get_settings().analysis_dps):
        t = _normalized(values, base)
        last = count - 1

        def local_beta(n: int) -> mpf:
            return -(mpmath.log(t[n + 1]) - mpmath.log(t[n])) / mpmath.log1p(mpf(1) / n)

        beta, beta_residual = _extrapolate(local_beta, last - 1)
        _LOGGER.debug(f"{terms.spec.label}: tail exponent {mpmath.nstr(beta, 12)} (residual {mpmath.nstr(beta_residual, 3)})")

        if beta <= RECURRENT_BETA:
            _LOGGER.info(f"{terms.spec.label} is recurrent (tail exponent {mpmath.nstr(beta, 6)})")
            return PolyaEstimate(1.0, 0.0, count, "recurrent", math.inf, float(beta), 0.0)
        if beta < TRANSIENT_BETA:
            raise InsufficientTermsError(
                f"tail exponent {mpmath.nstr(beta, 6)} does not separate recurrent from transient",
                required=2 * count,
            )
        beta, _ = _snap_half(beta)

        C, _ = _extrapolate(lambda n: t[n] * mpf(n) ** beta, last)
        n0 = last
        C1 = n0 * (t[n0] * mpf(n0) ** beta - C)

        def green(cutoff: int) -> mpf:
            return mpmath.fsum(t[: cutoff + 1]) + _hurwitz_tail(beta, C, C1, cutoff + 1)

        G = green(n0)
        G_half = green(n0 // 2)
        # the first-order tail correction bounds what the fitted tail can still miss
        correction = abs(C1 * mpmath.zeta(beta + 1, n0 + 1))
        bound_G = max(abs(G - G_half), correction)
        value = 1 - 1 / G
        tail_bound = bound_G / G ** 2

    _LOGGER.info(
        f"{terms.spec.label} {normalization.value}: P = {mpmath.nstr(value, 10)} "
        f"(tail bound {mpmath.nstr(tail_bound, 3)}, {count} terms)"
    )
    if tail_bound >= tolerance:
        # the bound decays at least like n0^-beta
        scale = float(tail_bound / tolerance) ** (1 / float(beta))
        required = int(math.ceil(count * scale * 1.2))
        raise InsufficientTermsError(
            f"tail bound {float(tail_bound):.2e} exceeds tolerance {tolerance:.2e}",
            required=required,
        )
    return PolyaEstimate(float(value), float(tail_bound), count, "transient", float(G), float(beta), float(C))


def asymptotic_fit(terms: TermTable) -> AsymptoticFit:
    """Fit r(n) ~ C rho^n n^alpha on the smooth part of the sequence.

    Parameters
    ----------
    terms : TermTable
        Exact prefix; parity-vanishing raw tables are fitted on their even part.

    Returns
    -------
    fit : AsymptoticFit
        `residual` is the largest relative change between the last two
        Richardson levels over rho, alpha and C.
    """
    values, _, normalization = _sequence_view(terms)
    count = len(values)
    if count < RICHARDSON_ORDER + 4:
        raise InsufficientTermsError(f"{count} terms are too few for an asymptotic fit", required=CONFIDENT_TERMS)

    with mpmath.workdps(get_settings().analysis_dps):
        r = [mpf(v) for v in values]
        last = count - 1

        def ratio(n: int) -> mpf:
            return r[n + 1] / r[n]

        rho, rho_residual = _extrapolate(ratio, last - 1)
        log_rho = mpmath.log(rho)

        def local_alpha(n: int) -> mpf:
            return n * (mpmath.log(r[n + 1] / r[n]) - log_rho)

        alpha, alpha_residual = _extrapolate(local_alpha, last - 1)
        alpha, snapped = _snap_half(alpha)

        def amplitude(n: int) -> mpf:
            return r[n] / rho ** n / mpf(n) ** alpha

        C, C_residual = _extrapolate(amplitude, last)
        residual = max(rho_residual / rho, alpha_residual / max(abs(alpha), 1), C_residual / abs(C))

    low_confidence = count < CONFIDENT_TERMS or residual > SNAP_TOLERANCE
    if low_confidence:
        _LOGGER.warning(
            f"Low-confidence asymptotic fit for {terms.spec.label}: {count} terms, residual {float(residual):.2e}"
        )
    _LOGGER.info(
        f"{terms.spec.label} {normalization.value}: rho = {mpmath.nstr(rho, 10)}, "
        f"alpha = {mpmath.nstr(alpha, 6)}, C = {mpmath.nstr(C, 6)}"
    )
    return AsymptoticFit(
        float(rho), float(alpha), float(C), float(residual), snapped, low_confidence, normalization.value
    )
