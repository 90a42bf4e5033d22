"""
P-finite recurrences and Euler-operator ODEs.

Polynomials are ascending tuples of Python ints; the zero polynomial is the empty
tuple. Recurrences use the backward convention

    sum_l p_l(n) * f(n - l) = 0,    f(n) = 0 for n < 0,

and theta-ODEs are sum_k u_k(z) * theta^k with theta = z d/dz.
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache, reduce
from math import gcd
from typing import Iterable, Optional, Sequence, Union

from sympy import Poly, ZZ, symbols
from sympy.functions.combinatorial.numbers import stirling

from src.services.errors import NonIntegralTermError, OperatorFormatError, SingularRecurrenceError
from src.services.linalg import ff_kernel_vector

_LOGGER = logging.getLogger(__name__)

n_sym, z_sym = symbols("n z")

IntPoly = tuple[int, ...]


# --- dense integer polynomials ---------------------------------------------------

def trim(coeffs: Iterable[int]) -> IntPoly:
    coeffs = [int(c) for c in coeffs]
    while coeffs and coeffs[-1] == 0:
        coeffs.pop()
    return tuple(coeffs)


def poly_eval(coeffs: IntPoly, x):
    """Horner evaluation."""
    acc = 0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def poly_degree(coeffs: IntPoly) -> int:
    return len(coeffs) - 1


def to_sympy(coeffs: IntPoly, var=n_sym) -> Poly:
    return Poly(list(reversed(coeffs)) or [0], var, domain=ZZ)


def from_sympy(poly: Poly) -> IntPoly:
    return trim(reversed([int(c) for c in poly.all_coeffs()]))


def _poly_add(a: IntPoly, b: IntPoly) -> IntPoly:
    size = max(len(a), len(b))
    return trim((a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(size))


def _poly_scale(a: IntPoly, c: int) -> IntPoly:
    return trim(x * c for x in a)


def _mul_z_power(a: IntPoly, j: int) -> IntPoly:
    return (0,) * j + a if a else a


def _content(polys: Sequence[IntPoly]) -> int:
    return reduce(gcd, (c for p in polys for c in p), 0)


def _strip_z_power(polys: Sequence[IntPoly]) -> tuple[IntPoly, ...]:
    shift = min((next(i for i, c in enumerate(p) if c) for p in polys if p), default=0)
    return tuple(p[shift:] for p in polys)


def _normalize(polys: Sequence[IntPoly], sign_of: int) -> tuple[IntPoly, ...]:
    content = _content(polys)
    if content == 0:
        raise OperatorFormatError("operator has no nonzero coefficient")
    if sign_of < 0:
        content = -content
    return tuple(tuple(c // content for c in p) for p in polys)


def integer_roots(coeffs: IntPoly) -> list[int]:
    """Integer roots of a nonzero polynomial, ascending."""
    if not coeffs:
        raise ValueError("zero polynomial has every integer as a root")
    if len(coeffs) == 1:
        return []
    return sorted(int(r) for r in to_sympy(coeffs).ground_roots() if r.is_Integer)


def falling_product(rows: Iterable[int]) -> IntPoly:
    """prod (n - i) over the given rows."""
    poly = to_sympy((1,))
    for i in rows:
        poly = poly * to_sympy((-i, 1))
    return from_sympy(poly)


# --- operators ---------------------------------------------------------------------

def _coerce(coeffs) -> tuple[IntPoly, ...]:
    return tuple(trim(p) for p in coeffs)


@dataclass(frozen=True)
class PolyRec:
    """sum_l p_l(n) f(n - l) = 0."""

    coeffs: tuple[IntPoly, ...]

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _coerce(self.coeffs))
        if not self.coeffs:
            raise OperatorFormatError("recurrence needs at least one coefficient")
        if not self.coeffs[0] or not self.coeffs[-1]:
            raise OperatorFormatError("p_0 and p_L must not vanish identically")

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def degree(self) -> int:
        return max(poly_degree(p) for p in self.coeffs)

    def canonical(self) -> "PolyRec":
        """Content 1 and positive leading coefficient of p_0."""
        return PolyRec(_normalize(self.coeffs, self.coeffs[0][-1]))

    def is_canonical(self) -> bool:
        return self == self.canonical()

    def row(self, n: int, values: Sequence) -> int:
        """sum_l p_l(n) f(n - l) with zero padding below index 0."""
        total = 0
        for ell, p in enumerate(self.coeffs):
            k = n - ell
            if k < 0:
                break
            if p:
                total += poly_eval(p, n) * values[k]
        return total

    def to_dict(self) -> dict:
        return _operator_dict("rec", self.order, self.degree, self.coeffs)

    def __str__(self) -> str:
        return " + ".join(f"({_fmt(p, 'n')})*f(n-{ell})" for ell, p in enumerate(self.coeffs) if p)


@dataclass(frozen=True)
class ThetaODE:
    """(sum_k u_k(z) theta^k) F = 0."""

    coeffs: tuple[IntPoly, ...]

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _coerce(self.coeffs))
        if not self.coeffs or not self.coeffs[-1]:
            raise OperatorFormatError("u_K must not vanish identically")

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def degree(self) -> int:
        return max(poly_degree(p) for p in self.coeffs)

    def u(self, k: int, ell: int) -> int:
        p = self.coeffs[k]
        return p[ell] if ell < len(p) else 0

    def canonical(self) -> "ThetaODE":
        """Common z-power removed, content 1, sign fixed by the z^0 row."""
        polys = _strip_z_power(self.coeffs)
        lead = next(p[0] for p in reversed(polys) if p and p[0])
        return ThetaODE(_normalize(polys, lead))

    def to_dict(self) -> dict:
        return _operator_dict("theta-ode", self.order, self.degree, self.coeffs)

    def __str__(self) -> str:
        return " + ".join(f"({_fmt(p, 'z')})*theta^{k}" for k, p in enumerate(self.coeffs) if p)


@dataclass(frozen=True)
class DiffOpD:
    """(sum_k v_k(z) D^k) F = 0 with D = d/dz."""

    coeffs: tuple[IntPoly, ...]

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _coerce(self.coeffs))
        if not self.coeffs or not self.coeffs[-1]:
            raise OperatorFormatError("v_K must not vanish identically")

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def degree(self) -> int:
        return max(poly_degree(p) for p in self.coeffs)

    def canonical(self) -> "DiffOpD":
        polys = _strip_z_power(self.coeffs)
        return DiffOpD(_normalize(polys, polys[-1][-1]))

    def to_dict(self) -> dict:
        return _operator_dict("d-ode", self.order, self.degree, self.coeffs)


Operator = Union[PolyRec, ThetaODE, DiffOpD]

_KINDS = {"rec": PolyRec, "theta-ode": ThetaODE, "d-ode": DiffOpD}


def _fmt(p: IntPoly, var: str) -> str:
    return " + ".join(f"{c}*{var}^{i}" if i else str(c) for i, c in enumerate(p) if c) or "0"


def _operator_dict(kind: str, order: int, degree: int, coeffs: Sequence[IntPoly]) -> dict:
    return {
        "kind": kind,
        "order": order,
        "degree": degree,
        "coeffs": [[str(c) for c in p] for p in coeffs],
    }


def operator_from_dict(data: dict) -> Operator:
    """Decode the JSON operator format."""
    try:
        cls = _KINDS[data["kind"]]
        coeffs = tuple(tuple(int(c) for c in p) for p in data["coeffs"])
    except (KeyError, TypeError, ValueError) as e:
        raise OperatorFormatError(f"malformed operator record: {e}") from e
    op = cls(coeffs)
    if "order" in data and data["order"] != op.order:
        raise OperatorFormatError(f"declared order {data['order']} but found {op.order}")
    if "degree" in data and data["degree"] != op.degree:
        raise OperatorFormatError(f"declared degree {data['degree']} but found {op.degree}")
    return op


# --- evaluation ----------------------------------------------------------------------

@dataclass(frozen=True)
class Verification:
    passed: bool
    first_failure: Optional[int]
    checked: int

    def __bool__(self) -> bool:
        return self.passed


def _values_and_modulus(terms) -> tuple[Sequence[int], int]:
    return getattr(terms, "terms", terms), getattr(terms, "modulus", 0)


def rec_verify(rec: PolyRec, terms, padded: bool = False) -> Verification:
    """
    Check the recurrence on a term table or plain sequence.

    Rows L <= n < len(terms) are checked; with padded the rows n < L are checked
    too, using f(n) = 0 below index 0. Modular tables are checked modulo their prime.
    """
    values, modulus = _values_and_modulus(terms)
    start = 0 if padded else rec.order
    checked = 0
    for n in range(start, len(values)):
        total = rec.row(n, values)
        if modulus:
            total %= modulus
        if total:
            return Verification(False, n, checked)
        checked += 1
    return Verification(True, None, checked)


def padded_failures(rec: PolyRec, terms) -> list[int]:
    """Rows n < L where the zero-padded recurrence does not hold."""
    values, modulus = _values_and_modulus(terms)
    failures = []
    for n in range(min(rec.order, len(values))):
        total = rec.row(n, values)
        if (total % modulus if modulus else total) != 0:
            failures.append(n)
    return failures


def rec_unroll(rec: PolyRec, initial: Sequence, nmax: int, allow_fractions: bool = False) -> list:
    """
    Extend initial values to indices 0..nmax.

    Raises:
        SingularRecurrenceError: p_0 vanishes at an index that must be computed
        NonIntegralTermError: a value is not an integer (unless allow_fractions)
    """
    if len(initial) < rec.order:
        raise ValueError(f"need {rec.order} initial values, got {len(initial)}")
    values = list(initial[: nmax + 1])
    lead_poly = rec.coeffs[0]
    for n in range(len(values), nmax + 1):
        lead = poly_eval(lead_poly, n)
        if lead == 0:
            raise SingularRecurrenceError(f"leading coefficient vanishes at n={n}", index=n)
        rest = 0
        for ell in range(1, rec.order + 1):
            p = rec.coeffs[ell]
            if p:
                rest += poly_eval(p, n) * values[n - ell]
        if allow_fractions:
            value = Fraction(-rest) / lead
            values.append(value.numerator if value.denominator == 1 else value)
            continue
        if isinstance(rest, Fraction):
            value = -rest / lead
            if value.denominator != 1:
                raise NonIntegralTermError(f"non-integral value at n={n}", index=n)
            values.append(value.numerator)
            continue
        quotient, remainder = divmod(-rest, lead)
        if remainder:
            raise NonIntegralTermError(f"non-integral value at n={n}", index=n)
        values.append(quotient)
    return values


# --- ODE <-> recurrence ----------------------------------------------------------------

def theta_ode_to_rec(ode: ThetaODE) -> PolyRec:
    """p_l(n) = sum_k u_{k,l} (n - l)^k."""
    ode = ode.canonical()
    coeffs = []
    for ell in range(ode.degree + 1):
        g = trim(ode.u(k, ell) for k in range(ode.order + 1))
        coeffs.append(from_sympy(to_sympy(g).shift(-ell)) if g else ())
    return PolyRec(tuple(coeffs)).canonical()


def rec_to_theta_ode(rec: PolyRec, kill_rows: Iterable[int] = ()) -> ThetaODE:
    """
    u_{k,l} = [m^k] p_l(m + l).

    Rows listed in kill_rows are annihilated first by multiplying every p_l by
    prod (n - i); use this when the recurrence only holds from some index on.
    """
    coeffs = rec.coeffs
    kill_rows = sorted(set(kill_rows))
    if kill_rows:
        factor = to_sympy(falling_product(kill_rows))
        coeffs = tuple(from_sympy(to_sympy(p) * factor) if p else () for p in coeffs)
    shifted = [from_sympy(to_sympy(p).shift(ell)) if p else () for ell, p in enumerate(coeffs)]
    order = max(poly_degree(p) for p in shifted)
    u = []
    for k in range(order + 1):
        u.append(trim(p[k] if k < len(p) else 0 for p in shifted))
    return ThetaODE(tuple(u)).canonical()


def minimal_degree_ode(rec: PolyRec) -> ThetaODE:
    """
    ODE of order D + L and degree L for a recurrence of order L and degree D.

    All L boundary rows are killed, so the result annihilates the series
    whatever the recurrence does below index L.
    """
    return rec_to_theta_ode(rec, range(rec.order))


@lru_cache(maxsize=None)
def _stirling2(k: int, j: int) -> int:
    return int(stirling(k, j, kind=2))


@lru_cache(maxsize=None)
def _stirling1_signed(j: int, k: int) -> int:
    return int(stirling(j, k, kind=1, signed=True))


def theta_d_convert(op: Union[ThetaODE, DiffOpD]) -> Union[ThetaODE, DiffOpD]:
    """Switch between theta-form and D-form using z^j D^j = theta(theta-1)...(theta-j+1)."""
    if isinstance(op, ThetaODE):
        K = op.order
        v = []
        for j in range(K + 1):
            acc: IntPoly = ()
            for k in range(j, K + 1):
                s = _stirling2(k, j)
                if s and op.coeffs[k]:
                    acc = _poly_add(acc, _poly_scale(op.coeffs[k], s))
            v.append(_mul_z_power(acc, j))
        return DiffOpD(tuple(v)).canonical()
    if isinstance(op, DiffOpD):
        J = op.order
        u = []
        for k in range(J + 1):
            acc = ()
            for j in range(k, J + 1):
                s = _stirling1_signed(j, k)
                if s and op.coeffs[j]:
                    acc = _poly_add(acc, _mul_z_power(_poly_scale(op.coeffs[j], s), J - j))
            u.append(acc)
        return ThetaODE(tuple(u)).canonical()
    raise TypeError(f"expected ThetaODE or DiffOpD, got {type(op).__name__}")


# --- closure operations ------------------------------------------------------------

def _shift_basis(rec: PolyRec, count: int) -> tuple[list[list[Poly]], list[Poly]]:
    """
    Express f(m + j), j < count, in the basis f(m), ..., f(m + L - 1).

    Returns numerator vectors W_j and denominators Q_j with f(m + j) = W_j / Q_j.
    """
    L = rec.order
    one = to_sympy((1,))
    zero = to_sympy(())
    lead = [to_sympy(p) for p in rec.coeffs]
    W: list[list[Poly]] = []
    Q: list[Poly] = []
    for j in range(count):
        if j < L:
            W.append([one if i == j else zero for i in range(L)])
            Q.append(one)
            continue
        # p_l evaluated at n = m + j
        at_j = [p.shift(j) for p in lead]
        Q.append(Q[j - 1] * at_j[0])
        acc = [zero] * L
        for ell in range(1, L + 1):
            if at_j[ell].is_zero:
                continue
            scale = at_j[ell] * Q[j - 1].exquo(Q[j - ell])
            acc = [a - scale * w for a, w in zip(acc, W[j - ell])]
        W.append(acc)
    return W, Q


def right_remainder(b: PolyRec, a: PolyRec) -> tuple[IntPoly, ...]:
    """
    Pseudo-remainder of b on the right by a, with integer content removed.

    Empty exactly when lambda(n) * b = q * a for a polynomial lambda whose roots are
    roots of p_{L_a}(n - k), 0 <= k <= order(b) - order(a).
    """
    La = a.order
    divisor = [to_sympy(p) for p in a.coeffs]
    trailing = divisor[La]
    rest = [to_sympy(p) for p in b.coeffs]
    while len(rest) - 1 >= La:
        k = len(rest) - 1 - La
        top = rest[-1]
        scale = trailing.shift(-k)
        rest = [scale * c for c in rest]
        for ell, p in enumerate(divisor):
            if not p.is_zero:
                rest[k + ell] = rest[k + ell] - top * p.shift(-k)
        while rest and rest[-1].is_zero:
            rest.pop()
        content = reduce(gcd, (int(c.content()) for c in rest), 0)
        if content > 1:
            rest = [c.exquo_ground(content) for c in rest]
    return tuple(from_sympy(c) for c in rest)


def rec_add(a: PolyRec, b: PolyRec) -> PolyRec:
    """
    Recurrence for f + g with f annihilated by a and g by b.

    When one operator is a left multiple of the other it is returned as is.
    Otherwise the first K for which s(m), ..., s(m + K) are linearly dependent
    over Q(m) is found by one fraction-free elimination on the shifted-copy
    coordinates.
    """
    La, Lb = a.order, b.order
    if La == 0:
        return b.canonical()
    if Lb == 0:
        return a.canonical()
    small, large = (a, b) if La <= Lb else (b, a)
    if not right_remainder(large, small):
        _LOGGER.debug(f"rec_add: order {small.order} divides order {large.order} on the right")
        return large.canonical()
    if small.order == large.order and not right_remainder(small, large):
        return small.canonical()

    limit = La + Lb + 1
    Wa, Qa = _shift_basis(a, limit)
    Wb, Qb = _shift_basis(b, limit)
    columns = [
        [w * Qb[j] for w in Wa[j]] + [w * Qa[j] for w in Wb[j]]
        for j in range(limit)
    ]
    matrix = [[columns[j][r] for j in range(limit)] for r in range(La + Lb)]
    y = ff_kernel_vector(matrix)
    if y is None:
        raise ArithmeticError("no dependency found among shifted copies")
    K = max(j for j, p in enumerate(y) if not p.is_zero)
    c = [y[j] * Qa[j] * Qb[j] for j in range(K + 1)]
    common = reduce(lambda x, p: x.gcd(p), (p for p in c if not p.is_zero))
    c = [p.exquo(common) for p in c]
    # sum_j c_j(m) s(m + j) = 0, read at n = m + K
    coeffs = [from_sympy(c[K - ell].shift(-K)) for ell in range(K + 1)]
    while not coeffs[-1]:
        coeffs.pop()
    _LOGGER.debug(f"rec_add: order {La}+{Lb} -> {len(coeffs) - 1}")
    return PolyRec(tuple(coeffs)).canonical()


def rec_interleave(rec: PolyRec, offset: int) -> PolyRec:
    """Recurrence for b with b(2m + offset) = a(m) and zeros elsewhere."""
    if offset not in (0, 1):
        raise ValueError(f"offset must be 0 or 1, got {offset}")
    d = rec.degree
    coeffs: list[IntPoly] = []
    for ell, p in enumerate(rec.coeffs):
        if ell:
            coeffs.append(())
        if not p:
            coeffs.append(())
            continue
        scaled = trim(c * 2 ** (d - k) for k, c in enumerate(p))
        coeffs.append(from_sympy(to_sympy(scaled).shift(-offset)))
    return PolyRec(tuple(coeffs)).canonical()


def ode_compose_power(ode: ThetaODE, k: int) -> ThetaODE:
    """Annihilator of F(z^k): z -> z^k, theta -> theta / k, cleared by k^K."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    K = ode.order
    coeffs = []
    for j, p in enumerate(ode.coeffs):
        spread = [0] * (k * (len(p) - 1) + 1) if p else []
        for i, c in enumerate(p):
            spread[k * i] = c * k ** (K - j)
        coeffs.append(trim(spread))
    return ThetaODE(tuple(coeffs)).canonical()


# --- comparison with printed forms -------------------------------------------------

def forward_coefficients(rec: PolyRec) -> list[IntPoly]:
    """P_j with sum_j P_j(n) f(n + j) = 0, P_j(n) = p_{L-j}(n + L)."""
    L = rec.order
    return [from_sympy(to_sympy(rec.coeffs[L - j]).shift(L)) if rec.coeffs[L - j] else () for j in range(L + 1)]


def rec_anchors(rec: PolyRec) -> dict:
    """Constant and leading coefficients of the first and last forward polynomials."""
    forward = forward_coefficients(rec)
    first, last = forward[0], forward[-1]
    return {
        "first_constant": first[0] if first else 0,
        "first_leading": first[-1] if first else 0,
        "last_constant": last[0] if last else 0,
        "last_leading": last[-1] if last else 0,
    }


def ode_anchors(ode: ThetaODE) -> dict:
    """z^0 coefficient of every theta^k and the top coefficient of u_K."""
    return {
        "theta_constants": [p[0] if p else 0 for p in ode.coeffs],
        "leading": ode.coeffs[-1][-1],
        "leading_z_degree": poly_degree(ode.coeffs[-1]),
    }


def proportionality(ours: Sequence[int], printed: Sequence[int]) -> Optional[Fraction]:
    """The factor f with ours = f * printed entrywise, or None when not proportional."""
    factor: Optional[Fraction] = None
    for x, y in zip(ours, printed):
        if y == 0 or x == 0:
            if x != y:
                return None
            continue
        ratio = Fraction(x, y)
        if factor is None:
            factor = ratio
        elif ratio != factor:
            return None
    return factor


# --- conversion dispatch -----------------------------------------------------------

CONVERSIONS = ("rec2ode", "ode2rec", "theta2d", "d2theta", "interleave", "compose", "add")

_EXPECTS = {
    "rec2ode": PolyRec,
    "ode2rec": ThetaODE,
    "theta2d": ThetaODE,
    "d2theta": DiffOpD,
    "interleave": PolyRec,
    "compose": ThetaODE,
    "add": PolyRec,
}


def convert(
    name: str,
    op: Operator,
    other: Optional[Operator] = None,
    offset: int = 0,
    power: int = 2,
    kill_rows: Iterable[int] = (),
) -> Operator:
    """Apply a named conversion or closure operation."""
    if name not in _EXPECTS:
        raise ValueError(f"unknown conversion {name!r}; expected one of {CONVERSIONS}")
    expected = _EXPECTS[name]
    if not isinstance(op, expected):
        raise OperatorFormatError(f"{name} needs a {expected.__name__}, got {type(op).__name__}")
    if name == "rec2ode":
        return rec_to_theta_ode(op, kill_rows)
    if name == "ode2rec":
        return theta_ode_to_rec(op)
    if name in ("theta2d", "d2theta"):
        return theta_d_convert(op)
    if name == "interleave":
        return rec_interleave(op, offset)
    if name == "compose":
        return ode_compose_power(op, power)
    if not isinstance(other, PolyRec):
        raise OperatorFormatError("add needs a second recurrence")
    return rec_add(op, other)
