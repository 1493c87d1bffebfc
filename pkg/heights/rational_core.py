"""
Exact rational arithmetic helpers: p-adic valuations, factorization into
fractional ideals, multiindices, Jordan totients and the sizes of
projective spaces over Z/q.

Rationals are plain ``fractions.Fraction`` (ints are accepted everywhere).
The valuation of zero is sympy's ``oo``, which compares correctly with ints
and absorbs addition.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Sequence, Tuple, Union

import sympy
from sympy import oo as Infinity

from config import FACTOR_MAX, FACTOR_TRIAL_LIMIT
from heights.errors import DomainError, ParseError, ResourceCapError

logger = logging.getLogger(__name__)

RationalLike = Union[int, Fraction]
Multiindex = Tuple[int, ...]


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return parse_rational(x)
    # sympy / gmpy rationals expose numerator and denominator
    return Fraction(int(x.numerator), int(x.denominator))


def _require_prime(p: int) -> None:
    if p < 2 or not sympy.isprime(p):
        raise DomainError(f"Expected a prime, got {p}")


# ==============================================================================
# Valuations
# ==============================================================================

def int_val(n: int, p: int) -> int:
    """v_p(n) for a nonzero integer n; p is not checked for primality."""
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def val_p(x: RationalLike, p: int):
    """ord_p(x), or Infinity when x = 0."""
    _require_prime(p)
    x = as_fraction(x)
    if x == 0:
        return Infinity
    return int_val(x.numerator, p) - int_val(x.denominator, p)


def tuple_val_p(xs: Sequence[RationalLike], p: int):
    """Minimum valuation among the entries; Infinity iff all vanish."""
    return min((val_p(x, p) for x in xs), default=Infinity)


# ==============================================================================
# Fractional ideals of Q
# ==============================================================================

@dataclass(frozen=True)
class FactoredIdeal:
    """
    A fractional ideal of Q as prime -> nonzero exponent.

    The empty map is the unit ideal.
    """

    exponents: Tuple[Tuple[int, int], ...] = field(default_factory=tuple)

    def __post_init__(self):
        items = dict(self.exponents)
        cleaned = tuple(sorted((int(p), int(e)) for p, e in items.items() if e != 0))
        object.__setattr__(self, 'exponents', cleaned)

    @classmethod
    def from_map(cls, exponents: Mapping[int, int]) -> 'FactoredIdeal':
        return cls(tuple(exponents.items()))

    def as_map(self) -> Dict[int, int]:
        return dict(self.exponents)

    @property
    def primes(self) -> List[int]:
        return [p for p, _ in self.exponents]

    def valuation(self, p: int) -> int:
        return self.as_map().get(p, 0)

    def norm(self) -> Fraction:
        result = Fraction(1)
        for p, e in self.exponents:
            result *= Fraction(p) ** e
        return result

    def is_integral(self) -> bool:
        return all(e > 0 for _, e in self.exponents)

    def divides(self, other: 'FactoredIdeal') -> bool:
        """For integral ideals: self | other."""
        theirs = other.as_map()
        return all(theirs.get(p, 0) >= e for p, e in self.exponents)

    def __mul__(self, other: 'FactoredIdeal') -> 'FactoredIdeal':
        merged = self.as_map()
        for p, e in other.exponents:
            merged[p] = merged.get(p, 0) + e
        return FactoredIdeal.from_map(merged)

    def __pow__(self, k: int) -> 'FactoredIdeal':
        return FactoredIdeal.from_map({p: e * k for p, e in self.exponents})

    def to_json(self) -> Dict[str, int]:
        return {str(p): e for p, e in self.exponents}

    @classmethod
    def from_json(cls, data: Mapping[str, int]) -> 'FactoredIdeal':
        try:
            return cls.from_map({int(p): int(e) for p, e in data.items()})
        except (TypeError, ValueError) as e:
            raise ParseError(f"Bad ideal JSON: {data!r}") from e

    def __str__(self) -> str:
        if not self.exponents:
            return '<1>'
        return '<' + ' * '.join(f"{p}^{e}" if e != 1 else str(p) for p, e in self.exponents) + '>'


UNIT_IDEAL = FactoredIdeal()


def _factor_int(n: int) -> Dict[int, int]:
    n = abs(n)
    if n == 1:
        return {}
    found = sympy.factorint(n, limit=FACTOR_TRIAL_LIMIT)
    # factorint with a limit may leave one unfactored composite cofactor
    result: Dict[int, int] = {}
    for q, e in found.items():
        if q < FACTOR_TRIAL_LIMIT**2 or sympy.isprime(q):
            result[q] = result.get(q, 0) + e
            continue
        if q > FACTOR_MAX:
            raise ResourceCapError(
                f"Cofactor {q} exceeds the factorization range",
                witness={'cofactor': str(q), 'max': str(FACTOR_MAX)},
            )
        for r, f in sympy.factorint(q).items():
            result[r] = result.get(r, 0) + e * f
    return result


def factor(n: RationalLike) -> FactoredIdeal:
    """The ideal <n> for a nonzero rational n."""
    n = as_fraction(n)
    if n == 0:
        raise DomainError("Cannot factor zero")
    exps = _factor_int(n.numerator)
    for p, e in _factor_int(n.denominator).items():
        exps[p] = exps.get(p, 0) - e
    return FactoredIdeal.from_map(exps)


# ==============================================================================
# Multiindices
# ==============================================================================

def degree(alpha: Multiindex) -> int:
    return sum(alpha)


def monomials(nvars: int, deg: int) -> List[Multiindex]:
    """All exponent vectors of the given degree, graded-lex descending (X_0^deg first)."""
    if deg < 0:
        return []
    out = [
        tuple(b - a - 1 for a, b in zip((-1,) + cuts, cuts + (deg + nvars - 1,)))
        for cuts in itertools.combinations(range(deg + nvars - 1), nvars - 1)
    ]
    out.sort(reverse=True)
    return out


def term_order_key(alpha: Multiindex) -> Tuple[int, ...]:
    """Sort key placing higher degree first, then lex-descending."""
    return (-sum(alpha),) + tuple(-a for a in alpha)


# ==============================================================================
# Primitive tuples and projective spaces over Z/q
# ==============================================================================

def jordan_totient(k: int, q: int) -> int:
    """J_k(q) = q^k prod_{p | q} (1 - p^-k), the number of primitive k-tuples mod q."""
    if k < 0 or q < 1:
        raise DomainError(f"jordan_totient needs k >= 0 and q >= 1, got ({k}, {q})")
    result = 1
    for p, e in sympy.factorint(q).items():
        result *= p ** (k * (e - 1)) * (p**k - 1)
    return result


def proj_space_size(m: int, q: int) -> int:
    """#P^m(Z/q) = J_{m+1}(q) / J_1(q)."""
    if m < 0 or q < 1:
        raise DomainError(f"proj_space_size needs m >= 0 and q >= 1, got ({m}, {q})")
    result = 1
    for p, e in sympy.factorint(q).items():
        result *= p ** (m * (e - 1)) * ((p ** (m + 1) - 1) // (p - 1))
    return result


def proj_space_table(q_max: int = 20, m_max: int = 5) -> List[List[int]]:
    """Rows [q, #P^1(Z/q), ..., #P^m_max(Z/q)] for q = 1..q_max."""
    return [[q] + [proj_space_size(m, q) for m in range(1, m_max + 1)] for q in range(1, q_max + 1)]


def mobius_count(m: int, B: int) -> int:
    """
    Number of points of P^m(Q) with height at most B, by Moebius inversion
    over the primitive vectors of the box [-B, B]^(m+1).
    """
    if B < 1:
        return 0
    total = 0
    for k, mu in enumerate(sympy.sieve.mobiusrange(1, B + 1), start=1):
        if mu:
            total += mu * ((2 * (B // k) + 1) ** (m + 1) - 1)
    return total // 2


def primitive_integer_vector(xs: Sequence[RationalLike]) -> Tuple[int, ...]:
    """Scale a nonzero rational vector to coprime integers (sign untouched)."""
    fr = [as_fraction(x) for x in xs]
    if all(x == 0 for x in fr):
        raise DomainError("Zero vector has no primitive representative")
    den = math.lcm(*(x.denominator for x in fr))
    ints = [int(x * den) for x in fr]
    g = math.gcd(*ints)
    return tuple(i // g for i in ints)


# ==============================================================================
# Serialization
# ==============================================================================

def format_rational(x: RationalLike) -> str:
    x = as_fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def parse_rational(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError, AttributeError) as e:
        raise ParseError(f"Bad rational: {text!r}") from e
