"""
Nonarchimedean side: reduction of points modulo q, enumeration of
P^m(Z/p^s), excess valuations, local density tables by adaptive refinement,
exact local factors, global densities and the constants c_0 and C_0^d.

Local constancy drives the refinement: for a normalized lift and primitive
x, y with x = y mod p^k, if eps(x) < k then eps(y) = eps(x). A residue class
mod p^k whose representative has eps < k is therefore resolved in one
evaluation; otherwise it splits into its p^m children mod p^(k+1).
"""
import itertools
import logging
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import sympy
from sympy.ntheory.modular import crt

from config import CLASS_CAP
from heights.errors import DomainError, NotAMorphismError, ResourceCapError
from heights.morphism import HomogeneousLift, integer_evaluator, normalize
from heights.rational_core import (
    FactoredIdeal,
    UNIT_IDEAL,
    factor,
    format_rational,
    int_val,
    primitive_integer_vector,
    proj_space_size,
    tuple_val_p,
)
from heights.resultant import require_morphism

logger = logging.getLogger(__name__)


# ==============================================================================
# Points of P^m(Z/q)
# ==============================================================================

@dataclass(frozen=True)
class ProjPointModQ:
    q: int
    coords: Tuple[int, ...]

    def __str__(self) -> str:
        return '[' + ' : '.join(str(c) for c in self.coords) + f'] mod {self.q}'


def _canonical_prime_power(y: Sequence[int], p: int, q: int) -> Tuple[int, ...]:
    residues = [c % q for c in y]
    for c in residues:
        if c % p:
            inv = pow(c, -1, q)
            return tuple((r * inv) % q for r in residues)
    raise DomainError(f"{tuple(y)} is not primitive mod {p}")


def reduce_mod(x: Sequence, q: int) -> ProjPointModQ:
    """The class of x in P^m(Z/q), in canonical form."""
    if q < 2:
        raise DomainError(f"Modulus must be >= 2, got {q}")
    y = primitive_integer_vector(x)
    parts = sympy.factorint(q)
    if len(parts) == 1:
        (p, _), = parts.items()
        return ProjPointModQ(q, _canonical_prime_power(y, p, q))
    moduli = [p**e for p, e in parts.items()]
    locals_ = [_canonical_prime_power(y, p, p**e) for p, e in parts.items()]
    coords = tuple(int(crt(moduli, [loc[i] for loc in locals_])[0]) for i in range(len(y)))
    return ProjPointModQ(q, coords)


def _pivot_classes(m: int, p: int, s: int) -> Iterator[Tuple[int, Tuple[int, ...]]]:
    q = p**s
    for pivot in range(m + 1):
        before = [range(0, q, p)] * pivot
        after = [range(q)] * (m - pivot)
        for head in itertools.product(*before):
            for tail in itertools.product(*after):
                yield pivot, head + (1,) + tail


def enumerate_proj_points(m: int, p: int, s: int) -> Iterator[ProjPointModQ]:
    """Each point of P^m(Z/p^s) once, in pivot form."""
    if s < 1:
        raise DomainError(f"Exponent must be >= 1, got {s}")
    q = p**s
    for _, coords in _pivot_classes(m, p, s):
        yield ProjPointModQ(q, coords)


# ==============================================================================
# Excess valuations
# ==============================================================================

def excess_valuation(F: HomogeneousLift, p: int, x: Sequence[int]) -> int:
    """eps_{f,p}(x) = v_p(F(x)) for normalized F and x primitive mod p."""
    N = normalize(F)
    if all(c % p == 0 for c in x):
        raise DomainError(f"{tuple(x)} is not primitive mod {p}")
    values = integer_evaluator(N)(tuple(int(c) for c in x))
    v = tuple_val_p(values, p)
    if v == sympy.oo:
        raise NotAMorphismError(f"F vanishes at the primitive point {tuple(x)}")
    return int(v)


def _evaluator_valuation(evaluate_at, p: int):
    def eps(x: Tuple[int, ...]) -> int:
        values = [v for v in evaluate_at(x) if v]
        if not values:
            raise NotAMorphismError(f"F vanishes at the primitive point {x}")
        return min(int_val(v, p) for v in values)

    return eps


def excess_divisor(F: HomogeneousLift, x: Sequence) -> FactoredIdeal:
    """l_f(x): the ideal generated by F(y) for the primitive integer y ~ x."""
    N = normalize(F)
    y = primitive_integer_vector(x)
    values = integer_evaluator(N)(y)
    g = math.gcd(*values)
    if g == 0:
        raise NotAMorphismError(f"F vanishes at {y}")
    return factor(g) if g != 1 else UNIT_IDEAL


# ==============================================================================
# Local densities
# ==============================================================================

@dataclass(frozen=True)
class LocalDensityTable:
    p: int
    depth: int
    weights: Tuple[Tuple[int, Fraction], ...]

    def as_map(self) -> Dict[int, Fraction]:
        return dict(self.weights)

    def weight(self, i: int) -> Fraction:
        return self.as_map().get(i, Fraction(0))

    @property
    def support(self) -> List[int]:
        return [i for i, w in self.weights if w > 0]

    @property
    def max_excess(self) -> int:
        """||eps_{f,p}||: the largest excess valuation that occurs."""
        return max(self.support)

    def total(self) -> Fraction:
        return sum((w for _, w in self.weights), Fraction(0))

    def to_json(self) -> Dict[str, object]:
        return {
            'p': self.p,
            'depth': self.depth,
            'delta': {str(i): format_rational(w) for i, w in self.weights},
        }


def _table_from_counts(p: int, m: int, counts: Mapping[Tuple[int, int], int]) -> LocalDensityTable:
    weights: Dict[int, Fraction] = {}
    depth = 1
    for (level, eps), n in counts.items():
        depth = max(depth, level)
        weights[eps] = weights.get(eps, Fraction(0)) + Fraction(n, proj_space_size(m, p**level))
    return LocalDensityTable(p, depth, tuple(sorted(weights.items())))


def local_density(
    F: HomogeneousLift,
    p: int,
    max_depth: Optional[int] = None,
    class_cap: int = CLASS_CAP,
    check_morphism: bool = True,
) -> LocalDensityTable:
    """
    delta_{f,p}(i) for all i, exactly, by adaptive refinement of residue classes.

    max_depth defaults to v_p(Res f) + 1, the level by which every class is
    resolved. Callers that know a smaller bound on ||eps|| (e.g. for
    composites, where computing the resultant is expensive) pass it and set
    check_morphism=False.
    """
    N = normalize(F)
    if check_morphism:
        data = require_morphism(N)
        if max_depth is None:
            max_depth = data.valuation(p) + 1
    elif max_depth is None:
        raise DomainError("max_depth is required when the morphism check is skipped")

    eps = _evaluator_valuation(integer_evaluator(N), p)
    m = N.m
    counts: Dict[Tuple[int, int], int] = {}
    queue = deque((1, pivot, rep) for pivot, rep in _pivot_classes(m, p, 1))
    visited = 0
    while queue:
        level, pivot, rep = queue.popleft()
        visited += 1
        if visited > class_cap:
            raise ResourceCapError(
                f"Density refinement at p={p} exceeded {class_cap} classes",
                witness={'p': p, 'level': level, 'class_cap': class_cap},
            )
        e = eps(rep)
        if e < level:
            counts[(level, e)] = counts.get((level, e), 0) + 1
            continue
        if level >= max_depth:
            raise ResourceCapError(
                f"Class {rep} mod {p}^{level} unresolved at the depth bound {max_depth}",
                witness={'p': p, 'level': level, 'max_depth': max_depth},
            )
        step = p**level
        free = [i for i in range(m + 1) if i != pivot]
        for digits in itertools.product(range(p), repeat=m):
            child = list(rep)
            for i, t in zip(free, digits):
                child[i] += t * step
            queue.append((level + 1, pivot, tuple(child)))

    table = _table_from_counts(p, m, counts)
    logger.debug("delta_{f,%d} = %s after %d classes (depth %d)", p, dict(table.weights), visited, table.depth)
    return table


def local_density_flat(F: HomogeneousLift, p: int, s: int, class_cap: int = CLASS_CAP) -> LocalDensityTable:
    """Brute-force table over every point of P^m(Z/p^s); s must be at least ||eps||."""
    N = normalize(F)
    if proj_space_size(N.m, p**s) > class_cap:
        raise ResourceCapError(
            f"P^{N.m}(Z/{p}^{s}) is larger than the class cap",
            witness={'p': p, 's': s, 'class_cap': class_cap},
        )
    eps = _evaluator_valuation(integer_evaluator(N), p)
    counts: Dict[Tuple[int, int], int] = {}
    for _, rep in _pivot_classes(N.m, p, s):
        e = min(eps(rep), s)
        counts[(s, e)] = counts.get((s, e), 0) + 1
    return _table_from_counts(p, N.m, counts)


def excess_constant_witness(
    F: HomogeneousLift, p: int, table: Optional[LocalDensityTable] = None
) -> Optional[int]:
    """The constant value i != 0 when eps_{f,p} takes a single nonzero value."""
    if table is None:
        table = local_density(F, p)
    support = table.support
    if len(support) == 1 and support[0] != 0:
        return support[0]
    return None


# ==============================================================================
# Local factors
# ==============================================================================

@dataclass(frozen=True)
class ExactLocalFactor:
    """sum_i w_i p^{(m+1) i / d}, kept as an exact sympy expression."""

    p: int
    m: int
    d: int
    terms: Tuple[Tuple[int, Fraction], ...]

    @property
    def exact(self) -> sympy.Expr:
        p, r = sympy.Integer(self.p), sympy.Rational(self.m + 1, self.d)
        return sympy.Add(*(sympy.Rational(w.numerator, w.denominator) * p ** (r * i) for i, w in self.terms))

    @property
    def float_value(self) -> float:
        return float(self.exact.evalf(30))

    def to_json(self) -> Dict[str, object]:
        return {
            'terms': [[i, format_rational(w)] for i, w in self.terms],
            'exact': str(self.exact),
            'float': self.float_value,
        }


def local_factor(F: HomogeneousLift, p: int, table: Optional[LocalDensityTable] = None) -> Tuple[ExactLocalFactor, Fraction]:
    """(c_{Q,p}(f), mu_p(D_{f,p})) from the density table."""
    N = normalize(F)
    if table is None:
        table = local_density(N, p)
    terms = tuple((i, w) for i, w in table.weights if w > 0)
    mu = sum((w * Fraction(p) ** ((N.m + 1) * (i // N.d)) for i, w in terms), Fraction(0))
    return ExactLocalFactor(p, N.m, N.d, terms), mu


@dataclass(frozen=True)
class NonarchConstant:
    """c_{Q,0}(f) = prod_p c_{Q,p}(f) over bad primes, mu_0, and C0d = prod_p p^||eps_p||."""

    factors: Tuple[ExactLocalFactor, ...]
    mus: Tuple[Fraction, ...]
    tables: Tuple[LocalDensityTable, ...]
    C0d: int

    @property
    def exact(self) -> sympy.Expr:
        return sympy.Mul(*(f.exact for f in self.factors))

    @property
    def float_value(self) -> float:
        return float(self.exact.evalf(30))

    @property
    def mu0(self) -> Fraction:
        return math.prod(self.mus, start=Fraction(1))

    @property
    def max_excess(self) -> Dict[int, int]:
        return {t.p: t.max_excess for t in self.tables}

    def to_json(self) -> Dict[str, object]:
        return {
            'c0': {'exact': str(self.exact), 'float': self.float_value},
            'mu0': format_rational(self.mu0),
            'C0d': self.C0d,
            'local': {str(f.p): f.to_json() for f in self.factors},
        }


def _density_job(args) -> LocalDensityTable:
    F, p, max_depth, class_cap, check = args
    return local_density(F, p, max_depth=max_depth, class_cap=class_cap, check_morphism=check)


def nonarch_constant(
    F: HomogeneousLift,
    bad_primes: Optional[Sequence[int]] = None,
    max_depths: Optional[Mapping[int, int]] = None,
    class_cap: int = CLASS_CAP,
    threads: int = 1,
) -> NonarchConstant:
    """
    Multiply the local factors over the primes dividing Res f.

    bad_primes / max_depths let callers supply a known superset of bad primes
    and depth bounds instead of computing the resultant (composites).
    """
    from tasks import run_parallel

    N = normalize(F)
    check = bad_primes is None
    if check:
        bad_primes = require_morphism(N).bad_primes
    jobs = [(N, p, (max_depths or {}).get(p), class_cap, check) for p in bad_primes]
    tables = run_parallel(_density_job, jobs, threads=threads)
    factors, mus = [], []
    C0d = 1
    for p, table in zip(bad_primes, tables):
        c, mu = local_factor(N, p, table)
        factors.append(c)
        mus.append(mu)
        C0d *= p**table.max_excess
    return NonarchConstant(tuple(factors), tuple(mus), tuple(tables), C0d)


def global_densities(
    F: HomogeneousLift,
    nonarch: Optional[NonarchConstant] = None,
) -> Dict[FactoredIdeal, Fraction]:
    """delta_f(l) = prod_p delta_{f,p}(v_p(l)) on the ideals that occur."""
    if nonarch is None:
        nonarch = nonarch_constant(F)
    result: Dict[FactoredIdeal, Fraction] = {}
    supports = [[(t.p, i, t.weight(i)) for i in t.support] for t in nonarch.tables]
    for combo in itertools.product(*supports):
        ideal = FactoredIdeal.from_map({p: i for p, i, _ in combo})
        result[ideal] = math.prod((w for _, _, w in combo), start=Fraction(1))
    return result


def density_sum(F: HomogeneousLift, densities: Mapping[FactoredIdeal, Fraction]) -> sympy.Expr:
    """sum_l Nm(l)^{(m+1)/d} delta_f(l) as an exact expression."""
    N = normalize(F)
    r = sympy.Rational(N.m + 1, N.d)
    return sympy.Add(*(
        sympy.Rational(w.numerator, w.denominator) * sympy.Integer(int(ideal.norm())) ** r
        for ideal, w in densities.items()
    ))
