"""
Elimination theory over Z: Sylvester matrices in arbitrary degree, the
resultant ideal from the Macaulay-degree matrix, good reduction,
pseudoinverses and norm bounds for the resultant.

The p-valuation of the resultant is the minimum p-valuation over the maximal
minors of the Macaulay-degree Sylvester matrix of a normalized lift. The gcd
of those minors is the product of the integer Smith invariant factors, so a
single sympy invariant_factors call gives every v_p at once.
"""
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Optional, Tuple

import sympy
from sympy.polys.matrices import DomainMatrix
from sympy.polys.matrices.normalforms import invariant_factors

from heights.errors import DomainError, NotAMorphismError
from heights.morphism import HomogeneousLift, NormalizedLift, normalize
from heights.rational_core import (
    UNIT_IDEAL,
    FactoredIdeal,
    Multiindex,
    as_fraction,
    factor,
    format_rational,
    monomials,
    val_p,
)

logger = logging.getLogger(__name__)


def macaulay_bound(m: int, d: int) -> int:
    """D_0 = (m+1)(d-1) + 1."""
    if d < 1:
        raise DomainError(f"Degree must be >= 1, got {d}")
    return (m + 1) * (d - 1) + 1


@dataclass(frozen=True)
class SylvesterMatrix:
    """Matrix of (G_0..G_M) -> sum G_j F_j from degree D-d forms to degree D forms."""

    degree: int
    rows: Tuple[Multiindex, ...]                 # gamma, |gamma| = D
    cols: Tuple[Tuple[Multiindex, int], ...]     # (beta, j), |beta| = D - d
    entries: Tuple[Tuple[Fraction, ...], ...]

    @property
    def shape(self) -> Tuple[int, int]:
        return len(self.rows), len(self.cols)

    def to_domain_matrix(self) -> DomainMatrix:
        """Over ZZ when every entry is integral, QQ otherwise."""
        if all(e.denominator == 1 for row in self.entries for e in row):
            domain = sympy.ZZ
            data = [[domain(int(e)) for e in row] for row in self.entries]
        else:
            domain = sympy.QQ
            data = [[domain(e.numerator, e.denominator) for e in row] for row in self.entries]
        return DomainMatrix(data, self.shape, domain)


def sylvester_matrix(F: HomogeneousLift, D: int) -> SylvesterMatrix:
    """Entry at (gamma, (beta, j)) is F_{j, gamma - beta} (zero unless gamma >= beta)."""
    if D < F.d:
        raise DomainError(f"Sylvester degree {D} is below the form degree {F.d}")
    rows = tuple(monomials(F.m + 1, D))
    row_index = {g: i for i, g in enumerate(rows)}
    cols = tuple((beta, j) for beta in monomials(F.m + 1, D - F.d) for j in range(F.M + 1))
    entries = [[Fraction(0)] * len(cols) for _ in rows]
    for c, (beta, j) in enumerate(cols):
        for alpha, coeff in F.forms[j]:
            gamma = tuple(a + b for a, b in zip(alpha, beta))
            entries[row_index[gamma]][c] = coeff
    return SylvesterMatrix(D, rows, cols, tuple(tuple(r) for r in entries))


@dataclass(frozen=True)
class ResultantData:
    invariant_factor_product: int
    res_ideal: FactoredIdeal
    is_morphism: bool
    degree: int = 0
    shape: Tuple[int, int] = (0, 0)
    invariant_factors: Tuple[int, ...] = field(default_factory=tuple)

    @property
    def bad_primes(self) -> List[int]:
        return self.res_ideal.primes

    def valuation(self, p: int) -> int:
        return self.res_ideal.valuation(p)

    def witness(self) -> Dict[str, object]:
        return {
            'invariant_factor_product': str(self.invariant_factor_product),
            'macaulay_degree': self.degree,
            'rows': self.shape[0],
            'cols': self.shape[1],
        }

    def to_json(self) -> Dict[str, object]:
        return {
            'is_morphism': self.is_morphism,
            'res': self.res_ideal.to_json(),
            'norm': str(self.invariant_factor_product),
            'bad_primes': self.bad_primes,
        }


@lru_cache(maxsize=128)
def resultant_data(F: HomogeneousLift) -> ResultantData:
    N = normalize(F)
    D0 = macaulay_bound(N.m, N.d)
    S = sylvester_matrix(N, D0)
    rows, cols = S.shape
    if rows > cols:
        logger.debug("Sylvester matrix %dx%d has more rows than columns", rows, cols)
        return ResultantData(0, UNIT_IDEAL, False, D0, S.shape, ())
    factors = tuple(int(abs(f)) for f in invariant_factors(S.to_domain_matrix()))
    g = math.prod(factors)
    if g == 0:
        return ResultantData(0, UNIT_IDEAL, False, D0, S.shape, factors)
    ideal = UNIT_IDEAL
    for f in factors:
        if f != 1:
            ideal = ideal * factor(f)
    logger.debug("Res %s = %s (shape %dx%d)", N, ideal, rows, cols)
    return ResultantData(g, ideal, True, D0, S.shape, factors)


def require_morphism(F: HomogeneousLift) -> ResultantData:
    data = resultant_data(F)
    if not data.is_morphism:
        raise NotAMorphismError(
            "The forms have a nontrivial common zero (gcd of maximal minors is 0)",
            witness=data.witness(),
        )
    return data


def has_good_reduction(F: HomogeneousLift, p: int) -> bool:
    return require_morphism(F).valuation(p) == 0


# ==============================================================================
# Pseudoinverses
# ==============================================================================

@dataclass(frozen=True)
class Pseudoinverse:
    """Forms G_ij of degree e - d with sum_j G_ij F_j = X_i^e."""

    e: int
    m: int
    rows: Tuple[Tuple[Dict[Multiindex, Fraction], ...], ...]

    def valuation(self, p: int):
        return min(
            (val_p(c, p) for row in self.rows for g in row for c in g.values()),
            default=sympy.oo,
        )

    def satisfies(self, F: HomogeneousLift) -> bool:
        """Exact check of the defining identity."""
        for i, row in enumerate(self.rows):
            total: Dict[Multiindex, Fraction] = {}
            for g, f in zip(row, F.forms):
                for beta, gc in g.items():
                    for alpha, fc in f:
                        gamma = tuple(a + b for a, b in zip(alpha, beta))
                        total[gamma] = total.get(gamma, Fraction(0)) + gc * fc
            target = tuple(self.e if k == i else 0 for k in range(self.m + 1))
            expected = {target: Fraction(1)}
            if {k: v for k, v in total.items() if v != 0} != expected:
                return False
        return True

    def to_json(self) -> Dict[str, object]:
        return {
            'e': self.e,
            'G': [
                [[{'exps': list(b), 'coeff': format_rational(c)} for b, c in sorted(g.items(), reverse=True)] for g in row]
                for row in self.rows
            ],
        }


def pseudoinverse(F: HomogeneousLift, e: int) -> Optional[Pseudoinverse]:
    """Solve S(G_i) = X_i^e over Q in degree e; None if some row is insoluble."""
    N = normalize(F)
    if e < N.d:
        raise DomainError(f"Pseudoinverse degree {e} is below {N.d}")
    S = sylvester_matrix(N, e)
    rows, cols = S.shape
    base = [[sympy.QQ(int(x)) for x in row] for row in S.entries]
    solution_rows = []
    for i in range(N.m + 1):
        target = tuple(e if k == i else 0 for k in range(N.m + 1))
        rhs = [sympy.QQ(1) if g == target else sympy.QQ(0) for g in S.rows]
        aug = DomainMatrix([r + [b] for r, b in zip(base, rhs)], (rows, cols + 1), sympy.QQ)
        rref, pivots = aug.rref()
        if cols in pivots:
            return None
        reduced = rref.to_list()
        x = [Fraction(0)] * cols
        for r, c in enumerate(pivots):
            x[c] = as_fraction(reduced[r][cols])
        row = [dict() for _ in range(N.M + 1)]
        for (beta, j), value in zip(S.cols, x):
            if value:
                row[j][beta] = value
        solution_rows.append(tuple(row))
    return Pseudoinverse(e, N.m, tuple(solution_rows))


def find_pseudoinverse(F: HomogeneousLift) -> Optional[Pseudoinverse]:
    """First pseudoinverse in degrees d, d+1, ..., macaulay_bound."""
    for e in range(F.d, macaulay_bound(F.m, F.d) + 1):
        G = pseudoinverse(F, e)
        if G is not None:
            return G
    return None


def pseudoinverse_excess_bound(F: HomogeneousLift, p: int) -> int:
    """-v_p(G) for the first pseudoinverse G; bounds the excess valuation at p."""
    G = find_pseudoinverse(F)
    if G is None:
        raise NotAMorphismError("No pseudoinverse up to the Macaulay bound", witness=resultant_data(F).witness())
    v = G.valuation(p)
    return max(0, -int(v))


def surjectivity_degree(F: HomogeneousLift) -> Optional[int]:
    """Smallest D >= d at which the Sylvester map is onto, searched up to the Macaulay bound."""
    N = normalize(F)
    for D in range(N.d, macaulay_bound(N.m, N.d) + 1):
        rows = math.comb(N.m + D, N.m)
        if rows > (N.M + 1) * math.comb(N.m + D - N.d, N.m):
            continue
        if sylvester_matrix(N, D).to_domain_matrix().convert_to(sympy.QQ).rank() == rows:
            return D
    return None


# ==============================================================================
# Norm bounds
# ==============================================================================

def _ceil_sqrt(n: int) -> int:
    r = math.isqrt(n)
    return r if r * r == n else r + 1


def resultant_norm_bound(F: HomogeneousLift) -> int:
    """ceil(N^{b/2} H(f)^r), r = C((m+1)d, m), b = C(md, m), N = product of the s = ceil(r/b) largest term counts."""
    N_lift: NormalizedLift = normalize(F)
    m, d = N_lift.m, N_lift.d
    r = math.comb((m + 1) * d, m)
    b = math.comb(m * d, m)
    s = -(-r // b)
    counts = sorted((N_lift.num_terms(j) for j in range(N_lift.M + 1)), reverse=True)
    N = math.prod(counts[:s])
    H = int(max(abs(c) for _, _, c in N_lift.coefficients()))
    return _ceil_sqrt(N**b * H ** (2 * r))


def crude_resultant_bound(F: HomogeneousLift) -> int:
    """ceil((sqrt(C(m+d, m)) H(f))^{(m+1) C(md, m)})."""
    N_lift = normalize(F)
    m, d = N_lift.m, N_lift.d
    k = (m + 1) * math.comb(m * d, m)
    H = int(max(abs(c) for _, _, c in N_lift.coefficients()))
    return _ceil_sqrt(math.comb(m + d, m) ** k * H ** (2 * k))
