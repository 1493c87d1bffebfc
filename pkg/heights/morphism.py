"""
Homogeneous lifts F = (F_0, ..., F_M) of morphisms P^m -> P^M over Q.

A lift is stored sparsely: each form is a tuple of (multiindex, coefficient)
pairs in graded-lex descending order, coefficients exact Fractions. Lifts
are immutable and hashable, so the expensive invariants computed from them
(resultants, densities) can be cached per lift.

Composition goes through sympy's sparse polynomial rings over QQ; all other
arithmetic is plain Python integers and Fractions.
"""
import json
import logging
import math
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Any, Callable, Dict, Iterator, List, Mapping, Sequence, Tuple, Union

import numpy as np
import sympy
from sympy.parsing.sympy_parser import (
    convert_xor,
    implicit_multiplication_application,
    parse_expr,
    standard_transformations,
)
from sympy.polys.rings import ring

from config import CHAT_MAX_ITERS
from heights.errors import DimensionError, DomainError, NotAMorphismError, ParseError, ResourceCapError
from heights.rational_core import (
    Multiindex,
    as_fraction,
    format_rational,
    parse_rational,
    term_order_key,
)

logger = logging.getLogger(__name__)

Form = Tuple[Tuple[Multiindex, Fraction], ...]
FormInput = Union[Mapping[Multiindex, Any], Sequence[Tuple[Multiindex, Any]]]


@dataclass(frozen=True)
class HomogeneousLift:
    """Degree-d forms in m+1 variables; M+1 = len(forms)."""

    m: int
    d: int
    forms: Tuple[Form, ...]

    def __post_init__(self):
        if self.m < 0:
            raise DimensionError(f"Domain dimension must be >= 0, got {self.m}")
        if self.d < 1:
            raise DomainError(f"Degree must be >= 1, got {self.d}")
        if len(self.forms) == 0:
            raise DimensionError("A lift needs at least one form")
        canonical = tuple(_canonical_form(f, self.m, self.d) for f in self.forms)
        if not any(canonical):
            raise DomainError("All coefficients of the lift are zero")
        object.__setattr__(self, 'forms', canonical)

    @property
    def M(self) -> int:
        return len(self.forms) - 1

    def form(self, j: int) -> Dict[Multiindex, Fraction]:
        return dict(self.forms[j])

    def coefficients(self) -> Iterator[Tuple[int, Multiindex, Fraction]]:
        """(j, alpha, F_{j,alpha}) for nonzero coefficients, form-major, term order."""
        for j, f in enumerate(self.forms):
            for alpha, c in f:
                yield j, alpha, c

    def num_terms(self, j: int) -> int:
        return len(self.forms[j])

    def is_endomorphism(self) -> bool:
        return self.M == self.m

    def is_integral(self) -> bool:
        return all(c.denominator == 1 for _, _, c in self.coefficients())

    def scaled(self, lam: Fraction) -> 'HomogeneousLift':
        lam = as_fraction(lam)
        if lam == 0:
            raise DomainError("Scaling factor must be nonzero")
        return HomogeneousLift(self.m, self.d, tuple(tuple((a, c * lam) for a, c in f) for f in self.forms))

    def __str__(self) -> str:
        names = _variable_names(self.m)
        return '(' + ', '.join(_format_form(f, names) for f in self.forms) + ')'


@dataclass(frozen=True)
class NormalizedLift(HomogeneousLift):
    """Integer coefficients of joint content 1, first nonzero coefficient positive."""

    def __post_init__(self):
        super().__post_init__()
        coeffs = [c for _, _, c in self.coefficients()]
        if any(c.denominator != 1 for c in coeffs):
            raise DomainError("Normalized lift must have integer coefficients")
        if math.gcd(*(c.numerator for c in coeffs)) != 1:
            raise DomainError("Normalized lift must have content 1")
        if coeffs[0] < 0:
            raise DomainError("Normalized lift must have a positive leading coefficient")


def _canonical_form(form: FormInput, m: int, d: int) -> Form:
    items = form.items() if isinstance(form, Mapping) else form
    merged: Dict[Multiindex, Fraction] = {}
    for alpha, c in items:
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != m + 1:
            raise DimensionError(f"Multiindex {alpha} has length {len(alpha)}, expected {m + 1}")
        if any(a < 0 for a in alpha) or sum(alpha) != d:
            raise DimensionError(f"Multiindex {alpha} is not of degree {d}")
        merged[alpha] = merged.get(alpha, Fraction(0)) + as_fraction(c)
    return tuple(sorted(((a, c) for a, c in merged.items() if c != 0), key=lambda t: term_order_key(t[0])))


def _variable_names(m: int) -> List[str]:
    if m == 1:
        return ['X', 'Y']
    if m == 2:
        return ['X', 'Y', 'Z']
    return [f"X{i}" for i in range(m + 1)]


def _format_form(form: Form, names: List[str]) -> str:
    if not form:
        return '0'
    parts = []
    for alpha, c in form:
        mono = '*'.join(n if a == 1 else f"{n}^{a}" for n, a in zip(names, alpha) if a)
        if mono and abs(c) == 1:
            term = mono
        elif mono:
            term = f"{format_rational(abs(c))}*{mono}"
        else:
            term = format_rational(abs(c))
        parts.append(('-' if c < 0 else '+') + ' ' + term)
    text = ' '.join(parts)
    return text[2:] if text.startswith('+ ') else '-' + text[2:]


# ==============================================================================
# Evaluation
# ==============================================================================

def _check_point(F: HomogeneousLift, x: Sequence) -> None:
    if len(x) != F.m + 1:
        raise DimensionError(f"Point has {len(x)} coordinates, lift expects {F.m + 1}")


def _monomial(alpha: Multiindex, x: Sequence) -> Any:
    value = 1
    for xi, a in zip(x, alpha):
        if a:
            value *= xi**a
    return value


def evaluate(F: HomogeneousLift, x: Sequence) -> Tuple[Fraction, ...]:
    """Exact value F(x) for a rational point x."""
    _check_point(F, x)
    x = [as_fraction(v) for v in x]
    return tuple(sum((c * _monomial(a, x) for a, c in f), Fraction(0)) for f in F.forms)


def integer_evaluator(F: HomogeneousLift) -> Callable[[Sequence[int]], Tuple[int, ...]]:
    """x -> F(x) for an integral lift, in pure int arithmetic (for hot loops)."""
    terms = _integer_terms(F)

    def evaluate_at(x: Sequence[int]) -> Tuple[int, ...]:
        return tuple(sum(c * _monomial(a, x) for a, c in form) for form in terms)

    return evaluate_at


def evaluate_int(F: HomogeneousLift, x: Sequence[int]) -> Tuple[int, ...]:
    _check_point(F, x)
    return integer_evaluator(F)(x)


@lru_cache(maxsize=256)
def _integer_terms(F: HomogeneousLift) -> Tuple[Tuple[Tuple[Multiindex, int], ...], ...]:
    if not F.is_integral():
        raise DomainError("Integer evaluation needs integral coefficients")
    return tuple(tuple((a, int(c)) for a, c in f) for f in F.forms)


@lru_cache(maxsize=256)
def _float_terms(F: HomogeneousLift) -> Tuple[np.ndarray, np.ndarray]:
    alphas = sorted({a for _, a, _ in F.coefficients()}, key=term_order_key)
    index = {a: i for i, a in enumerate(alphas)}
    exps = np.array(alphas, dtype=np.int64).reshape(len(alphas), F.m + 1)
    coeffs = np.zeros((F.M + 1, len(alphas)))
    for j, a, c in F.coefficients():
        coeffs[j, index[a]] = float(c)
    return exps, coeffs


def evaluate_float(F: HomogeneousLift, U: np.ndarray) -> np.ndarray:
    """F at a batch of real points, U of shape (N, m+1); returns (N, M+1)."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if U.shape[1] != F.m + 1:
        raise DimensionError(f"Points have {U.shape[1]} coordinates, lift expects {F.m + 1}")
    exps, coeffs = _float_terms(F)
    monos = np.prod(U[:, None, :] ** exps[None, :, :], axis=2)
    return monos @ coeffs.T


# ==============================================================================
# Normalization and height
# ==============================================================================

def content(F: HomogeneousLift) -> Fraction:
    """The scalar c with F / c normalized (sign included)."""
    coeffs = [c for _, _, c in F.coefficients()]
    num = math.gcd(*(c.numerator for c in coeffs))
    den = math.lcm(*(c.denominator for c in coeffs))
    g = Fraction(num, den)
    return g if coeffs[0] > 0 else -g


def normalize(F: HomogeneousLift) -> NormalizedLift:
    if isinstance(F, NormalizedLift):
        return F
    lam = 1 / content(F)
    return NormalizedLift(F.m, F.d, tuple(tuple((a, c * lam) for a, c in f) for f in F.forms))


def sup_norm(F: HomogeneousLift) -> Fraction:
    """|F| = max |coefficient| of the lift as given."""
    return max(abs(c) for _, _, c in F.coefficients())


def height_of_map(F: HomogeneousLift) -> Fraction:
    """H(f) = max |coefficient| of the normalized lift."""
    return sup_norm(normalize(F))


# ==============================================================================
# Composition
# ==============================================================================

@lru_cache(maxsize=16)
def _poly_ring(nvars: int):
    R, *_ = ring([f"x{i}" for i in range(nvars)], sympy.QQ)
    return R


def _to_ring(F: HomogeneousLift):
    R = _poly_ring(F.m + 1)
    return [R.from_dict({a: sympy.QQ(c.numerator, c.denominator) for a, c in f}) for f in F.forms]


def compose(F: HomogeneousLift, G: HomogeneousLift) -> HomogeneousLift:
    """(F o G)_j = F_j(G_0, ..., G_m); degree d_F * d_G."""
    if G.M != F.m:
        raise DimensionError(f"Cannot compose: G lands in P^{G.M}, F is defined on P^{F.m}")
    R = _poly_ring(G.m + 1)
    G_polys = _to_ring(G)
    powers: Dict[Tuple[int, int], Any] = {}
    forms = []
    for f in F.forms:
        out = R.zero
        for alpha, c in f:
            term = R.ground_new(sympy.QQ(c.numerator, c.denominator))
            for i, a in enumerate(alpha):
                if a:
                    if (i, a) not in powers:
                        powers[(i, a)] = G_polys[i] ** a
                    term *= powers[(i, a)]
            out += term
        forms.append({tuple(k): as_fraction(v) for k, v in out.terms()})
    return HomogeneousLift(G.m, F.d * G.d, tuple(forms))


def iterate(F: HomogeneousLift, k: int, cap: int = CHAT_MAX_ITERS) -> HomogeneousLift:
    """F^k by repeated exact composition; F^0 is the identity lift."""
    if not F.is_endomorphism():
        raise DimensionError("Only endomorphisms can be iterated")
    if k < 0:
        raise DomainError(f"Iterate count must be >= 0, got {k}")
    if k > cap:
        raise ResourceCapError(f"Iterate count {k} exceeds cap {cap}", witness={'k': k, 'cap': cap})
    result = identity(F.m)
    for _ in range(k):
        result = compose(F, result)
    return result


# ==============================================================================
# Constructors
# ==============================================================================

def power(m: int, d: int) -> HomogeneousLift:
    """(X_0^d, ..., X_m^d)."""
    forms = []
    for i in range(m + 1):
        alpha = tuple(d if k == i else 0 for k in range(m + 1))
        forms.append({alpha: 1})
    return HomogeneousLift(m, d, tuple(forms))


def identity(m: int) -> HomogeneousLift:
    return power(m, 1)


def chebyshev(d: int) -> HomogeneousLift:
    """Homogenized t_d with t_0 = 2, t_1 = z, t_{k+1} = z t_k - t_{k-1}."""
    if d < 1:
        raise DomainError(f"Chebyshev degree must be >= 1, got {d}")
    z = sympy.Symbol('z')
    prev, cur = sympy.Poly(2, z), sympy.Poly(z, z)
    for _ in range(d - 1):
        prev, cur = cur, sympy.Poly(z, z) * cur - prev
    top = {(k, d - k): c for (k,), c in cur.terms()}
    return HomogeneousLift(1, d, (top, {(0, d): 1}))


_Z = sympy.Symbol('z')
_TRANSFORMS = standard_transformations + (implicit_multiplication_application, convert_xor)


def _parse_univariate(text: str) -> sympy.Poly:
    try:
        expr = parse_expr(text, local_dict={'z': _Z}, transformations=_TRANSFORMS)
        poly = sympy.Poly(expr, _Z, domain=sympy.QQ)
    except (sympy.SympifyError, sympy.PolynomialError, SyntaxError, TypeError) as e:
        raise ParseError(f"Not a polynomial in z: {text!r}") from e
    return poly


def from_univariate(P: Union[str, sympy.Poly], Q: Union[str, sympy.Poly]) -> HomogeneousLift:
    """Lift (P~(X, Y), Q~(X, Y)) of z -> P(z)/Q(z), homogenized to the common degree."""
    P = _parse_univariate(P) if isinstance(P, str) else sympy.Poly(P, _Z, domain=sympy.QQ)
    Q = _parse_univariate(Q) if isinstance(Q, str) else sympy.Poly(Q, _Z, domain=sympy.QQ)
    if Q.is_zero:
        raise ParseError("Denominator is the zero polynomial")
    common = sympy.gcd(P, Q)
    if common.degree() > 0:
        raise NotAMorphismError(
            f"P and Q share the factor {common.as_expr()}",
            witness={'gcd': str(common.as_expr())},
        )
    d = max(P.degree(), Q.degree())
    if d < 1:
        raise DomainError("Constant maps are not morphisms of degree >= 1")

    def homogenize(poly: sympy.Poly) -> Dict[Multiindex, Fraction]:
        return {(k, d - k): as_fraction(c) for (k,), c in poly.terms() if c != 0}

    return HomogeneousLift(1, d, (homogenize(P), homogenize(Q)))


def raw(m: int, d: int, table: Sequence[FormInput]) -> HomogeneousLift:
    return HomogeneousLift(m, d, tuple(table))


def construct(kind: str, params: Any) -> HomogeneousLift:
    """Dispatch for the named constructors used by the CLI builders."""
    builders = {
        'power': lambda p: power(*p),
        'identity': lambda p: identity(*p),
        'chebyshev': lambda p: chebyshev(*p),
        'rat': lambda p: from_univariate(*p),
        'raw': lambda p: raw(*p),
    }
    if kind not in builders:
        raise ParseError(f"Unknown lift constructor: {kind!r}")
    return builders[kind](params)


def parse_builder(text: str) -> HomogeneousLift:
    """
    Parse a CLI morphism argument.

    Accepted: power:m,d | identity:m | chebyshev:d | rat:P(z)|Q(z) |
    file:PATH | a path to a JSON file | an inline JSON object.
    """
    text = text.strip()
    if text.startswith('{'):
        return from_json(_load_json_text(text))
    if text.startswith('file:') or (text.endswith('.json') and os.path.exists(text)):
        path = text[5:] if text.startswith('file:') else text
        try:
            with open(path, encoding='utf-8') as f:
                return from_json(_load_json_text(f.read()))
        except OSError as e:
            raise ParseError(f"Cannot read morphism file {path}: {e}") from e
    kind, sep, rest = text.partition(':')
    if not sep:
        raise ParseError(f"Expected KIND:PARAMS, got {text!r}")
    if kind == 'rat':
        num, bar, den = rest.partition('|')
        if not bar:
            raise ParseError("rat: expects P(z)|Q(z)")
        return construct('rat', (num, den))
    try:
        ints = tuple(int(v) for v in rest.split(','))
    except ValueError as e:
        raise ParseError(f"Bad integer parameters in {text!r}") from e
    try:
        return construct(kind, ints)
    except TypeError as e:
        raise ParseError(f"Wrong number of parameters in {text!r}") from e


# ==============================================================================
# JSON
# ==============================================================================

def to_json(F: HomogeneousLift) -> Dict[str, Any]:
    return {
        'm': F.m,
        'M': F.M,
        'd': F.d,
        'forms': [[{'exps': list(a), 'coeff': format_rational(c)} for a, c in f] for f in F.forms],
    }


def _load_json_text(text: str) -> Dict[str, Any]:
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"Malformed morphism JSON: {e}") from e


def from_json(data: Mapping[str, Any]) -> HomogeneousLift:
    if not isinstance(data, Mapping):
        raise ParseError("Morphism JSON must be an object")
    for key in ('m', 'd', 'forms'):
        if key not in data:
            raise ParseError(f"Missing required field: {key}")
    forms = data['forms']
    if not isinstance(forms, list):
        raise ParseError("'forms' must be a list of term lists")
    if 'M' in data and data['M'] != len(forms) - 1:
        raise ParseError(f"'M' = {data['M']} but {len(forms)} forms given")
    try:
        table = [[(tuple(t['exps']), parse_rational(str(t['coeff']))) for t in form] for form in forms]
        return HomogeneousLift(int(data['m']), int(data['d']), tuple(table))
    except (KeyError, TypeError) as e:
        raise ParseError(f"Malformed term in morphism JSON: {e}") from e
