"""
Counting points of P^m(Q) by height: plain heights, pulled-back heights
H(f(P)), heights of image points, and canonical heights, with the predicted
main terms alongside.

Enumeration is partitioned by the position k of the last nonzero coordinate
and a block of its values; partitions are counted independently and summed,
so exact counts do not depend on the worker count.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from config import DEFAULT_CONFIG, RunConfig
from heights.archimedean import ErrorConstants, error_constants, green_arch_batch
from heights.constants import assemble_constant, chat_limit_estimate, orbit_excess, schanuel_constant
from heights.errors import DomainError, HeightsError, ResourceCapError
from heights.morphism import HomogeneousLift, content, evaluate, identity, integer_evaluator, normalize
from heights.padic_local import excess_valuation, nonarch_constant
from heights.rational_core import as_fraction, mobius_count, primitive_integer_vector
from heights.resultant import require_morphism

logger = logging.getLogger(__name__)

_ROUNDING = 64 * np.finfo(float).eps

COUNT_MODES = ('pullback', 'image', 'canonical')
_BLOCKS_PER_INDEX = 64


@dataclass(frozen=True)
class ProjPointQ:
    """Primitive integer coordinates, last nonzero coordinate positive."""

    coords: Tuple[int, ...]

    @classmethod
    def from_vector(cls, x: Sequence) -> 'ProjPointQ':
        y = primitive_integer_vector(x)
        last = next(c for c in reversed(y) if c)
        return cls(y if last > 0 else tuple(-c for c in y))

    @property
    def height(self) -> int:
        return max(abs(c) for c in self.coords)

    def __str__(self) -> str:
        return '(' + ' : '.join(str(c) for c in self.coords) + ')'


@dataclass(frozen=True)
class CountRow:
    X: float
    count: int
    predicted: Optional[float]
    ratio: float
    flagged_boundary: int = 0
    exponent: Fraction = Fraction(1)

    CSV_HEADER = ('X', 'count', 'predicted', 'ratio', 'flagged')

    def csv_row(self) -> Tuple[object, ...]:
        return (self.X, self.count, '' if self.predicted is None else self.predicted, self.ratio, self.flagged_boundary)

    def to_json(self) -> Dict[str, object]:
        return {
            'X': self.X,
            'count': self.count,
            'predicted': self.predicted,
            'ratio': self.ratio,
            'flagged': self.flagged_boundary,
            'exponent': str(self.exponent),
        }


def _row(X, count: int, constant: Optional[float], exponent: Fraction, flagged: int = 0) -> CountRow:
    scale = float(X) ** float(exponent)
    predicted = None if constant is None else constant * scale
    return CountRow(float(X), count, predicted, count / scale, flagged, exponent)


# ==============================================================================
# Enumeration
# ==============================================================================

def _partitions(m: int, B: int) -> List[Tuple[int, int, int]]:
    """(k, lo, hi): points whose last nonzero coordinate sits at k with value in [lo, hi]."""
    parts = [(0, 1, 1)]
    step = max(1, -(-B // _BLOCKS_PER_INDEX))
    for k in range(1, m + 1):
        parts.extend((k, lo, min(B, lo + step - 1)) for lo in range(1, B + 1, step))
    return parts


def _partition_points(m: int, k: int, lo: int, hi: int, B: int) -> Iterator[Tuple[int, ...]]:
    tail = (0,) * (m - k)
    for v in range(lo, hi + 1):
        for head in itertools.product(range(-B, B + 1), repeat=k):
            if math.gcd(math.gcd(*head), v) == 1:
                yield head + (v,) + tail


def enumerate_points(m: int, B: int) -> Iterator[ProjPointQ]:
    """Every point of P^m(Q) with H(P) <= B, once each."""
    if B < 1:
        raise DomainError(f"Height bound must be >= 1, got {B}")
    for k, lo, hi in _partitions(m, B):
        for x in _partition_points(m, k, lo, hi, B):
            yield ProjPointQ(x)


def _count_partition(args) -> int:
    m, k, lo, hi, B = args
    return sum(1 for _ in _partition_points(m, k, lo, hi, B))


def count_heights(m: int, X: float, cfg: RunConfig = DEFAULT_CONFIG) -> CountRow:
    """#{P : H(P) <= X}, cross-checked against the Moebius-inversion count."""
    from tasks import run_parallel

    B = math.floor(X)
    if B < 1:
        return _row(X, 0, schanuel_constant(m), Fraction(m + 1))
    count = sum(run_parallel(_count_partition, [(m, *p, B) for p in _partitions(m, B)], threads=cfg.threads))
    expected = mobius_count(m, B)
    if count != expected:
        raise HeightsError(f"Enumeration found {count} points, Moebius count is {expected}")
    return _row(X, count, schanuel_constant(m), Fraction(m + 1))


# ==============================================================================
# Heights of images
# ==============================================================================

def image_height(F: HomogeneousLift, x: Sequence) -> int:
    """H(f(P)) = max|F(y)| / gcd(F(y)) for the primitive y representing P."""
    N = normalize(F)
    values = integer_evaluator(N)(primitive_integer_vector(x))
    return max(abs(v) for v in values) // math.gcd(*values)


def height_via_excess(F: HomogeneousLift, x: Sequence) -> Fraction:
    """
    H(f(P)) from <F(y)> = <y>^d <F> l_f(y): max|F(y)| / (|content F| Nm l_f(y)),
    with l_f(y) assembled from excess valuations at the primes dividing Res f.
    """
    N = normalize(F)
    y = primitive_integer_vector(x)
    norm = 1
    for p in require_morphism(N).bad_primes:
        norm *= p ** excess_valuation(N, p, y)
    values = evaluate(F, y)
    return max(abs(v) for v in values) / (abs(content(F)) * norm)


def _image_point(values: Sequence[int]) -> Tuple[int, ...]:
    g = math.gcd(*values)
    y = [v // g for v in values]
    last = next(c for c in reversed(y) if c)
    return tuple(y) if last > 0 else tuple(-c for c in y)


# ==============================================================================
# Pullback and image counts
# ==============================================================================

def pullback_radius(
    F: HomogeneousLift,
    X: float,
    cfg: RunConfig = DEFAULT_CONFIG,
    constants: Optional[ErrorConstants] = None,
) -> int:
    """
    B with H(f(P)) <= X  =>  H(P) <= B.

    |F(y)| >= kappa^d |y|^d and gcd F(y) divides C0d, so H(f(P)) >= kappa^d H(P)^d / C0d.
    The guaranteed lower bracket of kappa is used.
    """
    N = normalize(F)
    if constants is None or constants.C0d is None:
        C0d = nonarch_constant(N, class_cap=cfg.class_cap, threads=cfg.threads).C0d
        constants = error_constants(N, cfg, C0d=C0d)
    if constants.kappa_lower <= 0:
        raise ResourceCapError(
            "No positive lower bound for kappa at this grid size",
            witness={'kappa_grid': cfg.kappa_grid, 'kappa_inf': constants.kappa_inf},
        )
    bound = (float(X) * constants.C0d) ** (1.0 / N.d) / constants.kappa_lower
    return max(1, math.ceil(bound * (1 + 1e-9)))


def _pullback_partition(args) -> int:
    N, m, k, lo, hi, B, X = args
    evaluate_at = integer_evaluator(N)
    count = 0
    for x in _partition_points(m, k, lo, hi, B):
        values = evaluate_at(x)
        if max(abs(v) for v in values) <= X * math.gcd(*values):
            count += 1
    return count


def _image_partition(args) -> FrozenSet[Tuple[int, ...]]:
    N, m, k, lo, hi, B, X = args
    evaluate_at = integer_evaluator(N)
    found = set()
    for x in _partition_points(m, k, lo, hi, B):
        values = evaluate_at(x)
        if max(abs(v) for v in values) <= X * math.gcd(*values):
            found.add(_image_point(values))
    return frozenset(found)


def _scan_jobs(N: HomogeneousLift, X, B: int):
    X = Fraction(X) if not isinstance(X, str) else as_fraction(X)
    return [(N, N.m, *p, B, X) for p in _partitions(N.m, B)]


def count_pullback(
    F: HomogeneousLift,
    X: float,
    cfg: RunConfig = DEFAULT_CONFIG,
    constant: Optional[float] = None,
    radius: Optional[int] = None,
) -> CountRow:
    """#{P : H(f(P)) <= X}, exact, with c(f) X^((m+1)/d) as the prediction."""
    from tasks import run_parallel

    N = normalize(F)
    require_morphism(N)
    B = radius if radius is not None else pullback_radius(N, X, cfg)
    count = sum(run_parallel(_pullback_partition, _scan_jobs(N, X, B), threads=cfg.threads))
    if constant is None:
        constant = assemble_constant(N, cfg).c_value
    logger.debug("pullback count at X=%s: %d (scan radius %d)", X, count, B)
    return _row(X, count, constant, Fraction(N.m + 1, N.d))


def count_image(
    F: HomogeneousLift,
    X: float,
    gamma: Optional[int] = None,
    cfg: RunConfig = DEFAULT_CONFIG,
    constant: Optional[float] = None,
) -> CountRow:
    """#{f(P) : H(f(P)) <= X}, distinct image points; predicted c(f)/gamma X^((m+1)/d) when gamma is given."""
    from tasks import run_parallel

    if gamma is not None and gamma < 1:
        raise DomainError(f"gamma must be >= 1, got {gamma}")
    N = normalize(F)
    require_morphism(N)
    B = pullback_radius(N, X, cfg)
    images = frozenset().union(*run_parallel(_image_partition, _scan_jobs(N, X, B), threads=cfg.threads))
    if gamma is not None and constant is None:
        constant = assemble_constant(N, cfg).c_value
    prediction = None if gamma is None else constant / gamma
    return _row(X, len(images), prediction, Fraction(N.m + 1, N.d))


# ==============================================================================
# Canonical heights
# ==============================================================================

def canonical_scan_radius(F: HomogeneousLift, X: float, cfg: RunConfig = DEFAULT_CONFIG) -> int:
    """B with exp h_f(P) <= X  =>  H(P) <= B, from h_f >= h - log(C0d / kappa^d) / (d - 1)."""
    N = normalize(F)
    C0d = nonarch_constant(N, class_cap=cfg.class_cap, threads=cfg.threads).C0d
    constants = error_constants(N, cfg, C0d=C0d)
    if constants.kappa_lower <= 0:
        raise ResourceCapError(
            "No positive lower bound for kappa at this grid size",
            witness={'kappa_grid': cfg.kappa_grid, 'kappa_inf': constants.kappa_inf},
        )
    spread = max(1.0, C0d / constants.kappa_lower**N.d) ** (1.0 / (N.d - 1))
    return max(1, math.ceil(float(X) * spread * (1 + 1e-9)))


def _canonical_partition(args) -> Tuple[int, int]:
    N, m, k, lo, hi, B, log_X, bad, green_iters, orbit_iters = args
    points = list(_partition_points(m, k, lo, hi, B))
    if not points:
        return 0, 0
    values, errors = green_arch_batch(N, np.array(points, dtype=float), green_iters)
    for p, R in bad:
        weights = np.array([1.0 / N.d ** (j + 1) for j in range(orbit_iters)])
        corrections = np.array([np.dot(orbit_excess(N, p, x, orbit_iters, R), weights) for x in points])
        values = values - math.log(p) * corrections
        errors = errors + R * math.log(p) / (N.d**orbit_iters * (N.d - 1))
    # gaps at the rounding floor are ties, decided as <=
    floor = _ROUNDING * (1 + np.abs(values))
    inside = values <= log_X + floor
    flagged = (np.abs(values - log_X) <= errors) & (errors > floor)
    return int(inside.sum()), int(flagged.sum())


def count_canonical(
    F: HomogeneousLift,
    X: float,
    cfg: RunConfig = DEFAULT_CONFIG,
    constant: Optional[float] = None,
) -> CountRow:
    """
    #{P : exp h_f(P) <= X} by the point estimate of h_f; points within their
    error of the threshold are reported in flagged_boundary. When the error is
    only float rounding the point is counted and not flagged.
    """
    from tasks import run_parallel

    N = normalize(F)
    if not N.is_endomorphism() or N.d < 2:
        raise DomainError("Canonical counts need an endomorphism of degree >= 2")
    data = require_morphism(N)
    bad = [(p, data.valuation(p)) for p in data.bad_primes]
    B = canonical_scan_radius(N, X, cfg)
    jobs = [
        (N, N.m, *p, B, math.log(X), bad, cfg.green_iters, cfg.canonical_iters)
        for p in _partitions(N.m, B)
    ]
    results = run_parallel(_canonical_partition, jobs, threads=cfg.threads)
    count = sum(c for c, _ in results)
    flagged = sum(f for _, f in results)
    if constant is None:
        constant, _ = chat_limit_estimate(N, identity(N.m), cfg)
    return _row(X, count, constant, Fraction(N.m + 1), flagged)


# ==============================================================================
# Reports
# ==============================================================================

def convergence_report(
    F: HomogeneousLift,
    Xs: Sequence[float],
    mode: str = 'pullback',
    cfg: RunConfig = DEFAULT_CONFIG,
    gamma: Optional[int] = None,
) -> List[CountRow]:
    """One CountRow per X; the predicted constant is computed once."""
    if mode not in COUNT_MODES:
        raise DomainError(f"Unknown count mode {mode!r}; expected one of {COUNT_MODES}")
    N = normalize(F)
    if mode == 'canonical':
        constant, _ = chat_limit_estimate(N, identity(N.m), cfg)
        return [count_canonical(N, X, cfg, constant=constant) for X in Xs]
    constant = assemble_constant(N, cfg).c_value
    if mode == 'image':
        return [count_image(N, X, gamma, cfg, constant=constant) for X in Xs]
    return [count_pullback(N, X, cfg, constant=constant) for X in Xs]
