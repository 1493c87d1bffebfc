"""
The constant c_Q(f) = 1/(2 zeta(m+1)) * c_inf(f) * c_0(f) / H(f)^((m+1)/d),
canonical heights, and the sequence c_Q(f^i o g) with its limit.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import mpmath
import sympy

from config import DEFAULT_CONFIG, RunConfig
from heights.archimedean import ArchEstimate, arch_volume, green_arch, limiting_arch_factor
from heights.errors import DimensionError, DomainError, ResourceCapError
from heights.morphism import (
    HomogeneousLift,
    compose,
    content,
    height_of_map,
    integer_evaluator,
    normalize,
)
from heights.padic_local import NonarchConstant, local_density, nonarch_constant
from heights.rational_core import format_rational, primitive_integer_vector
from heights.resultant import require_morphism

logger = logging.getLogger(__name__)


# ==============================================================================
# Zeta values and the prefactor c(m)
# ==============================================================================

ZETA_TERMS = 10**4


@lru_cache(maxsize=32)
def zeta_int(s: int) -> Tuple[float, float]:
    """
    (zeta(s), error) for an integer s >= 2.

    Even s use the closed form, so the error is the float rounding. Odd s sum
    ZETA_TERMS terms at 30 digits and add the Euler-Maclaurin tail
    N^(1-s)/(s-1) - N^-s/2 + s N^(-s-1)/12; n^-s is completely monotone, so
    the first omitted term s(s+1)(s+2) N^(-s-3)/720 bounds the remainder.
    """
    if s < 2:
        raise DomainError(f"zeta_int needs s >= 2, got {s}")
    if s % 2 == 0:
        value = float(sympy.zeta(s).evalf(30))
        return value, math.ulp(value)
    with mpmath.workdps(30):
        N = mpmath.mpf(ZETA_TERMS)
        partial = mpmath.fsum(mpmath.mpf(n) ** -s for n in range(1, ZETA_TERMS + 1))
        tail = N ** (1 - s) / (s - 1) - N**-s / 2 + s * N ** (-s - 1) / 12
        remainder = s * (s + 1) * (s + 2) * N ** (-s - 3) / 720
        value = float(partial + tail)
    return value, float(remainder) + math.ulp(value)


def prefactor_exact(m: int) -> sympy.Expr:
    """c(m) = 1/(2 zeta(m+1)) as a sympy expression (a rational multiple of pi^-(m+1) for odd m)."""
    return 1 / (2 * sympy.zeta(m + 1))


def schanuel_constant(m: int) -> float:
    """c(m) * 2^(m+1): the leading constant for points of P^m(Q) of height <= X, times X^(m+1)."""
    zeta, _ = zeta_int(m + 1)
    return 2**m / zeta


# ==============================================================================
# Assembly
# ==============================================================================

@dataclass(frozen=True)
class ConstantReport:
    m: int
    d: int
    prefactor: float
    prefactor_exact: str
    arch: ArchEstimate
    nonarch: NonarchConstant
    height: Fraction
    exponent: Fraction
    height_divisor: float
    c_value: float
    c_error: float

    @property
    def mu0(self) -> Fraction:
        return self.nonarch.mu0

    def predicted_count(self, X: float, gamma: int = 1) -> float:
        return self.c_value / gamma * X ** float(self.exponent)

    def to_json(self) -> Dict[str, object]:
        c0 = self.nonarch.float_value
        return {
            'm': self.m,
            'd': self.d,
            'prefactor': {'exact': self.prefactor_exact, 'float': self.prefactor},
            'arch': self.arch.to_json(),
            'nonarch': self.nonarch.to_json(),
            'height_divisor': {
                'base': format_rational(self.height),
                'exponent': format_rational(self.exponent),
                'float': self.height_divisor,
            },
            'c0_over_mu0': c0 / float(self.mu0),
            'c': self.c_value,
            'c_error': self.c_error,
        }


def assemble_constant(
    F: HomogeneousLift,
    cfg: RunConfig = DEFAULT_CONFIG,
    nonarch: Optional[NonarchConstant] = None,
    arch: Optional[ArchEstimate] = None,
    check_morphism: bool = True,
) -> ConstantReport:
    N = normalize(F)
    if check_morphism:
        require_morphism(N)
    if nonarch is None:
        nonarch = nonarch_constant(N, class_cap=cfg.class_cap, threads=cfg.threads)
    if arch is None:
        arch = arch_volume(N, cfg, check_morphism=False)

    zeta, zeta_err = zeta_int(N.m + 1)
    prefactor = 1 / (2 * zeta)
    H = height_of_map(N)
    exponent = Fraction(N.m + 1, N.d)
    divisor = math.exp(math.log(int(H)) * float(exponent))
    c0 = nonarch.float_value
    c_value = prefactor * arch.value * c0 / divisor
    c_error = prefactor * arch.error * c0 / divisor + abs(c_value) * zeta_err / zeta
    logger.debug("c(f) = %.10g +- %.2g for %s", c_value, c_error, N)
    return ConstantReport(
        m=N.m,
        d=N.d,
        prefactor=prefactor,
        prefactor_exact=str(prefactor_exact(N.m)),
        arch=arch,
        nonarch=nonarch,
        height=H,
        exponent=exponent,
        height_divisor=divisor,
        c_value=c_value,
        c_error=c_error,
    )


# ==============================================================================
# Canonical heights
# ==============================================================================

@dataclass(frozen=True)
class CanonicalHeightEstimate:
    value: float
    error: float
    iterations: int
    green: float = 0.0
    finite: Tuple[Tuple[int, float], ...] = field(default_factory=tuple)

    def to_json(self) -> Dict[str, object]:
        return {
            'value': self.value,
            'error': self.error,
            'iterations': self.iterations,
            'green': self.green,
            'finite': {str(p): c for p, c in self.finite},
        }


def orbit_excess(F: HomogeneousLift, p: int, x: Sequence[int], steps: int, bound: int) -> List[int]:
    """
    eps_{f,p}(x_k) for k < steps along the orbit of the primitive x, tracked
    mod p^N. Each step loses at most `bound` digits of precision.
    """
    modulus = p ** (bound * (steps + 1) + 1)
    evaluate_at = integer_evaluator(F)
    y = tuple(c % modulus for c in x)
    out = []
    for _ in range(steps):
        values = [v % modulus for v in evaluate_at(y)]
        e = 0
        while e < bound and all(v % p**(e + 1) == 0 for v in values):
            e += 1
        out.append(e)
        modulus //= p**e
        y = tuple((v // p**e) % modulus for v in values)
    return out


def canonical_height(
    F: HomogeneousLift,
    P: Sequence,
    iters: int = DEFAULT_CONFIG.canonical_iters,
    green_iters: int = DEFAULT_CONFIG.green_iters,
) -> CanonicalHeightEstimate:
    """
    h_f(P) = G_inf(x) - sum_p log p * sum_k eps_p(x_k) / d^(k+1)

    for the primitive integer x representing P and its orbit x_k. The finite
    sums are exact up to the truncation after `iters` steps, whose tail is
    bounded by v_p(Res f) log p / (d^iters (d - 1)).
    """
    N = normalize(F)
    if not N.is_endomorphism():
        raise DimensionError("Canonical heights need an endomorphism")
    if N.d < 2:
        raise DomainError("Canonical heights need degree >= 2")
    data = require_morphism(N)
    x = primitive_integer_vector(P)
    if len(x) != N.m + 1:
        raise DimensionError(f"Point has {len(x)} coordinates, map expects {N.m + 1}")

    green, gap = green_arch(N, x, green_iters)
    error = gap
    finite = []
    for p in data.bad_primes:
        R = data.valuation(p)
        eps = orbit_excess(N, p, x, iters, R)
        correction = math.log(p) * sum(e / N.d ** (k + 1) for k, e in enumerate(eps))
        finite.append((p, correction))
        error += R * math.log(p) / (N.d**iters * (N.d - 1))
    value = green - sum(c for _, c in finite)
    return CanonicalHeightEstimate(value, error, iters, green, tuple(finite))


# ==============================================================================
# Dynamical limits
# ==============================================================================

@dataclass(frozen=True)
class ChatSequence:
    reports: Tuple[ConstantReport, ...]
    limiting: ArchEstimate
    limit: float
    limit_error: float

    @property
    def values(self) -> List[float]:
        return [r.c_value for r in self.reports]

    @property
    def nonarch_factors(self) -> List[str]:
        return [str(r.nonarch.exact) for r in self.reports]

    def to_json(self) -> Dict[str, object]:
        return {
            'sequence': [
                {'i': i, 'c': r.c_value, 'c_error': r.c_error, 'c0': str(r.nonarch.exact), 'arch': r.arch.value}
                for i, r in enumerate(self.reports)
            ],
            'limiting_arch': self.limiting.to_json(),
            'limit_estimate': {'value': self.limit, 'error': self.limit_error},
        }


def _composite_nonarch(
    composite: HomogeneousLift,
    primes: Sequence[int],
    depths: Mapping[int, int],
    cfg: RunConfig,
) -> NonarchConstant:
    return nonarch_constant(
        composite,
        bad_primes=list(primes),
        max_depths={p: depths[p] + 1 for p in primes},
        class_cap=cfg.class_cap,
        threads=cfg.threads,
    )


def _dynamical_setup(F: HomogeneousLift, G: HomogeneousLift, k: int, cfg: RunConfig):
    NF, NG = normalize(F), normalize(G)
    if not NF.is_endomorphism():
        raise DimensionError("F must be an endomorphism")
    if NF.d < 2:
        raise DomainError("F must have degree >= 2")
    if NG.M != NF.m:
        raise DimensionError(f"G lands in P^{NG.M}, F is defined on P^{NF.m}")
    if k > cfg.chat_max_iters:
        raise ResourceCapError(
            f"{k} iterates requested, cap is {cfg.chat_max_iters}",
            witness={'k': k, 'cap': cfg.chat_max_iters},
        )
    primes = sorted(set(require_morphism(NF).bad_primes) | set(require_morphism(NG).bad_primes))
    return NF, NG, primes


def chat_sequence(
    F: HomogeneousLift,
    G: HomogeneousLift,
    k: int,
    cfg: RunConfig = DEFAULT_CONFIG,
    threshold: str = 'normalized',
) -> ChatSequence:
    """
    [c_Q(F^i o G) for i = 0..k], the limiting archimedean volume, and the
    limit estimate from the last iterate.

    Composites are never run through the resultant: their bad primes lie in
    bad(F) u bad(G), and ||eps|| of F o H is at most d_F ||eps_H|| + ||eps_F||.
    """
    NF, NG, primes = _dynamical_setup(F, G, k, cfg)
    eps_F = {p: local_density(NF, p).max_excess for p in primes}
    depths = {p: local_density(NG, p).max_excess for p in primes}

    reports = [assemble_constant(NG, cfg)]
    composite = NG
    for i in range(1, k + 1):
        composite = compose(NF, composite)
        depths = {p: NF.d * depths[p] + eps_F[p] for p in primes}
        nonarch = _composite_nonarch(normalize(composite), primes, depths, cfg)
        reports.append(assemble_constant(composite, cfg, nonarch=nonarch, check_morphism=False))
        logger.info("c(F^%d o G) = %.8g +- %.2g", i, reports[-1].c_value, reports[-1].c_error)

    limiting = limiting_arch_factor(NF, NG, cfg, threshold=threshold)
    value, error = chat_limit_estimate(
        NF, NG, cfg,
        composite=composite,
        iterates=k,
        nonarch=reports[-1].nonarch,
        limiting=limiting if threshold == 'normalized' else None,
    )
    return ChatSequence(tuple(reports), limiting, value, error)


def chat_limit_estimate(
    F: HomogeneousLift,
    G: HomogeneousLift,
    cfg: RunConfig = DEFAULT_CONFIG,
    composite: Optional[HomogeneousLift] = None,
    iterates: Optional[int] = None,
    nonarch: Optional[NonarchConstant] = None,
    limiting: Optional[ArchEstimate] = None,
) -> Tuple[float, float]:
    """
    c(m) * vol{exp G_F(G(z)) <= 1} * c_0(N_k) * |cont_k|^((m+1)/(d^k e))

    where F^k o G = cont_k * N_k with N_k normalized (F and G normalized
    first) and e = deg G. Missing pieces are computed with k = cfg.exact_iters.
    """
    NF, NG = normalize(F), normalize(G)
    if iterates is None:
        iterates = min(cfg.exact_iters, cfg.chat_max_iters)
    _, _, primes = _dynamical_setup(NF, NG, iterates, cfg)
    if composite is None:
        composite = NG
        for _ in range(iterates):
            composite = compose(NF, composite)
    if nonarch is None:
        eps_F = {p: local_density(NF, p).max_excess for p in primes}
        depths = {p: local_density(NG, p).max_excess for p in primes}
        for _ in range(iterates):
            depths = {p: NF.d * depths[p] + eps_F[p] for p in primes}
        nonarch = _composite_nonarch(normalize(composite), primes, depths, cfg)
    if limiting is None:
        limiting = limiting_arch_factor(NF, NG, cfg, threshold='normalized')
    elif limiting.threshold not in (None, 1.0):
        raise DomainError("The limit estimate needs the volume at threshold 1")

    zeta, _ = zeta_int(NG.m + 1)
    prefactor = 1 / (2 * zeta)
    cont = abs(content(composite))
    log_cont = math.log(cont.numerator) - math.log(cont.denominator)
    scale = math.exp(log_cont * (NG.m + 1) / composite.d)
    factor = prefactor * nonarch.float_value * scale
    return factor * limiting.value, factor * limiting.error
