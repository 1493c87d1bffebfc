"""
The real place: volumes of the local fundamental domain D = {z : |F(z)| <= |F|},
the constants kappa and C_inf, Green's functions and limiting domain volumes.

|.| is the max-norm throughout. D and the limiting domains are star-shaped
about 0 and |F(ru)| = r^d |F(u)|, so every volume reduces to an integral over
the unit sphere S^m:

    vol D = 1/(m+1) * integral over S^m of (|F| / |F(u)|)^((m+1)/d) dsigma(u)

For m = 1 that integral is evaluated by adaptive quadrature in the angle;
for m >= 2 by uniform sphere sampling with 3-sigma error bars. Monte Carlo
batches draw from numpy SeedSequence(seed).spawn(...) streams, so results
depend only on the seed and the batch size, never on the worker count.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, optimize
from scipy.special import gamma as gamma_fn

from config import DEFAULT_CONFIG, QUAD_LIMIT, RunConfig
from heights.errors import DimensionError, DomainError, NotAMorphismError
from heights.morphism import (
    HomogeneousLift,
    chebyshev,
    compose,
    evaluate_float,
    height_of_map,
    iterate,
    normalize,
    sup_norm,
)
from heights.resultant import require_morphism

logger = logging.getLogger(__name__)

_EPS = np.finfo(float).eps
_BREAKPOINT_GRID = 4096


@dataclass(frozen=True)
class ArchEstimate:
    value: float
    error: float
    method: str                      # radial-quadrature | sphere-monte-carlo | green-monte-carlo
    samples: int                     # samples, or quadrature panels
    seed: Optional[int] = None
    threshold: Optional[float] = None
    threshold_gap: Optional[float] = None

    @property
    def interval(self) -> Tuple[float, float]:
        return self.value - self.error, self.value + self.error

    def contains(self, x: float, widen: float = 1.0) -> bool:
        return abs(self.value - x) <= widen * self.error

    def to_json(self) -> Dict[str, object]:
        out = {
            'value': self.value,
            'error': self.error,
            'method': self.method,
            'seed': self.seed,
            'samples': self.samples,
        }
        if self.threshold is not None:
            out['threshold'] = self.threshold
            out['threshold_gap'] = self.threshold_gap
        return out


@dataclass(frozen=True)
class ErrorConstants:
    """kappa = min over |u|_2 = 1 of |F(u)|^(1/d); kappa_lower is a guaranteed lower bracket."""

    kappa_inf: float
    kappa_lower: float
    C_inf: float
    C0d: Optional[int] = None
    grid_points: int = 0

    def to_json(self) -> Dict[str, object]:
        return {
            'kappa_inf': self.kappa_inf,
            'kappa_lower': self.kappa_lower,
            'C_inf': self.C_inf,
            'C0d': self.C0d,
            'grid_points': self.grid_points,
        }


def sphere_area(m: int) -> float:
    """Surface measure of S^m in R^(m+1)."""
    return 2 * math.pi ** ((m + 1) / 2) / gamma_fn((m + 1) / 2)


def _max_abs(F: HomogeneousLift, U: np.ndarray) -> np.ndarray:
    return np.abs(evaluate_float(F, U)).max(axis=1)


def _circle(theta) -> np.ndarray:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    return np.column_stack((np.cos(theta), np.sin(theta)))


def _sphere_samples(seed_seq: np.random.SeedSequence, n: int, dim: int) -> np.ndarray:
    rng = np.random.default_rng(seed_seq)
    U = rng.standard_normal((n, dim))
    return U / np.linalg.norm(U, axis=1, keepdims=True)


def _batch_sizes(total: int, batch: int) -> List[int]:
    full, rest = divmod(total, batch)
    return [batch] * full + ([rest] if rest else [])


# ==============================================================================
# Volume of D_{f,inf}
# ==============================================================================

def _angular_breakpoints(F: HomogeneousLift) -> List[float]:
    """Angles in [0, pi] where the maximizing form changes (kinks of the integrand)."""
    theta = np.linspace(0.0, math.pi, _BREAKPOINT_GRID + 1)
    A = np.abs(evaluate_float(F, _circle(theta)))
    top = A.argmax(axis=1)
    points = [0.0, math.pi]
    for i in np.nonzero(top[1:] != top[:-1])[0]:
        a, b = int(top[i]), int(top[i + 1])

        def tie(t: float, a=a, b=b) -> float:
            row = np.abs(evaluate_float(F, _circle(t)))[0]
            return row[a] - row[b]

        lo, hi = float(theta[i]), float(theta[i + 1])
        if tie(lo) * tie(hi) < 0:
            points.append(optimize.brentq(tie, lo, hi, xtol=1e-15))
        else:
            points.append(0.5 * (lo + hi))
    return sorted(set(points))


def _volume_quadrature(F: HomogeneousLift, H: float, quad_tol: float) -> ArchEstimate:
    r = 2.0 / F.d

    def integrand(t: float) -> float:
        return (H / _max_abs(F, _circle(t))[0]) ** r

    panels = _angular_breakpoints(F)
    n = len(panels) - 1
    value = error = 0.0
    for lo, hi in zip(panels[:-1], panels[1:]):
        v, e = integrate.quad(integrand, lo, hi, epsabs=quad_tol / n, epsrel=1e-12, limit=QUAD_LIMIT)
        value += v
        error += e
    # integral over [0, 2 pi] is twice the half circle; the 1/(m+1) = 1/2 cancels it
    return ArchEstimate(value, max(error, 4 * _EPS * value), 'radial-quadrature', n)


def _volume_batch(args) -> Tuple[float, float, int]:
    F, H, seed_seq, n = args
    U = _sphere_samples(seed_seq, n, F.m + 1)
    R = (H / _max_abs(F, U)) ** ((F.m + 1) / F.d)
    return float(R.sum()), float((R * R).sum()), n


def _combine_batches(results, scale: float) -> Tuple[float, float, int]:
    total = sum(s for s, _, _ in results)
    total_sq = sum(q for _, q, _ in results)
    n = sum(k for _, _, k in results)
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0)
    value = scale * mean
    error = 3 * scale * math.sqrt(var / n)
    return value, max(error, 4 * _EPS * abs(value)), n


def arch_volume(F: HomogeneousLift, cfg: RunConfig = DEFAULT_CONFIG, check_morphism: bool = True) -> ArchEstimate:
    """c_inf(f) = vol D_{f,inf}; lift-invariant."""
    from tasks import run_parallel

    N = normalize(F)
    if check_morphism:
        require_morphism(N)
    H = float(height_of_map(N))
    if N.m == 0:
        R = (H / _max_abs(N, np.array([[1.0]]))[0]) ** (1.0 / N.d)
        return ArchEstimate(2 * R, 4 * _EPS * R, 'radial-quadrature', 1)
    if N.m == 1:
        est = _volume_quadrature(N, H, cfg.quad_tol)
        logger.debug("vol D = %.12g +- %.2g over %d panels", est.value, est.error, est.samples)
        return est

    sizes = _batch_sizes(cfg.mc_samples, cfg.mc_batch)
    streams = np.random.SeedSequence(cfg.seed).spawn(len(sizes))
    results = run_parallel(_volume_batch, [(N, H, s, n) for s, n in zip(streams, sizes)], threads=cfg.threads)
    value, error, n = _combine_batches(results, sphere_area(N.m) / (N.m + 1))
    logger.debug("vol D = %.8g +- %.2g from %d sphere samples", value, error, n)
    return ArchEstimate(value, error, 'sphere-monte-carlo', n, seed=cfg.seed)


# ==============================================================================
# kappa and C_inf
# ==============================================================================

def _sphere_grid(m: int, target: int) -> Tuple[np.ndarray, float]:
    """Grid points on S^m and a covering radius (every u in S^m is within it of some point)."""
    if m == 1:
        n = max(16, target)
        h = math.pi / n
        theta = np.arange(n) * h
        # antipodal symmetry |F(-u)| = |F(u)| covers the other half circle
        return _circle(theta), h / 2
    k = max(3, int(round((target / (2 * (m + 1))) ** (1.0 / m))))
    axis = np.linspace(-1.0, 1.0, k)
    h = axis[1] - axis[0]
    faces = []
    free = np.array(np.meshgrid(*([axis] * m), indexing='ij')).reshape(m, -1).T
    for i in range(m + 1):
        for sign in (-1.0, 1.0):
            face = np.insert(free, i, sign, axis=1)
            faces.append(face)
    cube = np.vstack(faces)
    # radial projection from the cube surface onto the sphere is 1-Lipschitz
    return cube / np.linalg.norm(cube, axis=1, keepdims=True), math.sqrt(m) * h / 2


def _lipschitz_constant(F: HomogeneousLift) -> float:
    """Bound for the gradient of every F_j on the closed unit ball."""
    return max(F.d * sum(abs(float(c)) for _, c in form) for form in F.forms)


def error_constants(
    F: HomogeneousLift,
    cfg: RunConfig = DEFAULT_CONFIG,
    C0d: Optional[int] = None,
    check_morphism: bool = True,
) -> ErrorConstants:
    """kappa_inf by sphere grid + local refinement; C_inf = |F|^(1/d) / kappa_inf."""
    N = normalize(F)
    if check_morphism:
        require_morphism(N)
    U, radius = _sphere_grid(N.m, cfg.kappa_grid) if N.m else (np.array([[1.0]]), 0.0)
    values = _max_abs(N, U)
    best = int(values.argmin())
    grid_min = float(values[best])

    def objective(v: np.ndarray) -> float:
        norm = np.linalg.norm(v)
        if norm == 0:
            return math.inf
        return float(_max_abs(N, (v / norm)[None, :])[0])

    refined = grid_min
    if N.m:
        res = optimize.minimize(objective, U[best], method='Nelder-Mead', options={'xatol': 1e-13, 'fatol': 1e-15})
        refined = min(grid_min, float(res.fun))
    if refined <= 0:
        raise NotAMorphismError("|F| vanishes on the unit sphere", witness={'direction': U[best].tolist()})

    lower = grid_min - _lipschitz_constant(N) * radius
    kappa = refined ** (1.0 / N.d)
    if lower > 0:
        kappa_lower = lower ** (1.0 / N.d)
    else:
        logger.warning("kappa bracket is not positive at grid size %d; raise kappa_grid", len(U))
        kappa_lower = 0.0
    H = float(height_of_map(N))
    return ErrorConstants(kappa, kappa_lower, H ** (1.0 / N.d) / kappa, C0d, len(U))


# ==============================================================================
# Green's functions
# ==============================================================================

def _require_dynamical(F: HomogeneousLift) -> None:
    if not F.is_endomorphism():
        raise DimensionError("Green's functions need an endomorphism (M = m)")
    if F.d < 2:
        raise DomainError("Green's functions need degree >= 2")


def green_arch(F: HomogeneousLift, x: Sequence[float], iters: int = DEFAULT_CONFIG.green_iters) -> Tuple[float, float]:
    """
    G_F(x) = lim log|F^i(x)| / d^i, renormalizing to unit max-norm each step.

    Returns (value, gap), gap being the last increment (floored at rounding level).
    """
    _require_dynamical(F)
    v = np.asarray([float(c) for c in x])
    if v.shape != (F.m + 1,):
        raise DimensionError(f"Point has {v.size} coordinates, lift expects {F.m + 1}")
    values, gaps = green_arch_batch(F, v[None, :], iters)
    return float(values[0]), float(gaps[0])


def green_arch_batch(F: HomogeneousLift, X: np.ndarray, iters: int = DEFAULT_CONFIG.green_iters) -> Tuple[np.ndarray, np.ndarray]:
    _require_dynamical(F)
    V = np.atleast_2d(np.asarray(X, dtype=float)).copy()
    scale = np.abs(V).max(axis=1)
    if np.any(scale == 0):
        raise DomainError("The zero vector has no Green's function value")
    total = np.log(scale)
    V /= scale[:, None]
    inc = np.zeros_like(total)
    weight = 1.0
    for _ in range(iters):
        W = evaluate_float(F, V)
        t = np.abs(W).max(axis=1)
        if np.any(t == 0):
            raise NotAMorphismError("F vanishes along an orbit")
        weight /= F.d
        inc = np.log(t) * weight
        total += inc
        V = W / t[:, None]
    gaps = np.maximum(np.abs(inc), 64 * _EPS * (1 + np.abs(total)))
    return total, gaps


def _threshold(F: HomogeneousLift, G: HomogeneousLift, mode: str, exact_iters: int) -> Tuple[float, float]:
    """(log A, gap) for the region exp G_F(G(z)) <= A."""
    if mode == 'normalized':
        return 0.0, 0.0
    if mode != 'lift':
        raise DomainError(f"Unknown threshold mode: {mode!r}")
    logs = []
    for k in range(max(1, exact_iters) + 1):
        H = compose(iterate(F, k, cap=max(k, exact_iters)), G) if k else G
        logs.append(math.log(float(sup_norm(H))) / F.d**k)
    return logs[-1], abs(logs[-1] - logs[-2])


def _green_volume_batch(args) -> Tuple[float, float, int]:
    F, G, log_A, iters, seed_seq, n = args
    U = _sphere_samples(seed_seq, n, G.m + 1)
    values, _ = green_arch_batch(F, evaluate_float(G, U), iters)
    R = np.exp((log_A - values) / G.d)
    return float((R ** (G.m + 1)).sum()), float((R ** (2 * (G.m + 1))).sum()), n


def limiting_arch_factor(
    F: HomogeneousLift,
    G: HomogeneousLift,
    cfg: RunConfig = DEFAULT_CONFIG,
    threshold: str = 'normalized',
) -> ArchEstimate:
    """
    vol {z : exp G_F(G(z)) <= A} by sphere-radial Monte Carlo.

    threshold='normalized' takes A = 1; threshold='lift' takes
    A = |F^k o G|^(1/d^k) for k = cfg.exact_iters exact compositions and
    reports the last change of that sequence as threshold_gap.
    """
    from tasks import run_parallel

    _require_dynamical(F)
    if G.M != F.m:
        raise DimensionError(f"G lands in P^{G.M}, F is defined on P^{F.m}")
    N = normalize(F)
    log_A, gap = _threshold(N, G, threshold, cfg.exact_iters)

    sizes = _batch_sizes(cfg.mc_samples, cfg.mc_batch)
    streams = np.random.SeedSequence(cfg.seed).spawn(len(sizes))
    jobs = [(N, G, log_A, cfg.green_iters, s, n) for s, n in zip(streams, sizes)]
    results = run_parallel(_green_volume_batch, jobs, threads=cfg.threads)
    value, error, n = _combine_batches(results, sphere_area(G.m) / (G.m + 1))
    logger.debug("limiting volume %.8g +- %.2g (threshold %s)", value, error, threshold)
    return ArchEstimate(
        value, error, 'green-monte-carlo', n, seed=cfg.seed,
        threshold=math.exp(log_A), threshold_gap=gap,
    )


def chebyshev_height_trend(d_max: int = 64) -> List[Tuple[int, float]]:
    """(d, |T_d|^(1/d)) for d = 1..d_max. Reported only; the limit is not certified."""
    if not 1 <= d_max <= 64:
        raise DomainError(f"d_max must lie in 1..64, got {d_max}")
    return [(d, math.exp(math.log(int(sup_norm(chebyshev(d)))) / d)) for d in range(1, d_max + 1)]
