import random
from fractions import Fraction

import pytest

from config import RunConfig
from heights.morphism import HomogeneousLift, chebyshev, from_univariate, identity, power, raw
from heights.rational_core import monomials


def quadric(coeffs):
    """Ternary quadric from (XX, XY, YY, XZ, YZ, ZZ) coefficients."""
    exps = [(2, 0, 0), (1, 1, 0), (0, 2, 0), (1, 0, 1), (0, 1, 1), (0, 0, 2)]
    return {e: c for e, c in zip(exps, coeffs) if c}


@pytest.fixture
def cfg():
    """Small but honest settings: single process, fewer samples."""
    return RunConfig(mc_samples=200_000, mc_batch=50_000, kappa_grid=20_000, threads=1)


@pytest.fixture
def rng():
    return random.Random(20261019)


@pytest.fixture
def s_lift() -> HomogeneousLift:
    return from_univariate('z^2 - 1', '2z')


@pytest.fixture
def z2_plus_1() -> HomogeneousLift:
    return raw(1, 2, [{(2, 0): 1, (0, 2): 1}, {(0, 2): 1}])


@pytest.fixture
def bad_at_3() -> HomogeneousLift:
    """(X^2 + 4Y^2, X^2 + Y^2): v_3(Res) = 2 but no excess valuation."""
    return raw(1, 2, [{(2, 0): 1, (0, 2): 4}, {(2, 0): 1, (0, 2): 1}])


@pytest.fixture
def t2() -> HomogeneousLift:
    return chebyshev(2)


@pytest.fixture
def ternary_quadrics() -> HomogeneousLift:
    return raw(2, 2, [
        quadric((1, -1, -1, 1, 1, -1)),
        quadric((1, 1, 1, 1, -1, 1)),
        quadric((1, 1, -1, 1, -1, 1)),
    ])


def random_lift(rng, m: int, M: int, d: int, spread: int = 5) -> HomogeneousLift:
    """Random rational lift with M+1 forms of degree d in m+1 variables; every form nonzero."""
    forms = []
    for _ in range(M + 1):
        form = {}
        for alpha in monomials(m + 1, d):
            if rng.random() < 0.6:
                form[alpha] = Fraction(rng.randint(-spread, spread), rng.randint(1, spread))
        alpha = rng.choice(monomials(m + 1, d))
        form[alpha] = Fraction(rng.choice([-1, 1]) * rng.randint(1, spread), rng.randint(1, spread))
        forms.append(form)
    return raw(m, d, forms)


def random_point(rng, n: int, spread: int = 9) -> tuple:
    return tuple(Fraction(rng.randint(-spread, spread), rng.randint(1, spread)) for _ in range(n))


def pz_plus_1(p: int, d: int) -> HomogeneousLift:
    """Lift (pX^d + Y^d, Y^d) of z -> p z^d + 1."""
    return raw(1, d, [{(d, 0): p, (0, d): 1}, {(0, d): 1}])


CORPUS = {
    'identity': lambda: identity(1),
    'identity-plane': lambda: identity(2),
    'power2': lambda: power(1, 2),
    'power3': lambda: power(1, 3),
    'power-plane': lambda: power(2, 2),
    'z2+1': lambda: raw(1, 2, [{(2, 0): 1, (0, 2): 1}, {(0, 2): 1}]),
    's': lambda: from_univariate('z^2 - 1', '2z'),
    'T2': lambda: chebyshev(2),
    'T3': lambda: chebyshev(3),
    'T4': lambda: chebyshev(4),
    '2z2+1': lambda: pz_plus_1(2, 2),
    '3z2+1': lambda: pz_plus_1(3, 2),
    '2z3+1': lambda: pz_plus_1(2, 3),
    '5z3+1': lambda: pz_plus_1(5, 3),
    '(z2+4)/(z2+1)': lambda: from_univariate('z^2 + 4', 'z^2 + 1'),
    '(z2+3)/2z': lambda: from_univariate('z^2 + 3', '2z'),
    '(z3+2)/4z': lambda: from_univariate('z^3 + 2', '4z'),
    'z(2z+1)/(z+2)': lambda: raw(1, 2, [{(2, 0): 2, (1, 1): 1}, {(1, 1): 1, (0, 2): 2}]),
    '6z2+1': lambda: pz_plus_1(6, 2),
    '10z2+1': lambda: pz_plus_1(10, 2),
    'plane-diagonal': lambda: raw(2, 2, [{(2, 0, 0): 1, (0, 2, 0): 3}, {(0, 2, 0): 1}, {(0, 0, 2): 1}]),
}


@pytest.fixture(params=sorted(CORPUS))
def corpus_map(request) -> HomogeneousLift:
    return CORPUS[request.param]()
