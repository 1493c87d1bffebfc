import itertools
import math
from fractions import Fraction

import pytest
from sympy import oo, totient

from heights.errors import DomainError, ParseError
from heights.rational_core import (
    UNIT_IDEAL,
    FactoredIdeal,
    factor,
    format_rational,
    int_val,
    jordan_totient,
    mobius_count,
    monomials,
    parse_rational,
    primitive_integer_vector,
    proj_space_size,
    proj_space_table,
    tuple_val_p,
    val_p,
)

# #P^m(Z/q) for q = 1..20 (rows) and m = 1..5 (columns)
PROJ_SPACE_TABLE = """
1 1 1 1 1 1
2 3 7 15 31 63
3 4 13 40 121 364
4 6 28 120 496 2016
5 6 31 156 781 3906
6 12 91 600 3751 22932
7 8 57 400 2801 19608
8 12 112 960 7936 64512
9 12 117 1080 9801 88452
10 18 217 2340 24211 246078
11 12 133 1464 16105 177156
12 24 364 4800 60016 733824
13 14 183 2380 30941 402234
14 24 399 6000 86831 1235304
15 24 403 6240 94501 1421784
16 24 448 7680 126976 2064384
17 18 307 5220 88741 1508598
18 36 819 16200 303831 5572476
19 20 381 7240 137561 2613660
20 36 868 18720 387376 7874496
"""


def test_val_p():
    assert val_p(12, 2) == 2
    assert val_p(Fraction(4, 9), 3) == -2
    assert val_p(0, 5) == oo
    assert val_p(-7, 7) == 1


def test_val_p_rejects_composite_modulus():
    with pytest.raises(DomainError):
        val_p(12, 6)


def test_tuple_val_p():
    assert tuple_val_p((2, 6), 2) == 1
    assert tuple_val_p((Fraction(1, 3), 9), 3) == -1
    assert tuple_val_p((0, 0), 7) == oo


def test_factor():
    assert factor(12).as_map() == {2: 2, 3: 1}
    assert factor(Fraction(9, 2)).as_map() == {3: 2, 2: -1}
    assert factor(1) == UNIT_IDEAL
    assert factor(-12) == factor(12)
    with pytest.raises(DomainError):
        factor(0)


def test_factored_ideal_arithmetic():
    a = factor(12)
    b = factor(Fraction(1, 2))
    assert (a * b).as_map() == {2: 1, 3: 1}
    assert (a**2).norm() == 144
    assert b.norm() == Fraction(1, 2)
    assert not b.is_integral()
    assert factor(6).divides(a)
    assert not a.divides(factor(6))
    assert FactoredIdeal.from_map({5: 0, 7: 1}).primes == [7]


def test_factored_ideal_json():
    ideal = factor(Fraction(45, 2))
    assert FactoredIdeal.from_json(ideal.to_json()) == ideal
    assert str(ideal) == '<2^-1 * 3^2 * 5>'


def test_jordan_totient():
    assert jordan_totient(2, 4) == 12
    assert jordan_totient(3, 1) == 1
    for q in range(1, 60):
        assert jordan_totient(1, q) == totient(q)


def test_jordan_totient_counts_primitive_tuples():
    for k in range(1, 4):
        for q in range(1, 31):
            primitive = sum(1 for t in itertools.product(range(q), repeat=k) if math.gcd(q, *t) == 1)
            assert jordan_totient(k, q) == primitive, (k, q)


def test_proj_space_table():
    expected = [[int(v) for v in line.split()] for line in PROJ_SPACE_TABLE.strip().splitlines()]
    assert proj_space_table(20, 5) == expected


def test_proj_space_size_counts_unit_orbits():
    for q in range(1, 21):
        units = [u for u in range(q) if math.gcd(u, q) == 1]
        for m in range(3):
            orbits = {
                min(tuple(u * c % q for c in x) for u in units)
                for x in itertools.product(range(q), repeat=m + 1)
                if math.gcd(q, *x) == 1
            }
            assert proj_space_size(m, q) == len(orbits), (m, q)


def test_proj_space_size_spot_values():
    assert proj_space_size(1, 12) == 24
    assert proj_space_size(2, 2) == 7
    assert proj_space_size(5, 20) == 7874496
    assert proj_space_size(0, 12) == 1


def test_mobius_count_matches_brute_force():
    for m, B in [(1, 1), (1, 2), (1, 10), (2, 4)]:
        box = itertools.product(range(-B, B + 1), repeat=m + 1)
        primitive = sum(1 for x in box if math.gcd(*x) == 1)
        assert mobius_count(m, B) == primitive // 2


def test_mobius_count_small():
    assert mobius_count(1, 1) == 4
    assert mobius_count(1, 2) == 8
    assert mobius_count(1, 0) == 0


def test_monomials():
    assert monomials(2, 2) == [(2, 0), (1, 1), (0, 2)]
    assert len(monomials(3, 4)) == math.comb(6, 2)
    assert monomials(3, -1) == []


def test_primitive_integer_vector():
    assert primitive_integer_vector((Fraction(1, 2), 3)) == (1, 6)
    assert primitive_integer_vector((4, 6, 0)) == (2, 3, 0)
    with pytest.raises(DomainError):
        primitive_integer_vector((0, 0))


def test_rational_text():
    assert format_rational(Fraction(-3, 4)) == '-3/4'
    assert format_rational(5) == '5'
    assert parse_rational(' 7/21 ') == Fraction(1, 3)
    with pytest.raises(ParseError):
        parse_rational('x/2')


def random_rational(rng, p):
    x = Fraction(rng.randint(-500, 500), rng.randint(1, 500))
    return x * Fraction(p) ** rng.randint(-3, 3)


@pytest.mark.parametrize('p', [2, 3, 5, 7])
def test_val_p_is_ultrametric(rng, p):
    for _ in range(500):
        x, y = random_rational(rng, p), random_rational(rng, p)
        if x == 0 or y == 0 or x + y == 0:
            continue
        vx, vy, vs = val_p(x, p), val_p(y, p), val_p(x + y, p)
        assert vs >= min(vx, vy)
        if vx != vy:
            assert vs == min(vx, vy)
        assert val_p(x * y, p) == vx + vy


def test_factor_recovers_the_absolute_value(rng):
    for _ in range(300):
        n = Fraction(rng.randint(-10**6, 10**6), rng.randint(1, 10**6))
        if n == 0:
            continue
        ideal = factor(n)
        assert ideal.norm() == abs(n)
        assert all(ideal.valuation(p) == val_p(n, p) for p in ideal.primes)
        assert factor(n) * factor(1 / n) == UNIT_IDEAL


def test_int_val():
    assert int_val(-48, 2) == 4
    assert int_val(7, 3) == 0
    assert int_val(3**5 * 10, 3) == 5
