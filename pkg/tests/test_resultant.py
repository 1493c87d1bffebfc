import itertools
import math
from fractions import Fraction

import pytest
import sympy

from heights.errors import NotAMorphismError
from heights.morphism import from_univariate, identity, normalize, power, raw
from heights.rational_core import monomials, val_p
from heights.resultant import (
    crude_resultant_bound,
    find_pseudoinverse,
    has_good_reduction,
    macaulay_bound,
    pseudoinverse,
    pseudoinverse_excess_bound,
    require_morphism,
    resultant_data,
    resultant_norm_bound,
    surjectivity_degree,
    sylvester_matrix,
)

from .conftest import random_lift


def test_macaulay_bound():
    assert macaulay_bound(1, 2) == 3
    assert macaulay_bound(2, 2) == 4
    assert macaulay_bound(5, 1) == 1


def test_sylvester_power_map_is_permutation():
    S = sylvester_matrix(power(1, 2), 3)
    assert S.shape == (4, 4)
    assert sorted(sum(row) for row in S.entries) == [1, 1, 1, 1]
    assert abs(int(S.to_domain_matrix().det())) == 1


def test_sylvester_determinant_nine(bad_at_3):
    S = sylvester_matrix(bad_at_3, 3)
    assert S.shape == (4, 4)
    assert abs(int(S.to_domain_matrix().det())) == 9


def test_sylvester_linear_is_transpose():
    F = raw(1, 1, [{(1, 0): 2, (0, 1): 3}, {(1, 0): 5, (0, 1): 7}])
    S = sylvester_matrix(F, 1)
    assert [list(map(int, row)) for row in S.entries] == [[2, 5], [3, 7]]


def test_ternary_sylvester_has_fifteen_rows(ternary_quadrics):
    assert sylvester_matrix(ternary_quadrics, 4).shape[0] == 15


def test_resultant_valuations(bad_at_3, ternary_quadrics):
    assert resultant_data(bad_at_3).valuation(3) == 2
    assert resultant_data(bad_at_3).bad_primes == [3]
    assert resultant_data(ternary_quadrics).valuation(2) == 9


def test_resultant_good_everywhere(z2_plus_1):
    for F in (power(1, 2), power(2, 3), identity(2), z2_plus_1):
        data = resultant_data(F)
        assert data.is_morphism
        assert data.invariant_factor_product == 1
        assert data.bad_primes == []


def test_resultant_of_s_lift(s_lift):
    assert resultant_data(s_lift).res_ideal.as_map() == {2: 2}


def test_resultant_is_scale_invariant(bad_at_3):
    assert resultant_data(bad_at_3.scaled(Fraction(-5, 2))).res_ideal == resultant_data(bad_at_3).res_ideal


def test_not_a_morphism():
    F = raw(1, 2, [{(2, 0): 1}, {(1, 1): 1}])
    data = resultant_data(F)
    assert not data.is_morphism
    with pytest.raises(NotAMorphismError) as exc:
        require_morphism(F)
    assert exc.value.exit_code == 3
    assert exc.value.witness['invariant_factor_product'] == '0'


def test_too_few_forms_is_not_a_morphism():
    F = raw(2, 1, [{(1, 0, 0): 1}, {(0, 1, 0): 1}])
    assert not resultant_data(F).is_morphism


def test_good_reduction(bad_at_3, z2_plus_1, s_lift):
    assert all(has_good_reduction(z2_plus_1, p) for p in (2, 3, 5, 7))
    assert not has_good_reduction(bad_at_3, 3)
    assert has_good_reduction(s_lift, 7)
    assert not has_good_reduction(s_lift, 2)


def test_pseudoinverse_with_denominator_three(bad_at_3):
    G = pseudoinverse(bad_at_3, 2)
    assert G is not None
    assert G.satisfies(bad_at_3)
    assert G.valuation(3) == -1
    assert pseudoinverse_excess_bound(bad_at_3, 3) == 1


def test_pseudoinverse_underdetermined_system():
    F = raw(1, 2, [{(2, 0): 1, (0, 2): 2}, {(2, 0): 3}, {(2, 0): 5}])
    G = pseudoinverse(F, 2)
    assert G is not None
    assert G.satisfies(F)
    # a second particular solution, with denominator 68
    known = [
        [{(0, 0): Fraction(0)}, {(0, 0): Fraction(6, 68)}, {(0, 0): Fraction(10, 68)}],
        [{(0, 0): Fraction(34, 68)}, {(0, 0): Fraction(-3, 68)}, {(0, 0): Fraction(-5, 68)}],
    ]
    assert type(G)(2, 1, tuple(tuple(row) for row in known)).satisfies(F)


def test_pseudoinverse_of_power_map():
    G = find_pseudoinverse(power(1, 2))
    assert G.e == 2
    assert G.rows == (({(0, 0): 1}, {}), ({}, {(0, 0): 1}))
    assert pseudoinverse_excess_bound(power(1, 2), 5) == 0


def test_surjectivity_degree(bad_at_3):
    assert surjectivity_degree(bad_at_3) == 3
    assert surjectivity_degree(identity(1)) == 1


def test_norm_bounds(bad_at_3):
    assert resultant_norm_bound(power(1, 2)) == 1
    assert resultant_norm_bound(bad_at_3) == 1024
    assert resultant_data(bad_at_3).invariant_factor_product <= 1024
    assert crude_resultant_bound(power(1, 2)) == 9
    assert crude_resultant_bound(bad_at_3) >= resultant_norm_bound(bad_at_3)


def test_norm_bound_dominates_resultant(corpus_map):
    data = resultant_data(corpus_map)
    assert data.invariant_factor_product <= resultant_norm_bound(corpus_map)


def maximal_minors(F):
    S = sylvester_matrix(normalize(F), macaulay_bound(F.m, F.d))
    rows, cols = S.shape
    full = sympy.Matrix([[int(e) for e in row] for row in S.entries])
    return [int(full.extract(list(range(rows)), list(c)).det()) for c in itertools.combinations(range(cols), rows)]


@pytest.mark.parametrize('m,M,d', [(1, 1, 2), (1, 2, 2), (1, 1, 3)])
def test_invariant_factors_match_maximal_minors(rng, m, M, d):
    for _ in range(7):
        F = random_lift(rng, m, M, d, spread=3)
        minors = maximal_minors(F)
        data = resultant_data(F)
        assert data.invariant_factor_product == math.gcd(*minors)
        assert data.is_morphism == any(minors)
        if not data.is_morphism:
            continue
        for p in set(data.bad_primes) | {2, 3}:
            assert data.valuation(p) == min(val_p(x, p) for x in minors if x)


def times(form, linear):
    out = {}
    for alpha, c in form.items():
        for beta, b in linear.items():
            gamma = tuple(a + e for a, e in zip(alpha, beta))
            out[gamma] = out.get(gamma, 0) + c * b
    return out


def with_common_factor(rng, m, d):
    """M = m lift whose forms share a linear factor."""
    common = {beta: rng.randint(-3, 3) or 1 for beta in monomials(m + 1, 1)}
    rest = random_lift(rng, m, m, d - 1, spread=3)
    return raw(m, d, [times(dict(rest.form(j)), common) for j in range(m + 1)])


@pytest.mark.parametrize('m,d', [(1, 2), (1, 3), (2, 2)])
def test_morphism_iff_pseudoinverse_in_macaulay_degree(rng, m, d):
    seen = set()
    for i in range(17):
        F = with_common_factor(rng, m, d) if i % 3 == 0 else random_lift(rng, m, m, d, spread=3)
        G = pseudoinverse(F, macaulay_bound(m, d))
        is_morphism = resultant_data(F).is_morphism
        assert is_morphism == (G is not None)
        if G is not None:
            assert G.satisfies(normalize(F))
        seen.add(is_morphism)
    assert seen == {True, False}
