import math

import pytest

from heights.counting import (
    ProjPointQ,
    convergence_report,
    count_canonical,
    count_heights,
    count_image,
    count_pullback,
    enumerate_points,
    height_via_excess,
    image_height,
    pullback_radius,
)
from heights.errors import DomainError
from heights.morphism import identity, power
from heights.rational_core import mobius_count

from .conftest import CORPUS


def double_loop_count(B: int) -> int:
    count = 0
    for b in range(B + 1):
        for a in range(-B, B + 1):
            if math.gcd(a, b) == 1 and (b > 0 or a == 1):
                count += 1
    return count


def test_enumerate_points_small_boxes():
    assert {P.coords for P in enumerate_points(1, 1)} == {(1, 0), (-1, 1), (0, 1), (1, 1)}
    assert sum(1 for _ in enumerate_points(1, 2)) == 8
    with pytest.raises(DomainError):
        list(enumerate_points(1, 0))


@pytest.mark.parametrize('m,B', [(1, 9), (2, 3), (3, 2)])
def test_enumerated_points_are_distinct_and_canonical(m, B):
    points = list(enumerate_points(m, B))
    assert len(points) == len(set(points)) == mobius_count(m, B)
    assert all(ProjPointQ.from_vector(P.coords) == P for P in points)
    assert max(P.height for P in points) == B


def test_proj_point_from_vector():
    assert ProjPointQ.from_vector((4, -6)).coords == (-2, 3)
    assert ProjPointQ.from_vector((3, 0)).coords == (1, 0)
    assert str(ProjPointQ((1, 2))) == '(1 : 2)'


def test_count_heights(cfg):
    row = count_heights(1, 10, cfg)
    assert row.count == mobius_count(1, 10)
    assert row.exponent == 2
    assert row.predicted == pytest.approx(12 / math.pi**2 * 100)
    assert count_heights(2, 0.5, cfg).count == 0


def test_image_height_examples(s_lift):
    assert image_height(s_lift, (1, 1)) == 1
    assert image_height(s_lift, (3, 1)) == 4
    assert image_height(power(1, 2), (2, 3)) == 9


def test_image_height_agrees_with_excess_factorization(rng):
    F = CORPUS['6z2+1']()
    for _ in range(2000):
        x = (rng.randint(-300, 300), rng.randint(1, 300))
        assert image_height(F, x) == height_via_excess(F, x)


def test_image_height_agrees_on_scaled_lift(s_lift, rng):
    G = s_lift.scaled(7)
    for _ in range(200):
        x = (rng.randint(-50, 50), rng.randint(1, 50))
        assert height_via_excess(G, x) == image_height(s_lift, x)


def test_pullback_small_counts(cfg):
    assert count_pullback(identity(1), 1, cfg, constant=1.0).count == 4
    assert count_pullback(power(1, 2), 4, cfg, constant=1.0).count == 8


@pytest.mark.parametrize('X', [1, 7, 60, 200])
def test_pullback_identity_matches_double_loop(cfg, X):
    assert count_pullback(identity(1), X, cfg, constant=1.0).count == double_loop_count(X)


@pytest.mark.parametrize('name', ['s', 'T2', '3z2+1', '6z2+1', '(z2+3)/2z'])
def test_pullback_radius_covers_every_point(cfg, name):
    F = CORPUS[name]()
    X = 150
    B = pullback_radius(F, X, cfg)
    assert count_pullback(F, X, cfg, constant=1.0, radius=B).count == \
        count_pullback(F, X, cfg, constant=1.0, radius=2 * B).count


@pytest.mark.slow
def test_pullback_identity_ratio(cfg):
    row = count_pullback(identity(1), 500, cfg)
    assert row.ratio == pytest.approx(12 / math.pi**2, rel=0.015)
    assert row.predicted == pytest.approx(12 / math.pi**2 * 500**2, rel=1e-6)


def test_pullback_z_squared_plus_one(cfg, z2_plus_1):
    row = count_pullback(z2_plus_1, 1000, cfg)
    assert row.exponent == 1
    assert row.count == pytest.approx(955, rel=0.03)
    assert count_pullback(z2_plus_1, 2000, cfg).ratio == pytest.approx(3 / math.pi, rel=0.03)


def test_image_counts(cfg):
    row = count_image(identity(1), 1, gamma=1, cfg=cfg)
    assert row.count == 4
    assert row.predicted == pytest.approx(12 / math.pi**2)
    squares = count_image(power(1, 2), 4, cfg=cfg)
    assert squares.count == 5
    assert squares.predicted is None


def test_image_never_exceeds_pullback(cfg, z2_plus_1, s_lift):
    for F in (z2_plus_1, s_lift, CORPUS['6z2+1']()):
        for X in (10, 80):
            assert count_image(F, X, cfg=cfg).count <= count_pullback(F, X, cfg, constant=1.0).count


def test_image_of_z_squared_plus_one_halves_pullback(cfg, z2_plus_1):
    # (a : b) and (-a : b) share an image; (0 : 1) and (1 : 0) do not pair up
    images = count_image(z2_plus_1, 500, gamma=2, cfg=cfg, constant=3 / math.pi)
    pullback = count_pullback(z2_plus_1, 500, cfg, constant=3 / math.pi)
    assert images.count == (pullback.count + 2) // 2
    assert images.predicted == pytest.approx(3 / math.pi / 2 * 500)


def test_image_gamma_must_be_positive(cfg):
    with pytest.raises(DomainError):
        count_image(identity(1), 5, gamma=0, cfg=cfg)


def test_canonical_count_of_power_map_is_height_count(cfg):
    row = count_canonical(power(1, 2), 10.5, cfg, constant=1.0)
    assert row.count == mobius_count(1, 10)
    assert row.flagged_boundary == 0
    assert row.exponent == 2


def test_canonical_count_at_an_integer_height(cfg):
    row = count_canonical(power(1, 2), 10, cfg, constant=1.0)
    assert row.count == mobius_count(1, 10)
    assert row.flagged_boundary == 0


@pytest.mark.slow
@pytest.mark.parametrize('name,limit', [('T2', 16 / math.pi**2), ('s', 4 / math.pi)])
def test_canonical_count_ratio(cfg, name, limit):
    row = count_canonical(CORPUS[name](), 50, cfg, constant=limit)
    assert row.ratio == pytest.approx(limit, rel=0.1)


def test_canonical_count_requirements(cfg):
    with pytest.raises(DomainError):
        count_canonical(identity(1), 10, cfg, constant=1.0)


def test_convergence_report(cfg):
    rows = convergence_report(power(1, 2), [4, 9], 'pullback', cfg)
    assert [row.count for row in rows] == [8, mobius_count(1, 3)]
    assert rows[0].predicted == pytest.approx(12 / math.pi**2 * 4)
    assert rows[1].to_json()['exponent'] == '1'
    with pytest.raises(DomainError):
        convergence_report(power(1, 2), [4], 'bogus', cfg)
