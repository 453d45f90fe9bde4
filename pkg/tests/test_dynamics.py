import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nuspec.dynamics import (
    Point2,
    Space,
    SystemSpec,
    apply,
    apply_inverse,
    differential,
    distance,
    orbit,
    step_xy,
    wrap_half,
)
from nuspec.errors import ConfigError, NonFiniteError


def torus(x, y):
    return Point2(x, y, Space.TORUS2)


def test_cat_fixed_point(cat):
    assert apply(cat, torus(0.0, 0.0)) == torus(0.0, 0.0)


def test_cat_apply_arithmetic(cat):
    # A (0.5, 0.5) = (1.5, 1.0) -> (0.5, 0.0)
    p = apply(cat, torus(0.5, 0.5))
    assert (p.x, p.y) == (0.5, 0.0)


def test_henon_apply(henon):
    p = apply(henon, Point2(0.0, 0.0, Space.PLANE))
    assert (p.x, p.y) == (1.0, 0.0)


def test_cat_inverse_example(cat):
    p = apply_inverse(cat, torus(0.5, 0.0))
    assert (p.x, p.y) == (0.5, 0.5)


def test_round_trips(all_systems):
    rng = np.random.default_rng(5)
    for system in all_systems:
        sp = system.space
        for _ in range(1000):
            if sp is Space.TORUS2:
                p = Point2(*rng.random(2), sp)
            else:
                p = Point2(rng.uniform(-1.0, 1.0), rng.uniform(-0.3, 0.3), sp)
            q = apply_inverse(system, apply(system, p))
            assert distance(sp, p, q) <= 1e-10
            w = apply(system, apply_inverse(system, p))
            assert distance(sp, p, w) <= 1e-10


def test_cat_differential_constant(cat):
    J = differential(cat, torus(0.37, 0.81))
    assert np.array_equal(J, np.array([[2.0, 1.0], [1.0, 1.0]]))


def test_henon_differential_origin(henon):
    J = differential(henon, Point2(0.0, 0.0, Space.PLANE))
    assert np.array_equal(J, np.array([[0.0, 1.0], [0.3, 0.0]]))


def test_cat_determinant_exactly_one(cat):
    rng = np.random.default_rng(2)
    for _ in range(50):
        J = differential(cat, torus(*rng.random(2)))
        assert J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0] == 1.0


def test_jacobian_finite_difference(all_systems):
    h = 1e-6
    rng = np.random.default_rng(9)
    for system in all_systems:
        sp = system.space
        for _ in range(100):
            if sp is Space.TORUS2:
                x, y = rng.random(2)
            else:
                x, y = rng.uniform(-1.0, 1.0), rng.uniform(-0.3, 0.3)
            J = differential(system, Point2(x, y, sp))
            for col, (dx, dy) in enumerate(((h, 0.0), (0.0, h))):
                fp = step_xy(system, x + dx, y + dy)
                fm = step_xy(system, x - dx, y - dy)
                d0 = fp[0] - fm[0]
                d1 = fp[1] - fm[1]
                if sp is Space.TORUS2:
                    d0 = wrap_half(d0)
                    d1 = wrap_half(d1)
                assert abs(d0 / (2 * h) - J[0, col]) <= 1e-5
                assert abs(d1 / (2 * h) - J[1, col]) <= 1e-5


def test_distance_examples():
    assert abs(distance(Space.TORUS2, torus(0.1, 0.0), torus(0.9, 0.0)) - 0.2) < 1e-15
    assert distance(Space.TORUS2, torus(0.3, 0.7), torus(0.3, 0.7)) == 0.0
    d = distance(Space.TORUS2, torus(0.0, 0.0), torus(0.5, 0.5))
    assert abs(d - math.sqrt(0.5)) < 1e-15


def test_distance_symmetry_and_triangle():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        a, b, c = (torus(*rng.random(2)) for _ in range(3))
        assert distance(Space.TORUS2, a, b) == distance(Space.TORUS2, b, a)
        assert distance(Space.TORUS2, a, c) <= (
            distance(Space.TORUS2, a, b) + distance(Space.TORUS2, b, c) + 1e-12
        )


@given(st.floats(-5, 5, allow_nan=False))
@settings(max_examples=200, deadline=None)
def test_wrap_half_range(d):
    w = wrap_half(d)
    assert -0.5 < w <= 0.5
    # same point on the circle
    assert abs((d - w) - round(d - w)) < 1e-9


def test_wrap_half_boundary():
    assert wrap_half(0.5) == 0.5
    assert wrap_half(-0.5) == 0.5
    assert wrap_half(0.75) == -0.25


def test_orbit_fixed_point(cat):
    pts = orbit(cat, torus(0.0, 0.0), m=3, n=3)
    assert len(pts) == 7
    assert all((p.x, p.y) == (0.0, 0.0) for p in pts)


def test_orbit_trivial_window(cat):
    p = torus(0.123, 0.456)
    assert orbit(cat, p, 0, 0) == [p]


def test_orbit_forward_example(cat):
    pts = orbit(cat, torus(0.5, 0.5), m=0, n=2)
    coords = [(p.x, p.y) for p in pts]
    assert coords == [(0.5, 0.5), (0.5, 0.0), (0.0, 0.5)]


def test_orbit_indexing_consistency(perturbed):
    x = torus(0.21, 0.68)
    pts = orbit(perturbed, x, m=4, n=4)
    # element i is f^(i-4)(x); stepping any element forward gives the next
    for i in range(8):
        nxt = apply(perturbed, pts[i])
        assert distance(Space.TORUS2, nxt, pts[i + 1]) <= 1e-9


def test_system_json_round_trip(all_systems):
    for system in all_systems:
        again = SystemSpec.from_json(system.to_json())
        assert again == system


def test_unknown_kind_rejected():
    with pytest.raises(ConfigError) as exc:
        SystemSpec.from_json({"kind": "catmap3", "params": {}})
    assert exc.value.field == "system.kind"


def test_henon_requires_nonzero_b():
    with pytest.raises(ConfigError):
        SystemSpec.henon(1.4, 0.0)


def test_henon_escape_raises(henon):
    p = Point2(1e30, 0.0, Space.PLANE)
    with pytest.raises(NonFiniteError):
        apply(henon, p)


def test_torus_canonicalization():
    p = Point2(-0.25, 1.75, Space.TORUS2)
    assert (p.x, p.y) == (0.75, 0.75)


def test_orbit_segment_from_base(cat):
    from nuspec.dynamics import OrbitSegment

    seg = OrbitSegment.from_base(cat, torus(0.21, 0.68), 8)
    assert seg.length == 8 and len(seg.points) == 9
    # stored points satisfy the reapplication tolerance by construction
    again = OrbitSegment.from_points(cat, seg.points)
    assert again.length == 8


def test_orbit_segment_rejects_non_orbit(cat):
    from nuspec.dynamics import OrbitSegment

    seg = OrbitSegment.from_base(cat, torus(0.21, 0.68), 5)
    broken = list(seg.points)
    broken[3] = torus(broken[3].x + 1e-6, broken[3].y)
    with pytest.raises(ValueError):
        OrbitSegment.from_points(cat, broken)
