"""Automorphism validation, cocycles and the adapted frame."""

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nilspectra.exceptions import DeterminantError, NotHyperbolicError, OrientationError
from nilspectra.services.automorphism import (
    build,
    check_lattice_compatibility,
    check_pushforward,
    check_renormalization,
)
from nilspectra.services.heisenberg import GroupElement, LatticeElement, lattice_act, project_to_torus, reduce

rationals = st.fractions(min_value=-5, max_value=5, max_denominator=12)


def _coords(v):
    return (float(v.vx), float(v.vy), float(v.vz))


@pytest.fixture
def shifted():
    """Golden matrix with nonzero linear cocycle terms."""
    return build(2, 1, 1, 1, 1, -1, K=1)


def test_golden_eigenvalue(golden, golden_lam):
    assert golden.lam == pytest.approx(golden_lam, rel=1e-15)
    assert golden.trace == 3
    assert golden.minimal_polynomial == (1, -3, 1)


@pytest.mark.parametrize(
    "data, error",
    [
        ((2, 1, 1, 2, 0, 0), DeterminantError),
        ((1, 1, 0, 1, 0, 0), NotHyperbolicError),
        ((-2, 1, 1, -1, 0, 0), OrientationError),
    ],
)
def test_build_rejects_bad_data(data, error):
    with pytest.raises(error):
        build(*data)


def test_build_rejects_non_integers():
    with pytest.raises(TypeError):
        build(2.0, 1, 1, 1, 0, 0)
    with pytest.raises(ValueError):
        build(2, 1, 1, 1, 0, 0, K=0)


@settings(max_examples=60, deadline=None)
@given(rationals, rationals, rationals, st.integers(min_value=0, max_value=8))
def test_cocycle_matches_repeated_application(x, y, z, n):
    auto = build(2, 1, 1, 1, 1, -1, K=1)
    m = GroupElement(x, y, z)
    expected = m
    for _ in range(n):
        expected = auto.apply(expected)
    assert auto.iterate_cocycle(n).apply(m) == expected


def test_inverse_round_trip(shifted):
    inv = shifted.inverse()
    m = GroupElement.exact("2/3", "-1/7", "5/4")
    assert inv.apply(shifted.apply(m)) == m
    assert shifted.apply(inv.apply(m)) == m
    assert inv.inverse() == shifted


def test_negative_iterate_rejected(golden):
    with pytest.raises(ValueError):
        golden.iterate_cocycle(-1)


@pytest.mark.parametrize("data", [(2, 1, 1, 1, 0, 0), (2, 1, 1, 1, 1, -1), (3, 2, 1, 1, 0, 2), (1, 1, 1, 2, 2, 1)])
def test_frame_is_adapted(data):
    auto = build(*data)
    frame = auto.frame
    assert max(frame.eigen_residuals(auto.matrix)) <= 1e-12
    assert frame.V.bracket(frame.W).vz == pytest.approx(1.0, abs=1e-12)
    assert _coords(auto.apply_lie(frame.W)) == pytest.approx(_coords(frame.W.scale(frame.lam)), abs=1e-12)
    assert _coords(auto.apply_lie(frame.V)) == pytest.approx(_coords(frame.V.scale(1 / frame.lam)), abs=1e-12)


def test_renormalization_along_w(shifted, rng):
    frame = shifted.frame
    for _ in range(20):
        x, y, z = rng.random(3)
        t = float(rng.uniform(-1.0, 1.0))
        assert check_renormalization(shifted, frame, GroupElement(x, y, z), t) <= 1e-10


def test_pushforward_tangent_residual_is_first_order(shifted):
    frame = shifted.frame
    m = GroupElement(0.3, 0.7, 0.2)
    residuals = [check_pushforward(shifted, frame, m, h) for h in (1e-4, 1e-5, 1e-6)]
    for name in ("tangent_v", "tangent_w"):
        values = [getattr(r, name) for r in residuals]
        assert values[0] > values[1] > values[2]
        assert 5.0 < values[0] / values[1] < 20.0
    assert max(r.flow_w for r in residuals) <= 1e-8


def test_pushforward_rejects_large_step(golden):
    with pytest.raises(ValueError):
        check_pushforward(golden, golden.frame, GroupElement(0.1, 0.2, 0.3), 1e-2)


def test_lattice_compatibility(golden, golden_k2, shifted):
    assert check_lattice_compatibility(golden)
    assert check_lattice_compatibility(golden_k2)
    assert check_lattice_compatibility(shifted)


def test_lie_power_matches_repeated_differential(shifted):
    v = shifted.frame.W
    pushed = v
    for _ in range(3):
        pushed = shifted.apply_lie(pushed)
    direct = shifted.push_vector(v, 3)
    assert direct.vx == pytest.approx(pushed.vx, rel=1e-12)
    assert direct.vz == pytest.approx(pushed.vz, rel=1e-12)
    assert shifted.lie_power(0)[2][2] == Fraction(1)


def test_golden_literal_values(golden):
    assert golden.apply(GroupElement.exact("1/2", "1/2", 0)) == GroupElement.exact("3/2", 1, "11/8")
    frame = golden.frame
    assert frame.alpha == pytest.approx(0.8506508, abs=1e-7)
    assert frame.beta == pytest.approx(0.5257311, abs=1e-7)
    assert frame.gamma == pytest.approx(0.6881910, abs=1e-7)


def test_linear_shift_enters_tau(golden):
    tau = build(2, 1, 1, 1, 1, 0).tau
    assert tau.coefficients() == (Fraction(1), Fraction(1), Fraction(1, 2), Fraction(2), Fraction(1, 2))
    x, y = Fraction(3, 7), Fraction(-2, 5)
    assert tau(x, y) - golden.tau(x, y) == x
    assert tau(x, 0) == x * x + 2 * x


@pytest.mark.parametrize("data, K", [((2, 1, 1, 1, 0, 0), 1), ((2, 1, 1, 1, 1, -1), 1), ((2, 1, 1, 1, 0, 0), 2),
                                     ((3, 2, 1, 1, 0, 2), 3)])
@settings(max_examples=80, deadline=None)
@given(x=rationals, y=rationals, z=rationals, p=st.integers(-4, 4), q=st.integers(-4, 4), r=st.integers(-6, 6))
def test_phi_descends_to_quotient(data, K, x, y, z, p, q, r):
    auto = build(*data, K=K)
    m = GroupElement(x, y, z)
    moved = lattice_act(LatticeElement(p, q, r), m, K)
    assert reduce(auto.apply(moved), K).point == reduce(auto.apply(m), K).point


@settings(max_examples=100, deadline=None)
@given(rationals, rationals, rationals)
def test_phi_covers_the_toral_map(x, y, z):
    auto = build(3, 2, 1, 1, 0, 2)
    m = GroupElement(x, y, z)
    px, py = project_to_torus(m)
    assert project_to_torus(auto.apply(m)) == ((3 * px + 2 * py) % 1, (px + py) % 1)


@settings(max_examples=200, deadline=None)
@given(*(st.fractions(min_value=-1000, max_value=1000, max_denominator=64) for _ in range(3)))
def test_float_phi_matches_rational_phi(x, y, z):
    shifted = build(2, 1, 1, 1, 1, -1)
    m = GroupElement(x, y, z)
    exact = shifted.apply(m)
    approx = shifted.apply(m.to_float())
    scale = max(1.0, abs(float(x)), abs(float(y)), abs(float(z))) ** 2
    for e, f in zip(exact.as_tuple(), approx.as_tuple()):
        assert abs(float(e) - f) <= 1e-12 * scale
