"""Group laws, reduction and flows on the polarized Heisenberg group."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nilspectra.services.heisenberg import (
    IDENTITY,
    GroupElement,
    LatticeElement,
    LieVector,
    X,
    Y,
    Z,
    commutator,
    exp,
    flow,
    inverse,
    lattice_act,
    mul,
    project_to_torus,
    reduce,
)

rationals = st.fractions(min_value=-20, max_value=20, max_denominator=16)


@st.composite
def elements(draw):
    return GroupElement(draw(rationals), draw(rationals), draw(rationals))


@st.composite
def lattice_elements(draw):
    ints = st.integers(min_value=-6, max_value=6)
    return LatticeElement(draw(ints), draw(ints), draw(ints))


def _matrix(g: GroupElement) -> np.ndarray:
    return np.array([[1, g.x, g.z], [0, 1, g.y], [0, 0, 1]], dtype=object)


@settings(max_examples=300)
@given(elements(), elements(), elements())
def test_associativity(a, b, c):
    assert mul(mul(a, b), c) == mul(a, mul(b, c))


@settings(max_examples=300)
@given(elements())
def test_inverse_and_identity(a):
    assert mul(a, inverse(a)) == IDENTITY
    assert mul(inverse(a), a) == IDENTITY
    assert mul(a, IDENTITY) == a


@settings(max_examples=200)
@given(elements(), elements())
def test_product_matches_unipotent_matrices(a, b):
    product = _matrix(a).dot(_matrix(b))
    expected = mul(a, b)
    assert (product[0, 1], product[1, 2], product[0, 2]) == (expected.x, expected.y, expected.z)


@settings(max_examples=300)
@given(elements(), st.integers(min_value=1, max_value=4))
def test_reduction_idempotent_and_in_domain(a, K):
    reduced = reduce(a, K)
    p = reduced.point
    assert 0 <= p.x < 1 and 0 <= p.y < 1 and 0 <= p.z < Fraction(1, K)
    assert reduce(p, K).point == p
    # the lattice element used moves a onto its representative
    assert lattice_act(reduced.lattice, a, K) == p


@settings(max_examples=200)
@given(elements(), lattice_elements(), st.integers(min_value=1, max_value=4))
def test_reduction_is_lattice_invariant(a, gamma, K):
    assert reduce(lattice_act(gamma, a, K), K).point == reduce(a, K).point


@settings(max_examples=200)
@given(lattice_elements(), lattice_elements(), st.integers(min_value=1, max_value=4))
def test_lattice_closure(g, h, K):
    assert mul(g.to_group(K), h.to_group(K)) == g.mul(h, K).to_group(K)
    assert g.mul(g.inverse(K), K).is_identity


def test_commutator_is_central():
    g = GroupElement.exact(1, 0, 0)
    h = GroupElement.exact(0, 1, 0)
    assert commutator(g, h) == GroupElement(0, 0, 1)


@settings(max_examples=100)
@given(rationals, rationals, rationals, rationals)
def test_exp_matches_matrix_exponential(vx, vy, vz, t):
    # the nilpotent matrix N satisfies N^3 = 0, so exp(tN) = I + tN + t^2 N^2 / 2
    v = LieVector(vx, vy, vz).scale(t)
    N = np.array([[0, v.vx, v.vz], [0, 0, v.vy], [0, 0, 0]], dtype=object)
    identity = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=object)
    E = identity + N + N.dot(N) * Fraction(1, 2)
    g = exp(v)
    assert (E[0, 1], E[1, 2], E[0, 2]) == (g.x, g.y, g.z)


def test_flow_is_one_parameter_group():
    m = GroupElement.exact("1/3", "-2/5", "7/11")
    v = LieVector(Fraction(2), Fraction(-1, 3), Fraction(5, 7))
    s, t = Fraction(3, 4), Fraction(-5, 6)
    assert flow(flow(m, v, s), v, t) == flow(m, v, s + t)


def test_bracket_of_basis():
    assert X.bracket(Y) == LieVector(0, 0, 1)
    assert Y.bracket(X) == LieVector(0, 0, -1)
    assert X.bracket(Z).vz == 0


def test_json_roundtrip_keeps_rationals():
    g = GroupElement.exact("3/7", "-1/2", "5")
    assert GroupElement.from_json(g.to_json()) == g


def test_seeded_bulk_group_laws():
    rng = np.random.default_rng(1)

    def rational():
        return Fraction(int(rng.integers(-40, 41)), int(rng.integers(1, 10)))

    for _ in range(10_000):
        a = GroupElement(rational(), rational(), rational())
        b = GroupElement(rational(), rational(), rational())
        assert mul(a, inverse(a)) == IDENTITY
        assert reduce(reduce(mul(a, b), 3).point, 3).point == reduce(mul(a, b), 3).point


def test_float_batch_flow_matches_scalar():
    xs = np.array([0.1, 0.5, 0.9])
    base = GroupElement(xs, 0.3 * np.ones(3), np.zeros(3))
    v = LieVector(0.5, -0.25, 0.75)
    batch = flow(base, v, np.array([0.2, -0.4, 1.0]))
    for i, t in enumerate([0.2, -0.4, 1.0]):
        single = flow(GroupElement(float(xs[i]), 0.3, 0.0), v, t)
        assert batch.x[i] == pytest.approx(single.x, abs=1e-15)
        assert batch.z[i] == pytest.approx(single.z, abs=1e-15)


def test_reduce_rejects_bad_K():
    with pytest.raises(ValueError):
        reduce(GroupElement(0, 0, 0), 0)


def _close(exact, approx, scale, rel=1e-12):
    """Agreement relative to the largest term that entered the computation."""
    return abs(float(exact) - approx) <= rel * scale


big = st.fractions(min_value=-1000, max_value=1000, max_denominator=64)


@settings(max_examples=300)
@given(big, big, big, big, big, big)
def test_float_mode_matches_rational_mode(x, y, z, u, v, w):
    a, b = GroupElement(x, y, z), GroupElement(u, v, w)
    scale = max(1.0, *(abs(float(c)) for c in (x, y, z, u, v, w))) ** 2
    exact = mul(a, b)
    approx = mul(a.to_float(), b.to_float())
    assert all(_close(e, f, scale) for e, f in zip(exact.as_tuple(), approx.as_tuple()))
    exact_inv, approx_inv = inverse(a), inverse(a.to_float())
    assert all(_close(e, f, scale) for e, f in zip(exact_inv.as_tuple(), approx_inv.as_tuple()))
    field = LieVector(u / 1000, v / 1000, w / 1000)
    exact_flow = flow(a, field, Fraction(3, 4))
    approx_flow = flow(a.to_float(), field.to_float(), 0.75)
    assert all(_close(e, f, scale) for e, f in zip(exact_flow.as_tuple(), approx_flow.as_tuple()))


def test_project_to_torus_forgets_z_and_wraps():
    assert project_to_torus(GroupElement.exact("7/3", "-1/4", "9")) == (Fraction(1, 3), Fraction(3, 4))
    x, y = project_to_torus(GroupElement(-0.25, 1.5, 0.0))
    assert (x, y) == (0.75, 0.5)


@settings(max_examples=200)
@given(elements(), lattice_elements(), st.integers(min_value=1, max_value=4))
def test_project_to_torus_is_lattice_invariant(a, gamma, K):
    assert project_to_torus(lattice_act(gamma, a, K)) == project_to_torus(a)
