"""The transfer operator and its intertwining with the frame fields."""

import numpy as np
import pytest

from nilspectra.exceptions import SectorMismatch
from nilspectra.models import EngineKind
from nilspectra.services.heisenberg import GroupElement
from nilspectra.services.sector import theta_atom
from nilspectra.services.transfer import (
    TransferEvaluator,
    check_intertwining,
    flow_derivative,
    random_points,
    resolve_engine,
    transfer_apply,
)


@pytest.mark.parametrize("j", [0, 1, 2])
@pytest.mark.parametrize("k", [0, 1, 2, 4])
def test_intertwining(golden, mixed_atom, rng, j, k):
    residual = check_intertwining(golden, mixed_atom, j, k, random_points(rng, 20))
    assert residual.worst <= 1e-8


def test_intertwining_rejects_large_orders(golden, atom, rng):
    with pytest.raises(ValueError):
        check_intertwining(golden, atom, 3, 1, random_points(rng, 2))


def test_transfer_matches_direct_composition(golden, mixed_atom, rng):
    ev = transfer_apply(golden, mixed_atom, 3)
    for p in random_points(rng, 10):
        image = p
        for _ in range(3):
            image = golden.apply(image)
        assert ev(p) == pytest.approx(mixed_atom.evaluate(image), abs=1e-10)


def test_batch_evaluation_matches_pointwise(golden, mixed_atom, rng):
    ev = transfer_apply(golden, mixed_atom, 2)
    x, y, z = rng.random((3, 8))
    batch = ev.evaluate_many(x, y, z)
    single = [ev(GroupElement(float(a), float(b), float(c))) for a, b, c in zip(x, y, z)]
    np.testing.assert_allclose(batch, single, atol=1e-12)


def test_pushed_derivative_matches_flow_difference(golden, atom):
    ev = transfer_apply(golden, atom, 2)
    m = GroupElement(0.35, 0.55, 0.25)
    v = golden.frame.V
    exact = ev.derivative(v)(m)
    assert flow_derivative(ev, v, m) == pytest.approx(exact, abs=1e-5 * max(1.0, abs(exact)))


def test_transfer_rejects_mismatched_lattice(golden):
    with pytest.raises(SectorMismatch):
        transfer_apply(golden, theta_atom(1, 2, 0, 0), 1)


def test_negative_iterate_rejected(golden, atom):
    with pytest.raises(ValueError):
        TransferEvaluator(golden, atom, -1)


@pytest.mark.parametrize(
    "engine, N, expected",
    [
        (EngineKind.AUTO, 1, EngineKind.PACKETS),
        (EngineKind.AUTO, 0, EngineKind.MODES),
        (EngineKind.TRAPEZOID, 1, EngineKind.TRAPEZOID),
        (EngineKind.TRAPEZOID, 0, EngineKind.TRAPEZOID),
        (EngineKind.PACKETS, -2, EngineKind.PACKETS),
    ],
)
def test_resolve_engine(engine, N, expected):
    assert resolve_engine(engine, N) == expected


@pytest.mark.parametrize("engine, N", [(EngineKind.MODES, 1), (EngineKind.PACKETS, 0)])
def test_resolve_engine_rejects_wrong_sector(engine, N):
    with pytest.raises(ValueError):
        resolve_engine(engine, N)
