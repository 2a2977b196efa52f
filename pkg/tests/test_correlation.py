"""Correlation series from the three engines."""

import numpy as np
import pytest

from nilspectra.exceptions import PrecisionWarning, SectorMismatch
from nilspectra.models import EngineKind
from nilspectra.services.automorphism import build
from nilspectra.services.sector import theta_atom, torus_mode
from nilspectra.services.transfer import correlate


def test_normalized_atom_has_unit_c0(golden, atom):
    for engine in (EngineKind.PACKETS, EngineKind.TRAPEZOID):
        series = correlate(golden, atom, atom, n_max=2, M=256, engine=engine)
        assert series.values()[0] == pytest.approx(1.0, abs=1e-10)


def test_packets_agree_with_trapezoid(golden, mixed_atom, atom):
    packets = correlate(golden, atom, mixed_atom, n_max=3, engine=EngineKind.PACKETS).values()
    trapezoid = correlate(golden, atom, mixed_atom, n_max=3, M=512, engine=EngineKind.TRAPEZOID).values()
    np.testing.assert_allclose(packets, trapezoid, atol=1e-8)


def test_packets_agree_with_trapezoid_for_k2(golden_k2):
    g = theta_atom(1, 2, 0, 0) + theta_atom(1, 2, 0, 1).scale(0.5j)
    h = theta_atom(1, 2, 1, 1)
    packets = correlate(golden_k2, g, h, n_max=2, engine=EngineKind.PACKETS).values()
    trapezoid = correlate(golden_k2, g, h, n_max=2, M=256, engine=EngineKind.TRAPEZOID).values()
    np.testing.assert_allclose(packets, trapezoid, atol=1e-8)


def test_trapezoid_grid_refinement(golden, mixed_atom):
    coarse = correlate(golden, mixed_atom, mixed_atom, n_max=2, M=128, engine=EngineKind.TRAPEZOID).values()
    fine = correlate(golden, mixed_atom, mixed_atom, n_max=2, M=256, engine=EngineKind.TRAPEZOID).values()
    np.testing.assert_allclose(coarse, fine, atol=1e-9)


def test_trapezoid_warns_on_aliasing(golden, atom):
    with pytest.warns(PrecisionWarning):
        correlate(golden, atom, atom, n_max=6, M=64, engine=EngineKind.TRAPEZOID)


def test_modes_engine_for_torus(golden):
    g = torus_mode(1, 0, K=1)
    series = correlate(golden, g, g, n_max=6)
    assert series.metadata.engine == EngineKind.MODES
    np.testing.assert_array_equal(series.values(), np.array([1, 0, 0, 0, 0, 0, 0], dtype=complex))


def test_modes_engine_with_constant(golden):
    f = torus_mode(0, 0) + torus_mode(1, 1)
    values = correlate(golden, f, f, n_max=5).values()
    np.testing.assert_array_equal(values[1:], np.ones(5, dtype=complex))
    assert values[0] == 2


def test_modes_agree_with_trapezoid(golden):
    g = torus_mode(1, 0) + torus_mode(2, 1).scale(0.5)
    h = torus_mode(3, 2) + torus_mode(1, 0).scale(-1j)
    modes = correlate(golden, g, h, n_max=3, engine=EngineKind.MODES).values()
    trapezoid = correlate(golden, g, h, n_max=3, M=256, engine=EngineKind.TRAPEZOID).values()
    np.testing.assert_allclose(modes, trapezoid, atol=1e-12)


def test_metadata_records_inputs(golden, atom):
    series = correlate(golden, atom, atom, n_max=5)
    assert series.metadata.N == 1
    assert series.metadata.K == 1
    assert series.metadata.engine == EngineKind.PACKETS
    assert series.metadata.automorphism.a == 2
    assert [e.n for e in series.entries] == list(range(6))


def test_rejects_bad_arguments(golden, atom):
    with pytest.raises(ValueError):
        correlate(golden, atom, atom, M=32)
    with pytest.raises(ValueError):
        correlate(golden, atom, atom, n_max=-1)
    with pytest.raises(SectorMismatch):
        correlate(golden, atom, theta_atom(2, 1, 0, 0))
    with pytest.raises(SectorMismatch):
        correlate(build(2, 1, 1, 1, 0, 0, K=2), atom, atom)
