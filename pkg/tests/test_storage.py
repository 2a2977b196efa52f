"""Run-directory artifacts."""

import json

import numpy as np
import pytest

from nilspectra.exceptions import ArtifactError
from nilspectra.models import CheckResult, CheckStatus, CorrelationMetadata, CorrelationSeries, EngineKind
from nilspectra.services.resonance import pencil_fit
from nilspectra.services.storage_service import ArtifactStore
from nilspectra.services.transfer import observable_spec


@pytest.fixture
def series(golden, atom):
    metadata = CorrelationMetadata(
        automorphism=golden.spec(), K=1, N=1, g=observable_spec(atom), h=observable_spec(atom),
        grid=256, n_trunc=8, engine=EngineKind.PACKETS,
    )
    values = np.array([1.0, 0.1 + 1.0 / 3.0j, -2.0 ** -60, np.pi * 1e-17, 0.0])
    return CorrelationSeries.from_values(values, metadata)


def test_hex_columns_restore_every_bit(tmp_path, series):
    store = ArtifactStore(tmp_path)
    store.write_correlations(series)
    restored = store.read_correlations()
    assert restored == series
    lines = (tmp_path / "correlations.csv").read_bytes().split(b"\n")
    assert lines[0] == b"n,re,im,re_hex,im_hex"
    assert b"\r" not in (tmp_path / "correlations.csv").read_bytes()


def test_sidecar_is_sorted_json(tmp_path, series):
    ArtifactStore(tmp_path).write_correlations(series, stem="correlations_alt")
    text = (tmp_path / "correlations_alt.meta.json").read_text()
    payload = json.loads(text)
    assert list(payload) == sorted(payload)
    assert payload["engine"] == "packets"


def test_bad_row_reports_line(tmp_path, series):
    store = ArtifactStore(tmp_path)
    store.write_correlations(series)
    path = tmp_path / "correlations.csv"
    lines = path.read_text().splitlines()
    lines[3] = "2,0,0,not-hex,0x0p+0"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ArtifactError, match=r"correlations\.csv:4:"):
        store.read_correlations()


def test_out_of_sequence_index(tmp_path, series):
    store = ArtifactStore(tmp_path)
    store.write_correlations(series)
    path = tmp_path / "correlations.csv"
    lines = path.read_text().splitlines()
    del lines[2]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ArtifactError, match="out of sequence"):
        store.read_correlations()


def test_resonances_round_trip(tmp_path):
    report = pencil_fit(0.5 ** np.arange(12))
    store = ArtifactStore(tmp_path)
    store.write_resonances(report)
    assert store.read_resonances() == report


def test_report_lists_failures(tmp_path):
    checks = [
        CheckResult(name="ok", status=CheckStatus.PASS, margin=0.5, detail="fine"),
        CheckResult(name="bad", status=CheckStatus.FAIL, detail="broken"),
    ]
    ArtifactStore(tmp_path).write_report("Run", checks)
    text = (tmp_path / "report.md").read_text()
    assert "**Status:** fail" in text
    assert "- bad: broken" in text
    assert "| ok | pass | 5.000000e-01 | fine |" in text
