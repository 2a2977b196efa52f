"""End-to-end runs through the workflow and the command-line entry point."""

import json
from pathlib import Path

import pytest

from nilspectra.cli import cmd_correlate, cmd_norms, cmd_resonances, cmd_selftest, cmd_verify
from nilspectra.cli.commands import run_norms
from nilspectra.main import main
from nilspectra.models import CheckStatus
from nilspectra.services.pipeline_workflow import run_pipeline
from nilspectra.services.storage_service import ArtifactStore
from nilspectra.utils.config_parser import load_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
BAND0 = (5 ** 0.5 - 1) / 2
ARTIFACTS = ("correlations.csv", "correlations.meta.json", "correlations_alt.csv", "resonances.json", "report.md")


def _status(checks, name):
    return next(c.status for c in checks if c.name == name)


@pytest.fixture(scope="module")
def golden_run(tmp_path_factory):
    config = load_config(CONFIGS / "golden.conf")
    out = tmp_path_factory.mktemp("golden")
    return config, out, run_pipeline(config, out)


def test_golden_verify_passes(golden_run):
    _, out, outcome = golden_run
    assert outcome.exit_code == 0, outcome.checks
    assert outcome.success
    for name in ARTIFACTS:
        assert (out / name).exists()


def test_golden_band_zero(golden_run):
    _, out, outcome = golden_run
    payload = json.loads((out / "resonances.json").read_text())
    band0 = [r for r in payload["resonances"] if r["band"] == 0]
    assert len(band0) == 1
    assert band0[0]["modulus"] == pytest.approx(BAND0, abs=1e-4)
    assert abs(complex(band0[0]["mu_re"], band0[0]["mu_im"])) == pytest.approx(1.0, abs=1e-4)
    assert _status(outcome.checks, "pair_agreement") == CheckStatus.PASS
    assert payload["decay"][0]["bands_removed"] == 1


def test_rerun_is_byte_identical(golden_run, tmp_path):
    config, out, _ = golden_run
    assert cmd_verify(config, tmp_path) == 0
    for name in ARTIFACTS:
        assert (tmp_path / name).read_bytes() == (out / name).read_bytes(), name


def test_stagewise_run_matches_verify(golden_run, tmp_path):
    config, out, _ = golden_run
    assert cmd_correlate(config, tmp_path) == 0
    assert cmd_resonances(config, tmp_path) == 0
    for name in ARTIFACTS:
        assert (tmp_path / name).read_bytes() == (out / name).read_bytes(), name


def test_stored_series_reads_back_exactly(golden_run):
    _, out, _ = golden_run
    series = ArtifactStore(out).read_correlations()
    assert series.metadata.N == 1
    assert len(series.entries) == 13
    assert series.entries[0].re == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("name", ["toral.conf", "toral_mean_zero.conf"])
def test_toral_configs_pass(name, tmp_path):
    outcome = run_pipeline(load_config(CONFIGS / name), tmp_path)
    assert outcome.exit_code == 0, outcome.checks
    assert _status(outcome.checks, "toral_spectrum") == CheckStatus.PASS


def test_mean_zero_torus_decorrelates(tmp_path):
    outcome = run_pipeline(load_config(CONFIGS / "toral_mean_zero.conf"), tmp_path)
    assert _status(outcome.checks, "toral_decay") == CheckStatus.PASS


@pytest.mark.parametrize("name", ["n2.conf", "k2.conf"])
def test_two_component_sector_resolves_both_band_zero_resonances(name, tmp_path):
    outcome = run_pipeline(load_config(CONFIGS / name), tmp_path)
    assert outcome.exit_code == 0, [(c.name, c.detail) for c in outcome.checks if c.status == CheckStatus.FAIL]
    for check in ("band0_count", "band0_modulus", "unit_mu", "pair_agreement"):
        assert _status(outcome.checks, check) == CheckStatus.PASS, check
    payload = json.loads((tmp_path / "resonances.json").read_text())
    band0 = [r for r in payload["resonances"] if r["band"] == 0]
    assert len(band0) == 2
    assert all(r["modulus"] == pytest.approx(BAND0, abs=1e-4) for r in band0)
    angles = sorted(abs(complex(r["re"], r["im"]).imag) / r["modulus"] for r in band0)
    assert angles == pytest.approx([3 ** 0.5 / 2] * 2, abs=1e-3)


def test_bad_determinant_is_input_error(tmp_path):
    outcome = run_pipeline(load_config(CONFIGS / "bad_determinant.conf"), tmp_path)
    assert outcome.exit_code == 2
    assert "DeterminantError" in outcome.error
    assert "**Status:** error" in (tmp_path / "report.md").read_text()


def test_resonances_without_series(tmp_path):
    assert cmd_resonances(None, tmp_path) == 2


def test_resonances_rejects_corrupt_series(tmp_path):
    (tmp_path / "correlations.csv").write_text("n,re,im\n0,1,0\n")
    assert cmd_resonances(None, tmp_path) == 2


def test_main_dispatch(tmp_path):
    golden = str(CONFIGS / "golden.conf")
    assert main(["verify", "--config", golden, "--out", str(tmp_path / "a")]) == 0
    assert main(["verify", "--config", str(tmp_path / "missing.conf")]) == 2
    assert main(["verify", "--config", golden, "--grid", "100", "--out", str(tmp_path / "b")]) == 2
    assert main(["resonances", "--out", str(tmp_path / "a"), "--series",
                 str(tmp_path / "a" / "correlations.csv")]) == 0


def test_main_reports_bad_determinant(tmp_path):
    assert main(["verify", "--config", str(CONFIGS / "bad_determinant.conf"), "--out", str(tmp_path)]) == 2


def test_selftest(tmp_path):
    assert cmd_selftest(tmp_path, seed=7) == 0


def test_norms_laboratory_on_small_dictionary(tmp_path):
    config = load_config(CONFIGS / "golden.conf")
    small = config.norms.model_copy(update={
        "base_points": 2, "modulations": 2, "k_max": 1, "q_max": 1, "epsilons": [0.1], "quad_order": 64,
    })
    config = config.model_copy(update={"norms": small})
    report = run_norms(config)
    for name in ("mollifier_bounds", "v_continuity", "window_split", "change_of_variables/k=1",
                 "change_of_variables/k=2"):
        assert _status(report.checks, name) == CheckStatus.PASS, name
    assert _status(report.checks, "window_growth") == CheckStatus.INFO
    assert _status(report.checks, "invariant_distributions") == CheckStatus.INFO
    assert {row.radius for row in report.invariant} == {1.0, 2.0, 4.0}
    assert cmd_norms(config, tmp_path) in (0, 1)
    assert (tmp_path / "norms.json").exists()
    text = (tmp_path / "norms.md").read_text()
    assert "dictionary lower bounds" in text
    assert "## V-invariant theta sums" in text
