"""Artifact store for a run directory.

Every artifact is a pure function of the experiment: no timestamps, sorted
JSON keys and a fixed float format, so reruns reproduce identical bytes.
"""

import csv
import io
import json
from pathlib import Path
from typing import List, Optional, Sequence

from pydantic import ValidationError

from nilspectra.exceptions import ArtifactError
from nilspectra.models import (
    BandVerdict,
    CheckResult,
    CheckStatus,
    CorrelationEntry,
    CorrelationMetadata,
    CorrelationSeries,
    DecayEstimate,
    NormsReport,
    ResonanceReport,
)
from nilspectra.utils.logger import get_logger

logger = get_logger()

CSV_HEADER = ["n", "re", "im", "re_hex", "im_hex"]


def _dump_json(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _fmt(value: Optional[float]) -> str:
    if value is None:
        return "-"
    return f"{value:.6e}"


class ArtifactStore:
    """Reads and writes the files of one run directory."""

    CORRELATIONS = "correlations.csv"
    ALT_CORRELATIONS = "correlations_alt.csv"
    RESONANCES = "resonances.json"
    REPORT = "report.md"
    NORMS = "norms.json"
    NORMS_REPORT = "norms.md"

    def __init__(self, directory: Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        logger.debug(f"Artifact directory {self.directory}")

    def path(self, name: str) -> Path:
        return self.directory / name

    def _write(self, name: str, text: str) -> str:
        target = self.path(name)
        # newline="" keeps LF on every platform
        with open(target, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        logger.info(f"Wrote {target}")
        return str(target)

    # ------------------------------------------------------------ correlations

    def write_correlations(self, series: CorrelationSeries, stem: str = "correlations") -> List[str]:
        """correlations.csv with decimal and hexadecimal floats, plus the metadata sidecar."""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for entry in series.entries:
            writer.writerow([entry.n, repr(entry.re), repr(entry.im), entry.re.hex(), entry.im.hex()])
        csv_path = self._write(f"{stem}.csv", buffer.getvalue())
        meta_path = self._write(f"{stem}.meta.json", _dump_json(series.metadata.model_dump(mode="json")))
        return [csv_path, meta_path]

    def read_correlations(self, csv_path: Optional[Path] = None) -> CorrelationSeries:
        """Read a series back bit-exactly from the hex columns and its sidecar."""
        csv_path = Path(csv_path) if csv_path else self.path(self.CORRELATIONS)
        meta_path = csv_path.with_name(csv_path.name.replace(".csv", ".meta.json"))
        try:
            text = csv_path.read_text(encoding="utf-8")
        except OSError as e:
            raise ArtifactError(f"{csv_path}: cannot read ({e})") from e
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != CSV_HEADER:
            raise ArtifactError(f"{csv_path}:1: expected header {','.join(CSV_HEADER)}")
        entries = []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise ArtifactError(f"{csv_path}:{lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}")
            try:
                n = int(row[0])
                entries.append(CorrelationEntry(n=n, re=float.fromhex(row[3]), im=float.fromhex(row[4])))
            except ValueError as e:
                raise ArtifactError(f"{csv_path}:{lineno}: {e}") from e
            if n != len(entries) - 1:
                raise ArtifactError(f"{csv_path}:{lineno}: index {n} out of sequence")
        try:
            metadata = CorrelationMetadata.model_validate_json(meta_path.read_text(encoding="utf-8"))
        except OSError as e:
            raise ArtifactError(f"{meta_path}: cannot read ({e})") from e
        except ValidationError as e:
            raise ArtifactError(f"{meta_path}: invalid metadata ({e.error_count()} errors)") from e
        return CorrelationSeries(entries=entries, metadata=metadata)

    # ------------------------------------------------------------ resonances

    def write_resonances(self, report: ResonanceReport, decay: Sequence[DecayEstimate] = ()) -> str:
        payload = report.model_dump(mode="json")
        payload["decay"] = [d.model_dump(mode="json") for d in decay]
        return self._write(self.RESONANCES, _dump_json(payload))

    def read_resonances(self) -> ResonanceReport:
        try:
            payload = json.loads(self.path(self.RESONANCES).read_text(encoding="utf-8"))
            payload.pop("decay", None)
            return ResonanceReport.model_validate(payload)
        except (OSError, ValueError) as e:
            raise ArtifactError(f"{self.path(self.RESONANCES)}: {e}") from e

    def write_report(
        self,
        title: str,
        checks: Sequence[CheckResult],
        report: Optional[ResonanceReport] = None,
        verdict: Optional[BandVerdict] = None,
        error: Optional[str] = None,
    ) -> str:
        """report.md listing every check with its status and margin."""
        lines = [f"# {title}", ""]
        failed = [c for c in checks if c.status == CheckStatus.FAIL]
        if error:
            lines += ["**Status:** error", "", f"    {error}", ""]
        else:
            lines += [f"**Status:** {'pass' if not failed else 'fail'}", ""]
        if verdict is not None:
            lines += [f"Regime: {verdict.regime}", ""]
        lines += ["## Checks", "", "| check | status | margin | detail |", "|---|---|---|---|"]
        for c in checks:
            lines.append(f"| {c.name} | {c.status.value} | {_fmt(c.margin)} | {c.detail} |")
        lines.append("")
        if report is not None:
            lines += ["## Resonances", "", "| re | im | modulus | band | mu | amplitude |", "|---|---|---|---|---|---|"]
            for r in report.resonances:
                mu = "-" if r.mu is None else f"{r.mu.real:.8f}{r.mu.imag:+.8f}i"
                band = "-" if r.band is None else str(r.band)
                lines.append(
                    f"| {r.re:.10f} | {r.im:.10f} | {r.modulus:.10f} | {band} | {mu} | "
                    f"{r.amp_re:.3e}{r.amp_im:+.3e}i |"
                )
            lines += ["", f"Rank {report.rank} at rank_tol {report.rank_tol:g}, fit start {report.start}.", ""]
        if failed:
            lines += ["## Failures", ""]
            lines += [f"- {c.name}: {c.detail}" for c in failed]
            lines.append("")
        return self._write(self.REPORT, "\n".join(lines))

    # ------------------------------------------------------------ norms

    def write_norms(self, report: NormsReport) -> List[str]:
        json_path = self._write(self.NORMS, _dump_json(report.model_dump(mode="json")))
        lines = ["# Norms laboratory", "", "## Mollifier margins", "",
                 "| q | eps | approximation | C^q | C^(q+1) |", "|---|---|---|---|---|"]
        for row in report.mollifier:
            lines.append(
                f"| {row.q} | {row.epsilon:g} | {_fmt(row.approximation_margin)} | "
                f"{_fmt(row.cq_margin)} | {_fmt(row.cq1_margin)} |"
            )
        inequalities = report.inequalities
        lines += ["", f"## Inequalities (p={inequalities.p}, q={inequalities.q})", "",
                  "| id | lhs | rhs | ratio | verdict | semantics |", "|---|---|---|---|---|---|"]
        for e in inequalities.entries:
            lines.append(
                f"| {e.name} | {_fmt(e.lhs)} | {_fmt(e.rhs)} | {_fmt(e.ratio)} | {e.verdict.value} | "
                f"{e.semantics.value} |"
            )
        if report.slide:
            lines += ["", "## Slide defect", "", "| eps | defect |", "|---|---|"]
            lines += [f"| {row.epsilon:g} | {_fmt(row.defect)} |" for row in report.slide]
        if report.windows:
            lines += ["", "## Window splitting", "", "| length | direct | split error | sum of pieces |",
                      "|---|---|---|---|"]
            lines += [
                f"| {row.length:g} | {_fmt(row.direct)} | {_fmt(row.split_error)} | {_fmt(row.abs_sum)} |"
                for row in report.windows
            ]
        if report.invariant:
            lines += ["", "## V-invariant theta sums", "", "| component | R | per j |", "|---|---|---|"]
            lines += [
                f"| {row.component} | {row.radius:g} | " + ", ".join(_fmt(v) for v in row.per_j) + " |"
                for row in report.invariant
            ]
        lines += ["", "All norm values are dictionary lower bounds.", ""]
        md_path = self._write(self.NORMS_REPORT, "\n".join(lines))
        return [json_path, md_path]
