"""Parser for line-oriented experiment files.

    [section]
    key = value        # trailing comment
    ; full-line comment

Observable lists read `(re, im, m, l); (re, im, m, l)`. Errors carry
`path:line:` prefixes.
"""

import re
from pathlib import Path
from typing import Any, Dict, Tuple

from pydantic import ValidationError

from nilspectra.exceptions import ConfigError
from nilspectra.models import ExperimentConfig

SECTION_KEYS: Dict[str, Tuple[str, ...]] = {
    "experiment": ("name", "seed"),
    "automorphism": ("a", "b", "c", "d", "ell", "m"),
    "lattice": ("K", "N"),
    "observables": ("g", "h", "g_alt", "h_alt"),
    "numerics": ("grid", "n_max", "engine", "n_trunc", "rank_tol", "fit_start", "threads"),
    "tolerances": (
        "band0", "band1", "deeper", "modulus_abs", "unit_mu", "band_ratio", "decay_rel",
        "radius_slack", "pair_agreement", "toral_floor", "toral_unit",
    ),
    "norms": ("delta", "base_points", "modulations", "p", "q", "k_max", "quad_order", "epsilons", "q_max"),
    "output": ("directory",),
}
LIST_KEYS = {"epsilons"}

_SECTION = re.compile(r"^\[\s*([A-Za-z_]+)\s*\]$")
_ENTRY = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")
_TUPLE = re.compile(r"\(([^()]*)\)")

Raw = Dict[str, Dict[str, Tuple[str, int]]]


def parse_lines(text: str, source: str = "<config>") -> Tuple[Raw, Dict[str, int]]:
    """Split a file into {section: {key: (value, line)}} and the section header lines."""
    raw: Raw = {}
    headers: Dict[str, int] = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped or stripped.startswith(";"):
            continue
        match = _SECTION.match(stripped)
        if match:
            section = match.group(1)
            if section not in SECTION_KEYS:
                raise ConfigError(f"{source}:{lineno}: unknown section [{section}]")
            if section in headers:
                raise ConfigError(f"{source}:{lineno}: section [{section}] repeated (first at line {headers[section]})")
            headers[section] = lineno
            raw[section] = {}
            continue
        match = _ENTRY.match(stripped)
        if not match:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value' or '[section]'")
        if section is None:
            raise ConfigError(f"{source}:{lineno}: entry before any section")
        key, value = match.group(1), match.group(2).strip()
        if key not in SECTION_KEYS[section]:
            raise ConfigError(f"{source}:{lineno}: unknown key '{key}' in [{section}]")
        if key in raw[section]:
            raise ConfigError(f"{source}:{lineno}: duplicate key '{key}'")
        if not value:
            raise ConfigError(f"{source}:{lineno}: empty value for '{key}'")
        raw[section][key] = (value, lineno)
    return raw, headers


def parse_observable(value: str, source: str, lineno: int) -> Dict[str, Any]:
    """`(re, im, m, l); ...` into ObservableSpec data."""
    terms = []
    chunks = [c.strip() for c in value.split(";") if c.strip()]
    for chunk in chunks:
        match = _TUPLE.fullmatch(chunk)
        if not match:
            raise ConfigError(f"{source}:{lineno}: expected '(re, im, m, l)', got '{chunk}'")
        fields = [f.strip() for f in match.group(1).split(",")]
        if len(fields) != 4:
            raise ConfigError(f"{source}:{lineno}: observable term needs 4 fields, got {len(fields)}")
        try:
            terms.append({"re": float(fields[0]), "im": float(fields[1]), "m": int(fields[2]), "l": int(fields[3])})
        except ValueError as e:
            raise ConfigError(f"{source}:{lineno}: {e}") from e
    if not terms:
        raise ConfigError(f"{source}:{lineno}: observable has no terms")
    return {"terms": terms}


def _build_payload(raw: Raw, source: str) -> Dict[str, Any]:
    payload: Dict[str, Any] = {}
    for section, entries in raw.items():
        if section == "experiment":
            target = payload
        elif section == "observables":
            for key, (value, lineno) in entries.items():
                payload[key] = parse_observable(value, source, lineno)
            continue
        else:
            target = payload.setdefault(section, {})
        for key, (value, _) in entries.items():
            if key in LIST_KEYS:
                target[key] = [v.strip() for v in value.split(",") if v.strip()]
            else:
                target[key] = value
    return payload


def _line_of(loc: Tuple, raw: Raw, headers: Dict[str, int]) -> int:
    """Best line for a pydantic error location."""
    if not loc:
        return 1
    head = str(loc[0])
    if head in ("g", "h", "g_alt", "h_alt"):
        entry = raw.get("observables", {}).get(head)
        return entry[1] if entry else headers.get("observables", 1)
    if head in ("name", "seed"):
        entry = raw.get("experiment", {}).get(head)
        return entry[1] if entry else headers.get("experiment", 1)
    if len(loc) > 1 and str(loc[1]) in raw.get(head, {}):
        return raw[head][str(loc[1])][1]
    return headers.get(head, 1)


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    raw, headers = parse_lines(text, source)
    payload = _build_payload(raw, source)
    try:
        return ExperimentConfig.model_validate(payload)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first["loc"])
        line = _line_of(tuple(first["loc"]), raw, headers)
        raise ConfigError(f"{source}:{line}: {where}: {first['msg']}") from e


def load_config(path) -> ExperimentConfig:
    """Read and validate an experiment file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"{path}: cannot read ({e.strerror})") from e
    return parse_config(text, str(path))
