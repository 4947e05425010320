"""Ensemble files and CSV tables.

Ensemble files are JSON with every probability, weight and mean written
as a decimal string; numbers are parsed once, from text, so the same file
always yields the same floats. CSV tables use the fixed column order
``n, estimate, stderr, N, seed``, LF line endings and shortest round-trip
float text.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from pathlib import Path
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ValidationError, field_validator, model_validator

from bprelab.environment.ensemble import EnvironmentEnsemble, TiltKnob
from bprelab.errors import ConfigError, LabError
from bprelab.estimates import EstimateTable, TableRow
from bprelab.offspring.laws import DEFAULT_CAP, FiniteTableRow, OffspringLaw, ZeroInflatedGeometricRow

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("n", "estimate", "stderr", "N", "seed")


def decimal_text(x: float) -> str:
    """Shortest text that parses back to the same double."""
    return repr(float(x))


def _parse_decimal(v: str) -> str:
    try:
        float(v)
    except ValueError as exc:
        raise ValueError(f"not a decimal number: {v!r}") from exc
    return v


# ---------------------------------------------------------------------------
# Ensemble schema
# ---------------------------------------------------------------------------


class TableAtomSpec(BaseModel):
    alpha: list[int]
    prob: str

    @field_validator("prob")
    @classmethod
    def check_prob(cls, v: str) -> str:
        return _parse_decimal(v)


class GeometricParamsSpec(BaseModel):
    q0: str
    means: list[str]
    cap: int = DEFAULT_CAP

    @field_validator("q0")
    @classmethod
    def check_q0(cls, v: str) -> str:
        return _parse_decimal(v)

    @field_validator("means")
    @classmethod
    def check_means(cls, v: list[str]) -> list[str]:
        return [_parse_decimal(m) for m in v]


class RowSpec(BaseModel):
    kind: Literal["table", "zero_inflated_geometric"]
    atoms: list[TableAtomSpec] | None = None
    params: GeometricParamsSpec | None = None

    @model_validator(mode="after")
    def check_payload(self) -> "RowSpec":
        if self.kind == "table" and (self.atoms is None or self.params is not None):
            raise ValueError("a table row carries 'atoms' and no 'params'")
        if self.kind == "zero_inflated_geometric" and (self.params is None or self.atoms is not None):
            raise ValueError("a zero_inflated_geometric row carries 'params' and no 'atoms'")
        return self


class LawSpec(BaseModel):
    weight: str
    rows: list[RowSpec]

    @field_validator("weight")
    @classmethod
    def check_weight(cls, v: str) -> str:
        return _parse_decimal(v)


class KnobSpec(BaseModel):
    kind: Literal["geometric_scale", "weight_pair"]
    value: str
    lower: str
    upper: str
    pair: list[int] = [0, 1]

    @field_validator("value", "lower", "upper")
    @classmethod
    def check_decimal(cls, v: str) -> str:
        return _parse_decimal(v)


class EnsembleFile(BaseModel):
    """On-disk form of an :class:`EnvironmentEnsemble`."""

    p: int
    name: str = "ensemble"
    knob: KnobSpec | None = None
    atoms: list[LawSpec]

    model_config = {"extra": "forbid"}

    @model_validator(mode="after")
    def check_dimensions(self) -> "EnsembleFile":
        errors: list[str] = []
        if self.p < 1:
            errors.append(f"p must be >= 1, got {self.p}")
        if not self.atoms:
            errors.append("at least one atom is required")
        for a, law in enumerate(self.atoms):
            if len(law.rows) != self.p:
                errors.append(f"atom {a}: {len(law.rows)} rows, expected {self.p}")
            for i, row in enumerate(law.rows):
                if row.atoms is not None:
                    bad = [t.alpha for t in row.atoms if len(t.alpha) != self.p]
                    if bad:
                        errors.append(f"atom {a} row {i}: alpha of wrong length {bad}")
                if row.params is not None and len(row.params.means) != self.p:
                    errors.append(f"atom {a} row {i}: {len(row.params.means)} means, expected {self.p}")
        if errors:
            raise ValueError("; ".join(errors))
        return self


def _build_row(spec: RowSpec) -> FiniteTableRow | ZeroInflatedGeometricRow:
    if spec.kind == "table":
        assert spec.atoms is not None
        return FiniteTableRow(
            np.array([t.alpha for t in spec.atoms], dtype=np.int64),
            np.array([float(t.prob) for t in spec.atoms]),
        )
    assert spec.params is not None
    return ZeroInflatedGeometricRow(
        float(spec.params.q0), np.array([float(m) for m in spec.params.means]), spec.params.cap
    )


def ensemble_from_spec(spec: EnsembleFile) -> EnvironmentEnsemble:
    laws = tuple(OffspringLaw(tuple(_build_row(r) for r in law.rows)) for law in spec.atoms)
    weights = np.array([float(law.weight) for law in spec.atoms])
    knob = None
    if spec.knob is not None:
        k = spec.knob
        knob = TiltKnob(k.kind, float(k.value), float(k.lower), float(k.upper), tuple(k.pair))
    return EnvironmentEnsemble(weights, laws, knob, spec.name)


def _row_spec(row: FiniteTableRow | ZeroInflatedGeometricRow) -> dict[str, Any]:
    if isinstance(row, FiniteTableRow):
        return {
            "kind": "table",
            "atoms": [
                {"alpha": [int(c) for c in alpha], "prob": decimal_text(q)}
                for alpha, q in zip(row.support, row.probs)
            ],
        }
    return {
        "kind": "zero_inflated_geometric",
        "params": {
            "q0": decimal_text(row.q0),
            "means": [decimal_text(m) for m in row.means],
            "cap": int(row.cap),
        },
    }


def ensemble_to_dict(ens: EnvironmentEnsemble) -> dict[str, Any]:
    """The untilted family plus its knob, in file form."""
    out: dict[str, Any] = {
        "p": ens.p,
        "name": ens.name,
        "atoms": [
            {"weight": decimal_text(w), "rows": [_row_spec(r) for r in law.rows]}
            for w, law in zip(ens.base_weights, ens.base_laws)
        ],
    }
    if ens.knob is not None:
        k = ens.knob
        out["knob"] = {
            "kind": k.kind,
            "value": decimal_text(k.value),
            "lower": decimal_text(k.lower),
            "upper": decimal_text(k.upper),
            "pair": list(k.pair),
        }
    return out


def load_ensemble(path: str | Path) -> EnvironmentEnsemble:
    """Parse and validate an ensemble file; every failure is a ConfigError."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Ensemble file not found: {path}", path=str(path))
    try:
        with open(path, encoding="utf-8") as f:
            spec = EnsembleFile.model_validate(json.load(f))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Ensemble file is not valid JSON: {exc}", path=str(path)) from exc
    except ValidationError as exc:
        raise ConfigError(f"Invalid ensemble file {path}: {exc}", path=str(path)) from exc
    try:
        ens = ensemble_from_spec(spec)
    except LabError as exc:
        raise ConfigError(f"Invalid ensemble file {path}: {exc}", path=str(path)) from exc
    logger.debug("Loaded ensemble %s: p=%d, %d atoms", ens.name, ens.p, ens.size)
    return ens


def dump_ensemble(ens: EnvironmentEnsemble, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(ensemble_to_dict(ens), indent=2, sort_keys=True) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    return path


# ---------------------------------------------------------------------------
# CSV tables
# ---------------------------------------------------------------------------


def _key_text(n: float) -> str:
    if isinstance(n, (int, np.integer)):
        return str(int(n))
    return decimal_text(n)


def _parse_key(text: str) -> float:
    try:
        return int(text)
    except ValueError:
        return float(text)


def emit_csv(table: EstimateTable, seed: int) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in table.rows:
        writer.writerow(
            [_key_text(row.n), decimal_text(row.estimate), decimal_text(row.stderr), int(row.N), int(seed)]
        )
    return buf.getvalue()


def parse_csv(text: str, name: str = "table") -> tuple[EstimateTable, int | None]:
    """Inverse of :func:`emit_csv`; returns the table and the seed column value."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != CSV_COLUMNS:
        raise ConfigError(f"unexpected CSV header: {header}", expected=list(CSV_COLUMNS))
    table = EstimateTable(name)
    seed: int | None = None
    for line in reader:
        if not line:
            continue
        n, est, err, count, s = line
        table.rows.append(TableRow(_parse_key(n), float(est), float(err), int(count)))
        seed = int(s)
    return table, seed


def write_csv(table: EstimateTable, seed: int, out_dir: str | Path) -> Path:
    path = Path(out_dir) / f"{table.name}.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(emit_csv(table, seed))
    return path
