"""Experiment reports, verdicts and the provenance log.

A report is a pure function of (config, seed, code version): it holds no
wall-clock time and is written with sorted keys. Timings, calibration
output and gate overrides go to ``provenance.jsonl`` instead.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

from bprelab.estimates import EstimateTable
from bprelab.harness.files import write_csv

logger = logging.getLogger(__name__)

REPORT_FILE = "report.json"
PROVENANCE_FILE = "provenance.jsonl"


def _to_json(value: Any) -> Any:
    """``json.dumps`` fallback for numpy values and records with ``to_dict``."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if hasattr(value, "to_dict"):
        return value.to_dict()
    return str(value)


@dataclass(frozen=True)
class Verdict:
    """One pass/fail decision and the threshold it was taken against."""

    name: str
    passed: bool
    statistic: float | None = None
    threshold: float | None = None
    rule: str = ""

    @classmethod
    def at_most(cls, name: str, statistic: float, threshold: float) -> Verdict:
        return cls(name, bool(statistic <= threshold), float(statistic), float(threshold), "<=")

    @classmethod
    def at_least(cls, name: str, statistic: float, threshold: float) -> Verdict:
        return cls(name, bool(statistic >= threshold), float(statistic), float(threshold), ">=")

    @classmethod
    def holds(cls, name: str, ok: bool, rule: str) -> Verdict:
        return cls(name, bool(ok), rule=rule)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "rule": self.rule,
        }


@dataclass
class ExperimentReport:
    """Everything an experiment produced, ready to be written to disk."""

    kind: str
    version: str
    seed: int
    seed_source: str
    config: dict[str, Any]
    tables: list[EstimateTable] = field(default_factory=list)
    results: dict[str, Any] = field(default_factory=dict)
    hypotheses: dict[str, Any] | None = None
    verdicts: list[Verdict] = field(default_factory=list)
    gate_override: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def add_verdict(self, verdict: Verdict) -> Verdict:
        self.verdicts.append(verdict)
        logger.info(
            "Verdict %s: %s (%s %s %s)",
            verdict.name,
            "pass" if verdict.passed else "FAIL",
            verdict.statistic,
            verdict.rule,
            verdict.threshold,
        )
        return verdict

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "version": self.version,
            "seed": self.seed,
            "seed_source": self.seed_source,
            "config": self.config,
            "tables": [t.to_dict() for t in self.tables],
            "results": self.results,
            "hypotheses": self.hypotheses,
            "verdicts": [v.to_dict() for v in self.verdicts],
            "passed": self.passed,
            "gate_override": self.gate_override,
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, default=_to_json) + "\n"

    def write(self, out_dir: str | Path) -> Path:
        """Write ``report.json`` and one CSV per table; returns the report path."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / REPORT_FILE
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(self.to_json())
        for table in self.tables:
            write_csv(table, self.seed, out)
        logger.info("Wrote %s and %d tables", path, len(self.tables))
        return path


# ---------------------------------------------------------------------------
# Provenance
# ---------------------------------------------------------------------------


@dataclass
class ProvenanceConfig:
    """Provenance logging configuration."""

    enabled: bool = True
    log_file: str | None = None


class ProvenanceLog:
    """Appends JSONL provenance entries (run records, calibrations, overrides)."""

    def __init__(self, config: ProvenanceConfig | None = None):
        self._config = config or ProvenanceConfig()

    @classmethod
    def in_dir(cls, out_dir: str | Path) -> ProvenanceLog:
        return cls(ProvenanceConfig(log_file=str(Path(out_dir) / PROVENANCE_FILE)))

    @property
    def config(self) -> ProvenanceConfig:
        return self._config

    def record(self, event: str, **fields: Any) -> dict[str, Any] | None:
        """Append one entry; returns it, or None when logging is disabled."""
        if not self._config.enabled:
            return None
        entry: dict[str, Any] = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "event": event,
        }
        entry.update(fields)
        self._write_entry(entry)
        return entry

    def _write_entry(self, entry: dict[str, Any]) -> None:
        if not self._config.log_file:
            logger.debug("Provenance entry (no file configured): %s", json.dumps(entry, default=_to_json))
            return
        line = json.dumps(entry, sort_keys=True, default=_to_json) + "\n"
        try:
            log_path = Path(self._config.log_file)
            log_path.parent.mkdir(parents=True, exist_ok=True)
            with open(log_path, "a", encoding="utf-8", newline="\n") as f:
                f.write(line)
        except OSError:
            logger.exception("Failed to write provenance entry")

    def entries(self) -> list[dict[str, Any]]:
        """All entries written so far, oldest first."""
        if not self._config.log_file or not Path(self._config.log_file).exists():
            return []
        with open(self._config.log_file, encoding="utf-8") as f:
            return [json.loads(line) for line in f if line.strip()]
