"""Experiment reports and their on-disk formats (JSON report + CSV curves)."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


def _plain(obj):
    """Make numpy scalars/arrays and non-finite floats JSON friendly."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


@dataclass
class Curve:
    header: list[str]
    rows: list[tuple]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header)
        for row in self.rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
        return buf.getvalue()


@dataclass
class ExperimentReport:
    experiment: str
    params: dict
    seed: int
    trials: int = 0
    statistics: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    curves: dict = field(default_factory=dict)
    runtime: float = 0.0
    # in-memory result object (e.g. a TubeScan); not serialized
    payload: object = field(default=None, repr=False, compare=False)

    @property
    def passed(self) -> bool:
        return all(bool(v) for v in self.checks.values())

    @property
    def seed_range(self) -> tuple[int, int]:
        """Trial indices [0, trials) derived from `seed`."""
        return (0, self.trials)

    def to_dict(self, config: dict | None = None) -> dict:
        return _plain(
            {
                "format_version": FORMAT_VERSION,
                "experiment": self.experiment,
                "config": config if config is not None else {},
                "params": self.params,
                "seed": self.seed,
                "trials": self.trials,
                "trial_index_range": list(self.seed_range),
                "statistics": self.statistics,
                "bounds": self.bounds,
                "checks": self.checks,
                "passed": self.passed,
                "flags": self.flags,
                "runtime_seconds": self.runtime,
            }
        )


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_report(report: ExperimentReport, out_dir: Path, config: dict, formats=("json", "csv")) -> list[Path]:
    """Write `<experiment>.json` and one CSV per curve; every file embeds the config."""
    out_dir = Path(out_dir)
    written = []
    stem = report.experiment.replace("-", "_")
    if "json" in formats:
        doc = report.to_dict(config)
        doc["timestamp"] = timestamp()
        path = out_dir / f"{stem}.json"
        atomic_write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")
        written.append(path)
    if "csv" in formats:
        meta = json.dumps(_plain({"format_version": FORMAT_VERSION, "config": config}), sort_keys=True)
        for name, curve in report.curves.items():
            path = out_dir / f"{stem}_{name}.csv"
            atomic_write(path, f"# {meta}\n" + curve.to_csv())
            written.append(path)
    return written


def read_csv(path: Path) -> tuple[dict, list[dict]]:
    """Inverse of the CSV layout: (embedded metadata, rows as dicts)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    meta = json.loads(lines[0][2:]) if lines and lines[0].startswith("# ") else {}
    body = lines[1:] if meta else lines
    return meta, list(csv.DictReader(body))
