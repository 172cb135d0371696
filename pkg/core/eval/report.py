"""
EvalReport: per-cell results of a protocol, written as deterministic JSON and CSV.
"""
import csv
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from .metrics import NORMALIZED_SCALE

logger = logging.getLogger('pobench.eval.report')

DIGITS = 6


def _round(value: Any) -> Any:
    if isinstance(value, float):
        return round(value, DIGITS)
    if isinstance(value, dict):
        return {k: _round(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round(v) for v in value]
    return value


@dataclass
class CellResult:
    """Final returns of one cell across seeds."""
    key: Dict[str, str]
    returns: List[float]
    max_return: float = 1000.0

    def __post_init__(self):
        if not self.returns:
            raise ValueError(f"cell {self.key} has no seed results")

    @property
    def mean(self) -> float:
        return float(np.mean(self.returns))

    @property
    def std(self) -> float:
        return float(np.std(self.returns))

    @property
    def median(self) -> float:
        return float(np.median(self.returns))

    @property
    def seeds(self) -> int:
        return len(self.returns)

    @property
    def normalized(self) -> float:
        return self.mean * NORMALIZED_SCALE / self.max_return

    def to_dict(self) -> Dict[str, Any]:
        return {**self.key, "mean": self.mean, "std": self.std, "median": self.median, "seeds": self.seeds,
                "normalized": self.normalized, "returns": list(self.returns)}


@dataclass
class EvalReport:
    protocol: str
    env: str
    columns: List[str]
    cells: List[CellResult] = field(default_factory=list)
    ranks: Dict[str, float] = field(default_factory=dict)
    curves: List[Dict[str, Any]] = field(default_factory=list)
    extras: Dict[str, Any] = field(default_factory=dict)
    meta: Dict[str, Any] = field(default_factory=dict)

    def cell(self, **key: str) -> Optional[CellResult]:
        for result in self.cells:
            if all(result.key.get(k) == v for k, v in key.items()):
                return result
        return None

    def to_dict(self) -> Dict[str, Any]:
        return _round({
            "protocol": self.protocol,
            "env": self.env,
            "columns": list(self.columns),
            "cells": [c.to_dict() for c in self.cells],
            "ranks": dict(sorted(self.ranks.items())),
            "curves": self.curves,
            "extras": self.extras,
            "meta": self.meta,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def cells_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(list(self.columns) + ["mean", "std", "normalized", "seeds"])
        for c in self.cells:
            writer.writerow([c.key.get(k, "") for k in self.columns]
                            + [f"{c.mean:.4f}", f"{c.std:.4f}", f"{c.normalized:.4f}", c.seeds])
        return buffer.getvalue()

    def curves_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(list(self.columns) + ["seed", "offline_epoch", "return"])
        for point in self.curves:
            writer.writerow([point.get(k, "") for k in self.columns]
                            + [point["seed"], f"{point['offline_epoch']:.2f}", f"{point['return']:.4f}"])
        return buffer.getvalue()

    def write(self, directory: Union[str, Path], tables: Sequence[tuple] = ()) -> List[Path]:
        """
        Write report.json, cells.csv, curves.csv plus any (name, csv text) tables.
        """
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        files = [("report.json", self.to_json()), ("cells.csv", self.cells_csv()), ("curves.csv", self.curves_csv())]
        files += list(tables)
        paths = []
        for name, text in files:
            path = directory / name
            path.write_text(text, encoding="utf-8")
            paths.append(path)
        logger.info(f"Wrote {self.protocol} report to {directory}")
        return paths
