"""
Writers for run artifacts: CSV tables, JSON documents and SVG plots.
"""

import json
from datetime import date, datetime
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

PathLike = Union[str, Path]

# SVG stays byte-stable across runs without the creation date
_SVG_METADATA = {"Date": None}


def _to_jsonable(value: Any):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    if isinstance(value, (datetime, date)):
        return value.isoformat()
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


class DataExporter:
    """Export tables, reports and figures of a run."""

    @staticmethod
    def export_csv(frame: pd.DataFrame, filepath: PathLike) -> Path:
        """RFC-4180 CSV with CRLF rows, header line and round-trip float precision."""
        path = Path(filepath)
        frame.to_csv(path, index=False, lineterminator="\r\n", float_format="%.17g", encoding="utf-8")
        return path

    @staticmethod
    def export_json(data: Any, filepath: PathLike) -> Path:
        path = Path(filepath)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2, default=_to_jsonable)
        return path

    @staticmethod
    def _save(fig, filepath: PathLike) -> Path:
        path = Path(filepath)
        fig.savefig(path, format="svg", metadata=_SVG_METADATA)
        plt.close(fig)
        return path

    @staticmethod
    def plot_ladder(x: Sequence[float], y: Sequence[float], filepath: PathLike, *, title: str,
                    xlabel: str, ylabel: str, fit: Optional[Dict[str, float]] = None,
                    logx: bool = True, logy: bool = True) -> Path:
        """Norm ladder on log-log axes with an optional fitted power law."""
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(x, y, "o", label="measured")
        if fit is not None:
            xs = np.asarray(x, dtype=float)
            ax.plot(xs, np.exp(fit["intercept"]) * xs ** fit["slope"], "-",
                    label=f"slope {fit['slope']:.3f}")
            ax.legend()
        if logx:
            ax.set_xscale("log")
        if logy:
            ax.set_yscale("log")
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        return DataExporter._save(fig, filepath)

    @staticmethod
    def plot_estimates(labels: Sequence[str], estimates: Sequence[float], errors: Sequence[float],
                       filepath: PathLike, *, title: str, reference: Optional[Sequence[float]] = None) -> Path:
        """Point estimates with 3-SE error bars, optionally against exact values."""
        fig, ax = plt.subplots(figsize=(max(6, 0.5 * len(labels)), 4))
        pos = np.arange(len(labels))
        ax.errorbar(pos, estimates, yerr=3 * np.asarray(errors, dtype=float), fmt="o", capsize=3,
                    label="estimate +- 3 SE")
        if reference is not None:
            ax.plot(pos, reference, "x", label="exact")
        ax.set_xticks(pos)
        ax.set_xticklabels(labels, rotation=45, ha="right")
        ax.set_title(title)
        ax.legend()
        fig.tight_layout()
        return DataExporter._save(fig, filepath)

    @staticmethod
    def plot_histogram(values: Sequence[float], filepath: PathLike, *, title: str, xlabel: str,
                       bins: int = 50) -> Path:
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.hist(np.asarray(values, dtype=float), bins=bins)
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel("count")
        return DataExporter._save(fig, filepath)

    @staticmethod
    def plot_series(series: Dict[str, Sequence[Sequence[float]]], filepath: PathLike, *, title: str,
                    xlabel: str, ylabel: str, equal_aspect: bool = False) -> Path:
        """Named (x, y) curves, e.g. trajectory projections or particle paths."""
        fig, ax = plt.subplots(figsize=(6, 5))
        for name, (xs, ys) in series.items():
            ax.plot(xs, ys, "-", label=name)
        if equal_aspect:
            ax.set_aspect("equal", adjustable="datalim")
        if 0 < len(series) <= 12:
            ax.legend(fontsize="small")
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        return DataExporter._save(fig, filepath)
