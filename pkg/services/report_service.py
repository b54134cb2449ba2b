#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Report emission: CSV tables, static SVG plots and an HTML index.

Inputs are artifact directories produced by train, probe-bc/probe-state and
align. Every train_log.csv, probe_results.csv and alignment_summary.csv found
below them is collected; runs are named by their directory path relative to
the input root.
"""

import csv
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from jinja2 import Environment, FileSystemLoader, select_autoescape  # noqa: E402

from config import VERSION  # noqa: E402
from exceptions import ConfigurationError  # noqa: E402
from services.alignment_service import SUMMARY_NAME, AlignmentRow, read_alignment_summary  # noqa: E402
from services.probe_service import RESULT_COLUMNS, RESULTS_NAME, ProbeRow, read_probe_results  # noqa: E402
from services.training_service import LOG_NAME, StepRecord, read_train_log  # noqa: E402
from utils import PathLike, atomic_write_text, check_directory  # noqa: E402

logger = logging.getLogger(__name__)

TEMPLATES_DIR = Path(__file__).resolve().parent.parent / "templates"
INDEX_TEMPLATE = "report_index.html"

PROBE_METRICS = RESULT_COLUMNS[2:]
PROBE_TABLE_COLUMNS = ("encoder", "metric", "value", "n")
ALIGNMENT_TABLE_COLUMNS = ("encoder", "metric", "rho_partial", "n_pairs", "n_dropped")
LOSS_TABLE_COLUMNS = ("run", "steps", "first_total", "final_total", "final_L_vla", "final_L_inv", "mean_reversed_fraction")

# fixed SVG ids and no timestamp, so identical inputs give identical files
_SVG_SALT = "sal-report"
_SVG_METADATA = {"Date": None}


@dataclass
class ReportInputs:
    sources: List[Path] = field(default_factory=list)
    train_logs: Dict[str, List[StepRecord]] = field(default_factory=dict)
    probe_rows: List[ProbeRow] = field(default_factory=list)
    alignment_rows: List[AlignmentRow] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not (self.train_logs or self.probe_rows or self.alignment_rows)


@dataclass
class ReportOutputs:
    tables: Dict[str, Path] = field(default_factory=dict)
    plots: Dict[str, Path] = field(default_factory=dict)
    index: Path = None


def _run_name(root: Path, path: Path) -> str:
    rel = path.parent.relative_to(root)
    parts = [root.name] + ([] if str(rel) == "." else list(rel.parts))
    return "/".join(parts)


def collect_inputs(input_dirs: Sequence[PathLike]) -> ReportInputs:
    inputs = ReportInputs()
    for directory in input_dirs:
        root = Path(directory)
        if not root.is_dir():
            raise ConfigurationError("in", f"'{root}' is not a directory")
        inputs.sources.append(root)
        for path in sorted(root.rglob(LOG_NAME)):
            inputs.train_logs[_run_name(root, path)] = read_train_log(path)
        for path in sorted(root.rglob(RESULTS_NAME)):
            inputs.probe_rows.extend(read_probe_results(path))
        for path in sorted(root.rglob(SUMMARY_NAME)):
            inputs.alignment_rows.extend(read_alignment_summary(path))
    logger.debug(
        f"Collected {len(inputs.train_logs)} train logs, {len(inputs.probe_rows)} probe rows, "
        f"{len(inputs.alignment_rows)} alignment rows"
    )
    return inputs


def probe_table(rows: Sequence[ProbeRow]) -> List[Dict[str, Any]]:
    """One row per (encoder, metric): mean over tasks of the recorded values."""
    values: Dict[tuple, List[float]] = defaultdict(list)
    for row in rows:
        for metric in PROBE_METRICS:
            value = getattr(row, metric)
            if value is not None:
                values[(row.encoder_id, metric)].append(value)
    return [
        {"encoder": encoder, "metric": metric, "value": float(np.mean(vals)), "n": len(vals)}
        for (encoder, metric), vals in sorted(values.items())
    ]


def alignment_table(rows: Sequence[AlignmentRow]) -> List[Dict[str, Any]]:
    return [
        {
            "encoder": row.encoder,
            "metric": row.metric,
            "rho_partial": row.rho_partial,
            "n_pairs": row.n_pairs,
            "n_dropped": row.n_dropped,
        }
        for row in sorted(rows, key=lambda r: (r.encoder, r.metric))
    ]


def loss_table(logs: Dict[str, List[StepRecord]]) -> List[Dict[str, Any]]:
    table = []
    for run, records in sorted(logs.items()):
        if not records:
            continue
        table.append(
            {
                "run": run,
                "steps": len(records),
                "first_total": records[0].total,
                "final_total": records[-1].total,
                "final_L_vla": records[-1].l_vla,
                "final_L_inv": records[-1].l_inv,
                "mean_reversed_fraction": float(np.mean([r.reversed_fraction for r in records])),
            }
        )
    return table


def write_table(path: PathLike, columns: Sequence[str], rows: Sequence[Dict[str, Any]]) -> Path:
    path = Path(path)
    check_directory(path.parent)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in columns])
    return path


def _save_svg(fig, path: Path) -> Path:
    with plt.rc_context({"svg.hashsalt": _SVG_SALT}):
        fig.savefig(path, format="svg", metadata=_SVG_METADATA)
    plt.close(fig)
    return path


def plot_loss_curves(logs: Dict[str, List[StepRecord]], path: PathLike, smooth: int = 10) -> Path:
    """Total loss per step for every run (moving average over `smooth` steps)."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for run, records in sorted(logs.items()):
        if not records:
            continue
        steps = np.array([r.step for r in records])
        total = np.array([r.total for r in records])
        window = max(1, min(smooth, len(total)))
        kernel = np.ones(window) / window
        ax.plot(steps[window - 1 :], np.convolve(total, kernel, mode="valid"), label=run, linewidth=1.2)
    ax.set_xlabel("step")
    ax.set_ylabel("total loss")
    ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
    if logs:
        ax.legend(fontsize=7)
    fig.tight_layout()
    return _save_svg(fig, Path(path))


def _bar_plot(groups: Sequence[str], series: Dict[str, List[float]], ylabel: str, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(max(4, 1.2 * len(groups) + 2), 4))
    x = np.arange(len(groups))
    width = 0.8 / max(1, len(series))
    for k, (name, values) in enumerate(series.items()):
        ax.bar(x + (k - (len(series) - 1) / 2) * width, values, width, label=name)
    ax.set_xticks(x)
    ax.set_xticklabels(groups, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel(ylabel)
    ax.axhline(0.0, color="black", linewidth=0.6)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save_svg(fig, path)


def plot_alignment_bars(rows: Sequence[AlignmentRow], path: PathLike) -> Path:
    """Grouped bars of rho_partial per encoder for the cosine and scale metrics."""
    encoders = sorted({r.encoder for r in rows})
    scores = {(r.encoder, r.metric): r.rho_partial for r in rows}
    series = {
        metric: [scores.get((e, metric), np.nan) for e in encoders]
        for metric in sorted({r.metric for r in rows})
    }
    return _bar_plot(encoders, series, "partial Spearman rho", Path(path))


def plot_probe_bars(table: Sequence[Dict[str, Any]], path: PathLike) -> Path:
    """Mean BC-probe success rate per encoder."""
    success = {r["encoder"]: r["value"] for r in table if r["metric"] == "success_rate"}
    encoders = sorted(success)
    return _bar_plot(encoders, {"success rate": [success[e] for e in encoders]}, "success rate", Path(path))


def _format_cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def render_index(
    out_dir: Path, sources: Sequence[Path], tables: List[Dict[str, Any]], plots: List[Dict[str, str]]
) -> Path:
    env = Environment(
        loader=FileSystemLoader(str(TEMPLATES_DIR)),
        autoescape=select_autoescape(["html"]),
        keep_trailing_newline=True,
    )
    env.filters["format_cell"] = _format_cell
    html = env.get_template(INDEX_TEMPLATE).render(
        title="State-aliasing lab report",
        tool_version=VERSION,
        sources=[str(s) for s in sources],
        tables=tables,
        plots=plots,
    )
    return atomic_write_text(out_dir / "index.html", html)


def build_report(input_dirs: Sequence[PathLike], out_dir: PathLike) -> ReportOutputs:
    """
    Collect artifacts and write tables, plots and index.html.

    Raises:
        ConfigurationError: an input is not a directory or holds no known artifacts
    """
    inputs = collect_inputs(input_dirs)
    if inputs.empty:
        raise ConfigurationError(
            "in", f"no {LOG_NAME}, {RESULTS_NAME} or {SUMMARY_NAME} found under the inputs"
        )
    out_dir = check_directory(out_dir)
    outputs = ReportOutputs()
    tables, plots = [], []

    if inputs.train_logs:
        rows = loss_table(inputs.train_logs)
        outputs.tables["loss"] = write_table(out_dir / "loss_table.csv", LOSS_TABLE_COLUMNS, rows)
        outputs.plots["loss"] = plot_loss_curves(inputs.train_logs, out_dir / "loss_curves.svg")
        tables.append({"title": "Training runs", "file": "loss_table.csv", "columns": LOSS_TABLE_COLUMNS, "rows": rows})
        plots.append({"title": "Loss curves", "file": "loss_curves.svg"})

    if inputs.probe_rows:
        rows = probe_table(inputs.probe_rows)
        outputs.tables["probe"] = write_table(out_dir / "probe_table.csv", PROBE_TABLE_COLUMNS, rows)
        tables.append({"title": "Frozen-encoder probes", "file": "probe_table.csv", "columns": PROBE_TABLE_COLUMNS, "rows": rows})
        if any(r["metric"] == "success_rate" for r in rows):
            outputs.plots["probe"] = plot_probe_bars(rows, out_dir / "probe_success.svg")
            plots.append({"title": "BC-probe success", "file": "probe_success.svg"})

    if inputs.alignment_rows:
        rows = alignment_table(inputs.alignment_rows)
        outputs.tables["alignment"] = write_table(out_dir / "alignment_table.csv", ALIGNMENT_TABLE_COLUMNS, rows)
        outputs.plots["alignment"] = plot_alignment_bars(inputs.alignment_rows, out_dir / "alignment_bars.svg")
        tables.append({"title": "State-feature alignment", "file": "alignment_table.csv", "columns": ALIGNMENT_TABLE_COLUMNS, "rows": rows})
        plots.append({"title": "Alignment", "file": "alignment_bars.svg"})

    outputs.index = render_index(out_dir, inputs.sources, tables, plots)
    logger.info(f"Wrote report with {len(outputs.tables)} tables and {len(outputs.plots)} plots to {out_dir}")
    return outputs
