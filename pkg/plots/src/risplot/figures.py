"""Figures from solver artifacts: sweep CSVs, trace JSONs, solve reports.

Everything is a file-to-file transformation. The input contracts are the
sweep CSV header and the report JSON the fdris command line writes; no
code is shared with the solver package, the formats are the interface.
Rendering is deterministic: a fixed style (including the SVG hash salt)
and no timestamps, so re-rendering the same inputs reproduces the output
byte for byte.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from matplotlib import rc_context
from matplotlib.figure import Figure

CSV_COLUMNS = ("scheme", "param", "value", "seed", "sum_rate_bps_hz",
               "ul_rate_bps_hz", "dl_rate_bps_hz", "outer_iters", "wall_ms")

FIGURE_KINDS = ("convergence", "sweep-lines", "ul-dl-split")

_FORMATS = (".png", ".svg")

_STYLE = {
    "figure.figsize": (6.4, 4.2),
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.35,
    "grid.linewidth": 0.6,
    "lines.linewidth": 1.6,
    "lines.markersize": 4.5,
    "legend.framealpha": 0.9,
    "legend.fontsize": 9,
    "svg.hashsalt": "risplot",
}

_AXIS_LABELS = {
    "sum_rate_bps_hz": "sum rate (bit/s/Hz)",
    "ul_rate_bps_hz": "uplink sum rate (bit/s/Hz)",
    "dl_rate_bps_hz": "downlink sum rate (bit/s/Hz)",
    "outer_iters": "outer iterations",
    "wall_ms": "wall time (ms)",
    "ris_elements": "reflecting elements",
    "sic_db": "self-interference cancellation (dB)",
    "alpha_r": "reflected-path loss exponent",
    "bs_tx_antennas": "BS transmit antennas",
    "power_bs": "BS power budget (W)",
    "x_ris": "surface x position (m)",
    "x_user": "user cluster x position (m)",
    "y_user": "user cluster y offset (m)",
    "direct_links_enabled": "direct links enabled",
}


def _label(column: str) -> str:
    return _AXIS_LABELS.get(column, column)


@dataclass
class FigureSpec:
    """One figure to render: a kind, an input artifact, an output image."""

    kind: str
    source: Path
    output: Path
    group_by: str = "scheme"
    metric: str = "sum_rate_bps_hz"

    def __post_init__(self) -> None:
        if self.kind not in FIGURE_KINDS:
            raise ValueError(
                f"unknown figure kind {self.kind!r}; choose from {FIGURE_KINDS}")
        self.source = Path(self.source)
        self.output = Path(self.output)
        suffix = self.output.suffix.lower()
        if suffix not in _FORMATS:
            raise ValueError(
                f"output must end in one of {_FORMATS}, got {suffix!r}")


# -- input parsing ------------------------------------------------------------

@dataclass
class SweepTable:
    """Rows of a sweep CSV, already type-converted; error rows keep NaN."""

    path: Path
    param: str
    rows: list = field(default_factory=list)

    @classmethod
    def read(cls, path: Path, needed: tuple) -> "SweepTable":
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            for col in needed:
                if col not in header:
                    raise ValueError(
                        f"column {col!r} missing from {path} "
                        f"(found {header})")
            rows = list(reader)
        if not rows:
            raise ValueError(f"{path} holds no data rows")
        params = {r["param"] for r in rows}
        if len(params) != 1:
            raise ValueError(
                f"{path} mixes swept parameters {sorted(params)}")
        return cls(path=Path(path), param=params.pop(), rows=rows)

    def groups(self, group_by: str) -> list:
        seen = []
        for r in self.rows:
            if r[group_by] not in seen:
                seen.append(r[group_by])
        return seen

    def values(self) -> list:
        """Distinct swept values in first-appearance order."""
        seen = []
        for r in self.rows:
            if r["value"] not in seen:
                seen.append(r["value"])
        return seen

    def series(self, group_by: str, group: str, metric: str) -> tuple:
        """Mean and standard error of metric per swept value, NaNs dropped."""
        means, errs = [], []
        for v in self.values():
            vals = [float(r[metric]) for r in self.rows
                    if r[group_by] == group and r["value"] == v]
            vals = [x for x in vals if not math.isnan(x)]
            if vals:
                arr = np.asarray(vals)
                means.append(float(arr.mean()))
                errs.append(float(arr.std(ddof=1) / np.sqrt(arr.size))
                            if arr.size > 1 else 0.0)
            else:
                means.append(float("nan"))
                errs.append(0.0)
        return np.asarray(means), np.asarray(errs)


def _axis_positions(values: list) -> tuple:
    """Numeric x positions if every value parses as a number, else ordinal."""
    try:
        return np.asarray([float(v) for v in values]), [str(v) for v in values]
    except ValueError:
        return np.arange(len(values), dtype=float), [str(v) for v in values]


def _load_traces(path: Path) -> list:
    """(label, objective trace) pairs from a report or trace-collection JSON."""
    with open(path) as fh:
        doc = json.load(fh)
    if "report" in doc:  # single solve report
        rep = doc["report"]
        return [(str(rep.get("algorithm", "solver")), rep["obj_trace"])]
    # sweep trace collection: scheme|param=value|seed=n -> report dict
    picked = {}
    for key in sorted(doc):
        rep = doc[key]
        if "obj_trace" not in rep:
            continue
        scheme = key.split("|", 1)[0]
        # one representative line per scheme: the last swept value,
        # lowest seed, relying on the sorted key order
        picked[scheme] = (key, rep["obj_trace"])
    if not picked:
        raise ValueError(f"{path} holds no objective traces")
    out = []
    for scheme in sorted(picked):
        key, trace = picked[scheme]
        value = key.split("|")[1] if "|" in key else ""
        label = f"{scheme} ({value})" if value else scheme
        out.append((label, trace))
    return out


# -- figure builders -----------------------------------------------------------

def _convergence_figure(spec: FigureSpec) -> Figure:
    traces = _load_traces(spec.source)
    fig = Figure()
    ax = fig.add_subplot()
    for label, trace in traces:
        ax.plot(np.arange(len(trace)), trace, label=label)
    ax.set_xlabel("outer iteration")
    ax.set_ylabel(_label("sum_rate_bps_hz"))
    ax.legend()
    fig.tight_layout()
    return fig


def _sweep_lines_figure(spec: FigureSpec) -> Figure:
    table = SweepTable.read(spec.source,
                            needed=("param", "value", spec.group_by,
                                    spec.metric))
    x, ticks = _axis_positions(table.values())
    fig = Figure()
    ax = fig.add_subplot()
    for group in table.groups(spec.group_by):
        mean, err = table.series(spec.group_by, group, spec.metric)
        ax.errorbar(x, mean, yerr=err, marker="o", capsize=3, label=group)
    ax.set_xticks(x, ticks)
    ax.set_xlabel(_label(table.param))
    ax.set_ylabel(_label(spec.metric))
    ax.legend()
    fig.tight_layout()
    return fig


def _ul_dl_figure(spec: FigureSpec) -> Figure:
    table = SweepTable.read(spec.source,
                            needed=("param", "value", spec.group_by,
                                    "ul_rate_bps_hz", "dl_rate_bps_hz"))
    x, ticks = _axis_positions(table.values())
    fig = Figure(figsize=(6.4, 6.0))
    axes = fig.subplots(2, 1, sharex=True)
    for ax, metric, title in zip(axes,
                                 ("ul_rate_bps_hz", "dl_rate_bps_hz"),
                                 ("uplink", "downlink")):
        for group in table.groups(spec.group_by):
            mean, err = table.series(spec.group_by, group, metric)
            ax.errorbar(x, mean, yerr=err, marker="o", capsize=3,
                        label=group)
        ax.set_ylabel(_label(metric))
        ax.set_title(title)
    axes[1].set_xticks(x, ticks)
    axes[1].set_xlabel(_label(table.param))
    axes[0].legend()
    fig.tight_layout()
    return fig


_BUILDERS = {
    "convergence": _convergence_figure,
    "sweep-lines": _sweep_lines_figure,
    "ul-dl-split": _ul_dl_figure,
}


def figure_for(spec: FigureSpec) -> Figure:
    """Build the figure for a spec without writing it; used by tests too."""
    if not spec.source.exists():
        raise FileNotFoundError(f"input {spec.source} does not exist")
    with rc_context(_STYLE):
        return _BUILDERS[spec.kind](spec)


def render(spec: FigureSpec) -> Path:
    """Render one figure spec to its output path and return the path."""
    fig = figure_for(spec)
    spec.output.parent.mkdir(parents=True, exist_ok=True)
    with rc_context(_STYLE):
        # a None date keeps SVG output free of the render timestamp
        metadata = {"Date": None} if spec.output.suffix == ".svg" else None
        fig.savefig(spec.output, metadata=metadata)
    return spec.output


# -- command-line facing entry points -----------------------------------------

def render_sweep_figures(csv_path, out_dir, traces=None,
                         image_format: str = "png") -> list:
    """Standard figure set for one sweep directory.

    Always renders the sum-rate lines and the uplink/downlink split; adds
    a convergence figure when a trace collection is supplied. Returns the
    written paths.
    """
    csv_path = Path(csv_path)
    out_dir = Path(out_dir)
    specs = [
        FigureSpec("sweep-lines", csv_path,
                   out_dir / f"sweep_rates.{image_format}"),
        FigureSpec("ul-dl-split", csv_path,
                   out_dir / f"sweep_ul_dl.{image_format}"),
    ]
    if traces is not None and Path(traces).exists():
        specs.append(FigureSpec("convergence", Path(traces),
                                out_dir / f"sweep_convergence.{image_format}"))
    return [render(s) for s in specs]


def render_convergence_figure(report_path, out_dir,
                              image_format: str = "png") -> list:
    """Objective-versus-iteration figure for one solve report."""
    spec = FigureSpec("convergence", Path(report_path),
                      Path(out_dir) / f"convergence.{image_format}")
    return [render(spec)]
