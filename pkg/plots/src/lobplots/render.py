"""Deterministic figure rendering from experiment CSV files.

A figure spec (JSON) names one or more input CSVs, a figure kind, the
output image path and optional axis labels and series filters.  Rendering
is a pure function of the CSV bytes and the spec: fixed canvas size,
fixed series ordering and pinned PNG metadata make reruns byte-identical.
Alongside each image a manifest records the SHA-256 of every input.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

FIGURE_KINDS = (
    "value-vs-imbalance",
    "improvement",
    "duration",
    "stay-ratio",
    "horizon",
    "latency",
    "predictive-power",
    "price-profile",
)

STAY_COLOR = "tab:blue"
CANCEL_COLOR = "tab:red"
BASELINE_COLOR = "0.55"

FIGSIZE = (7.0, 4.5)
DPI = 110


class SpecError(ValueError):
    """Raised for malformed specs or unusable input tables."""


@dataclass(frozen=True)
class FigureSpec:
    inputs: tuple[str, ...]
    kind: str
    output: str
    xlabel: Optional[str] = None
    ylabel: Optional[str] = None
    series_filter: dict = field(default_factory=dict)

    @staticmethod
    def from_dict(doc: dict, base_dir: str = ".") -> "FigureSpec":
        allowed = {"inputs", "kind", "output", "xlabel", "ylabel", "filter"}
        extra = set(doc) - allowed
        if extra:
            raise SpecError(f"unknown spec keys: {sorted(extra)}")
        for key in ("inputs", "kind", "output"):
            if key not in doc:
                raise SpecError(f"spec is missing {key!r}")
        kind = doc["kind"]
        if kind not in FIGURE_KINDS:
            raise SpecError(f"unknown figure kind {kind!r} (expected one of {FIGURE_KINDS})")
        inputs = doc["inputs"]
        if isinstance(inputs, str):
            inputs = [inputs]
        if not inputs:
            raise SpecError("spec needs at least one input CSV")
        resolve = lambda p: p if os.path.isabs(p) else os.path.join(base_dir, p)
        series_filter = doc.get("filter", {})
        if not isinstance(series_filter, dict):
            raise SpecError("'filter' must be an object")
        return FigureSpec(
            inputs=tuple(resolve(p) for p in inputs),
            kind=kind,
            output=resolve(doc["output"]),
            xlabel=doc.get("xlabel"),
            ylabel=doc.get("ylabel"),
            series_filter=series_filter,
        )


def load_spec(path: str) -> FigureSpec:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise SpecError(f"cannot read spec {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SpecError(f"invalid JSON in {path}: {exc}") from exc
    return FigureSpec.from_dict(doc, base_dir=os.path.dirname(os.path.abspath(path)))


def _read_table(path: str) -> list[dict]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise SpecError(f"cannot read input CSV {path}: {exc}") from exc
    if not rows:
        raise SpecError(f"input CSV {path} has no data rows")
    return rows


def _need_columns(rows: list[dict], columns: list[str], path: str) -> None:
    missing = [c for c in columns if c not in rows[0]]
    if missing:
        raise SpecError(f"missing columns {missing} in {path}")


def _apply_filter(rows: list[dict], series_filter: dict, path: str) -> list[dict]:
    if not series_filter:
        return rows
    _need_columns(rows, list(series_filter), path)
    kept = []
    for row in rows:
        ok = True
        for key, wanted in series_filter.items():
            got = row[key]
            if isinstance(wanted, (int, float)):
                ok = ok and float(got) == float(wanted)
            else:
                ok = ok and got == str(wanted)
        if ok:
            kept.append(row)
    if not kept:
        raise SpecError(f"filter {series_filter} matches no rows of {path}")
    return kept


def _new_axes(spec: FigureSpec, default_x: str, default_y: str):
    fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
    ax.set_xlabel(spec.xlabel or default_x)
    ax.set_ylabel(spec.ylabel or default_y)
    ax.grid(True, alpha=0.3)
    return fig, ax


def _plot_value_vs_imbalance(spec: FigureSpec, ax) -> None:
    rows = _apply_filter(_read_table(spec.inputs[0]), spec.series_filter, spec.inputs[0])
    _need_columns(rows, ["imbalance", "v_opt", "v_nc", "first_control"], spec.inputs[0])
    rows.sort(key=lambda r: (float(r["imbalance"]), r["first_control"]))
    ax.plot(
        [float(r["imbalance"]) for r in rows],
        [float(r["v_nc"]) for r in rows],
        color=BASELINE_COLOR,
        marker=".",
        linestyle="none",
        label="always stay",
    )
    for control, color in (("stay", STAY_COLOR), ("cancel", CANCEL_COLOR)):
        sub = [r for r in rows if r["first_control"] == control]
        if not sub:
            continue
        ax.plot(
            [float(r["imbalance"]) for r in sub],
            [float(r["v_opt"]) for r in sub],
            color=color,
            marker="o",
            linestyle="none",
            label=f"optimal, first step {control}",
        )
    ax.legend()


def _plot_single_series(spec: FigureSpec, ax, x_col: str, y_col: str) -> None:
    rows = _apply_filter(_read_table(spec.inputs[0]), spec.series_filter, spec.inputs[0])
    _need_columns(rows, [x_col, y_col], spec.inputs[0])
    rows.sort(key=lambda r: float(r[x_col]))
    ax.plot(
        [float(r[x_col]) for r in rows],
        [float(r[y_col]) for r in rows],
        color=STAY_COLOR,
        marker="o",
    )


def _plot_duration(spec: FigureSpec, ax) -> None:
    rows = _apply_filter(_read_table(spec.inputs[0]), spec.series_filter, spec.inputs[0])
    _need_columns(rows, ["imbalance", "duration_opt", "duration_nc"], spec.inputs[0])
    rows.sort(key=lambda r: float(r["imbalance"]))
    x = [float(r["imbalance"]) for r in rows]
    ax.plot(x, [float(r["duration_opt"]) for r in rows], color=STAY_COLOR, marker="o", label="optimal")
    ax.plot(x, [float(r["duration_nc"]) for r in rows], color=BASELINE_COLOR, marker=".", label="always stay")
    ax.legend()


def _plot_horizon(spec: FigureSpec, ax) -> None:
    rows = _apply_filter(_read_table(spec.inputs[0]), spec.series_filter, spec.inputs[0])
    _need_columns(rows, ["horizon_f", "v_opt", "stay_share", "cancel_share"], spec.inputs[0])
    rows.sort(key=lambda r: int(r["horizon_f"]))
    x = [int(r["horizon_f"]) for r in rows]
    ax.plot(x, [float(r["v_opt"]) for r in rows], color=STAY_COLOR, marker="o", label="value")
    twin = ax.twinx()
    twin.plot(x, [float(r["stay_share"]) for r in rows], color="tab:green", marker=".", label="stay share")
    twin.plot(x, [float(r["cancel_share"]) for r in rows], color=CANCEL_COLOR, marker=".", label="cancel share")
    twin.set_ylabel("share of decision epochs")
    lines_a, labels_a = ax.get_legend_handles_labels()
    lines_b, labels_b = twin.get_legend_handles_labels()
    ax.legend(lines_a + lines_b, labels_a + labels_b, loc="lower right")


def _plot_latency(spec: FigureSpec, ax) -> None:
    rows = _apply_filter(_read_table(spec.inputs[0]), spec.series_filter, spec.inputs[0])
    _need_columns(rows, ["framework", "alpha", "tau", "latency_cost"], spec.inputs[0])
    series = sorted({(r["framework"], r["alpha"]) for r in rows})
    for framework, alpha in series:
        sub = sorted(
            (r for r in rows if r["framework"] == framework and r["alpha"] == alpha),
            key=lambda r: int(r["tau"]),
        )
        ax.plot(
            [int(r["tau"]) for r in sub],
            [float(r["latency_cost"]) for r in sub],
            marker="o",
            label=f"{framework}, alpha={float(alpha):g}",
        )
    ax.legend()


def _plot_predictive_power(spec: FigureSpec, ax) -> None:
    rows = _apply_filter(_read_table(spec.inputs[0]), spec.series_filter, spec.inputs[0])
    _need_columns(rows, ["mean_imbalance", "mean_move_ticks", "count"], spec.inputs[0])
    rows = [r for r in rows if int(r["count"]) > 0]
    if not rows:
        raise SpecError(f"no populated bins in {spec.inputs[0]}")
    rows.sort(key=lambda r: float(r["mean_imbalance"]))
    ax.plot(
        [float(r["mean_imbalance"]) for r in rows],
        [float(r["mean_move_ticks"]) for r in rows],
        color=STAY_COLOR,
        marker="o",
    )
    ax.axhline(0.0, color="0.3", linewidth=0.8)


def _plot_price_profile(spec: FigureSpec, ax) -> None:
    rows = _apply_filter(_read_table(spec.inputs[0]), spec.series_filter, spec.inputs[0])
    _need_columns(rows, ["offset_ns", "value"], spec.inputs[0])
    rows.sort(key=lambda r: int(r["offset_ns"]))
    ax.plot(
        [int(r["offset_ns"]) / 1e9 for r in rows],
        [float(r["value"]) for r in rows],
        color=STAY_COLOR,
        marker="o",
    )
    ax.axvline(0.0, color="0.3", linewidth=0.8)
    ax.axhline(0.0, color="0.3", linewidth=0.8)


def build_figure(spec: FigureSpec):
    """Assemble the matplotlib figure for ``spec`` without saving it."""
    defaults = {
        "value-vs-imbalance": ("initial imbalance", "expected gain (ticks)", _plot_value_vs_imbalance),
        "improvement": ("initial imbalance", "price improvement (ticks)", lambda s, ax: _plot_single_series(s, ax, "imbalance", "improvement")),
        "duration": ("initial imbalance", "expected duration (steps)", _plot_duration),
        "stay-ratio": ("initial imbalance", "stay ratio", lambda s, ax: _plot_single_series(s, ax, "imbalance", "stay_ratio")),
        "horizon": ("horizon (steps)", "expected gain (ticks)", _plot_horizon),
        "latency": ("latency factor tau", "latency cost (ticks)", _plot_latency),
        "predictive-power": ("imbalance", "future mid move (ticks)", _plot_predictive_power),
        "price-profile": ("offset (s)", "mid move (spread units)", _plot_price_profile),
    }
    default_x, default_y, plot = defaults[spec.kind]
    fig, ax = _new_axes(spec, default_x, default_y)
    try:
        plot(spec, ax)
    except Exception:
        plt.close(fig)
        raise
    fig.tight_layout()
    return fig


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def render(spec: FigureSpec) -> str:
    """Render the figure to ``spec.output`` and write the input manifest."""
    fig = build_figure(spec)
    try:
        fig.savefig(spec.output, format="png", metadata={"Software": "lobplots"})
    finally:
        plt.close(fig)
    manifest = {
        "output": os.path.basename(spec.output),
        "kind": spec.kind,
        "inputs": {os.path.basename(p): _sha256(p) for p in spec.inputs},
    }
    manifest_path = spec.output + ".manifest.json"
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return spec.output
