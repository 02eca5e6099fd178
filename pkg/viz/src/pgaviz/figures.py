"""The five figure kinds, all pure functions of their parsed inputs.

Matplotlib output is pinned for byte-stable SVGs: fixed style, fixed
hashsalt, no date metadata. The rollout strip is written as plain SVG text
with the same world-to-image mapping the render command uses (100 units
per meter, y flipped, three decimals), so panel-local coordinates line up
with the per-frame SVGs.
"""

import math

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .data import DataError  # noqa: E402

FIGSIZE = (6.4, 4.0)
DPI = 100
PALETTE = ("#3182bd", "#e6550d", "#31a354", "#756bb1", "#636363", "#fdae6b")

FRAME_TYPE_ORDER = ("all", "free", "object_wall", "object_object")

SCALE = 100.0
PRECISION = 3
PANEL_GAP = 20.0
TRUTH_STYLE = 'fill="#9ecae1" stroke="#3182bd" stroke-width="2"'
PRED_STYLE = 'fill="none" stroke="#e6550d" stroke-width="2" stroke-dasharray="6 3"'

matplotlib.rcParams["svg.hashsalt"] = "pgaviz"


def save_figure(fig, out):
    fig.savefig(out, dpi=DPI, metadata={"Date": None} if str(out).endswith(".svg") else None)
    plt.close(fig)


def series_label(row, multi_model):
    return row["model"] if multi_model else row["variant"]


def _grouped(rows):
    """Rows keyed by series label, preserving first-seen label order."""
    multi = len({r["model"] for r in rows}) > 1
    out = {}
    for r in rows:
        out.setdefault(series_label(r, multi), []).append(r)
    return out


def _mean_ci(values):
    """Mean and 95% half-width over seeds; zero width below two samples."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size < 2:
        return float(arr.mean()), 0.0
    sem = arr.std(ddof=1) / math.sqrt(arr.size)
    return float(arr.mean()), 1.96 * float(sem)


def plot_rmse_by_type(rows, out):
    """Grouped bars: rollout RMSE per frame type, one bar group per series."""
    rows = [r for r in rows if r["variable"] == "all" and r["rmse"] is not None]
    if not rows:
        raise DataError("no rmse rows to plot")
    present = {r["frame_type"] for r in rows}
    types = [t for t in FRAME_TYPE_ORDER if t in present]
    groups = _grouped(rows)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    width = 0.8 / len(groups)
    base = np.arange(len(types))
    for i, (label, series) in enumerate(groups.items()):
        means, halfs = [], []
        for t in types:
            vals = [r["rmse"] for r in series if r["frame_type"] == t]
            m, h = _mean_ci(vals) if vals else (0.0, 0.0)
            means.append(m)
            halfs.append(h)
        ax.bar(
            base + i * width, means, width, yerr=halfs, capsize=3,
            label=label, color=PALETTE[i % len(PALETTE)],
        )
    ax.set_xticks(base + 0.4 - width / 2)
    ax.set_xticklabels([t.replace("_", "-") for t in types])
    ax.set_ylabel("rollout RMSE")
    ax.legend()
    save_figure(fig, out)


def plot_horizon_curves(rows, out, ci=True):
    """RMSE versus rollout horizon, one line per series, optional CI band."""
    rows = [
        r for r in rows
        if r["variable"] == "all" and r["frame_type"] == "all" and r["rmse"] is not None
    ]
    if not rows:
        raise DataError("no rmse rows to plot")
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for i, (label, series) in enumerate(_grouped(rows).items()):
        horizons = sorted({r["horizon"] for r in series})
        means, halfs = [], []
        for h in horizons:
            m, w = _mean_ci([r["rmse"] for r in series if r["horizon"] == h])
            means.append(m)
            halfs.append(w)
        color = PALETTE[i % len(PALETTE)]
        ax.plot(horizons, means, marker="o", label=label, color=color)
        if ci and any(halfs):
            lo = np.array(means) - np.array(halfs)
            hi = np.array(means) + np.array(halfs)
            ax.fill_between(horizons, lo, hi, color=color, alpha=0.2, linewidth=0)
    ax.set_xlabel("rollout horizon (frames)")
    ax.set_ylabel("rollout RMSE")
    ax.legend()
    save_figure(fig, out)


def plot_euler(rows, out, variable="all"):
    """Local one-step dynamics error versus horizon for one variable panel."""
    rows = [
        r for r in rows
        if r["variable"] == variable and r["frame_type"] == "all"
        and r["euler_rmse"] is not None
    ]
    if not rows:
        raise DataError(f"no euler rows for variable {variable!r}")
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for i, (label, series) in enumerate(_grouped(rows).items()):
        horizons = sorted({r["horizon"] for r in series})
        means = [
            _mean_ci([r["euler_rmse"] for r in series if r["horizon"] == h])[0]
            for h in horizons
        ]
        ax.plot(horizons, means, marker="o", label=label, color=PALETTE[i % len(PALETTE)])
    ax.set_xlabel("rollout horizon (frames)")
    ax.set_ylabel(f"Euler RMSE ({variable})")
    ax.legend()
    save_figure(fig, out)


def epochs_to_match(curve, baseline_curve):
    """First 1-based epoch at or below the baseline's best; inf if never."""
    best = min(baseline_curve)
    for epoch, value in enumerate(curve, start=1):
        if value <= best:
            return epoch
    return math.inf


def plot_sample_efficiency(curves, baseline, out):
    """Bars of epochs needed to reach the named baseline's best loss.

    curves: mapping of series name to per-epoch loss list. Series that
    never match are drawn at their full epoch count and annotated.
    """
    if baseline not in curves:
        raise DataError(f"baseline {baseline!r} not among {sorted(curves)}")
    if not curves:
        raise DataError("no loss curves to plot")
    names = list(curves)
    epochs = [epochs_to_match(curves[n], curves[baseline]) for n in names]
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for i, (name, e) in enumerate(zip(names, epochs)):
        height = len(curves[name]) if math.isinf(e) else e
        ax.bar(i, height, 0.6, color=PALETTE[i % len(PALETTE)])
        if math.isinf(e):
            ax.annotate("no match", (i, height), ha="center", va="bottom")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names)
    ax.set_ylabel(f"epochs to reach best of {baseline}")
    save_figure(fig, out)


def _fmt(value):
    text = f"{value:.{PRECISION}f}"
    return "0.000" if text == "-0.000" else text


def _to_svg(x, y, arena):
    xmin, ymin, _, ymax = arena
    return (x - xmin) * SCALE, (ymax - y) * SCALE


def _body(shape, state, arena, style):
    x, y = _to_svg(state[0], state[1], arena)
    if shape[0] == "circle":
        return (
            f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" '
            f'r="{_fmt(shape[1] * SCALE)}" {style}/>'
        )
    w, h = 2 * shape[1] * SCALE, 2 * shape[2] * SCALE
    deg = math.degrees(state[4])
    return (
        f'<rect x="{_fmt(x - w / 2)}" y="{_fmt(y - h / 2)}" '
        f'width="{_fmt(w)}" height="{_fmt(h)}" '
        f'transform="rotate({_fmt(deg)} {_fmt(x)} {_fmt(y)})" {style}/>'
    )


def rollout_strip_svg(truth, shapes, frames, pred=None, pred_start=0,
                      arena=(0.0, 0.0, 4.0, 4.0)):
    """Horizontal strip of frame panels, truth filled and prediction dashed.

    truth/pred: (T, K, 6) state arrays; frames indexes into the truth and
    pred frame i maps to truth frame pred_start + i. Each panel keeps the
    render command's local coordinates, offset by a translate so the strip
    stays a single document.
    """
    truth = np.asarray(truth)
    xmin, ymin, xmax, ymax = arena
    pw = (xmax - xmin) * SCALE
    ph = (ymax - ymin) * SCALE
    for f in frames:
        if not 0 <= f < truth.shape[0]:
            raise DataError(f"frame {f} outside episode of {truth.shape[0]} frames")
        if pred is not None and not 0 <= f - pred_start < len(pred):
            raise DataError(
                f"frame {f} outside prediction covering "
                f"{pred_start}..{pred_start + len(pred) - 1}"
            )
    total_w = len(frames) * pw + (len(frames) - 1) * PANEL_GAP
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(total_w)}" '
        f'height="{_fmt(ph)}" viewBox="0 0 {_fmt(total_w)} {_fmt(ph)}">',
    ]
    for i, f in enumerate(frames):
        dx = i * (pw + PANEL_GAP)
        lines.append(f'<g transform="translate({_fmt(dx)} 0)">')
        lines.append(
            f'<rect x="0" y="0" width="{_fmt(pw)}" height="{_fmt(ph)}" '
            'fill="#ffffff" stroke="#000000" stroke-width="2"/>'
        )
        for shape, state in zip(shapes, truth[f]):
            lines.append(_body(shape, state, arena, TRUTH_STYLE))
        if pred is not None:
            for shape, state in zip(shapes, np.asarray(pred)[f - pred_start]):
                lines.append(_body(shape, state, arena, PRED_STYLE))
        lines.append(
            f'<text x="6" y="20" font-size="16" font-family="sans-serif">{f}</text>'
        )
        lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def plot_rollout_strip(truth, shapes, frames, out, pred=None, pred_start=0,
                       arena=(0.0, 0.0, 4.0, 4.0)):
    with open(out, "w") as fh:
        fh.write(
            rollout_strip_svg(
                truth, shapes, frames, pred=pred, pred_start=pred_start, arena=arena
            )
        )
