"""Plain-text SVG rendering of episode frames.

The mapping from world to image coordinates is fixed: 100 SVG units per
meter, the y axis flipped so gravity points down the page, every number
formatted to three decimals. Identical inputs give identical bytes.
"""

import math

import numpy as np

from . import physics

SCALE = 100.0
PRECISION = 3

TRUTH_STYLE = 'fill="#9ecae1" stroke="#3182bd" stroke-width="2"'
PRED_STYLE = 'fill="#fdae6b" stroke="#e6550d" stroke-width="2"'


def _fmt(value):
    text = f"{value:.{PRECISION}f}"
    return "0.000" if text == "-0.000" else text


def to_svg_coords(x, y, arena):
    """World (x, y) to SVG user units with the y axis flipped."""
    xmin, ymin, _, ymax = arena
    return (x - xmin) * SCALE, (ymax - y) * SCALE


def body_element(shape, state, arena, style):
    x, y = to_svg_coords(state[0], state[1], arena)
    if isinstance(shape, physics.Circle):
        return (
            f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" '
            f'r="{_fmt(shape.radius * SCALE)}" {style}/>'
        )
    # a counter-clockwise world rotation reads as clockwise once y is
    # flipped, which is exactly SVG's positive rotation direction
    w, h = 2 * shape.half_w * SCALE, 2 * shape.half_h * SCALE
    deg = math.degrees(state[4])
    return (
        f'<rect x="{_fmt(x - w / 2)}" y="{_fmt(y - h / 2)}" '
        f'width="{_fmt(w)}" height="{_fmt(h)}" '
        f'transform="rotate({_fmt(deg)} {_fmt(x)} {_fmt(y)})" {style}/>'
    )


def frame_svg(states, shapes, arena, style=TRUTH_STYLE):
    """One frame of K object states as a standalone SVG document."""
    states = np.asarray(states)
    xmin, ymin, xmax, ymax = arena
    width = _fmt((xmax - xmin) * SCALE)
    height = _fmt((ymax - ymin) * SCALE)
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" '
        'fill="#ffffff" stroke="#000000" stroke-width="2"/>',
    ]
    for shape, state in zip(shapes, states):
        lines.append(body_element(shape, state, arena, style))
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def render_frames(episode, frames, outdir, arena, pred=None):
    """Write frame_NNNN.svg files (and _pred companions) to outdir.

    episode: ground-truth Episode; pred: optional (T, K, 6) predictions
    aligned with the same frame indices.
    """
    outdir.mkdir(parents=True, exist_ok=True)
    total = episode.states.shape[0]
    written = []
    for f in frames:
        if not 0 <= f < total:
            raise IndexError(f"frame {f} outside episode of {total} frames")
        path = outdir / f"frame_{f:04d}.svg"
        path.write_text(frame_svg(episode.states[f], episode.shapes, arena))
        written.append(path)
        if pred is not None:
            if f >= pred.shape[0]:
                raise IndexError(f"frame {f} outside prediction of {pred.shape[0]} frames")
            ppath = outdir / f"frame_{f:04d}_pred.svg"
            ppath.write_text(
                frame_svg(pred[f], episode.shapes, arena, style=PRED_STYLE)
            )
            written.append(ppath)
    return written
