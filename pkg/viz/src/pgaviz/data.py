"""Typed readers for the experiment file formats.

Three inputs are understood, all by their documented layout rather than by
importing the producing package:

- eval CSV: model, variant, seed, horizon, frame_type, variable, rmse,
  euler_rmse; empty cells mean "metric not computed".
- training log CSV: epoch, split, loss, rmse_10, rmse_free, rmse_wall,
  rmse_obj, wall_clock_s.
- episode file: magic b"PGDY", uint32 header (version, N, T, K, n_vars),
  a K-record shape table (kind uint32, two float32 params; 0 = circle,
  1 = rect), then per episode T*K*n_vars float32 states in
  (x, y, vx, vy, angle, omega) order and T contact-label bytes.
  All integers and floats little-endian.
"""

import csv
import struct

import numpy as np

EVAL_COLUMNS = (
    "model", "variant", "seed", "horizon", "frame_type", "variable",
    "rmse", "euler_rmse",
)
LOG_COLUMNS = (
    "epoch", "split", "loss", "rmse_10", "rmse_free", "rmse_wall",
    "rmse_obj", "wall_clock_s",
)

MAGIC = b"PGDY"
VERSION = 1


class DataError(ValueError):
    """Missing, empty or malformed input file."""


def _float_or_none(cell):
    return None if cell in ("", None) else float(cell)


def read_eval_csv(path):
    """Eval rows with seed/horizon as ints and metrics as float or None."""
    with open(path, newline="") as fh:
        raw = list(csv.DictReader(fh))
    if not raw:
        raise DataError(f"{path}: no data rows")
    missing = set(EVAL_COLUMNS) - set(raw[0])
    if missing:
        raise DataError(f"{path}: missing columns {sorted(missing)}")
    rows = []
    for r in raw:
        rows.append(
            {
                "model": r["model"],
                "variant": r["variant"],
                "seed": int(r["seed"]),
                "horizon": int(r["horizon"]),
                "frame_type": r["frame_type"],
                "variable": r["variable"],
                "rmse": _float_or_none(r["rmse"]),
                "euler_rmse": _float_or_none(r["euler_rmse"]),
            }
        )
    return rows


def read_training_log(path):
    """Training log rows; loss as float, epoch as int."""
    with open(path, newline="") as fh:
        raw = list(csv.DictReader(fh))
    if not raw:
        raise DataError(f"{path}: no data rows")
    missing = set(LOG_COLUMNS) - set(raw[0])
    if missing:
        raise DataError(f"{path}: missing columns {sorted(missing)}")
    return [
        {
            "epoch": int(r["epoch"]),
            "split": r["split"],
            "loss": float(r["loss"]),
        }
        for r in raw
    ]


def loss_curve(rows, split=None):
    """Per-epoch loss list; prefers the val split when present."""
    splits = {r["split"] for r in rows}
    if split is None:
        split = "val" if "val" in splits else "train"
    curve = [r["loss"] for r in rows if r["split"] == split]
    if not curve:
        raise DataError(f"no rows for split {split!r}")
    return curve


def _read_exact(fh, n, what):
    buf = fh.read(n)
    if len(buf) != n:
        raise DataError(f"truncated file while reading {what}")
    return buf


def read_episodes(path):
    """Episode file to a list of (states, labels, shapes) tuples.

    states: (T, K, 6) float64; labels: (T,) uint8; shapes: list of
    ("circle", radius) or ("rect", half_w, half_h).
    """
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "magic") != MAGIC:
            raise DataError(f"{path}: bad magic; not an episode file")
        version, n, frames, objects, n_vars = struct.unpack(
            "<5I", _read_exact(fh, 20, "header")
        )
        if version != VERSION:
            raise DataError(f"{path}: unsupported format version {version}")
        shapes = []
        for _ in range(objects):
            kind, p0, p1 = struct.unpack("<I2f", _read_exact(fh, 12, "shape table"))
            if kind == 0:
                shapes.append(("circle", p0))
            elif kind == 1:
                shapes.append(("rect", p0, p1))
            else:
                raise DataError(f"{path}: unknown shape kind {kind}")
        episodes = []
        state_bytes = frames * objects * n_vars * 4
        for i in range(n):
            states = np.frombuffer(
                _read_exact(fh, state_bytes, f"episode {i} states"), dtype="<f4"
            ).reshape(frames, objects, n_vars)
            labels = np.frombuffer(
                _read_exact(fh, frames, f"episode {i} labels"), dtype=np.uint8
            )
            episodes.append((states.astype(np.float64), labels.copy(), shapes))
    return episodes
