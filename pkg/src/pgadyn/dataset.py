"""Episode serialization and dataset splits.

File layout (all integers little-endian uint32 unless noted):

    magic b"PGDY" | version | N episodes | T frames | K objects | n_vars
    shape table: K records of (kind: uint32, p0: f32, p1: f32)
                 kind 0 = circle (p0 radius), kind 1 = rect (half extents)
    per episode, in order:
        states  T*K*n_vars float32, frame-major then object-major, variables
                ordered (x, y, vx, vy, angle, omega)
        labels  T bytes, bit0 = wall contact, bit1 = object contact

Simulation runs in float64; writing is the one down-conversion point.
"""

import hashlib
import struct

import numpy as np

from . import physics

MAGIC = b"PGDY"
VERSION = 1
N_VARS = 6

_CIRCLE, _RECT = 0, 1


class DatasetError(ValueError):
    """Malformed or truncated dataset file."""


def _shape_record(shape):
    if isinstance(shape, physics.Circle):
        return _CIRCLE, shape.radius, 0.0
    if isinstance(shape, physics.Rect):
        return _RECT, shape.half_w, shape.half_h
    raise DatasetError(f"unserializable shape {type(shape).__name__}")


def _shape_from_record(kind, p0, p1):
    if kind == _CIRCLE:
        return physics.Circle(p0)
    if kind == _RECT:
        return physics.Rect(p0, p1)
    raise DatasetError(f"unknown shape kind {kind}")


def write_dataset(episodes, path):
    """Serialize episodes sharing one (T, K, shapes) signature."""
    episodes = list(episodes)
    if episodes:
        frames, objects = episodes[0].states.shape[:2]
        shapes = episodes[0].shapes
        for ep in episodes:
            if ep.states.shape != (frames, objects, N_VARS) or list(ep.shapes) != list(shapes):
                raise DatasetError("episodes disagree on frame count, objects or shapes")
    else:
        frames, objects, shapes = 0, 0, []
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<5I", VERSION, len(episodes), frames, objects, N_VARS))
        for shape in shapes:
            fh.write(struct.pack("<I2f", *_shape_record(shape)))
        for ep in episodes:
            fh.write(ep.states.astype("<f4").tobytes())
            fh.write(ep.labels.astype(np.uint8).tobytes())


def _read_exact(fh, n, what):
    buf = fh.read(n)
    if len(buf) != n:
        raise DatasetError(f"truncated file while reading {what}")
    return buf


def read_dataset(path):
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "magic") != MAGIC:
            raise DatasetError("bad magic; not a dataset file")
        version, n, frames, objects, n_vars = struct.unpack(
            "<5I", _read_exact(fh, 20, "header")
        )
        if version != VERSION:
            raise DatasetError(f"unsupported format version {version}")
        if n_vars != N_VARS:
            raise DatasetError(f"expected {N_VARS} variables per object, got {n_vars}")
        shapes = []
        for _ in range(objects):
            kind, p0, p1 = struct.unpack("<I2f", _read_exact(fh, 12, "shape table"))
            shapes.append(_shape_from_record(kind, p0, p1))
        episodes = []
        state_bytes = frames * objects * N_VARS * 4
        for i in range(n):
            states = np.frombuffer(
                _read_exact(fh, state_bytes, f"episode {i} states"), dtype="<f4"
            ).reshape(frames, objects, N_VARS)
            labels = np.frombuffer(
                _read_exact(fh, frames, f"episode {i} labels"), dtype=np.uint8
            )
            episodes.append(physics.Episode(states.astype(np.float64), labels.copy(), shapes))
        if fh.read(1):
            raise DatasetError("trailing bytes after declared payload")
    return episodes


def split(episodes, val_fraction, seed):
    """Deterministic episode-level split; no episode lands in both parts."""
    if not 0.0 <= val_fraction <= 1.0:
        raise ValueError("val_fraction must be in [0, 1]")
    episodes = list(episodes)
    order = np.random.default_rng(seed).permutation(len(episodes))
    n_val = round(len(episodes) * val_fraction)
    val_idx = set(order[:n_val].tolist())
    train = [ep for i, ep in enumerate(episodes) if i not in val_idx]
    val = [ep for i, ep in enumerate(episodes) if i in val_idx]
    return train, val


def config_hash(entries):
    """Stable short hash of a manifest's key/value pairs."""
    text = "\n".join(f"{k}={entries[k]}" for k in sorted(entries))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def write_manifest(path, entries):
    """Human-readable key=value companion file with a config hash line."""
    entries = dict(entries)
    entries["config_hash"] = config_hash(entries)
    with open(path, "w") as fh:
        for key in sorted(entries):
            fh.write(f"{key}={entries[key]}\n")
    return entries["config_hash"]


def read_manifest(path):
    entries = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                key, _, value = line.partition("=")
                entries[key] = value
    return entries
