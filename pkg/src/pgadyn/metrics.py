"""Rollout and local-dynamics error metrics.

Per-object error variables are (x, y, vx, vy, sin angle, cos angle, omega);
the angle enters through its rotor components so wrap-around never produces
spurious error mass.
"""

import csv
import math

import numpy as np

from . import physics

VARIABLE_NAMES = ("x", "y", "vx", "vy", "sin_angle", "cos_angle", "omega")
FRAME_TYPES = ("free", "object_wall", "object_object")

EVAL_COLUMNS = (
    "model", "variant", "seed", "horizon", "frame_type", "variable",
    "rmse", "euler_rmse",
)


class HorizonError(ValueError):
    """Requested horizon exceeds the available frames."""


def state_variables(states):
    """(…, 6) states to the (…, 7) error-variable vector."""
    states = np.asarray(states, dtype=np.float64)
    out = np.empty(states.shape[:-1] + (7,))
    out[..., :4] = states[..., :4]
    out[..., 4] = np.sin(states[..., 4])
    out[..., 5] = np.cos(states[..., 4])
    out[..., 6] = states[..., 5]
    return out


def frame_sq_errors(preds, targets):
    """(T,) per-frame squared-error mass summed over objects and variables."""
    preds, targets = np.asarray(preds), np.asarray(targets)
    if preds.shape != targets.shape:
        raise ValueError(f"shape mismatch {preds.shape} vs {targets.shape}")
    diff = state_variables(preds) - state_variables(targets)
    return np.sum(diff * diff, axis=(-2, -1))


def _normalize(sq_mass, frames, objects, variables=7):
    return math.sqrt(sq_mass / (max(frames, 1) * objects * variables))


def rollout_rmse(preds, targets, horizon):
    """RMSE over frames 0..horizon of all objects' variables.

    horizon 0 is the single-frame boundary case: frame 0's RMSE.
    """
    preds, targets = np.asarray(preds), np.asarray(targets)
    if horizon >= preds.shape[0] or horizon >= targets.shape[0]:
        raise HorizonError(
            f"horizon {horizon} needs {horizon + 1} frames, "
            f"got {min(preds.shape[0], targets.shape[0])}"
        )
    mass = float(np.sum(frame_sq_errors(preds, targets)[: horizon + 1]))
    return _normalize(mass, horizon, preds.shape[1])


def euler_steps(preds, shapes, config):
    """(T-1, K, 6) one-simulator-step images of frames 0..T-2."""
    preds = np.asarray(preds, dtype=np.float64)
    out = np.empty((preds.shape[0] - 1,) + preds.shape[1:])
    for t in range(preds.shape[0] - 1):
        world = physics.world_from_states(preds[t], shapes, config)
        stepped, _ = physics.step(world)
        out[t] = physics.state_array(stepped)
    return out


def euler_rmse(preds, shapes, config, horizon, variables=None):
    """Local dynamics error: each frame t compared against one ground-truth
    simulator step from the predicted frame t-1.

    variables: optional index list into the 7 error variables (a single
    index isolates one panel, e.g. sin of the angle).
    """
    preds = np.asarray(preds, dtype=np.float64)
    if horizon >= preds.shape[0]:
        raise HorizonError(f"horizon {horizon} needs {horizon + 1} frames")
    stepped = euler_steps(preds[: horizon + 1], shapes, config)
    diff = state_variables(preds[1 : horizon + 1]) - state_variables(stepped)
    if variables is not None:
        diff = diff[..., list(variables)]
    mass = float(np.sum(diff * diff))
    return _normalize(mass, horizon, preds.shape[1], diff.shape[-1])


def rmse_by_frame_type(preds, targets, labels):
    """RMSE restricted to frames carrying each contact label.

    A frame with both collision labels counts in both entries; a type with
    no frames maps to None rather than zero.
    """
    preds, targets = np.asarray(preds), np.asarray(targets)
    labels = np.asarray(labels)
    if labels.shape[0] != preds.shape[0]:
        raise ValueError("one label byte per frame required")
    sq = frame_sq_errors(preds, targets)
    masks = {
        "free": labels == 0,
        "object_wall": (labels & physics.LABEL_WALL) != 0,
        "object_object": (labels & physics.LABEL_OBJECT) != 0,
    }
    out = {}
    for kind, mask in masks.items():
        n = int(np.count_nonzero(mask))
        if n == 0:
            out[kind] = None
        else:
            out[kind] = _normalize(float(np.sum(sq[mask])), n, preds.shape[1])
    return out


def sample_efficiency(curve_model, curve_baseline):
    """First 1-based epoch where the model's metric reaches the baseline's
    best; math.inf if it never does."""
    best = min(curve_baseline)
    for epoch, value in enumerate(curve_model, start=1):
        if value <= best:
            return epoch
    return math.inf


def ci_bands(runs):
    """Per-point mean and normal-approximation 95% interval half-width."""
    runs = np.asarray(runs, dtype=np.float64)
    if runs.ndim != 2:
        raise ValueError("expected (seeds, points)")
    mean = runs.mean(axis=0)
    if runs.shape[0] < 2:
        return mean, np.zeros_like(mean)
    sem = runs.std(axis=0, ddof=1) / math.sqrt(runs.shape[0])
    return mean, 1.96 * sem


def write_eval_csv(path, rows):
    """Rows are dicts over EVAL_COLUMNS; missing metrics stay empty."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=EVAL_COLUMNS)
        writer.writeheader()
        for row in rows:
            out = dict(row)
            for key, val in out.items():
                if val is None:
                    out[key] = ""
            writer.writerow(out)


def read_eval_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def evaluate_rollouts(model, episodes, config, horizon, name="model", seed=0,
                      per_type=False, euler=False):
    """Roll the model out on each episode's own context and aggregate the
    eval rows; per-frame error mass is pooled across episodes."""
    total_sq = 0.0
    frames = 0
    objects = None
    type_mass = {k: [0.0, 0] for k in FRAME_TYPES}
    euler_mass = 0.0
    euler_frames = 0
    context = model.config.seq_len
    for ep in episodes:
        if context + horizon + 1 > ep.states.shape[0]:
            raise HorizonError(
                f"episode of {ep.states.shape[0]} frames cannot supply a "
                f"{context}-frame context plus horizon {horizon}"
            )
        objects = ep.states.shape[1]
        preds = model.rollout(ep.states[:context], horizon + 1)
        targets = ep.states[context : context + horizon + 1]
        sq = frame_sq_errors(preds, targets)
        total_sq += float(np.sum(sq))
        frames += max(horizon, 1)
        if per_type:
            labels = ep.labels[context : context + horizon + 1]
            for kind, mask in (
                ("free", labels == 0),
                ("object_wall", (labels & physics.LABEL_WALL) != 0),
                ("object_object", (labels & physics.LABEL_OBJECT) != 0),
            ):
                type_mass[kind][0] += float(np.sum(sq[mask]))
                type_mass[kind][1] += int(np.count_nonzero(mask))
        if euler:
            stepped = euler_steps(preds, ep.shapes, config)
            diff = state_variables(preds[1:]) - state_variables(stepped)
            euler_mass += float(np.sum(diff * diff))
            euler_frames += max(horizon, 1)
    base = {
        "model": name,
        "variant": model.config.variant,
        "seed": seed,
        "horizon": horizon,
        "variable": "all",
    }
    rows = [
        dict(
            base,
            frame_type="all",
            rmse=_normalize(total_sq, frames, objects),
            euler_rmse=_normalize(euler_mass, euler_frames, objects) if euler else None,
        )
    ]
    if per_type:
        for kind in FRAME_TYPES:
            mass, n = type_mass[kind]
            rows.append(
                dict(
                    base,
                    frame_type=kind,
                    rmse=_normalize(mass, n, objects) if n else None,
                    euler_rmse=None,
                )
            )
    return rows
