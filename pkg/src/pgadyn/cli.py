"""Command-line pipeline: generate data, train, evaluate, render."""

import argparse
import multiprocessing
import os
import sys
from pathlib import Path

import numpy as np

from . import dataset as D
from . import metrics as MT
from . import model as M
from . import physics as P
from . import render as R
from . import training as TR

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4

CIRCLE_RADIUS = 0.25
RECT_HALF_EXTENTS = (0.25, 0.15)


def parse_objects(spec):
    """'6xcircle+4xrect' to a shape list; counts first, kinds fixed-size."""
    shapes = []
    for part in spec.split("+"):
        count, sep, kind = part.partition("x")
        if not sep or not count.isdigit():
            raise ValueError(f"bad object spec part {part!r}; use e.g. 4xcircle")
        if kind == "circle":
            shape = P.Circle(CIRCLE_RADIUS)
        elif kind == "rect":
            shape = P.Rect(*RECT_HALF_EXTENTS)
        else:
            raise ValueError(f"unknown shape {kind!r}; use circle or rect")
        shapes.extend([shape] * int(count))
    return shapes


def worker_count(requested):
    cap = os.environ.get("PGDYN_THREADS")
    if cap is not None:
        return max(1, min(requested, int(cap)))
    return max(1, requested)


def _generate_one(args):
    seed, spec, frames = args
    shapes = parse_objects(spec)
    return P.sample_episode(np.random.default_rng(seed), shapes, P.WorldConfig(), frames)


def cmd_generate(args):
    parse_objects(args.objects)  # validate before spawning workers
    jobs = [(args.seed + i, args.objects, args.frames) for i in range(args.episodes)]
    workers = worker_count(args.workers)
    if workers > 1 and len(jobs) > 1:
        with multiprocessing.Pool(workers) as pool:
            episodes = pool.map(_generate_one, jobs)
    else:
        episodes = [_generate_one(job) for job in jobs]
    D.write_dataset(episodes, args.out)
    D.write_manifest(
        args.out + ".manifest",
        {
            "command": "generate",
            "objects": args.objects,
            "episodes": args.episodes,
            "frames": args.frames,
            "seed": args.seed,
        },
    )
    return EXIT_OK


def cmd_train(args):
    episodes = D.read_dataset(args.data)
    if not episodes:
        raise D.DatasetError(f"{args.data} holds no episodes")
    train_eps, val_eps = D.split(episodes, args.val_fraction, args.seed)
    objects = episodes[0].states.shape[1]
    model = M.build_variant(
        M.ModelConfig(
            variant=args.variant,
            objects=objects,
            blocks=args.blocks,
            heads=args.heads,
            mv_channels=args.channels,
            seq_len=args.seq_len,
            seed=args.seed,
        )
    )
    cfg = TR.TrainConfig(
        epochs=args.epochs,
        lr=args.lr,
        batch=args.batch,
        seed=args.seed,
        log_path=args.out + ".log.csv",
        rollout_every=args.rollout_every,
        time_budget_s=args.time_budget,
    )
    TR.train(model, train_eps, cfg, val_episodes=val_eps, sim_config=P.WorldConfig())
    M.save_model(model, args.out)
    D.write_manifest(
        args.out + ".manifest",
        {
            "command": "train",
            "variant": args.variant,
            "blocks": args.blocks,
            "heads": args.heads,
            "channels": args.channels,
            "seq_len": args.seq_len,
            "epochs": args.epochs,
            "lr": args.lr,
            "batch": args.batch,
            "seed": args.seed,
            "data": args.data,
            "params": model.store.count(),
        },
    )
    return EXIT_OK


def cmd_eval(args):
    model = M.load_model(args.ckpt)
    episodes = D.read_dataset(args.data)
    sim_cfg = P.WorldConfig()
    rows = MT.evaluate_rollouts(
        model, episodes, sim_cfg, args.horizon,
        name=Path(args.ckpt).name, seed=args.seed,
        per_type=args.per_type, euler=args.euler,
    )
    MT.write_eval_csv(args.out, rows)
    if args.dump:
        context = model.config.seq_len
        dumped = [
            P.Episode(
                model.rollout(ep.states[:context], args.horizon + 1),
                ep.labels[context : context + args.horizon + 1].copy(),
                ep.shapes,
            )
            for ep in episodes
        ]
        D.write_dataset(dumped, args.dump)
        D.write_manifest(
            args.dump + ".manifest",
            {"command": "eval", "predicted": True, "ckpt": args.ckpt,
             "horizon": args.horizon, "seed": args.seed},
        )
    return EXIT_OK


def cmd_render(args):
    episodes = D.read_dataset(args.episode)
    if not 0 <= args.index < len(episodes):
        raise D.DatasetError(f"episode index {args.index} outside dataset")
    episode = episodes[args.index]
    pred = None
    if args.pred:
        pred_eps = D.read_dataset(args.pred)
        if not 0 <= args.index < len(pred_eps):
            raise D.DatasetError(f"episode index {args.index} outside prediction file")
        pred = pred_eps[args.index].states
    frames = [int(f) for f in args.frames.split(",") if f]
    arena = P.WorldConfig().arena
    try:
        R.render_frames(episode, frames, Path(args.out), arena, pred=pred)
    except IndexError as exc:
        raise D.DatasetError(str(exc))
    return EXIT_OK


def _apply_config_file(parser, subparsers, argv):
    """key=value file values become defaults, overridable by flags."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    try:
        path = argv[idx + 1]
    except IndexError:
        parser.error("--config needs a file argument")
    rest = argv[:idx] + argv[idx + 2:]
    defaults = {}
    try:
        for line in Path(path).read_text().splitlines():
            line = line.strip()
            if line and not line.startswith("#"):
                key, _, value = line.partition("=")
                defaults[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        parser.error(f"cannot read config file: {exc}")
    for sub in subparsers.values():
        for action in sub._actions:
            if action.dest in defaults:
                value = defaults[action.dest]
                sub.set_defaults(
                    **{action.dest: action.type(value) if action.type else value}
                )
    return rest


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pgadyn",
        description="Rigid-body world models over geometric-algebra features",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample and store simulator episodes")
    g.add_argument("--objects", required=True, help='e.g. "4xcircle" or "6xcircle+4xrect"')
    g.add_argument("--episodes", type=int, required=True)
    g.add_argument("--frames", type=int, default=128)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--workers", type=int, default=1)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train a model variant on a dataset")
    t.add_argument("--variant", required=True, choices=M.VARIANTS)
    t.add_argument("--blocks", type=int, default=10)
    t.add_argument("--heads", type=int, default=8)
    t.add_argument("--channels", type=int, default=24)
    t.add_argument("--seq-len", type=int, default=2)
    t.add_argument("--epochs", type=int, default=100)
    t.add_argument("--lr", type=float, default=5e-4)
    t.add_argument("--batch", type=int, default=32)
    t.add_argument("--val-fraction", type=float, default=0.1)
    t.add_argument("--rollout-every", type=int, default=0)
    t.add_argument("--time-budget", type=float, default=0.0)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="rollout metrics for a checkpoint")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--horizon", type=int, default=35)
    e.add_argument("--per-type", action="store_true")
    e.add_argument("--euler", action="store_true")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--dump", default="", help="write predicted rollouts here")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("render", help="write SVG frames of an episode")
    r.add_argument("--episode", required=True)
    r.add_argument("--pred", default="")
    r.add_argument("--index", type=int, default=0)
    r.add_argument("--frames", default="1,3,5,7,9,11")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_render)
    return parser, {"generate": g, "train": t, "eval": e, "render": r}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subparsers = build_parser()
    argv = _apply_config_file(parser, subparsers, argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except ValueError as exc:
        if isinstance(exc, D.DatasetError) or isinstance(exc, MT.HorizonError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_DATA
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (P.SimulationDiverged, TR.TrainingDiverged) as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
