"""Figure CLI: one subcommand per figure kind, --out picks the image path."""

import argparse
import sys

from . import data as D
from . import figures as F

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3


def parse_frames(text):
    try:
        return [int(part) for part in text.split(",") if part]
    except ValueError as exc:
        raise ValueError(f"bad frame list {text!r}; use e.g. 1,3,5") from exc


def parse_named_logs(pairs):
    """name=path arguments to an ordered {name: loss curve} mapping."""
    curves = {}
    for pair in pairs:
        name, sep, path = pair.partition("=")
        if not sep or not name:
            raise ValueError(f"bad log spec {pair!r}; use name=path")
        curves[name] = D.loss_curve(D.read_training_log(path))
    return curves


def cmd_rmse_by_type(args):
    F.plot_rmse_by_type(D.read_eval_csv(args.csv), args.out)
    return EXIT_OK


def cmd_horizon(args):
    F.plot_horizon_curves(D.read_eval_csv(args.csv), args.out, ci=not args.no_ci)
    return EXIT_OK


def cmd_euler(args):
    F.plot_euler(D.read_eval_csv(args.csv), args.out, variable=args.variable)
    return EXIT_OK


def cmd_sample_efficiency(args):
    curves = parse_named_logs(args.logs)
    F.plot_sample_efficiency(curves, args.baseline, args.out)
    return EXIT_OK


def cmd_rollout_strip(args):
    episodes = D.read_episodes(args.episode)
    if not 0 <= args.index < len(episodes):
        raise D.DataError(f"episode index {args.index} outside file of {len(episodes)}")
    truth, _, shapes = episodes[args.index]
    pred = None
    if args.pred:
        preds = D.read_episodes(args.pred)
        if not 0 <= args.pred_index < len(preds):
            raise D.DataError(
                f"prediction index {args.pred_index} outside file of {len(preds)}"
            )
        pred = preds[args.pred_index][0]
    F.plot_rollout_strip(
        truth, shapes, parse_frames(args.frames), args.out,
        pred=pred, pred_start=args.pred_start,
    )
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pgaviz", description="Figures for rigid-body rollout experiments"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("rmse-by-type", help="RMSE bars per collision frame type")
    b.add_argument("csv")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_rmse_by_type)

    h = sub.add_parser("horizon", help="RMSE versus rollout horizon with CI bands")
    h.add_argument("csv")
    h.add_argument("--no-ci", action="store_true")
    h.add_argument("--out", required=True)
    h.set_defaults(func=cmd_horizon)

    e = sub.add_parser("euler", help="one-step dynamics error versus horizon")
    e.add_argument("csv")
    e.add_argument("--variable", default="all")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_euler)

    s = sub.add_parser(
        "sample-efficiency", help="epochs each model needs to match a baseline"
    )
    s.add_argument("logs", nargs="+", help="name=path training log pairs")
    s.add_argument("--baseline", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sample_efficiency)

    r = sub.add_parser("rollout-strip", help="side-by-side truth/prediction frames")
    r.add_argument("--episode", required=True)
    r.add_argument("--pred", default="")
    r.add_argument("--index", type=int, default=0)
    r.add_argument("--pred-index", type=int, default=0)
    r.add_argument("--pred-start", type=int, default=0,
                   help="truth frame that prediction frame 0 corresponds to")
    r.add_argument("--frames", default="1,3,5,7,9,11")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_rollout_strip)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except D.DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
