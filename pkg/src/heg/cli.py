"""Command-line surface: synth | build-graph | train | eval | ablate | gradcheck.

Option precedence is explicit flag > --config JSON file > built-in default;
the fully resolved settings are echoed to <out>/config.json.  Relative
--out paths are rooted at $HEG_OUT_ROOT when that is set, and $HEG_THREADS
supplies the default worker count for ablate.

Exit codes: 0 success, 1 usage, 2 data problem, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .ablation import GRIDS, ablate, accuracy_regressions, format_table
from .aggregators import KIND_ORDER, validate_kinds
from .checkpoint import load_checkpoint
from .errors import DataError, FormatError, HegError, NumericError
from .evaluation import evaluate, format_report, report_to_dict, write_report
from .graph import count_stats, save_graph
from .pooling import POOLING_MODES
from .synth import TASKS, SynthSpec, gaussian_dataset, generate, load_dataset, write_dataset
from .training import TrainConfig, build_graphs, gradient_check, init_model, train


class _Parser(argparse.ArgumentParser):
    """argparse parser that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


_TRAIN_DEFAULTS = {
    "kinds": ",".join(KIND_ORDER),
    "pooling": "feature_gated_attention",
    "compression": True,
    "activation": "relu",
    "std_epsilon": 1e-5,
    "learning_rate": 1e-4,
    "weight_decay": 0.5,
    "batch_size": 32,
    "epochs": 200,
    "seed": 0,
    "stride": 5,
}

_SYNTH_DEFAULTS = {
    "task": "skew_coded",
    "num_videos": 100,
    "frames": 16,
    "objects_min": 2,
    "objects_max": 5,
    "feature_dim": 8,
    "seed": 0,
}


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """Merge flag values over config-file values over built-in defaults."""
    file_cfg = {}
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            with open(config_path, "r", encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise FormatError(f"cannot read config {config_path}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise FormatError(f"config {config_path} must hold a JSON object")
        unknown = sorted(set(file_cfg) - set(defaults))
        if unknown:
            raise FormatError(f"config {config_path} has unknown keys: "
                              f"{', '.join(unknown)}")
    resolved = {}
    for key, default in defaults.items():
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            resolved[key] = flag_value
        elif key in file_cfg:
            resolved[key] = file_cfg[key]
        else:
            resolved[key] = default
    return resolved


def _kinds_tuple(value) -> tuple[str, ...]:
    kinds = tuple(k.strip() for k in value.split(",")) if isinstance(value, str) \
        else tuple(value)
    validate_kinds(kinds)
    return kinds


def _out_dir(path: str | None) -> str | None:
    if path is None:
        return None
    root = os.environ.get("HEG_OUT_ROOT")
    if root and not os.path.isabs(path):
        path = os.path.join(root, path)
    os.makedirs(path, exist_ok=True)
    return path


def _echo_config(out_dir: str | None, resolved: dict) -> None:
    if out_dir is None:
        return
    with open(os.path.join(out_dir, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(resolved, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _add_train_options(p: _Parser) -> None:
    p.add_argument("--config", help="JSON file with option defaults")
    p.add_argument("--kinds", help="comma-separated aggregators "
                   f"(default {','.join(KIND_ORDER)})")
    p.add_argument("--pooling", choices=POOLING_MODES)
    p.add_argument("--compression", action=argparse.BooleanOptionalAction,
                   default=None, help="halve the hidden width (default on)")
    p.add_argument("--activation", choices=("relu", "none"))
    p.add_argument("--std-epsilon", type=float, dest="std_epsilon")
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--weight-decay", type=float, dest="weight_decay")
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--stride", type=int, help="sample every stride-th frame")


def _train_config(resolved: dict, num_classes: int) -> TrainConfig:
    return TrainConfig(
        num_classes=num_classes, kinds=_kinds_tuple(resolved["kinds"]),
        pooling=resolved["pooling"], compression=resolved["compression"],
        activation=resolved["activation"], std_epsilon=resolved["std_epsilon"],
        learning_rate=resolved["learning_rate"],
        weight_decay=resolved["weight_decay"],
        batch_size=resolved["batch_size"], epochs=resolved["epochs"],
        seed=resolved["seed"], stride=resolved["stride"])


def _split_dataset(data_dir: str, split: str):
    dataset, splits = load_dataset(data_dir)
    if split == "all":
        return dataset
    if split not in splits:
        raise DataError(f"dataset {data_dir} has no split {split!r}")
    wanted = set(splits[split])
    chosen = [(seq, store) for seq, store in dataset if seq.video_id in wanted]
    if not chosen:
        raise DataError(f"split {split!r} of {data_dir} is empty")
    return chosen


def _labelled_graphs(data_dir: str, split: str, stride: int):
    graphs = build_graphs(_split_dataset(data_dir, split), stride=stride)
    labels = [g.label for g in graphs]
    if any(lab is None or lab < 0 for lab in labels):
        raise DataError(f"split {split!r} contains unlabelled videos")
    return graphs, max(labels) + 1


def _cmd_synth(args) -> int:
    resolved = _resolve(args, _SYNTH_DEFAULTS)
    spec = SynthSpec(num_videos=resolved["num_videos"],
                     frames_per_video=resolved["frames"],
                     objects_min=resolved["objects_min"],
                     objects_max=resolved["objects_max"],
                     feature_dim=resolved["feature_dim"],
                     task=resolved["task"], seed=resolved["seed"])
    dataset = generate(spec)
    out = _out_dir(args.out)
    write_dataset(dataset, out, seed=resolved["seed"])
    _echo_config(out, resolved)
    print(f"wrote {len(dataset)} videos to {out}")
    return 0


def _cmd_build_graph(args) -> int:
    resolved = _resolve(args, {"stride": 5})
    out = _out_dir(args.out)
    graph_dir = os.path.join(out, "graphs")
    os.makedirs(graph_dir, exist_ok=True)
    dataset = _split_dataset(args.data, "all")
    total_nodes = total_edges = 0
    for (seq, _), graph in zip(dataset, build_graphs(dataset, resolved["stride"])):
        nodes, edges, mean_objects = count_stats(graph)
        total_nodes += nodes
        total_edges += edges
        save_graph(os.path.join(graph_dir, f"{seq.video_id}.hegg"), graph)
        print(f"{seq.video_id}: {nodes} nodes, {edges} directed edges, "
              f"{mean_objects:.2f} objects/frame")
    _echo_config(out, resolved)
    print(f"total: {len(dataset)} graphs, {total_nodes} nodes, "
          f"{total_edges} directed edges")
    return 0


def _cmd_train(args) -> int:
    resolved = _resolve(args, _TRAIN_DEFAULTS)
    graphs, num_classes = _labelled_graphs(args.data, args.split,
                                           resolved["stride"])
    config = _train_config(resolved, num_classes)
    out = _out_dir(args.out)
    result = train(config, graphs,
                   checkpoint_path=os.path.join(out, "model.hegc"))
    with open(os.path.join(out, "loss.txt"), "w", encoding="utf-8") as fh:
        for value in result.loss_history:
            fh.write(f"{value!r}\n")
    _echo_config(out, resolved)
    print(f"trained {config.epochs} epochs on {len(graphs)} graphs; "
          f"final loss {result.loss_history[-1]:.6f}")
    print(f"checkpoint: {os.path.join(out, 'model.hegc')}")
    return 0


def _cmd_eval(args) -> int:
    resolved = _resolve(args, {"stride": 5})
    model, head, _ = load_checkpoint(args.checkpoint)
    graphs, _ = _labelled_graphs(args.data, args.split, resolved["stride"])
    report = evaluate(model, head, graphs)
    print(format_report(report), end="")
    out = _out_dir(args.out)
    if out is not None:
        write_report(os.path.join(out, "report.json"), report)
        _echo_config(out, resolved)
    return 0


def _cmd_ablate(args) -> int:
    resolved = _resolve(args, _TRAIN_DEFAULTS)
    threads = args.threads if args.threads is not None \
        else int(os.environ.get("HEG_THREADS", "1"))
    train_graphs, num_classes = _labelled_graphs(args.data, args.split,
                                                 resolved["stride"])
    eval_graphs, _ = _labelled_graphs(args.data, args.eval_split,
                                      resolved["stride"])
    config = _train_config(resolved, num_classes)
    cells = GRIDS[args.grid]()
    results = ablate(config, cells, train_graphs, eval_graphs, threads=threads)
    table = format_table(results)
    print(table, end="")
    for note in accuracy_regressions(results):
        print(f"note: {note}")
    out = _out_dir(args.out)
    if out is not None:
        with open(os.path.join(out, "table.txt"), "w", encoding="utf-8") as fh:
            fh.write(table)
        rows = [{"name": r.name, "overrides": {k: list(v) if isinstance(v, tuple)
                                               else v
                                               for k, v in r.overrides.items()},
                 "error": r.error,
                 "report": None if r.report is None else report_to_dict(r.report)}
                for r in results]
        with open(os.path.join(out, "results.json"), "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2, sort_keys=True)
            fh.write("\n")
        _echo_config(out, resolved)
    if any(r.report is None for r in results):
        failed = ", ".join(r.name for r in results if r.report is None)
        print(f"cells failed: {failed}", file=sys.stderr)
    return 0


def _cmd_gradcheck(args) -> int:
    resolved = _resolve(args, {**_TRAIN_DEFAULTS, "feature_dim": 6,
                               "tolerance": 1e-4})
    spec = SynthSpec(num_videos=2, frames_per_video=2 * resolved["stride"] + 1,
                     objects_min=2, objects_max=3,
                     feature_dim=resolved["feature_dim"],
                     seed=resolved["seed"])
    graphs = build_graphs(gaussian_dataset(spec), stride=resolved["stride"])
    config = _train_config(resolved, num_classes=2)
    model, head = init_model(config, resolved["feature_dim"])
    errors = gradient_check(model, head, graphs)
    worst = max(errors.values())
    for name in sorted(errors):
        print(f"{name:16s} max relative error {errors[name]:.3e}")
    tolerance = resolved["tolerance"]
    if worst < tolerance:
        print(f"gradcheck passed: worst {worst:.3e} < {tolerance:.1e}")
        return 0
    print(f"gradcheck FAILED: worst {worst:.3e} >= {tolerance:.1e}")
    return 3


def build_parser() -> _Parser:
    parser = _Parser(prog="heg",
                     description="temporal bipartite graph video classifier")
    sub = parser.add_subparsers(dest="command", required=True,
                               parser_class=_Parser)

    p = sub.add_parser("synth",
                       help="generate a statistically coded synthetic dataset")
    p.add_argument("--out", required=True, help="dataset directory to create")
    p.add_argument("--config")
    p.add_argument("--task", choices=TASKS)
    p.add_argument("--num-videos", type=int, dest="num_videos")
    p.add_argument("--frames", type=int, help="frames per video")
    p.add_argument("--objects-min", type=int, dest="objects_min")
    p.add_argument("--objects-max", type=int, dest="objects_max")
    p.add_argument("--feature-dim", type=int, dest="feature_dim")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("build-graph",
                       help="cache one graph file per video")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--stride", type=int)
    p.set_defaults(func=_cmd_build_graph)

    p = sub.add_parser("train", help="train a classifier")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="train",
                   help="dataset split to train on (default train)")
    _add_train_options(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="test",
                   help="dataset split to score (default test)")
    p.add_argument("--out", help="optional directory for report.json")
    p.add_argument("--config")
    p.add_argument("--stride", type=int)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ablate", help="run a config grid")
    p.add_argument("--data", required=True)
    p.add_argument("--grid", required=True, choices=sorted(GRIDS))
    p.add_argument("--out")
    p.add_argument("--split", default="train")
    p.add_argument("--eval-split", default="test", dest="eval_split")
    p.add_argument("--threads", type=int,
                   help="worker processes (default $HEG_THREADS or 1)")
    _add_train_options(p)
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("gradcheck",
                       help="compare analytic and finite-difference gradients")
    p.add_argument("--feature-dim", type=int, dest="feature_dim")
    p.add_argument("--tolerance", type=float)
    _add_train_options(p)
    p.set_defaults(func=_cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"heg: numeric failure: {exc}", file=sys.stderr)
        return 3
    except HegError as exc:
        print(f"heg: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"heg: cannot access {exc.filename or 'file'}: {exc.strerror}",
              file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"heg: invalid option value: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
