"""runtime/cli.py

Command-line entry point ``actiongraph``.

Every subcommand except visualize reads the JSON run config given with
``--config`` (the defaults without one); flags override config keys. The
dataset subcommands (train, eval, ablate) use the whole config, the
file-level ones (build-graph, embed-structure, embed-semantic) only its
graph, walk and prompt sections. Exit status is 0 on success, 1 on any
actiongraph error and 2 on invalid arguments.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from ..adapters.formats import GraphCodec, write_json, write_matrix
from ..config.labels import LabelFiles
from ..config.settings import RunConfig, apply_overrides, config_to_dict, load_config
from ..core.errors import ActionGraphError
from ..core.graph import build_graph, chunk
from ..core.semantic import PromptTemplate, embed_semantic
from ..core.structure import embed_structure
from ..core.switches import edge_grid, modality_grid
from .factory import EncoderFactory
from .pipeline import run_ablation, run_eval, run_folds, run_train
from .synthetic import write_dataset
from .visualize import render_segmentation

logger = logging.getLogger(__name__)

LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


def configure_logging() -> None:
    """Configure the root logger from ``LOG_LEVEL`` (error, warn, info, debug)."""
    name = os.environ.get("LOG_LEVEL", "info").strip().lower()
    level = LOG_LEVELS.get(name)
    logging.basicConfig(
        level=level or logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if level is None:
        logger.warning(f"Unknown LOG_LEVEL '{name}', using info")


def _common(parser: argparse.ArgumentParser, out_help: str, config: bool = True) -> None:
    if config:
        parser.add_argument("--config", help="JSON run config")
        parser.add_argument("--seed", type=int, help="run seed (overrides the config)")
    parser.add_argument("--out", help=out_help)


def _run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--batch-size", type=int)
    parser.add_argument("--lr", type=float)
    parser.add_argument("--gamma", type=float)
    parser.add_argument("--chunk-size", type=int)
    parser.add_argument("--hops", type=int)
    parser.add_argument("--edges", choices=edge_grid())
    parser.add_argument("--modalities", choices=modality_grid())
    parser.add_argument("--semantic", choices=("none", "raw", "prompt"))
    parser.add_argument("--drop-probability", type=float)
    parser.add_argument(
        "--no-test-semantic",
        action="store_true",
        help="strip semantic edges and features from test graphs",
    )
    parser.add_argument(
        "--oracle-labels", action="store_true", help="build test graphs from ground truth"
    )
    parser.add_argument("--exclude-background", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="actiongraph", description="Graph-based action segmentation"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    graph = commands.add_parser("build-graph", help="build the chunk graphs of one label file")
    _common(graph, "directory for <video>.chunk<k>.json files")
    graph.add_argument("--labels", required=True)
    graph.add_argument("--label-map", required=True)
    graph.add_argument("--gamma", type=float)
    graph.add_argument("--chunk-size", type=int)

    structure = commands.add_parser("embed-structure", help="node2vec embedding of one graph file")
    _common(structure, "output matrix (.bin with manifest)")
    structure.add_argument("--graph", required=True)
    structure.add_argument("--hops", type=int)
    structure.add_argument("--p", type=float)
    structure.add_argument("--q", type=float)
    structure.add_argument("--dimension", type=int)

    semantic = commands.add_parser("embed-semantic", help="semantic embedding of one label file")
    _common(semantic, "output matrix (.bin with manifest)")
    semantic.add_argument("--labels", required=True)
    semantic.add_argument("--label-map", required=True)
    semantic.add_argument("--backend", choices=("stub", "table"))
    semantic.add_argument("--template", choices=[t.value for t in PromptTemplate])
    semantic.add_argument("--table", help="embedding table JSON for the table backend")

    dataset_commands = (
        ("train", "train a model"),
        ("eval", "evaluate a checkpoint"),
        ("ablate", "run the ablation grids"),
    )
    for name, text in dataset_commands:
        sub = commands.add_parser(name, help=text)
        _common(sub, "output directory")
        _run_flags(sub)
        if name == "train":
            sub.add_argument(
                "--all-folds", action="store_true", help="train and evaluate every split"
            )
        if name == "eval":
            sub.add_argument("--checkpoint")
        if name == "ablate":
            sub.add_argument(
                "--grids",
                help="comma-separated subset of edges,modalities,hops,semantic,test_semantic",
            )

    visualize = commands.add_parser("visualize", help="draw ground truth against a prediction")
    _common(visualize, "output SVG", config=False)
    visualize.add_argument("--gt", required=True)
    visualize.add_argument("--pred", required=True)
    visualize.add_argument("--label-map", required=True)

    synthetic = commands.add_parser(
        "gen-synthetic", help="write a synthetic dataset and its config"
    )
    _common(synthetic, "dataset directory")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {
        "seed": args.seed,
        "output_dir": args.out,
        "hyper.epochs": getattr(args, "epochs", None),
        "hyper.batch_size": getattr(args, "batch_size", None),
        "hyper.learning_rate": getattr(args, "lr", None),
        "graph.gamma": getattr(args, "gamma", None),
        "graph.chunk_size": getattr(args, "chunk_size", None),
        "walk.hops": getattr(args, "hops", None),
        "walk.p": getattr(args, "p", None),
        "walk.q": getattr(args, "q", None),
        "walk.dimension": getattr(args, "dimension", None),
        "prompt.backend": getattr(args, "backend", None),
        "prompt.template": getattr(args, "template", None),
        "data.embedding_table": getattr(args, "table", None),
        "ablation.edges": getattr(args, "edges", None),
        "ablation.modalities": getattr(args, "modalities", None),
        "ablation.semantic": getattr(args, "semantic", None),
        "ablation.drop_probability": getattr(args, "drop_probability", None),
    }
    if getattr(args, "no_test_semantic", False):
        overrides["ablation.test_semantic"] = False
    if getattr(args, "oracle_labels", False):
        overrides["ablation.oracle_test_labels"] = True
    if getattr(args, "exclude_background", False):
        overrides["data.exclude_background"] = True
    if getattr(args, "grids", None):
        overrides["ablation.grids"] = [g.strip() for g in args.grids.split(",") if g.strip()]
    return overrides


def _run_config(args: argparse.Namespace) -> RunConfig:
    return apply_overrides(load_config(args.config), _overrides(args))


def _require_out(args: argparse.Namespace) -> Path:
    if not args.out:
        raise ActionGraphError(f"{args.command} needs --out")
    return Path(args.out)


def cmd_build_graph(args: argparse.Namespace) -> int:
    out = _require_out(args)
    graph_config = _run_config(args).graph
    label_map = LabelFiles.load_label_map(args.label_map)
    sequence = LabelFiles.read_labels(args.labels, label_map)
    for piece in chunk(sequence, (), graph_config.chunk_size):
        graph = build_graph(piece.sequence, graph_config.gamma, chunk=piece.index)
        GraphCodec.write(out / f"{sequence.video_id}.chunk{piece.index}.json", graph)
    return 0


def cmd_embed_structure(args: argparse.Namespace) -> int:
    out = _require_out(args)
    walk = _run_config(args).walk
    graph = GraphCodec.read(args.graph)
    write_matrix(out, embed_structure(graph, walk).matrix)
    return 0


def cmd_embed_semantic(args: argparse.Namespace) -> int:
    out = _require_out(args)
    config = _run_config(args)
    if config.prompt.backend == "table" and not config.data.embedding_table:
        raise ActionGraphError("the table backend needs --table or data.embedding_table")
    encoder = EncoderFactory.from_config(
        config.prompt, config.ablation.semantic, config.data.embedding_table
    )
    if encoder is None:
        raise ActionGraphError("embed-semantic needs a semantic mode other than 'none'")
    label_map = LabelFiles.load_label_map(args.label_map)
    sequence = LabelFiles.read_labels(args.labels, label_map)
    write_matrix(out, embed_semantic(sequence, label_map, encoder).matrix)
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config = _run_config(args)
    if args.all_folds:
        report = run_folds(config)
        logger.info(
            "Cross-validation finished",
            extra={"accuracy": report.accuracy, "edit": report.edit},
        )
        return 0
    outcome = run_train(config)
    logger.info("Checkpoint written", extra={"path": str(outcome.checkpoint)})
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    config = _run_config(args)
    outcome = run_eval(config, Path(args.checkpoint) if args.checkpoint else None)
    report = outcome.report
    print(
        f"Acc {report.accuracy:.2f}  Edit {report.edit:.2f}  "
        + "  ".join(f"F1@{int(t * 100)} {v:.2f}" for t, v in report.f1.items())
        + f"  Top1 {report.top1:.2f}  Top5 {report.top5:.2f}"
    )
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    rows = run_ablation(_run_config(args))
    failed = [row for row in rows if row.error]
    if failed:
        logger.warning(f"{len(failed)} of {len(rows)} ablation cells failed")
    return 0


def cmd_visualize(args: argparse.Namespace) -> int:
    out = _require_out(args)
    label_map = LabelFiles.load_label_map(args.label_map)
    gt = LabelFiles.read_labels(args.gt, label_map)
    pred = LabelFiles.read_labels(args.pred, label_map)
    render_segmentation(gt.labels, pred.labels, label_map, out, title=gt.video_id)
    return 0


def cmd_gen_synthetic(args: argparse.Namespace) -> int:
    out = _require_out(args).resolve()
    config = load_config(args.config)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    data = write_dataset(out, config.synthetic, config.seed)
    run_config = config_to_dict(config)
    run_config["data"] = config_to_dict(RunConfig(data=data))["data"]
    run_config["output_dir"] = str(out / "run")
    write_json(out / "config.json", run_config)
    return 0


COMMANDS = {
    "build-graph": cmd_build_graph,
    "embed-structure": cmd_embed_structure,
    "embed-semantic": cmd_embed_semantic,
    "train": cmd_train,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "visualize": cmd_visualize,
    "gen-synthetic": cmd_gen_synthetic,
}


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ActionGraphError as e:
        logger.debug("Command failed", extra={"command": args.command, **e.context}, exc_info=True)
        print(f"error: {e.message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
