"""
Command-line interface: one subcommand per pipeline stage.
"""
import argparse
import dataclasses
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from . import __version__
from .analysis import (
    AnalysisConfig,
    class_balance,
    describe,
    embed_states,
    histogram,
    kmeans,
    state_histograms,
    value_range,
)
from .artifacts import (
    load_models,
    map_metadata_path,
    parse_features,
    parse_ground_truth,
    parse_map,
    parse_stream,
    write_clusters,
    write_embedding,
    write_features,
    write_ground_truth,
    write_histogram,
    write_json,
    write_map,
    write_model,
    write_stats,
    write_stream,
)
from .bar_data import load_bars
from .errors import ConfigError, ProteusError
from .features import DEFAULT_INITIAL_PRICE, IndicatorConfig, featurize
from .manifest import update_manifest, verify_manifest
from .model_fitting import FitReport, GridConfig, OptimizerConfig, fit
from .stream_simulation import GroundTruthLog, simulate_batch
from .transition_map import (
    DEFAULT_ABRUPT_DURATION,
    DEFAULT_GRADUAL_DURATION,
    DEFAULT_INTERVAL,
    DEFAULT_SPLIT_INDEX,
    DEFAULT_STREAM_LENGTH,
    DEFAULT_WARMUP_STEPS,
    DriftType,
    EntryPolicy,
    StreamConfig,
    generate_map,
)
from .worker_pool import default_workers

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(message)s"


def setup_logging(verbosity: int = 0, log_file: Optional[Path] = None) -> None:
    """
    Set up logging configuration.

    Args:
        verbosity: 0 for warnings, 1 for info, 2 or more for debug
        log_file: Optional file receiving the same records
    """
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file is not None:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(level=level, format=LOG_FORMAT, handlers=handlers, force=True)


def order_range(text: str) -> Tuple[int, ...]:
    """Parse "a..b" (inclusive) or a single order."""
    try:
        if ".." in text:
            low, high = (int(part) for part in text.split("..", 1))
        else:
            low = high = int(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"invalid order range '{text}'") from e
    if low < 0 or high < low:
        raise argparse.ArgumentTypeError(f"invalid order range '{text}'")
    return tuple(range(low, high + 1))


def override(text: str) -> Tuple[str, str]:
    """Parse NAME=VALUE."""
    name, separator, value = text.partition("=")
    if not separator or not name:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got '{text}'")
    return name.strip(), value.strip()


def indicator_config(overrides: Sequence[Tuple[str, str]]) -> IndicatorConfig:
    """Default indicator periods with NAME=VALUE overrides applied."""
    config = IndicatorConfig()
    types = {item.name: type(getattr(config, item.name)) for item in dataclasses.fields(config)}
    changes: Dict[str, Any] = {}
    for name, value in overrides:
        if name not in types:
            raise ConfigError(f"Unknown indicator setting '{name}'")
        try:
            changes[name] = types[name](value)
        except ValueError as e:
            raise ConfigError(f"Invalid value for {name}: '{value}'") from e
    return dataclasses.replace(config, **changes)


def _threads(args: argparse.Namespace) -> int:
    threads = args.threads if args.threads is not None else default_workers()
    if threads < 1:
        raise ConfigError(f"--threads must be >= 1: {threads}")
    return int(threads)


def _record(
    directory: Path,
    files: Sequence[Path],
    seed: Optional[int] = None,
    configs: Optional[Mapping[str, Any]] = None,
    split_index: Optional[int] = None,
) -> None:
    """Add outputs to the directory's manifest and verify it."""
    update_manifest(directory, files, seed=seed, configs=configs, split_index=split_index)
    verify_manifest(directory)


def _print_grid(report: FitReport) -> None:
    print(f"{'p':>3} {'q':>3} {'p_g':>3} {'q_g':>3} {'k':>3} {'aic':>20}")
    for candidate in report.grid:
        marker = "*" if candidate.orders == report.orders else " "
        aic = f"{candidate.aic:20.6f}" if candidate.aic is not None else f"{'failed':>20}"
        p, q, p_g, q_g = candidate.orders
        print(f"{p:>3} {q:>3} {p_g:>3} {q_g:>3} {candidate.orders.parameter_count:>3} {aic} {marker}")


def cmd_fit(args: argparse.Namespace) -> None:
    """Fit a regime model to a bar file."""
    bars = load_bars(args.input, take=args.take)
    grid = GridConfig(
        ar_orders=args.grid_arma,
        ma_orders=args.grid_arma,
        arch_orders=args.grid_garch,
        garch_orders=args.grid_garch,
        min_length=args.min_length,
    )
    optimizer = OptimizerConfig(
        max_iterations=args.max_iterations,
        tolerance=args.tolerance,
        max_restarts=args.max_restarts,
    )
    report = fit(
        bars.log_returns,
        grid,
        optimizer,
        state_id=args.state_id,
        series_name=Path(args.input).name,
        workers=_threads(args),
    )
    out = write_model(report.model, args.out, report)
    _print_grid(report)
    _record(out.parent, [out], configs={"grid": grid, "optimizer": optimizer})


def cmd_gen_map(args: argparse.Namespace) -> None:
    """Generate a transition map."""
    config = StreamConfig(
        length=args.length,
        interval=args.interval,
        gradual_duration=args.gradual_duration,
        abrupt_duration=args.abrupt_duration,
        seed=args.seed,
        initial_state=args.initial_state,
        split_index=args.split_index,
    )
    transition_map = generate_map(config, args.states)
    out = write_map(transition_map, args.out)
    print(
        f"{len(transition_map)} transitions "
        f"({transition_map.count(DriftType.ABRUPT, config.gradual_duration)} abrupt, "
        f"{transition_map.count(DriftType.GRADUAL, config.gradual_duration)} gradual)"
    )
    _record(
        out.parent,
        [out, map_metadata_path(out)],
        seed=config.seed,
        configs={"stream": config},
        split_index=config.split_index,
    )


def cmd_simulate(args: argparse.Namespace) -> None:
    """Simulate streams from fitted models and a transition map."""
    models = load_models(args.models)
    transition_map = parse_map(args.map, stream_length=args.length)
    config = StreamConfig(
        length=transition_map.stream_length,
        gradual_duration=args.gradual_duration,
        abrupt_duration=min(args.abrupt_duration, args.gradual_duration),
        warmup_steps=args.warmup_steps,
        seed=args.seed,
        initial_state=transition_map.initial_state,
        split_index=args.split_index,
        neutralize_mean=args.neutralize_mean,
        shared_innovations=not args.independent_innovations,
        entry_policy=EntryPolicy(args.entry_policy),
    )
    streams = simulate_batch(
        models, transition_map, config, args.streams, workers=_threads(args)
    )
    out_dir = Path(args.out_dir)
    written: List[Path] = []
    configs: Dict[str, Any] = {"stream": config}
    indicators = indicator_config(args.indicator) if args.featurize else None
    for index, stream in enumerate(streams):
        written.append(write_stream(stream, out_dir / f"stream_{index:03d}.csv"))
        written.append(
            write_ground_truth(
                stream.log.transition_map,
                out_dir / f"ground_truth_{index:03d}.csv",
                config.gradual_duration,
            )
        )
        if indicators is not None:
            frame = featurize(stream.returns, args.initial_price, indicators)
            written.append(write_features(frame, out_dir / f"features_{index:03d}.csv"))
    if indicators is not None:
        configs["indicators"] = indicators
    logger.info("Wrote %d stream(s) to %s", len(streams), out_dir)
    _record(out_dir, written, seed=config.seed, configs=configs, split_index=config.split_index)


def cmd_featurize(args: argparse.Namespace) -> None:
    """Compute the feature table of a stream file."""
    stream = parse_stream(args.stream)
    config = indicator_config(args.indicator)
    frame = featurize(stream.returns, args.initial_price, config)
    out = write_features(frame, args.out)
    _record(out.parent, [out], configs={"indicators": config})


def cmd_analyze(args: argparse.Namespace) -> None:
    """Summarize features and, given returns, embed and cluster states."""
    if args.ground_truth is not None and args.returns is None:
        raise ConfigError("--ground-truth requires --returns")
    config = AnalysisConfig(
        window=args.window, bins=args.bins, k=args.kmeans, seed=args.seed
    )
    out_dir = Path(args.out_dir)
    features = parse_features(args.features)
    written = [write_stats(describe(features), out_dir / "stats.csv")]
    summary: Dict[str, Any] = {
        "rows": len(features),
        "class_balance": class_balance(features["label"].to_numpy()),
    }

    if args.returns is not None:
        stream = parse_stream(args.returns)
        log = stream.log
        if args.ground_truth is not None:
            transition_map = parse_ground_truth(args.ground_truth, len(stream))
            log = GroundTruthLog.from_map(transition_map)
        bounds = value_range(stream.returns)
        written.append(
            write_histogram(
                histogram(stream.returns, config.bins, bounds), out_dir / "histogram.csv"
            )
        )
        for state_id, hist in state_histograms(
            stream.returns, log, config.bins, bounds
        ).items():
            written.append(write_histogram(hist, out_dir / f"histogram_state_{state_id}.csv"))
        embedding = embed_states(stream.returns, log, config.window)
        written.extend(
            write_embedding(embedding, out_dir / "embedding.csv", out_dir / "embedding.json")
        )
        clusters = kmeans(
            embedding.points,
            k=config.k,
            seed=config.seed,
            max_iterations=config.max_iterations,
            tolerance=config.tolerance,
            n_init=config.n_init,
            labels=embedding.state,
        )
        written.extend(
            write_clusters(clusters, out_dir / "centroids.csv", out_dir / "assignments.csv")
        )
        summary.update(
            {
                "points": len(embedding),
                "purity": clusters.purity,
                "inertia": clusters.inertia,
                "iterations": clusters.iterations,
            }
        )
    written.append(write_json(summary, out_dir / "summary.json"))
    _record(out_dir, written, seed=config.seed, configs={"analysis": config})


def cmd_verify(args: argparse.Namespace) -> None:
    """Verify a manifest against the files it lists."""
    manifest = verify_manifest(args.manifest)
    print(f"OK: {len(manifest.files)} file(s) verified")


def _add_indicator_overrides(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--indicator",
        type=override,
        action="append",
        default=[],
        metavar="NAME=VALUE",
        help="Override an indicator setting, e.g. rsi_period=14",
    )


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser."""
    parser = argparse.ArgumentParser(
        prog="proteus",
        description="Generate regime-switching financial streams with ground truth",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug"
    )
    parser.add_argument("--log-file", type=Path, default=None, help="Also log to this file")
    subparsers = parser.add_subparsers(dest="command", required=True)

    fit_parser = subparsers.add_parser("fit", help="Fit a regime model to market bars")
    fit_parser.add_argument("--input", type=Path, required=True, help="Bar CSV file")
    fit_parser.add_argument("--take", type=int, default=None, help="Use the first N bars")
    fit_parser.add_argument("--grid-arma", type=order_range, default=tuple(range(0, 6)))
    fit_parser.add_argument("--grid-garch", type=order_range, default=tuple(range(1, 4)))
    fit_parser.add_argument("--state-id", type=int, default=1)
    fit_parser.add_argument("--min-length", type=int, default=GridConfig().min_length)
    fit_parser.add_argument(
        "--max-iterations", type=int, default=OptimizerConfig().max_iterations
    )
    fit_parser.add_argument("--tolerance", type=float, default=OptimizerConfig().tolerance)
    fit_parser.add_argument(
        "--max-restarts", type=int, default=OptimizerConfig().max_restarts
    )
    fit_parser.add_argument("--threads", type=int, default=None)
    fit_parser.add_argument("--out", type=Path, required=True, help="Model JSON file")
    fit_parser.set_defaults(handler=cmd_fit)

    map_parser = subparsers.add_parser("gen-map", help="Generate a transition map")
    map_parser.add_argument("--length", type=int, default=DEFAULT_STREAM_LENGTH)
    map_parser.add_argument("--interval", type=int, default=DEFAULT_INTERVAL)
    map_parser.add_argument("--states", type=int, required=True)
    map_parser.add_argument("--seed", type=int, default=0)
    map_parser.add_argument("--gradual-duration", type=int, default=DEFAULT_GRADUAL_DURATION)
    map_parser.add_argument("--abrupt-duration", type=int, default=DEFAULT_ABRUPT_DURATION)
    map_parser.add_argument("--initial-state", type=int, default=1)
    map_parser.add_argument("--split-index", type=int, default=DEFAULT_SPLIT_INDEX)
    map_parser.add_argument("--out", type=Path, required=True, help="Map CSV file")
    map_parser.set_defaults(handler=cmd_gen_map)

    sim_parser = subparsers.add_parser("simulate", help="Simulate streams")
    sim_parser.add_argument("--models", type=Path, required=True, help="Model directory")
    sim_parser.add_argument("--map", type=Path, required=True, help="Map CSV file")
    sim_parser.add_argument("--streams", type=int, default=1)
    sim_parser.add_argument("--seed", type=int, default=0)
    sim_parser.add_argument(
        "--length", type=int, default=None, help="Defaults to the length stored with the map"
    )
    sim_parser.add_argument("--warmup-steps", type=int, default=DEFAULT_WARMUP_STEPS)
    sim_parser.add_argument("--gradual-duration", type=int, default=DEFAULT_GRADUAL_DURATION)
    sim_parser.add_argument("--abrupt-duration", type=int, default=DEFAULT_ABRUPT_DURATION)
    sim_parser.add_argument("--split-index", type=int, default=DEFAULT_SPLIT_INDEX)
    sim_parser.add_argument("--neutralize-mean", action="store_true")
    sim_parser.add_argument("--independent-innovations", action="store_true")
    sim_parser.add_argument(
        "--entry-policy",
        choices=[policy.value for policy in EntryPolicy],
        default=EntryPolicy.HANDOFF.value,
    )
    sim_parser.add_argument("--featurize", action="store_true", help="Also write features")
    sim_parser.add_argument("--initial-price", type=float, default=DEFAULT_INITIAL_PRICE)
    _add_indicator_overrides(sim_parser)
    sim_parser.add_argument("--threads", type=int, default=None)
    sim_parser.add_argument("--out-dir", type=Path, required=True)
    sim_parser.set_defaults(handler=cmd_simulate)

    feat_parser = subparsers.add_parser("featurize", help="Compute indicator features")
    feat_parser.add_argument("--stream", type=Path, required=True, help="Stream CSV file")
    feat_parser.add_argument("--initial-price", type=float, default=DEFAULT_INITIAL_PRICE)
    _add_indicator_overrides(feat_parser)
    feat_parser.add_argument("--out", type=Path, required=True, help="Feature CSV file")
    feat_parser.set_defaults(handler=cmd_featurize)

    analyze_parser = subparsers.add_parser("analyze", help="Validation statistics")
    analyze_parser.add_argument("--features", type=Path, required=True)
    analyze_parser.add_argument("--returns", type=Path, default=None, help="Stream CSV file")
    analyze_parser.add_argument("--ground-truth", type=Path, default=None)
    analyze_parser.add_argument("--kmeans", type=int, default=AnalysisConfig().k)
    analyze_parser.add_argument("--window", type=int, default=AnalysisConfig().window)
    analyze_parser.add_argument("--bins", type=int, default=AnalysisConfig().bins)
    analyze_parser.add_argument("--seed", type=int, default=0)
    analyze_parser.add_argument("--out-dir", type=Path, required=True)
    analyze_parser.set_defaults(handler=cmd_analyze)

    verify_parser = subparsers.add_parser("verify", help="Verify a run manifest")
    verify_parser.add_argument("--manifest", type=Path, required=True)
    verify_parser.set_defaults(handler=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run the command line.

    Returns:
        0 on success, 1 when a command fails
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose, args.log_file)
    handler: Callable[[argparse.Namespace], None] = args.handler
    try:
        handler(args)
    except ProteusError as e:
        logger.error("%s failed: %s", args.command, str(e))
        return 1
    return 0
