"""
Prospect Drive - Command-line interface

    prospect-drive gen --config pipeline.yaml --out-dir data/
    prospect-drive train-irl --data data/trajectories.csv --demos demos.txt --out theta.json
    prospect-drive fit-cpt --data data/trajectories.csv --labels data/labels.csv --theta theta.json --out cpt.json
    prospect-drive predict --data data/trajectories.csv --theta theta.json --cpt cpt.json --model cpt --out predictions.csv
    prospect-drive evaluate --predictions predictions.csv --labels data/labels.csv --out report.json
    prospect-drive curves --cpt cpt.json --samples 101 --out curves.csv

Exit codes: 0 success, 2 input or schema error, 3 an optimizer did not converge (results are
still written).
"""

import argparse
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import pydantic
import structlog

from . import __version__
from .config import PipelineConfig, load_config
from .dataset import (
    TrajectoryDataset,
    export_curves,
    frenetize,
    generate_synthetic,
    load_dataset,
    load_labels,
    load_paths,
    load_predictions,
    read_id_list,
    save_dataset,
    save_predictions,
    split_pairs,
    trajectory_table,
    write_curves,
)
from .estimation import Demonstration, cpt_fit, irl_fit
from .evaluation import (
    DEFAULT_THRESHOLD,
    Predictor,
    cpt_predict,
    eut_predict,
    format_table,
    frame_observation,
    frame_outcomes,
    predict_records,
    summarize,
    ttc_predict,
)
from .exceptions import (
    EXIT_FAILURE,
    EXIT_INPUT_ERROR,
    EXIT_NON_CONVERGENCE,
    EXIT_OK,
    ProspectDriveError,
    ValidationError,
)
from .models import FitResult, Granularity, WeightingMode
from .observability import configure_logging, get_metrics

logger = structlog.get_logger(__name__)

MODELS = ("cpt", "ttc", "eut")


def _read_fit(path: str) -> FitResult:
    try:
        return FitResult.model_validate_json(Path(path).read_text())
    except FileNotFoundError:
        raise ValidationError(f"fit result not found: {path}", field="fit") from None


def _write_fit(result: FitResult, path: str) -> None:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(result.model_dump_json(indent=2, exclude_none=True) + "\n")


def _fit_exit(result: FitResult, name: str) -> int:
    if result.converged:
        return EXIT_OK
    logger.warning("fit_not_converged", fit=name, iterations=result.iterations)
    return EXIT_NON_CONVERGENCE


def _theta(result: FitResult) -> List[float]:
    if result.theta is None:
        raise ValidationError("theta file carries no utility weights", field="theta")
    return result.theta


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_gen(args: argparse.Namespace, config: PipelineConfig) -> int:
    dataset = generate_synthetic(
        config.synth, config.utility, config.limits, config.stop_offset, config.clearance_margin,
        config.opponent_clearance,
    )
    trajectories, labels = save_dataset(dataset, args.out_dir)
    logger.info("dataset_written", trajectories=str(trajectories), labels=str(labels), pairs=len(dataset))
    return EXIT_OK


def cmd_frenetize(args: argparse.Namespace, config: PipelineConfig) -> int:
    dataset = frenetize(load_paths(args.paths), args.cartesian)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    trajectory_table(dataset).to_csv(out, index=False)
    logger.info("frenet_written", out=str(out), pairs=len(dataset))
    return EXIT_OK


def cmd_train_irl(args: argparse.Namespace, config: PipelineConfig) -> int:
    dataset = load_dataset(args.data)
    by_id = {pair.pair_id: pair for pair in dataset.pairs}
    ids = read_id_list(args.demos) if args.demos else dataset.pair_ids
    missing = [pair_id for pair_id in ids if pair_id not in by_id]
    if missing:
        raise ValidationError(f"demonstration ids not in dataset: {', '.join(missing[:5])}", field="demos")

    demos = [Demonstration.from_pair(by_id[pair_id]) for pair_id in ids]
    result = irl_fit(demos, config.irl, config.utility)
    _write_fit(result, args.out)
    return _fit_exit(result, "irl")


def cmd_fit_cpt(args: argparse.Namespace, config: PipelineConfig) -> int:
    dataset = load_dataset(args.data, args.labels)
    theta = _theta(_read_fit(args.theta))
    mode = WeightingMode(args.mode) if args.mode else config.cpt.mode
    test_fraction = config.cpt.test_fraction if args.test_fraction is None else args.test_fraction
    split_seed = config.cpt.split_seed if args.split_seed is None else args.split_seed

    labeled = [pair_id for pair_id in dataset.pair_ids if pair_id in dataset.labels]
    train_ids, test_ids = split_pairs(labeled, test_fraction, split_seed)
    frames = dataset.subset(train_ids).frames(config.window, config.stride)

    with get_metrics().measure("cpt_observations"):
        observations = [
            frame_observation(
                frame_outcomes(
                    frame, theta, config.utility, config.limits, config.horizon, dataset.dt,
                    config.stop_offset, config.clearance_margin, config.opponent_clearance,
                ),
                frame,
            )
            for frame in frames
        ]
    result = cpt_fit(observations, mode, config.cpt.grid_resolution)
    result = result.model_copy(update={"train_pairs": train_ids, "test_pairs": test_ids})
    _write_fit(result, args.out)
    return _fit_exit(result, "cpt")


def _predictor(args: argparse.Namespace, config: PipelineConfig, dataset: TrajectoryDataset) -> Predictor:
    if args.model == "ttc":
        return ttc_predict
    if args.theta is None:
        raise ValidationError(f"--theta is required for the {args.model} model", field="theta")
    theta = _theta(_read_fit(args.theta))
    settings = dict(
        limits=config.limits,
        horizon=config.horizon,
        dt=dataset.dt,
        stop_offset=config.stop_offset,
        clearance_margin=config.clearance_margin,
        opponent_clearance=config.opponent_clearance,
    )
    if args.model == "eut":
        return lambda frame: eut_predict(frame, theta, config.utility, config.cpt.mode, **settings).pr_pass

    if args.cpt is None:
        raise ValidationError("--cpt is required for the cpt model", field="cpt")
    fit = _read_fit(args.cpt)
    params = fit.cpt_params()
    mode = fit.mode or config.cpt.mode
    return lambda frame: cpt_predict(frame, theta, config.utility, params, mode, **settings).pr_pass


def cmd_predict(args: argparse.Namespace, config: PipelineConfig) -> int:
    dataset = load_dataset(args.data)
    predictor = _predictor(args, config, dataset)
    frames = dataset.frames(config.window, config.stride)
    with get_metrics().measure(f"predict_{args.model}"):
        records = predict_records(predictor, frames, args.model, args.threshold)
    out = save_predictions(records, args.out)
    logger.info("predictions_written", out=str(out), model=args.model, frames=len(records))
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace, config: PipelineConfig) -> int:
    labels = load_labels(args.labels)
    records = [record for path in args.predictions for record in load_predictions(path, labels)]
    if args.exclude_train:
        train = set(_read_fit(args.exclude_train).train_pairs or [])
        records = [record for record in records if record.pair_id not in train]

    setup: Dict[str, object] = {
        "predictions": list(args.predictions),
        "labels": args.labels,
        "window": config.window,
        "stride": config.stride,
    }
    if args.exclude_train:
        setup["exclude_train"] = args.exclude_train
    report = summarize(records, args.threshold, Granularity(args.granularity), setup)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.model_dump_json(indent=2) + "\n")
    print(format_table(report))
    return EXIT_OK


def cmd_curves(args: argparse.Namespace, config: PipelineConfig) -> int:
    params = _read_fit(args.cpt).cpt_params()
    curves = export_curves(params, args.samples, args.utility_range)
    out = write_curves(curves, args.out)
    logger.info("curves_written", out=str(out), samples=args.samples, alpha=params.alpha, gamma=params.gamma)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prospect-drive",
        description="CPT model of pass/yield decisions in two-vehicle interactions",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None,
                        help="Log level (default: PROSPECT_DRIVE_LOG_LEVEL or INFO)")
    parser.add_argument("--metrics-out", default=None,
                        help="Write Prometheus metrics to this file when the command finishes")
    commands = parser.add_subparsers(dest="command", required=True)

    def command(name: str, handler: Callable, help_text: str) -> argparse.ArgumentParser:
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("--config", default=None, help="Pipeline configuration YAML")
        sub.set_defaults(handler=handler)
        return sub

    gen = command("gen", cmd_gen, "Generate a labeled synthetic dataset")
    gen.add_argument("--out-dir", required=True)

    fren = command("frenetize", cmd_frenetize, "Convert Cartesian trajectories to the shared Frenet frame")
    fren.add_argument("--paths", required=True, help="CSV with path_id,seq,x_m,y_m")
    fren.add_argument("--cartesian", required=True, help="CSV with pair_id,role,t_s,x_m,y_m[,path_id]")
    fren.add_argument("--out", required=True)

    irl = command("train-irl", cmd_train_irl, "Fit utility weights from demonstrations")
    irl.add_argument("--data", required=True)
    irl.add_argument("--demos", default=None, help="File of demonstration pair_ids (default: all pairs)")
    irl.add_argument("--out", required=True)

    fit = command("fit-cpt", cmd_fit_cpt, "Fit CPT curvature and weighting exponents")
    fit.add_argument("--data", required=True)
    fit.add_argument("--labels", required=True)
    fit.add_argument("--theta", required=True)
    fit.add_argument("--mode", choices=[m.value for m in WeightingMode], default=None)
    fit.add_argument("--test-fraction", type=float, default=None, help="Share of pairs held out of the fit")
    fit.add_argument("--split-seed", type=int, default=None)
    fit.add_argument("--out", required=True)

    pred = command("predict", cmd_predict, "Predict Pr(pass) for every frame")
    pred.add_argument("--data", required=True)
    pred.add_argument("--model", choices=MODELS, default="cpt")
    pred.add_argument("--theta", default=None)
    pred.add_argument("--cpt", default=None)
    pred.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    pred.add_argument("--out", required=True)

    ev = command("evaluate", cmd_evaluate, "Score predictions against labels")
    ev.add_argument("--predictions", required=True, nargs="+")
    ev.add_argument("--labels", required=True)
    ev.add_argument("--granularity", choices=[g.value for g in Granularity], default=Granularity.FRAME.value)
    ev.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    ev.add_argument("--exclude-train", default=None, help="cpt.json whose training pairs are left out")
    ev.add_argument("--out", required=True)

    cur = command("curves", cmd_curves, "Export weighting and value curves")
    cur.add_argument("--cpt", required=True)
    cur.add_argument("--samples", type=int, default=101)
    cur.add_argument("--utility-range", type=float, default=10.0)
    cur.add_argument("--out", required=True)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    log = logger.bind(command=args.command)

    try:
        config = load_config(args.config)
        code = args.handler(args, config)
    except ProspectDriveError as e:
        log.error("command_failed", **e.to_dict())
        print(f"error: {e}", file=sys.stderr)
        code = e.exit_code
    except pydantic.ValidationError as e:
        log.error("invalid_input", errors=e.errors(include_url=False))
        print(f"error: {e}", file=sys.stderr)
        code = EXIT_INPUT_ERROR
    except OSError as e:
        log.error("io_error", error=str(e))
        print(f"error: {e}", file=sys.stderr)
        code = EXIT_INPUT_ERROR
    except Exception:
        log.exception("unexpected_error")
        code = EXIT_FAILURE

    if args.metrics_out:
        out = Path(args.metrics_out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_bytes(get_metrics().exposition())
    log.info("command_finished", exit_code=code)
    return code


if __name__ == "__main__":
    sys.exit(main())
