"""Batch command-line frontend.

Commands
--------
simulate      synthesize labeled phantom slice sets
average       run one averaging method on a slice set container
evaluate      subset/average/quantify protocol over a labeled dataset
sweep-lambda  side-by-side steepness sweep on one slice set
histogram     dropout-ratio histogram of a labeled dataset

Exit codes: 0 success, 1 validation/usage error, 2 I/O error. Set
``DWID_LOG`` (DEBUG/INFO/WARNING/ERROR) for log verbosity.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import container, metrics, phantom, quant, reference
from .container import RepetitionStack, SliceSet
from .errors import ValidationError
from .pipeline import (
    METHOD_CD,
    METHOD_DLAWA,
    METHODS,
    MethodSpec,
    make_ground_truth,
    run_method,
    subset_indices,
    take_repetitions,
)
from .weighting import AwaParams

logger = logging.getLogger("dwid")


def _configure_logging() -> None:
    level = os.environ.get("DWID_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors by default; keep 1 = validation
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ValidationError(message)


def _awa_params(args) -> AwaParams:
    return AwaParams(
        patch_size=args.patch,
        tolerance_factor=args.nu,
        steepness=getattr(args, "lambda_", AwaParams().steepness),
    )


def _add_awa_flags(parser, with_lambda=True):
    parser.add_argument("-P", "--patch", type=int, default=AwaParams().patch_size,
                        help="odd patch side length")
    parser.add_argument("--nu", type=float, default=AwaParams().tolerance_factor,
                        help="tolerance width factor")
    if with_lambda:
        parser.add_argument("--lambda", dest="lambda_", type=float,
                            default=AwaParams().steepness, help="weighting steepness")


def _resolve_reference(args, slice_set: SliceSet) -> reference.ReferenceSubset:
    """Pick the reference source for cd/dlawa from the CLI flags."""
    n = slice_set.high_b.n_reps
    explicit = [name for name, given in (
        ("--mask", args.mask is not None),
        ("--predictions", args.predictions is not None),
        ("--baseline", args.baseline),
    ) if given]
    if len(explicit) > 1:
        raise ValidationError(f"reference source is ambiguous: {' and '.join(explicit)}")
    if args.mask is not None:
        return reference.read_mask(args.mask, n)
    if args.predictions is not None:
        pred = reference.read_predictions(args.predictions, n)
        return reference.subset_from_predictions(pred)
    if args.baseline:
        return reference.subset_from_predictions(reference.baseline_classifier(slice_set))
    if slice_set.high_b.labels is not None:
        return reference.subset_from_labels(slice_set.high_b)
    raise ValidationError(
        "method needs a reference source: label the container or pass "
        "--predictions, --mask, or --baseline"
    )


def _write_image(image: np.ndarray, b_value: float, base: Path) -> None:
    container.write_repetition_stack(
        RepetitionStack(image[np.newaxis].astype("<f4"), b_value), base
    )


def cmd_simulate(args) -> None:
    spec = phantom.load_spec(args.config) if args.config else phantom.default_spec()
    if args.seed is not None:
        spec = phantom.spec_from_json({**phantom.spec_to_json(spec), "seed": args.seed})
    out = Path(args.out)
    if args.count == 1:
        container.write_stack(phantom.synthesize(spec), out)
        logger.info("wrote slice set %s", out)
        return
    for i in range(args.count):
        spec_i = phantom.spec_from_json({**phantom.spec_to_json(spec), "seed": spec.seed + i})
        container.write_stack(phantom.synthesize(spec_i), out / f"slice_{i:03d}")
    logger.info("wrote %d slice sets under %s", args.count, out)


def cmd_average(args) -> None:
    slice_set = container.read_stack(args.in_)
    params = _awa_params(args)
    subset = None
    if args.method in (METHOD_CD, METHOD_DLAWA):
        subset = _resolve_reference(args, slice_set)
    spec = MethodSpec(args.method, params, subset)
    image, maps = run_method(slice_set, spec)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    b_high = slice_set.high_b.b_value
    _write_image(image, b_high, out / "average")
    container.write_repetition_stack(
        RepetitionStack(maps.w.astype("<f4"), b_high), out / "weights"
    )
    manifest = {
        "command": "average",
        "input": str(args.in_),
        "method": args.method,
        "params": {"patch": params.patch_size, "nu": params.tolerance_factor,
                   "lambda": params.steepness},
        "seed": args.seed,
        "reference": None if subset is None else {
            "origin": subset.origin,
            "selected": [bool(x) for x in subset.selected],
            "fallback": subset.fallback,
        },
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    logger.info("wrote %s average to %s", args.method, out)


def _evaluate_slice(task: dict) -> list[dict]:
    """All records for one slice across runs; safe to run in a worker."""
    slice_set = container.read_stack(task["path"])
    stack = slice_set.high_b
    if stack.labels is None:
        raise ValidationError(f"{task['path']}: evaluate needs labeled data")
    clean = np.array([lab == container.LABEL_CLEAN for lab in stack.labels])
    n0 = int(clean.sum())
    name = task["name"]
    if n0 == 0:
        logger.warning("%s: no clean repetitions, skipped", name)
        return []

    truth = make_ground_truth(slice_set)
    low_image = slice_set.low_b.data.astype(np.float64).mean(axis=0)
    b_low, b_high = slice_set.low_b.b_value, stack.b_value
    full_pred = None
    if task["predictions_dir"] is not None:
        full_pred = reference.read_predictions(
            Path(task["predictions_dir"]) / f"{name}.json", stack.n_reps
        )

    records = []
    for run in range(task["runs"]):
        seed = task["seed"] + 100003 * task["index"] + run
        idx = subset_indices(stack.n_reps, n0, seed)
        subset_set = take_repetitions(slice_set, idx)
        sub_stack = subset_set.high_b
        n_clean = sum(lab == container.LABEL_CLEAN for lab in sub_stack.labels)
        ratio = quant.dropout_ratio(n_clean, sub_stack.n_reps)

        if task["reference"] == "labels":
            ref = reference.subset_from_labels(sub_stack)
        elif task["reference"] == "baseline":
            ref = reference.subset_from_predictions(reference.baseline_classifier(subset_set))
        else:
            pred = reference.PredictionRecord(full_pred.probs[idx], full_pred.threshold)
            ref = reference.subset_from_predictions(pred)

        def record(method, image, maps):
            row = {"slice": name, "run": run, "dropout_ratio": ratio, "method": method,
                   "adc_roi": None, "noise_mean": None}
            if maps is not None:
                row["noise_mean"] = float(np.mean(quant.relative_noise_map(maps).values))
            if slice_set.roi is not None:
                adc = quant.adc_map(low_image, image, b_low, b_high)
                row["adc_roi"] = quant.roi_mean(adc, slice_set.roi)
            records.append(row)

        record("reference", truth, None)
        params = AwaParams(*task["awa"])
        for method in task["methods"]:
            spec = MethodSpec(method, params,
                              ref if method in (METHOD_CD, METHOD_DLAWA) else None)
            image, maps = run_method(subset_set, spec)
            record(method, image, maps)
    return records


def _bin_centers(stats):
    return [(s.bin_low + s.bin_high) / 2 for s in stats]


def _plot_binned(stats, ylabel, path, cd_model=False):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    methods = sorted({s.method for s in stats})
    for method in methods:
        rows = [s for s in stats if s.method == method]
        ax.errorbar(_bin_centers(rows), [s.mean for s in rows],
                    yerr=[s.std for s in rows], marker="o", capsize=3, label=method)
    if cd_model:
        ratios = np.linspace(0, 95, 200)
        ax.plot(ratios, np.sqrt(1.0 / (1.0 - ratios / 100.0)), "m--",
                label="cd (ideal model)")
    ax.set_xlabel("dropout ratio bin center [%]")
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def cmd_evaluate(args) -> None:
    root = Path(args.in_)
    slice_dirs = sorted(p for p in root.iterdir() if container.is_slice_set_dir(p))
    if not slice_dirs:
        raise ValidationError(f"{root}: no slice set containers found")
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise ValidationError(f"unknown method {m!r}")
    if args.reference == "predictions" and args.predictions_dir is None:
        raise ValidationError("--reference predictions requires --predictions-dir")

    tasks = [
        {
            "path": str(p),
            "name": p.name,
            "index": i,
            "runs": args.runs,
            "seed": args.seed,
            "methods": tuple(methods),
            "reference": args.reference,
            "predictions_dir": args.predictions_dir,
            "awa": (args.patch, args.nu, args.lambda_),
        }
        for i, p in enumerate(slice_dirs)
    ]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            per_slice = list(pool.map(_evaluate_slice, tasks))
    else:
        per_slice = [_evaluate_slice(t) for t in tasks]
    records = [row for rows in per_slice for row in rows]
    if not records:
        raise ValidationError("no usable slices (all skipped)")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "records.csv").open("w", newline="") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["slice", "run", "dropout_ratio", "method", "adc_roi", "noise_mean"]
        )
        writer.writeheader()
        for row in records:
            writer.writerow({k: ("" if v is None else v) for k, v in row.items()})

    adc_stats = metrics.binned_analysis(
        (r["dropout_ratio"], r["method"], r["adc_roi"])
        for r in records if r["adc_roi"] is not None
    )
    noise_stats = metrics.binned_analysis(
        (r["dropout_ratio"], r["method"], r["noise_mean"])
        for r in records if r["noise_mean"] is not None
    )
    metrics.write_binned_csv(adc_stats, out / "binned_adc.csv")
    metrics.write_binned_csv(noise_stats, out / "binned_noise.csv")
    if adc_stats:
        _plot_binned(adc_stats, "ROI ADC [mm$^2$/s]", out / "adc_vs_dropout.png")
    if noise_stats:
        _plot_binned(noise_stats, "mean relative noise", out / "noise_vs_dropout.png",
                     cd_model=True)
    metrics.write_summary_json(
        {
            "slices": len(slice_dirs),
            "runs": args.runs,
            "seed": args.seed,
            "methods": methods,
            "records": len(records),
            "records_with_adc": sum(r["adc_roi"] is not None for r in records),
        },
        out / "summary.json",
    )
    logger.info("evaluated %d slices x %d runs -> %s", len(slice_dirs), args.runs, out)


def cmd_sweep_lambda(args) -> None:
    lambdas = [float(x) for x in args.lambdas.split(",") if x.strip()]
    if not lambdas:
        raise ValidationError("no steepness values given")
    slice_set = container.read_stack(args.in_)
    subset = _resolve_reference(args, slice_set)
    b_low, b_high = slice_set.low_b.b_value, slice_set.high_b.b_value
    low_image = slice_set.low_b.data.astype(np.float64).mean(axis=0)

    reference_adc = None
    if slice_set.high_b.labels is not None and slice_set.roi is not None:
        truth = make_ground_truth(slice_set)
        reference_adc = quant.roi_mean(
            quant.adc_map(low_image, truth, b_low, b_high), slice_set.roi
        )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for lam in lambdas:
        params = AwaParams(args.patch, args.nu, lam)
        image, maps = run_method(slice_set, MethodSpec(METHOD_DLAWA, params, subset))
        noise = quant.relative_noise_map(maps)
        adc = quant.adc_map(low_image, image, b_low, b_high)

        sub = out / f"lambda_{lam:g}"
        _write_image(image, b_high, sub / "average")
        container.write_repetition_stack(
            RepetitionStack(maps.w.astype("<f4"), b_high), sub / "weights"
        )
        _write_image(adc.values, 0.0, sub / "adc")
        _write_image(noise.values, 0.0, sub / "noise")

        row = {"lambda": lam, "mean_relative_noise": float(np.mean(noise.values))}
        if slice_set.roi is not None:
            row["roi_adc"] = quant.roi_mean(adc, slice_set.roi)
            if reference_adc is not None:
                row["roi_adc_reference"] = reference_adc
        rows.append(row)

    fields = ["lambda", "mean_relative_noise", "roi_adc", "roi_adc_reference"]
    with (out / "sweep.csv").open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in fields})
    logger.info("swept lambda over %s -> %s", lambdas, out)


def cmd_histogram(args) -> None:
    root = Path(args.in_)
    slice_dirs = sorted(p for p in root.iterdir() if container.is_slice_set_dir(p))
    if not slice_dirs:
        raise ValidationError(f"{root}: no slice set containers found")
    counts = [0] * 10
    for p in slice_dirs:
        stack = container.read_stack(p).high_b
        if stack.labels is None:
            raise ValidationError(f"{p}: histogram needs labeled data")
        n_clean = sum(lab == container.LABEL_CLEAN for lab in stack.labels)
        counts[metrics.bin_index(quant.dropout_ratio(n_clean, stack.n_reps))] += 1

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_low", "bin_high", "count"])
        for i, count in enumerate(counts):
            writer.writerow([i * 10.0, (i + 1) * 10.0, count])
    logger.info("histogram over %d slices -> %s", len(slice_dirs), out)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dwid", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize labeled phantom slice sets")
    p.add_argument("--config", help="phantom description JSON (default: built-in layout)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--count", type=int, default=1,
                   help="number of slices (seeds increment; >1 writes subdirectories)")
    p.add_argument("--out", required=True, help="output container directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("average", help="average one slice set with one method")
    p.add_argument("--in", dest="in_", required=True, help="slice set container")
    p.add_argument("--method", required=True, choices=METHODS)
    _add_awa_flags(p)
    p.add_argument("--predictions", help="prediction interchange JSON")
    p.add_argument("--mask", help="explicit reference subset JSON")
    p.add_argument("--baseline", action="store_true", help="use the built-in classifier")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_average)

    p = sub.add_parser("evaluate", help="protocol evaluation over a labeled dataset")
    p.add_argument("--in", dest="in_", required=True, help="directory of slice set containers")
    p.add_argument("--runs", type=int, default=15, help="random input subsets per slice")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("--reference", choices=["labels", "baseline", "predictions"],
                   default="labels", help="reference source for cd/dlawa")
    p.add_argument("--predictions-dir", help="directory of <slice>.json prediction files")
    p.add_argument("--jobs", type=int, default=1, help="parallel slice workers")
    _add_awa_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep-lambda", help="steepness sweep on one slice set")
    p.add_argument("--in", dest="in_", required=True, help="slice set container")
    p.add_argument("--lambdas", default="1,5,25", help="comma-separated steepness values")
    _add_awa_flags(p, with_lambda=False)
    p.add_argument("--predictions", help="prediction interchange JSON")
    p.add_argument("--mask", help="explicit reference subset JSON")
    p.add_argument("--baseline", action="store_true", help="use the built-in classifier")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep_lambda)

    p = sub.add_parser("histogram", help="dropout-ratio histogram of a labeled dataset")
    p.add_argument("--in", dest="in_", required=True, help="directory of slice set containers")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_histogram)

    return parser


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
    except ValidationError as exc:
        logger.error("%s", exc)
        print(f"dwid: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        logger.error("%s", exc)
        print(f"dwid: I/O error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
