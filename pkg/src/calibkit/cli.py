"""Command-line front end: fit models, apply them, evaluate, and emit
reliability tables or synthetic datasets.

Exit status: 0 on success, 1 for usage or data errors, 2 for numerical
failures. Warnings go to stderr and do not change the status. Every
subcommand is deterministic given its flags.
"""
from __future__ import annotations

import argparse
import json
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .binary import fit_bbq, fit_histogram, fit_isotonic, fit_platt
from .dataset import (
    BinaryCalibrationSet,
    LogitDataset,
    load_logit_matrix,
    load_logits,
    save_logits,
    softmax,
)
from .errors import CalibrationError, DataIOError, NumericalError, ValidationError
from .metrics import evaluate, evaluate_probs, histogram_to_csv, report_to_json
from .multiclass import (
    AffineScalingModel,
    TemperatureModel,
    calibrated_probs,
    fit_affine,
    fit_one_vs_all,
    fit_temperature,
)
from .serialize import load_model, save_model
from .synth import SynthSpec, gen_sharpened

METHODS = (
    "histogram",
    "isotonic",
    "bbq",
    "platt",
    "temperature",
    "vector",
    "matrix",
    "ova-histogram",
    "ova-isotonic",
    "ova-bbq",
)

_SCALING_METHODS = ("temperature", "vector", "matrix")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage problems; we reserve 2 for
    # numerical failures, so route usage errors through our own handler.
    def error(self, message):
        raise _UsageError(message)


@contextmanager
def _stage(name: str):
    try:
        yield
    except CalibrationError as exc:
        raise type(exc)(f"{name}: {exc}") from exc


def _binary_view(d: LogitDataset) -> BinaryCalibrationSet:
    if d.k != 2:
        raise ValidationError(
            f"binary methods need K=2 logits; got K={d.k} "
            "(use the ova- variants for multiclass data)"
        )
    p = softmax(d.logits)
    return BinaryCalibrationSet(scores=p[:, 1], outcomes=(d.labels == 1).astype(np.int64))


def _fit_model(method: str, d: LogitDataset, bins: int):
    if method == "temperature":
        model = fit_temperature(d)
        return model, f"temperature={model.temperature!r}"
    if method in ("vector", "matrix"):
        model = fit_affine(d, method)
        diag_mean = float(np.mean(np.diag(model.weight)))
        return model, f"{method} scaling: diagonal_mean={diag_mean!r}"
    if method == "histogram":
        model = fit_histogram(_binary_view(d), m_bins=bins)
        return model, f"histogram: bins={model.thetas.size}"
    if method == "isotonic":
        model = fit_isotonic(_binary_view(d))
        return model, f"isotonic: pieces={model.values.size}"
    if method == "bbq":
        model = fit_bbq(_binary_view(d))
        return model, f"bbq: schemes={len(model.schemes)}"
    if method == "platt":
        s = _binary_view(d)
        model = fit_platt(s, from_logits=d.logits[:, 1] - d.logits[:, 0])
        return model, f"platt: a={model.a!r} b={model.b!r}"
    if method.startswith("ova-"):
        base = method[4:]
        kwargs = {"m_bins": bins} if base == "histogram" else {}
        model = fit_one_vs_all(d, base, **kwargs)
        return model, f"{method}: classes={model.k}"
    raise ValidationError(f"unknown method {method!r}; valid methods: {', '.join(METHODS)}")


def cmd_fit(args) -> int:
    if args.method not in METHODS:
        raise ValidationError(
            f"unknown method {args.method!r}; valid methods: {', '.join(METHODS)}"
        )
    with _stage("loading validation data"):
        d = load_logits(args.logits, args.labels)
    with _stage(f"fitting {args.method}"):
        model, summary = _fit_model(args.method, d, args.bins)
    with _stage("writing model"):
        save_model(model, args.out)
    print(summary)
    return 0


def cmd_eval(args) -> int:
    with _stage("loading evaluation data"):
        d = load_logits(args.logits, args.labels)
    with _stage("evaluating"):
        before = evaluate(d, args.bins)
    if args.model:
        with _stage("loading model"):
            model = load_model(args.model)
        with _stage("applying model"):
            probs = calibrated_probs(model, d.logits)
            after = evaluate_probs(probs, d.labels, args.bins)
        payload = {"before": report_to_json(before), "after": report_to_json(after)}
    else:
        payload = report_to_json(before)
    print(json.dumps(payload, indent=2))
    return 0


def cmd_apply(args) -> int:
    with _stage("loading model"):
        model = load_model(args.model)
    with _stage("loading logits"):
        logits = load_logit_matrix(args.logits)
    with _stage("applying model"):
        if args.full and not isinstance(model, (TemperatureModel, AffineScalingModel)):
            raise ValidationError("--full is only available for scaling methods")
        probs = calibrated_probs(model, logits)
    labels = np.argmax(probs, axis=1).tolist()
    confidences = probs[np.arange(probs.shape[0]), labels].tolist()
    with _stage("writing output"):
        try:
            with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
                for i, (label, conf) in enumerate(zip(labels, confidences)):
                    row = f"{label},{conf!r}"
                    if args.full:
                        row += "," + ",".join(repr(v) for v in probs[i].tolist())
                    fh.write(row + "\n")
        except OSError as exc:
            raise DataIOError(f"cannot write {args.out}: {exc}") from exc
    print(f"wrote {probs.shape[0]} calibrated predictions to {args.out}")
    return 0


def cmd_report(args) -> int:
    with _stage("loading evaluation data"):
        d = load_logits(args.logits, args.labels)
    with _stage("evaluating"):
        report = evaluate(d, args.bins)
    with _stage("writing reliability table"):
        try:
            Path(args.out).write_text(histogram_to_csv(report.histogram), encoding="utf-8")
        except OSError as exc:
            raise DataIOError(f"cannot write {args.out}: {exc}") from exc
    counts = [b.count for b in report.histogram.bins]
    print(json.dumps({"m_bins": report.histogram.m_bins, "counts": counts}))
    return 0


def cmd_synth(args) -> int:
    with _stage("generating"):
        spec = SynthSpec(
            n=args.n,
            k=args.classes,
            sharpening=args.sharpening,
            logit_scale=args.logit_scale,
            seed=args.seed,
        )
        d = gen_sharpened(spec)
    with _stage("writing dataset"):
        save_logits(d, args.logits, args.labels)
    print(f"wrote {d.n} samples with K={d.k} to {args.logits} and {args.labels}")
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="calibkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit a calibration model on validation data")
    fit.add_argument("--method", required=True, help=f"one of: {', '.join(METHODS)}")
    fit.add_argument("--logits", required=True, help="validation logits CSV")
    fit.add_argument("--labels", required=True, help="validation labels CSV")
    fit.add_argument("--out", required=True, help="output model JSON path")
    fit.add_argument("--bins", type=int, default=15, help="bin count for binning methods")
    fit.set_defaults(func=cmd_fit)

    ev = sub.add_parser("eval", help="compute calibration metrics, optionally before/after a model")
    ev.add_argument("--logits", required=True)
    ev.add_argument("--labels", required=True)
    ev.add_argument("--model", help="fitted model JSON; adds an after-calibration report")
    ev.add_argument("--bins", type=int, default=15)
    ev.set_defaults(func=cmd_eval)

    ap = sub.add_parser("apply", help="write calibrated predictions for a logits file")
    ap.add_argument("--model", required=True)
    ap.add_argument("--logits", required=True)
    ap.add_argument("--out", required=True, help="output CSV: label,confidence per row")
    ap.add_argument("--full", action="store_true", help="append the full distribution columns")
    ap.set_defaults(func=cmd_apply)

    rp = sub.add_parser("report", help="write the reliability table CSV")
    rp.add_argument("--logits", required=True)
    rp.add_argument("--labels", required=True)
    rp.add_argument("--out", required=True)
    rp.add_argument("--bins", type=int, default=15)
    rp.set_defaults(func=cmd_report)

    sy = sub.add_parser("synth", help="generate a synthetic logits/labels pair")
    sy.add_argument("--n", type=int, required=True)
    sy.add_argument("--classes", type=int, required=True)
    sy.add_argument("--sharpening", type=float, default=1.0)
    sy.add_argument("--logit-scale", type=float, default=1.0)
    sy.add_argument("--seed", type=int, default=0)
    sy.add_argument("--logits", required=True, help="output logits CSV path")
    sy.add_argument("--labels", required=True, help="output labels CSV path")
    sy.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CalibrationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
