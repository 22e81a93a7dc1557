"""Command-line interface: synth, train, extract, evaluate, gradcheck, cyclestats.

Exit codes: 0 success, 1 usage/validation error, 2 runtime/convergence
error (including a failed gradient check). Every artifact-producing
command writes a JSON run manifest next to its primary output; identical
flags, seed, and input digests give byte-identical primary outputs, and
the manifests differ only in their timestamp/duration fields.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, models
from .augment import augment_dataset, normalize_kind
from .data.canonical import (
    export_features_csv,
    load_annotations_csv,
    load_features_csv,
    write_canonical_csv,
)
from .data.container import load_model, save_model
from .data.synthetic import SyntheticConfig, generate_synthetic
from .errors import ConvergenceError, FormatError, GaitVerifyError, InvalidInputError
from .evaluate import ProtocolSpec, format_summary, run_protocol, write_report_csv
from .nn.gradcheck import gradient_check
from .nn.training import TrainConfig, train
from .ocsvm import DEFAULT_NU
from .pipeline import load_normalized_frames
from .signal import FRAME_LEN, cycle_stats

GRADCHECK_TOLERANCE = 1e-4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _config_digest(args: argparse.Namespace) -> str:
    skip = {"func", "config"}
    items = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    return hashlib.sha256(repr(items).encode()).hexdigest()[:16]


def _write_manifest(out_path, args, argv, inputs: list, started: float):
    manifest = {
        "command": " ".join(["gaitverify"] + list(argv)),
        "seed": getattr(args, "seed", None),
        "config_digest": _config_digest(args),
        "input_digests": {str(p): _sha256(p) for p in inputs},
        "toolkit_version": __version__,
        "duration_seconds": round(time.monotonic() - started, 3),
        "created_utc": datetime.now(timezone.utc).isoformat(),
    }
    Path(str(out_path) + ".manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n")


def _parse_config_file(path) -> dict[str, str]:
    """key = value lines; '#' starts a comment; blank lines ignored."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise _UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        values[key.strip().replace("-", "_")] = val.strip()
    return values


def _apply_config_file(parser: argparse.ArgumentParser, args: argparse.Namespace,
                       argv: list[str]):
    """Fill options from --config FILE; explicit flags keep precedence."""
    if not getattr(args, "config", None):
        return
    values = _parse_config_file(args.config)
    explicit = {tok.split("=", 1)[0].lstrip("-").replace("-", "_")
                for tok in argv if tok.startswith("--")}
    for action in parser._actions:
        if not action.option_strings or action.dest in ("help", "config"):
            continue
        key = action.dest
        if key in values and key not in explicit:
            raw = values[key]
            if isinstance(action, argparse._StoreTrueAction):
                setattr(args, key, raw.lower() in ("1", "true", "yes", "on"))
            else:
                setattr(args, key, action.type(raw) if action.type else raw)


def _gamma(text: str):
    if text == "auto":
        return "auto"
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"gamma must be 'auto' or a number, got {text!r}")


def _windows(text: str) -> list[int]:
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            out = list(range(int(lo), int(hi) + 1))
        else:
            out = [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad window spec {text!r}")
    if not out or any(not 1 <= w <= 5 for w in out):
        raise argparse.ArgumentTypeError("windows must lie in 1..5")
    return out


# --- commands -----------------------------------------------------------

def cmd_synth(args, argv):
    started = time.monotonic()
    config = SyntheticConfig(
        num_subjects=args.subjects,
        recording_seconds=args.seconds,
        sessions=args.sessions,
        recordings_per_subject_per_session=args.recordings,
        seed=args.seed,
        cross_day_drift=args.drift,
    )
    recordings = generate_synthetic(config)
    write_canonical_csv(recordings, args.out)
    frames_per_rec = len(recordings[0]) // FRAME_LEN
    print(f"wrote {args.out}: {len(recordings)} recordings, "
          f"{frames_per_rec} frames each, {len(recordings) * frames_per_rec} frames total")
    _write_manifest(args.out, args, argv, [], started)
    return 0


def _split_indices(n: int, val_fraction: float, rng: np.random.Generator):
    perm = rng.permutation(n)
    n_train = n - int(round(n * val_fraction))
    return perm[:n_train], perm[n_train:]


def cmd_train(args, argv):
    started = time.monotonic()
    frames = load_normalized_frames(args.data)
    if len(frames) < 10:
        raise InvalidInputError(f"need at least 10 frames to train, got {len(frames)}")
    augment_kind = normalize_kind(args.augment)
    config = TrainConfig(epochs=args.epochs, seed=args.seed,
                         batch_size=args.batch_size)

    rng = np.random.default_rng(args.seed)
    train_idx, val_idx = _split_indices(len(frames), config.val_fraction, rng)
    train_frames = [frames[i] for i in train_idx]
    val_frames = [frames[i] for i in val_idx]
    n_before = len(train_frames)
    if augment_kind != "none":
        train_frames = augment_dataset(train_frames, augment_kind,
                                       np.random.default_rng(args.seed + 1))
    print(f"training frames: {len(train_frames)}"
          + (f" (augmented from {n_before})" if augment_kind != "none" else "")
          + f", validation frames: {len(val_frames)}")

    x_train = models.frames_to_array(train_frames)
    x_val = models.frames_to_array(val_frames)
    meta = {"mode": args.mode, "augment": augment_kind, "seed": str(args.seed),
            "epochs": str(args.epochs), "train_config_digest": _config_digest(args)}

    if args.mode == "e2e":
        classes = sorted({f.subject_id for f in frames})
        if len(classes) < 2:
            raise InvalidInputError(
                f"end-to-end training needs >= 2 subjects, got {len(classes)}")
        label_of = {c: i for i, c in enumerate(classes)}
        y_train = np.array([label_of[f.subject_id] for f in train_frames])
        y_val = np.array([label_of[f.subject_id] for f in val_frames])
        model = models.build_fcn(len(classes), seed=args.seed)
        model, history = train(model, (x_train, y_train), (x_val, y_val), config)
        encoder = models.strip_classifier(model)
        meta["classes"] = ",".join(classes)
    else:
        model = models.build_autoencoder(seed=args.seed)
        model, history = train(model, (x_train, None), (x_val, None), config)
        encoder = model.get_encoder()

    save_model(models.to_container(encoder, meta), args.out)
    history_path = str(args.out) + ".history.csv"
    with open(history_path, "w") as fh:
        fh.write("epoch,train_loss,val_loss,lr\n")
        for e in history.epochs:
            fh.write(f"{e.epoch},{e.train_loss:.10g},{e.val_loss:.10g},{e.lr:.10g}\n")
    first, last = history.epochs[0], history.epochs[-1]
    print(f"trained {args.mode} for {args.epochs} epochs: train loss "
          f"{first.train_loss:.4f} -> {last.train_loss:.4f}, best epoch {history.best_epoch} "
          f"(val loss {min(history.val_losses):.4f})")
    print(f"wrote {args.out} and {history_path}")
    _write_manifest(args.out, args, argv, [args.data], started)
    return 0


def cmd_extract(args, argv):
    started = time.monotonic()
    frames = load_normalized_frames(args.data)
    if not frames:
        raise InvalidInputError(f"{args.data}: no complete frames")
    sources = [f.source for f in frames]
    inputs = [args.data]
    if args.raw:
        vectors = np.stack([models.raw_features(f) for f in frames])
    else:
        if not args.model:
            raise _UsageError("--model is required unless --raw is given")
        model = models.from_container(load_model(args.model))
        if isinstance(model, models.FCNClassifier):
            model = models.strip_classifier(model)
        elif isinstance(model, models.Autoencoder):
            model = model.get_encoder()
        vectors = model.transform(models.frames_to_array(frames))
        inputs.append(args.model)
    export_features_csv(args.out, sources, vectors)
    print(f"wrote {args.out}: {vectors.shape[0]} vectors of dimension {vectors.shape[1]}")
    _write_manifest(args.out, args, argv, inputs, started)
    return 0


def _windowed_out(base: str, window: int, multiple: bool) -> str:
    if not multiple:
        return base
    path = Path(base)
    return str(path.with_name(f"{path.stem}.w{window}{path.suffix}"))


def cmd_evaluate(args, argv):
    started = time.monotonic()
    sources, vectors = load_features_csv(args.features)
    feature_kind = args.label_features or ("raw" if vectors.shape[1] == 384 else "learned")
    reports = []
    multiple = len(args.window) > 1
    for window in args.window:
        spec = ProtocolSpec(args.protocol, aggregation_window=window)
        report = run_protocol(sources, vectors, spec, nu=args.nu, gamma=args.gamma,
                              feature_kind=feature_kind,
                              augmentation=args.label_augment)
        for warning in report.warnings:
            print(f"warning: {warning}", file=sys.stderr)
        out = _windowed_out(args.out, window, multiple)
        write_report_csv(report, out)
        print(f"wrote {out} ({len(report.users)} users)")
        reports.append(report)
    summary = format_summary(reports)
    summary_path = str(args.out) + ".summary.txt"
    Path(summary_path).write_text(summary)
    print(summary, end="")
    _write_manifest(args.out, args, argv, [args.features], started)
    return 0


class _CorruptedGradients:
    """Negative-control hook: scales one tensor's analytic gradient."""

    def __init__(self, inner, tensor_name: str, factor: float = 1.01):
        self.inner = inner
        self.tensor_name = tensor_name
        self.factor = factor

    def loss_and_backward(self, *a, **kw):
        loss = self.inner.loss_and_backward(*a, **kw)
        for p in self.inner.parameters():
            if p.name == self.tensor_name:
                p.grad *= self.factor
        return loss

    def loss_only(self, *a, **kw):
        return self.inner.loss_only(*a, **kw)

    def parameters(self):
        return self.inner.parameters()


def cmd_gradcheck(args, argv):
    rng = np.random.default_rng(args.seed)
    x = rng.standard_normal((2, FRAME_LEN, 3))
    labels = rng.integers(0, 10, size=2)

    fcn = models.build_fcn(10, seed=args.seed).cast(np.float64)
    ae = models.build_autoencoder(seed=args.seed).cast(np.float64)
    checks = [("fcn", fcn, labels), ("autoencoder", ae, None)]

    worst = 0.0
    for title, model, y in checks:
        if args.corrupt:
            model = _CorruptedGradients(model, args.corrupt)
        report = gradient_check(model, x, y, max_exhaustive=16, probes=8,
                                seed=args.seed)
        print(f"[{title}]")
        for t in report.tensors:
            print(f"  {t.name:<24} size {t.size:<8} {t.method:<12} "
                  f"max rel err {t.max_relative_error:.3e}")
        print(f"  -> max {report.max_relative_error:.3e}")
        worst = max(worst, report.max_relative_error)
    if worst >= GRADCHECK_TOLERANCE:
        print(f"gradient check FAILED: {worst:.3e} >= {GRADCHECK_TOLERANCE:g}")
        return 2
    print(f"gradient check passed: max relative error {worst:.3e} < {GRADCHECK_TOLERANCE:g}")
    return 0


def cmd_cyclestats(args, argv):
    annotations = load_annotations_csv(args.annotations)
    if not annotations:
        raise InvalidInputError(f"{args.annotations}: no annotations")
    stats = cycle_stats(annotations)
    print(f"cycles: {stats.lengths.size}")
    print(f"mean length: {stats.mean:.2f} samples")
    print(f"median length: {stats.median:.2f} samples")
    print(f"coverage at {FRAME_LEN}: {stats.coverage_at(FRAME_LEN):.4f}")
    print("histogram:")
    for length in sorted(stats.histogram):
        print(f"  {length:4d}: {stats.histogram[length]}")
    return 0


# --- parser -------------------------------------------------------------

def build_parser() -> tuple[_Parser, dict[str, _Parser]]:
    parser = _Parser(prog="gaitverify",
                     description="Gait feature learning and one-class-SVM verification")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    parsers: dict[str, _Parser] = {}

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--config", help="key = value file; explicit flags win")
        parsers[name] = p
        return p

    p = add("synth", cmd_synth, "generate a synthetic canonical-CSV dataset")
    p.add_argument("--subjects", type=int, required=True)
    p.add_argument("--seconds", type=float, required=True,
                   help="seconds per recording")
    p.add_argument("--sessions", type=int, choices=(1, 2), default=2)
    p.add_argument("--recordings", type=int, default=1,
                   help="recordings per subject per session")
    p.add_argument("--drift", type=float, default=0.0,
                   help="cross-day drift in [0,1]")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = add("train", cmd_train, "train a feature extractor and save the encoder")
    p.add_argument("--mode", choices=("e2e", "ae"), required=True)
    p.add_argument("--data", required=True, help="canonical gait CSV")
    p.add_argument("--augment", choices=("none", "rnd", "cshift"), default="none")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output model container")

    p = add("extract", cmd_extract, "extract features into a CSV")
    p.add_argument("--model", help="encoder container (omit with --raw)")
    p.add_argument("--data", required=True, help="canonical gait CSV")
    p.add_argument("--out", required=True, help="output features CSV")
    p.add_argument("--raw", action="store_true",
                   help="emit 384-d concatenated raw features instead")

    p = add("evaluate", cmd_evaluate, "run a verification protocol over features")
    p.add_argument("--features", required=True, help="features CSV")
    p.add_argument("--protocol", choices=("sd1", "sd2", "cd"), required=True)
    p.add_argument("--window", type=_windows, default=[1],
                   help="aggregation window, e.g. 3 or 1..5 or 1,3,5")
    p.add_argument("--nu", type=float, default=DEFAULT_NU)
    p.add_argument("--gamma", type=_gamma, default="auto")
    p.add_argument("--label-features", default=None,
                   help="feature-kind label for the report (default: inferred)")
    p.add_argument("--label-augment", default="none",
                   help="augmentation label for the report")
    p.add_argument("--out", required=True, help="output per-user report CSV")

    p = add("gradcheck", cmd_gradcheck, "finite-difference check of all backward passes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corrupt", default=None,
                   help="tensor name whose gradient is deliberately corrupted "
                        "(negative-control test hook)")

    p = add("cyclestats", cmd_cyclestats, "cycle-length statistics from annotations")
    p.add_argument("--annotations", required=True, help="annotations CSV")

    return parser, parsers


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, parsers = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_help()
            return 1
        _apply_config_file(parsers[args.command], args, argv)
        return args.func(args, argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (InvalidInputError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GaitVerifyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
