"""Command-line entry point emitting JSON reports on stdout.

Subcommands::

    kcl run    — full iterative completion over a feature file
    kcl ablate — like run, plus the no-completion baseline for comparison
    kcl eval   — score the base method only (no completion loop)
    kcl synth  — write a seeded synthetic benchmark to a directory

Exit codes: 0 success, 1 validation/configuration error, 2 I/O or file
format error. Set KCL_LOG=debug for per-step logging.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .core import Bundle, HyperParams, normalize, one_hot, validate_run
from .engine import HpMode, Mode, RunConfig, accuracy, run
from .errors import FormatError, MissingLabels, ValidationError
from .io import read_features, read_label_file, write_emb, write_labels
from .selection import SelectionKind, SelectionRule
from .similarity import ModalityMask, masked_logits
from .synth import SynthSpec, gen_synth

logger = logging.getLogger(__name__)

_MASKS = {
    "both": ModalityMask(use_text=True, use_visual=True),
    "text": ModalityMask(use_text=True, use_visual=False),
    "visual": ModalityMask(use_text=False, use_visual=True),
}


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; bad flags are validation errors here.
    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--features", required=True, help="test feature matrix (.emb or .csv)")
    p.add_argument("--weights", required=True, help="class anchor matrix (.emb or .csv)")
    p.add_argument("--labels", help="test labels for accuracy reporting")
    p.add_argument("--mode", choices=["zero-shot", "few-shot"], default="zero-shot")
    p.add_argument("--cache-features", help="labeled shot features (few-shot)")
    p.add_argument("--cache-labels", help="labeled shot class indices (few-shot)")
    p.add_argument("--val-features", help="validation features for grid search")
    p.add_argument("--val-labels", help="validation labels for grid search")
    p.add_argument("--normalize", action="store_true",
                   help="L2-normalize matrix rows after reading")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--out", help="also write the JSON report to this path")


def _add_loop_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rule", choices=[k.value for k in SelectionKind], default="mutual")
    p.add_argument("--k", type=int, default=1, help="neighbors per class per step (K1)")
    p.add_argument("--steps", type=int, default=10, help="maximum completion steps")
    p.add_argument("--budget", type=int, default=None,
                   help="per-class absorption cap (0 disables completion)")
    p.add_argument("--modality", choices=sorted(_MASKS), default="both")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--search", action="store_true",
                   help="grid-search hyper-parameters on the validation split")
    p.add_argument("--threads", type=int, default=1,
                   help="parallel workers for grid search")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kcl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_ in (
        ("run", "run the iterative completion loop"),
        ("ablate", "run one variant plus the no-completion baseline"),
    ):
        p = sub.add_parser(name, help=help_)
        _add_data_flags(p)
        _add_loop_flags(p)

    p = sub.add_parser("eval", help="score the base method without completion")
    _add_data_flags(p)
    p.add_argument("--modality", choices=sorted(_MASKS), default="both")

    p = sub.add_parser("synth", help="generate a seeded synthetic benchmark")
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--samples-per-class", type=int, default=20)
    p.add_argument("--shots", type=int, default=1)
    p.add_argument("--sep", type=float, default=1.0, help="center separation scale")
    p.add_argument("--sigma", type=float, default=0.25, help="sample noise sigma")
    p.add_argument("--bias", type=float, default=0.6, help="shot displacement toward the next class")
    p.add_argument("--val-per-class", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")

    return parser


def _maybe_normalize(matrix, flag: bool):
    return normalize(matrix) if flag else matrix


def _load_bundle(args) -> Bundle:
    features = _maybe_normalize(read_features(args.features), args.normalize)
    weights = _maybe_normalize(read_features(args.weights), args.normalize)

    has_cache = bool(args.cache_features or args.cache_labels)
    if has_cache and not (args.cache_features and args.cache_labels):
        raise MissingLabels("--cache-features and --cache-labels must be given together")
    if args.mode == "few-shot" and not has_cache:
        raise MissingLabels("few-shot mode needs --cache-features and --cache-labels")
    if args.mode == "zero-shot" and has_cache:
        raise ValidationError("cache files supplied in zero-shot mode; drop them or use --mode few-shot")

    cache_f = cache_l = None
    if has_cache:
        cache_f = _maybe_normalize(read_features(args.cache_features), args.normalize)
        cache_l = one_hot(read_label_file(args.cache_labels), weights.shape[0])

    if bool(args.val_features) != bool(args.val_labels):
        raise MissingLabels("--val-features and --val-labels must be given together")
    val_f = val_y = None
    if args.val_features:
        val_f = _maybe_normalize(read_features(args.val_features), args.normalize)
        val_y = read_label_file(args.val_labels)

    test_labels = read_label_file(args.labels) if args.labels else None

    return validate_run(
        features,
        weights,
        cache_f,
        cache_l,
        test_labels=test_labels,
        val_features=val_f,
        val_labels=val_y,
    )


def _make_config(args) -> RunConfig:
    hp = HyperParams(
        alpha=args.alpha,
        beta=args.beta,
        lam=args.lam,
        mu=args.mu,
        k1=args.k,
        max_steps=args.steps,
    )
    return RunConfig(
        mode=Mode(args.mode),
        rule=SelectionRule(kind=SelectionKind(args.rule), k1=args.k),
        hp=hp,
        hp_mode=HpMode.VALIDATION_SEARCH if args.search else HpMode.FIXED,
        modality=_MASKS[args.modality],
        budget=args.budget,
        threads=args.threads,
    )


def _base_logits(bundle: Bundle, mode: str, mask: ModalityMask, alpha: float, beta: float):
    cache_f = bundle.cache_features if mode == "few-shot" else None
    cache_l = bundle.cache_labels if mode == "few-shot" else None
    hp = HyperParams(alpha=alpha, beta=beta)
    empty_d = np.zeros((0, bundle.dim))
    empty_l = one_hot([], bundle.num_classes)
    return masked_logits(
        bundle.features, bundle.weights, cache_f, cache_l, empty_d, empty_l, hp, mask
    )


def _emit(report: dict, out_path: str | None) -> None:
    text = json.dumps(report)
    if out_path:
        Path(out_path).write_text(text + "\n")
    print(text)


def _cmd_run(args) -> int:
    bundle = _load_bundle(args)
    report = run(bundle, _make_config(args))
    _emit(report.to_dict(), args.out)
    return 0


def _cmd_ablate(args) -> int:
    if not args.labels:
        raise MissingLabels("ablate compares accuracies and needs --labels")
    bundle = _load_bundle(args)
    report = run(bundle, _make_config(args)).to_dict()
    base = np.argmax(
        _base_logits(bundle, args.mode, _MASKS[args.modality], args.alpha, args.beta),
        axis=1,
    )
    report["rule"] = args.rule
    report["modality"] = args.modality
    report["mode"] = args.mode
    report["baseline_accuracy"] = accuracy(base, bundle.test_labels)
    _emit(report, args.out)
    return 0


def _cmd_eval(args) -> int:
    bundle = _load_bundle(args)
    preds = np.argmax(
        _base_logits(bundle, args.mode, _MASKS[args.modality], args.alpha, args.beta),
        axis=1,
    )
    report: dict = {"predictions": [int(p) for p in preds]}
    if bundle.test_labels is not None:
        report["accuracy"] = accuracy(preds, bundle.test_labels)
    _emit(report, args.out)
    return 0


def _cmd_synth(args) -> int:
    spec = SynthSpec(
        classes=args.classes,
        dim=args.dim,
        samples_per_class=args.samples_per_class,
        shots=args.shots,
        center_separation=args.sep,
        noise_sigma=args.sigma,
        center_bias=args.bias,
        seed=args.seed,
        val_per_class=args.val_per_class,
    )
    data = gen_synth(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    files = {
        "weights": out / "weights.emb",
        "test_features": out / "test.emb",
        "test_labels": out / "test.lbl",
        "cache_features": out / "cache.emb",
        "cache_labels": out / "cache.lbl",
    }
    write_emb(files["weights"], data.weights)
    write_emb(files["test_features"], data.test_features)
    write_labels(files["test_labels"], data.test_labels)
    write_emb(files["cache_features"], data.cache_features)
    write_labels(files["cache_labels"], np.argmax(data.cache_labels, axis=1))
    if data.val_features is not None:
        files["val_features"] = out / "val.emb"
        files["val_labels"] = out / "val.lbl"
        write_emb(files["val_features"], data.val_features)
        write_labels(files["val_labels"], data.val_labels)

    manifest = {
        "files": {k: str(v) for k, v in files.items()},
        "classes": spec.classes,
        "dim": spec.dim,
        "n_test": int(data.test_features.shape[0]),
        "n_cache": int(data.cache_features.shape[0]),
        "seed": spec.seed,
    }
    print(json.dumps(manifest))
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "ablate": _cmd_ablate,
    "eval": _cmd_eval,
    "synth": _cmd_synth,
}


def main(argv=None) -> int:
    level = os.environ.get("KCL_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"kcl: {exc}", file=sys.stderr)
        return 1
    except (FormatError, OSError) as exc:
        print(f"kcl: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
