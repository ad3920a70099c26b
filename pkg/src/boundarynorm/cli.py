"""Command-line interface tying training, scoring, calibration, and
diagnostics into reproducible runs.

Commands write delimited outputs (CSV/JSON) plus rendered PNG figures into
the --out directory, and finish with a run manifest listing every artifact.
Identical config + seed reproduces the CSV/JSON bytes exactly; wall-clock
information lives only in the manifest.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _apply_thread_cap() -> None:
    cap = os.environ.get("BN_THREADS")
    if cap:
        for var in _THREAD_VARS:
            os.environ.setdefault(var, cap)


def _write_json(obj, path) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_manifest(out_dir, command, config_snapshot, seed, outputs, started) -> str:
    from . import __version__

    manifest_path = os.path.join(out_dir, "manifest.json")
    payload = {
        "command": command,
        "config": config_snapshot,
        "seed": seed,
        "outputs": sorted(os.path.basename(p) for p in outputs),
        "version": __version__,
        "duration_seconds": time.time() - started,
    }
    tmp = manifest_path + ".tmp"
    _write_json(payload, tmp)
    os.replace(tmp, manifest_path)
    return manifest_path


def cmd_train(args) -> int:
    from .config import load_run_config
    from .model import init_model, save_checkpoint
    from .trainer import train

    started = time.time()
    run = load_run_config(args.config, seed_override=args.seed)
    for note in run.warnings:
        print(f"warning: {note}", file=sys.stderr)
    train_data, val_data = run.build_data()
    model = init_model(run.layers, seed=run.train.seed)
    final, log = train(model, train_data, run.train, val_data=val_data)

    os.makedirs(args.out, exist_ok=True)
    outputs = []
    ckpt_path = os.path.join(args.out, "model.ckpt")
    save_checkpoint(final, ckpt_path)
    outputs.append(ckpt_path)
    log_path = os.path.join(args.out, "train_log.csv")
    log.to_csv(log_path)
    outputs.append(log_path)
    if not args.no_figures:
        from .figures import render_train_curves

        fig_path = os.path.join(args.out, "train_curves.png")
        render_train_curves(log, fig_path)
        outputs.append(fig_path)
    outputs.append(
        _write_manifest(args.out, "train", dict(run.pairs), run.train.seed, outputs, started)
    )
    for path in outputs:
        if not os.path.exists(path):
            print(f"error: expected output {path} missing", file=sys.stderr)
            return 1
    return 0


def _load_eval_inputs(args):
    from .data import parse_data_spec
    from .model import forward, load_checkpoint

    model = load_checkpoint(args.checkpoint)
    id_data = parse_data_spec(args.id_data)
    ood_spec = getattr(args, "ood_data", None)
    ood_data = parse_data_spec(ood_spec) if ood_spec else None
    id_batch = forward(model, id_data.inputs)
    ood_batch = forward(model, ood_data.inputs) if ood_data is not None else None
    return model, id_data, ood_data, id_batch, ood_batch


def cmd_eval_ood(args) -> int:
    from .data import parse_data_spec
    from .evaluation import evaluate_detection
    from .model import forward
    from .scoring import (
        SCORER_NAMES,
        ScoreSet,
        ScorerSpec,
        export_scores_csv,
        prepare_stats,
        score,
    )

    started = time.time()
    names = sorted({s.strip() for s in args.scorers.split(",") if s.strip()})
    for name in names:
        if name not in SCORER_NAMES:
            print(
                f"error: unknown scorer {name!r}; valid scorers: "
                + ", ".join(SCORER_NAMES),
                file=sys.stderr,
            )
            return 1
    if not names:
        print("error: no scorers requested", file=sys.stderr)
        return 1

    model, id_data, ood_data, id_batch, ood_batch = _load_eval_inputs(args)
    if ood_batch is None:
        print("error: eval-ood requires --ood-data", file=sys.stderr)
        return 1
    if args.stats_data:
        stats_data = parse_data_spec(args.stats_data)
        stats_batch = forward(model, stats_data.inputs)
    else:
        stats_batch = id_batch
    stats = prepare_stats(stats_batch)

    os.makedirs(args.out, exist_ok=True)
    outputs = []
    for name in names:
        spec = ScorerSpec(name=name)
        try:
            id_scores = score(spec, id_batch, model=model, stats=stats)
            ood_scores = score(spec, ood_batch, model=model, stats=stats)
        except ValueError as exc:
            print(f"error: scorer {name!r}: {exc}", file=sys.stderr)
            return 1
        score_set = ScoreSet(id_scores=id_scores, ood_scores=ood_scores)
        report = evaluate_detection(score_set)
        report_path = os.path.join(args.out, f"report_{name}.json")
        _write_json(report.to_dict(), report_path)
        outputs.append(report_path)
        csv_path = os.path.join(args.out, f"scores_{name}.csv")
        export_scores_csv(score_set, csv_path)
        outputs.append(csv_path)
        if not args.no_figures:
            from .figures import render_score_histogram

            fig_path = os.path.join(args.out, f"scores_{name}.png")
            render_score_histogram(id_scores, ood_scores, name, fig_path)
            outputs.append(fig_path)
    snapshot = {
        "checkpoint": args.checkpoint,
        "id_data": args.id_data,
        "ood_data": args.ood_data,
        "scorers": ",".join(names),
    }
    outputs.append(_write_manifest(args.out, "eval-ood", snapshot, None, outputs, started))
    return 0


def cmd_calibrate(args) -> int:
    from .evaluation import CALIBRATION_MODES, ece, scaled_probabilities

    started = time.time()
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    for mode in modes:
        if mode not in CALIBRATION_MODES:
            print(
                f"error: unknown mode {mode!r}; valid modes: "
                + ", ".join(CALIBRATION_MODES),
                file=sys.stderr,
            )
            return 1
    if not modes:
        print("error: no calibration modes requested", file=sys.stderr)
        return 1

    model, id_data, _, id_batch, _ = _load_eval_inputs(args)
    os.makedirs(args.out, exist_ok=True)
    outputs = []
    for mode in modes:
        probs = scaled_probabilities(id_batch, mode, model=model)
        report = ece(probs, id_data.labels, n_bins=args.bins)
        report_path = os.path.join(args.out, f"ece_{mode}.json")
        _write_json(report.to_dict(), report_path)
        outputs.append(report_path)
        if not args.no_figures:
            from .figures import render_reliability

            fig_path = os.path.join(args.out, f"reliability_{mode}.png")
            render_reliability(report, mode, fig_path)
            outputs.append(fig_path)
    snapshot = {
        "checkpoint": args.checkpoint,
        "id_data": args.id_data,
        "modes": ",".join(modes),
        "bins": args.bins,
    }
    outputs.append(_write_manifest(args.out, "calibrate", snapshot, None, outputs, started))
    return 0


def cmd_diagnose(args) -> int:
    import numpy as np

    from .geometry import (
        check_norm_bound,
        collapse_stats,
        covariance_spectrum,
        min_scaling_subspace,
        spectrum_to_csv,
    )

    started = time.time()
    model, id_data, ood_data, id_batch, ood_batch = _load_eval_inputs(args)
    os.makedirs(args.out, exist_ok=True)
    outputs = []

    norm_report = check_norm_bound(model, id_batch)
    path = os.path.join(args.out, "norm_bound.json")
    _write_json(norm_report.to_dict(), path)
    outputs.append(path)
    path = os.path.join(args.out, "norm_bound.csv")
    with open(path, "w", newline="\n") as fh:
        fh.write("sample_id,feature_norm,logit_norm,lower,upper\n")
        for i in range(norm_report.feature_norms.shape[0]):
            fh.write(
                f"{i},{norm_report.feature_norms[i]!r},{norm_report.logit_norms[i]!r},"
                f"{norm_report.lower[i]!r},{norm_report.upper[i]!r}\n"
            )
    outputs.append(path)

    spectrum = covariance_spectrum(id_batch.features)
    path = os.path.join(args.out, "spectrum.csv")
    spectrum_to_csv(spectrum, path)
    outputs.append(path)
    path = os.path.join(args.out, "spectrum.json")
    _write_json(spectrum.to_dict(), path)
    outputs.append(path)

    classes, counts = np.unique(np.argmax(id_batch.logits, axis=1), return_counts=True)
    modal_class = int(classes[np.argmax(counts)])
    boundary = min_scaling_subspace(model.final_weight, model.final_bias, modal_class)
    payload = boundary.to_dict()
    payload["class_index"] = modal_class
    path = os.path.join(args.out, "boundary_geometry.json")
    _write_json(payload, path)
    outputs.append(path)

    if ood_batch is not None:
        stats = collapse_stats(id_batch, ood_batch, model)
        path = os.path.join(args.out, "collapse_stats.json")
        _write_json(stats.to_dict(), path)
        outputs.append(path)

    if not args.no_figures:
        from .figures import render_features_2d, render_norm_scatter, render_spectrum

        path = os.path.join(args.out, "spectrum.png")
        render_spectrum(spectrum, path)
        outputs.append(path)
        path = os.path.join(args.out, "norm_scatter.png")
        render_norm_scatter(norm_report, path)
        outputs.append(path)
        if model.feature_dim == 2:
            path = os.path.join(args.out, "features_2d.png")
            render_features_2d(
                id_batch.features,
                ood_batch.features if ood_batch is not None else None,
                path,
            )
            outputs.append(path)

    snapshot = {
        "checkpoint": args.checkpoint,
        "id_data": args.id_data,
        "ood_data": args.ood_data,
    }
    outputs.append(_write_manifest(args.out, "diagnose", snapshot, None, outputs, started))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="boundarynorm",
        description="Train boundary-aware classifiers, score OOD inputs, and "
        "run geometric diagnostics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a classifier from a config file")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_train.add_argument("--no-figures", action="store_true")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval-ood", help="score ID vs OOD data with post-hoc detectors")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--id-data", required=True)
    p_eval.add_argument("--ood-data", required=True)
    p_eval.add_argument("--scorers", default="msp,energy")
    p_eval.add_argument("--stats-data", default=None,
                        help="ID training data for scorer statistics (default: --id-data)")
    p_eval.add_argument("--out", required=True)
    p_eval.add_argument("--no-figures", action="store_true")
    p_eval.set_defaults(func=cmd_eval_ood)

    p_cal = sub.add_parser("calibrate", help="expected calibration error per scaling mode")
    p_cal.add_argument("--checkpoint", required=True)
    p_cal.add_argument("--id-data", required=True)
    p_cal.add_argument("--modes", default="raw,logitnorm,boundary")
    p_cal.add_argument("--bins", type=int, default=15)
    p_cal.add_argument("--out", required=True)
    p_cal.add_argument("--no-figures", action="store_true")
    p_cal.set_defaults(func=cmd_calibrate)

    p_diag = sub.add_parser("diagnose", help="norm-bound, spectrum, and collapse diagnostics")
    p_diag.add_argument("--checkpoint", required=True)
    p_diag.add_argument("--id-data", required=True)
    p_diag.add_argument("--ood-data", default=None)
    p_diag.add_argument("--out", required=True)
    p_diag.add_argument("--no-figures", action="store_true")
    p_diag.set_defaults(func=cmd_diagnose)

    return parser


def main(argv=None) -> int:
    _apply_thread_cap()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # surface a diagnostic, never a traceback
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
