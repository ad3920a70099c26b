"""Matplotlib rendering for the CLI report paths.

Each command writes its figures next to the CSV/JSON it emits. Rendering is
file-only (Agg backend); byte-level reproducibility guarantees apply to the
delimited outputs, not the PNGs.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_train_curves(log, path) -> None:
    epochs = [r.epoch for r in log.records]
    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax_loss.plot(epochs, [r.loss for r in log.records], color="tab:red")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("mean loss")
    ax_acc.plot(epochs, [r.val_acc for r in log.records], color="tab:blue")
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("validation accuracy")
    ax_acc.set_ylim(0, 1.02)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_score_histogram(id_scores, ood_scores, scorer_name: str, path) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    lo = min(np.min(id_scores), np.min(ood_scores))
    hi = max(np.max(id_scores), np.max(ood_scores))
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    bins = np.linspace(lo, hi, 40)
    ax.hist(id_scores, bins=bins, alpha=0.6, label="ID", color="tab:blue")
    ax.hist(ood_scores, bins=bins, alpha=0.6, label="OOD", color="tab:orange")
    ax.set_xlabel(f"{scorer_name} score")
    ax.set_ylabel("count")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_reliability(report, mode: str, path) -> None:
    fig, ax = plt.subplots(figsize=(4.5, 4.2))
    n_bins = report.n_bins
    edges = np.linspace(0, 1, n_bins + 1)
    centers = (edges[:-1] + edges[1:]) / 2.0
    accs = [b.accuracy if b.count else 0.0 for b in report.bins]
    ax.bar(centers, accs, width=1.0 / n_bins, edgecolor="black", alpha=0.7,
           color="tab:blue", label="accuracy")
    ax.plot([0, 1], [0, 1], "k--", linewidth=1, label="perfect")
    ax.set_xlabel("confidence")
    ax.set_ylabel("accuracy")
    ax.set_title(f"{mode}: ECE = {report.ece:.4f}")
    ax.legend(loc="upper left")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_spectrum(report, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    values = np.maximum(report.values, 1e-300)
    ax.semilogy(np.arange(len(values)), values, marker="o", markersize=3)
    ax.set_xlabel("index")
    ax.set_ylabel("covariance singular value")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_norm_scatter(report, path) -> None:
    fig, ax = plt.subplots(figsize=(4.5, 4))
    ax.scatter(report.feature_norms, report.logit_norms, s=6, alpha=0.5)
    xs = np.linspace(0, max(float(np.max(report.feature_norms)), 1e-9), 50)
    ax.plot(xs, report.sigma_max * xs + report.bias_norm, "r--", linewidth=1,
            label="upper bound")
    ax.plot(xs, np.maximum(report.sigma_min * xs - report.bias_norm, 0.0), "g--",
            linewidth=1, label="lower bound")
    ax.set_xlabel("feature norm")
    ax.set_ylabel("logit norm")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_features_2d(id_features, ood_features, path) -> None:
    fig, ax = plt.subplots(figsize=(4.5, 4.2))
    ax.scatter(id_features[:, 0], id_features[:, 1], s=6, alpha=0.5,
               label="ID", color="tab:blue")
    if ood_features is not None:
        ax.scatter(ood_features[:, 0], ood_features[:, 1], s=6, alpha=0.5,
                   label="OOD", color="tab:orange")
    ax.set_xlabel("z[0]")
    ax.set_ylabel("z[1]")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
