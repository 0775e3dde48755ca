"""Figure rendering for classification reports.

Weight maps are shown as montages of axial slices with negative
coefficients clipped (normalized w >= 0), next to an ROC overlay of the
pooled out-of-fold scores per repeat. PNG output is deterministic: fixed
metadata, no timestamps.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import EvaluationReport
from .volume import Volume3D

_PNG_METADATA = {"Software": "voxelbench"}


def _save(fig, out_path):
    fig.savefig(out_path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)


def save_weight_map_figure(volume: Volume3D, out_path, title: str = "") -> None:
    """Montage of axial slices of max-normalized, nonnegative weights."""
    arr = volume.as_array()
    peak = float(np.abs(arr).max())
    if peak > 0:
        arr = arr / peak
    arr = np.clip(arr, 0.0, None)

    nz = arr.shape[2]
    n_slices = min(9, nz)
    z_positions = np.linspace(0, nz - 1, n_slices).round().astype(int)
    ncols = 3
    nrows = int(np.ceil(n_slices / ncols))
    fig, axes = plt.subplots(nrows, ncols, figsize=(3 * ncols, 3 * nrows))
    axes = np.atleast_1d(axes).ravel()
    for ax in axes:
        ax.set_axis_off()
    for ax, z in zip(axes, z_positions):
        ax.imshow(arr[:, :, z].T, origin="lower", cmap="hot", vmin=0.0, vmax=1.0)
        ax.set_title(f"z={z}", fontsize=8)
    if title:
        fig.suptitle(title, fontsize=10)
    fig.tight_layout()
    _save(fig, out_path)


def roc_points(scores, truth, positive_class) -> tuple[np.ndarray, np.ndarray]:
    """False/true positive rates swept over all score thresholds."""
    scores = np.asarray(scores, dtype=np.float64)
    is_pos = np.asarray(truth) == positive_class
    order = np.argsort(-scores, kind="stable")
    tp = np.cumsum(is_pos[order])
    fp = np.cumsum(~is_pos[order])
    tpr = np.concatenate([[0.0], tp / max(int(is_pos.sum()), 1)])
    fpr = np.concatenate([[0.0], fp / max(int((~is_pos).sum()), 1)])
    return fpr, tpr


def save_roc_figure(report: EvaluationReport, out_path) -> None:
    """Overlay per-repeat ROC curves of pooled out-of-fold scores."""
    fig, ax = plt.subplots(figsize=(5, 5))
    by_repeat: dict[int, list[tuple[float, str]]] = {}
    for _, r, score, _, truth in report.predictions:
        by_repeat.setdefault(r, []).append((score, truth))
    for r in sorted(by_repeat):
        scores, truths = zip(*by_repeat[r])
        fpr, tpr = roc_points(scores, truths, report.positive_class)
        ax.plot(fpr, tpr, color="steelblue", alpha=0.5, linewidth=1.0)
    ax.plot([0, 1], [0, 1], color="gray", linestyle="--", linewidth=0.8)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title(
        f"{report.task}  AUC {100 * report.mean['auc']:.1f}"
        f"±{100 * report.sd['auc']:.1f}%"
    )
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    fig.tight_layout()
    _save(fig, out_path)
