"""Soft-margin SVM trained in the dual over a precomputed kernel.

The solver is a sequential minimal optimization scheme: at each iteration it
picks the maximal violating pair (the most extreme lower/upper bound on the
bias), optimizes the pair analytically under the box and equality
constraints, and stops when every KKT violation is within tolerance. A
seeded permutation breaks exact ties in pair selection, making runs
deterministic for a given seed.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import NotConverged, ShapeMismatch, SingleClass
from .features import FeatureMatrix
from .kernels import KernelMatrix
from .volume import Mask, Volume3D, unflatten


@dataclass(frozen=True)
class TrainConfig:
    C: float
    kkt_tolerance: float = 1e-3
    max_passes: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.C) or self.C <= 0:
            raise ValueError(f"C must be positive, got {self.C}")
        if not np.isfinite(self.kkt_tolerance) or self.kkt_tolerance <= 0:
            raise ValueError(f"kkt_tolerance must be positive, got {self.kkt_tolerance}")
        if self.max_passes < 1:
            raise ValueError(f"max_passes must be positive, got {self.max_passes}")


@dataclass(frozen=True)
class SvmModel:
    training_subjects: tuple[str, ...]
    dual_coeffs: np.ndarray
    labels: np.ndarray
    bias: float
    C: float
    kernel_digest: str = ""

    def __post_init__(self):
        a = np.asarray(self.dual_coeffs, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.float64)
        if a.shape != y.shape or a.ndim != 1:
            raise ShapeMismatch("dual coefficients and labels must be aligned vectors")
        a.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "dual_coeffs", a)
        object.__setattr__(self, "labels", y)

    @property
    def support_indices(self) -> np.ndarray:
        return np.flatnonzero(self.dual_coeffs > 0)

    @property
    def n_train(self) -> int:
        return self.dual_coeffs.size


def dual_objective(K: np.ndarray, y: np.ndarray, a: np.ndarray) -> float:
    """Value of the dual: sum(a) - 0.5 * a' (yy' * K) a."""
    v = a * y
    return float(a.sum() - 0.5 * v @ K @ v)


def _select_extreme(F, mask, tie_perm, largest):
    cand = np.flatnonzero(mask)
    vals = F[cand]
    target = vals.max() if largest else vals.min()
    ties = cand[vals == target]
    if ties.size > 1:
        return int(ties[np.argmin(tie_perm[ties])]), float(target)
    return int(ties[0]), float(target)


def train(K: KernelMatrix, labels, cfg: TrainConfig) -> SvmModel:
    """Solve the box-constrained dual over the precomputed kernel.

    Labels must be -1/+1 aligned with the kernel's subject order; the kernel
    is assumed positive semidefinite. Raises NotConverged when the maximal
    KKT violation still exceeds the tolerance after cfg.max_passes pair
    updates.
    """
    y = np.asarray(labels, dtype=np.float64)
    n = K.n
    if y.shape != (n,):
        raise ShapeMismatch(f"{y.size} labels for {n} subjects")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    if np.all(y == y[0]):
        raise SingleClass("training labels contain a single class")

    km = K.values
    C = float(cfg.C)
    tol = float(cfg.kkt_tolerance)
    snap = 1e-10 * C

    rng = np.random.default_rng(cfg.seed)
    tie_perm = rng.permutation(n)

    a = np.zeros(n)
    F = y.copy()  # F_i = y_i - sum_j y_j a_j K_ij
    pos = y > 0

    gap = np.inf
    for _ in range(cfg.max_passes):
        lower = (pos & (a < C)) | (~pos & (a > 0))
        upper = (~pos & (a < C)) | (pos & (a > 0))
        if not lower.any() or not upper.any():
            gap = 0.0
            break
        p, b_lo = _select_extreme(F, lower, tie_perm, largest=True)
        q, b_hi = _select_extreme(F, upper, tie_perm, largest=False)
        gap = b_lo - b_hi
        if gap <= tol:
            break

        room_p = C - a[p] if pos[p] else a[p]
        room_q = a[q] if pos[q] else C - a[q]
        t_max = min(room_p, room_q)
        eta = km[p, p] + km[q, q] - 2.0 * km[p, q]
        if eta > 0:
            t = min(gap / eta, t_max)
        else:
            t = t_max  # flat direction: strict descent up to the box
        a[p] += y[p] * t
        a[q] -= y[q] * t
        for idx in (p, q):
            if a[idx] < snap:
                a[idx] = 0.0
            elif a[idx] > C - snap:
                a[idx] = C
        F -= t * (km[:, p] - km[:, q])
    else:
        raise NotConverged(cfg.max_passes, gap)

    margin = (a > 0) & (a < C)
    if margin.any():
        bias = float(F[margin].mean())
    else:
        lower = (pos & (a < C)) | (~pos & (a > 0))
        upper = (~pos & (a < C)) | (pos & (a > 0))
        b_lo = F[lower].max() if lower.any() else 0.0
        b_hi = F[upper].min() if upper.any() else 0.0
        bias = float(0.5 * (b_lo + b_hi))

    return SvmModel(
        training_subjects=K.subjects,
        dual_coeffs=a,
        labels=y,
        bias=bias,
        C=C,
        kernel_digest=K.digest(),
    )


def decision_scores(model: SvmModel, k_cross) -> np.ndarray:
    """Decision value per test subject from the test-by-train kernel block."""
    block = np.asarray(k_cross, dtype=np.float64)
    if block.ndim != 2 or block.shape[1] != model.n_train:
        raise ShapeMismatch(
            f"cross-kernel block {block.shape} does not match {model.n_train} "
            f"training subjects"
        )
    return block @ (model.dual_coeffs * model.labels) + model.bias


def predict_classes(scores) -> np.ndarray:
    """Signs of decision scores; exact zeros go to the positive class."""
    scores = np.asarray(scores, dtype=np.float64)
    return np.where(scores >= 0.0, 1, -1)


def weight_map(
    model: SvmModel,
    matrix: FeatureMatrix,
    mask: Mask,
    normalize: bool = False,
    positive_only: bool = False,
    voxel_size_mm=(1.0, 1.0, 1.0),
) -> Volume3D:
    """Back-project dual coefficients to a voxel map: w = sum_i a_i y_i x_i.

    The feature matrix must be the one the training kernel was computed
    from (the diffused matrix for regularized kernels).
    """
    if matrix.subjects != model.training_subjects:
        raise ShapeMismatch("feature rows do not match the model's training subjects")
    if mask.count != matrix.values.shape[1]:
        raise ShapeMismatch(
            f"mask count {mask.count} != feature columns {matrix.values.shape[1]}"
        )
    w = (model.dual_coeffs * model.labels) @ matrix.values
    if normalize:
        peak = float(np.abs(w).max())
        if peak > 0:
            w = w / peak
    if positive_only:
        w = np.clip(w, 0.0, None)
    return unflatten(w, mask, voxel_size_mm=voxel_size_mm)


def save_model(model: SvmModel, path) -> None:
    record = {
        "format": "voxelbench-svm-v1",
        "training_subjects": list(model.training_subjects),
        "dual_coeffs": model.dual_coeffs.tolist(),
        "labels": model.labels.astype(int).tolist(),
        "bias": model.bias,
        "C": model.C,
        "kernel_digest": model.kernel_digest,
    }
    with open(path, "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> SvmModel:
    with open(path) as fh:
        record = json.load(fh)
    return SvmModel(
        training_subjects=tuple(record["training_subjects"]),
        dual_coeffs=np.asarray(record["dual_coeffs"], dtype=np.float64),
        labels=np.asarray(record["labels"], dtype=np.float64),
        bias=float(record["bias"]),
        C=float(record["C"]),
        kernel_digest=record.get("kernel_digest", ""),
    )
