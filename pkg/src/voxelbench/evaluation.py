"""Nested cross-validation with balanced-accuracy hyperparameter selection,
the metric suite, repeat aggregation, and report assembly.

The outer loop estimates performance; an inner loop on each outer-training
set picks (C, alpha, beta) by mean balanced accuracy, with ties resolved
toward the smallest values. Per-repeat metrics come from the pooled
out-of-fold predictions; repeats are aggregated as mean and sample sd.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import EmptyInput, ShapeMismatch, SingleClassTruth, TooFewPerClass
from .svm import TrainConfig, decision_scores, predict_classes, train

METRIC_NAMES = ("auc", "accuracy", "balanced_accuracy", "sensitivity", "specificity")

SUMMARY_HEADER = "Image type\tClassifier\tTask\tAUC\tBal acc\tSens\tSpec"
PREDICTIONS_HEADER = "participant_id\trepeat\tscore\tpredicted\ttruth"
HYPERPARAMETERS_HEADER = "repeat\tfold\tC\talpha\tbeta"
METRICS_BY_REPEAT_HEADER = "repeat\t" + "\t".join(METRIC_NAMES)


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignment: np.ndarray
    seed: int

    def __post_init__(self):
        arr = np.asarray(self.assignment, dtype=np.int64)
        arr.flags.writeable = False
        object.__setattr__(self, "assignment", arr)

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)


@dataclass(frozen=True)
class HyperGrid:
    C_values: tuple[float, ...]
    alpha_values: tuple[float, ...] = (1.0,)
    beta_values: tuple[float, ...] = (0.0,)

    def __post_init__(self):
        for name, vals in (
            ("C_values", self.C_values),
            ("alpha_values", self.alpha_values),
            ("beta_values", self.beta_values),
        ):
            vals = tuple(float(v) for v in vals)
            if not vals:
                raise EmptyInput(f"{name} must be nonempty")
            if list(vals) != sorted(vals):
                raise ValueError(f"{name} must be sorted ascending")
            object.__setattr__(self, name, vals)
        if any(c <= 0 for c in self.C_values):
            raise ValueError("C values must be positive")
        if any(not 0.0 <= a <= 1.0 for a in self.alpha_values):
            raise ValueError("alpha values must lie in [0, 1]")
        if any(b < 0 for b in self.beta_values):
            raise ValueError("beta values must be nonnegative")

    @classmethod
    def default(cls) -> "HyperGrid":
        return cls(
            C_values=tuple(10.0 ** e for e in range(-6, 3)),
            alpha_values=tuple(round(0.1 * i, 1) for i in range(11)),
            beta_values=(0.0, 0.5, 1.0, 2.0, 4.0),
        )


@dataclass(frozen=True)
class MetricSet:
    auc: float
    accuracy: float
    balanced_accuracy: float
    sensitivity: float
    specificity: float

    def __post_init__(self):
        for name in METRIC_NAMES:
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} = {v} outside [0, 1]")
        if self.balanced_accuracy != (self.sensitivity + self.specificity) / 2.0:
            raise ValueError("balanced accuracy must equal (sens + spec) / 2")

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in METRIC_NAMES}


@dataclass(frozen=True)
class FoldSelection:
    repeat: int
    fold: int
    C: float
    alpha: float | None
    beta: float | None


@dataclass
class EvaluationReport:
    task: str
    positive_class: str
    negative_class: str
    subjects: tuple[str, ...]
    truth: tuple[str, ...]
    base_seed: int
    n_outer: int
    n_inner: int
    per_repeat_metrics: list[MetricSet] = field(default_factory=list)
    mean: dict = field(default_factory=dict)
    sd: dict = field(default_factory=dict)
    predictions: list[tuple] = field(default_factory=list)
    selections: list[FoldSelection] = field(default_factory=list)
    models: dict = field(default_factory=dict)  # (repeat, fold) -> SvmModel
    fold_test_subjects: dict = field(default_factory=dict)

    @property
    def repeats(self) -> int:
        return len(self.per_repeat_metrics)


# --- fold construction --------------------------------------------------


def stratified_kfold(labels, k: int, seed: int) -> FoldPlan:
    """Deterministic stratified k-fold assignment.

    Fold sizes differ by at most one overall and within every class; a
    fixed seed fixes the plan, different seeds reshuffle it.
    """
    labels = list(labels)
    n = len(labels)
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    classes = sorted(set(labels), key=str)
    rng = np.random.default_rng(seed)
    assignment = np.full(n, -1, dtype=np.int64)
    fold_totals = np.zeros(k, dtype=np.int64)
    for cls in classes:
        idx = np.array([i for i, lab in enumerate(labels) if lab == cls], dtype=np.int64)
        if idx.size < k:
            raise TooFewPerClass(
                f"class {cls!r} has {idx.size} members, fewer than k={k}"
            )
        shuffled = idx[rng.permutation(idx.size)]
        counts = np.full(k, idx.size // k, dtype=np.int64)
        extra = idx.size % k
        if extra:
            # remainders go to the currently smallest folds (ties by index),
            # keeping overall fold sizes within one of each other
            order = np.lexsort((np.arange(k), fold_totals))
            counts[order[:extra]] += 1
        start = 0
        for fold in range(k):
            assignment[shuffled[start:start + counts[fold]]] = fold
            start += counts[fold]
        fold_totals += counts
    return FoldPlan(k=k, assignment=assignment, seed=seed)


def _inner_seed(outer_seed: int, fold: int) -> int:
    return outer_seed * 1_000_003 + fold + 1


def nested_fold_structure(labels, n_outer: int, n_inner: int, seed: int):
    """Index bookkeeping for one repeat of nested CV.

    Returns, per outer fold, (outer_train, outer_test, inner_folds) where
    inner_folds is a list of (inner_train, inner_test) in global indices
    drawn exclusively from the outer-training set.
    """
    labels = list(labels)
    outer = stratified_kfold(labels, n_outer, seed)
    structure = []
    for fold in range(n_outer):
        test_idx = outer.test_indices(fold)
        train_idx = outer.train_indices(fold)
        inner = stratified_kfold(
            [labels[i] for i in train_idx], n_inner, _inner_seed(seed, fold)
        )
        inner_folds = [
            (train_idx[inner.assignment != j], train_idx[inner.assignment == j])
            for j in range(n_inner)
        ]
        structure.append((train_idx, test_idx, inner_folds))
    return structure


# --- metrics ------------------------------------------------------------


def compute_metrics(scores, predictions, truth, positive_class) -> MetricSet:
    """Confusion-matrix rates plus rank-based AUC (ties count one half)."""
    scores = np.asarray(scores, dtype=np.float64)
    predictions = np.asarray(predictions)
    truth = np.asarray(truth)
    if not (scores.size == predictions.size == truth.size) or scores.size == 0:
        raise ShapeMismatch("scores, predictions and truth must be aligned and nonempty")
    is_pos = truth == positive_class
    n_pos = int(is_pos.sum())
    n_neg = int((~is_pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClassTruth("truth must contain both classes")

    pred_pos = predictions == positive_class
    tp = int(np.sum(pred_pos & is_pos))
    tn = int(np.sum(~pred_pos & ~is_pos))
    sensitivity = tp / n_pos
    specificity = tn / n_neg
    accuracy = (tp + tn) / (n_pos + n_neg)

    # Mann-Whitney statistic via average ranks; identical to brute-force
    # pairwise counting with ties worth 0.5
    ranks = rankdata(scores, method="average")
    auc = (ranks[is_pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)

    return MetricSet(
        auc=float(auc),
        accuracy=float(accuracy),
        balanced_accuracy=(sensitivity + specificity) / 2.0,
        sensitivity=float(sensitivity),
        specificity=float(specificity),
    )


def aggregate(metric_sets) -> tuple[dict, dict]:
    """Mean and sample sd per metric over repeats (sd 0 for a single repeat)."""
    metric_sets = list(metric_sets)
    if not metric_sets:
        raise EmptyInput("no metric sets to aggregate")
    mean, sd = {}, {}
    for name in METRIC_NAMES:
        vals = np.array([getattr(ms, name) for ms in metric_sets])
        mean[name] = float(vals.mean())
        sd[name] = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
    return mean, sd


# --- nested cross-validation -------------------------------------------


def _grid_axes(provider, grid: HyperGrid):
    alphas = grid.alpha_values if provider.uses_alpha else (1.0,)
    betas = grid.beta_values if provider.uses_beta else (0.0,)
    return grid.C_values, alphas, betas


def nested_cv(
    provider,
    labels,
    positive_class,
    grid: HyperGrid,
    n_outer: int = 10,
    n_inner: int = 10,
    repeats: int = 10,
    base_seed: int = 0,
    kkt_tolerance: float = 1e-3,
    max_passes: int = 200_000,
    task_name: str = "",
) -> EvaluationReport:
    """Run repeated nested CV over a kernel provider.

    ``provider`` maps hyperparameters to a full-cohort kernel (pairwise Gram
    entries involve no labels, so computing them once for the cohort leaks
    nothing); folds slice the relevant blocks. Repeat r uses seed
    base_seed + r for its fold plans. Reports are bitwise reproducible for
    identical inputs and seed.
    """
    labels = [str(lab) for lab in labels]
    subjects = tuple(provider.subjects)
    if len(labels) != len(subjects):
        raise ShapeMismatch(f"{len(labels)} labels for {len(subjects)} subjects")
    distinct = sorted(set(labels))
    if len(distinct) != 2:
        raise SingleClassTruth(f"expected exactly two classes, got {distinct}")
    if positive_class not in distinct:
        raise ValueError(f"positive class {positive_class!r} not among labels {distinct}")
    negative_class = next(c for c in distinct if c != positive_class)
    y = np.where(np.asarray(labels) == positive_class, 1.0, -1.0)

    c_values, alphas, betas = _grid_axes(provider, grid)
    report = EvaluationReport(
        task=task_name or f"{positive_class} vs {negative_class}",
        positive_class=positive_class,
        negative_class=negative_class,
        subjects=subjects,
        truth=tuple(labels),
        base_seed=base_seed,
        n_outer=n_outer,
        n_inner=n_inner,
    )

    def class_names(pred_signs):
        return np.where(pred_signs > 0, positive_class, negative_class)

    for r in range(repeats):
        seed_r = base_seed + r
        structure = nested_fold_structure(labels, n_outer, n_inner, seed_r)
        oof_scores = np.zeros(len(subjects))
        for fold, (train_idx, test_idx, inner_folds) in enumerate(structure):
            inner_scores: dict[tuple, float] = {}
            for alpha in alphas:
                for beta in betas:
                    kfull = provider.kernel(alpha=alpha, beta=beta)
                    slices = []
                    for itr, ite in inner_folds:
                        slices.append(
                            (
                                kfull.submatrix(itr),
                                kfull.values[np.ix_(ite, itr)],
                                y[itr],
                                [labels[i] for i in ite],
                            )
                        )
                    for c in c_values:
                        cfg = TrainConfig(
                            C=c, kkt_tolerance=kkt_tolerance,
                            max_passes=max_passes, seed=seed_r,
                        )
                        fold_bas = []
                        for ktr, kte, ytr, truth_te in slices:
                            model = train(ktr, ytr, cfg)
                            sc = decision_scores(model, kte)
                            ms = compute_metrics(
                                sc, class_names(predict_classes(sc)), truth_te,
                                positive_class,
                            )
                            fold_bas.append(ms.balanced_accuracy)
                        inner_scores[(c, alpha, beta)] = float(np.mean(fold_bas))

            # ties resolve toward the smallest C, then alpha, then beta
            best_point, best_score = None, -np.inf
            for point in sorted(inner_scores):
                if inner_scores[point] > best_score:
                    best_point, best_score = point, inner_scores[point]
            best_c, best_alpha, best_beta = best_point

            kbest = provider.kernel(alpha=best_alpha, beta=best_beta)
            cfg = TrainConfig(
                C=best_c, kkt_tolerance=kkt_tolerance,
                max_passes=max_passes, seed=seed_r,
            )
            model = train(kbest.submatrix(train_idx), y[train_idx], cfg)
            oof_scores[test_idx] = decision_scores(
                model, kbest.values[np.ix_(test_idx, train_idx)]
            )

            report.selections.append(
                FoldSelection(
                    repeat=r,
                    fold=fold,
                    C=best_c,
                    alpha=best_alpha if provider.uses_alpha else None,
                    beta=best_beta if provider.uses_beta else None,
                )
            )
            report.models[(r, fold)] = model
            report.fold_test_subjects[(r, fold)] = tuple(subjects[i] for i in test_idx)

        predicted = class_names(predict_classes(oof_scores))
        report.per_repeat_metrics.append(
            compute_metrics(oof_scores, predicted, labels, positive_class)
        )
        for i, subject in enumerate(subjects):
            report.predictions.append(
                (subject, r, float(oof_scores[i]), str(predicted[i]), labels[i])
            )

    report.mean, report.sd = aggregate(report.per_repeat_metrics)
    return report


# --- report rendering ---------------------------------------------------


def _pct(mean_value: float, sd_value: float) -> str:
    return f"{100.0 * mean_value:.1f}±{100.0 * sd_value:.1f}"


def summary_row(image_type: str, classifier: str, report: EvaluationReport) -> str:
    """One Table-1-style row: percentages as mean±sd over repeats."""
    cells = [image_type, classifier, report.task]
    for name in ("auc", "balanced_accuracy", "sensitivity", "specificity"):
        cells.append(_pct(report.mean[name], report.sd[name]))
    return "\t".join(cells)


def write_summary(path, rows: list[str]) -> None:
    lines = [SUMMARY_HEADER] + list(rows)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_metrics_by_repeat(path, report: EvaluationReport) -> None:
    lines = [METRICS_BY_REPEAT_HEADER]
    for r, ms in enumerate(report.per_repeat_metrics):
        cells = [str(r)] + [repr(getattr(ms, name)) for name in METRIC_NAMES]
        lines.append("\t".join(cells))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_predictions(path, report: EvaluationReport) -> None:
    lines = [PREDICTIONS_HEADER]
    for subject, r, score, predicted, truth in report.predictions:
        lines.append(f"{subject}\t{r}\t{score!r}\t{predicted}\t{truth}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_selected_hyperparameters(path, report: EvaluationReport) -> None:
    lines = [HYPERPARAMETERS_HEADER]
    for sel in report.selections:
        alpha = "" if sel.alpha is None else repr(sel.alpha)
        beta = "" if sel.beta is None else repr(sel.beta)
        lines.append(f"{sel.repeat}\t{sel.fold}\t{sel.C!r}\t{alpha}\t{beta}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
