"""Command-line front end: phantom, convert, select, extract, classify.

Configuration is a key=value text file plus flag overrides (flags win).
Every output directory receives a provenance record (resolved config,
seeds, input digests, tool version) with no timestamps, so identical runs
produce identical bytes. Exit codes: 0 success, 2 usage error, 3 data
error, 4 convergence error.
"""

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .cohort import (
    BASE_GROUPS,
    MODALITIES,
    PET_MODALITIES,
    REFINED_GROUPS,
    build_bids,
    build_manifest,
    manifest_from_bids,
    parse_clinical_table,
    parse_scan_table,
    select_subjects,
)
from .errors import NotConverged, VoxelbenchError
from .evaluation import (
    EvaluationReport,
    HyperGrid,
    nested_cv,
    summary_row,
    write_metrics_by_repeat,
    write_predictions,
    write_selected_hyperparameters,
    write_summary,
)
from .features import (
    apply_brain_mask,
    build_feature_matrix,
    load_feature_store,
    normalize_reference,
    save_feature_store,
)
from .figures import save_roc_figure, save_weight_map_figure
from .kernels import (
    CombinedKernel,
    LinearKernel,
    RegularizedKernel,
    build_voxel_graph,
)
from .phantom import PhantomSpec, generate_cohort
from .svm import save_model, weight_map
from .volume import Mask, read_volume_file, write_volume_file


class UsageError(Exception):
    """Bad flags or malformed configuration values."""


# --- configuration ------------------------------------------------------


def parse_kv_text(text: str) -> dict[str, str]:
    """Parse 'key = value' lines; blank lines and # comments are skipped."""
    values: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"line {line_no}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def parse_kv_file(path) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    return parse_kv_text(path.read_text())


def _floats_csv(text: str, key: str) -> tuple[float, ...]:
    try:
        return tuple(float(v.strip()) for v in text.split(",") if v.strip())
    except ValueError:
        raise UsageError(f"{key}: expected comma-separated numbers, got {text!r}") from None


def _int(text: str, key: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise UsageError(f"{key}: expected an integer, got {text!r}") from None


@dataclass
class RunConfig:
    """Resolved classify configuration (defaults < file < flags)."""

    task: tuple[str, str]
    modalities: tuple[str, ...]
    kernels: dict = field(default_factory=dict)  # modality -> linear|regularized
    grid: HyperGrid = field(default_factory=HyperGrid.default)
    n_outer: int = 10
    n_inner: int = 10
    repeats: int = 10
    base_seed: int = 0
    bids_root: str = ""
    derivatives_root: str = ""
    tissue_map_paths: tuple[str, ...] = ()
    sigma_tissue: float = 0.5
    kkt_tolerance: float = 1e-3
    max_passes: int = 200_000

    def snapshot(self) -> dict:
        """Provenance view of the config (paths by digest elsewhere)."""
        return {
            "task": list(self.task),
            "modalities": list(self.modalities),
            "kernels": dict(self.kernels),
            "C_grid": list(self.grid.C_values),
            "alpha_grid": list(self.grid.alpha_values),
            "beta_grid": list(self.grid.beta_values),
            "n_outer": self.n_outer,
            "n_inner": self.n_inner,
            "repeats": self.repeats,
            "base_seed": self.base_seed,
            "sigma_tissue": self.sigma_tissue,
            "kkt_tolerance": self.kkt_tolerance,
            "max_passes": self.max_passes,
        }


def run_config_from_sources(file_values: dict[str, str], args) -> RunConfig:
    values = dict(file_values)

    task_text = values.get("task", "")
    if " vs " not in task_text:
        raise UsageError("config must set: task = <positive group> vs <negative group>")
    label_a, _, label_b = task_text.partition(" vs ")
    task = (label_a.strip(), label_b.strip())
    for label in task:
        if label not in BASE_GROUPS and label not in REFINED_GROUPS:
            raise UsageError(f"unknown task group {label!r}")

    modalities = tuple(
        m.strip() for m in values.get("modalities", "").split(",") if m.strip()
    )
    if not modalities or any(m not in MODALITIES for m in modalities):
        raise UsageError("config must set: modalities = comma list of T1/FDG/AV45")
    if len(modalities) > 2:
        raise UsageError("at most two modalities may be combined")

    kernels = {}
    for m in modalities:
        kind = values.get(f"kernel.{m}", "linear")
        if kind not in ("linear", "regularized"):
            raise UsageError(f"kernel.{m} must be linear or regularized, got {kind!r}")
        kernels[m] = kind

    grid_kwargs = {}
    defaults = HyperGrid.default()
    grid_kwargs["C_values"] = (
        _floats_csv(values["c_grid"], "c_grid") if "c_grid" in values else defaults.C_values
    )
    grid_kwargs["alpha_values"] = (
        _floats_csv(values["alpha_grid"], "alpha_grid")
        if "alpha_grid" in values
        else defaults.alpha_values
    )
    grid_kwargs["beta_values"] = (
        _floats_csv(values["beta_grid"], "beta_grid")
        if "beta_grid" in values
        else defaults.beta_values
    )
    try:
        grid = HyperGrid(**grid_kwargs)
    except (ValueError, VoxelbenchError) as exc:
        raise UsageError(f"bad hyperparameter grid: {exc}") from None

    cfg = RunConfig(task=task, modalities=modalities, kernels=kernels, grid=grid)
    cfg.n_outer = _int(values.get("folds", "10"), "folds")
    cfg.n_inner = _int(values.get("inner_folds", "10"), "inner_folds")
    cfg.repeats = _int(values.get("repeats", "10"), "repeats")
    cfg.base_seed = _int(values.get("seed", "0"), "seed")
    cfg.bids_root = values.get("bids", "")
    cfg.derivatives_root = values.get("derivatives", "")
    cfg.tissue_map_paths = tuple(
        p.strip() for p in values.get("tissue_maps", "").split(",") if p.strip()
    )
    if "sigma_tissue" in values:
        cfg.sigma_tissue = float(values["sigma_tissue"])
    if "kkt_tolerance" in values:
        cfg.kkt_tolerance = float(values["kkt_tolerance"])
    if "max_passes" in values:
        cfg.max_passes = _int(values["max_passes"], "max_passes")

    # flag overrides beat the file
    if getattr(args, "seed", None) is not None:
        cfg.base_seed = args.seed
    if getattr(args, "folds", None) is not None:
        cfg.n_outer = args.folds
    if getattr(args, "inner_folds", None) is not None:
        cfg.n_inner = args.inner_folds
    if getattr(args, "repeats", None) is not None:
        cfg.repeats = args.repeats

    if not cfg.bids_root:
        raise UsageError("config must set: bids = <path to BIDS root>")
    if not cfg.derivatives_root:
        raise UsageError("config must set: derivatives = <path to derivatives root>")
    return cfg


# --- provenance ---------------------------------------------------------


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_provenance(out_dir, command: str, config: dict, inputs: dict) -> None:
    record = {
        "tool": "voxelbench",
        "version": __version__,
        "command": command,
        "config": config,
        "inputs": inputs,
    }
    (Path(out_dir) / "provenance.json").write_text(
        json.dumps(record, indent=2, sort_keys=True) + "\n"
    )


def prepare_out_dir(path, force: bool) -> Path:
    out = Path(path)
    if out.exists() and any(out.iterdir()) and not force:
        raise VoxelbenchError(
            f"output directory {out} is not empty; pass --force to overwrite"
        )
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- phantom ------------------------------------------------------------


def phantom_spec_from_kv(values: dict[str, str]) -> PhantomSpec:
    def triple(key: str, default: str) -> tuple[int, int, int]:
        parts = [p.strip() for p in values.get(key, default).split(",")]
        if len(parts) != 3:
            raise UsageError(f"{key}: expected three comma-separated integers")
        return tuple(_int(p, key) for p in parts)

    modalities = tuple(
        m.strip() for m in values.get("modalities", "FDG").split(",") if m.strip()
    )
    informative_list = [
        m.strip() for m in values.get("informative", ",".join(modalities)).split(",")
        if m.strip()
    ]
    for m in list(modalities) + informative_list:
        if m not in MODALITIES:
            raise UsageError(f"unknown modality {m!r}")
    informative = {m: (m in informative_list) for m in modalities}

    try:
        return PhantomSpec(
            n_per_group=_int(values.get("n_per_group", "40"), "n_per_group"),
            dims=triple("dims", "16,16,16"),
            effect_corner=triple("effect_corner", "4,4,4"),
            effect_shape=triple("effect_shape", "4,4,4"),
            effect_size=float(values.get("effect_size", "0.5")),
            noise_sd=float(values.get("noise_sd", "0.25")),
            informative=informative,
            seed=_int(values.get("seed", "0"), "seed"),
        )
    except ValueError as exc:
        raise UsageError(f"bad phantom spec: {exc}") from None


def cmd_phantom(args) -> int:
    values = parse_kv_file(args.spec) if args.spec else {}
    if args.seed is not None:
        values["seed"] = str(args.seed)
    spec = phantom_spec_from_kv(values)
    out = prepare_out_dir(args.out, args.force)
    cohort = generate_cohort(spec)

    raw_root = out / "raw"
    for entry in cohort.manifest.entries:
        idx = cohort.subjects.index(entry.subject_id)
        for modality, scan in sorted(entry.scans.items()):
            dest = raw_root / scan.source_path
            dest.parent.mkdir(parents=True, exist_ok=True)
            write_volume_file(dest, cohort.volumes[modality][idx])

    clinical_lines = ["subject_id,months_from_baseline,diagnosis,amyloid_status"]
    scan_lines = [",".join(
        ("subject_id", "months_from_baseline", "modality", "gradwarp", "b1_corrected",
         "quality_rank", "field_strength_tesla", "study_phase", "coregistered_averaged",
         "source_path", "scan_uid")
    )]
    for entry in cohort.manifest.entries:
        clinical_lines.append(
            f"{entry.subject_id},0,{entry.label.base},{entry.amyloid_status}"
        )
        for modality, scan in sorted(entry.scans.items()):
            scan_lines.append(
                f"{scan.subject_id},{scan.months_from_baseline},{scan.modality},"
                f"{int(scan.gradwarp)},{int(scan.b1_corrected)},{scan.quality_rank},"
                f"{scan.field_strength_tesla},{scan.study_phase},"
                f"{int(scan.coregistered_averaged)},{scan.source_path},{scan.scan_uid}"
            )
    (out / "clinical.csv").write_text("\n".join(clinical_lines) + "\n")
    (out / "scans.csv").write_text("\n".join(scan_lines) + "\n")

    masks_dir = out / "masks"
    masks_dir.mkdir(exist_ok=True)
    from .volume import unflatten

    def mask_volume(mask: Mask):
        return unflatten(np.ones(mask.count), mask)

    write_volume_file(masks_dir / "brain.nii", mask_volume(cohort.brain_mask))
    write_volume_file(masks_dir / "reference.nii", mask_volume(cohort.reference_mask))
    for name, vol in zip(("gm", "wm", "csf"), cohort.tissue_maps):
        write_volume_file(masks_dir / f"{name}.nii", vol)

    truth_lines = []
    for key in sorted(cohort.truth):
        value = cohort.truth[key]
        if isinstance(value, dict):
            value = ",".join(f"{k}:{v}" for k, v in sorted(value.items()))
        elif isinstance(value, (tuple, list)):
            value = ",".join(str(v) for v in value)
        truth_lines.append(f"{key} = {value}")
    (out / "truth.txt").write_text("\n".join(truth_lines) + "\n")

    write_provenance(
        out, "phantom",
        {k: values.get(k, "") for k in sorted(values)},
        {},
    )
    print(f"phantom cohort: {2 * spec.n_per_group} subjects, "
          f"modalities {','.join(spec.modalities)} -> {out}")
    return 0


# --- convert ------------------------------------------------------------


def cmd_convert(args) -> int:
    clinical_path = Path(args.clinical)
    scans_path = Path(args.scans)
    for p in (clinical_path, scans_path):
        if not p.is_file():
            raise VoxelbenchError(f"table not found: {p}")
    clinical = parse_clinical_table(clinical_path.read_text())
    scans = parse_scan_table(scans_path.read_text())
    manifest, decisions = build_manifest(clinical, scans)

    out = prepare_out_dir(args.out, args.force)
    summary = build_bids(manifest, args.raw, out)

    log_lines = ["subject_id\tmodality\tselected_scan\trule"]
    for subject, modality, uid, rule in decisions:
        log_lines.append(f"{subject}\t{modality}\t{uid}\t{rule}")
    (out / "conversion_log.tsv").write_text("\n".join(log_lines) + "\n")

    write_provenance(
        out, "convert",
        {"horizon_months": manifest.horizon_months},
        {str(clinical_path): sha256_file(clinical_path),
         str(scans_path): sha256_file(scans_path)},
    )
    groups = ", ".join(f"{g}={n}" for g, n in sorted(summary["groups"].items()))
    print(f"converted {summary['n_subjects']} subjects "
          f"({len(summary['files_written'])} images): {groups}")
    for subject, modality, uid, rule in decisions:
        print(f"  {subject} {modality}: {uid} ({rule})")
    return 0


# --- select -------------------------------------------------------------


def cmd_select(args) -> int:
    task = _parse_task(args.task)
    modalities = tuple(m.strip() for m in args.modalities.split(",") if m.strip())
    manifest = manifest_from_bids(args.bids)
    group_a, group_b = select_subjects(manifest, task, set(modalities))

    out = prepare_out_dir(args.out, args.force)
    for label, members in zip(task, (group_a, group_b)):
        (out / f"participants_{label}.txt").write_text(
            "".join(f"{s}\n" for s in members)
        )
    (out / "summary.txt").write_text(
        f"{task[0]}\t{len(group_a)}\n{task[1]}\t{len(group_b)}\n"
    )
    write_provenance(
        out, "select",
        {"task": list(task), "modalities": list(modalities)},
        {str(Path(args.bids) / "participants.tsv"):
         sha256_file(Path(args.bids) / "participants.tsv")},
    )
    print(f"{task[0]}: {len(group_a)} subjects; {task[1]}: {len(group_b)} subjects")
    return 0


def _parse_task(text: str) -> tuple[str, str]:
    if " vs " not in text:
        raise UsageError(f"task must look like 'AD vs CN', got {text!r}")
    a, _, b = text.partition(" vs ")
    return a.strip(), b.strip()


# --- extract ------------------------------------------------------------


def cmd_extract(args) -> int:
    modality = args.modality
    if modality not in MODALITIES:
        raise UsageError(f"unknown modality {modality!r}")
    brain_path = Path(args.brain_mask)
    if not brain_path.is_file():
        raise VoxelbenchError(f"brain mask not found: {brain_path}")
    brain_volume = read_volume_file(brain_path)
    brain = Mask.from_volume(brain_volume)

    reference = None
    reference_path = None
    if args.reference_mask:
        reference_path = Path(args.reference_mask)
        if not reference_path.is_file():
            raise VoxelbenchError(f"reference mask not found: {reference_path}")
        reference = Mask.from_volume(read_volume_file(reference_path))

    manifest = manifest_from_bids(args.bids)
    bids_root = Path(args.bids)
    subjects, volumes, digests = [], [], {}
    for entry in manifest.entries:
        scan = entry.scans.get(modality)
        if scan is None:
            continue
        path = bids_root / scan.source_path
        try:
            vol = read_volume_file(path)
            if modality in PET_MODALITIES and reference is not None:
                vol = normalize_reference(vol, reference)
            vol = apply_brain_mask(vol, brain)
        except VoxelbenchError as exc:
            raise type(exc)(f"subject {entry.subject_id}: {exc}") from exc
        subjects.append(entry.subject_id)
        volumes.append(vol)
        digests[str(path)] = sha256_file(path)
    if not subjects:
        raise VoxelbenchError(f"no subjects with modality {modality} under {bids_root}")

    matrix = build_feature_matrix(subjects, volumes, brain)
    out = prepare_out_dir(args.out, args.force)
    save_feature_store(matrix, out, voxel_size_mm=brain_volume.header.voxel_size_mm)

    digests[str(brain_path)] = sha256_file(brain_path)
    if reference_path is not None:
        digests[str(reference_path)] = sha256_file(reference_path)
    write_provenance(out, "extract", {"modality": modality}, digests)
    print(f"extracted {len(subjects)} subjects x {brain.count} voxels ({modality}) -> {out}")
    return 0


# --- classify -----------------------------------------------------------


def _provider_for(cfg: RunConfig, modality: str, matrix):
    if cfg.kernels[modality] == "linear":
        return LinearKernel(matrix)
    tissue = [read_volume_file(p) for p in cfg.tissue_map_paths]
    graph = build_voxel_graph(matrix.mask, tissue, sigma=cfg.sigma_tissue)
    return RegularizedKernel(matrix, graph, sigma_tissue=cfg.sigma_tissue)


def _classifier_name(cfg: RunConfig) -> str:
    if len(cfg.modalities) == 2:
        return "mkl_svm"
    kind = cfg.kernels[cfg.modalities[0]]
    return f"{kind}_svm"


def write_classification_outputs(
    out: Path, cfg: RunConfig, report: EvaluationReport, provider, voxel_size
) -> None:
    image_type = "+".join(cfg.modalities)
    classifier = _classifier_name(cfg)
    write_summary(out / "summary.tsv", [summary_row(image_type, classifier, report)])
    write_metrics_by_repeat(out / "metrics_by_repeat.tsv", report)
    write_predictions(out / "predictions.tsv", report)
    write_selected_hyperparameters(out / "hyperparameters.tsv", report)

    models_dir = out / "models"
    models_dir.mkdir(exist_ok=True)
    maps_dir = out / "weight_maps"
    maps_dir.mkdir(exist_ok=True)
    for sel in report.selections:
        if sel.repeat != 0:
            continue
        model = report.models[(0, sel.fold)]
        save_model(model, models_dir / f"fold{sel.fold:02d}.json")
        basis = provider.feature_basis(
            sel.alpha if sel.alpha is not None else 1.0,
            sel.beta if sel.beta is not None else 0.0,
            modality=cfg.modalities[0],
        )
        for name, weight, matrix in basis:
            sub = matrix.subset(list(model.training_subjects))
            vol = weight_map(model, sub, sub.mask, voxel_size_mm=voxel_size)
            if weight != 1.0:
                vol = vol.with_data(vol.data * weight)
            tag = f"_{name}" if len(basis) > 1 else ""
            write_volume_file(maps_dir / f"weights{tag}_fold{sel.fold:02d}.nii", vol)
            if sel.fold == 0:
                save_weight_map_figure(
                    vol,
                    out / f"weights{tag}_fold00.png",
                    title=f"{report.task} {name or image_type}",
                )
    save_roc_figure(report, out / "roc.png")


def cmd_classify(args) -> int:
    file_values = parse_kv_file(args.config) if args.config else {}
    cfg = run_config_from_sources(file_values, args)

    manifest = manifest_from_bids(cfg.bids_root)
    group_a, group_b = select_subjects(manifest, cfg.task, set(cfg.modalities))
    if not group_a or not group_b:
        raise VoxelbenchError(
            f"empty task group for {cfg.task}: {len(group_a)} vs {len(group_b)} subjects"
        )
    cohort = sorted(group_a + group_b)
    in_a = set(group_a)
    labels = [cfg.task[0] if s in in_a else cfg.task[1] for s in cohort]

    derivatives = Path(cfg.derivatives_root)
    providers = []
    digests = {}
    voxel_size = (1.0, 1.0, 1.0)
    for modality in cfg.modalities:
        store_dir = derivatives / "features" / modality
        if not (store_dir / "store.json").is_file():
            raise VoxelbenchError(
                f"feature store missing for {modality}: run extract first ({store_dir})"
            )
        matrix = load_feature_store(store_dir).subset(cohort)
        store_meta = json.loads((store_dir / "store.json").read_text())
        voxel_size = tuple(store_meta.get("voxel_size_mm", [1.0, 1.0, 1.0]))
        digests[str(store_dir / "features.bin")] = store_meta["block_digest"]
        providers.append(_provider_for(cfg, modality, matrix))
    for p in cfg.tissue_map_paths:
        digests[str(p)] = sha256_file(p)

    if len(providers) == 2:
        provider = CombinedKernel(
            providers[0], providers[1],
            first_name=cfg.modalities[0], second_name=cfg.modalities[1],
        )
    else:
        provider = providers[0]

    task_name = f"{cfg.task[0]} vs {cfg.task[1]}"
    report = nested_cv(
        provider,
        labels,
        positive_class=cfg.task[0],
        grid=cfg.grid,
        n_outer=cfg.n_outer,
        n_inner=cfg.n_inner,
        repeats=cfg.repeats,
        base_seed=cfg.base_seed,
        kkt_tolerance=cfg.kkt_tolerance,
        max_passes=cfg.max_passes,
        task_name=task_name,
    )

    if args.out:
        out = prepare_out_dir(args.out, args.force)
    else:
        task_dir = task_name.replace(" ", "_")
        out = prepare_out_dir(
            derivatives / "classify" / task_dir / _classifier_name(cfg), args.force
        )
    write_classification_outputs(out, cfg, report, provider, voxel_size)
    write_provenance(out, "classify", cfg.snapshot(), digests)

    print(f"{task_name}: balanced accuracy "
          f"{100 * report.mean['balanced_accuracy']:.1f}"
          f"±{100 * report.sd['balanced_accuracy']:.1f}% "
          f"over {report.repeats} repeats -> {out}")
    return 0


# --- entry point --------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="voxelbench",
        description="Reproducible voxel-based classification benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate a synthetic raw cohort")
    p.add_argument("--spec", help="phantom spec file (key = value)")
    p.add_argument("--seed", type=int, help="override the spec seed")
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("convert", help="curate raw data into a BIDS tree")
    p.add_argument("--raw", required=True, help="root of the raw image files")
    p.add_argument("--clinical", required=True, help="clinical visits table (csv)")
    p.add_argument("--scans", required=True, help="scan inventory table (csv)")
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("select", help="list subjects for a classification task")
    p.add_argument("--bids", required=True)
    p.add_argument("--task", required=True, help="e.g. 'AD vs CN'")
    p.add_argument("--modalities", default="T1", help="required modalities, comma list")
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("extract", help="build the voxel feature store for a modality")
    p.add_argument("--bids", required=True)
    p.add_argument("--modality", required=True)
    p.add_argument("--brain-mask", required=True)
    p.add_argument("--reference-mask", help="PET reference region for normalization")
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("classify", help="run nested-CV classification")
    p.add_argument("--config", required=True, help="key = value configuration file")
    p.add_argument("--seed", type=int)
    p.add_argument("--folds", type=int)
    p.add_argument("--inner-folds", dest="inner_folds", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--out", help="override the derivatives output directory")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_classify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except NotConverged as exc:
        print(f"convergence error: {exc}", file=sys.stderr)
        return 4
    except VoxelbenchError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
