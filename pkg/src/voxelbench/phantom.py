"""Synthetic multimodal cohorts with a known discriminative region.

Two groups share a constant baseline plus voxelwise Gaussian noise; the
patient group gets an additive shift inside a rectangular effect region,
applied only to the informative modalities. Every subject/modality stream
draws from its own spawned seed, so generation is deterministic and
order-independent.
"""

from dataclasses import dataclass, field

import numpy as np

from .cohort import (
    CohortManifest,
    GroupLabel,
    ManifestEntry,
    ScanRecord,
    refine_with_amyloid,
)
from .volume import Mask, Volume3D

PATIENT_GROUP = "AD"
CONTROL_GROUP = "CN"

_BASELINE = 1.0


@dataclass(frozen=True)
class PhantomSpec:
    n_per_group: int
    dims: tuple[int, int, int] = (16, 16, 16)
    effect_corner: tuple[int, int, int] = (4, 4, 4)
    effect_shape: tuple[int, int, int] = (4, 4, 4)
    effect_size: float = 0.5
    noise_sd: float = 0.25
    informative: dict = field(default_factory=lambda: {"FDG": True})
    seed: int = 0

    def __post_init__(self):
        if self.n_per_group < 1:
            raise ValueError("n_per_group must be positive")
        if self.noise_sd <= 0:
            raise ValueError("noise_sd must be positive")
        if self.effect_size < 0:
            raise ValueError("effect size must be nonnegative")
        for c, s, d in zip(self.effect_corner, self.effect_shape, self.dims):
            if c < 0 or s < 1 or c + s > d:
                raise ValueError(
                    f"effect region {self.effect_corner}+{self.effect_shape} "
                    f"outside dims {self.dims}"
                )
        if not self.informative:
            raise ValueError("at least one modality required")

    @property
    def modalities(self) -> tuple[str, ...]:
        return tuple(sorted(self.informative))


@dataclass(frozen=True)
class PhantomCohort:
    spec: PhantomSpec
    subjects: tuple[str, ...]
    groups: tuple[str, ...]
    volumes: dict  # modality -> list[Volume3D] aligned with subjects
    manifest: CohortManifest
    effect_mask: Mask
    brain_mask: Mask
    reference_mask: Mask
    tissue_maps: tuple[Volume3D, Volume3D, Volume3D]
    truth: dict


def effect_region_mask(spec: PhantomSpec) -> Mask:
    nx, ny, nz = spec.dims
    grid = np.zeros((nx, ny, nz), dtype=bool)
    cx, cy, cz = spec.effect_corner
    sx, sy, sz = spec.effect_shape
    grid[cx:cx + sx, cy:cy + sy, cz:cz + sz] = True
    return Mask(dims=spec.dims, included=grid.ravel(order="F"))


def _tissue_gradients(dims) -> tuple[Volume3D, Volume3D, Volume3D]:
    # smooth gradients along each axis keep edge weights nontrivial
    nx, ny, nz = dims
    ix, iy, iz = np.meshgrid(
        np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij"
    )
    gm = (ix + 0.5) / nx
    wm = (iy + 0.5) / ny
    csf = (iz + 0.5) / nz
    return tuple(Volume3D.from_array(m) for m in (gm, wm, csf))


def generate_cohort(spec: PhantomSpec) -> PhantomCohort:
    """Draw the synthetic cohort; the same spec always yields the same bytes."""
    effect = effect_region_mask(spec)
    effect_grid = effect.included
    modalities = spec.modalities

    subjects = []
    groups = []
    for i in range(spec.n_per_group):
        subjects.append(f"{PATIENT_GROUP}{i + 1:03d}")
        groups.append(PATIENT_GROUP)
    for i in range(spec.n_per_group):
        subjects.append(f"{CONTROL_GROUP}{i + 1:03d}")
        groups.append(CONTROL_GROUP)

    n_total = spec.dims[0] * spec.dims[1] * spec.dims[2]
    volumes: dict[str, list[Volume3D]] = {m: [] for m in modalities}
    for s_idx, group in enumerate(groups):
        for m_idx, modality in enumerate(modalities):
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=spec.seed, spawn_key=(s_idx, m_idx))
            )
            data = _BASELINE + rng.normal(0.0, spec.noise_sd, n_total)
            if group == PATIENT_GROUP and spec.informative[modality]:
                data = data + spec.effect_size * effect_grid
            volumes[modality].append(
                Volume3D.from_array(data.reshape(spec.dims, order="F"))
            )

    entries = []
    for s_idx, (subject, group) in enumerate(zip(subjects, groups)):
        status = "positive" if group == PATIENT_GROUP else "negative"
        scans = {}
        for modality in modalities:
            uid = f"{subject}-{modality}"
            scans[modality] = ScanRecord(
                subject_id=subject,
                months_from_baseline=0,
                modality=modality,
                gradwarp=True,
                b1_corrected=True,
                quality_rank=1,
                field_strength_tesla=1.5,
                study_phase="phase1",
                coregistered_averaged=True,
                source_path=f"{subject}/{uid}.nii",
                scan_uid=uid,
            )
        label = GroupLabel(base=group, amyloid_refined=refine_with_amyloid(group, status))
        entries.append(
            ManifestEntry(
                subject_id=subject, label=label, amyloid_status=status, scans=scans
            )
        )
    manifest = CohortManifest(entries=tuple(entries))

    truth = {
        "effect_corner": spec.effect_corner,
        "effect_shape": spec.effect_shape,
        "effect_size": spec.effect_size,
        "noise_sd": spec.noise_sd,
        "seed": spec.seed,
        "informative": dict(spec.informative),
        "patient_group": PATIENT_GROUP,
        "control_group": CONTROL_GROUP,
    }
    return PhantomCohort(
        spec=spec,
        subjects=tuple(subjects),
        groups=tuple(groups),
        volumes=volumes,
        manifest=manifest,
        effect_mask=effect,
        brain_mask=Mask.full(spec.dims),
        reference_mask=Mask(dims=spec.dims, included=~effect.included),
        tissue_maps=_tissue_gradients(spec.dims),
        truth=truth,
    )
