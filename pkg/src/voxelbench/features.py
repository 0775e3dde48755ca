"""Feature extraction: reference-region normalization, brain masking, and
subject-by-voxel matrix assembly, plus the on-disk feature store."""

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DimsMismatch,
    EmptyCohort,
    EmptyReference,
    LengthMismatch,
    NonpositiveReferenceMean,
)
from .volume import Mask, Volume3D, flatten, read_volume_file, unflatten, write_volume_file

STORE_MANIFEST = "store.json"
STORE_BLOCK = "features.bin"
STORE_MASK = "mask.nii"


@dataclass(frozen=True)
class FeatureMatrix:
    """Rows are subjects, columns are masked voxels in ascending index order."""

    subjects: tuple[str, ...]
    mask: Mask
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise DimsMismatch(f"feature values must be 2-D, got ndim={vals.ndim}")
        if vals.shape[0] != len(self.subjects):
            raise DimsMismatch(
                f"{vals.shape[0]} rows for {len(self.subjects)} subjects"
            )
        if self.mask.count < 1:
            raise EmptyReference("feature mask selects no voxels")
        if vals.shape[1] != self.mask.count:
            raise DimsMismatch(
                f"{vals.shape[1]} columns for mask count {self.mask.count}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("feature matrix contains non-finite values")
        vals = np.ascontiguousarray(vals)
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "subjects", tuple(self.subjects))

    @property
    def n_subjects(self) -> int:
        return len(self.subjects)

    def subset(self, subjects: list[str]) -> "FeatureMatrix":
        """Rows for the given subjects, in the given order."""
        index = {s: i for i, s in enumerate(self.subjects)}
        missing = [s for s in subjects if s not in index]
        if missing:
            raise EmptyCohort(f"subjects not in feature store: {missing}")
        rows = [index[s] for s in subjects]
        return FeatureMatrix(
            subjects=tuple(subjects), mask=self.mask, values=self.values[rows]
        )


def normalize_reference(pet: Volume3D, reference: Mask) -> Volume3D:
    """Divide every voxel by the mean intensity over the reference region."""
    if pet.header.dims != reference.dims:
        raise DimsMismatch(
            f"volume dims {pet.header.dims} != reference dims {reference.dims}"
        )
    if reference.count < 1:
        raise EmptyReference("reference region selects no voxels")
    mean = float(pet.data[reference.included].mean())
    if mean <= 0:
        raise NonpositiveReferenceMean(f"reference mean {mean} must be positive")
    return pet.with_data(pet.data / mean)


def apply_brain_mask(volume: Volume3D, brain: Mask) -> Volume3D:
    """Zero the voxels outside the brain mask."""
    if volume.header.dims != brain.dims:
        raise DimsMismatch(f"volume dims {volume.header.dims} != mask dims {brain.dims}")
    data = volume.data.copy()
    data[~brain.included] = 0.0
    return volume.with_data(data)


def build_feature_matrix(
    subjects: list[str], volumes: list[Volume3D], mask: Mask
) -> FeatureMatrix:
    """Stack flattened volumes into a feature matrix, preserving order."""
    if not volumes:
        raise EmptyCohort("no volumes to assemble")
    if len(subjects) != len(volumes):
        raise DimsMismatch(f"{len(subjects)} subjects for {len(volumes)} volumes")
    rows = [flatten(v, mask) for v in volumes]
    return FeatureMatrix(subjects=tuple(subjects), mask=mask, values=np.vstack(rows))


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def save_feature_store(matrix: FeatureMatrix, directory, voxel_size_mm=(1.0, 1.0, 1.0)) -> dict:
    """Persist a feature matrix as float32 rows plus a JSON manifest.

    Layout: ``features.bin`` (row-major float32), ``mask.nii`` (the feature
    mask as a 0/1 volume), ``store.json`` (subject order, shape, digests).
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    block = matrix.values.astype("<f4").tobytes()
    (directory / STORE_BLOCK).write_bytes(block)
    mask_volume = unflatten(
        np.ones(matrix.mask.count), matrix.mask, voxel_size_mm=voxel_size_mm
    )
    write_volume_file(directory / STORE_MASK, mask_volume)

    manifest = {
        "format": "voxelbench-feature-store-v1",
        "subjects": list(matrix.subjects),
        "n_subjects": matrix.n_subjects,
        "n_voxels": matrix.mask.count,
        "dims": list(matrix.mask.dims),
        "voxel_size_mm": list(voxel_size_mm),
        "block_digest": sha256_bytes(block),
    }
    (directory / STORE_MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def load_feature_store(directory) -> FeatureMatrix:
    directory = Path(directory)
    manifest = json.loads((directory / STORE_MANIFEST).read_text())
    block = (directory / STORE_BLOCK).read_bytes()
    if sha256_bytes(block) != manifest["block_digest"]:
        raise ValueError(f"feature block digest mismatch under {directory}")
    n_subjects = manifest["n_subjects"]
    n_voxels = manifest["n_voxels"]
    values = np.frombuffer(block, dtype="<f4").astype(np.float64)
    if values.size != n_subjects * n_voxels:
        raise LengthMismatch(
            f"feature block holds {values.size} values, manifest says "
            f"{n_subjects}x{n_voxels}"
        )
    mask = Mask.from_volume(read_volume_file(directory / STORE_MASK))
    return FeatureMatrix(
        subjects=tuple(manifest["subjects"]),
        mask=mask,
        values=values.reshape(n_subjects, n_voxels),
    )
