"""Subject-level Gram matrices: plain linear kernels, Laplacian-regularized
kernels (explicit-Euler heat diffusion on a tissue-weighted 6-neighbor voxel
lattice), and convex two-kernel combinations.

Regularization smooths each subject's feature row by an approximation of
exp(-beta * L), where L = D - W is the combinatorial Laplacian of the voxel
graph; edge weights encode tissue similarity, so smoothing respects both
spatial and anatomical proximity.
"""

import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import (
    AlphaOutOfRange,
    DimsMismatch,
    NonpositiveSigma,
    ShapeMismatch,
    StabilityViolated,
    SubjectMismatch,
    TissueProbabilityOutOfRange,
)
from .features import FeatureMatrix
from .volume import Mask, Volume3D

DEFAULT_SIGMA_TISSUE = 0.5

#: safety factor applied to the Euler stability bound when choosing steps
_STABILITY_SAFETY = 0.5

KERNEL_MAGIC = b"VBK1"


@dataclass(frozen=True)
class KernelMatrix:
    subjects: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        n = len(self.subjects)
        if vals.shape != (n, n):
            raise ShapeMismatch(f"kernel shape {vals.shape} for {n} subjects")
        if not np.all(np.isfinite(vals)):
            raise ValueError("kernel matrix contains non-finite values")
        scale = float(np.abs(vals).max()) if vals.size else 0.0
        if scale > 0 and float(np.abs(vals - vals.T).max()) > 1e-10 * scale:
            raise ShapeMismatch("kernel matrix is not symmetric within 1e-10 relative")
        vals = np.ascontiguousarray(vals)
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "subjects", tuple(self.subjects))

    @property
    def n(self) -> int:
        return len(self.subjects)

    def digest(self) -> str:
        return hashlib.sha256(self.values.tobytes()).hexdigest()

    def submatrix(self, indices) -> "KernelMatrix":
        """Principal submatrix for the given subject positions, in order."""
        idx = np.asarray(indices, dtype=np.int64)
        return KernelMatrix(
            subjects=tuple(self.subjects[i] for i in idx),
            values=self.values[np.ix_(idx, idx)],
        )


@dataclass(frozen=True)
class VoxelGraph:
    """Weighted 6-neighborhood lattice over the masked voxels.

    Nodes are ascending linear voxel indices, matching the column order of
    any FeatureMatrix built from the same mask.
    """

    dims: tuple[int, int, int]
    nodes: np.ndarray = field(repr=False)
    adjacency: sp.csr_matrix = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    @property
    def degrees(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=1)).reshape(-1)

    @property
    def max_degree(self) -> float:
        return float(self.degrees.max()) if self.n_nodes else 0.0


@dataclass(frozen=True)
class RegularizationParams:
    """Heat-diffusion settings: beta is diffusion time, steps the Euler
    substep count (None picks the smallest power of two meeting the
    stability bound with a 0.5 safety factor)."""

    beta: float
    sigma_tissue: float = DEFAULT_SIGMA_TISSUE
    steps: int | None = None

    def __post_init__(self):
        if not np.isfinite(self.beta) or self.beta < 0:
            raise StabilityViolated(f"beta must be nonnegative, got {self.beta}")
        if not np.isfinite(self.sigma_tissue) or self.sigma_tissue <= 0:
            raise NonpositiveSigma(f"sigma_tissue must be positive, got {self.sigma_tissue}")
        if self.steps is not None and self.steps < 1:
            raise StabilityViolated(f"steps must be a positive integer, got {self.steps}")


@dataclass(frozen=True)
class MklParams:
    alpha: float

    def __post_init__(self):
        if not np.isfinite(self.alpha) or not 0.0 <= self.alpha <= 1.0:
            raise AlphaOutOfRange(f"alpha must lie in [0, 1], got {self.alpha}")


def _symmetrize(values: np.ndarray) -> np.ndarray:
    # mirror the lower triangle so symmetry holds bitwise
    lower = np.tril(values)
    return lower + np.tril(values, -1).T


def linear_gram(matrix: FeatureMatrix) -> KernelMatrix:
    """Gram matrix of pairwise inner products between subject rows."""
    values = matrix.values @ matrix.values.T
    return KernelMatrix(subjects=matrix.subjects, values=_symmetrize(values))


def build_voxel_graph(
    mask: Mask,
    tissue_maps: list[Volume3D] = (),
    sigma: float = DEFAULT_SIGMA_TISSUE,
) -> VoxelGraph:
    """Connect 6-neighbor masked voxels, weighting edges by tissue similarity.

    Edge weight is exp(-||p_i - p_j||^2 / (2 sigma^2)) where p is the vector
    of tissue probabilities (at most 3 maps); without maps all weights are 1.
    """
    if sigma <= 0 or not np.isfinite(sigma):
        raise NonpositiveSigma(f"sigma must be positive, got {sigma}")
    if len(tissue_maps) > 3:
        raise TissueProbabilityOutOfRange("at most 3 tissue maps supported")
    for tm in tissue_maps:
        if tm.header.dims != mask.dims:
            raise DimsMismatch(f"tissue map dims {tm.header.dims} != mask dims {mask.dims}")
        if tm.data.min() < 0.0 or tm.data.max() > 1.0:
            raise TissueProbabilityOutOfRange("tissue probabilities must lie in [0, 1]")

    nx, ny, nz = mask.dims
    included = mask.included.reshape((nx, ny, nz), order="F")
    nodes = mask.linear_indices
    n_nodes = nodes.size

    lookup = np.full(nx * ny * nz, -1, dtype=np.int64)
    lookup[nodes] = np.arange(n_nodes)

    if tissue_maps:
        probs = np.stack([tm.data for tm in tissue_maps], axis=1)  # (n_total, n_maps)
    else:
        probs = None

    rows, cols, weights = [], [], []
    strides = (1, nx, nx * ny)
    grid = np.arange(nx * ny * nz).reshape((nx, ny, nz), order="F")
    for axis, stride in enumerate(strides):
        pair_a = [slice(None)] * 3
        pair_b = [slice(None)] * 3
        pair_a[axis] = slice(0, -1)
        pair_b[axis] = slice(1, None)
        both = included[tuple(pair_a)] & included[tuple(pair_b)]
        lin_a = grid[tuple(pair_a)][both]
        lin_b = lin_a + stride
        if lin_a.size == 0:
            continue
        ia = lookup[lin_a]
        ib = lookup[lin_b]
        if probs is None:
            w = np.ones(ia.size)
        else:
            diff = probs[lin_a] - probs[lin_b]
            w = np.exp(-(diff * diff).sum(axis=1) / (2.0 * sigma * sigma))
        rows.append(ia)
        cols.append(ib)
        weights.append(w)

    if rows:
        ia = np.concatenate(rows)
        ib = np.concatenate(cols)
        w = np.concatenate(weights)
        adjacency = sp.coo_matrix(
            (np.concatenate([w, w]), (np.concatenate([ia, ib]), np.concatenate([ib, ia]))),
            shape=(n_nodes, n_nodes),
        ).tocsr()
    else:
        adjacency = sp.csr_matrix((n_nodes, n_nodes))
    return VoxelGraph(dims=mask.dims, nodes=nodes, adjacency=adjacency)


def default_steps(beta: float, graph: VoxelGraph) -> int:
    """Smallest power of two meeting the stability bound with 0.5 safety."""
    lam_bound = 2.0 * graph.max_degree
    if beta * lam_bound == 0.0:
        return 1
    steps = 1
    while beta * lam_bound / steps > _STABILITY_SAFETY:
        steps *= 2
    return steps


def diffuse(
    matrix: FeatureMatrix, graph: VoxelGraph, params: RegularizationParams
) -> FeatureMatrix:
    """Replace each row x by (I - (beta/m) L)^m x, approximating exp(-beta L) x."""
    if matrix.mask.count != graph.n_nodes or not np.array_equal(
        matrix.mask.linear_indices, graph.nodes
    ):
        raise ShapeMismatch("feature columns do not align with graph nodes")
    if params.beta == 0.0:
        return matrix

    steps = params.steps if params.steps is not None else default_steps(params.beta, graph)
    lam_bound = 2.0 * graph.max_degree
    if params.beta * lam_bound / steps >= 1.0:
        raise StabilityViolated(
            f"beta*lambda_max/steps = {params.beta * lam_bound / steps:.3f} >= 1; "
            f"increase steps"
        )

    W = graph.adjacency
    deg = graph.degrees
    c = params.beta / steps
    X = matrix.values.copy()
    for _ in range(steps):
        X -= c * (X * deg - (W @ X.T).T)
    return FeatureMatrix(subjects=matrix.subjects, mask=matrix.mask, values=X)


def regularized_gram(
    matrix: FeatureMatrix, graph: VoxelGraph, params: RegularizationParams
) -> KernelMatrix:
    """Gram matrix of the diffused features; reduces to linear_gram at beta=0."""
    return linear_gram(diffuse(matrix, graph, params))


def combine(k1: KernelMatrix, k2: KernelMatrix, params: MklParams) -> KernelMatrix:
    """Convex combination alpha*K1 + (1-alpha)*K2 over identical subjects."""
    if k1.subjects != k2.subjects:
        raise SubjectMismatch("kernel subject lists differ")
    alpha = params.alpha
    if not 0.0 <= alpha <= 1.0:
        raise AlphaOutOfRange(f"alpha must lie in [0, 1], got {alpha}")
    if alpha == 1.0:
        return k1
    if alpha == 0.0:
        return k2
    return KernelMatrix(
        subjects=k1.subjects, values=alpha * k1.values + (1.0 - alpha) * k2.values
    )


# --- kernel providers for cross-validation -----------------------------


class LinearKernel:
    """Provider yielding the plain inner-product kernel (no hyperparameters)."""

    uses_alpha = False
    uses_beta = False

    def __init__(self, matrix: FeatureMatrix):
        self.matrix = matrix
        self.subjects = matrix.subjects
        self._gram = None

    def kernel(self, alpha: float = 1.0, beta: float = 0.0) -> KernelMatrix:
        if self._gram is None:
            self._gram = linear_gram(self.matrix)
        return self._gram

    def feature_basis(self, alpha: float, beta: float, modality: str = "") -> list:
        """(modality, mixing weight, features) triples spanning the kernel."""
        return [(modality, 1.0, self.matrix)]


class RegularizedKernel:
    """Provider yielding heat-diffused kernels, cached per beta."""

    uses_alpha = False
    uses_beta = True

    def __init__(
        self,
        matrix: FeatureMatrix,
        graph: VoxelGraph,
        sigma_tissue: float = DEFAULT_SIGMA_TISSUE,
        steps: int | None = None,
    ):
        self.matrix = matrix
        self.graph = graph
        self.sigma_tissue = sigma_tissue
        self.steps = steps
        self.subjects = matrix.subjects
        self._cache: dict[float, tuple[FeatureMatrix, KernelMatrix]] = {}

    def _diffused(self, beta: float) -> tuple[FeatureMatrix, KernelMatrix]:
        if beta not in self._cache:
            params = RegularizationParams(
                beta=beta, sigma_tissue=self.sigma_tissue, steps=self.steps
            )
            diffused = diffuse(self.matrix, self.graph, params)
            self._cache[beta] = (diffused, linear_gram(diffused))
        return self._cache[beta]

    def kernel(self, alpha: float = 1.0, beta: float = 0.0) -> KernelMatrix:
        return self._diffused(beta)[1]

    def feature_basis(self, alpha: float, beta: float, modality: str = "") -> list:
        return [(modality, 1.0, self._diffused(beta)[0])]


class CombinedKernel:
    """Two-modality provider: alpha weights the first base kernel."""

    def __init__(self, first, second, first_name: str = "", second_name: str = ""):
        if tuple(first.subjects) != tuple(second.subjects):
            raise SubjectMismatch("combined kernels need identical subject order")
        self.first = first
        self.second = second
        self.first_name = first_name
        self.second_name = second_name
        self.subjects = first.subjects

    uses_alpha = True

    @property
    def uses_beta(self) -> bool:
        return self.first.uses_beta or self.second.uses_beta

    def kernel(self, alpha: float = 0.5, beta: float = 0.0) -> KernelMatrix:
        return combine(
            self.first.kernel(beta=beta), self.second.kernel(beta=beta), MklParams(alpha)
        )

    def feature_basis(self, alpha: float, beta: float, modality: str = "") -> list:
        basis = []
        for (name,), provider, weight in (
            ((self.first_name,), self.first, np.sqrt(alpha)),
            ((self.second_name,), self.second, np.sqrt(1.0 - alpha)),
        ):
            for _, w, mat in provider.feature_basis(alpha, beta, modality=name):
                basis.append((name, weight * w, mat))
        return basis


# --- persistence --------------------------------------------------------


def save_kernel(kernel: KernelMatrix, path) -> None:
    """Single-file container: magic, n, content digest, subject list, block."""
    block = kernel.values.astype("<f8").tobytes()
    subjects_json = json.dumps(list(kernel.subjects)).encode("utf-8")
    digest = hashlib.sha256(block).digest()
    with open(path, "wb") as fh:
        fh.write(KERNEL_MAGIC)
        fh.write(struct.pack("<I", kernel.n))
        fh.write(digest)
        fh.write(struct.pack("<I", len(subjects_json)))
        fh.write(subjects_json)
        fh.write(block)


def load_kernel(path) -> KernelMatrix:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != KERNEL_MAGIC:
        raise ValueError(f"not a kernel file: {path}")
    (n,) = struct.unpack_from("<I", data, 4)
    digest = data[8:40]
    (json_len,) = struct.unpack_from("<I", data, 40)
    subjects = json.loads(data[44:44 + json_len].decode("utf-8"))
    block = data[44 + json_len:44 + json_len + n * n * 8]
    if hashlib.sha256(block).digest() != digest:
        raise ValueError(f"kernel content digest mismatch: {path}")
    values = np.frombuffer(block, dtype="<f8").reshape(n, n)
    return KernelMatrix(subjects=tuple(subjects), values=values)
