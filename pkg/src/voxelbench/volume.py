"""Minimal NIfTI-1 volume I/O and mask-based vectorization.

Supports exactly the subset the toolkit needs: uncompressed, little-endian,
single-file NIfTI-1, 3-D, datatypes uint8/int16/float32. Everything else is
rejected with a typed error. Values are held as float64 internally; the
writer always emits float32 with identity scaling, so float32 volumes
round-trip bit-exactly.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadMagic,
    DimensionalityNot3D,
    DimsMismatch,
    LengthMismatch,
    MalformedHeader,
    NonFiniteData,
    TruncatedData,
    UnsupportedDatatype,
)

HEADER_SIZE = 348
VOX_OFFSET = 352
MAGIC_SINGLE_FILE = b"n+1\x00"

#: NIfTI-1 datatype code -> numpy dtype (little-endian)
SUPPORTED_DATATYPES = {
    2: np.dtype("<u1"),   # uint8
    4: np.dtype("<i2"),   # int16
    16: np.dtype("<f4"),  # float32
}

_DESCRIP = b"voxelbench"


@dataclass(frozen=True)
class VolumeHeader:
    """Shape, spacing and storage metadata for one 3-D volume."""

    dims: tuple[int, int, int]
    voxel_size_mm: tuple[float, float, float] = (1.0, 1.0, 1.0)
    datatype_code: int = 16
    scl_slope: float = 1.0
    scl_inter: float = 0.0

    def __post_init__(self):
        if len(self.dims) != 3 or any(int(d) < 1 for d in self.dims):
            raise DimensionalityNot3D(f"dims must be three positive extents, got {self.dims}")
        if len(self.voxel_size_mm) != 3 or any(
            not np.isfinite(s) or s <= 0 for s in self.voxel_size_mm
        ):
            raise MalformedHeader(f"voxel sizes must be positive, got {self.voxel_size_mm}")
        if self.datatype_code not in SUPPORTED_DATATYPES:
            raise UnsupportedDatatype(f"datatype code {self.datatype_code} not supported")
        if not (np.isfinite(self.scl_slope) and np.isfinite(self.scl_inter)):
            raise MalformedHeader("scl_slope/scl_inter must be finite")

    @property
    def n_voxels(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz


@dataclass(frozen=True)
class Volume3D:
    """A 3-D scalar field stored flat in x-fastest (then y, then z) order."""

    header: VolumeHeader
    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64).reshape(-1)
        if arr.size != self.header.n_voxels:
            raise LengthMismatch(
                f"data length {arr.size} != product of dims {self.header.n_voxels}"
            )
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_array(cls, array, voxel_size_mm=(1.0, 1.0, 1.0)) -> "Volume3D":
        """Build a volume from a 3-D array indexed [x, y, z]."""
        arr = np.asarray(array, dtype=np.float64)
        if arr.ndim != 3:
            raise DimensionalityNot3D(f"expected 3-D array, got ndim={arr.ndim}")
        header = VolumeHeader(dims=arr.shape, voxel_size_mm=tuple(voxel_size_mm))
        return cls(header=header, data=arr.ravel(order="F"))

    def as_array(self) -> np.ndarray:
        """Return the data as a 3-D array indexed [x, y, z]."""
        return self.data.reshape(self.header.dims, order="F")

    def with_data(self, data) -> "Volume3D":
        return Volume3D(header=self.header, data=data)


@dataclass(frozen=True)
class Mask:
    """Boolean voxel selection over a grid, same flat ordering as Volume3D."""

    dims: tuple[int, int, int]
    included: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.included, dtype=bool).reshape(-1)
        nx, ny, nz = self.dims
        if arr.size != nx * ny * nz:
            raise LengthMismatch(
                f"mask length {arr.size} != product of dims {nx * ny * nz}"
            )
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "included", arr)

    @property
    def count(self) -> int:
        return int(self.included.sum())

    @property
    def linear_indices(self) -> np.ndarray:
        """Ascending linear indices of included voxels."""
        return np.flatnonzero(self.included)

    @classmethod
    def full(cls, dims) -> "Mask":
        dims = tuple(int(d) for d in dims)
        return cls(dims=dims, included=np.ones(dims[0] * dims[1] * dims[2], dtype=bool))

    @classmethod
    def from_volume(cls, volume: Volume3D, threshold: float = 0.5) -> "Mask":
        """Threshold a volume (e.g. a stored mask image) into a Mask."""
        return cls(dims=volume.header.dims, included=volume.data > threshold)


def _require_finite(values: np.ndarray, context: str) -> None:
    if not np.all(np.isfinite(values)):
        raise NonFiniteData(f"{context}: volume contains NaN or Inf")


def read_volume(data: bytes) -> Volume3D:
    """Parse an uncompressed single-file little-endian NIfTI-1 byte string.

    Applies the ``raw * scl_slope + scl_inter`` affine when the header
    declares a nontrivial scaling (slope not in {0, 1} or nonzero
    intercept). Never reads past the extent implied by the header: trailing
    bytes are ignored, missing bytes raise :class:`TruncatedData`.
    """
    if len(data) < HEADER_SIZE:
        raise TruncatedData(f"file holds {len(data)} bytes, header needs {HEADER_SIZE}")

    magic = data[344:348]
    if magic != MAGIC_SINGLE_FILE:
        raise BadMagic(f"magic {magic!r}, expected {MAGIC_SINGLE_FILE!r}")
    (sizeof_hdr,) = struct.unpack_from("<i", data, 0)
    if sizeof_hdr != HEADER_SIZE:
        raise BadMagic(f"sizeof_hdr {sizeof_hdr}, expected {HEADER_SIZE} (little-endian)")

    dim = struct.unpack_from("<8h", data, 40)
    if dim[0] != 3:
        raise DimensionalityNot3D(f"dim[0] = {dim[0]}, expected 3")
    dims = tuple(int(d) for d in dim[1:4])
    if any(d < 1 for d in dims):
        raise DimensionalityNot3D(f"nonpositive extent in dim[1..3] = {dims}")

    (datatype_code,) = struct.unpack_from("<h", data, 70)
    if datatype_code not in SUPPORTED_DATATYPES:
        raise UnsupportedDatatype(f"datatype code {datatype_code} not in supported set")

    pixdim = struct.unpack_from("<8f", data, 76)
    voxel_size = tuple(float(p) for p in pixdim[1:4])
    if any(not np.isfinite(s) or s <= 0 for s in voxel_size):
        raise MalformedHeader(f"pixdim[1..3] must be positive, got {voxel_size}")

    (vox_offset_f,) = struct.unpack_from("<f", data, 108)
    if not np.isfinite(vox_offset_f) or vox_offset_f < VOX_OFFSET:
        raise MalformedHeader(f"vox_offset {vox_offset_f} < minimum {VOX_OFFSET}")
    vox_offset = int(round(vox_offset_f))

    scl_slope, scl_inter = struct.unpack_from("<2f", data, 112)
    if not (np.isfinite(scl_slope) and np.isfinite(scl_inter)):
        raise MalformedHeader("scl_slope/scl_inter must be finite")

    dtype = SUPPORTED_DATATYPES[datatype_code]
    count = dims[0] * dims[1] * dims[2]
    needed = vox_offset + count * dtype.itemsize
    if len(data) < needed:
        raise TruncatedData(
            f"data section needs {count * dtype.itemsize} bytes at offset "
            f"{vox_offset}, file holds {len(data)}"
        )
    raw = np.frombuffer(data, dtype=dtype, count=count, offset=vox_offset)
    values = raw.astype(np.float64)
    if scl_slope != 0.0 and (scl_slope, scl_inter) != (1.0, 0.0):
        values = values * float(scl_slope) + float(scl_inter)
    _require_finite(values, "read_volume")

    header = VolumeHeader(
        dims=dims,
        voxel_size_mm=voxel_size,
        datatype_code=datatype_code,
        scl_slope=float(scl_slope),
        scl_inter=float(scl_inter),
    )
    return Volume3D(header=header, data=values)


def write_volume(volume: Volume3D) -> bytes:
    """Serialize a volume as float32 NIfTI-1 with identity scaling.

    Output is deterministic: no timestamps, fixed description, identity
    orientation (sform = diag(voxel sizes)). Non-finite values are rejected.
    """
    _require_finite(volume.data, "write_volume")
    nx, ny, nz = volume.header.dims
    dx, dy, dz = volume.header.voxel_size_mm

    hdr = bytearray(HEADER_SIZE)
    struct.pack_into("<i", hdr, 0, HEADER_SIZE)
    struct.pack_into("<8h", hdr, 40, 3, nx, ny, nz, 1, 1, 1, 1)
    struct.pack_into("<h", hdr, 70, 16)          # float32
    struct.pack_into("<h", hdr, 72, 32)          # bitpix
    struct.pack_into("<8f", hdr, 76, 1.0, dx, dy, dz, 0.0, 0.0, 0.0, 0.0)
    struct.pack_into("<f", hdr, 108, float(VOX_OFFSET))
    struct.pack_into("<2f", hdr, 112, 1.0, 0.0)  # scl_slope, scl_inter
    hdr[123] = 2                                 # xyzt_units: millimeters
    hdr[148:148 + len(_DESCRIP)] = _DESCRIP
    struct.pack_into("<h", hdr, 254, 1)          # sform_code: scanner
    struct.pack_into("<4f", hdr, 280, dx, 0.0, 0.0, 0.0)
    struct.pack_into("<4f", hdr, 296, 0.0, dy, 0.0, 0.0)
    struct.pack_into("<4f", hdr, 312, 0.0, 0.0, dz, 0.0)
    hdr[344:348] = MAGIC_SINGLE_FILE

    payload = volume.data.astype("<f4").tobytes()
    return bytes(hdr) + b"\x00" * (VOX_OFFSET - HEADER_SIZE) + payload


def read_volume_file(path) -> Volume3D:
    with open(path, "rb") as fh:
        return read_volume(fh.read())


def write_volume_file(path, volume: Volume3D) -> None:
    with open(path, "wb") as fh:
        fh.write(write_volume(volume))


def flatten(volume: Volume3D, mask: Mask) -> np.ndarray:
    """Extract masked voxel values in ascending linear-index order."""
    if volume.header.dims != mask.dims:
        raise DimsMismatch(f"volume dims {volume.header.dims} != mask dims {mask.dims}")
    return volume.data[mask.included].copy()


def unflatten(vector, mask: Mask, voxel_size_mm=(1.0, 1.0, 1.0)) -> Volume3D:
    """Scatter a feature vector back onto the grid; excluded voxels are 0."""
    vec = np.asarray(vector, dtype=np.float64).reshape(-1)
    if vec.size != mask.count:
        raise LengthMismatch(f"vector length {vec.size} != mask count {mask.count}")
    out = np.zeros(mask.included.size, dtype=np.float64)
    out[mask.included] = vec
    header = VolumeHeader(dims=mask.dims, voxel_size_mm=tuple(voxel_size_mm))
    return Volume3D(header=header, data=out)
