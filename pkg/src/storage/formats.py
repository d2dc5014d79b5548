"""The on-disk formats: grid and periodogram binaries, CSV and JSON-lines exports.

Grid file (``.grid``), little endian::

    magic "ISACGRID" | version u32 | N u32 | M u32 | frame_index u64 | kind u8
    N*M complex values, interleaved f32 (re, im), row-major (subcarrier-major)
    mask bitmap, N*M bits row-major, LSB first, zero padded to a whole byte

Periodogram file (``.pgrm``), little endian::

    magic "ISACPGRM" | version u32 | N' u32 | M' u32 | df f64 | T_sym f64 | lambda f64
    N'*M' f64 values, row-major (range-major), Doppler axis centred
"""

import contextlib
import csv
import dataclasses
import enum
import io
import os
import pathlib
import struct
import tempfile
from typing import Iterable, List, Type, TypeVar, Union

import numpy as np
import pydantic

from common import errors
from radio import grids
from sensing import schemas, track

FORMAT_VERSION = 1

GRID_MAGIC = b"ISACGRID"
GRID_HEADER = struct.Struct("<8sIIIQB")
PERIODOGRAM_MAGIC = b"ISACPGRM"
PERIODOGRAM_HEADER = struct.Struct("<8sIIIddd")

PathLike = Union[str, os.PathLike]
RecordT = TypeVar("RecordT", bound=pydantic.BaseModel)


class GridKind(enum.IntEnum):
    """What a grid file holds."""

    REFERENCE = 0
    REFLECTED = 1
    CLUTTER_REFERENCE = 2


@dataclasses.dataclass(frozen=True, eq=False)
class GridRecord:
    """A decoded grid file."""

    kind: GridKind
    frame_index: int
    data: np.ndarray
    mask: np.ndarray

    def to_resource_grid(self) -> grids.ResourceGrid:
        """View as a transmitted or received resource grid."""
        return grids.ResourceGrid(data=self.data, mask=self.mask)

    def to_channel(self) -> grids.ChannelMatrix:
        """View as a channel matrix."""
        return grids.ChannelMatrix(data=self.data, mask=self.mask)


class DetectionRecord(pydantic.BaseModel):
    """One line of the detections JSON-lines export."""

    model_config = pydantic.ConfigDict(extra="forbid")

    frame: int = pydantic.Field(ge=0)
    range_m: float
    velocity_mps: float
    power_db: float
    bin_r: int
    bin_d: int

    @classmethod
    def from_detection(cls, frame_index: int, detection: schemas.Detection) -> "DetectionRecord":
        """Flatten a detection for export."""
        return cls(
            frame=frame_index,
            range_m=detection.range_m,
            velocity_mps=detection.velocity_mps,
            power_db=detection.power_db,
            bin_r=detection.bin[0],
            bin_d=detection.bin[1],
        )

    @property
    def power(self) -> float:
        """Linear power."""
        return 10 ** (self.power_db / 10)


class TrackRecord(pydantic.BaseModel):
    """One line of the track log: a track's state after a frame."""

    model_config = pydantic.ConfigDict(extra="forbid")

    frame: int = pydantic.Field(ge=0)
    id: int
    range_m: float
    speed_mps: float
    cov: List[float] = pydantic.Field(min_length=4, max_length=4)

    @classmethod
    def from_track(cls, frame_index: int, state: track.TrackState) -> "TrackRecord":
        """Flatten a track state, covariance row-major."""
        return cls(
            frame=frame_index,
            id=state.id,
            range_m=state.range_m,
            speed_mps=state.speed_mps,
            cov=[float(v) for v in state.P.ravel()],
        )


def atomic_write(path: PathLike, payload: bytes) -> None:
    """Write ``payload`` to a temporary sibling and rename it over ``path``."""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def _read_bytes(path: PathLike) -> bytes:
    try:
        return pathlib.Path(path).read_bytes()
    except FileNotFoundError as e:
        raise errors.FileFormatError(path, "file not found") from e


def encode_grid(
    grid: Union[grids.ResourceGrid, grids.ChannelMatrix], frame_index: int, kind: GridKind
) -> bytes:
    """Serialise a grid or channel into the grid file layout."""
    n, m = grid.shape
    header = GRID_HEADER.pack(GRID_MAGIC, FORMAT_VERSION, n, m, frame_index, int(kind))
    values = np.ascontiguousarray(grid.data, dtype="<c8").tobytes()
    bitmap = np.packbits(grid.mask.ravel(), bitorder="little").tobytes()
    return header + values + bitmap


def write_grid(
    path: PathLike,
    grid: Union[grids.ResourceGrid, grids.ChannelMatrix],
    frame_index: int,
    kind: GridKind,
) -> None:
    """Write a grid file atomically."""
    atomic_write(path, encode_grid(grid, frame_index, kind))


def grid_file_size(n: int, m: int) -> int:
    """Exact byte size of an N x M grid file."""
    return GRID_HEADER.size + n * m * 8 + (n * m + 7) // 8


def read_grid(path: PathLike) -> GridRecord:
    """Read and validate a grid file."""
    raw = _read_bytes(path)
    if len(raw) < GRID_HEADER.size:
        raise errors.FileFormatError(path, "truncated header")
    magic, version, n, m, frame_index, kind = GRID_HEADER.unpack_from(raw)
    if magic != GRID_MAGIC:
        raise errors.FileFormatError(path, f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise errors.FileFormatError(path, f"unsupported version {version}")
    if kind not in GridKind.__members__.values():
        raise errors.FileFormatError(path, f"unknown grid kind {kind}")
    if len(raw) != grid_file_size(n, m):
        raise errors.FileFormatError(
            path, f"expected {grid_file_size(n, m)} bytes for {n}x{m}, got {len(raw)}"
        )
    offset = GRID_HEADER.size
    values = np.frombuffer(raw, dtype="<c8", count=n * m, offset=offset)
    bits = np.frombuffer(raw, dtype=np.uint8, offset=offset + n * m * 8)
    mask = np.unpackbits(bits, count=n * m, bitorder="little").astype(bool)
    return GridRecord(
        kind=GridKind(kind),
        frame_index=frame_index,
        data=values.astype(np.complex128).reshape(n, m),
        mask=mask.reshape(n, m),
    )


def encode_periodogram(periodogram: schemas.Periodogram) -> bytes:
    """Serialise a periodogram into the periodogram file layout."""
    n, m = periodogram.shape
    header = PERIODOGRAM_HEADER.pack(
        PERIODOGRAM_MAGIC,
        FORMAT_VERSION,
        n,
        m,
        periodogram.subcarrier_spacing,
        periodogram.symbol_duration,
        periodogram.wavelength,
    )
    return header + np.ascontiguousarray(periodogram.values, dtype="<f8").tobytes()


def write_periodogram(path: PathLike, periodogram: schemas.Periodogram) -> None:
    """Write a periodogram file atomically."""
    atomic_write(path, encode_periodogram(periodogram))


def read_periodogram(path: PathLike) -> schemas.Periodogram:
    """Read a periodogram file; window and padding are not stored and come back as None."""
    raw = _read_bytes(path)
    if len(raw) < PERIODOGRAM_HEADER.size:
        raise errors.FileFormatError(path, "truncated header")
    magic, version, n, m, spacing, symbol_duration, wavelength = (
        PERIODOGRAM_HEADER.unpack_from(raw)
    )
    if magic != PERIODOGRAM_MAGIC:
        raise errors.FileFormatError(path, f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise errors.FileFormatError(path, f"unsupported version {version}")
    if len(raw) != PERIODOGRAM_HEADER.size + n * m * 8:
        raise errors.FileFormatError(path, f"size does not match {n}x{m} values")
    values = np.frombuffer(raw, dtype="<f8", offset=PERIODOGRAM_HEADER.size).reshape(n, m)
    return schemas.Periodogram(
        values=values,
        subcarrier_spacing=spacing,
        symbol_duration=symbol_duration,
        wavelength=wavelength,
    )


def write_periodogram_csv(path: PathLike, periodogram: schemas.Periodogram) -> None:
    """Export every bin as (range_m, velocity_mps, power) for plotting."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["range_m", "velocity_mps", "power"])
    values = periodogram.values.tolist()
    for i, range_m in enumerate(periodogram.range_axis.tolist()):
        for j, velocity_mps in enumerate(periodogram.velocity_axis.tolist()):
            writer.writerow([repr(range_m), repr(velocity_mps), repr(values[i][j])])
    atomic_write(path, buffer.getvalue().encode("utf-8"))


def encode_jsonl(records: Iterable[pydantic.BaseModel]) -> bytes:
    """One compact JSON object per line."""
    return "".join(f"{record.model_dump_json()}\n" for record in records).encode("utf-8")


def write_jsonl(path: PathLike, records: Iterable[pydantic.BaseModel]) -> None:
    """Write JSON-lines atomically."""
    atomic_write(path, encode_jsonl(records))


def read_jsonl(path: PathLike, model: Type[RecordT]) -> List[RecordT]:
    """Parse every non-blank line as ``model``; errors name the line number."""
    records = []
    for line_number, line in enumerate(_read_bytes(path).splitlines(), start=1):
        try:
            text = line.decode("utf-8")
        except UnicodeDecodeError as e:
            raise errors.FileFormatError(path, f"not UTF-8: {e.reason}", line=line_number) from e
        if not text.strip():
            continue
        try:
            records.append(model.model_validate_json(text))
        except pydantic.ValidationError as e:
            raise errors.FileFormatError(path, f"malformed record: {e}", line=line_number) from e
    return records
