"""The sensing processing unit: channel estimation, clutter removal, periodogram, peaks.

Transform conventions, both unnormalised:

* Doppler (symbol axis, length M'): ``X[k] = sum_m x[m] exp(-j 2 pi m k / M')``
* range (subcarrier axis, length N'): ``Y[k] = sum_n X[n] exp(+j 2 pi n k / N')``

The positive exponent on the subcarrier axis pairs with the channel's
``exp(-j 2 pi n df tau)`` so that positive delays land on positive range bins.
"""

import dataclasses
import logging
from typing import List, Optional, Sequence

import numpy as np
import pydantic
from scipy import ndimage
from scipy.signal import windows

from common import errors
from radio import frame, grids
from sensing import schemas

logger = logging.getLogger(__name__)

DIVISION_EPSILON = 1e-12
CURVATURE_EPSILON = 1e-30
MAX_SUB_BIN_OFFSET = float(np.nextafter(0.5, 0.0))


class ProcessingConfig(pydantic.BaseModel):
    """Knobs of the periodogram and peak extraction steps."""

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid")

    threshold_db: float = 60.0
    pad_range: int = pydantic.Field(default=1, ge=1)
    pad_doppler: int = pydantic.Field(default=1, ge=1)
    window: schemas.Window = schemas.Window.RECTANGULAR
    max_targets: int = pydantic.Field(default=16, ge=0)

    @property
    def threshold(self) -> float:
        """Linear detection threshold."""
        return 10 ** (self.threshold_db / 10)


@dataclasses.dataclass(frozen=True)
class FrameResult:
    """Everything the processing chain produces for one frame."""

    channel: grids.ChannelMatrix
    periodogram: schemas.Periodogram
    detections: List[schemas.Detection]


def compute_channel(
    reflected: grids.ResourceGrid, reference: grids.ResourceGrid
) -> grids.ChannelMatrix:
    """Divide the reflected grid by the reference grid element by element."""
    grids.check_same_shape("reflected grid", reference.shape, reflected.shape)
    valid = reference.mask & (np.abs(reference.data) > DIVISION_EPSILON)
    data = np.divide(
        reflected.data, reference.data, out=np.zeros(reference.shape, np.complex128), where=valid
    )
    return grids.ChannelMatrix(data=data, mask=valid)


def capture_clutter_reference(channels: Sequence[grids.ChannelMatrix]) -> grids.ChannelMatrix:
    """Average calibration captures of the empty scene into one clutter reference."""
    if not channels:
        raise errors.InvalidInputError("At least one calibration channel is required.")
    first = channels[0]
    mask = first.mask.copy()
    total = np.zeros(first.shape, dtype=np.complex128)
    for index, channel in enumerate(channels):
        grids.check_same_shape(f"calibration channel {index}", first.shape, channel.shape)
        if not np.array_equal(channel.mask, first.mask):
            logger.warning("Calibration channel %s has a different mask; intersecting.", index)
        mask &= channel.mask
        total += channel.data
    return grids.ChannelMatrix(data=total / len(channels), mask=mask)


def remove_clutter(
    channel: grids.ChannelMatrix, clutter_reference: grids.ChannelMatrix
) -> grids.ChannelMatrix:
    """Subtract the calibrated clutter channel on the elements both consider valid."""
    grids.check_same_shape("clutter reference", channel.shape, clutter_reference.shape)
    mask = channel.mask & clutter_reference.mask
    return grids.ChannelMatrix(data=channel.data - clutter_reference.data, mask=mask)


def compute_periodogram(  # pylint: disable=too-many-arguments,too-many-positional-arguments
    channel: grids.ChannelMatrix,
    config: frame.FrameConfig,
    pad_range: int = 1,
    pad_doppler: int = 1,
    window: schemas.Window = schemas.Window.RECTANGULAR,
) -> schemas.Periodogram:
    """Return |2D DFT|^2 of the channel with zero padding and a centred Doppler axis.

    N Doppler transforms run along the symbols, then M' range transforms along
    the subcarriers. Masked elements enter both transforms as zeros.
    """
    grids.check_same_shape("channel", config.shape, channel.shape)
    if int(pad_range) != pad_range or int(pad_doppler) != pad_doppler:
        raise errors.InvalidInputError("Padding factors must be integers.")
    if pad_range < 1 or pad_doppler < 1:
        raise errors.InvalidInputError(
            f"Padding factors must be >= 1, got ({pad_range}, {pad_doppler})."
        )
    n_subcarriers, n_symbols = channel.shape
    samples = np.where(channel.mask, channel.data, 0)
    if window == schemas.Window.HANN:
        samples = samples * np.outer(windows.hann(n_subcarriers), windows.hann(n_symbols))

    n_range, n_doppler = n_subcarriers * int(pad_range), n_symbols * int(pad_doppler)
    doppler = np.fft.fft(samples, n=n_doppler, axis=1)
    range_doppler = np.fft.ifft(doppler, n=n_range, axis=0) * n_range
    values = np.fft.fftshift(np.abs(range_doppler) ** 2, axes=1)
    return schemas.Periodogram(
        values=values,
        subcarrier_spacing=config.subcarrier_spacing,
        symbol_duration=config.symbol_duration,
        wavelength=config.wavelength,
        window=schemas.Window(window),
        pad_range=int(pad_range),
        pad_doppler=int(pad_doppler),
    )


def _local_maxima(values: np.ndarray) -> np.ndarray:
    """8-neighbourhood maxima; Doppler wraps, range does not.

    A bin must equal the maximum of its neighbourhood and strictly beat every
    neighbour that precedes it lexicographically, so a flat plateau yields
    only its first bin.
    """
    n_range, n_doppler = values.shape
    doppler_size = 3 if n_doppler > 1 else 1
    neighborhood_max = ndimage.maximum_filter(
        values, size=(3, doppler_size), mode=("constant", "wrap"), cval=-np.inf
    )
    is_max = values >= neighborhood_max

    rows, cols = np.nonzero(is_max)
    peak_values = values[rows, cols]
    keep = np.ones(rows.size, dtype=bool)
    for di, dj in ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1)):
        if dj != 0 and n_doppler == 1:
            continue
        neighbor_rows = rows + di
        neighbor_cols = (cols + dj) % n_doppler
        precedes = (neighbor_rows >= 0) & ((neighbor_rows < rows) | (neighbor_cols < cols))
        neighbor = values[np.clip(neighbor_rows, 0, n_range - 1), neighbor_cols]
        keep &= ~(precedes & (neighbor == peak_values))
    is_max[rows[~keep], cols[~keep]] = False
    return is_max


def _check_bin(periodogram: schemas.Periodogram, bin_: tuple[int, int]) -> tuple[int, int]:
    i, j = (int(b) for b in bin_)
    n_range, n_doppler = periodogram.shape
    if not (0 <= i < n_range and 0 <= j < n_doppler):
        raise errors.InvalidInputError(
            f"Bin {bin_} is outside the periodogram of shape {periodogram.shape}."
        )
    return i, j


def _vertex(y_minus: float, y_0: float, y_plus: float) -> float:
    curvature = y_minus - 2 * y_0 + y_plus
    if abs(curvature) < CURVATURE_EPSILON:
        return 0.0
    offset = 0.5 * (y_minus - y_plus) / curvature
    return float(np.clip(offset, -MAX_SUB_BIN_OFFSET, MAX_SUB_BIN_OFFSET))


def interpolate_peak(
    periodogram: schemas.Periodogram, bin_: tuple[int, int]
) -> tuple[float, float]:
    """Parabolic vertex offsets (range, Doppler) of a local maximum, each in (-0.5, 0.5)."""
    i, j = _check_bin(periodogram, bin_)
    values = periodogram.values
    n_range, n_doppler = values.shape
    lo, hi = max(i - 1, 0), min(i + 2, n_range)
    neighborhood = values[lo:hi][:, [(j - 1) % n_doppler, j, (j + 1) % n_doppler]]
    if values[i, j] < neighborhood.max():
        raise errors.InvalidInputError(f"Bin {bin_} is not a local maximum.")

    range_offset = 0.0
    if 0 < i < n_range - 1:
        range_offset = _vertex(values[i - 1, j], values[i, j], values[i + 1, j])
    doppler_offset = _vertex(
        values[i, (j - 1) % n_doppler], values[i, j], values[i, (j + 1) % n_doppler]
    )
    return range_offset, doppler_offset


def bins_to_physical(
    bin_: tuple[int, int], frac: tuple[float, float], periodogram: schemas.Periodogram
) -> tuple[float, float]:
    """Convert a (range bin, Doppler column) plus offsets into metres and metres per second."""
    i, j = _check_bin(periodogram, bin_)
    range_m = (i + frac[0]) * periodogram.range_bin_width
    velocity_mps = (j - periodogram.doppler_center + frac[1]) * periodogram.velocity_bin_width
    return range_m, velocity_mps


def extract_peaks(
    periodogram: schemas.Periodogram, threshold: float, max_targets: int
) -> List[schemas.Detection]:
    """List local maxima above ``threshold``, strongest first, at most ``max_targets``.

    Equal powers are ordered by (range bin, Doppler column).
    """
    if not threshold > 0:
        raise errors.InvalidInputError(f"Threshold must be > 0, got {threshold}.")
    values = periodogram.values
    rows, cols = np.nonzero((values > threshold) & _local_maxima(values))
    powers = values[rows, cols]
    order = np.lexsort((cols, rows, -powers))[: max(int(max_targets), 0)]

    detections = []
    for i, j in zip(rows[order].tolist(), cols[order].tolist()):
        frac = interpolate_peak(periodogram, (i, j))
        range_m, velocity_mps = bins_to_physical((i, j), frac, periodogram)
        detections.append(
            schemas.Detection(
                range_m=range_m,
                velocity_mps=velocity_mps,
                power=float(values[i, j]),
                bin=(i, j),
                frac=frac,
            )
        )
    return detections


def process_frame(  # pylint: disable=too-many-arguments,too-many-positional-arguments
    reflected: grids.ResourceGrid,
    reference: grids.ResourceGrid,
    config: frame.FrameConfig,
    processing: ProcessingConfig,
    clutter_reference: Optional[grids.ChannelMatrix] = None,
) -> FrameResult:
    """Run the whole chain on one (reflected, reference) pair."""
    channel = compute_channel(reflected, reference)
    if clutter_reference is not None:
        channel = remove_clutter(channel, clutter_reference)
    periodogram = compute_periodogram(
        channel, config, processing.pad_range, processing.pad_doppler, processing.window
    )
    detections = extract_peaks(periodogram, processing.threshold, processing.max_targets)
    return FrameResult(channel=channel, periodogram=periodogram, detections=detections)
