"""OFDM frame geometry, the TDD activity pattern and the 16-QAM reference grid.

The 16-QAM constellation is Gray mapped per axis. A symbol index ``b3 b2 b1 b0``
takes its in-phase level from ``b3 b2`` and its quadrature level from ``b1 b0``:

    bits  00  01  11  10
    level -3  -1  +1  +3

and the point is ``(I + jQ) / sqrt(10)``, so index 0 is ``(-3 - 3j) / sqrt(10)``.
"""

import logging
from typing import Optional

import numpy as np
import pydantic
from scipy import constants

from common import errors
from radio import grids

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT = constants.c

NR_BASE_SUBCARRIER_SPACING = 15e3
NR_SYMBOLS_PER_SLOT = 14
NR_FRAME_DURATION = 10e-3
NR_SUBFRAMES_PER_FRAME = 10
NR_SUBCARRIERS_PER_RB = 12

# maximum transmission bandwidth in resource blocks, keyed by (mu, channel bandwidth)
NR_MAX_RB = {
    (0, 50e6): 270,
    (1, 100e6): 273,
    (2, 50e6): 66,
    (2, 100e6): 132,
    (2, 200e6): 264,
    (3, 50e6): 32,
    (3, 100e6): 66,
    (3, 200e6): 132,
    (3, 400e6): 264,
}

_GRAY_LEVELS = {0b00: -3.0, 0b01: -1.0, 0b11: 1.0, 0b10: 3.0}

QAM16_CONSTELLATION = np.array(
    [complex(_GRAY_LEVELS[index >> 2], _GRAY_LEVELS[index & 0b11]) for index in range(16)]
) / np.sqrt(10.0)
QAM16_CONSTELLATION.flags.writeable = False

# 0 = inner ring (|x|^2 = 0.2), 1 = edge (1.0), 2 = corner (1.8)
_POWER_CLASS = np.rint((np.abs(QAM16_CONSTELLATION) ** 2 - 0.2) / 0.8).astype(int)
_CLASS_MEMBERS = [np.flatnonzero(_POWER_CLASS == k) for k in range(3)]


class FrameConfig(pydantic.BaseModel):
    """The physical contract of one radio frame, shared by every stage of the chain."""

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid")

    carrier_freq: float = pydantic.Field(default=27.6e9, gt=0)
    bandwidth: float = pydantic.Field(default=200e6, gt=0)
    subcarrier_spacing: float = pydantic.Field(default=120e3, gt=0)
    n_subcarriers: int = pydantic.Field(default=1584, ge=1)
    n_symbols: int = pydantic.Field(default=1120, ge=1)
    frame_duration: float = pydantic.Field(default=NR_FRAME_DURATION, gt=0)
    tdd_dl_ratio: tuple[int, int] = (4, 1)

    @pydantic.field_validator("tdd_dl_ratio")
    @classmethod
    def _check_tdd(cls, value: tuple[int, int]) -> tuple[int, int]:
        downlink, uplink = value
        if downlink < 1 or uplink < 0:
            raise ValueError("tdd_dl_ratio needs at least one DL symbol and no negative UL count")
        return value

    @pydantic.model_validator(mode="after")
    def _flag_bandwidth(self) -> "FrameConfig":
        if self.exceeds_bandwidth:
            logger.warning(
                "Occupied bandwidth %.6g Hz (N=%s x %.6g Hz) exceeds the channel bandwidth %.6g Hz",
                self.occupied_bandwidth,
                self.n_subcarriers,
                self.subcarrier_spacing,
                self.bandwidth,
            )
        return self

    @property
    def symbol_duration(self) -> float:
        """T_sym = frame_duration / M."""
        return self.frame_duration / self.n_symbols

    @property
    def wavelength(self) -> float:
        """Carrier wavelength in metres."""
        return SPEED_OF_LIGHT / self.carrier_freq

    @property
    def occupied_bandwidth(self) -> float:
        """N * subcarrier spacing."""
        return self.n_subcarriers * self.subcarrier_spacing

    @property
    def exceeds_bandwidth(self) -> bool:
        """Warning flag: the subcarriers do not fit into the nominal bandwidth."""
        return self.occupied_bandwidth > self.bandwidth

    @property
    def shape(self) -> tuple[int, int]:
        """(N, M) of every grid built for this frame."""
        return (self.n_subcarriers, self.n_symbols)


def from_numerology(mu: int, n_subcarriers: Optional[int] = None, **overrides) -> FrameConfig:
    """Build a frame for NR numerology ``mu`` (subcarrier spacing 15 kHz * 2^mu).

    Arguments:
        mu: The numerology index, 0..6.
        n_subcarriers: Defaults to as many whole resource blocks as fit the bandwidth.
        overrides: Any other FrameConfig field.

    """
    if not 0 <= mu <= 6:
        raise errors.InvalidInputError(f"Numerology mu must be within 0..6, got {mu}.")
    spacing = NR_BASE_SUBCARRIER_SPACING * 2**mu
    n_symbols = NR_SYMBOLS_PER_SLOT * NR_SUBFRAMES_PER_FRAME * 2**mu
    bandwidth = overrides.pop("bandwidth", FrameConfig.model_fields["bandwidth"].default)
    if n_subcarriers is None:
        n_rb = NR_MAX_RB.get((mu, bandwidth)) or int(
            bandwidth * 0.95 // (spacing * NR_SUBCARRIERS_PER_RB)
        )
        n_subcarriers = max(n_rb, 1) * NR_SUBCARRIERS_PER_RB
    return FrameConfig(
        subcarrier_spacing=spacing,
        n_symbols=n_symbols,
        n_subcarriers=n_subcarriers,
        bandwidth=bandwidth,
        **overrides,
    )


def default_config() -> FrameConfig:
    """The 27.6 GHz, 200 MHz, mu = 3 frame with a 4:1 TDD pattern and 1584 subcarriers."""
    return FrameConfig()


def tdd_mask(config: FrameConfig) -> np.ndarray:
    """Return the N x M downlink mask: d DL symbols then u UL symbols, repeated along M."""
    downlink, uplink = config.tdd_dl_ratio
    symbols = np.arange(config.n_symbols) % (downlink + uplink) < downlink
    return np.tile(symbols, (config.n_subcarriers, 1))


def qam16_symbol(index: int) -> complex:
    """Return the Gray-mapped, unit-average-power 16-QAM point for ``index``."""
    if not 0 <= index <= 15:
        raise errors.InvalidInputError(f"16-QAM symbol index must be within 0..15, got {index}.")
    return complex(QAM16_CONSTELLATION[index])


def _rebalance(indices: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Swap as few symbols as possible so corner and inner counts match.

    The mean of |x|^2 over the frame is exactly 1 if and only if the number of
    corner points equals the number of inner points.
    """
    classes = _POWER_CLASS[indices]
    surplus = int(np.sum(classes == 2)) - int(np.sum(classes == 0))
    if surplus == 0:
        return indices
    source, target = (2, 0) if surplus > 0 else (0, 2)
    surplus = abs(surplus)
    picked = rng.choice(np.flatnonzero(classes == source), surplus // 2 + surplus % 2, False)
    to_target, to_edge = picked[: surplus // 2], picked[surplus // 2 :]
    indices = indices.copy()
    indices[to_target] = rng.choice(_CLASS_MEMBERS[target], to_target.size)
    indices[to_edge] = rng.choice(_CLASS_MEMBERS[1], to_edge.size)
    return indices


def generate_reference_frame(config: FrameConfig, seed: int) -> grids.ResourceGrid:
    """Fill every downlink resource element with a random 16-QAM symbol.

    Symbols are drawn independently and uniformly; afterwards the magnitude
    classes are rebalanced so that the frame has exactly unit mean power while
    every element remains a constellation point.
    """
    rng = np.random.default_rng(seed)
    mask = tdd_mask(config)
    indices = _rebalance(rng.integers(0, 16, size=int(mask.sum())), rng)
    data = np.zeros(config.shape, dtype=np.complex128)
    data[mask] = QAM16_CONSTELLATION[indices]
    return grids.ResourceGrid(data=data, mask=mask)
