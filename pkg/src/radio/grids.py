"""The N x M complex matrices exchanged between the radio side and the sensing processor."""

import dataclasses

import numpy as np

from common import errors


def _freeze(data: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    data = np.array(data, dtype=np.complex128)
    mask = np.array(mask, dtype=bool)
    if data.ndim != 2 or data.shape != mask.shape:
        raise errors.DimensionMismatchError("mask", data.shape, mask.shape)
    data[~mask] = 0
    data.flags.writeable = False
    mask.flags.writeable = False
    return data, mask


@dataclasses.dataclass(frozen=True, eq=False)
class ResourceGrid:
    """One radio frame of frequency-domain resource elements, subcarriers along axis 0.

    Elements outside ``mask`` are forced to zero; the arrays are read-only copies.
    """

    data: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        data, mask = _freeze(self.data, self.mask)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "mask", mask)

    @property
    def shape(self) -> tuple[int, int]:
        """(N subcarriers, M symbols)."""
        return self.data.shape  # type: ignore[return-value]

    @property
    def active_count(self) -> int:
        """Number of actively transmitted resource elements."""
        return int(self.mask.sum())

    @property
    def mean_power(self) -> float:
        """Mean |x|^2 over active elements, 0 for an empty mask."""
        if not self.active_count:
            return 0.0
        return float(np.mean(np.abs(self.data[self.mask]) ** 2))


@dataclasses.dataclass(frozen=True, eq=False)
class ChannelMatrix:
    """Per-resource-element channel estimate; ``mask`` marks the valid divisions."""

    data: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        data, mask = _freeze(self.data, self.mask)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "mask", mask)

    @property
    def shape(self) -> tuple[int, int]:
        """(N subcarriers, M symbols)."""
        return self.data.shape  # type: ignore[return-value]

    @classmethod
    def full(cls, data: np.ndarray) -> "ChannelMatrix":
        """Wrap a channel that is valid on every resource element."""
        return cls(data=data, mask=np.ones(np.shape(data), dtype=bool))

    @classmethod
    def zeros(cls, shape: tuple[int, int]) -> "ChannelMatrix":
        """An all-zero, all-valid channel."""
        return cls.full(np.zeros(shape, dtype=np.complex128))


def check_same_shape(what: str, expected: tuple, actual: tuple) -> None:
    """Raise DimensionMismatchError unless both shapes agree."""
    if tuple(expected) != tuple(actual):
        raise errors.DimensionMismatchError(what, tuple(expected), tuple(actual))
