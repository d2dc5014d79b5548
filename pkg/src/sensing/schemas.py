"""The schemas produced by the sensing processor."""

import dataclasses
import enum
import math
from typing import Optional

import numpy as np
import pydantic

from radio import frame


class Window(enum.StrEnum):
    """Separable taper applied to the channel before the transforms."""

    RECTANGULAR = "rectangular"
    HANN = "hann"


@dataclasses.dataclass(frozen=True, eq=False)
class Periodogram:  # pylint: disable=too-many-instance-attributes
    """Range/Doppler power map, range along axis 0 and centred Doppler along axis 1."""

    values: np.ndarray
    subcarrier_spacing: float
    symbol_duration: float
    wavelength: float
    window: Optional[Window] = None
    pad_range: Optional[int] = None
    pad_doppler: Optional[int] = None
    range_axis: np.ndarray = dataclasses.field(init=False)
    velocity_axis: np.ndarray = dataclasses.field(init=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        n_range, n_doppler = values.shape
        range_axis = np.arange(n_range) * self.range_bin_width
        velocity_axis = (np.arange(n_doppler) - n_doppler // 2) * self.velocity_bin_width
        range_axis.flags.writeable = False
        velocity_axis.flags.writeable = False
        object.__setattr__(self, "range_axis", range_axis)
        object.__setattr__(self, "velocity_axis", velocity_axis)

    @property
    def shape(self) -> tuple[int, int]:
        """(N', M')."""
        return self.values.shape  # type: ignore[return-value]

    @property
    def doppler_center(self) -> int:
        """Column holding zero velocity."""
        return self.values.shape[1] // 2

    @property
    def range_bin_width(self) -> float:
        """c / (2 N' df)."""
        return frame.SPEED_OF_LIGHT / (2 * self.values.shape[0] * self.subcarrier_spacing)

    @property
    def velocity_bin_width(self) -> float:
        """lambda / (2 M' T_sym)."""
        return self.wavelength / (2 * self.values.shape[1] * self.symbol_duration)


class Detection(pydantic.BaseModel):
    """A periodogram peak with sub-bin offsets and physical coordinates."""

    model_config = pydantic.ConfigDict(frozen=True)

    range_m: float
    velocity_mps: float
    power: float = pydantic.Field(gt=0)
    bin: tuple[int, int]
    frac: tuple[float, float]

    @pydantic.field_validator("frac")
    @classmethod
    def _sub_bin(cls, value: tuple[float, float]) -> tuple[float, float]:
        if any(abs(offset) >= 0.5 for offset in value):
            raise ValueError(f"sub-bin offsets must lie within (-0.5, 0.5), got {value}")
        return value

    @property
    def power_db(self) -> float:
        """10 log10 of the peak power."""
        return 10 * math.log10(self.power)
