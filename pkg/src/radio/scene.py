"""The scene simulator standing in for the gNB RU and the receive-only Sniffer RU.

A scene is a list of point reflectors. Each contributes
``a * exp(-j 2 pi n df tau) * exp(+j 2 pi m T_sym f_D)`` to the channel with
``tau = 2 r / c + jitter`` and ``f_D = 2 v / lambda``.
"""

import logging
import math
from typing import Iterable, List

import numpy as np
import pydantic

from common import errors
from radio import frame, grids

logger = logging.getLogger(__name__)


class PointTarget(pydantic.BaseModel):
    """A point reflector with a flat complex gain across the band."""

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid")

    range_m: float = pydantic.Field(gt=0)
    velocity_mps: float = 0.0
    magnitude: float = pydantic.Field(default=1.0, ge=0)
    phase_rad: float = 0.0

    @classmethod
    def from_db(
        cls, range_m: float, velocity_mps: float, amplitude_db: float, phase_rad: float = 0.0
    ) -> "PointTarget":
        """Build a target whose amplitude is given as 20 log10 |a|."""
        return cls(
            range_m=range_m,
            velocity_mps=velocity_mps,
            magnitude=10 ** (amplitude_db / 20),
            phase_rad=phase_rad,
        )

    @property
    def amplitude(self) -> complex:
        """The linear complex gain a."""
        return self.magnitude * complex(math.cos(self.phase_rad), math.sin(self.phase_rad))

    @property
    def delay(self) -> float:
        """Round-trip delay in seconds."""
        return 2 * self.range_m / frame.SPEED_OF_LIGHT

    def doppler(self, config: frame.FrameConfig) -> float:
        """Doppler shift in Hz for the frame's carrier."""
        return 2 * self.velocity_mps / config.wavelength

    def check_unambiguous(self, config: frame.FrameConfig) -> None:
        """Reject targets outside the frame's unambiguous range or Doppler interval."""
        max_range = frame.SPEED_OF_LIGHT / (2 * config.subcarrier_spacing)
        if self.range_m >= max_range:
            raise errors.InvalidInputError(
                f"range_m {self.range_m} is beyond the unambiguous range {max_range:.6g} m."
            )
        max_speed = config.wavelength / (4 * config.symbol_duration)
        if abs(self.velocity_mps) >= max_speed:
            raise errors.InvalidInputError(
                f"velocity_mps {self.velocity_mps} is beyond the unambiguous speed "
                f"{max_speed:.6g} m/s."
            )


class Scene(pydantic.BaseModel):
    """Moving targets of interest, static clutter, receiver noise and RU sync jitter."""

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid")

    targets: List[PointTarget] = []
    clutter: List[PointTarget] = []
    noise_power: float = pydantic.Field(default=0.0, ge=0)
    sync_jitter_std: float = pydantic.Field(default=0.0, ge=0)

    @pydantic.field_validator("clutter")
    @classmethod
    def _static_clutter(cls, value: List[PointTarget]) -> List[PointTarget]:
        for index, reflector in enumerate(value):
            if reflector.velocity_mps != 0:
                raise ValueError(f"clutter {index} must be static, got {reflector.velocity_mps}")
        return value

    @property
    def reflectors(self) -> List[PointTarget]:
        """Targets followed by clutter."""
        return [*self.targets, *self.clutter]

    def clutter_only(self) -> "Scene":
        """The calibration view of this scene: clutter kept, targets removed."""
        return self.model_copy(update={"targets": []})

    def check_unambiguous(self, config: frame.FrameConfig) -> None:
        """Validate every reflector against the frame geometry."""
        for reflector in self.reflectors:
            reflector.check_unambiguous(config)


def _channel_of(
    reflectors: Iterable[PointTarget], config: frame.FrameConfig, jitter: float
) -> np.ndarray:
    reflectors = list(reflectors)
    if not reflectors:
        return np.zeros(config.shape, dtype=np.complex128)
    amplitudes = np.array([r.amplitude for r in reflectors])
    delays = np.array([r.delay for r in reflectors]) + jitter
    dopplers = np.array([r.doppler(config) for r in reflectors])
    n = np.arange(config.n_subcarriers)
    m = np.arange(config.n_symbols)
    range_phase = np.exp(-2j * np.pi * config.subcarrier_spacing * np.outer(delays, n))
    doppler_phase = np.exp(2j * np.pi * config.symbol_duration * np.outer(dopplers, m))
    return (amplitudes[:, None] * range_phase).T @ doppler_phase


def synthesize_channel(
    scene: Scene, config: frame.FrameConfig, seed: int
) -> grids.ChannelMatrix:
    """Return the noiseless channel H[n, m] of every target and clutter reflector.

    The sync jitter is one Gaussian delay offset shared by all reflectors of the
    frame; with ``sync_jitter_std == 0`` the result does not depend on ``seed``.
    """
    scene.check_unambiguous(config)
    jitter = 0.0
    if scene.sync_jitter_std > 0:
        jitter = float(np.random.default_rng(seed).normal(0.0, scene.sync_jitter_std))
    return grids.ChannelMatrix.full(_channel_of(scene.reflectors, config, jitter))


def apply_channel(
    reference: grids.ResourceGrid, channel: grids.ChannelMatrix, noise_power: float, seed: int
) -> grids.ResourceGrid:
    """Produce the reflected grid: reference * H plus complex Gaussian noise, on active REs."""
    grids.check_same_shape("channel", reference.shape, channel.shape)
    if noise_power < 0:
        raise errors.InvalidInputError(f"noise_power must be >= 0, got {noise_power}.")
    data = reference.data * channel.data
    if noise_power > 0:
        rng = np.random.default_rng(seed)
        noise = rng.standard_normal(reference.shape) + 1j * rng.standard_normal(reference.shape)
        data = data + np.sqrt(noise_power / 2) * noise
    return grids.ResourceGrid(data=data, mask=reference.mask)


def per_re_snr(target_amplitude: complex, noise_power: float) -> float:
    """|a|^2 / sigma^2 for unit-power reference symbols; +inf when there is no noise."""
    if noise_power < 0:
        raise errors.InvalidInputError(f"noise_power must be >= 0, got {noise_power}.")
    if noise_power == 0:
        return math.inf
    return abs(target_amplitude) ** 2 / noise_power
