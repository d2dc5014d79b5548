"""SNR scaling with range, the achievable sensing range and resolution bookkeeping."""

import math
from typing import List, NamedTuple, Sequence

import pydantic

from common import errors
from radio import frame


class LinkBudget(pydantic.BaseModel):
    """A measured reference SNR at a reference range, a path-loss exponent and a minimum SNR."""

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid")

    gamma_ref: float = pydantic.Field(gt=0)
    r_ref: float = pydantic.Field(gt=0)
    eta: float = pydantic.Field(default=2.0, gt=0)
    gamma_min: float = pydantic.Field(gt=0)


class Resolutions(NamedTuple):
    """Bin widths and unambiguous intervals of a frame."""

    range_res: float
    velocity_res: float
    unambiguous_range: float
    unambiguous_velocity: float


class SweepPoint(NamedTuple):
    """One row of an SNR-versus-range table."""

    range_m: float
    snr: float

    @property
    def snr_db(self) -> float:
        """SNR in dB."""
        return linear_to_db(self.snr)


def db_to_linear(value_db: float) -> float:
    """10^(x/10)."""
    return 10 ** (value_db / 10)


def linear_to_db(value: float) -> float:
    """10 log10(x); -inf for 0."""
    if value < 0:
        raise errors.InvalidInputError(f"Cannot express {value} in dB.")
    return -math.inf if value == 0 else 10 * math.log10(value)


def snr_at_range(budget: LinkBudget, r: float) -> float:
    """gamma(r) = gamma_ref * (r_ref / r)^(2 eta)."""
    if not r > 0:
        raise errors.InvalidInputError(f"Range must be > 0, got {r}.")
    return budget.gamma_ref * (budget.r_ref / r) ** (2 * budget.eta)


def max_range(budget: LinkBudget) -> float:
    """The range at which the SNR falls to gamma_min.

    Still defined when gamma_ref < gamma_min; the result is then below r_ref.
    """
    return (budget.gamma_ref / budget.gamma_min) ** (1 / (2 * budget.eta)) * budget.r_ref


def range_sweep(budget: LinkBudget, ranges: Sequence[float]) -> List[SweepPoint]:
    """Evaluate snr_at_range over ``ranges``."""
    return [SweepPoint(range_m=r, snr=snr_at_range(budget, r)) for r in ranges]


def resolutions(config: frame.FrameConfig) -> Resolutions:
    """Unpadded bin widths, maximum unambiguous range and +/- unambiguous speed."""
    c = frame.SPEED_OF_LIGHT
    return Resolutions(
        range_res=c / (2 * config.n_subcarriers * config.subcarrier_spacing),
        velocity_res=config.wavelength / (2 * config.n_symbols * config.symbol_duration),
        unambiguous_range=c / (2 * config.subcarrier_spacing),
        unambiguous_velocity=config.wavelength / (4 * config.symbol_duration),
    )


def jitter_range_std(sync_jitter_std: float) -> float:
    """One-way range perturbation scale c * sigma_j / 2 of a common delay jitter."""
    if sync_jitter_std < 0:
        raise errors.InvalidInputError(f"Jitter must be >= 0, got {sync_jitter_std}.")
    return frame.SPEED_OF_LIGHT * sync_jitter_std / 2
