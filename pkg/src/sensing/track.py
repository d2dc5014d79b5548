"""Constant-velocity Kalman tracking of detections over consecutive frames.

The state is (range, range rate); both are measured directly (range from the
range bin, range rate from the Doppler bin), so the measurement matrix is the
identity.
"""

import dataclasses
import logging
from typing import List, Optional, Protocol, Sequence

import numpy as np
import pydantic

from common import errors

logger = logging.getLogger(__name__)

MAX_INNOVATION_CONDITION = 1e12
SPAWN_COVARIANCE_INFLATION = 10.0


class Measurement(Protocol):  # pylint: disable=too-few-public-methods
    """Anything carrying a range, a Doppler speed and a power."""

    range_m: float
    velocity_mps: float

    @property
    def power(self) -> float:  # noqa: D102
        ...


class TrackerConfig(pydantic.BaseModel):
    """Kalman filter and track management parameters."""

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid")

    dt: float = pydantic.Field(default=0.01, gt=0)
    process_noise: float = pydantic.Field(default=1.0, ge=0)
    meas_noise: tuple[tuple[float, float], tuple[float, float]] = (
        (0.05**2, 0.0),
        (0.0, 0.1**2),
    )
    gate: float = pydantic.Field(default=9.21, gt=0)
    max_misses: int = pydantic.Field(default=10, ge=0)

    @pydantic.field_validator("meas_noise")
    @classmethod
    def _positive_definite(cls, value):
        matrix = np.array(value, dtype=float)
        if not np.allclose(matrix, matrix.T, rtol=0, atol=1e-15):
            raise ValueError("meas_noise must be symmetric")
        if np.linalg.eigvalsh(matrix).min() <= 0:
            raise ValueError("meas_noise must be positive definite")
        return value

    @property
    def R(self) -> np.ndarray:  # pylint: disable=invalid-name
        """Measurement noise covariance."""
        return np.array(self.meas_noise, dtype=float)

    def transition(self, dt: Optional[float] = None) -> np.ndarray:
        """F = [[1, dt], [0, 1]]."""
        dt = self.dt if dt is None else dt
        return np.array([[1.0, dt], [0.0, 1.0]])

    def process_covariance(self, dt: Optional[float] = None) -> np.ndarray:
        """Q = q [[dt^4/4, dt^3/2], [dt^3/2, dt^2]] (white acceleration)."""
        dt = self.dt if dt is None else dt
        return self.process_noise * np.array(
            [[dt**4 / 4, dt**3 / 2], [dt**3 / 2, dt**2]],
        )


@dataclasses.dataclass(frozen=True, eq=False)
class TrackState:
    """One target's filtered state."""

    id: int
    x: np.ndarray
    P: np.ndarray  # pylint: disable=invalid-name
    age: int = 1
    misses: int = 0
    power: float = 0.0

    def __post_init__(self):
        x = np.array(self.x, dtype=float).reshape(2)
        covariance = np.array(self.P, dtype=float).reshape(2, 2)
        x.flags.writeable = False
        covariance.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "P", covariance)

    @property
    def range_m(self) -> float:
        """Filtered range."""
        return float(self.x[0])

    @property
    def speed_mps(self) -> float:
        """Filtered range rate."""
        return float(self.x[1])


@dataclasses.dataclass
class Assignment:
    """Outcome of associating one frame's detections with the live tracks."""

    matches: List[tuple[int, int]]
    unmatched_detections: List[int]
    unmatched_tracks: List[int]


def kf_predict(track: TrackState, cfg: TrackerConfig, dt: Optional[float] = None) -> TrackState:
    """Propagate the state one frame ahead."""
    transition = cfg.transition(dt)
    covariance = transition @ track.P @ transition.T + cfg.process_covariance(dt)
    return dataclasses.replace(
        track, x=transition @ track.x, P=0.5 * (covariance + covariance.T)
    )


def _innovation(track: TrackState, z, cfg: TrackerConfig) -> tuple[np.ndarray, np.ndarray]:
    innovation = np.asarray(z, dtype=float).reshape(2) - track.x
    return innovation, track.P + cfg.R


def innovation_distance(track: TrackState, z, cfg: TrackerConfig) -> float:
    """Squared Mahalanobis distance y^T S^-1 y of a measurement from the track."""
    innovation, covariance = _innovation(track, z, cfg)
    return float(innovation @ np.linalg.solve(covariance, innovation))


def kf_update(track: TrackState, z, cfg: TrackerConfig) -> TrackState:
    """Correct the state with a (range, speed) measurement.

    Raises:
        SingularInnovationError: S = P + R has a condition number above 1e12.

    """
    innovation, covariance = _innovation(track, z, cfg)
    condition = np.linalg.cond(covariance)
    if not condition <= MAX_INNOVATION_CONDITION:
        raise errors.SingularInnovationError(
            f"Track {track.id}: innovation covariance condition {condition:.3g} too large."
        )
    gain = np.linalg.solve(covariance.T, track.P.T).T
    updated = (np.eye(2) - gain) @ track.P
    return dataclasses.replace(
        track, x=track.x + gain @ innovation, P=0.5 * (updated + updated.T)
    )


def spawn_track(track_id: int, detection: Measurement, cfg: TrackerConfig) -> TrackState:
    """Start a track at the detection, with covariance R inflated tenfold."""
    return TrackState(
        id=track_id,
        x=np.array([detection.range_m, detection.velocity_mps]),
        P=SPAWN_COVARIANCE_INFLATION * cfg.R,
        power=detection.power,
    )


def associate(
    tracks: Sequence[TrackState], detections: Sequence[Measurement], cfg: TrackerConfig
) -> Assignment:
    """Greedy nearest neighbour association, strongest detection first.

    ``tracks`` are expected to be predicted to the detections' frame already.
    Each detection takes the free track with the smallest Mahalanobis distance
    if that distance is below the gate.
    """
    order = sorted(range(len(detections)), key=lambda k: -detections[k].power)
    free = set(range(len(tracks)))
    matches: List[tuple[int, int]] = []
    unmatched: List[int] = []
    for k in order:
        z = (detections[k].range_m, detections[k].velocity_mps)
        distances = {t: innovation_distance(tracks[t], z, cfg) for t in sorted(free)}
        best = min(distances, key=lambda t: distances[t], default=None)
        if best is not None and distances[best] < cfg.gate:
            matches.append((best, k))
            free.remove(best)
        else:
            unmatched.append(k)
    return Assignment(
        matches=matches, unmatched_detections=sorted(unmatched), unmatched_tracks=sorted(free)
    )


class Tracker:
    """Stateful tracker for one sensing stream; not shared between threads."""

    def __init__(self, cfg: TrackerConfig):
        self.cfg = cfg
        self.tracks: List[TrackState] = []
        self._next_id = 0

    def step(self, detections: Sequence[Measurement]) -> List[TrackState]:
        """Advance one frame: predict, associate, update, spawn and drop tracks."""
        predicted = [kf_predict(track, self.cfg) for track in self.tracks]
        assignment = associate(predicted, detections, self.cfg)

        survivors: List[TrackState] = []
        for t, k in assignment.matches:
            detection = detections[k]
            try:
                updated = kf_update(
                    predicted[t], (detection.range_m, detection.velocity_mps), self.cfg
                )
            except errors.SingularInnovationError as e:
                logger.warning("%s Keeping the predicted state.", e)
                updated = predicted[t]
            survivors.append(
                dataclasses.replace(
                    updated, age=updated.age + 1, misses=0, power=detection.power
                )
            )
        for t in assignment.unmatched_tracks:
            track = predicted[t]
            if track.misses + 1 >= self.cfg.max_misses:
                logger.info("Dropping track %s after %s missed frames.", track.id, track.misses + 1)
                continue
            survivors.append(dataclasses.replace(track, age=track.age + 1, misses=track.misses + 1))
        for k in assignment.unmatched_detections:
            survivors.append(spawn_track(self._next_id, detections[k], self.cfg))
            logger.info("Spawned track %s at %.3f m.", self._next_id, detections[k].range_m)
            self._next_id += 1

        self.tracks = sorted(survivors, key=lambda track: track.id)
        return list(self.tracks)

    def strongest(self) -> Optional[TrackState]:
        """The live track whose last associated detection was the most powerful."""
        return max(self.tracks, key=lambda track: track.power, default=None)
