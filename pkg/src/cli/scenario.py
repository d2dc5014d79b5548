"""Scenario files: the YAML description of one simulate -> process -> track run.

A minimal scenario only names what differs from the defaults::

    scene:
      targets:
        - {range_m: 3, velocity_mps: 1, amplitude_db: -30}
"""

import logging
import os
import pathlib
from typing import Any, List, Optional, Union

import pydantic
import yaml

from common import errors
from radio import frame as radio_frame
from radio import scene as radio_scene
from sensing import spu, track
from storage import formats

logger = logging.getLogger(__name__)


class TargetSpec(pydantic.BaseModel):
    """A moving point target, amplitude as 20 log10 |a|."""

    model_config = pydantic.ConfigDict(extra="forbid")

    range_m: float = pydantic.Field(gt=0)
    velocity_mps: float = 0.0
    amplitude_db: float = 0.0
    phase_rad: float = 0.0

    def to_target(self) -> radio_scene.PointTarget:  # noqa: D102
        return radio_scene.PointTarget.from_db(
            self.range_m, self.velocity_mps, self.amplitude_db, self.phase_rad
        )


class ClutterSpec(pydantic.BaseModel):
    """A static reflector; clutter has no velocity key."""

    model_config = pydantic.ConfigDict(extra="forbid")

    range_m: float = pydantic.Field(gt=0)
    amplitude_db: float = 0.0
    phase_rad: float = 0.0

    def to_target(self) -> radio_scene.PointTarget:  # noqa: D102
        return radio_scene.PointTarget.from_db(
            self.range_m, 0.0, self.amplitude_db, self.phase_rad
        )


class SceneSpec(pydantic.BaseModel):
    """The ``scene`` section. ``noise_power_db: null`` means noiseless."""

    model_config = pydantic.ConfigDict(extra="forbid")

    targets: List[TargetSpec] = []
    clutter: List[ClutterSpec] = []
    noise_power_db: Optional[float] = None
    sync_jitter_std: float = pydantic.Field(default=0.0, ge=0)

    def to_scene(self) -> radio_scene.Scene:
        """Convert the dB-based description into a linear Scene."""
        return radio_scene.Scene(
            targets=[t.to_target() for t in self.targets],
            clutter=[c.to_target() for c in self.clutter],
            noise_power=0.0 if self.noise_power_db is None else 10 ** (self.noise_power_db / 10),
            sync_jitter_std=self.sync_jitter_std,
        )


class RunConfig(pydantic.BaseModel):
    """The ``run`` section."""

    model_config = pydantic.ConfigDict(extra="forbid")

    n_frames: int = pydantic.Field(default=1, ge=0)
    seed: int = pydantic.Field(default=0, ge=0)
    output_dir: str = "output"
    calibration_frames: int = pydantic.Field(default=1, ge=1)


class ScenarioConfig(pydantic.BaseModel):
    """A complete run description; every section falls back to its defaults."""

    model_config = pydantic.ConfigDict(extra="forbid")

    frame: radio_frame.FrameConfig = radio_frame.default_config()
    scene: SceneSpec = SceneSpec()
    processing: spu.ProcessingConfig = spu.ProcessingConfig()
    tracker: track.TrackerConfig = track.TrackerConfig()
    run: RunConfig = RunConfig()

    @pydantic.model_validator(mode="after")
    def _unambiguous(self) -> "ScenarioConfig":
        self.scene.to_scene().check_unambiguous(self.frame)
        return self


def parse_config(raw: Any, source: Union[str, os.PathLike] = "<scenario>") -> ScenarioConfig:
    """Validate an already-parsed mapping."""
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise errors.ScenarioError(f"{source}: the top level must be a mapping of sections")
    try:
        return ScenarioConfig.model_validate(raw)
    except pydantic.ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first["loc"])
        where = field or "scenario"
        raise errors.ScenarioError(f"{source}: invalid {where}: {first['msg']}", field=field) from e


def load_config(path: Union[str, os.PathLike]) -> ScenarioConfig:
    """Read, parse and validate a scenario file."""
    path = pathlib.Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as e:
        raise errors.FileFormatError(path, "scenario file not found") from e
    try:
        raw = yaml.safe_load(text)
    except yaml.MarkedYAMLError as e:
        line = e.problem_mark.line + 1 if e.problem_mark is not None else None
        raise errors.ScenarioError(f"{path}: {e.problem}", line=line) from e
    except yaml.YAMLError as e:
        raise errors.ScenarioError(f"{path}: {e}") from e
    config = parse_config(raw, source=path)
    logger.info("Loaded scenario %s (%s frames).", path, config.run.n_frames)
    return config


def dump_config(config: ScenarioConfig) -> str:
    """Render a scenario as YAML with every default spelled out."""
    return yaml.safe_dump(config.model_dump(mode="json"), sort_keys=False)


def save_config(config: ScenarioConfig, path: Union[str, os.PathLike]) -> None:
    """Write a scenario file atomically."""
    formats.atomic_write(path, dump_config(config).encode("utf-8"))
