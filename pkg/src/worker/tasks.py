"""The per-frame jobs run by the CLI subcommands, one call per radio frame."""

import dataclasses
import logging
import pathlib
from typing import List, Optional

import numpy as np

from common import errors
from radio import frame, grids, scene
from sensing import spu
from storage import formats

logger = logging.getLogger(__name__)

REFERENCE_SUFFIX = "ref"
REFLECTED_SUFFIX = "refl"
CLUTTER_REFERENCE_NAME = "clutter_ref.grid"
DETECTIONS_NAME = "detections.jsonl"
TRACKS_NAME = "tracks.jsonl"
CALIBRATION_STREAM = 1


@dataclasses.dataclass(frozen=True)
class FrameSeeds:
    """Independent RNG seeds for the three random draws of one frame."""

    reference: int
    jitter: int
    noise: int


def frame_seeds(seed: int, frame_index: int, stream: int = 0) -> FrameSeeds:
    """Expand the frame seed ``seed XOR frame_index`` into three seeds.

    Calibration captures use ``CALIBRATION_STREAM``; frames use stream 0.
    """
    sequence = np.random.SeedSequence(seed ^ frame_index, spawn_key=(stream,) if stream else ())
    reference, jitter, noise = sequence.generate_state(3)
    return FrameSeeds(reference=int(reference), jitter=int(jitter), noise=int(noise))


def grid_path(directory: pathlib.Path, frame_index: int, suffix: str) -> pathlib.Path:
    """frame_00007_ref.grid and friends."""
    return directory / f"frame_{frame_index:05d}_{suffix}.grid"


def periodogram_path(directory: pathlib.Path, frame_index: int, extension: str = "pgrm"):
    """frame_00007.pgrm, or .csv for the plotting export."""
    return directory / f"frame_{frame_index:05d}.{extension}"


def simulate_grids(
    config: frame.FrameConfig,
    sim_scene: scene.Scene,
    frame_index: int,
    seed: int,
    stream: int = 0,
) -> tuple[grids.ResourceGrid, grids.ResourceGrid]:
    """Synthesise the (reference, reflected) pair of one frame."""
    seeds = frame_seeds(seed, frame_index, stream)
    reference = frame.generate_reference_frame(config, seeds.reference)
    channel = scene.synthesize_channel(sim_scene, config, seeds.jitter)
    reflected = scene.apply_channel(reference, channel, sim_scene.noise_power, seeds.noise)
    return reference, reflected


def simulate_frame(
    frame_index: int,
    *,
    config: frame.FrameConfig,
    sim_scene: scene.Scene,
    seed: int,
    out_dir: pathlib.Path,
) -> tuple[pathlib.Path, pathlib.Path]:
    """Write one frame's reference and reflected grid files."""
    reference, reflected = simulate_grids(config, sim_scene, frame_index, seed)
    reference_path = grid_path(out_dir, frame_index, REFERENCE_SUFFIX)
    reflected_path = grid_path(out_dir, frame_index, REFLECTED_SUFFIX)
    formats.write_grid(reference_path, reference, frame_index, formats.GridKind.REFERENCE)
    formats.write_grid(reflected_path, reflected, frame_index, formats.GridKind.REFLECTED)
    logger.info("frame %s: wrote %s and %s", frame_index, reference_path, reflected_path)
    return reference_path, reflected_path


def calibration_channel(
    frame_index: int, *, config: frame.FrameConfig, sim_scene: scene.Scene, seed: int
) -> grids.ChannelMatrix:
    """Simulate one calibration capture of the clutter-only scene and estimate its channel."""
    reference, reflected = simulate_grids(
        config, sim_scene.clutter_only(), frame_index, seed, CALIBRATION_STREAM
    )
    return spu.compute_channel(reflected, reference)


def _load_grid(path: pathlib.Path, kind: formats.GridKind, frame_index: int):
    record = formats.read_grid(path)
    if record.kind != kind:
        raise errors.FileFormatError(path, f"expected a {kind.name} grid, got {record.kind.name}")
    if record.frame_index != frame_index:
        raise errors.FileFormatError(path, f"holds frame {record.frame_index}, not {frame_index}")
    return record.to_resource_grid()


def process_frame(  # pylint: disable=too-many-arguments
    frame_index: int,
    *,
    frames_dir: pathlib.Path,
    config: frame.FrameConfig,
    processing: spu.ProcessingConfig,
    clutter_reference: Optional[grids.ChannelMatrix],
    out_dir: pathlib.Path,
    write_csv: bool = False,
) -> List[formats.DetectionRecord]:
    """Read one frame pair, run the SPU chain and write its periodogram."""
    reference_path = grid_path(frames_dir, frame_index, REFERENCE_SUFFIX)
    reflected_path = grid_path(frames_dir, frame_index, REFLECTED_SUFFIX)
    reference = _load_grid(reference_path, formats.GridKind.REFERENCE, frame_index)
    reflected = _load_grid(reflected_path, formats.GridKind.REFLECTED, frame_index)
    grids.check_same_shape(f"frame {frame_index}", config.shape, reference.shape)
    result = spu.process_frame(reflected, reference, config, processing, clutter_reference)

    formats.write_periodogram(periodogram_path(out_dir, frame_index), result.periodogram)
    if write_csv:
        csv_path = periodogram_path(out_dir, frame_index, "csv")
        formats.write_periodogram_csv(csv_path, result.periodogram)
    logger.info("frame %s: %s detections", frame_index, len(result.detections))
    return [formats.DetectionRecord.from_detection(frame_index, d) for d in result.detections]
