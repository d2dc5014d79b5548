"""The subcommands: simulate, calibrate, process, track, predict-range and resolutions."""

import functools
import io
import itertools
import logging
import pathlib
import re
from typing import Dict, List, Optional, Sequence

import numpy as np
import pydantic

from cli import scenario as scenario_module
from common import errors
from sensing import budget, spu, track
from storage import formats
from worker import pool, tasks

logger = logging.getLogger(__name__)

_REFERENCE_FILE = re.compile(r"frame_(\d+)_ref\.grid$")


def _output_dir(config: scenario_module.ScenarioConfig, out: Optional[str]) -> pathlib.Path:
    return pathlib.Path(out if out is not None else config.run.output_dir)


def cmd_simulate(
    config: scenario_module.ScenarioConfig, out: Optional[str] = None, seed: Optional[int] = None
) -> List[pathlib.Path]:
    """Write n_frames (reference, reflected) grid pairs; frame k is seeded with seed XOR k."""
    out_dir = _output_dir(config, out)
    seed = config.run.seed if seed is None else seed
    job = functools.partial(
        tasks.simulate_frame,
        config=config.frame,
        sim_scene=config.scene.to_scene(),
        seed=seed,
        out_dir=out_dir,
    )
    pairs = pool.run_parallel(job, range(config.run.n_frames))
    logger.info("Simulated %s frames into %s.", len(pairs), out_dir)
    return [path for pair in pairs for path in pair]


def cmd_calibrate(
    config: scenario_module.ScenarioConfig, out: Optional[str] = None, seed: Optional[int] = None
) -> pathlib.Path:
    """Average calibration captures of the clutter-only scene into a clutter reference file."""
    out_dir = _output_dir(config, out)
    seed = config.run.seed if seed is None else seed
    sim_scene = config.scene.to_scene()
    if sim_scene.targets:
        logger.warning("Calibration ignores the %s moving targets.", len(sim_scene.targets))
    job = functools.partial(
        tasks.calibration_channel, config=config.frame, sim_scene=sim_scene, seed=seed
    )
    channels = pool.run_parallel(job, range(config.run.calibration_frames))
    reference = spu.capture_clutter_reference(channels)
    path = out_dir / tasks.CLUTTER_REFERENCE_NAME
    formats.write_grid(path, reference, 0, formats.GridKind.CLUTTER_REFERENCE)
    logger.info("Wrote clutter reference from %s captures to %s.", len(channels), path)
    return path


def discover_frames(frames_dir: pathlib.Path) -> List[int]:
    """Frame indices that have a reference grid file in ``frames_dir``."""
    if not frames_dir.is_dir():
        raise errors.FileFormatError(frames_dir, "frames directory not found")
    indices = []
    for path in frames_dir.iterdir():
        match = _REFERENCE_FILE.match(path.name)
        if match:
            indices.append(int(match.group(1)))
    if not indices:
        raise errors.FileFormatError(frames_dir, "no frame_*_ref.grid files")
    return sorted(indices)


def _exit_code(error: Exception) -> int:
    if isinstance(error, pydantic.ValidationError):
        return errors.InvalidInputError.exit_code
    return getattr(error, "exit_code", errors.FileFormatError.exit_code)


def _guarded(job, frame_index: int):
    try:
        return job(frame_index)
    except (errors.SpuError, OSError, ValueError) as e:
        logger.error("frame %s failed: %s", frame_index, e)
        return e


def cmd_process(  # pylint: disable=too-many-arguments,too-many-positional-arguments
    config: scenario_module.ScenarioConfig,
    frames: Optional[str] = None,
    out: Optional[str] = None,
    clutter_ref: Optional[str] = None,
    threshold_db: Optional[float] = None,
    write_csv: bool = False,
) -> int:
    """Run the SPU chain over every frame pair; returns the exit status.

    Frames that fail are logged and skipped; the detections of the others are
    still written and the status is the first failure's exit code.
    """
    out_dir = _output_dir(config, out)
    frames_dir = pathlib.Path(frames) if frames is not None else out_dir
    processing = config.processing
    if threshold_db is not None:
        processing = processing.model_copy(update={"threshold_db": threshold_db})

    clutter_reference = None
    if clutter_ref is not None:
        record = formats.read_grid(clutter_ref)
        if record.kind != formats.GridKind.CLUTTER_REFERENCE:
            raise errors.FileFormatError(
                clutter_ref, f"not a clutter reference ({record.kind.name})"
            )
        clutter_reference = record.to_channel()
        if clutter_reference.shape != config.frame.shape:
            raise errors.DimensionMismatchError(
                "clutter reference", config.frame.shape, clutter_reference.shape
            )

    job = functools.partial(
        tasks.process_frame,
        frames_dir=frames_dir,
        config=config.frame,
        processing=processing,
        clutter_reference=clutter_reference,
        out_dir=out_dir,
        write_csv=write_csv,
    )
    indices = discover_frames(frames_dir)
    results = pool.run_parallel(functools.partial(_guarded, job), indices)

    records: List[formats.DetectionRecord] = []
    status = 0
    for result in results:
        if isinstance(result, Exception):
            status = status or _exit_code(result)
        else:
            records.extend(result)
    formats.write_jsonl(out_dir / tasks.DETECTIONS_NAME, records)
    logger.info("Processed %s frames, %s detections.", len(indices), len(records))
    return status


def run_tracker(
    records: Sequence[formats.DetectionRecord],
    cfg: track.TrackerConfig,
    strongest_only: bool = False,
) -> List[formats.TrackRecord]:
    """Track a frame-sorted detection stream; frames without detections still age tracks."""
    if not records:
        return []
    by_frame: Dict[int, List[formats.DetectionRecord]] = {
        frame_index: list(group)
        for frame_index, group in itertools.groupby(records, key=lambda r: r.frame)
    }
    tracker = track.Tracker(cfg)
    output: List[formats.TrackRecord] = []
    for frame_index in range(records[0].frame, records[-1].frame + 1):
        states = tracker.step(by_frame.get(frame_index, []))
        if strongest_only:
            strongest = tracker.strongest()
            states = [strongest] if strongest is not None else []
        output.extend(formats.TrackRecord.from_track(frame_index, s) for s in states)
    return output


def cmd_track(
    config: scenario_module.ScenarioConfig,
    detections: Optional[str] = None,
    out: Optional[str] = None,
    strongest_only: bool = False,
) -> pathlib.Path:
    """Turn a detections JSON-lines file into a track log."""
    out_dir = _output_dir(config, out)
    source = pathlib.Path(detections) if detections is not None else out_dir / tasks.DETECTIONS_NAME
    records = formats.read_jsonl(source, formats.DetectionRecord)
    for line, (previous, current) in enumerate(itertools.pairwise(records), start=2):
        if current.frame < previous.frame:
            raise errors.FileFormatError(source, "detections are not sorted by frame", line=line)
    path = out_dir / tasks.TRACKS_NAME
    formats.write_jsonl(path, run_tracker(records, config.tracker, strongest_only))
    logger.info("Wrote track log %s.", path)
    return path


def cmd_predict_range(
    link_budget: budget.LinkBudget,
    ranges: Optional[Sequence[float]] = None,
    fmt: str = "text",
) -> str:
    """Report the achievable range and an SNR-versus-range table."""
    r_max = budget.max_range(link_budget)
    if ranges is None:
        ranges = np.linspace(link_budget.r_ref, 2 * max(r_max, link_budget.r_ref), 10).tolist()
    sweep = budget.range_sweep(link_budget, ranges)
    buffer = io.StringIO()
    if fmt == "csv":
        buffer.write(f"# max_range_m,{r_max!r}\n")
        buffer.write("range_m,snr_linear,snr_db\n")
        for point in sweep:
            buffer.write(f"{point.range_m!r},{point.snr!r},{point.snr_db!r}\n")
    else:
        buffer.write(f"achievable range r* = {r_max:.2f} m\n")
        buffer.write(f"{'range [m]':>12} {'SNR [dB]':>10}\n")
        for point in sweep:
            buffer.write(f"{point.range_m:12.2f} {point.snr_db:10.2f}\n")
    return buffer.getvalue()


def cmd_resolutions(config: scenario_module.ScenarioConfig) -> str:
    """Report the frame's bin widths and unambiguous intervals."""
    result = budget.resolutions(config.frame)
    return (
        f"range resolution      {result.range_res:.4f} m\n"
        f"velocity resolution   {result.velocity_res:.4f} m/s\n"
        f"unambiguous range     {result.unambiguous_range:.2f} m\n"
        f"unambiguous velocity  +/-{result.unambiguous_velocity:.2f} m/s\n"
    )
