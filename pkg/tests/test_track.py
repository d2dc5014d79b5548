# pylint: disable=redefined-outer-name

"""Test the Kalman filter, the association step and the stream tracker."""

import dataclasses
import logging

import numpy as np
import pydantic
import pytest

from common import errors
from sensing import track


@dataclasses.dataclass
class FakeDetection:
    """The minimal measurement the tracker consumes."""

    range_m: float
    velocity_mps: float
    power: float = 1.0


@pytest.fixture
def cfg() -> track.TrackerConfig:
    """Default tracker parameters."""
    return track.TrackerConfig()


def _track(x=(3.0, 1.0), covariance=np.eye(2), **kwargs) -> track.TrackState:
    return track.TrackState(id=0, x=np.array(x), P=covariance, **kwargs)


class TestTrackerConfig:
    """Test tracker parameter validation and the model matrices."""

    def test_defaults(self, cfg: track.TrackerConfig):
        """Test the documented defaults."""
        assert cfg.dt == 0.01
        assert cfg.process_noise == 1.0
        assert np.allclose(cfg.R, np.diag([0.05**2, 0.1**2]))
        assert cfg.gate == 9.21
        assert cfg.max_misses == 10

    def test_process_covariance(self, cfg: track.TrackerConfig):
        """Test Q for q = 1 and dt = 10 ms."""
        expected = np.array([[2.5e-9, 5e-7], [5e-7, 1e-4]])
        assert np.allclose(cfg.process_covariance(), expected, rtol=1e-12, atol=0)

    @pytest.mark.parametrize(
        "meas_noise", [((1.0, 0.0), (0.0, 0.0)), ((1.0, 0.5), (0.2, 1.0)), ((1.0, 2.0), (2.0, 1.0))]
    )
    def test_measurement_noise_must_be_positive_definite(self, meas_noise):
        """Test singular, asymmetric or indefinite R is rejected."""
        with pytest.raises(pydantic.ValidationError, match="meas_noise"):
            track.TrackerConfig(meas_noise=meas_noise)

    @pytest.mark.parametrize("field,value", [("dt", 0.0), ("process_noise", -1.0), ("gate", 0.0)])
    def test_invalid_scalars(self, field: str, value: float):
        """Test dt > 0, q >= 0 and gate > 0."""
        with pytest.raises(pydantic.ValidationError):
            track.TrackerConfig(**{field: value})


class TestKalmanFilter:
    """Test the predict and update steps."""

    def test_predict_kinematics(self):
        """Test a constant-velocity step without process noise."""
        cfg = track.TrackerConfig(process_noise=0.0)
        predicted = track.kf_predict(_track(), cfg)
        assert predicted.x == pytest.approx([3.01, 1.0])
        transition = cfg.transition()
        assert np.allclose(predicted.P, transition @ np.eye(2) @ transition.T)

    def test_predict_zero_interval(self, cfg: track.TrackerConfig):
        """Test dt = 0 leaves state and covariance untouched."""
        state = _track(covariance=np.array([[2.0, 0.3], [0.3, 1.0]]))
        predicted = track.kf_predict(state, cfg, dt=0.0)
        assert np.array_equal(predicted.x, state.x)
        assert np.array_equal(predicted.P, state.P)

    def test_update_ignores_noisy_measurement(self):
        """Test a huge R barely moves the state."""
        cfg = track.TrackerConfig(meas_noise=((1e12, 0.0), (0.0, 1e12)))
        z = np.array([10.0, -4.0])
        updated = track.kf_update(_track(), z, cfg)
        innovation = np.linalg.norm(z - np.array([3.0, 1.0]))
        assert np.linalg.norm(updated.x - np.array([3.0, 1.0])) < 1e-6 * innovation

    def test_update_trusts_measurement(self):
        """Test a vague prior jumps to the measurement."""
        cfg = track.TrackerConfig(meas_noise=((1.0, 0.0), (0.0, 1.0)))
        z = np.array([10.0, -4.0])
        updated = track.kf_update(_track(covariance=1e8 * np.eye(2)), z, cfg)
        assert np.linalg.norm(updated.x - z) < 1e-6 * np.linalg.norm(z)

    def test_update_symmetrises(self, cfg: track.TrackerConfig):
        """Test the posterior covariance is symmetric and shrinks."""
        state = _track(covariance=np.array([[0.04, 0.01], [0.01, 0.09]]))
        updated = track.kf_update(state, (3.1, 0.9), cfg)
        assert np.array_equal(updated.P, updated.P.T)
        assert np.trace(updated.P) < np.trace(state.P)

    def test_singular_innovation(self):
        """Test an ill-conditioned S rejects the update."""
        cfg = track.TrackerConfig(meas_noise=((1e-9, 0.0), (0.0, 1e-9)))
        state = _track(covariance=np.diag([1e6, 1e-9]))
        with pytest.raises(errors.SingularInnovationError):
            track.kf_update(state, (3.0, 1.0), cfg)

    def test_noiseless_convergence(self):
        """Test exact measurements of a constant-velocity target pin down the state."""
        cfg = track.TrackerConfig(process_noise=0.0, meas_noise=((1e-10, 0.0), (0.0, 1e-10)))
        state = _track(x=(0.0, 0.0))
        for k in range(1, 11):
            truth = np.array([3.0 + k * cfg.dt, 1.0])
            state = track.kf_update(track.kf_predict(state, cfg), truth, cfg)
        assert np.abs(state.x - truth).max() < 1e-9

    def test_error_does_not_grow_on_update(self):
        """Test with q = 0 and exact measurements each update reduces the error."""
        cfg = track.TrackerConfig(process_noise=0.0)
        state = _track(x=(2.6, 1.4), covariance=10 * cfg.R)
        for k in range(1, 21):
            truth = np.array([3.0 + k * cfg.dt, 1.0])
            predicted = track.kf_predict(state, cfg)
            state = track.kf_update(predicted, truth, cfg)
            assert np.linalg.norm(state.x - truth) <= np.linalg.norm(predicted.x - truth)

    def test_covariance_stays_positive_definite(self, cfg: track.TrackerConfig):
        """Test P stays symmetric positive definite over many random cycles."""
        rng = np.random.default_rng(0)
        state = _track(covariance=10 * cfg.R)
        for _ in range(10_000):
            state = track.kf_predict(state, cfg, dt=float(rng.uniform(0.001, 0.05)))
            z = state.x + rng.normal(scale=[0.05, 0.1])
            state = track.kf_update(state, z, cfg)
            assert np.abs(state.P - state.P.T).max() <= 1e-12
            assert np.linalg.eigvalsh(state.P).min() > 0

    def test_normalised_innovation_squared(self):
        """Test the NIS of a consistent filter averages about 2."""
        cfg = track.TrackerConfig(process_noise=0.0)
        rng = np.random.default_rng(5)
        noise = np.linalg.cholesky(cfg.R)
        truth = np.array([3.0, 1.0])
        state = track.spawn_track(0, FakeDetection(*(truth + noise @ rng.standard_normal(2))), cfg)
        distances = []
        for _ in range(500):
            truth = cfg.transition() @ truth
            z = truth + noise @ rng.standard_normal(2)
            predicted = track.kf_predict(state, cfg)
            distances.append(track.innovation_distance(predicted, z, cfg))
            state = track.kf_update(predicted, z, cfg)
        assert 1.0 <= np.mean(distances) <= 3.5


class TestAssociate:
    """Test greedy nearest-neighbour association."""

    def test_no_tracks(self, cfg: track.TrackerConfig):
        """Test every detection is unmatched without tracks."""
        detections = [FakeDetection(3.0, 1.0), FakeDetection(7.0, 0.0)]
        assignment = track.associate([], detections, cfg)
        assert assignment.matches == []
        assert assignment.unmatched_detections == [0, 1]

    def test_gating(self, cfg: track.TrackerConfig):
        """Test the near detection associates and the far one does not."""
        state = track.spawn_track(0, FakeDetection(3.0, 1.0), cfg)
        near, far = FakeDetection(3.01, 1.0), FakeDetection(20.0, -2.0)
        assert track.innovation_distance(state, (3.01, 1.0), cfg) < 9
        assert track.innovation_distance(state, (20.0, -2.0), cfg) > 9
        assignment = track.associate([state], [far, near], cfg)
        assert assignment.matches == [(0, 1)]
        assert assignment.unmatched_detections == [0]
        assert assignment.unmatched_tracks == []

    def test_power_order(self, cfg: track.TrackerConfig):
        """Test the strongest detection picks first even when it is farther."""
        state = track.spawn_track(0, FakeDetection(3.0, 1.0), cfg)
        close = FakeDetection(3.0, 1.0, power=1.0)
        strong = FakeDetection(3.05, 1.1, power=100.0)
        assignment = track.associate([state], [close, strong], cfg)
        assert assignment.matches == [(0, 1)]
        assert assignment.unmatched_detections == [0]

    def test_one_detection_per_track(self, cfg: track.TrackerConfig):
        """Test no track is assigned twice in one frame."""
        rng = np.random.default_rng(2)
        for _ in range(50):
            tracks = [
                track.spawn_track(i, FakeDetection(*rng.uniform([0, -2], [5, 2])), cfg)
                for i in range(4)
            ]
            detections = [
                FakeDetection(*rng.uniform([0, -2], [5, 2]), power=float(rng.uniform(1, 10)))
                for _ in range(6)
            ]
            assignment = track.associate(tracks, detections, cfg)
            matched_tracks = [t for t, _ in assignment.matches]
            assert len(matched_tracks) == len(set(matched_tracks))
            matched = sorted(k for _, k in assignment.matches)
            assert sorted(matched + assignment.unmatched_detections) == list(range(6))


class TestTracker:
    """Test the stream tracker."""

    def test_spawns_one_track_per_detection(self, cfg: track.TrackerConfig):
        """Test k detections on an empty tracker start k tracks."""
        tracker = track.Tracker(cfg)
        states = tracker.step([FakeDetection(3.0, 1.0), FakeDetection(8.0, -1.0)])
        assert [s.id for s in states] == [0, 1]
        assert np.allclose(states[1].x, [8.0, -1.0])
        assert np.allclose(states[0].P, 10 * cfg.R)
        assert all(s.age == 1 and s.misses == 0 for s in states)

    def test_associates_and_spawns(self, cfg: track.TrackerConfig):
        """Test a near detection updates the track and a far one spawns another."""
        tracker = track.Tracker(cfg)
        tracker.step([FakeDetection(3.0, 1.0)])
        states = tracker.step([FakeDetection(3.01, 1.0), FakeDetection(20.0, -2.0)])
        assert [s.id for s in states] == [0, 1]
        assert states[0].age == 2
        assert states[0].range_m == pytest.approx(3.01, abs=0.01)
        assert states[1].range_m == 20.0

    def test_noiseless_stream(self):
        """Test a clean constant-velocity stream keeps one track on the truth."""
        cfg = track.TrackerConfig(process_noise=0.0)
        tracker = track.Tracker(cfg)
        for k in range(10):
            states = tracker.step([FakeDetection(3.0 + k * cfg.dt, 1.0)])
        (state,) = states
        assert state.id == 0
        assert state.range_m == pytest.approx(3.0 + 9 * cfg.dt, abs=1e-6)
        assert state.speed_mps == pytest.approx(1.0, abs=1e-6)

    def test_drop_after_max_misses(self, cfg: track.TrackerConfig):
        """Test a track survives max_misses - 1 empty frames and is dropped at max_misses."""
        tracker = track.Tracker(cfg)
        tracker.step([FakeDetection(3.0, 1.0)])
        for misses in range(1, cfg.max_misses):
            (state,) = tracker.step([])
            assert state.misses == misses
        assert tracker.step([]) == []

    def test_gap_keeps_identity(self):
        """Test a five-frame gap shorter than max_misses keeps the same id."""
        cfg = track.TrackerConfig(process_noise=0.0)
        tracker = track.Tracker(cfg)
        for k in range(12):
            detections = [] if 3 <= k < 8 else [FakeDetection(3.0 + k * cfg.dt, 1.0)]
            states = tracker.step(detections)
        assert [s.id for s in states] == [0]
        assert states[0].misses == 0

    def test_rejected_update_keeps_prediction(
        self, cfg: track.TrackerConfig, mocker, caplog: pytest.LogCaptureFixture
    ):
        """Test a singular update falls back to the predicted state."""
        tracker = track.Tracker(cfg)
        tracker.step([FakeDetection(3.0, 1.0)])
        mocker.patch.object(
            track, "kf_update", side_effect=errors.SingularInnovationError("too large")
        )
        with caplog.at_level(logging.WARNING, logger="sensing.track"):
            (state,) = tracker.step([FakeDetection(3.01, 1.0)])
        assert state.range_m == pytest.approx(3.01)
        assert state.misses == 0
        assert "Keeping the predicted state" in caplog.text

    def test_strongest(self, cfg: track.TrackerConfig):
        """Test the strongest track follows the last associated power."""
        tracker = track.Tracker(cfg)
        assert tracker.strongest() is None
        tracker.step([FakeDetection(3.0, 1.0, power=5.0), FakeDetection(9.0, 0.0, power=50.0)])
        strongest = tracker.strongest()
        assert strongest is not None
        assert strongest.id == 1
