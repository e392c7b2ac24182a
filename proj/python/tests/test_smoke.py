import json

import numpy as np
import pytest

import flydraw


def test_improvement_oracle():
    assert flydraw.improvement(0.144, 0.360) == pytest.approx(60.0, abs=0.2)
    assert flydraw.improvement(0.232, 0.360) == pytest.approx(35.6, abs=0.1)
    with pytest.raises(flydraw.InvalidInput):
        flydraw.improvement(0.1, 0.0)


def test_feature_lengths():
    assert flydraw.feature_length("future-feedback") == 36
    assert flydraw.feature_length("no-future") == 23
    assert set(flydraw.preset_names()) >= {"baseline", "no-future", "future-no-feedback", "future-feedback"}
    with pytest.raises(flydraw.ConfigError):
        flydraw.feature_length("baseline")


def test_drawn_path_respects_bounds():
    for name in flydraw.bundled_path_names():
        traj = flydraw.process_drawn_path(flydraw.bundled_path(name))
        assert traj.max_speed() <= 0.6 + 1e-9
        assert traj.max_accel() <= 2.05
        assert traj.positions.shape == (len(traj), 3)
        assert np.all(traj.positions[:, 1] == 0.0)
    with pytest.raises(flydraw.InvalidInput):
        flydraw.process_drawn_path(np.array([[0.0, 1.0], [0.001, 1.0]]))


def test_trajectory_text_round_trip():
    traj = flydraw.process_drawn_path(flydraw.bundled_path("circle"))
    back = flydraw.DesiredTrajectory.from_text(traj.to_text())
    assert np.array_equal(back.positions, traj.positions)
    assert back[3] == traj[3]


def test_zero_generator_matches_baseline_flight():
    traj = flydraw.process_drawn_path(flydraw.bundled_path("letter-s"))
    base = flydraw.fly(traj, seed=3, pulse=True)
    zero = flydraw.fly(traj, flydraw.ReferenceGenerator.zero("future-feedback"), seed=3, pulse=True)
    assert base["complete"] and zero["complete"]
    assert np.array_equal(base["actual"], zero["actual"])
    assert base["rms_error"] == zero["rms_error"] > 0.0
    assert zero["generator"] == "future-feedback"


def test_generator_bundle_round_trip(tmp_path):
    gen = flydraw.ReferenceGenerator.zero("no-future")
    gen.save(str(tmp_path / "b"))
    back = flydraw.ReferenceGenerator.load(str(tmp_path / "b"))
    assert back.digest() == gen.digest()
    assert back.deltas == [0] and back.use_feedback


def test_service_round_trip():
    svc = flydraw.Service()
    s = svc.submit_path(flydraw.bundled_path("triangle"))
    assert s["session"] == "s1"
    assert s["summary"]["within_bounds"]
    svc.add_model(flydraw.ReferenceGenerator.zero("future-feedback"))
    r = svc.simulate("s1", configs=["baseline", "future-feedback"], pulse=True)
    assert [x["config"] for x in r["reports"]] == ["baseline", "future-feedback"]
    assert r["improvement"]["future-feedback"] == 0.0
    assert svc.session("s1")["results"][0] == r
    assert svc.models()[0]["features"]["feature_length"] == 36
    with pytest.raises(flydraw.NotFound):
        svc.session("s2")


def test_small_training_run():
    cfg = json.loads(flydraw.default_config())
    cfg["sweep"]["duration"] = 60.0
    cfg["collect"]["flights"] = 1
    cfg["collect"]["holdout"] = None
    cfg["train"]["iterations"] = 30
    gen = flydraw.train_generator("no-future", json.dumps(cfg))
    assert gen.feature_length == 23
    assert gen.digest() == flydraw.train_generator("no-future", json.dumps(cfg)).digest()
    with pytest.raises(flydraw.ConfigError):
        flydraw.normalize_config('{"plant": {"weight": 1}}')
