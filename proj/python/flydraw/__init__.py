"""Learned reference pre-block for a simulated quadrotor."""

import json

from ._core import (
    TRAJECTORY_RATE,
    ConfigError,
    DesiredTrajectory,
    Error,
    FormatError,
    InvalidInput,
    NotFound,
    PipelineFailure,
    ReferenceGenerator,
    ShapeError,
    SimulationDiverged,
    TrainingDiverged,
    VehicleState,
    _Service,
    bundled_path,
    bundled_path_names,
    default_config,
    feature_length,
    fly,
    improvement,
    normalize_config,
    preset_names,
    process_drawn_path,
    rescale_speed,
    train_generator,
    training_sweep,
)


class Service:
    """The HTTP service's operations in process, with dicts in and out."""

    def __init__(self, config=None, store=""):
        text = json.dumps(config) if isinstance(config, dict) else (config or "")
        self._svc = _Service(text, store)

    def submit_path(self, points, speed_factor=1.0, config="future-feedback"):
        body = {"points": [list(map(float, p)) for p in points], "speed_factor": speed_factor, "config": config}
        return json.loads(self._svc.submit_path(json.dumps(body)))

    def simulate(self, session, configs=("baseline",), seed=0, pulse=False, models=None):
        body = {"configs": list(configs), "seed": seed, "pulse": pulse, "models": models or {}}
        return json.loads(self._svc.simulate(session, json.dumps(body)))

    def train(self, **request):
        return json.loads(self._svc.train(json.dumps(request)))

    def models(self):
        return json.loads(self._svc.list_models())["models"]

    def session(self, session):
        return json.loads(self._svc.get_session(session))

    def add_model(self, generator, info=None):
        return self._svc.add_model(generator, json.dumps(info or {}))
