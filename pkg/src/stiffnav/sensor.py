"""Force/torque sensor model: additive Gaussian noise plus a moving-average filter."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .env import Scene, reaction_wrench
from .screw import InvalidInputError, Pose, Wrench


@dataclass
class SensorModel:
    noise_std: np.ndarray = field(default_factory=lambda: np.zeros(6))
    filter_window: int = 200
    rng_seed: int = 0

    def __post_init__(self):
        self.noise_std = np.broadcast_to(np.asarray(self.noise_std, dtype=float), (6,)).copy()
        if int(self.filter_window) < 1:
            raise InvalidInputError("filter_window must be >= 1")
        self.filter_window = int(self.filter_window)
        self.reset()

    def reset(self):
        self._rng = np.random.default_rng(self.rng_seed)
        self._buf = np.zeros((0, 6))

    @property
    def noiseless(self):
        return not np.any(self.noise_std)

    def feed(self, raw, n=1) -> np.ndarray:
        """Push ``n`` samples of the constant signal ``raw``; return the filtered output."""
        raw = raw.as_array() if isinstance(raw, Wrench) else np.asarray(raw, dtype=float)
        samples = np.repeat(raw[None, :], n, axis=0)
        if not self.noiseless:
            samples = samples + self._rng.normal(size=(n, 6)) * self.noise_std
        self._buf = np.concatenate([self._buf, samples])[-self.filter_window:]
        return self._buf.mean(axis=0)

    def push(self, raw) -> np.ndarray:
        return self.feed(raw, 1)


def sense(model: SensorModel, raw_stream) -> Wrench:
    """Run a stream of raw wrenches through the sensor; return the last filtered value."""
    out = None
    for raw in raw_stream:
        out = model.push(raw)
    if out is None:
        out = model._buf.mean(axis=0) if len(model._buf) else np.zeros(6)
    return Wrench.from_array(out)


class SensedChannel:
    """What the robot observes: filtered wrench readings at commanded poses.

    Each reading holds the pose for ``settle`` sensor samples (one full
    filter window by default) so the filter output reflects that pose only.
    """

    def __init__(self, scene: Scene, sensor: SensorModel | None = None, settle: int | None = None):
        self.scene = scene
        self.sensor = sensor or SensorModel()
        self.settle = settle or self.sensor.filter_window
        self.readings = 0

    def __call__(self, z: Pose) -> np.ndarray:
        raw = reaction_wrench(self.scene, z).as_array()
        self.readings += 1
        if self.sensor.noiseless:
            return raw
        return self.sensor.feed(raw, self.settle)

    @property
    def noise_floor(self) -> float:
        """Std of one filtered reading, largest axis."""
        return float(self.sensor.noise_std.max() / np.sqrt(min(self.settle, self.sensor.filter_window)))
