"""Sensor-driven potential-field planner.

The objective mixes a weighted pose-error task with an elastic-energy
penalty and a force barrier. Its gradient is taken numerically on a local
model built from the sensed wrench, the current stiffness estimate and the
integrated energy, so the robot never has to visit a pose to evaluate it.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .env import Scene, elastic_energy, spring_tensions
from .screw import Pose, Twist, quat_error
from .sensor import SensedChannel
from .stiffness import ALPHA_MIN, DecompositionError, alpha as alpha_from, characteristic_stiffness, probe_stiffness

log = logging.getLogger(__name__)


@dataclass
class PlannerConfig:
    kappa: float = 1e-6          # energy penalty gain [m^2/J]
    rho: float = 1e-4            # barrier characteristic length [m^2 N]
    w_max: float = 25.0          # force limit [N]
    dt: float = 0.4              # probe interval [s]
    step_size: float = 1e-3      # max pose change per control step [m | rad]
    gain: float = 0.5            # pose change per unit gradient
    grad_step: float = 1e-7      # central-difference step for grad J
    eps_task: float = 1e-6       # termination threshold [m^2]
    reprobe_period: int = 50
    reprobe_error: float | None = None   # default 10% of w_max
    probe_eps: float = 5e-4
    probe_repeats: int = 1
    control_dt: float = 0.01     # [s]
    max_steps: int = 10000
    alpha_min: float = ALPHA_MIN
    stall_steps: int = 20
    stall_frac: float = 1e-4
    divergence_steps: int = 25

    def __post_init__(self):
        if self.reprobe_error is None:
            self.reprobe_error = 0.1 * self.w_max
        for name in ("rho", "w_max", "dt", "step_size", "gain", "grad_step", "eps_task",
                     "reprobe_period", "reprobe_error", "probe_eps", "control_dt"):
            if not getattr(self, name) > 0:
                raise ValueError(f"PlannerConfig.{name} must be positive")
        if self.kappa < 0:
            raise ValueError("PlannerConfig.kappa must be non-negative")


@dataclass
class PlannerState:
    z: Pose
    w: np.ndarray
    K: np.ndarray
    E: float = 0.0
    alpha: float = 1.0
    step_index: int = 0


@dataclass
class StepLog:
    step: int
    time: float
    z: Pose
    w: np.ndarray
    E: float
    J: float
    task: float
    c1: float
    c2: float
    twist: np.ndarray
    region: int | None = None
    max_tension: float = float("nan")
    alpha: float = 1.0


@dataclass
class RunResult:
    state: PlannerState
    logs: list = field(default_factory=list)
    termination: str = ""
    reached: bool = False
    reprobes: int = 0
    flags: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# objective terms

def task_term(z: Pose, goal: Pose, alpha: float) -> float:
    dq = quat_error(z.q, goal.q)
    dr = goal.r - z.r
    return float(dr @ dr + alpha ** 2 * (dq[1:] @ dq[1:]))


def task_gradient(z: Pose, goal: Pose, alpha: float) -> np.ndarray:
    """Gradient of :func:`task_term` with respect to a pose perturbation."""
    dq = quat_error(z.q, goal.q)
    g_rot = -alpha ** 2 * dq[0] * (z.R @ dq[1:])
    return np.concatenate([-2.0 * (goal.r - z.r), g_rot])


def energy_penalty(E: float, kappa: float) -> float:
    return kappa * E


def weighted_wrench_norm(w, alpha: float) -> float:
    w = np.asarray(w, dtype=float)
    return math.sqrt(w[:3] @ w[:3] + alpha ** 2 * (w[3:] @ w[3:]))


def force_barrier(w, alpha: float, w_max: float, rho: float) -> float:
    """``rho / (w_max - |Gamma6 w|)``; ``inf`` once the limit is reached."""
    n = weighted_wrench_norm(w, alpha)
    if n >= w_max:
        return math.inf
    return rho / (w_max - n)


def _terms(state: PlannerState, delta, goal: Pose, cfg: PlannerConfig):
    delta = np.asarray(delta, dtype=float)
    Kd = state.K @ delta
    w_p = state.w - Kd
    E_p = state.E - state.w @ delta + 0.5 * delta @ Kd
    task = task_term(state.z.displaced(delta), goal, state.alpha)
    c1 = energy_penalty(E_p, cfg.kappa)
    c2 = force_barrier(w_p, state.alpha, cfg.w_max, cfg.rho)
    return task, c1, c2


def objective(state: PlannerState, z_probe: Pose, goal: Pose, cfg: PlannerConfig) -> float:
    """J at ``z_probe`` predicted from the local linear model around ``state``."""
    return sum(_terms(state, state.z.delta_to(z_probe), goal, cfg))


def _objective_delta(state, delta, goal, cfg):
    return sum(_terms(state, delta, goal, cfg))


def _metric(state):
    # pose coordinates [r, alpha * theta]: rotations measured in equivalent metres
    return np.array([1.0, 1.0, 1.0] + [1.0 / state.alpha] * 3)


def numeric_gradient(state: PlannerState, goal: Pose, cfg: PlannerConfig):
    """Central-difference grad J in weighted pose coordinates.

    Falls back to one-sided differences next to the barrier and returns
    ``None`` when every probe breaches it.
    """
    h = cfg.grad_step
    scale = _metric(state)
    J0 = _objective_delta(state, np.zeros(6), goal, cfg)
    g = np.zeros(6)
    blocked = 0
    for j in range(6):
        d = np.zeros(6)
        d[j] = h * scale[j]
        jp = _objective_delta(state, d, goal, cfg)
        jm = _objective_delta(state, -d, goal, cfg)
        if math.isfinite(jp) and math.isfinite(jm):
            g[j] = (jp - jm) / (2 * h)
        elif math.isfinite(jp):
            g[j] = (jp - J0) / h
        elif math.isfinite(jm):
            g[j] = (J0 - jm) / h
        else:
            blocked += 1
    return None if blocked == 6 else g


def gradient_step(state: PlannerState, goal: Pose, cfg: PlannerConfig) -> Twist:
    """Twist along -grad J, capped and backtracked so predicted J decreases."""
    return Twist.from_array(_descent_delta(state, goal, cfg)[0] / cfg.control_dt)


def _descent_delta(state, goal, cfg):
    J0 = _objective_delta(state, np.zeros(6), goal, cfg)
    g = numeric_gradient(state, goal, cfg) if math.isfinite(J0) else None
    if g is None:
        return _retreat(state, cfg), "retreat"
    if np.linalg.norm(g) < 1e-12:
        return np.zeros(6), None
    u = -cfg.gain * g
    if np.linalg.norm(u) > cfg.step_size:
        u *= cfg.step_size / np.linalg.norm(u)
    scale = _metric(state)
    for _ in range(40):
        Jd = _objective_delta(state, u * scale, goal, cfg)
        if math.isfinite(Jd) and Jd <= J0 + 1e-4 * (g @ u):
            return u * scale, None
        u = 0.5 * u
    return np.zeros(6), None


def _retreat(state, cfg):
    """Move so the predicted wrench halves (along the restoring wrench if K is singular)."""
    try:
        d = 0.5 * np.linalg.solve(state.K, state.w)
    except np.linalg.LinAlgError:
        d = state.w / max(np.linalg.norm(state.w), 1e-12) * cfg.step_size
    n = np.linalg.norm(d)
    return d if n <= cfg.step_size else d * (cfg.step_size / n)


# ---------------------------------------------------------------------------

def _alpha_of(K, cfg):
    kx, kth = characteristic_stiffness(K)
    return alpha_from(kx, kth, cfg.alpha_min)


def run(source, z0: Pose, goal: Pose, cfg: PlannerConfig | None = None, scene: Scene | None = None,
        explorer=None) -> RunResult:
    """Drive the gripper from ``z0`` towards ``goal`` using sensed data only.

    ``source`` is a :class:`Scene` (read noise-free) or any callable
    ``Pose -> wrench 6-vector``. ``scene``, when known, is used only for
    post-hoc logging of spring tensions. ``explorer`` (optional) receives
    every freshly probed stiffness and labels the log rows with its region.
    """
    cfg = cfg or PlannerConfig()
    if isinstance(source, Scene):
        scene = scene or source
        source = SensedChannel(source)

    def probe(z):
        return probe_stiffness(source, z, cfg.probe_eps, cfg.dt, cfg.probe_repeats)

    w = np.asarray(source(z0), dtype=float)
    K = probe(z0)
    state = PlannerState(z0, w, K, 0.0, _alpha_of(K, cfg), 0)
    result = RunResult(state)

    def assign(z, K):
        # the atlas is bookkeeping: a probe it cannot decompose is skipped, not fatal
        if explorer is None:
            return None
        try:
            return explorer.step(z, K)
        except DecompositionError as exc:
            result.flags.append((state.step_index, "explorer_skip"))
            log.info("step %d: %s", state.step_index, exc)
            return None

    region = assign(z0, K)

    def record(twist, J, task, c1, c2):
        tension = float("nan")
        if scene is not None:
            t = spring_tensions(scene, state.z)
            tension = float(np.abs(t).max()) if t.size else 0.0
        result.logs.append(StepLog(state.step_index, state.step_index * cfg.control_dt, state.z,
                                   state.w.copy(), state.E, J, task, c1, c2, twist, region, tension,
                                   state.alpha))

    task, c1, c2 = _terms(state, np.zeros(6), goal, cfg)
    record(np.zeros(6), task + c1 + c2, task, c1, c2)
    if task < cfg.eps_task:
        result.termination, result.reached = "reached", True
        return result

    J_prev = task + c1 + c2
    rising = still = 0
    while state.step_index < cfg.max_steps:
        d, flag = _descent_delta(state, goal, cfg)
        if flag:
            result.flags.append((state.step_index, flag))
            log.warning("step %d: barrier breached, retreating", state.step_index)
        z_new = state.z.displaced(d)
        w_new = np.asarray(source(z_new), dtype=float)
        step = state.z.delta_to(z_new)
        w_pred = state.w - state.K @ step
        state.E += -0.5 * (state.w + w_new) @ step
        if state.E < -1e-3 and "negative_energy" not in (f for _, f in result.flags):
            result.flags.append((state.step_index + 1, "negative_energy"))
            log.warning("energy estimate drifted below zero (%.3g J)", state.E)
        state.z, state.w = z_new, w_new
        state.step_index += 1

        if (state.step_index % cfg.reprobe_period == 0
                or np.linalg.norm(w_new - w_pred) > cfg.reprobe_error):
            state.K = probe(z_new)
            state.alpha = _alpha_of(state.K, cfg)
            result.reprobes += 1
            region = assign(z_new, state.K)

        task, c1, c2 = _terms(state, np.zeros(6), goal, cfg)
        J = task + c1 + c2
        record(d / cfg.control_dt, J, task, c1, c2)

        if task < cfg.eps_task:
            result.termination, result.reached = "reached", True
            break
        rising = rising + 1 if J > J_prev else 0
        if rising >= cfg.divergence_steps:
            result.termination = "diverged"
            break
        still = still + 1 if np.linalg.norm(d / _metric(state)) < cfg.stall_frac * cfg.step_size else 0
        if still >= cfg.stall_steps:
            result.termination = "boundary_stall"
            break
        J_prev = J
    else:
        result.termination = "max_steps"
    return result


def true_energy_error(scene: Scene, result: RunResult) -> float:
    """Largest |E_estimated - E_true| over the run, as a fraction of peak true E."""
    true = np.array([elastic_energy(scene, s.z) for s in result.logs])
    est = np.array([s.E for s in result.logs])
    peak = max(float(np.abs(true).max()), 1e-300)
    return float(np.abs(est - true).max() / peak)
