"""Command line entry point: plan, explore, identify, verify.

Run configs are JSON files; see README.md for the schema. Every output is a
pure function of the config and seed, so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classifier import (ClassifierThresholds, default_thresholds, identify_constraint, load_fixture,
                         screws_from_eigendata)
from .env import Scene, check_equilibrium, elastic_energy, make_scenario, scene_from_dict
from .explorer import Explorer, ExplorerConfig
from .planner import PlannerConfig, run, weighted_wrench_norm
from .screw import InvalidInputError, Pose, quat_error
from .sensor import SensedChannel, SensorModel
from .stiffness import DecompositionError, LowSignalError, principal_axes, probe_stiffness

log = logging.getLogger("stiffnav")

STEPS_HEADER = ["step", "time", "x", "y", "z", "qw", "qx", "qy", "qz", "fx", "fy", "fz",
                "mx", "my", "mz", "E", "J", "task", "c1", "c2", "region"]

EXIT_OK, EXIT_RUN_FAILURE, EXIT_INPUT = 0, 1, 2


class RunFailure(RuntimeError):
    pass


@dataclass
class RunConfig:
    scene: Scene
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    explorer: ExplorerConfig = field(default_factory=ExplorerConfig)
    thresholds: ClassifierThresholds = field(default_factory=default_thresholds)
    sensor: dict = field(default_factory=dict)
    start: Pose | None = None
    goal: Pose | None = None
    poses: list = field(default_factory=list)
    seed: int = 0

    def channel(self) -> SensedChannel:
        return SensedChannel(self.scene, SensorModel(
            noise_std=self.sensor.get("noise_std", 0.0),
            filter_window=self.sensor.get("filter_window", 200),
            rng_seed=self.seed,
        ))


def _pick(cls, d, what):
    d = d or {}
    unknown = set(d) - set(cls.__dataclass_fields__)
    if unknown:
        raise InvalidInputError(f"unknown {what} keys: {sorted(unknown)}")
    return cls(**d)


def _load_scene(ref, base: Path) -> Scene:
    if isinstance(ref, str):
        if ref.endswith(".json"):
            with open(base / ref) as f:
                return scene_from_dict(json.load(f))
        return make_scenario(ref)
    if isinstance(ref, dict):
        return scene_from_dict(ref)
    raise InvalidInputError("scenario must be a name, a .json path or an object")


def _pose(v):
    return None if v is None else Pose.from_list(v)


def _expand_waypoints(waypoints, per_leg):
    """Straight-line interpolation between waypoints, ``per_leg`` poses per leg."""
    pts = [np.asarray(Pose.from_list(w).as_list()) for w in waypoints]
    out = [Pose.from_list(pts[0])]
    for a, b in zip(pts, pts[1:]):
        for t in np.linspace(0, 1, per_leg + 1)[1:]:
            v = (1 - t) * a + t * b
            v[3:] /= np.linalg.norm(v[3:])
            out.append(Pose.from_list(v))
    return out


def load_config(path, seed=None, max_steps=None) -> RunConfig:
    path = Path(path)
    try:
        with open(path) as f:
            d = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInputError(f"cannot read config {path}: {exc}") from None
    known = {"scenario", "planner", "explorer", "thresholds", "sensor", "start", "goal",
             "poses", "waypoints", "poses_per_leg", "seed"}
    if set(d) - known:
        raise InvalidInputError(f"unknown config keys: {sorted(set(d) - known)}")
    if "scenario" not in d:
        raise InvalidInputError("config needs a scenario")
    planner = dict(d.get("planner") or {})
    if max_steps is not None:
        planner["max_steps"] = int(max_steps)
    thresholds = default_thresholds()
    if d.get("thresholds"):
        thresholds = ClassifierThresholds.from_dict({**thresholds.to_dict(), **d["thresholds"]})
    poses = [Pose.from_list(p) for p in d.get("poses", [])]
    if d.get("waypoints"):
        poses += _expand_waypoints(d["waypoints"], int(d.get("poses_per_leg", 5)))
    return RunConfig(
        scene=_load_scene(d["scenario"], path.parent),
        planner=_pick(PlannerConfig, planner, "planner"),
        explorer=_pick(ExplorerConfig, d.get("explorer"), "explorer"),
        thresholds=thresholds,
        sensor=dict(d.get("sensor") or {}),
        start=_pose(d.get("start")),
        goal=_pose(d.get("goal")),
        poses=poses,
        seed=int(d.get("seed", 0) if seed is None else seed),
    )


# ---------------------------------------------------------------------------
# outputs

def _fmt(x):
    if x is None:
        return ""
    x = float(x)
    return repr(x) if math.isfinite(x) else str(x)


def _write_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def write_steps(path, logs):
    with open(path, "w", newline="") as f:
        wr = csv.writer(f, lineterminator="\n")
        wr.writerow(STEPS_HEADER)
        for s in logs:
            wr.writerow([s.step, _fmt(s.time), *map(_fmt, s.z.r), *map(_fmt, s.z.q), *map(_fmt, s.w),
                         _fmt(s.E), _fmt(s.J), _fmt(s.task), _fmt(s.c1), _fmt(s.c2),
                         "" if s.region is None else s.region])


def write_plot_data(out: Path, logs, goal: Pose, w_max):
    with open(out / "position_error.csv", "w", newline="") as f:
        wr = csv.writer(f, lineterminator="\n")
        wr.writerow(["step", "position_error", "orientation_error"])
        for s in logs:
            dq = quat_error(s.z.q, goal.q)
            wr.writerow([s.step, _fmt(np.linalg.norm(goal.r - s.z.r)),
                         _fmt(2 * math.atan2(np.linalg.norm(dq[1:]), dq[0]))])
    with open(out / "wrench_normalized.csv", "w", newline="") as f:
        wr = csv.writer(f, lineterminator="\n")
        wr.writerow(["step", "fx", "fy", "fz", "mx", "my", "mz", "force_norm"])
        for s in logs:
            wr.writerow([s.step, *(_fmt(v / w_max) for v in s.w), _fmt(np.linalg.norm(s.w[:3]) / w_max)])


# ---------------------------------------------------------------------------
# commands

def cmd_plan(cfg: RunConfig, out: Path) -> int:
    if cfg.goal is None:
        raise InvalidInputError("plan needs a goal pose")
    z0 = cfg.start or cfg.scene.equilibrium_pose
    explorer = Explorer(cfg.explorer, cfg.thresholds)
    result = run(cfg.channel(), z0, cfg.goal, cfg.planner, scene=cfg.scene, explorer=explorer)
    out.mkdir(parents=True, exist_ok=True)
    write_steps(out / "steps.csv", result.logs)
    write_plot_data(out, result.logs, cfg.goal, cfg.planner.w_max)
    _write_json(out / "atlas.json", explorer.atlas.to_dict())

    logs = result.logs
    true_E = [elastic_energy(cfg.scene, s.z) for s in logs]
    weighted = [weighted_wrench_norm(s.w, s.alpha) for s in logs]
    summary = {
        "termination": result.termination,
        "reached": result.reached,
        "steps": result.state.step_index,
        "final_pose": result.state.z.as_list(),
        "final_task": logs[-1].task,
        "max_force": max(float(np.linalg.norm(s.w[:3])) for s in logs),
        "max_weighted_wrench": max(weighted),
        "max_spring_tension": max(s.max_tension for s in logs),
        "peak_energy": max(true_E),
        "energy_error": max(abs(s.E - t) for s, t in zip(logs, true_E)),
        "reprobes": result.reprobes,
        "retreats": sum(1 for _, f in result.flags if f == "retreat"),
        "regions": len(explorer.atlas.regions),
        "rho": cfg.planner.rho,
        "w_max": cfg.planner.w_max,
        "seed": cfg.seed,
    }
    _write_json(out / "summary.json", summary)
    print(json.dumps({k: summary[k] for k in ("termination", "reached", "steps")}))
    if result.termination == "diverged":
        raise RunFailure("planner diverged: objective rose for too many consecutive steps")
    return EXIT_OK


def cmd_explore(cfg: RunConfig, out: Path) -> int:
    if not cfg.poses:
        raise InvalidInputError("explore needs poses or waypoints")
    channel = cfg.channel()
    explorer = Explorer(cfg.explorer, cfg.thresholds)
    assigned = []
    for z in cfg.poses:
        K = probe_stiffness(channel, z, cfg.planner.probe_eps, cfg.planner.dt, cfg.planner.probe_repeats)
        assigned.append(explorer.step(z, K))
    atlas = explorer.atlas.to_dict()
    atlas["assignments"] = assigned
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "atlas.json", atlas)
    print(json.dumps({"regions": len(explorer.atlas.regions), "final_region": assigned[-1]}))
    return EXIT_OK


def _read_identify_input(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InvalidInputError(str(exc)) from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError:
        try:
            return principal_axes(np.loadtxt(path, delimiter=None if "," not in text else ","))
        except ValueError as exc:
            raise InvalidInputError(f"cannot parse {path}: {exc}") from None
    if isinstance(d, dict) and "K" in d:
        return principal_axes(np.asarray(d["K"], dtype=float))
    if isinstance(d, list):
        return principal_axes(np.asarray(d, dtype=float))
    if isinstance(d, dict):
        return screws_from_eigendata(d)
    raise InvalidInputError("identify input must be a 6x6 matrix or eigendata object")


def cmd_identify(source, thresholds: ClassifierThresholds, fixture=None) -> int:
    screws = screws_from_eigendata(load_fixture(fixture)) if fixture else _read_identify_input(source)
    label = identify_constraint(screws, thresholds)
    print(json.dumps(label.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def verify_run(run_dir: Path) -> list:
    """Barrier checks over a logged run; returns a list of violation strings."""
    try:
        summary = json.loads((run_dir / "summary.json").read_text())
        w_max = float(summary["w_max"])
        with open(run_dir / "steps.csv", newline="") as f:
            rows = list(csv.reader(f))
    except (OSError, KeyError, ValueError) as exc:
        raise InvalidInputError(f"cannot read run in {run_dir}: {exc}") from None
    if not rows or rows[0] != STEPS_HEADER:
        raise InvalidInputError("steps.csv header mismatch")
    bad = []
    for row in rows[1:]:
        rec = dict(zip(STEPS_HEADER, row))
        c2 = float(rec["c2"])
        force = math.sqrt(sum(float(rec[k]) ** 2 for k in ("fx", "fy", "fz")))
        if not (math.isfinite(c2) and c2 > 0):
            bad.append(f"step {rec['step']}: barrier value {c2}")
        if force >= w_max:
            bad.append(f"step {rec['step']}: force {force:.6g} N at or above {w_max} N")
    return bad


def cmd_verify(run_dir: Path) -> int:
    bad = verify_run(run_dir)
    print(json.dumps({"ok": not bad, "violations": bad[:20], "count": len(bad)}))
    return EXIT_OK if not bad else EXIT_RUN_FAILURE


# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="stiffnav", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="run config JSON")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="sensor noise seed")
        sp.add_argument("--max-steps", type=int, default=None)

    common(sub.add_parser("plan", help="drive the gripper to a goal, logging every step"))
    common(sub.add_parser("explore", help="build a stiffness-region atlas over scripted poses"))
    sp = sub.add_parser("identify", help="label a stiffness matrix or eigendata file")
    sp.add_argument("input", nargs="?", help="JSON (K or eigendata) or whitespace/CSV 6x6 matrix")
    sp.add_argument("--fixture", help="use a shipped eigendata set instead of a file")
    sp.add_argument("--config", help="config whose thresholds override the defaults")
    sp = sub.add_parser("verify", help="check barrier safety over a logged run")
    sp.add_argument("run_dir", nargs="?", help="directory holding steps.csv and summary.json")
    sp.add_argument("--out", default="out")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command in ("plan", "explore"):
            cfg = load_config(args.config, args.seed, args.max_steps)
            check_equilibrium(cfg.scene, 1e-6)
            fn = cmd_plan if args.command == "plan" else cmd_explore
            return fn(cfg, Path(args.out))
        if args.command == "identify":
            if not (args.input or args.fixture):
                raise InvalidInputError("identify needs an input file or --fixture")
            th = load_config(args.config).thresholds if args.config else default_thresholds()
            return cmd_identify(args.input, th, args.fixture)
        return cmd_verify(Path(args.run_dir or args.out))
    except (InvalidInputError, ValueError, KeyError, TypeError) as exc:
        print(json.dumps({"error": "input", "message": str(exc)}), file=sys.stderr)
        return EXIT_INPUT
    except (RunFailure, DecompositionError, LowSignalError) as exc:
        print(json.dumps({"error": "run", "message": str(exc)}), file=sys.stderr)
        return EXIT_RUN_FAILURE


if __name__ == "__main__":
    sys.exit(main())
