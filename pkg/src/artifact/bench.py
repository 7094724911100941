"""Pick-and-place benchmark harness, metric aggregation and the weight sweep."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .collision import DEFAULT_SAFETY_MARGIN, dense_validate
from .costs import CostWeights
from .errors import ConfigError, PlannerError
from .model import RobotModel, load_robot_model
from .sim import SimState, detach, sim_step, try_attach
from .solver.planner import PlanRequest, plan
from .trajectory import Trajectory
from .transforms import Pose
from .world import WorldScene, load_scene, update_obstacle_pose

WAYPOINTS = ("pre_grasp", "grasp", "lift", "place")
METRIC_COLUMNS = [
    "success_rate",
    "mean_cycle_time",
    "std_cycle_time",
    "mean_planning_wall_time",
    "peak_jerk",
    "min_clearance",
    "path_length",
]
SWEEP_COLUMNS = ["case", "weight", "success_rate", "mean_planning_wall_time", "mean_cycle_time"]
# fixed partner weight for each sweep case
SWEEP_FIXED = {"position": ("w_rot", 2000.0), "orientation": ("w_pos", 50000.0)}
SWEEP_FIELD = {"position": "w_pos", "orientation": "w_rot"}


@dataclass
class TaskSpec:
    robot: RobotModel
    scene: WorldScene
    object_id: str
    waypoints: dict  # name -> Pose, keys as in WAYPOINTS
    start: np.ndarray
    trials: int = 20
    weights: CostWeights = field(default_factory=CostWeights)
    rng_seed: int = 0
    jitter: float = 0.0  # uniform xy offset of object and pick waypoints per trial, m
    planner: dict = field(default_factory=dict)  # extra PlanRequest fields
    robot_file: str | None = None
    scene_file: str | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        missing = [w for w in WAYPOINTS if w not in self.waypoints]
        if missing:
            raise ConfigError(f"task is missing waypoints {missing}")
        if self.object_id not in self.scene:
            raise ConfigError(f"object {self.object_id!r} is not in the scene")


def load_task(path, weights: CostWeights | None = None) -> TaskSpec:
    """Task YAML; robot and scene paths are relative to the task file."""
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
        t = doc["task"]
        root = path.parent
        robot = load_robot_model((root / t["robot"]).read_text(encoding="utf-8"))
        scene = load_scene((root / t["scene"]).read_text(encoding="utf-8"))
        wps = {k: Pose.from_dict(v) for k, v in t["waypoints"].items()}
        start = np.asarray(t["start"], dtype=float) if "start" in t else np.zeros(robot.dof)
        w = weights or CostWeights.from_dict(t.get("weights"))
        return TaskSpec(
            robot,
            scene,
            str(t["object"]),
            wps,
            robot.check_config(start),
            int(t.get("trials", 20)),
            w,
            int(t.get("rng_seed", 0)),
            float(t.get("jitter", 0.0)),
            dict(t.get("planner") or {}),
            str(root / t["robot"]),
            str(root / t["scene"]),
        )
    except ConfigError:
        raise
    except (OSError, KeyError, TypeError, ValueError, yaml.YAMLError, PlannerError) as exc:
        raise ConfigError(f"cannot load task {path}: {exc}") from exc


@dataclass
class TrialRecord:
    trial: int
    success: bool
    failure_reason: str | None
    cycle_time_s: float
    planning_wall_time_s: float
    min_clearance_m: float
    peak_jerk: list
    path_length: float

    def to_json(self) -> str:
        d = dict(self.__dict__)
        d["min_clearance_m"] = _json_float(d["min_clearance_m"])
        d["peak_jerk"] = [_json_float(v) for v in d["peak_jerk"]]
        return json.dumps(d, sort_keys=False)

    @classmethod
    def from_json(cls, line: str) -> "TrialRecord":
        d = json.loads(line)
        d["min_clearance_m"] = float(d["min_clearance_m"])
        d["peak_jerk"] = [float(v) for v in d["peak_jerk"]]
        return cls(**d)


def _json_float(x: float):
    # JSON has no infinity; keep the sentinel readable and round-trippable
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


@dataclass
class MetricsReport:
    success_rate: float
    mean_cycle_time: float
    std_cycle_time: float
    mean_planning_wall_time: float
    peak_jerk: list  # per joint, max over successful trials
    min_clearance: float
    path_length: float  # mean over successful trials
    trials: list = field(default_factory=list)

    def row(self) -> dict:
        r = {k: getattr(self, k) for k in METRIC_COLUMNS}
        r["peak_jerk"] = ";".join(repr(float(v)) for v in self.peak_jerk)
        return r


def aggregate(records: list[TrialRecord]) -> MetricsReport:
    """Aggregates over trials. Motion metrics use successful trials only (NaN if none);
    planning time averages over every trial."""
    if not records:
        raise ValueError("no trials to aggregate")
    ok = [r for r in records if r.success]
    nan = float("nan")
    cyc = np.array([r.cycle_time_s for r in ok], dtype=float)
    if ok:
        jerk = np.max(np.array([r.peak_jerk for r in ok], dtype=float), axis=0).tolist()
        minc = float(min(r.min_clearance_m for r in ok))
        plen = float(np.mean([r.path_length for r in ok]))
        mean_c, std_c = float(np.mean(cyc)), float(np.std(cyc))
    else:
        jerk, minc, plen, mean_c, std_c = [], nan, nan, nan, nan
    return MetricsReport(
        success_rate=len(ok) / len(records),
        mean_cycle_time=mean_c,
        std_cycle_time=std_c,
        mean_planning_wall_time=float(np.mean([r.planning_wall_time_s for r in records])),
        peak_jerk=jerk,
        min_clearance=minc,
        path_length=plen,
        trials=list(records),
    )


def _segment_metrics(robot: RobotModel, scene: WorldScene, traj: Trajectory):
    """World clearance (oversample 8), per-joint peak |jerk| and joint path length of one segment."""
    pts = traj.oversampled(8)
    if len(scene):
        centers = robot.sphere_centers(robot.kinematics(pts)).reshape(-1, 3)
        radii = np.tile(robot.sphere_radius, len(pts))
        clear = float(scene.clearance(centers, radii)[0].min())
    else:
        clear = math.inf
    _, _, j = traj.derivatives()
    jerk = np.abs(j).max(axis=0) if len(j) else np.zeros(traj.dof)
    length = float(np.linalg.norm(np.diff(traj.knots, axis=0), axis=1).sum())
    return clear, jerk, length


def _trial_waypoints(task: TaskSpec, offset: np.ndarray) -> dict:
    wps = dict(task.waypoints)
    for k in ("pre_grasp", "grasp", "lift"):
        wps[k] = wps[k].translated(offset)
    return wps


def run_trial(task: TaskSpec, index: int) -> TrialRecord:
    """Execute one start -> pre_grasp -> grasp (attach) -> lift -> place (detach) cycle."""
    rng = np.random.default_rng([task.rng_seed, index])
    offset = np.zeros(3)
    if task.jitter > 0:
        offset[:2] = rng.uniform(-task.jitter, task.jitter, 2)
    robot = task.robot
    obj = task.scene.get(task.object_id)
    scene = update_obstacle_pose(task.scene, task.object_id, obj.pose.translated(offset))
    wps = _trial_waypoints(task, offset)
    sim = SimState(robot, 0.0, task.start, scene)
    margin = task.planner.get("safety_margin", DEFAULT_SAFETY_MARGIN)
    cycle, wall, clear, length = 0.0, 0.0, math.inf, 0.0
    jerk = np.zeros(robot.dof)
    reason = None
    for s_idx, name in enumerate(WAYPOINTS):
        # once the gripper closes in, the object is part of the tool rather than an obstacle
        plan_scene = sim.scene if name == "pre_grasp" else sim.scene.without(task.object_id)
        req = PlanRequest(
            start=sim.config,
            goal=wps[name],
            weights=task.weights,
            rng_seed=task.rng_seed + 7919 * index + s_idx,
            **task.planner,
        )
        res = plan(robot, plan_scene, req)
        wall += res.planning_wall_time
        if not res.success:
            reason = res.failure_reason.value if res.failure_reason else "PlanFailed"
            break
        traj = res.trajectory
        executed = [sim.config.copy()]
        for q in traj.knots[1:]:
            sim = sim_step(sim, q, traj.dt)
            executed.append(sim.config.copy())
        done = Trajectory(traj.dt, np.array(executed))
        if not dense_validate(robot, plan_scene, done, margin, 8):
            reason = "CollisionResidual"
            break
        # clearance is reported against the fixed workcell; the target object is approached by design
        c, j, l = _segment_metrics(robot, plan_scene.without(task.object_id) if name == "pre_grasp" else plan_scene, done)
        cycle += done.duration
        clear = min(clear, c)
        jerk = np.maximum(jerk, j)
        length += l
        if name == "grasp":
            sim, attached = try_attach(sim, task.object_id, wps["grasp"])
            if not attached:
                reason = "AttachFailed"
                break
        elif name == "place":
            sim = detach(sim)
    return TrialRecord(index, reason is None, reason, cycle, wall, clear, jerk.tolist(), length)


def run_pick_place(task: TaskSpec, log_path=None) -> MetricsReport:
    """Run ``task.trials`` trials in order and aggregate; optionally write the JSONL log."""
    records = [run_trial(task, i) for i in range(task.trials)]
    report = aggregate(records)
    if log_path is not None:
        write_text_atomic(log_path, trial_log(records))
    return report


def trial_log(records) -> str:
    return "".join(r.to_json() + "\n" for r in records)


def read_trial_log(text: str) -> list[TrialRecord]:
    return [TrialRecord.from_json(line) for line in text.splitlines() if line.strip()]


def _csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def report_csv(report: MetricsReport) -> str:
    return _csv(METRIC_COLUMNS, [report.row()])


def weight_sweep(task: TaskSpec, case: str, grid) -> list[dict]:
    """One row per grid value: the swept weight varies, its partner stays at the fixed value."""
    if case not in SWEEP_FIELD:
        raise ConfigError(f"unknown sweep case {case!r} (position or orientation)")
    grid = [float(g) for g in grid]
    if not grid:
        raise ValueError("grid must be non-empty")
    fixed_name, fixed_value = SWEEP_FIXED[case]
    rows = []
    for g in grid:
        w = task.weights.replace(**{SWEEP_FIELD[case]: g, fixed_name: fixed_value})
        rep = run_pick_place(replace(task, weights=w))
        rows.append(
            {
                "case": case,
                "weight": g,
                "success_rate": rep.success_rate,
                "mean_planning_wall_time": rep.mean_planning_wall_time,
                "mean_cycle_time": rep.mean_cycle_time,
                "trials": rep.trials,
            }
        )
    return rows


def sweep_csv(rows) -> str:
    return _csv(SWEEP_COLUMNS, [{k: r[k] for k in SWEEP_COLUMNS} for r in rows])


def write_text_atomic(path, text: str) -> None:
    """Write via a temporary sibling file and rename, so readers never see partial output."""
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)
