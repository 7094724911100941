"""Command-line entry point. Exit codes: 0 success, 1 planning/benchmark failure, 2 configuration error."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import bench
from .collision import DEFAULT_SAFETY_MARGIN, sweep_check
from .costs import CostWeights
from .errors import ConfigError, ParseError, PlannerError, Unreachable, ValidationError
from .model import load_robot_model
from .trajectory import Trajectory
from .transforms import Pose
from .world import load_scene

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def data_path(name: str) -> Path:
    """Location of a bundled data file (robot, scenes, default task)."""
    return Path(str(resources.files("artifact") / "data" / name))


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors -> code 2 on stderr
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_CONFIG)


def _floats(text: str, n: int | None = None, what: str = "value") -> np.ndarray:
    try:
        vals = np.array([float(x) for x in text.replace(" ", "").split(",") if x != ""])
    except ValueError as exc:
        raise ConfigError(f"{what}: expected comma-separated numbers, got {text!r}") from exc
    if n is not None and len(vals) != n:
        raise ConfigError(f"{what}: expected {n} numbers, got {len(vals)}")
    return vals


def _pose(text: str, what: str) -> Pose:
    v = _floats(text, None, what)
    if len(v) == 3:
        return Pose(v)
    if len(v) != 7:
        raise ConfigError(f"{what}: expected x,y,z or x,y,z,qw,qx,qy,qz")
    return Pose(v[:3], v[3:])


def _read(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def _robot(args):
    return load_robot_model(_read(args.robot or data_path("ur5e.yaml")))


def _scene(args):
    return load_scene(_read(args.scene or data_path("workcell.yaml")))


def _weights(args) -> CostWeights:
    return CostWeights.load(_read(args.weights)) if args.weights else CostWeights()


def _write(path, text: str):
    bench.write_text_atomic(path, text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# -- subcommands ------------------------------------------------------------------------

def cmd_plan(args) -> int:
    from .solver import PlanRequest, plan

    robot, scene = _robot(args), _scene(args)
    start = robot.check_config(_floats(args.start, robot.dof, "--start"))
    req = PlanRequest(
        start=start,
        goal=_pose(args.goal_pose, "--goal-pose"),
        weights=_weights(args),
        num_seeds=args.num_seeds,
        timesteps=args.timesteps,
        rng_seed=args.rng_seed,
        threads=args.threads,
        hold_orientation=_pose(args.hold_orientation, "--hold-orientation") if args.hold_orientation else None,
    )
    res = plan(robot, scene, req)
    summary = {
        "success": res.success,
        "failure_reason": res.failure_reason.value if res.failure_reason else None,
        "final_cost": res.final_cost,
    }
    if not args.no_timestamps:
        summary["planning_wall_time_s"] = res.planning_wall_time
    print(json.dumps(summary, sort_keys=True))
    if not res.success:
        return EXIT_FAIL
    _write(args.out, res.trajectory.to_json(robot.joint_names) + "\n")
    return EXIT_OK


def cmd_ik(args) -> int:
    from .solver import ik_solve

    robot, scene = _robot(args), _scene(args)
    try:
        sols = ik_solve(robot, scene, _pose(args.goal_pose, "--goal-pose"), args.num_seeds, args.rng_seed)
    except Unreachable as exc:
        print(json.dumps({"success": False, "best_residual": exc.best_residual}))
        return EXIT_FAIL
    _write(args.out, _dump({"joint_names": robot.joint_names, "solutions": [q.tolist() for q in sols]}))
    print(json.dumps({"success": True, "solutions": len(sols)}))
    return EXIT_OK


def cmd_sweep_check(args) -> int:
    robot, scene = _robot(args), _scene(args)
    try:
        traj = Trajectory.from_json(_read(args.trajectory))
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
    rep = sweep_check(robot, scene, traj, args.margin)
    out = {
        "collision_free": rep.collision_free,
        "first_contact_interval": list(rep.first_contact_interval) if rep.first_contact_interval else None,
        "min_clearance": rep.min_clearance,
        "n_checks": rep.n_checks,
    }
    _write(args.out, _dump(out))
    return EXIT_OK if rep.collision_free else EXIT_FAIL


def _task(args):
    task = bench.load_task(args.task or data_path("pick_place.yaml"), _weights(args) if args.weights else None)
    changes = {}
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.rng_seed is not None:
        changes["rng_seed"] = args.rng_seed
    if args.threads is not None:
        changes["planner"] = {**task.planner, "threads": args.threads}
    return replace(task, **changes) if changes else task


def _strip_times(records, no_timestamps: bool):
    if not no_timestamps:
        return records
    return [replace(r, planning_wall_time_s=None) for r in records]


def cmd_bench(args) -> int:
    task = _task(args)
    report = bench.run_pick_place(task)
    row = report.row()
    if args.no_timestamps:
        row["mean_planning_wall_time"] = ""
    _write(args.out, bench._csv(bench.METRIC_COLUMNS, [row]))
    if args.log:
        _write(args.log, bench.trial_log(_strip_times(report.trials, args.no_timestamps)))
    print(json.dumps({"success_rate": report.success_rate, "trials": task.trials}))
    return EXIT_OK if report.success_rate == 1.0 else EXIT_FAIL


def cmd_weight_sweep(args) -> int:
    task = _task(args)
    grid = _floats(args.grid, None, "--grid")
    rows = bench.weight_sweep(task, args.case, grid)
    if args.no_timestamps:
        rows = [{**r, "mean_planning_wall_time": ""} for r in rows]
    _write(args.out, bench.sweep_csv(rows))
    return EXIT_OK


def cmd_mpc_demo(args) -> int:
    from .mpc import MpcOptions, run_episode
    from .scenarios import mpc_demo_episode

    robot, scene = _robot(args), _scene(args)
    ep = mpc_demo_episode(robot, scene, args.obstacle_speed)
    opts = MpcOptions(rng_seed=args.rng_seed, threads=args.threads)
    log = run_episode(robot, ep.scene, ep.start, ep.goal, ep.duration, ep.scripts, opts, goal_changes=ep.goal_changes)
    out = {
        "obstacle_speed": args.obstacle_speed,
        "collision_free": log.collision_free,
        "plan_failures": log.plan_failures,
        "replans": log.replans,
        "times": log.times.tolist(),
        "configs": log.configs.tolist(),
        "clearance": log.clearance.tolist(),
    }
    if not args.no_timestamps:
        out["replan_latency_s"] = log.latencies
    _write(args.out, _dump(out))
    print(json.dumps({"collision_free": log.collision_free, "plan_failures": log.plan_failures}))
    return EXIT_OK if log.collision_free else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="artifact", description="Motion planning for serial manipulators.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, task=False):
        sp.add_argument("--robot", help="robot YAML (default: bundled UR5e-like arm)")
        sp.add_argument("--scene", help="scene YAML (default: bundled workcell)")
        sp.add_argument("--weights", help="cost weight YAML")
        sp.add_argument("--rng-seed", type=int, default=None if task else 0)
        sp.add_argument("--threads", type=int, default=None if task else 1)
        sp.add_argument("--out", required=True)
        sp.add_argument("--no-timestamps", action="store_true", help="omit wall-clock fields from outputs")

    sp = sub.add_parser("plan", help="plan a trajectory to a goal pose")
    common(sp)
    sp.add_argument("--start", required=True, help="comma-separated joint values")
    sp.add_argument("--goal-pose", required=True, help="x,y,z[,qw,qx,qy,qz]")
    sp.add_argument("--hold-orientation", help="x,y,z,qw,qx,qy,qz reference for the hold cost")
    sp.add_argument("--num-seeds", type=int, default=32)
    sp.add_argument("--timesteps", type=int, default=64)
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("ik", help="collision-free IK solutions for a pose")
    common(sp)
    sp.add_argument("--goal-pose", required=True)
    sp.add_argument("--num-seeds", type=int, default=32)
    sp.set_defaults(func=cmd_ik)

    sp = sub.add_parser("sweep-check", help="continuous collision check of a trajectory file")
    common(sp)
    sp.add_argument("--trajectory", required=True)
    sp.add_argument("--margin", type=float, default=DEFAULT_SAFETY_MARGIN)
    sp.set_defaults(func=cmd_sweep_check)

    for name, fn in (("bench", cmd_bench), ("weight-sweep", cmd_weight_sweep)):
        sp = sub.add_parser(name, help="pick-and-place benchmark" if name == "bench" else "cost weight sweep")
        common(sp, task=True)
        sp.add_argument("--task", help="task YAML (default: bundled pick-and-place task)")
        sp.add_argument("--trials", type=int)
        if name == "bench":
            sp.add_argument("--log", help="per-trial JSON-lines output")
        else:
            sp.add_argument("--case", choices=["position", "orientation"], required=True)
            sp.add_argument("--grid", required=True, help="comma-separated weights")
        sp.set_defaults(func=fn)

    sp = sub.add_parser("mpc-demo", help="scripted moving-obstacle MPC episode")
    common(sp)
    sp.add_argument("--obstacle-speed", type=float, default=0.1)
    sp.set_defaults(func=cmd_mpc_demo)
    return p


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help exits 0, usage errors 2
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, ParseError, ValidationError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except PlannerError as exc:
        sys.stderr.write(f"failed: {exc}\n")
        return EXIT_FAIL


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
