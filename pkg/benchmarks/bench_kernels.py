"""Compiled vs pure-Python distance kernels on planner-sized batches.

Usage: python3 benchmarks/bench_kernels.py [--repeats N]
"""
import argparse
import time

import numpy as np

from artifact import kernels
from artifact.cli import data_path
from artifact.model import load_robot_model
from artifact.scenarios import HOME
from artifact.world import load_scene


def best_time(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(robot, scene, rng):
    # one planner cost evaluation: 32 candidates x 64 knots
    q = HOME + rng.normal(0, 0.5, (32 * 64, robot.dof))
    centers = robot.sphere_centers(robot.kinematics(q)).reshape(-1, 3)
    radii = np.tile(robot.sphere_radius, len(q))
    rot, pos, kind, dims = scene.packed
    pairs = np.asarray(robot.self_pairs, dtype=np.intp)
    per_cfg = robot.sphere_centers(robot.kinematics(q))
    return {
        "chain_collision": lambda: kernels.chain_collision(robot, scene, q, 0.05, 5000.0),
        "world_clearance": lambda: kernels.world_clearance(centers, radii, rot, pos, kind, dims),
        "pair_clearance": lambda: kernels.pair_clearance(per_cfg, robot.sphere_radius, pairs),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()
    robot = load_robot_model(data_path("ur5e.yaml").read_text())
    scene = load_scene(data_path("gantry_obstacles.yaml").read_text())
    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; only the python backend is available")
    results = {}
    for b in backends:
        prev = kernels.use_backend(b)
        try:
            for name, fn in cases(robot, scene, np.random.default_rng(0)).items():
                fn()  # warm up
                results[(name, b)] = best_time(fn, args.repeats)
        finally:
            kernels.use_backend(prev)
    print(f"{'kernel':<18}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for name in ("chain_collision", "world_clearance", "pair_clearance"):
        row = f"{name:<18}" + "".join(f"{results[(name, b)] * 1e3:>10.2f}ms" for b in backends)
        if len(backends) > 1:
            row += f"{results[(name, 'python')] / results[(name, 'compiled')]:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
