"""Time the hot kernels under numba and under the pure-numpy fallback.

Each backend runs in its own subprocess because the switch is read at import:

    python benchmarks/bench_kernels.py [--repeat 5]
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

PAYLOAD = r"""
import json, sys, time
import numpy as np
from drivebench import kernels
from drivebench.control import LateralPID, default_lon_model
from drivebench.vehicle import CAR
from drivebench.worldsim.suite import bundled_suite_path, load_suite
from drivebench.worldsim import run_route

repeat = int(sys.argv[1])
rng = np.random.default_rng(0)

def boxes(n):
    b = np.empty((n, 5))
    b[:, :2] = rng.uniform(-10, 10, (n, 2))
    b[:, 2] = rng.uniform(-np.pi, np.pi, n)
    b[:, 3:] = rng.uniform(0.3, 3.0, (n, 2))
    return b

a, b = boxes(100_000), boxes(100_000)
actors = np.zeros((64, 9))
actors[:, :2] = rng.uniform(-50, 50, (64, 2))
actors[:, 2] = rng.uniform(-np.pi, np.pi, 64)
actors[:, 3] = rng.uniform(0, 15, 64)
actors[:, 6:8] = (2.4, 1.0)
xs = np.arange(0, 300.0)
px, py, cum = xs, np.zeros_like(xs), xs.copy()
vp = np.array([CAR.lf, CAR.lr, CAR.max_steer, CAR.a_throttle, CAR.a_brake, CAR.drag])
gains = LateralPID().gains
coef = default_lon_model().coef
route = [r for r in load_suite(bundled_suite_path("bundled")) if r.route_id == "construction_obstacle_two_ways"][0]

cases = {
    "obb_overlap_pairs 100k": lambda: kernels.obb_overlap_pairs(a, b),
    "forecast_actors 64x40": lambda: kernels.forecast_actors(actors, 40, 0.05, CAR.lf, CAR.lr),
    "rollout_ego 40 steps": lambda: kernels.rollout_ego(0.0, 0.5, 0.0, 8.0, 0.0, px, py, cum, 0, 10.0,
                                                        40, 0.05, vp, gains, np.zeros(3), coef, 2.4, 1.0),
    "full route (CO2W)": lambda: run_route(route, seed=0, log_every=0),
}
out = {"backend": kernels.backend_name()}
for name, fn in cases.items():
    fn()  # warm-up / compile
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    out[name] = best
print(json.dumps(out))
"""


def run_backend(disable: bool, repeat: int) -> dict:
    env = dict(os.environ, DRIVEBENCH_DISABLE_NUMBA="1" if disable else "0")
    res = subprocess.run([sys.executable, "-c", PAYLOAD, str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    fast = run_backend(False, args.repeat)
    slow = run_backend(True, args.repeat)
    print(f"{'case':28s} {fast['backend']:>12s} {slow['backend']:>12s} {'speed-up':>9s}")
    for name in fast:
        if name == "backend":
            continue
        f, s = fast[name], slow[name]
        print(f"{name:28s} {f * 1e3:10.3f}ms {s * 1e3:10.3f}ms {s / f:8.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
