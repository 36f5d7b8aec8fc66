"""Compare the compiled and numpy ensemble kernels on one observed record.

    python benchmarks/bench_kernel.py --steps 2000 --traj 2048 --repeat 3
"""

import argparse
import time

import numpy as np

from qsmooth import rng
from qsmooth.config import ExperimentConfig
from qsmooth.engine import PropagationPlan, generate_observed_record
from qsmooth.kernel import BACKENDS, get_kernel
from qsmooth.stats import ACC_WIDTH


def best_time(plan, dn, backend, repeat):
    """Best wall time of the kernel alone; jump flags are drawn beforehand."""
    kern = get_kernel(backend)
    n = plan.n_steps
    best = np.inf
    for _ in range(repeat):
        acc = np.zeros((n + 1, 2, ACC_WIDTH))
        dead = np.zeros(n + 1, dtype=np.int64)
        diag = np.array([np.inf, np.inf])
        t0 = time.perf_counter()
        kern(plan.kraus, dn, plan.logtr_f, plan.effect, plan.den, plan.shift, acc, dead, diag)
        best = min(best, time.perf_counter() - t0)
    return best, acc


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--traj", type=int, default=2048)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)

    cfg = ExperimentConfig(t_final=args.steps * 1e-3, seed=args.seed)
    record, filtered = generate_observed_record(cfg.params, cfg.grid, cfg.seed)
    plan = PropagationPlan(record, cfg.params, filtered=filtered)
    dn = rng.jump_flags(cfg.seed, range(args.traj), plan.n_steps, cfg.params.jump_probability)
    work = args.steps * args.traj

    results = {}
    for name in sorted(BACKENDS):
        t, out = best_time(plan, dn, name, args.repeat)
        results[name] = (t, out)
        print(f"{name:>9}: {t * 1e3:9.1f} ms  {work / t / 1e6:8.2f} M trajectory-steps/s")
    if len(results) == 2:
        (tc, ac), (tp, ap_) = results["compiled"], results["python"]
        diff = float(np.max(np.abs(ac - ap_)))
        print(f"  speedup: {tp / tc:.1f}x  (max |acc difference| {diff:.1e})")


if __name__ == "__main__":
    main()
