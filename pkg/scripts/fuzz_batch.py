"""Run the randomized fuzz batch and tabulate outcomes and attempt counts."""

from __future__ import annotations

import argparse
from collections import Counter
from concurrent.futures import ProcessPoolExecutor

from tethersim.runner import run_scenario
from tethersim.scenarios import fuzz_batch


def _run(cfg):
    r = run_scenario(cfg)
    return r.name, r.outcome, r.final_phase, r.attempt_count, cfg.mission.max_attempts


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-n", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    cfgs = fuzz_batch(args.n, args.seed)
    with ProcessPoolExecutor(args.jobs) as pool:
        rows = list(pool.map(_run, cfgs))
    for name, outcome, phase, attempts, limit in rows:
        print(f"{name:<14s} {outcome:<8s} {phase:<12s} attempts {attempts}/{limit}")
    print(dict(Counter(r[1] for r in rows)))
    assert all(a <= m for *_, a, m in rows), "attempt limit exceeded"


if __name__ == "__main__":
    main()
