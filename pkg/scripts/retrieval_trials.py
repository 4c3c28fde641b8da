"""Repeated retrieval runs with a swinging head; reports the reattach rate."""

from __future__ import annotations

import argparse

from tethersim.runner import run_scenario
from tethersim.scenarios import retrieval_scenario


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-n", type=int, default=50)
    ap.add_argument("--swing", type=float, default=0.02, help="head swing noise, m")
    args = ap.parse_args()

    ok = 0
    for seed in range(args.n):
        r = run_scenario(retrieval_scenario(seed, swing_noise=args.swing))
        attached = any(e.kind == "world.attach" for e in r.events)
        ok += r.outcome == "success" and attached
        print(f"seed {seed:3d}: {r.outcome} ({r.sim_time:.1f} s)")
    print(f"{ok}/{args.n} reattached")


if __name__ == "__main__":
    main()
