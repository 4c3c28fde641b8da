"""Run the nominal detached mission and print a one-screen summary."""

from __future__ import annotations

import argparse
from pathlib import Path

from tethersim.runner import run_scenario
from tethersim.scenarios import nominal_scenario


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--mode", choices=("detached", "attached"), default="detached")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("runs/nominal"))
    args = ap.parse_args()

    r = run_scenario(nominal_scenario(args.seed, args.mode), args.out)
    print(f"outcome {r.outcome} in phase {r.final_phase} after {r.sim_time:.2f} s sim, {r.wall_time:.2f} s wall")
    for phase, dur in r.phase_durations.items():
        print(f"  {phase:<14s} {dur:7.2f} s")
    for e in r.events:
        if e.kind == "detach":
            print(f"detach clearance {e.payload['clearance']:.4f} m")
    print(f"logs in {args.out}")


if __name__ == "__main__":
    main()
