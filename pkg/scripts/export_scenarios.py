"""Write the built-in scenarios to scenarios/*.json for use with the CLI."""

from __future__ import annotations

import argparse
from pathlib import Path

from tethersim.config import dump_config
from tethersim.scenarios import drag_fault_scenario, nominal_scenario, retrieval_scenario, unreachable_zone_scenario


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "scenarios")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    scenarios = {
        "nominal": nominal_scenario(),
        "attached": nominal_scenario(mode="attached"),
        "drag_fault": drag_fault_scenario(),
        "unreachable_zone": unreachable_zone_scenario(),
        "retrieval": retrieval_scenario(0),
    }
    for name, cfg in scenarios.items():
        dump_config(cfg, args.out / f"{name}.json")
        print(args.out / f"{name}.json")


if __name__ == "__main__":
    main()
