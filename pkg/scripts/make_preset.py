"""Regenerate ``src/viakernel/presets/default.json``.

Scans the release rate ``u_sharp`` upward (doubling) for fixed demographic
rates and keeps the first value for which the wild equilibrium is stable
and maximal release drives the population to a Wolbachia-dominant state.
Thresholds and the grid window are then derived from the two equilibria.
"""

import json
from dataclasses import asdict
from pathlib import Path

from viakernel.wolbachia import (default_grid, default_thresholds, preset_conditions,
                                 search_preset)

RATES = dict(alpha_U=15.0, alpha_W=13.0, nu=4.0, mu=1.0, k=0.01, mu_U=3.0, mu_W=3.5)
RELEASE_SCAN = [125.0 * 2 ** i for i in range(6)]

OUT = Path(__file__).resolve().parents[1] / "src" / "viakernel" / "presets" / "default.json"


def main():
    p = search_preset([dict(RATES, u_sharp=u) for u in RELEASE_SCAN])
    if p is None:
        raise SystemExit("no candidate satisfies the preset conditions")
    thr = default_thresholds(p)
    grid = default_grid(p, thr)
    data = {
        "description": "Demo parameters (not calibrated to field data), time unit arbitrary.",
        "params": asdict(p),
        "thresholds": asdict(thr),
        "grid": grid.to_spec(),
        "dt": 0.05,
        "max_iter": 500,
        "controls": [[0.0], [0.5 * p.u_sharp], [p.u_sharp]],
        "search": {"rates": RATES, "release_scan": RELEASE_SCAN},
        "conditions": preset_conditions(p),
    }
    OUT.write_text(json.dumps(data, indent=2) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
