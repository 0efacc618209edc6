"""Regenerate tests/fixtures/pilot.json from the pilot seed.

    python3 tools/calibrate.py [--seed 12345]

Takes a few minutes on one core.
"""

import argparse
import json
from pathlib import Path

from ergobandit.harness import ExperimentConfig, binomial_sigma, sweep

IID = {"A": {"kind": "iid", "theta": 0.7}, "B": {"kind": "iid", "theta": 0.4}}
P = [[0.9, 0.1], [0.2, 0.8]]
MARKOV = {"A": {"kind": "markov", "matrix": P, "target": [0]},
          "B": {"kind": "markov", "matrix": P, "target": [1]}}
ROTATION = {"A": {"kind": "rotation", "theta": 0.7}, "B": {"kind": "rotation", "theta": 0.4}}
FALLIBLE = {"A": {"kind": "iid", "theta": 0.9}, "B": {"kind": "iid", "theta": 0.8}}

CONFIGS = {
    "iid_1e5": (IID, 2, 0.5, 10**5, 1000),
    "iid_1e4": (IID, 2, 0.5, 10**4, 1000),
    "iid_1e3": (IID, 2, 0.5, 10**3, 1000),
    "markov_1e5": (MARKOV, 2, 0.5, 10**5, 1000),
    "rotation_1e5": (ROTATION, 2, 0.5, 10**5, 1000),
    "fallible_1e5": (FALLIBLE, 5, 0.1, 10**5, 2000),
}


def config(name: str, seed: int) -> ExperimentConfig:
    arms, c, x0, N, R = CONFIGS[name]
    return ExperimentConfig.from_dict({"schedule": {"kind": "rational", "c": c}, "arms": arms,
                                       "x0": x0, "horizon": N, "replicas": R, "seed": seed})


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=12345)
    ap.add_argument("--out", default=str(Path(__file__).parents[1] / "tests/fixtures/pilot.json"))
    args = ap.parse_args()
    out = {"seed": args.seed, "configs": {}}
    for name in CONFIGS:
        s, _ = sweep(config(name, args.seed))
        R = len(s.finals)
        out["configs"][name] = {
            "replicas": R, "fraction_hi": s.fraction_hi, "fraction_lo": s.fraction_lo,
            "fraction_mid": s.fraction_mid,
            "hi_threshold": s.fraction_hi - 3 * binomial_sigma(s.fraction_hi, R),
        }
        print(name, out["configs"][name], flush=True)
    Path(args.out).write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
