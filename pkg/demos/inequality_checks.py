"""Run every condition and inequality verifier on a rotation-payoff run."""

from ergobandit.harness import ExperimentConfig, check_bundle

cfg = ExperimentConfig.from_dict({
    "schedule": {"kind": "rational", "c": 2},
    "arms": {"A": {"kind": "rotation", "theta": 0.7}, "B": {"kind": "rotation", "theta": 0.4}},
    "x0": 0.5, "horizon": 50_000, "verify": {"pairs": 10_000, "window": 10_000},
})
for r in check_bundle(cfg):
    print(f"{r.condition_name:28s} {r.verdict}")
