"""Where X_N ends up across replicas, for a safe and an unsafe schedule.

With c = 2 and theta_B = 0.4 almost every replica drifts to X near 1. With
c = 5 and theta_B = 0.8 the steps are too aggressive and most replicas lock
onto the worse arm. Takes about a minute.
"""

from ergobandit.harness import ExperimentConfig, sweep

base = {"horizon": 20_000, "replicas": 300, "seed": 7}
safe = ExperimentConfig.from_dict({
    **base, "schedule": {"kind": "rational", "c": 2}, "x0": 0.5,
    "arms": {"A": {"kind": "iid", "theta": 0.7}, "B": {"kind": "iid", "theta": 0.4}}})
risky = ExperimentConfig.from_dict({
    **base, "schedule": {"kind": "rational", "c": 5}, "x0": 0.1,
    "arms": {"A": {"kind": "iid", "theta": 0.9}, "B": {"kind": "iid", "theta": 0.8}}})
for name, cfg in (("c=2, theta=(0.7, 0.4)", safe), ("c=5, theta=(0.9, 0.8)", risky)):
    s, _ = sweep(cfg)
    print(f"{name}: X_N > 0.9 in {s.fraction_hi:.1%}, X_N < 1e-3 in {s.fraction_lo:.1%}")
