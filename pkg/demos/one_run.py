"""One trajectory, split into martingale, payoff-deviation and drift parts.

X_n = x0 + M_n + Lambda_n + (theta_A - theta_B) sum gamma_k f(X_{k-1})
holds at every step; the run raises if it ever breaks by more than 1e-8.
"""

import numpy as np

from ergobandit.bandit import BanditConfig, run
from ergobandit.payoffs import IidBernoulli
from ergobandit.schedule import Rational, build_prefix

N = 100_000
rng = np.random.default_rng(1)
rec = run(BanditConfig(build_prefix(Rational(2), N), IidBernoulli(0.7, rng),
                       IidBernoulli(0.4, rng), x0=0.5, horizon=N, rng=rng, stride=N // 10))
t = rec.trajectory
print("     n        X         M    Lambda     drift")
for row in zip(t["n"], t["X"], t["M"], t["Lambda"], t["drift"]):
    print("{:6d} {:8.5f} {:9.5f} {:9.5f} {:9.5f}".format(*row))
print("worst decomposition residual", f"{rec.invariants['decomposition_residual']:.1e}")
print("brake: S_B", f"{rec.brake.S_B:.3e}", "vs S", f"{rec.tables.S[N]:.3e}")
