"""Four kinds of payoff streams and how fast their averages settle.

R_n is the larger of the two arms' running deviations from their means.
Dividing by phi(n) = n / log(n+2)^2 should shrink toward zero for every
ergodic source; the rotation keeps R_n below one forever. For random
streams the two-block trend verdict depends on the draw: a late excursion
of the random walk can make one seed read as growth.
"""

import numpy as np

from ergobandit.payoffs import (DeviationTracker, IidBernoulli, MarkovIndicator, RateEnvelope,
                                Rotation, check_e_phi, deviation_stats)

N = 100_000
rng = np.random.default_rng(0)
P = [[0.9, 0.1], [0.2, 0.8]]
sources = {
    "rotation": (Rotation(0.7), Rotation(0.4)),
    "iid": (IidBernoulli(0.7, rng), IidBernoulli(0.4, rng)),
    "markov": (MarkovIndicator(P, [0], rng), MarkovIndicator(P, [1], rng)),
}
env = RateEnvelope()
for name, (a, b) in sources.items():
    tr = DeviationTracker.from_bits(a.bits(N), b.bits(N), a.theta, b.theta)
    stats = deviation_stats(tr, env)
    print(f"{name:9s} theta = ({a.theta:.3f}, {b.theta:.3f})  max R_n = {tr.R.max():8.2f}  "
          f"alpha_N = {stats.alpha[N]:.2e}  E_phi {check_e_phi(stats).verdict}")
