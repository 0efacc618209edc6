"""Step schedules and the conditions they satisfy.

The rational family gamma_n = c / (c + n) keeps the product S_n growing like
n^c. Whether the learner can still recover from a bad start depends on c
times the payoff rate of the worse arm: at most one is safe.
"""

from ergobandit.schedule import (Rational, build_prefix, check_lemma1_caps, check_s1,
                                 check_s2, prefix_identity_residuals)

N = 100_000
for c in (0.5, 2.0, 5.0):
    t = build_prefix(Rational(c), N)
    res = prefix_identity_residuals(t)
    print(f"c = {c}: Gamma_N = {t.Gamma[N]:.3f}, log S_N = {t.logS[N]:.3f}, "
          f"sum of Delta vs S off by {res['sum_delta']:.1e}")
    print(f"  S1 {check_s1(t).verdict}; with theta_B = 0.4: "
          f"S2 {check_s2(t, 0.4).verdict}, caps {check_lemma1_caps(t, 0.4).verdict}")
