"""Abel-transform deviation sums and finite-horizon checks of the deviation inequalities.

Suprema over an infinite future (beta, R') are truncated at the horizon N.
For index pairs with n <= N the truncated versions are exactly what the
Abel-summation argument consumes, so a reported violation is a genuine
counterexample; passes carry the truncation caveat in their witness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .payoffs import DeviationStats, RateEnvelope
from .report import FAIL, INDETERMINATE, PASS, ConditionReport, InternalConsistencyError
from .schedule import PrefixTables, check_s2

WEIGHT_KINDS = ("gamma", "gamma_over_Gamma", "gamma_over_S_lag")
INEQ_TOL = 1e-12
DECOMPSUM_TOL = 1e-10


def weights(kind: str, tables: PrefixTables, N: int) -> np.ndarray:
    """xi_0..xi_N for the named weight; xi_0 is NaN."""
    g = tables.gamma[: N + 1]
    if kind == "gamma":
        xi = g.copy()
    elif kind == "gamma_over_Gamma":
        xi = np.r_[np.nan, g[1:] / tables.Gamma[1: N + 1]]
    elif kind == "gamma_over_S_lag":
        xi = np.r_[np.nan, g[1:] / tables.S[:N]]
    else:
        raise ValueError(f"unknown weight kind {kind!r}")
    return xi


@dataclass(frozen=True, eq=False)
class WeightedDeviation:
    """Phi_n = sum_{k<=n} xi_k (eta_k - theta), n = 0..N."""

    weight_kind: str
    arm: str
    xi: np.ndarray
    values: np.ndarray

    @property
    def N(self) -> int:
        return len(self.values) - 1


def phi_dev(weight_kind: str, arm: str, eta, theta: float, tables: PrefixTables,
            N: int) -> WeightedDeviation:
    if N > tables.N:
        raise ValueError(f"tables cover {tables.N} steps, {N} requested")
    eta = np.asarray(eta, dtype=float)[:N]
    if eta.size < N:
        raise ValueError(f"payoff stream has {eta.size} bits, {N} requested")
    xi = weights(weight_kind, tables, N)
    rises = np.flatnonzero(xi[2:] > xi[1:-1] * (1 + 4 * np.finfo(float).eps))
    if rises.size:
        raise ValueError(
            f"weights must be nonincreasing; xi rises at index {int(rises[0]) + 2}")
    values = np.r_[0.0, np.cumsum(xi[1:] * (eta - theta))]
    return WeightedDeviation(weight_kind, arm, xi, values)


def abel_transform(xi, eta, theta, m: int, n: int):
    """sum_{k=m}^{n-1} (xi_k - xi_{k+1}) kappa_k + xi_n kappa_n - xi_m kappa_m.

    ``xi`` and ``eta`` are 1-based sequences (index 0 unused). Works with
    any number type, so exact rationals give an exact comparison with the
    direct sum sum_{k=m+1}^n xi_k (eta_k - theta).
    """
    kappa = [0 * theta]
    for k in range(1, n + 1):
        kappa.append(kappa[-1] + (eta[k] - theta))
    total = xi[n] * kappa[n] if n >= 1 else kappa[0]
    if m >= 1:
        total -= xi[m] * kappa[m]
    for k in range(max(m, 1), n):
        total += (xi[k] - xi[k + 1]) * kappa[k]
    return total


def sample_pairs(lo: int, hi: int, count: int = 10_000, seed: int = 0) -> np.ndarray:
    """``count`` uniform pairs lo <= m <= n <= hi plus every adjacent pair (m, m+1)."""
    if hi < lo:
        raise ValueError("empty pair window")
    rng = np.random.default_rng(seed)
    a = rng.integers(lo, hi + 1, size=count)
    b = rng.integers(lo, hi + 1, size=count)
    rand = np.column_stack((np.minimum(a, b), np.maximum(a, b)))
    m = np.arange(lo, hi)
    adj = np.column_stack((m, m + 1))
    return np.vstack((rand, adj))


def _inequality_report(name, N, lhs, rhs, pairs, extra=None, recheck=None):
    margin = rhs + INEQ_TOL - lhs
    worst = int(np.argmin(margin))
    witness = {"pairs": int(len(pairs)), "worst_margin": float(margin[worst]),
               "worst_pair": [int(pairs[worst, 0]), int(pairs[worst, 1])],
               "truncated_at": int(N)}
    if extra:
        witness.update(extra)
    bad = np.flatnonzero(margin < 0)
    if bad.size and recheck is not None:
        bad = np.array([i for i in bad if recheck(i)], dtype=int)
    witness["violations"] = int(bad.size)
    if bad.size:
        witness["index"] = [int(pairs[bad[0], 0]), int(pairs[bad[0], 1])]
        return ConditionReport(name, N, FAIL, witness)
    return ConditionReport(name, N, PASS, witness)


def abel1_verify(dev: WeightedDeviation, envelope: RateEnvelope, stats: DeviationStats,
                 pairs: np.ndarray) -> ConditionReport:
    """|Phi_n - Phi_m| <= beta_m (sum_{k=m+1}^n xi_k phi'(k) + 2 xi_m phi(m))."""
    N = stats.horizon
    pairs = np.asarray(pairs)
    m, n = pairs[:, 0], pairs[:, 1]
    if (m < envelope.k0).any() or (n < m).any() or (n > N // 2).any() or n.max() > dev.N:
        raise ValueError("pairs must satisfy k0 <= m <= n <= N/2")
    xi = dev.xi
    k = np.arange(1, dev.N + 1)
    P = np.r_[0.0, np.cumsum(xi[1:] * envelope.phi_prime(k))]
    lhs = np.abs(dev.values[n] - dev.values[m])
    rhs = stats.beta[m] * (P[n] - P[m] + 2.0 * xi[m] * envelope.phi(m))

    def recheck(i):
        mi, ni = int(m[i]), int(n[i])
        direct = abs(math.fsum(dev.values[mi + 1: ni + 1] - dev.values[mi: ni]))
        beta = float(np.max(stats.alpha[mi: N + 1]))
        s = math.fsum(xi[mi + 1: ni + 1] * envelope.phi_prime(np.arange(mi + 1, ni + 1)))
        return direct > beta * (s + 2.0 * xi[mi] * float(envelope.phi(mi))) + INEQ_TOL

    return _inequality_report(f"abel1[{dev.weight_kind},{dev.arm}]", N, lhs, rhs, pairs,
                              recheck=recheck)


@dataclass(frozen=True)
class PsiValue:
    n: int
    value: float
    tail_bound: float


@dataclass(frozen=True, eq=False)
class PsiTable:
    """Truncated Psi_n = sum_{k=n+1}^N (gamma_k / S_{k-1}) d_k, n = 0..N, with
    d_k = eta_A,k - eta_B,k - (theta_A - theta_B)."""

    values: np.ndarray
    tail_bound: float
    N: int

    def at(self, n: int) -> PsiValue:
        return PsiValue(int(n), float(self.values[n]), self.tail_bound)


def psi_table(eta_A, eta_B, theta_A: float, theta_B: float, tables: PrefixTables,
              N: int) -> PsiTable:
    if N > tables.N:
        raise ValueError(f"tables cover {tables.N} steps, {N} requested")
    eta_A = np.asarray(eta_A, dtype=float)[:N]
    eta_B = np.asarray(eta_B, dtype=float)[:N]
    d = eta_A - eta_B - (theta_A - theta_B)
    terms = tables.gamma[1: N + 1] / tables.S[:N] * d
    rev = np.cumsum(terms[::-1])[::-1]
    values = np.r_[rev, 0.0]
    # gamma is nonincreasing, so gamma_N stands in for gamma_{N+1} conservatively
    g_next = tables.gamma[N + 1] if tables.N > N else tables.gamma[N]
    tail = 2.0 / ((1.0 - g_next) * tables.S[N])
    return PsiTable(values, float(tail), N)


def psi(n: int, eta_A, eta_B, theta_A, theta_B, tables, N) -> PsiValue:
    return psi_table(eta_A, eta_B, theta_A, theta_B, tables, N).at(n)


def psi_bound(stats: DeviationStats, tables: PrefixTables, n) -> np.ndarray:
    """(2 beta_n / S_{n-1}) [phi'(n) + 2 gamma_n phi(n)]."""
    env = stats.envelope
    n = np.asarray(n)
    return 2.0 * stats.beta[n] / tables.S[n - 1] * (
        env.phi_prime(n) + 2.0 * tables.gamma[n] * env.phi(n))


def psi_bound_verify(table: PsiTable, stats: DeviationStats, tables: PrefixTables) -> ConditionReport:
    """|Psi_n| <= psi_bound + tail slack for every n in [k0, N/2]."""
    N = table.N
    if stats.horizon < N:
        raise ValueError("deviation stats must cover the psi horizon")
    n = np.arange(max(stats.envelope.k0, 1), N // 2 + 1)
    lhs = np.abs(table.values[n])
    rhs = psi_bound(stats, tables, n) + table.tail_bound
    return _inequality_report("psi_bound", N, lhs, rhs, np.column_stack((n, n)),
                              extra={"tail_bound": table.tail_bound, "checked": int(n.size)})


def r_prime(stats: DeviationStats, tables: PrefixTables) -> np.ndarray:
    """R'_m = 2 max_{m<=k<=N} beta_k [phi'(k) + 2 gamma_k phi(k)] / (1 - gamma_m); index 0 NaN."""
    N = stats.horizon
    env = stats.envelope
    k = np.arange(1, N + 1)
    inner = stats.beta[k] * (env.phi_prime(k) + 2.0 * tables.gamma[k] * env.phi(k))
    sup = np.maximum.accumulate(inner[::-1])[::-1]
    return np.r_[np.nan, 2.0 * sup / (1.0 - tables.gamma[1: N + 1])]


def lambda_increment_verify(Lam, X, sum_gf, rprime, pairs, k0: int = 1,
                            N: int | None = None) -> ConditionReport:
    """|Lambda_n - Lambda_m| <= R'_m [sum_{k=m+1}^n gamma_k f(X_{k-1}) + 2 f(X_n)].

    ``Lam``, ``X`` and ``sum_gf`` are stride-1 arrays starting at step 0.
    """
    pairs = np.asarray(pairs)
    m, n = pairs[:, 0], pairs[:, 1]
    if (m < k0).any() or (n < m).any() or n.max() >= len(Lam):
        raise ValueError("pairs must satisfy k0 <= m <= n inside the stored window")
    fX = X * (1.0 - X)
    lhs = np.abs(Lam[n] - Lam[m])
    rhs = rprime[m] * (sum_gf[n] - sum_gf[m] + 2.0 * fX[n])
    horizon = len(rprime) - 1 if N is None else N
    return _inequality_report("lambda_increment", horizon, lhs, rhs, pairs)


def psi_identity_residual(Lam, X, S, table: PsiTable, m: int, n: int) -> float:
    """|Lambda_n - Lambda_m - sum_{k=m+1}^n S_{k-1} f(X_{k-1}) (Psi_{k-1} - Psi_k)|."""
    k = np.arange(m + 1, n + 1)
    fX = X[k - 1] * (1.0 - X[k - 1])
    s = math.fsum(S[k - 1] * fX * (table.values[k - 1] - table.values[k]))
    return abs(Lam[n] - Lam[m] - s)


def esta_and_decompsum_verify(arrays: dict, theta_B: float) -> ConditionReport:
    """Exact bookkeeping of the B-win step mass, plus boundedness of S_B exp(-theta_B Gamma).

    ``arrays`` holds stride-1 run columns from step 0: gamma, Gamma, eta_B,
    played_A, B_win, S_B.
    """
    g = np.nan_to_num(arrays["gamma"], nan=0.0)
    G = arrays["Gamma"]
    eta_B = arrays["eta_B"].astype(float)
    played_A = arrays["played_A"].astype(float)
    lhs = np.cumsum(g * arrays["B_win"])
    phi_B = np.cumsum(g * (eta_B - theta_B))
    won_on_A = np.cumsum(g * eta_B * played_A)
    lhs[0] = phi_B[0] = won_on_A[0] = 0.0
    resid = np.abs(lhs - (theta_B * G + phi_B - won_on_A))
    worst = float(resid.max())
    n_last = len(G) - 1
    if worst > DECOMPSUM_TOL:
        raise InternalConsistencyError(
            f"B-win step mass identity off by {worst:.3e} at step {int(np.argmax(resid))}")
    ratio = arrays["S_B"][1:] * np.exp(-theta_B * G[1:])
    half = len(ratio) // 2
    first = float(ratio[:half].max()) if half else float(ratio.max())
    second = float(ratio[half:].max())
    witness = {"decompsum_residual": worst, "first_half_max": first,
               "second_half_max": second}
    verdict = PASS if second <= 1.1 * first else INDETERMINATE
    return ConditionReport("esta_decompsum", n_last, verdict, witness)


def gamma_tail_bound_verify(tables: PrefixTables, theta_B: float) -> ConditionReport:
    """sum_{n>l} gamma_n^2 <= C log(T_l)/T_l with T_l = exp(theta_B Gamma_l).

    C is fitted once at l0 = N/8, then must dominate for every l in [l0, N/2].
    Schedules that do not pass the S2 check are reported not applicable.
    """
    N = tables.N
    s2 = check_s2(tables, theta_B)
    if s2.verdict != PASS:
        return ConditionReport("gamma_tail", N, INDETERMINATE,
                               {"not_applicable": True, "s2_verdict": s2.verdict})
    l0 = max(N // 8, 1)
    l = np.arange(l0, N // 2 + 1)
    tail = tables.sumsq[N] - tables.sumsq[l]
    logT = theta_B * tables.Gamma[l]
    shape = logT * np.exp(-logT)
    C = tail[0] / shape[0]
    margin = C * shape - tail * (1 - 1e-12)
    witness = {"C": float(C), "l0": int(l0), "worst_margin": float(margin.min()),
               "not_applicable": False}
    bad = np.flatnonzero(margin < 0)
    if bad.size:
        witness["index"] = int(l[bad[0]])
        return ConditionReport("gamma_tail", N, FAIL, witness)
    return ConditionReport("gamma_tail", N, PASS, witness)


def abel2_cauchy_verify(dev: WeightedDeviation) -> ConditionReport:
    """Dyadic Cauchy contraction: |Phi_N - Phi_{N/2}| <= max(1e-3, |Phi_{N/2} - Phi_{N/4}| / 4)."""
    N = dev.N
    if N < 1000:
        raise ValueError("abel2_cauchy_verify needs a horizon of at least 1000")
    v = dev.values
    last = abs(v[N] - v[N // 2])
    prev = abs(v[N // 2] - v[N // 4])
    witness = {"last_increment": float(last), "prev_increment": float(prev),
               "weight_kind": dev.weight_kind, "arm": dev.arm}
    verdict = PASS if last <= max(1e-3, 0.25 * prev) else INDETERMINATE
    return ConditionReport(f"abel2[{dev.weight_kind},{dev.arm}]", N, verdict, witness)
