"""Step sequences, their prefix tables, and finite-horizon condition checks.

Sequences are 1-based. Index 0 of every table holds the conventions
``Gamma[0] = 0`` and ``S[0] = Delta[0] = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .report import FAIL, INDETERMINATE, PASS, ConditionReport

# dyadic trend slack shared by the asymptotic checks
TREND_SLACK = 0.05
# relative tolerance for identities built from <= N rounding events
IDENTITY_RTOL = 1e-10
# tolerance for pure-arithmetic inequalities
INEQ_TOL = 1e-12


class StepFamily:
    """Base class; subclasses return gamma_1..gamma_N via :meth:`gammas`."""

    kind = "abstract"

    def gammas(self, N: int) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Rational(StepFamily):
    """gamma_n = c / (c + n)."""

    c: float
    kind = "rational"

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"Rational family needs c > 0, got {self.c}")

    def gammas(self, N):
        n = np.arange(1, N + 1, dtype=float)
        return self.c / (self.c + n)

    def to_dict(self):
        return {"kind": self.kind, "c": self.c}


@dataclass(frozen=True)
class Power(StepFamily):
    """gamma_n = min(a * n**-rho, cap), rho in (1/2, 1]."""

    a: float
    rho: float
    cap: float = 0.9
    kind = "power"

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"Power family needs a > 0, got {self.a}")
        # rho = 1/2 is accepted so the harmonic-divergence case can be studied
        if not 0.5 <= self.rho <= 1.0:
            raise ValueError(f"Power family needs rho in [1/2, 1], got {self.rho}")
        if not 0.0 < self.cap < 1.0:
            raise ValueError(f"cap must lie in (0, 1), got {self.cap}")

    def gammas(self, N):
        n = np.arange(1, N + 1, dtype=float)
        return np.minimum(self.a * n ** (-self.rho), self.cap)

    def to_dict(self):
        return {"kind": self.kind, "a": self.a, "rho": self.rho, "cap": self.cap}


@dataclass(frozen=True, init=False)
class Scripted(StepFamily):
    """An explicit table gamma_1, gamma_2, ..."""

    table: tuple
    kind = "scripted"

    def __init__(self, table):
        object.__setattr__(self, "table", tuple(float(g) for g in table))

    def gammas(self, N):
        if N > len(self.table):
            raise ValueError(
                f"scripted schedule has {len(self.table)} steps, {N} requested")
        return np.array(self.table[:N], dtype=float)

    def to_dict(self):
        return {"kind": self.kind, "table": list(self.table)}


def family_from_dict(spec: dict) -> StepFamily:
    """Build a family from its config form, e.g. ``{"kind": "rational", "c": 2}``."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    allowed = {"rational": {"c"}, "power": {"a", "rho", "cap"}, "scripted": {"table"}}
    if kind not in allowed:
        raise ValueError(f"unknown step family kind {kind!r}")
    extra = set(spec) - allowed[kind]
    if extra:
        raise ValueError(f"unknown keys for {kind} schedule: {sorted(extra)}")
    if kind == "rational":
        return Rational(float(spec["c"]))
    if kind == "power":
        return Power(float(spec["a"]), float(spec["rho"]), float(spec.get("cap", 0.9)))
    return Scripted(spec["table"])


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PrefixTables:
    """gamma, Gamma, S, Delta and the square sums, each of length N + 1."""

    family: StepFamily
    gamma: np.ndarray
    Gamma: np.ndarray
    S: np.ndarray
    logS: np.ndarray
    Delta: np.ndarray
    sumsq: np.ndarray
    sumsq_corr: np.ndarray
    N: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "N", len(self.gamma) - 1)


def build_prefix(family: StepFamily, N: int) -> PrefixTables:
    if N < 1:
        raise ValueError("horizon must be at least 1")
    g = np.asarray(family.gammas(N), dtype=float)
    bad = np.flatnonzero(~((g > 0.0) & (g < 1.0)))
    if bad.size:
        k = int(bad[0]) + 1
        raise ValueError(f"gamma_{k} = {g[k - 1]!r} is outside (0, 1)")

    gamma = np.concatenate(([np.nan], g))
    Gamma = np.concatenate(([0.0], np.cumsum(g)))
    # divide.accumulate gives S_n = S_{n-1} / (1 - gamma_n) literally
    S = np.divide.accumulate(np.concatenate(([1.0], 1.0 - g)))
    logS = np.concatenate(([0.0], np.cumsum(-np.log1p(-g))))
    Delta = np.concatenate(([1.0], g * S[1:]))
    sumsq = np.concatenate(([0.0], np.cumsum(g * g)))
    sumsq_corr = np.concatenate(([0.0], np.cumsum(g * g / (1.0 - g))))
    return PrefixTables(
        family=family,
        gamma=_frozen(gamma),
        Gamma=_frozen(Gamma),
        S=_frozen(S),
        logS=_frozen(logS),
        Delta=_frozen(Delta),
        sumsq=_frozen(sumsq),
        sumsq_corr=_frozen(sumsq_corr),
    )


def prefix_identity_residuals(tables: PrefixTables) -> dict:
    """Worst relative residuals of S_n = sum_{k<=n} Delta_k and gamma_n = Delta_n / S_n.

    The running sum of Delta is accumulated in extended precision so the
    check does not share rounding with the recurrence that produced S.
    """
    Delta_ext = tables.Delta.astype(np.longdouble)
    partial = np.cumsum(Delta_ext)
    S_ext = tables.S.astype(np.longdouble)
    with np.errstate(over="ignore", invalid="ignore"):
        sum_res = np.abs(S_ext - partial) / S_ext
        gamma_res = np.abs(tables.gamma[1:] - tables.Delta[1:] / tables.S[1:]) / tables.gamma[1:]
    finite = np.isfinite(tables.S)
    sum_res = np.where(finite, sum_res, 0.0)
    return {
        "sum_delta": float(np.max(sum_res)),
        "sum_delta_at": int(np.argmax(sum_res)),
        "gamma_ratio": float(np.nanmax(gamma_res)) if gamma_res.size else 0.0,
    }


def _blocks(N: int, lo: int = 3):
    """Index ranges of the last two dyadic blocks, [N/4, N/2] and [N/2, N]."""
    prev = np.arange(max(N // 4, lo), N // 2 + 1)
    last = np.arange(max(N // 2, lo), N + 1)
    return prev, last


def check_s1(tables: PrefixTables) -> ConditionReport:
    """Nonincreasing steps with partial sums that keep growing.

    Divergence of Gamma cannot be decided at a finite horizon. Growth counts
    as sustained when the increment of Gamma over the last dyadic block is at
    least 3/4 of the increment over the previous one; geometric decay of the
    block increments (a convergent series) gives ``indeterminate``.
    """
    N = tables.N
    g = tables.gamma[1:]
    rises = np.flatnonzero(np.diff(g) > 0)
    if rises.size:
        k = int(rises[0]) + 2
        return ConditionReport("S1", N, FAIL, {
            "index": k, "gamma_prev": g[k - 2], "gamma": g[k - 1]})
    G = tables.Gamma
    last_inc = G[N] - G[N // 2]
    prev_inc = G[N // 2] - G[N // 4]
    growth_ratio = last_inc / prev_inc if prev_inc > 0 else math.inf
    witness = {"last_block_increment": last_inc, "prev_block_increment": prev_inc,
               "growth_ratio": growth_ratio, "Gamma_N": G[N]}
    if last_inc > 0 and growth_ratio >= 0.75:
        return ConditionReport("S1", N, PASS, witness)
    return ConditionReport("S1", N, INDETERMINATE, witness)


def s2_ratio(tables: PrefixTables, theta_B: float) -> np.ndarray:
    """gamma_n / (Gamma_n exp(-theta_B Gamma_n)), NaN for n < 3."""
    n = np.arange(tables.N + 1)
    out = np.full(tables.N + 1, np.nan)
    m = n >= 3
    G = tables.Gamma[m]
    out[m] = np.exp(np.log(tables.gamma[m]) + theta_B * G - np.log(G))
    return out


def check_s2(tables: PrefixTables, theta_B: float) -> ConditionReport:
    """Bounded-trend test for gamma_n = O(Gamma_n exp(-theta_B Gamma_n)).

    Compares the ratio's maximum over the last dyadic block with the block
    before it: within 5% is ``pass``; growth by 1.5x or more is ``fail``.
    """
    N = tables.N
    if N < 16:
        raise ValueError("check_s2 needs a horizon of at least 16")
    r = s2_ratio(tables, theta_B)
    prev, last = _blocks(N)
    prev_max = float(np.max(r[prev]))
    last_max = float(np.max(r[last]))
    witness = {"theta_B": theta_B, "prev_block_max": prev_max,
               "last_block_max": last_max, "growth": last_max / prev_max}
    if last_max <= prev_max * (1 + TREND_SLACK):
        return ConditionReport("S2", N, PASS, witness)
    if last_max >= 1.5 * prev_max:
        witness["index"] = int(last[np.argmax(r[last])])
        return ConditionReport("S2", N, FAIL, witness)
    return ConditionReport("S2", N, INDETERMINATE, witness)


def check_square_summable(tables: PrefixTables) -> ConditionReport:
    N = tables.N
    half = tables.sumsq[N // 2]
    tail = tables.sumsq[N] - half
    witness = {"tail_mass": tail, "sumsq_half": half, "sumsq_N": tables.sumsq[N]}
    if tail <= 0.05 * half:
        return ConditionReport("square_summable", N, PASS, witness)
    witness["index"] = N
    return ConditionReport("square_summable", N, FAIL, witness)


def check_sandwich(tables: PrefixTables) -> ConditionReport:
    """log S_n - sum gamma_k^2/(1-gamma_k) <= Gamma_n <= log S_n for all n."""
    N = tables.N
    G = tables.Gamma[1:]
    L = tables.logS[1:]
    tol = INEQ_TOL * np.maximum(1.0, L)
    upper_slack = L + tol - G
    lower_slack = G - (L - tables.sumsq_corr[1:]) + tol
    worst_upper = int(np.argmin(upper_slack))
    worst_lower = int(np.argmin(lower_slack))
    witness = {"worst_upper_slack": upper_slack[worst_upper],
               "worst_upper_at": worst_upper + 1,
               "worst_lower_slack": lower_slack[worst_lower],
               "worst_lower_at": worst_lower + 1}
    bad = np.flatnonzero((upper_slack < 0) | (lower_slack < 0))
    if bad.size:
        witness["index"] = int(bad[0]) + 1
        return ConditionReport("sandwich", N, FAIL, witness)
    return ConditionReport("sandwich", N, PASS, witness)


def check_lemma1_caps(tables: PrefixTables, theta_B: float) -> ConditionReport:
    """Final-block maxima of gamma_n n / log n and Gamma_n / log n against 1/theta_B."""
    N = tables.N
    if N < 100:
        raise ValueError("check_lemma1_caps needs a horizon of at least 100")
    _, last = _blocks(N)
    logn = np.log(last)
    step_ratio = tables.gamma[last] * last / logn
    sum_ratio = tables.Gamma[last] / logn
    cap = (1.0 / theta_B) * (1 + TREND_SLACK)
    witness = {"theta_B": theta_B, "cap": cap,
               "step_ratio_max": float(step_ratio.max()),
               "sum_ratio_max": float(sum_ratio.max())}
    if step_ratio.max() <= cap and sum_ratio.max() <= cap:
        return ConditionReport("lemma1_caps", N, PASS, witness)
    worst = step_ratio if step_ratio.max() > cap else sum_ratio
    witness["index"] = int(last[np.argmax(worst)])
    return ConditionReport("lemma1_caps", N, FAIL, witness)
