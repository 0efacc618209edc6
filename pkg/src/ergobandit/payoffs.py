"""Payoff bit streams per arm and their deviation statistics.

Every source is defined for all times: both arms advance one step per
round whether or not the arm was played.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._kernels import markov_bits
from .report import FAIL, INDETERMINATE, PASS, ConditionReport, HorizonOverrun

BITS = np.int8


class PayoffSource:
    """A stream of bits with a declared long-run mean."""

    def next_bit(self) -> int:
        return int(self.bits(1)[0])

    def bits(self, n: int) -> np.ndarray:
        """The next ``n`` bits, advancing the source by ``n`` steps."""
        raise NotImplementedError

    def nominal_mean(self) -> float:
        return self.theta


def _check_theta(theta):
    if not 0.0 < theta < 1.0:
        raise ValueError(f"nominal mean must lie in (0, 1), got {theta}")


class IidBernoulli(PayoffSource):
    def __init__(self, theta: float, rng: np.random.Generator):
        _check_theta(theta)
        self.theta = float(theta)
        self.rng = rng

    def bits(self, n):
        return (self.rng.random(n) < self.theta).astype(BITS)


class Rotation(PayoffSource):
    """Beatty bits floor(k theta) - floor((k-1) theta); partial sums stay within 1 of k theta."""

    def __init__(self, theta: float):
        _check_theta(theta)
        self.theta = float(theta)
        self.k = 0

    def bits(self, n):
        k = np.arange(self.k, self.k + n + 1, dtype=float)
        fl = np.floor(k * self.theta)
        self.k += n
        return np.diff(fl).astype(BITS)


class ScriptedPayoff(PayoffSource):
    def __init__(self, table, theta: float):
        _check_theta(theta)
        arr = np.asarray(table, dtype=BITS)
        if arr.size and not np.isin(arr, (0, 1)).all():
            raise ValueError("scripted payoffs must be 0/1")
        self.table = arr
        self.theta = float(theta)
        self.pos = 0

    @classmethod
    def from_file(cls, path, theta: float) -> "ScriptedPayoff":
        """Read a text file of 0/1 characters; whitespace is ignored."""
        text = Path(path).read_text(encoding="utf-8")
        chars = "".join(text.split())
        if set(chars) - {"0", "1"}:
            raise ValueError(f"{path}: only 0/1 characters are allowed")
        return cls([int(c) for c in chars], theta)

    def bits(self, n):
        if self.pos + n > self.table.size:
            raise HorizonOverrun(
                f"scripted source has {self.table.size} bits; step {self.pos + n} requested")
        out = self.table[self.pos:self.pos + n].copy()
        self.pos += n
        return out


def _reachable(adj: np.ndarray, start: int) -> np.ndarray:
    seen = np.zeros(adj.shape[0], dtype=bool)
    seen[start] = True
    stack = [start]
    while stack:
        i = stack.pop()
        for j in np.flatnonzero(adj[i] & ~seen):
            seen[j] = True
            stack.append(j)
    return seen


def stationary_law(P) -> np.ndarray:
    """Unique stationary distribution of an irreducible finite transition matrix."""
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
        raise ValueError("transition matrix must be square")
    if (P < 0).any() or np.abs(P.sum(axis=1) - 1.0).max() > 1e-12:
        raise ValueError("transition matrix must be row-stochastic")
    adj = P > 0
    if not _reachable(adj, 0).all() or not _reachable(adj.T.copy(), 0).all():
        raise ValueError("transition matrix is reducible; stationary law is not unique")
    k = P.shape[0]
    A = P.T - np.eye(k)
    A[-1, :] = 1.0
    rhs = np.zeros(k)
    rhs[-1] = 1.0
    pi = np.linalg.solve(A, rhs)
    return pi


def stationary_mean(P, target) -> float:
    pi = stationary_law(P)
    return float(sum(pi[s] for s in set(target)))


class MarkovIndicator(PayoffSource):
    """Bits 1{state in target} along a finite chain started from its stationary law."""

    def __init__(self, P, target, rng: np.random.Generator):
        self.P = np.asarray(P, dtype=float)
        k = self.P.shape[0]
        self.target = tuple(sorted(set(int(s) for s in target)))
        if not self.target or min(self.target) < 0 or max(self.target) >= k:
            raise ValueError(f"target states must be a nonempty subset of 0..{k - 1}")
        self.pi = stationary_law(self.P)
        self.theta = float(self.pi[list(self.target)].sum())
        _check_theta(self.theta)
        self.rng = rng
        self._cum = np.cumsum(self.P, axis=1)
        self._mask = np.zeros(k, dtype=BITS)
        self._mask[list(self.target)] = 1
        cum_pi = np.cumsum(self.pi)
        self.state = int(min(np.searchsorted(cum_pi, rng.random(), side="right"), k - 1))

    def bits(self, n):
        out, self.state = markov_bits(self._cum, self._mask, self.state, self.rng.random(n))
        return out


class DeviationTracker:
    """Running signed deviations kappa_n = sum_{k<=n} (eta_k - theta) for both arms.

    Counts are kept as integers so sum eta = kappa + n theta holds to rounding
    of a single subtraction.
    """

    def __init__(self, theta_A: float, theta_B: float):
        self.theta_A = float(theta_A)
        self.theta_B = float(theta_B)
        self._count_A = [0]
        self._count_B = [0]

    @classmethod
    def from_bits(cls, eta_A, eta_B, theta_A, theta_B) -> "DeviationTracker":
        tr = cls(theta_A, theta_B)
        tr._count_A = np.concatenate(([0], np.cumsum(eta_A, dtype=np.int64)))
        tr._count_B = np.concatenate(([0], np.cumsum(eta_B, dtype=np.int64)))
        return tr

    def update(self, a: int, b: int) -> None:
        if isinstance(self._count_A, np.ndarray):
            self._count_A = list(self._count_A)
            self._count_B = list(self._count_B)
        self._count_A.append(self._count_A[-1] + int(a))
        self._count_B.append(self._count_B[-1] + int(b))

    @property
    def n(self) -> int:
        return len(self._count_A) - 1

    @property
    def count_A(self) -> np.ndarray:
        return np.asarray(self._count_A, dtype=np.int64)

    @property
    def count_B(self) -> np.ndarray:
        return np.asarray(self._count_B, dtype=np.int64)

    @property
    def kappa_A(self) -> np.ndarray:
        return self.count_A - np.arange(self.n + 1) * self.theta_A

    @property
    def kappa_B(self) -> np.ndarray:
        return self.count_B - np.arange(self.n + 1) * self.theta_B

    @property
    def R(self) -> np.ndarray:
        return np.maximum(np.abs(self.kappa_A), np.abs(self.kappa_B))

    def history(self, stride: int = 1) -> np.ndarray:
        """(n, R_n) rows every ``stride`` steps, always including the last."""
        idx = np.unique(np.r_[np.arange(0, self.n + 1, stride), self.n])
        return np.column_stack((idx, self.R[idx]))


def next_pair(source_A: PayoffSource, source_B: PayoffSource,
              tracker: DeviationTracker | None = None) -> tuple[int, int]:
    a = source_A.next_bit()
    b = source_B.next_bit()
    if tracker is not None:
        tracker.update(a, b)
    return a, b


@dataclass(frozen=True)
class RateEnvelope:
    """The rate function phi: ``linear`` (phi(n) = n) or ``logpower`` (n / log(n+2)^(1+eps))."""

    kind: str = "logpower"
    eps: float = 1.0
    window: int = 10_000
    k0: int = field(init=False)

    def __post_init__(self):
        if self.kind not in ("linear", "logpower"):
            raise ValueError(f"unknown envelope kind {self.kind!r}")
        if self.kind == "logpower" and not self.eps > 0:
            raise ValueError("logpower envelope needs eps > 0")
        object.__setattr__(self, "k0", self._find_k0())

    def phi(self, n):
        n = np.asarray(n, dtype=float)
        if self.kind == "linear":
            return n * 1.0
        return n / np.log(n + 2.0) ** (1.0 + self.eps)

    def dphi_dx(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "linear":
            return np.ones_like(x)
        L = np.log(x + 2.0)
        e = self.eps
        return L ** -(1 + e) - (1 + e) * x / ((x + 2.0) * L ** (2 + e))

    def d2phi_dx2(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "linear":
            return np.zeros_like(x)
        L = np.log(x + 2.0)
        e = self.eps
        return (1 + e) / ((x + 2.0) * L ** (2 + e)) * (
            -2.0 + x / (x + 2.0) * (1.0 + (2 + e) / L))

    def phi_prime(self, n):
        n = np.asarray(n)
        return self.phi(n) - self.phi(n - 1)

    def phi_second(self, n):
        n = np.asarray(n)
        return self.phi(n - 1) + self.phi(n + 1) - 2.0 * self.phi(n)

    def _find_k0(self) -> int:
        # last index in the window where the discrete shape fails, then one past it
        n = np.arange(1, self.window + 1)
        bad = (self.phi_prime(n) < 0) | (self.phi_second(n) > 0)
        k_disc = int(n[bad][-1]) + 1 if bad.any() else 1
        # continuous cross-check on [k - 1, k + 1] around each point
        xs = np.linspace(0.0, self.window + 1.0, 8 * (self.window + 1) + 1)
        cbad = self.d2phi_dx2(xs) > 0
        k_cont = int(math.floor(xs[cbad][-1])) + 2 if cbad.any() else 1
        return max(k_disc, k_cont)


def phi_eval(envelope: RateEnvelope, n: int) -> dict:
    return {
        "phi": float(envelope.phi(n)),
        "phi_prime": float(envelope.phi_prime(n)),
        "phi_second": float(envelope.phi_second(n)),
    }


@dataclass(frozen=True, eq=False)
class DeviationStats:
    """R_n, alpha_n = R_n / phi(n), and beta_n = max_{n<=k<=horizon} alpha_k.

    beta is a truncated supremum: it only sees indices up to ``horizon``.
    ``start`` is the first index used by the trend checks.
    """

    R: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    horizon: int
    start: int
    envelope: RateEnvelope


def deviation_stats(tracker: DeviationTracker, envelope: RateEnvelope,
                    horizon: int | None = None) -> DeviationStats:
    horizon = tracker.n if horizon is None else int(horizon)
    if tracker.n < horizon:
        raise ValueError(f"tracker holds {tracker.n} steps, horizon {horizon} requested")
    R = tracker.R[: horizon + 1]
    n = np.arange(1, horizon + 1)
    phi = envelope.phi(n)
    if (phi <= 0).any():
        k = int(n[phi <= 0][0])
        raise ValueError(f"phi({k}) = 0; alpha is undefined there")
    alpha = np.empty(horizon + 1)
    alpha[0] = np.nan
    alpha[1:] = R[1:] / phi
    beta = np.empty(horizon + 1)
    beta[0] = np.nan
    beta[1:] = np.maximum.accumulate(alpha[1:][::-1])[::-1]
    return DeviationStats(R=R, alpha=alpha, beta=beta, horizon=horizon,
                          start=max(envelope.k0, 3), envelope=envelope)


def check_e_phi(stats: DeviationStats) -> ConditionReport:
    """Decay of alpha across the last two dyadic blocks.

    ``pass`` when the last block's maximum is at most 0.9 of the previous
    block's (or below 1e-3); ``fail`` when it did not decrease. Random sources
    can rise over one block by chance, so a single ``fail`` on them is a trend
    reading, not a proof.
    """
    N = stats.horizon
    if N < 1000:
        raise ValueError("check_e_phi needs a horizon of at least 1000")
    prev = np.arange(max(N // 4, stats.start), N // 2 + 1)
    last = np.arange(max(N // 2, stats.start), N + 1)
    prev_max = float(stats.alpha[prev].max())
    last_max = float(stats.alpha[last].max())
    witness = {"prev_block_max": prev_max, "last_block_max": last_max,
               "envelope": stats.envelope.kind, "truncated_at": N}
    if last_max <= 1e-3 or last_max <= 0.9 * prev_max:
        return ConditionReport("E_phi", N, PASS, witness)
    if last_max >= prev_max:
        witness["index"] = int(last[np.argmax(stats.alpha[last])])
        return ConditionReport("E_phi", N, FAIL, witness)
    return ConditionReport("E_phi", N, INDETERMINATE, witness)
