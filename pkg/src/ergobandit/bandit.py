"""The linear reward-inaction update, its exact decomposition, and brake diagnostics.

``X`` is the probability of playing arm A. With ``f(x) = x (1 - x)``,

    X_n = x + M_n + Lambda_n + (theta_A - theta_B) * sum_k gamma_k f(X_{k-1})

holds identically, where M is a martingale with increments ``gamma_k * eps_k``
and Lambda collects the payoff deviations from their nominal means.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import reward_inaction_path
from .payoffs import DeviationTracker, PayoffSource
from .report import FAIL, PASS, ConditionReport, InternalConsistencyError
from .schedule import PrefixTables

DECOMP_TOL = 1e-8
YNB_RTOL = 1e-10
DENSE_PREFIX = 10_000
TRAJECTORY_COLUMNS = ("n", "X", "M", "Lambda", "drift", "S", "S_B", "Y_B", "T_B", "R_n")


def f(x):
    return x * (1.0 - x)


def epsilon(eta_A, eta_B, x_prev, played_A):
    """Martingale increment for one step (vectorizes over numpy arrays)."""
    ia = np.asarray(played_A, dtype=float)
    return (eta_A * (1.0 - x_prev) * (ia - x_prev)
            + eta_B * x_prev * ((1.0 - x_prev) - (1.0 - ia)))


def branch_moments(eta_A, eta_B, x_prev):
    """Conditional mean and second moment of eps given the pre-step state."""
    e_a = epsilon(eta_A, eta_B, x_prev, True)
    e_b = epsilon(eta_A, eta_B, x_prev, False)
    mean = x_prev * e_a + (1.0 - x_prev) * e_b
    second = x_prev * e_a ** 2 + (1.0 - x_prev) * e_b ** 2
    return mean, second


@dataclass(frozen=True)
class StepTrace:
    n: int
    I: float
    U: str
    eta_A: int
    eta_B: int
    X: float


@dataclass
class BanditState:
    X: float
    rng: np.random.Generator | None = None
    n: int = 0

    def __post_init__(self):
        if not 0.0 <= self.X <= 1.0:
            raise ValueError(f"X must lie in [0, 1], got {self.X}")


def step(state: BanditState, gamma: float, eta_A: int, eta_B: int,
         I: float | None = None) -> StepTrace:
    """One update. Arm A is played when I <= X (ties go to A)."""
    if I is None:
        I = float(state.rng.random())
    x = state.X
    U = "A" if I <= x else "B"
    if U == "A" and eta_A == 1:
        x = x + gamma * (1.0 - x)
    elif U == "B" and eta_B == 1:
        x = (1.0 - gamma) * x
    state.X = x
    state.n += 1
    return StepTrace(state.n, I, U, int(eta_A), int(eta_B), x)


@dataclass
class Decomposition:
    x0: float
    M: float = 0.0
    Lambda: float = 0.0
    drift: float = 0.0
    sum_gf: float = 0.0

    @property
    def total(self) -> float:
        return self.x0 + self.M + self.Lambda + self.drift


def decompose_step(decomp: Decomposition, trace: StepTrace, gamma: float,
                   theta_A: float, theta_B: float, X_prev: float) -> Decomposition:
    eps = epsilon(trace.eta_A, trace.eta_B, X_prev, trace.U == "A")
    fx = f(X_prev)
    decomp.M += gamma * eps
    decomp.Lambda += gamma * fx * ((trace.eta_A - trace.eta_B) - (theta_A - theta_B))
    decomp.drift += (theta_A - theta_B) * gamma * fx
    decomp.sum_gf += gamma * fx
    resid = abs(trace.X - decomp.total)
    if resid > DECOMP_TOL:
        raise InternalConsistencyError(
            f"decomposition residual {resid:.3e} at step {trace.n}")
    return decomp


@dataclass
class BrakeDiagnostics:
    """S_B: product of 1/(1 - gamma_k) over steps where B was played and won.

    Y_B starts at x0 and only moves on A-wins, by gamma_k S_B (1 - X_{k-1}).
    """

    x0: float
    S_B: float = 1.0
    Y_B: float = float("nan")
    T_B: float = 1.0

    def __post_init__(self):
        if math.isnan(self.Y_B):
            self.Y_B = self.x0


def brake_step(diag: BrakeDiagnostics, trace: StepTrace, gamma: float,
               Gamma_n: float, theta_B: float, X_prev: float) -> BrakeDiagnostics:
    if trace.U == "B" and trace.eta_B == 1:
        diag.S_B = diag.S_B / (1.0 - gamma)
    elif trace.U == "A" and trace.eta_A == 1:
        diag.Y_B = diag.Y_B + gamma * diag.S_B * (1.0 - X_prev)
    diag.T_B = math.exp(theta_B * Gamma_n)
    resid = abs(diag.S_B * trace.X - diag.Y_B) / diag.Y_B
    if resid > YNB_RTOL:
        raise InternalConsistencyError(
            f"Y_B = S_B X broken by {resid:.3e} at step {trace.n}")
    return diag


@dataclass
class BanditConfig:
    tables: PrefixTables
    source_A: PayoffSource
    source_B: PayoffSource
    x0: float
    horizon: int
    rng: np.random.Generator
    theta_A: float | None = None
    theta_B: float | None = None
    stride: int | None = None
    dense: int = DENSE_PREFIX
    keep_full: bool = False

    def __post_init__(self):
        if not 0.0 < self.x0 < 1.0:
            raise ValueError(f"x0 must lie in (0, 1), got {self.x0}")
        if self.horizon < 0:
            raise ValueError("horizon must be nonnegative")
        if self.horizon > self.tables.N:
            raise ValueError(
                f"step tables cover {self.tables.N} steps, horizon is {self.horizon}")
        if self.theta_A is None:
            self.theta_A = self.source_A.nominal_mean()
        if self.theta_B is None:
            self.theta_B = self.source_B.nominal_mean()


@dataclass(eq=False)
class RunRecord:
    """Result of one run.

    ``trajectory`` holds strided samples of TRAJECTORY_COLUMNS; ``dense``
    holds every step of the first ``dense_len`` steps (plus I, played_A,
    B_win and the payoff bits). ``full`` is the same over the whole run,
    present only when requested.
    """

    x0: float
    theta_A: float
    theta_B: float
    horizon: int
    X_final: float
    decomposition: Decomposition
    brake: BrakeDiagnostics
    trajectory: dict[str, np.ndarray]
    dense: dict[str, np.ndarray]
    invariants: dict[str, float]
    tracker: DeviationTracker
    tables: PrefixTables
    ratio_log: np.ndarray
    full: dict[str, np.ndarray] | None = None


def sample_indices(N: int, stride: int | None) -> np.ndarray:
    if stride is None:
        stride = max(1, math.ceil(N / 10_000))
    return np.unique(np.r_[np.arange(0, N + 1, stride), N])


def run(config: BanditConfig) -> RunRecord:
    N = config.horizon
    tab = config.tables
    eta_A = config.source_A.bits(N)
    eta_B = config.source_B.bits(N)
    I = config.rng.random(N)
    gamma = np.array(tab.gamma[: N + 1])
    Gamma = np.array(tab.Gamma[: N + 1])
    S = np.array(tab.S[: N + 1])
    X, M, Lam, drift, sum_gf, S_B, Y_B, played_A, B_win, decomp, ynb = reward_inaction_path(
        gamma, Gamma, S, eta_A, eta_B, I, config.x0, config.theta_A, config.theta_B)

    worst_decomp = float(decomp.max())
    if worst_decomp > DECOMP_TOL:
        k = int(np.argmax(decomp))
        raise InternalConsistencyError(f"decomposition residual {worst_decomp:.3e} at step {k}")
    worst_ynb = float(ynb.max())
    if worst_ynb > YNB_RTOL:
        k = int(np.argmax(ynb))
        raise InternalConsistencyError(f"Y_B = S_B X broken by {worst_ynb:.3e} at step {k}")

    tracker = DeviationTracker.from_bits(eta_A, eta_B, config.theta_A, config.theta_B)
    R = tracker.R
    T_B = np.exp(config.theta_B * Gamma)
    with np.errstate(divide="ignore", invalid="ignore"):
        floor_S = config.x0 / S
        floor_SB = config.x0 / S_B
    invariants = {
        "decomposition_residual": worst_decomp,
        "ynb_residual": worst_ynb,
        "X_min": float(X.min()),
        "X_max": float(X.max()),
        "Y_B_minus_x0_min": float((Y_B - config.x0).min()),
        "S_B_over_S_max": float(np.max(S_B / S)),
        "S_B_le_S": bool((S_B <= S).all()),
        "floor_S_slack_min": float(np.min(X - floor_S * (1 - 1e-12))),
        "floor_SB_slack_min": float(np.min(X - floor_SB * (1 - 1e-12))),
    }

    cols = {"n": np.arange(N + 1), "X": X, "M": M, "Lambda": Lam, "drift": drift,
            "S": S, "S_B": S_B, "Y_B": Y_B, "T_B": T_B, "R_n": R}
    idx = sample_indices(N, config.stride)
    trajectory = {k: v[idx] for k, v in cols.items()}
    extra = {"sum_gf": sum_gf, "gamma": gamma, "Gamma": Gamma,
             "I": np.r_[np.nan, I], "played_A": played_A, "B_win": B_win,
             "eta_A": np.r_[0, eta_A].astype(np.int8),
             "eta_B": np.r_[0, eta_B].astype(np.int8)}
    full_cols = {**cols, **extra}
    d = min(N, config.dense)
    dense = {k: v[: d + 1] for k, v in full_cols.items()}

    with np.errstate(divide="ignore", invalid="ignore"):
        logSB = np.log(S_B[idx])
        ratio_log = np.column_stack((idx, X[idx] * S_B[idx] / logSB, S_B[idx] / T_B[idx]))

    return RunRecord(
        x0=config.x0, theta_A=config.theta_A, theta_B=config.theta_B, horizon=N,
        X_final=float(X[N]),
        decomposition=Decomposition(config.x0, float(M[N]), float(Lam[N]),
                                    float(drift[N]), float(sum_gf[N])),
        brake=BrakeDiagnostics(config.x0, float(S_B[N]), float(Y_B[N]), float(T_B[N])),
        trajectory=trajectory, dense=dense, invariants=invariants, tracker=tracker,
        tables=tab, ratio_log=ratio_log,
        full=full_cols if config.keep_full else None,
    )


@dataclass(frozen=True)
class MeanFieldConfig:
    theta_A: float
    theta_B: float
    x0: float

    def __post_init__(self):
        for name in ("theta_A", "theta_B", "x0"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")


def mean_field_trajectory(config: MeanFieldConfig, tables: PrefixTables, N: int) -> np.ndarray:
    """x_{n+1} = x_n + gamma_{n+1} (theta_A - theta_B) x_n (1 - x_n)."""
    if N < 1 or N > tables.N:
        raise ValueError(f"need 1 <= N <= {tables.N}")
    h = config.theta_A - config.theta_B
    x = np.empty(N + 1)
    x[0] = xn = config.x0
    g = tables.gamma
    for n in range(1, N + 1):
        xn = xn + g[n] * h * xn * (1.0 - xn)
        x[n] = xn
    return x


def check_sf_monotone(X: np.ndarray, S: np.ndarray, gamma: np.ndarray) -> ConditionReport:
    """S_k f(X_k) nondecreasing and f(X_k) >= (1 - gamma_k) f(X_{k-1}) along a dense window.

    Arrays are indexed from step 0; ``gamma[0]`` is ignored.
    """
    n = len(X) - 1
    fx = f(X)
    sf = S * fx
    drop = sf[:-1] - sf[1:] - 1e-12 * S[1:]
    sharp = (1.0 - gamma[1:]) * fx[:-1] - fx[1:] - 1e-12
    witness = {"worst_sf_drop": float(drop.max()) if n else 0.0,
               "worst_sharp_drop": float(sharp.max()) if n else 0.0}
    bad = np.flatnonzero((drop > 0) | (sharp > 0))
    if bad.size:
        witness["index"] = int(bad[0]) + 1
        return ConditionReport("sf_monotone", n, FAIL, witness)
    return ConditionReport("sf_monotone", n, PASS, witness)
