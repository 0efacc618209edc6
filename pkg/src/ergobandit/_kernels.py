"""Compiled inner loops. Everything here is a pure function of its arrays."""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def markov_bits(cum, target_mask, state, u):
    """Advance a finite chain len(u) steps; return indicator bits and final state.

    ``cum`` holds row-wise cumulative transition probabilities.
    """
    n = u.shape[0]
    k = cum.shape[1]
    out = np.empty(n, dtype=np.int8)
    for i in range(n):
        row = cum[state]
        j = 0
        while j < k - 1 and u[i] >= row[j]:
            j += 1
        state = j
        out[i] = target_mask[state]
    return out, state


@njit(cache=True, nogil=True)
def reward_inaction_path(gamma, Gamma, S, eta_A, eta_B, I, x0, theta_A, theta_B):
    """Run the reward-inaction update over gamma[1..N] and every accumulator.

    Arrays returned have length N + 1 with index 0 at the initial state:
    X, M, Lam, drift, sum_gf, S_B, Y_B (kept by its additive recurrence),
    played_A and B_win flags (index 0 unused), and the per-step residuals
    of the decomposition identity and of Y_B against S_B * X.
    """
    N = gamma.shape[0] - 1
    dtheta = theta_A - theta_B
    X = np.empty(N + 1)
    M = np.empty(N + 1)
    Lam = np.empty(N + 1)
    drift = np.empty(N + 1)
    sum_gf = np.empty(N + 1)
    S_B = np.empty(N + 1)
    Y_B = np.empty(N + 1)
    played_A = np.zeros(N + 1, dtype=np.int8)
    B_win = np.zeros(N + 1, dtype=np.int8)
    decomp_res = np.zeros(N + 1)
    ynb_res = np.zeros(N + 1)

    X[0] = x0
    M[0] = 0.0
    Lam[0] = 0.0
    drift[0] = 0.0
    sum_gf[0] = 0.0
    S_B[0] = 1.0
    Y_B[0] = x0
    for k in range(1, N + 1):
        g = gamma[k]
        xp = X[k - 1]
        a = eta_A[k - 1]
        b = eta_B[k - 1]
        is_A = I[k - 1] <= xp
        sb = S_B[k - 1]
        y = Y_B[k - 1]
        if is_A:
            played_A[k] = 1
            if a == 1:
                xn = xp + g * (1.0 - xp)
                # Y_B gains Delta^B_k (1 - X_{k-1}); S_B unchanged on this step
                y = y + g * sb * (1.0 - xp)
            else:
                xn = xp
            eps = a * (1.0 - xp) * (1.0 - xp) + b * xp * (1.0 - xp)
        else:
            if b == 1:
                xn = (1.0 - g) * xp
                sb = sb / (1.0 - g)
                B_win[k] = 1
            else:
                xn = xp
            eps = a * (1.0 - xp) * (0.0 - xp) + b * xp * ((1.0 - xp) - 1.0)
        f = xp * (1.0 - xp)
        X[k] = xn
        M[k] = M[k - 1] + g * eps
        Lam[k] = Lam[k - 1] + g * f * ((a - b) - dtheta)
        drift[k] = drift[k - 1] + dtheta * g * f
        sum_gf[k] = sum_gf[k - 1] + g * f
        S_B[k] = sb
        Y_B[k] = y
        decomp_res[k] = abs(xn - (x0 + M[k] + Lam[k] + drift[k]))
        ynb_res[k] = abs(sb * xn - y) / y
    return X, M, Lam, drift, sum_gf, S_B, Y_B, played_A, B_win, decomp_res, ynb_res
