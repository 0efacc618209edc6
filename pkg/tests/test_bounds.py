import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ergobandit import bounds
from ergobandit.bandit import BanditConfig, run
from ergobandit.payoffs import (DeviationTracker, IidBernoulli, RateEnvelope, Rotation,
                                deviation_stats)
from ergobandit.report import InternalConsistencyError
from ergobandit.schedule import Rational, build_prefix

N = 20_000
TAB = build_prefix(Rational(2), N + 1)
ENV = RateEnvelope()


@pytest.fixture(scope="module")
def rotation_run():
    return run(BanditConfig(TAB, Rotation(0.7), Rotation(0.4), 0.5, N,
                            np.random.default_rng(4), keep_full=True))


@given(st.lists(st.integers(0, 1), min_size=1, max_size=40),
       st.fractions(Fraction(1, 10), Fraction(9, 10)), st.data())
@settings(max_examples=150, deadline=None)
def test_abel_transform_is_exact_in_rationals(bits, theta, data):
    n = len(bits)
    m = data.draw(st.integers(0, n))
    n = data.draw(st.integers(m, n))
    xi = [None] + [Fraction(1, k + 1) for k in range(1, len(bits) + 1)]
    eta = [None] + bits
    direct = sum((xi[k] * (eta[k] - theta) for k in range(m + 1, n + 1)), Fraction(0))
    assert bounds.abel_transform(xi, eta, theta, m, n) == direct


def test_weights_and_rejection_of_rising_weights():
    xi = bounds.weights("gamma_over_Gamma", TAB, 10)
    assert np.isnan(xi[0])
    assert xi[1] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        bounds.weights("sqrt", TAB, 10)
    from ergobandit.schedule import Scripted
    rising = build_prefix(Scripted([0.1, 0.2, 0.1]), 3)
    with pytest.raises(ValueError, match="rises at index 2"):
        bounds.phi_dev("gamma", "A", [1, 0, 1], 0.5, rising, 3)


def test_sample_pairs_cover_adjacent_and_respect_window():
    p = bounds.sample_pairs(3, 50, count=500, seed=1)
    assert len(p) == 500 + 47
    assert (p[:, 0] >= 3).all() and (p[:, 1] <= 50).all() and (p[:, 0] <= p[:, 1]).all()
    assert np.array_equal(bounds.sample_pairs(3, 50, 500, 1), p)


@pytest.mark.parametrize("w", ["gamma", "gamma_over_Gamma"])
@pytest.mark.parametrize("arm", ["A", "B"])
def test_abel1_rotation_has_no_violations(rotation_run, w, arm):
    F = rotation_run.full
    eta, th = (F["eta_A"][1:], 0.7) if arm == "A" else (F["eta_B"][1:], 0.4)
    dev = bounds.phi_dev(w, arm, eta, th, TAB, N)
    stats = deviation_stats(rotation_run.tracker, ENV, N)
    r = bounds.abel1_verify(dev, ENV, stats, bounds.sample_pairs(ENV.k0, N // 2, 10_000))
    assert r.verdict == "pass", r.witness
    assert r.witness["violations"] == 0


def test_abel1_catches_an_understated_envelope(rotation_run):
    F = rotation_run.full
    dev = bounds.phi_dev("gamma", "A", F["eta_A"][1:], 0.7, TAB, N)
    stats = deviation_stats(rotation_run.tracker, ENV, N)
    shrunk = type(stats)(stats.R, stats.alpha / 100, stats.beta / 100, stats.horizon,
                         stats.start, ENV)
    r = bounds.abel1_verify(dev, ENV, shrunk, bounds.sample_pairs(1, N // 2, 2000))
    assert r.verdict == "fail" and len(r.witness["index"]) == 2


def test_abel1_rejects_pairs_outside_window(rotation_run):
    F = rotation_run.full
    dev = bounds.phi_dev("gamma", "A", F["eta_A"][1:], 0.7, TAB, N)
    stats = deviation_stats(rotation_run.tracker, ENV, N)
    with pytest.raises(ValueError):
        bounds.abel1_verify(dev, ENV, stats, np.array([[5, N // 2 + 1]]))


def test_psi_telescoping_oracle():
    # oracle: sum_{k>n} gamma_k / S_{k-1} = 1/S_n - 1/S_N for any schedule
    # with eta_A = 1, eta_B = 0 and equal thetas every d_k is 1
    t = bounds.psi_table(np.ones(N), np.zeros(N), 0.5, 0.5, TAB, N)
    for n in (0, 1, 10, 5000, N - 1):
        assert t.values[n] == pytest.approx(1 / TAB.S[n] - 1 / TAB.S[N], rel=1e-10)
    assert t.values[N] == 0.0
    assert t.tail_bound == pytest.approx(2 / ((1 - TAB.gamma[N + 1]) * TAB.S[N]))
    assert bounds.psi(3, np.ones(N), np.zeros(N), 0.5, 0.5, TAB, N).value == t.values[3]


def test_psi_and_lambda_bounds_pass_on_rotation(rotation_run):
    F = rotation_run.full
    stats = deviation_stats(rotation_run.tracker, ENV, N)
    t = bounds.psi_table(F["eta_A"][1:], F["eta_B"][1:], 0.7, 0.4, TAB, N)
    assert bounds.psi_bound_verify(t, stats, TAB).verdict == "pass"
    rp = bounds.r_prime(stats, TAB)
    pairs = bounds.sample_pairs(1, N // 2, 10_000, seed=3)
    r = bounds.lambda_increment_verify(F["Lambda"], F["X"], F["sum_gf"], rp, pairs, N=N)
    assert r.verdict == "pass", r.witness


def test_psi_identity_residual_small(rotation_run):
    F = rotation_run.full
    t = bounds.psi_table(F["eta_A"][1:], F["eta_B"][1:], 0.7, 0.4, TAB, N)
    for m, n in ((0, 100), (5, 5000), (1000, N)):
        assert bounds.psi_identity_residual(F["Lambda"], F["X"], F["S"], t, m, n) < 1e-10


def test_esta_decompsum_and_corruption(rotation_run):
    F = rotation_run.full
    r = bounds.esta_and_decompsum_verify(F, 0.4)
    assert r.verdict == "pass"
    assert r.witness["decompsum_residual"] <= 1e-10
    bad = dict(F)
    bad["B_win"] = F["B_win"].copy()
    bad["B_win"][10] ^= 1
    with pytest.raises(InternalConsistencyError):
        bounds.esta_and_decompsum_verify(bad, 0.4)


def test_gamma_tail_bound():
    big = build_prefix(Rational(2), 10**5)
    assert bounds.gamma_tail_bound_verify(big, 0.4).verdict == "pass"
    r = bounds.gamma_tail_bound_verify(build_prefix(Rational(5), 10**5), 0.4)
    assert r.verdict == "indeterminate" and r.witness["not_applicable"]


def test_abel2_cauchy_on_iid():
    rng = np.random.default_rng(0)
    eta = IidBernoulli(0.7, rng).bits(N)
    dev = bounds.phi_dev("gamma", "A", eta, 0.7, TAB, N)
    assert bounds.abel2_cauchy_verify(dev).verdict in ("pass", "indeterminate")
    with pytest.raises(ValueError):
        bounds.abel2_cauchy_verify(bounds.phi_dev("gamma", "A", eta[:500], 0.7, TAB, 500))


def test_direct_sum_matches_phi_dev():
    eta = Rotation(0.3).bits(300)
    dev = bounds.phi_dev("gamma", "A", eta, 0.3, TAB, 300)
    direct = math.fsum(TAB.gamma[k] * (eta[k - 1] - 0.3) for k in range(1, 301))
    assert dev.values[300] == pytest.approx(direct, abs=1e-13)
    tr = DeviationTracker.from_bits(eta, eta, 0.3, 0.3)
    assert tr.R.max() <= 1
