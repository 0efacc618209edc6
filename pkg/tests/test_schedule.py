import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ergobandit.schedule import (
    Power, Rational, Scripted, build_prefix, check_lemma1_caps, check_s1, check_s2,
    check_sandwich, check_square_summable, family_from_dict, prefix_identity_residuals,
)

GEOMETRIC = Scripted([2.0 ** -n for n in range(1, 31)])


def test_rational_c1_two_steps():
    t = build_prefix(Rational(1), 2)
    np.testing.assert_allclose(t.gamma[1:], [1 / 2, 1 / 3])
    np.testing.assert_allclose(t.Gamma, [0, 0.5, 0.5 + 1 / 3])
    np.testing.assert_allclose(t.S, [1, 2, 3])
    np.testing.assert_allclose(t.Delta, [1, 1, 1])
    assert t.Delta.sum() == pytest.approx(t.S[2])


def test_scripted_single_half_step():
    t = build_prefix(Scripted([0.5]), 1)
    assert t.S[1] == 2.0
    assert t.Delta[1] == 1.0
    assert t.Gamma[1] == 0.5


def test_tables_are_read_only():
    t = build_prefix(Rational(2), 10)
    with pytest.raises(ValueError):
        t.S[3] = 0.0


@pytest.mark.parametrize("table", [[0.5, 1.0], [0.0], [-0.1], [1.2]])
def test_rejects_steps_outside_unit_interval(table):
    with pytest.raises(ValueError):
        build_prefix(Scripted(table), len(table))


def test_power_cap_keeps_steps_below_one():
    t = build_prefix(Power(3.0, 0.75), 100)
    assert t.gamma[1] == 0.9
    assert (t.gamma[1:] < 1).all()


def test_family_from_dict_rejects_unknown_keys():
    assert family_from_dict({"kind": "rational", "c": 2}) == Rational(2.0)
    with pytest.raises(ValueError):
        family_from_dict({"kind": "rational", "c": 2, "d": 1})
    with pytest.raises(ValueError):
        family_from_dict({"kind": "cosine"})


def test_delta_sum_identity_rational_c2_extended_oracle():
    t = build_prefix(Rational(2), 10**5)
    # oracle: exact closed form S_n = (n+1)(n+2)/2 for c = 2, and an fsum of Delta
    n = np.arange(t.N + 1, dtype=float)
    np.testing.assert_allclose(t.S, (n + 1) * (n + 2) / 2, rtol=1e-10)
    for k in (1, 10, 1234, 99_999, 10**5):
        assert abs(math.fsum(t.Delta[: k + 1]) - t.S[k]) / t.S[k] <= 1e-10
    res = prefix_identity_residuals(t)
    assert res["sum_delta"] <= 1e-10
    assert res["gamma_ratio"] <= 1e-10


def test_recurrence_is_literal():
    t = build_prefix(Rational(0.5), 1000)
    for n in (1, 2, 500, 1000):
        assert t.S[n] == t.S[n - 1] / (1.0 - t.gamma[n])


@given(st.lists(st.floats(0.001, 0.95), min_size=1, max_size=60))
@settings(max_examples=100, deadline=None)
def test_prefix_invariants_hold_for_any_steps(steps):
    t = build_prefix(Scripted(sorted(steps, reverse=True)), len(steps))
    res = prefix_identity_residuals(t)
    assert res["sum_delta"] <= 1e-10
    assert res["gamma_ratio"] <= 1e-10
    assert check_sandwich(t).passed


def test_s1_verdicts():
    assert check_s1(build_prefix(Rational(1), 10**4)).verdict == "pass"
    r = check_s1(build_prefix(Scripted([0.5, 0.6]), 2))
    assert r.verdict == "fail" and r.witness["index"] == 2
    r = check_s1(build_prefix(GEOMETRIC, 30))
    assert r.verdict == "indeterminate"
    assert r.witness["growth_ratio"] < 0.01


def test_s2_rational_classification():
    big = 10**5
    r = check_s2(build_prefix(Rational(2), big), 0.4)
    assert r.verdict == "pass"
    r = check_s2(build_prefix(Rational(5), big), 0.4)
    assert r.verdict == "fail" and "index" in r.witness
    # c * theta_B = 1 exactly; ratio ~ 1/log n
    assert check_s2(build_prefix(Rational(2.5), big), 0.4).verdict in ("pass", "indeterminate")


def test_s2_ratio_decreasing_for_c2_matches_closed_form_trend():
    # oracle: ratio_n ~ n^-0.2 / log n up to constants, so it halves slowly
    from ergobandit.schedule import s2_ratio
    t = build_prefix(Rational(2), 10**5)
    r = s2_ratio(t, 0.4)
    assert np.all(np.diff(r[100:]) < 0)


def test_s2_grid_iff_c_theta_at_most_one():
    grid_c = (0.5, 1, 2, 2.5, 3, 5)
    grid_theta = (0.2, 0.4, 0.8)
    tables = {c: build_prefix(Rational(c), 10**5) for c in grid_c}
    for c in grid_c:
        for th in grid_theta:
            s2 = check_s2(tables[c], th)
            caps = check_lemma1_caps(tables[c], th)
            if math.isclose(c * th, 1.0):
                assert s2.verdict in ("pass", "indeterminate")
            elif c * th < 1:
                assert s2.verdict == "pass", (c, th)
            else:
                assert s2.verdict != "pass", (c, th)
            # a pass on S2 must imply a pass on the caps check
            assert not (s2.verdict == "pass" and caps.verdict == "fail"), (c, th)


def test_square_summable():
    assert check_square_summable(build_prefix(Rational(1), 10**5)).verdict == "pass"
    assert check_square_summable(build_prefix(Power(0.9, 0.5), 10**5)).verdict == "fail"
    assert check_square_summable(build_prefix(GEOMETRIC, 30)).verdict == "pass"


def test_sandwich_hand_values():
    t = build_prefix(Scripted([0.5]), 1)
    assert math.log(2) - 0.5 <= t.Gamma[1] <= math.log(2)
    assert check_sandwich(t).passed
    t = build_prefix(Rational(1), 2)
    assert t.logS[2] == pytest.approx(math.log(3))
    assert t.sumsq_corr[2] == pytest.approx(0.5 + (1 / 9) / (2 / 3))
    assert check_sandwich(t).passed


def test_sandwich_full_scan_c2():
    assert check_sandwich(build_prefix(Rational(2), 10**6)).passed


def test_lemma1_caps():
    assert check_lemma1_caps(build_prefix(Rational(2), 10**5), 0.4).verdict == "pass"
    r = check_lemma1_caps(build_prefix(Rational(5), 10**5), 0.4)
    assert r.verdict == "fail"
    assert r.witness["sum_ratio_max"] > 2.5


def test_lemma1_caps_geometric():
    table = [2.0 ** -n for n in range(1, 201)]
    assert check_lemma1_caps(build_prefix(Scripted(table), 200), 0.5).verdict == "pass"
