import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from benignlab import bounds
from benignlab.complexity import expected_max_abs_normal, gaussian_width_mc, r1
from benignlab.errors import BTooSmall, DeltaOutOfRange, EmptySequence, NotDiagonal, UnsupportedForE4
from benignlab.model import CovarianceModel, ProblemSpec
from benignlab.splitting import split_top_k


def spiked_spec(n, sigma=1.0):
    cov = CovarianceModel.from_blocks([(1.0, 1), (5.0 / n, n * n)])
    return ProblemSpec(cov, [1.0], sigma, n)


def figure1_spec(d, lam, n):
    cov = CovarianceModel.from_blocks([(1.0, 1), (lam * lam, d - 1)])
    return ProblemSpec.from_variance(cov, [math.sqrt(0.5)], 0.5, n)


def test_beta_sharp_limit_value():
    b = bounds.beta(10**6, 0.25, 0, "appendix_sharp")
    assert b == pytest.approx(33 * math.sqrt(math.log(128) / 1e6), rel=1e-15)
    assert b == pytest.approx(0.0726902, abs=1e-7)
    assert round(b, 4) == 0.0727


def test_beta_theorem_value():
    assert bounds.beta(100, 0.1, 4) == pytest.approx(66 * (math.sqrt(math.log(10) / 100) + 0.2), rel=1e-15)


def test_variant_ordering_grid():
    flagged = []
    for n in (10, 100, 10**4, 10**7):
        for delta in (1e-6, 1e-3, 0.05, 0.1, 0.25):
            for k in (0, 1, 5, 50):
                sharp = bounds.beta(n, delta, k, "appendix_sharp")
                thm = bounds.beta(n, delta, k, "theorem")
                if not sharp <= thm:
                    flagged.append((n, delta, k))
    assert flagged == []


def test_delta_gate():
    spec = spiked_spec(10)
    with pytest.raises(DeltaOutOfRange):
        bounds.ucb_main(spec, B=1.0, delta=0.3)
    with pytest.raises(DeltaOutOfRange):
        bounds.ucb_spec(spec, B=2.0, delta=0.26)
    bounds.euclid_suite(spec, split_top_k(spec.cov, 1), B=1.0, delta=0.4)


def test_main_bound_zero_covariance():
    spec = ProblemSpec(CovarianceModel.identity(10, 0.0), np.ones(10), 1.0, 5)
    rep = bounds.ucb_main(spec, B=3.0, delta=0.1)
    assert rep.value == 0.0


def test_main_bound_terms_recombine():
    spec = figure1_spec(400, 0.1, 50)
    split = split_top_k(spec.cov, 1)
    for variant in bounds.VARIANTS:
        rep = bounds.ucb_main(spec, split, "l2", 2.0, 0.1, variant=variant, samples=2000)
        t = rep.terms
        ref = (1 + t["beta"]) / t["n"] * (t["width_term"] + t["radius_term"] + t["signal_term"]) ** 2
        assert rep.value == pytest.approx(ref, rel=1e-12)
        assert rep.value >= t["width_term"] ** 2 / t["n"]
        if rep.interval is not None:
            lo, hi = rep.interval
            assert lo <= rep.value <= hi


def test_main_bound_no_split_equals_empty_split():
    spec = figure1_spec(300, 1.0, 40)
    a = bounds.ucb_main(spec, None, "l2", 1.5, 0.1, samples=2000, seed=3)
    b = bounds.ucb_main(spec, split_top_k(spec.cov, 0), "l2", 1.5, 0.1, samples=2000, seed=3)
    assert a.value == b.value


def test_main_bound_above_its_width_term_on_figure1():
    spec = figure1_spec(800, 1.0, 200)
    rep = bounds.ucb_main(spec, B=1.7, delta=0.1, samples=2000)
    assert rep.value >= rep.terms["width_term"] ** 2 / 200


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(1.01, 3.0), st.floats(1e-4, 0.2), st.floats(1.0, 3.0))
def test_main_bound_monotone(B, scale, delta, shrink):
    spec = figure1_spec(200, 0.3, 30)
    split = split_top_k(spec.cov, 1)
    base = bounds.ucb_main(spec, split, "l2", B, delta, samples=500, seed=1).value
    assert bounds.ucb_main(spec, split, "l2", B * scale, delta, samples=500, seed=1).value >= base
    assert bounds.ucb_main(spec, split, "l2", B, delta / shrink, samples=500, seed=1).value >= base


def test_trace_bound_identity_and_figure1():
    spec = ProblemSpec(CovarianceModel.identity(50), np.zeros(50), 1.0, 50)
    rep = bounds.ucb_spec(spec, B=2.0, delta=0.1)
    assert rep.terms["leading"] == pytest.approx(4.0, rel=1e-15)
    assert rep.value == pytest.approx((1 + rep.terms["gamma"]) * 4.0, rel=1e-15)
    rep = bounds.ucb_spec(figure1_spec(2000, 1.0, 200), B=1.0, delta=0.1)
    assert rep.terms["leading"] == pytest.approx(10.0, rel=1e-14)
    assert rep.terms["psi_n"] == pytest.approx(2000.0, rel=1e-14)
    # explicit gamma with k = ceil(sqrt(n log(32/delta)))
    k = math.ceil(math.sqrt(200 * math.log(320)))
    b = 66 * (math.sqrt(math.log(10) / 200) + math.sqrt(k / 200))
    g = (1 + b) * (1 + 6 * math.sqrt(math.log(10) / k)) ** 2 - 1
    assert rep.terms["gamma"] == pytest.approx(g, rel=1e-14)
    with pytest.raises(BTooSmall):
        bounds.ucb_spec(figure1_spec(2000, 1.0, 200), B=0.5, delta=0.1)


def test_trace_bound_slack_vanishes():
    cov = CovarianceModel.identity(10**12)
    ratios = []
    for n in (10**3, 10**4, 10**5, 10**6, 10**7, 10**8, 10**9):
        rep = bounds.ucb_spec(ProblemSpec(cov, [0.0], 1.0, n), B=1.0, delta=0.1)
        ratios.append(rep.value / rep.terms["leading"])
    assert all(b < a for a, b in zip(ratios, ratios[1:]))
    assert ratios[-1] - 1 < (ratios[0] - 1) / 10


def _spreadsheet_euclid(n, delta, B, variant):
    # Sigma = diag(1, (5/n) 1_{n^2}), w* = e1, sigma = 1, Sigma1 = top direction
    tr2 = (5.0 / n) * n * n
    r2 = tr2 / (5.0 / n)
    R2 = tr2 ** 2 / (n * n * (5.0 / n) ** 2)
    lg = math.log(1 / delta)
    if variant == "theorem":
        g = 66 * (math.sqrt(lg / r2) + math.sqrt(lg / n) + math.sqrt(1 / n))
    else:
        b = 33 * math.sqrt(math.log(32 / delta) / n) + 18 * math.sqrt(1 / n)
        g = (1 + b) * (1 + 2 * math.sqrt(2 * math.log(32 / delta) / r2)) ** 2 - 1
    eps = 64 * (math.sqrt(lg / r2) + math.sqrt(lg / n) + n * lg / R2)
    gen = (1 + g) * B * B * tr2 / n
    nb = 1.0 + math.sqrt(1 + eps) * math.sqrt(n / tr2)
    risk = (1 + g) * (1 + eps) * (1.0 + math.sqrt(tr2 / n)) ** 2
    return gen, nb, risk


@pytest.mark.parametrize("variant", ["theorem", "appendix_sharp"])
def test_euclid_suite_spreadsheet(variant):
    n, delta, B = 400, 0.25, 1.3
    spec = spiked_spec(n)
    gen, nb, risk = bounds.euclid_suite(spec, split_top_k(spec.cov, 1), B, delta, variant=variant)
    ref = _spreadsheet_euclid(n, delta, B, variant)
    for got, want in zip((gen.value, nb.value, risk.value), ref):
        assert abs(got - want) <= 1e-12 * abs(want)


def test_euclid_suite_zero_signal_and_limit():
    cov = CovarianceModel.from_blocks([(1.0, 1), (1e-6, 10**8)])
    spec = ProblemSpec(cov, [0.0], 0.7, 10)
    _, _, risk = bounds.euclid_suite(spec, split_top_k(cov, 1), None, 0.1)
    t = risk.terms
    assert risk.value == pytest.approx((1 + t["gamma"]) * (1 + t["epsilon"]) * 0.49, rel=1e-12)
    # Sigma2 = n^{-3/2} I_{n^2}: Tr(Sigma2)/n = n^{-1/2} and gamma, eps -> 0, so risk -> sigma^2
    vals = []
    for n in (10**2, 10**4, 10**6, 10**8):
        cov = CovarianceModel.from_blocks([(1.0, 1), (n ** -1.5, n * n)])
        spec = ProblemSpec(cov, [1.0], 1.0, n)
        vals.append(bounds.euclid_suite(spec, split_top_k(cov, 1), None, 0.1, variant="appendix_sharp")[2].value)
    assert all(b < a for a, b in zip(vals, vals[1:])) and vals[-1] < 1.1


def test_risk_recombination_all_suites():
    spec = ProblemSpec(CovarianceModel.from_blocks([(1.0, 2), (0.01, 3000)]), [0.5, -0.5], 1.0, 20)
    split = split_top_k(spec.cov, 2)
    _, _, risk = bounds.euclid_suite(spec, split, 1.0, 0.1)
    t = risk.terms
    ref = (1 + t["gamma"]) * (1 + t["epsilon"]) * (1.0 + t["wstar_norm"] * math.sqrt(t["trace_sigma2"] / 20)) ** 2
    assert risk.value == pytest.approx(ref, rel=1e-12)
    for norm in ("l1", "l2"):
        _, nb, risk = bounds.general_norm_suite(spec, split, norm, 1.0, 0.1, samples=2000)
        t = risk.terms
        base = 1.0 + t["wstar_norm"] * t["width"] / math.sqrt(20)
        assert risk.value == pytest.approx((1 + t["gamma"]) * (1 + t["epsilon"]) * base ** 2, rel=1e-12)
    _, _, risk, _ = bounds.bp_suite(spec, split, 1.0, 0.1, samples=2000)
    t = risk.terms
    base = 1.0 + t["wstar_l1"] * t["width"] / math.sqrt(20)
    assert risk.value == pytest.approx((1 + t["gamma"]) * (1 + t["epsilon"]) * base ** 2, rel=1e-12)


def test_general_l2_close_to_euclid():
    spec = ProblemSpec(CovarianceModel.from_blocks([(1.0, 1), (0.05, 20000)]), [1.0], 1.0, 50)
    split = split_top_k(spec.cov, 1)
    g_e = bounds.euclid_suite(spec, split, 2.0, 0.1)[0]
    g_g = bounds.general_norm_suite(spec, split, "l2", 2.0, 0.1, samples=20_000)[0]
    assert g_g.value == pytest.approx(g_e.value, rel=0.01)


def test_general_zero_signal_risk():
    spec = ProblemSpec(CovarianceModel.identity(500), np.zeros(500), 0.9, 10)
    _, _, risk = bounds.general_norm_suite(spec, None, "l1", 1.0, 0.1, samples=2000)
    t = risk.terms
    assert risk.value == pytest.approx((1 + t["gamma"]) * (1 + t["epsilon"]) * 0.81, rel=1e-12)


@pytest.mark.parametrize("d", [2 ** 10, 2 ** 14])
def test_junk_width_scale(d):
    n, lam = 20, 1.0
    cov = CovarianceModel.from_blocks([(lam / math.log(d), d)])
    w = gaussian_width_mc(cov, "l1", 1.0, samples=20_000, seed=0)
    ratio = (w.mean / math.sqrt(n)) / math.sqrt(lam / n)
    assert 0.5 <= ratio <= 2.0


def test_bp_r1_is_log_d_scale():
    d = 2 ** 14
    cov = CovarianceModel.from_blocks([(3.0 / math.log(d), d)])
    val, err = r1(cov, samples=20_000, seed=1)
    assert abs(val - expected_max_abs_normal(d) ** 2) <= 4 * err


def test_bp_iso_norm_empty_support():
    spec = ProblemSpec(CovarianceModel.identity(1024), np.zeros(1024), 1.0, 20)
    *_, iso = bounds.bp_suite(spec, None, 1.0, 0.2, samples=2000)
    eps = 140 * (math.sqrt(math.log(5) / 20) + math.sqrt(math.log(5) / math.log(1024)) + 20 / math.log(1024))
    ref = math.sqrt(1 + eps) * 1.0 * math.sqrt(20) / expected_max_abs_normal(1024)
    assert iso.value == pytest.approx(ref, rel=1e-12)


def test_e4_epsilon_gate():
    spec = ProblemSpec(CovarianceModel.identity(2 ** 16), [0.0], 1.0, 20)
    rep = bounds.bp_isotropic_norm(spec, 0.25)
    # 140 (sqrt(log4/20) + sqrt(log4/(16 log 2)) + 20/(16 log 2)), plain-math oracle
    assert rep.terms["epsilon"] == pytest.approx(338.8278707069052, rel=1e-13)
    assert rep.terms["epsilon"] == pytest.approx(140 * (0.2633 + 0.3536 + 1.8034), rel=1e-4)
    assert not rep.valid


def test_e5_eta_value():
    spec = ProblemSpec(CovarianceModel.identity(2 ** 16), [1.0], 1.0, 20)
    rep = bounds.bp_isotropic_risk(spec, 0.25)
    assert rep.terms["eta"] == pytest.approx(890.6342627340399, rel=1e-13)
    assert rep.value == pytest.approx((1 + rep.terms["eta"]) * 2.0, rel=1e-15)
    assert not rep.valid
    spec0 = ProblemSpec(CovarianceModel.identity(2 ** 10), [0.0], 1.0, 20)
    assert bounds.bp_isotropic_risk(spec0, 0.25).terms["null_risk"] == 1.0


def test_bp_suite_errors():
    Q = np.array([[0.0, 1.0], [1.0, 0.0]]) @ np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    dense = ProblemSpec(CovarianceModel([2.0, 1.0], basis=Q), [0.0, 0.0], 1.0, 2)
    with pytest.raises(NotDiagonal):
        bounds.bp_suite(dense, None, 1.0, 0.1)
    with pytest.raises(UnsupportedForE4):
        bounds.bp_isotropic_norm(ProblemSpec(CovarianceModel.identity(10, 2.0), [0.0], 1.0, 2), 0.1)


def test_consistency_euclidean_sequence():
    seq = []
    for n in (10, 20, 40, 80):
        cov = CovarianceModel.from_blocks([(1.0, 1), (1.0 / n ** 2, n * n)])
        seq.append((ProblemSpec(cov, [1.0], 1.0, n), split_top_k(cov, 1)))
    rows, verdict = bounds.consistency_diagnostics(seq, "l2")
    assert verdict == {"rank_ratio": True, "signal_ratio": True, "rank_R_ratio": True}
    for row in rows:
        n = row["n"]
        assert row["rank_ratio"] == 1 / n
        assert row["signal_ratio"] == pytest.approx(math.sqrt(1 / n), rel=1e-12)
        assert row["rank_R_ratio"] == pytest.approx(n / n ** 2, rel=1e-12)


def test_consistency_junk_sequence():
    seq = []
    for n in (8, 12, 16, 20):
        d = 2 ** (4 * n)
        lam = math.sqrt(n)
        cov = CovarianceModel.from_blocks([(1.0, 1), (lam / math.log(d), d)])
        seq.append((ProblemSpec(cov, [1.0], 1.0, n), split_top_k(cov, 1)))
    rows, verdict = bounds.consistency_diagnostics(seq, "l1", samples=20_000)
    assert verdict == {"rank_ratio": True, "signal_ratio": True, "r1_ratio": True}


def test_consistency_contraction_is_zero_for_l2():
    cov = CovarianceModel.from_blocks([(2.0, 1), (0.1, 300)])
    rows, _ = bounds.consistency_diagnostics([(ProblemSpec(cov, [1.0], 1.0, 10), split_top_k(cov, 1))],
                                             "l2", family="general", samples=2000)
    assert rows[0]["contraction_0.1"] == 0.0 and rows[0]["contraction_0.01"] == 0.0
    with pytest.raises(EmptySequence):
        bounds.consistency_diagnostics([], "l2")
