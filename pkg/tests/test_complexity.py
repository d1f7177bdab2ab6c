import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

import oracles
from benignlab.complexity import (dual_norm_draws, effective_ranks_general, effective_ranks_l2,
                                  expected_max_abs_normal, gaussian_width, gaussian_width_mc, r1,
                                  radius, radius_linf_bounds, subgradient_dual)
from benignlab.errors import UnsupportedNorm, ZeroCovariance, ZeroVector
from benignlab.model import CovarianceModel


def test_radius_values():
    assert radius(CovarianceModel.identity(7), "l2", 1.0) == 1.0
    assert radius(CovarianceModel.diagonal([1.0, 0.01]), "l1", 2.0) == 2.0
    assert radius(CovarianceModel.diagonal([4.0, 1.0]), "l2", 3.0) == 6.0
    with pytest.raises(UnsupportedNorm):
        radius(CovarianceModel.identity(2), "l3", 1.0)


def test_radius_linf_sign_enumeration():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((6, 6))
    lam, Q = np.linalg.eigh(A @ A.T)
    cov = CovarianceModel(lam[::-1], basis=Q[:, ::-1])
    S = cov.matrix()
    best = max(np.array(s) @ S @ np.array(s) for s in itertools.product((-1.0, 1.0), repeat=6))
    assert radius(cov, "linf", 1.5) == pytest.approx(1.5 * math.sqrt(best), rel=1e-12)
    lo, hi = radius_linf_bounds(cov, 1.0)
    assert lo <= math.sqrt(best) * (1 + 1e-12) and hi >= math.sqrt(best) * (1 - 1e-12)


def test_width_of_zero_set():
    w = gaussian_width_mc(CovarianceModel.identity(4, 0.0), "l2", 1.0, samples=500)
    assert w.mean == 0.0 and w.std_error == 0.0


def test_width_identity_two_dims():
    w = gaussian_width_mc(CovarianceModel.identity(2), "l2", 1.0, samples=20_000, seed=1)
    assert abs(w.mean - math.sqrt(math.pi / 2)) <= 4 * w.std_error
    assert w.method == "monte_carlo" and w.samples == 20_000


@pytest.mark.parametrize("d", [3, 50, 400])
def test_width_below_root_dimension(d):
    w = gaussian_width_mc(CovarianceModel.identity(d), "l2", 1.0, samples=5000, seed=d)
    assert w.mean <= math.sqrt(d) + 4 * w.std_error


def test_width_linear_in_radius():
    cov = CovarianceModel.diagonal([2.0, 1.0, 0.5, 0.1])
    for norm in ("l1", "l2", "linf"):
        a = gaussian_width_mc(cov, norm, 1.0, samples=2000, seed=3)
        b = gaussian_width_mc(cov, norm, 2.5, samples=2000, seed=3)
        assert b.mean == pytest.approx(2.5 * a.mean, rel=1e-12)


def test_full_vector_draws_agree_with_grouped_draws():
    # a dense basis forces full Gaussian vectors; the diagonal path groups eigenvalues
    lam = [3.0, 1.0, 1.0, 0.2]
    Q = np.eye(4)[:, [2, 0, 3, 1]]
    dense = CovarianceModel(lam, basis=Q)
    diag = CovarianceModel(lam)
    for norm in ("l1", "l2"):
        a = gaussian_width_mc(dense, norm, 1.0, samples=20_000, seed=4)
        b = gaussian_width_mc(diag, norm, 1.0, samples=20_000, seed=5)
        assert abs(a.mean - b.mean) <= 4 * math.hypot(a.std_error, b.std_error)


def test_expected_max_abs_normal_oracle():
    # E max_i |H_i| = int_0^inf 1 - (2 Phi(t) - 1)^m dt
    for m in (1, 2, 7, 1000):
        ref, _ = integrate.quad(lambda t: 1 - (2 * stats.norm.cdf(t) - 1) ** m, 0, np.inf)
        assert expected_max_abs_normal(m) == pytest.approx(ref, rel=1e-9)
    assert expected_max_abs_normal(1) == pytest.approx(math.sqrt(2 / math.pi), rel=1e-12)


def test_closed_form_width_matches_chi_mean():
    for d in (1, 5, 64):
        w = gaussian_width(CovarianceModel.identity(d), "l2", 1.0, method="closed_form")
        assert w.mean == pytest.approx(oracles.expected_chi(d), rel=1e-12)
        assert w.std_error == 0.0 and w.method == "closed_form"


def test_subgradient_examples():
    assert np.allclose(subgradient_dual("l2", [3.0, 4.0]), [0.6, 0.8])
    assert np.array_equal(subgradient_dual("l1", [1.0, -2.0]), [0.0, -1.0])
    cov = CovarianceModel.diagonal([2.0, 1.0])
    assert np.array_equal(subgradient_dual("l1", [1.0, 1.0], cov), [0.0, 1.0])
    assert np.array_equal(subgradient_dual("l1", [1.0, 1.0]), [1.0, 0.0])
    with pytest.raises(ZeroVector):
        subgradient_dual("l2", [0.0, 0.0])


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(["l1", "l2", "linf"]),
       st.lists(st.floats(-1e3, 1e3, allow_subnormal=False), min_size=1, max_size=10))
def test_subgradient_certificate(norm, u):
    u = np.array(u)
    if not np.any(np.abs(u) > 1e-200):
        return
    v = subgradient_dual(norm, u)
    primal = {"l1": 1, "l2": 2, "linf": np.inf}[norm]
    dual = {"l1": np.inf, "l2": 2, "linf": 1}[norm]
    assert np.linalg.norm(v, primal) == pytest.approx(1.0, rel=1e-12)
    assert v @ u == pytest.approx(np.linalg.norm(u, dual), rel=1e-12)


def test_effective_ranks_l2_values():
    assert effective_ranks_l2(CovarianceModel.identity(17)) == (17.0, 17.0)
    r, R = effective_ranks_l2(CovarianceModel.diagonal([2.5] + [0.0] * 9))
    assert r == 1.0 and R == 1.0
    r, R = effective_ranks_l2(CovarianceModel.from_blocks([(1.0, 1), (0.01, 999)]))
    # frozen from exact rational arithmetic: Tr = 1099/100, Tr^2/Tr(Sigma^2) = 1207801/10999
    assert abs(r - 10.99) <= 1e-10
    assert abs(R - 109.81007364305846) <= 1e-10
    with pytest.raises(ZeroCovariance):
        effective_ranks_l2(CovarianceModel.identity(3, 0.0))


def test_r1_identity_two_dims():
    # (E max(|H1|, |H2|))^2 from one-dimensional quadrature
    em, _ = integrate.quad(lambda t: 1 - (2 * stats.norm.cdf(t) - 1) ** 2, 0, np.inf)
    rep = effective_ranks_general(CovarianceModel.identity(2), "l1", samples=20_000, seed=2)
    assert abs(rep.r_norm - em ** 2) <= 4 * rep.mc_errors["r_norm"]
    assert em ** 2 == pytest.approx(1.273, abs=1e-3)
    assert rep.checks["r1_le_R1"]


@pytest.mark.parametrize("d", [16, 64, 400])
def test_general_l2_ranks_on_identity(d):
    rep = effective_ranks_general(CovarianceModel.identity(d), "l2", samples=20_000, seed=d)
    e = rep.mc_errors
    assert d - 1 - 3 * e["r_norm"] <= rep.r_norm <= d + 3 * e["r_norm"]
    ratio = rep.R_norm / rep.R
    assert 1 - 4 / math.sqrt(d) - 3 * e["R_norm"] / rep.R <= ratio
    assert ratio <= 1 / (1 - math.sqrt(8 / d)) + 3 * e["R_norm"] / rep.R


@pytest.mark.parametrize("lam", [[1.0] * 5, [4.0, 1.0, 1.0, 0.5], [1.0] + [0.01] * 300])
def test_spectral_ranks_at_least_one(lam):
    rep = effective_ranks_general(CovarianceModel.diagonal(lam), "l2", samples=2000, seed=1)
    assert rep.r >= 1 and rep.R >= 1
    # the norm-based rank keeps the lower sandwich end r - 1
    assert rep.r_norm >= rep.r - 1 - 3 * rep.mc_errors["r_norm"]


def test_norm_rank_can_fall_below_one():
    # rank one: r_||.||_2 = (E|g|)^2 = 2/pi, so "at least 1" is a property of r and R only
    rep = effective_ranks_general(CovarianceModel.diagonal([1.0, 0.0, 0.0]), "l2", samples=20_000, seed=0)
    assert abs(rep.r_norm - 2 / math.pi) <= 4 * rep.mc_errors["r_norm"]
    assert rep.r == 1.0


def test_width_radius_ratio_reproduces_rank():
    cov = CovarianceModel.diagonal([3.0, 1.0, 1.0, 0.4, 0.1])
    for norm in ("l1", "l2"):
        w = gaussian_width_mc(cov, norm, 1.0, samples=20_000, seed=0)
        rep = effective_ranks_general(cov, norm, samples=20_000, seed=0)
        assert (w.mean / radius(cov, norm, 1.0)) ** 2 == pytest.approx(rep.r_norm, rel=1e-12)


def test_norm_is_big():
    for lam in ([1.0] * 10, [5.0, 1.0, 1.0, 0.3], [1.0] + [0.05] * 200):
        cov = CovarianceModel.diagonal(lam)
        w = gaussian_width_mc(cov, "l2", 1.0, samples=20_000, seed=7)
        r, _ = effective_ranks_l2(cov)
        err = 2 * w.mean * w.std_error
        assert w.mean ** 2 >= (1 - 1 / r) * cov.trace - 4 * err


def test_vstar_norm_concentration_surrogate():
    # ||Sigma H||^2 / ||Sigma^{1/2} H||^2 at the 0.99 quantile, surrogate constant 50
    cov = CovarianceModel.from_blocks([(1.0, 2), (0.1, 400)])
    assert effective_ranks_l2(cov)[1] >= 100
    rng = np.random.default_rng(0)
    H = rng.standard_normal((20_000, cov.dim))
    lam = cov.diag()
    ratio = (H ** 2 @ lam ** 2) / (H ** 2 @ lam)
    q = np.quantile(ratio, 0.99)
    assert q <= 50 * math.log(16) * cov.trace_sq / cov.trace


def test_dual_norm_draws_for_junk_dimension():
    # the l1 path works on implicit dimensions far past anything materialisable
    d = 2 ** 40
    cov = CovarianceModel.from_blocks([(1.0 / math.log(d), d)])
    val, err = r1(cov, samples=4000, seed=0)
    em = expected_max_abs_normal(d)
    assert abs(val - em ** 2) <= 4 * err
    duals, vn = dual_norm_draws(cov, "l1", 1000, 0)
    assert duals.shape == (1000,) and np.allclose(vn, math.sqrt(1.0 / math.log(d)))
