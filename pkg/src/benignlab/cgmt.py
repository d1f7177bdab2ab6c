"""Monte Carlo checks of the Gaussian minimax comparison.

Two pairs of problems are sampled.

Gap pair (no Sigma1 part, Euclidean ball ``K = {||w||_2 <= B}``):
    PO  ``Phi = max_{w in K, Xw = Y} ||w - w*||_Sigma^2``,
    AO  ``phi = max ||u||^2`` over ``u in Sigma^{1/2}(K - w*)`` subject to
        ``||xi - ||u|| G|| <= <u, H>``.

Norm pair:
    PO  ``Phi = min_{Zw = xi} ||Sigma^{-1/2} w||``, i.e. the minimum-norm
        interpolator of pure noise under the design ``X = Z Sigma^{1/2}``,
    AO  an upper bound on ``phi = min ||Sigma^{-1/2} w||`` subject to
        ``||xi - ||w||_2 G|| <= <H, w>``, from the feasible points
        ``w = alpha Sigma^{1/2} v`` along the subgradient direction ``v``.

The comparison checked is ``Pr(Phi > t) <= 2 Pr(phi >= t)``.  Empty feasible
sets give ``-inf`` for maxima and ``+inf`` for minima.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .complexity import subgradient_dual
from .errors import Infeasible, SingularCovariance
from .interpolators import min_norm_interpolator, worst_case_l2_interpolator
from .model import ProblemSpec, sample_dataset
from .norms import parse_norm
from .rng import derive_seed, make_rng

NEG_INF = -math.inf
POS_INF = math.inf


@dataclass(frozen=True)
class ComparisonReport:
    t_grid: np.ndarray
    po_tail: np.ndarray
    po_se: np.ndarray
    ao_tail: np.ndarray
    ao_se: np.ndarray
    draws: int
    verdict: np.ndarray
    notes: dict = field(default_factory=dict)
    po_values: np.ndarray = None
    ao_values: np.ndarray = None

    @property
    def all_pass(self):
        return bool(np.all(self.verdict))


def _ball(K_ball):
    norm, B = K_ball
    if parse_norm(norm) != "l2":
        raise ValueError("the gap problems are implemented for the Euclidean ball only")
    return float(B)


# ---------------------------------------------------------------------------
# gap pair

def po_gap_value(spec, K_ball, seed):
    """``max_{w in K, Xw=Y} L(w) - sigma^2`` on a fresh dataset (``-inf`` if empty)."""
    B = _ball(K_ball)
    ds = sample_dataset(spec, seed)
    if B < 0:
        return NEG_INF
    try:
        res = worst_case_l2_interpolator(spec, ds, B)
    except Infeasible:
        return NEG_INF
    return res.value - spec.noise_var


def _support_max(H, a, R, rho):
    """``max <H, u>`` over ``||u|| = rho``, ``||u - a|| <= R`` (``-inf`` if empty).

    Only the plane spanned by ``H`` and ``a`` matters.  ``rho`` may be an array.
    """
    rho = np.asarray(rho, dtype=float)
    na = float(np.linalg.norm(a))
    nH = float(np.linalg.norm(H))
    if na == 0.0:
        return np.where(rho <= R * (1 + 1e-15), rho * nH, NEG_INF)
    c0 = (rho * rho + na * na - R * R) / (2.0 * na)
    h_par = float(H @ a) / na
    h_perp = math.sqrt(max(nH * nH - h_par * h_par, 0.0))
    c0c = np.minimum(c0, rho)
    free = rho * h_par >= c0 * nH
    tight = c0c * h_par + np.sqrt(np.maximum(rho * rho - c0c * c0c, 0.0)) * h_perp
    out = np.where(free, rho * nH, tight)
    return np.where(c0 > rho * (1 + 1e-15), NEG_INF, out)


def ao_gap_value(spec, K_ball, seed, grid=2000):
    """Auxiliary value of the gap problem for ``Sigma = c I``.

    The feasible radii ``rho = ||u||`` are scanned on ``grid`` log-spaced
    points and the last feasible point is refined by bisection.
    """
    B = _ball(K_ball)
    c = spec.cov.scalar_value()
    if c is None:
        raise ValueError("the auxiliary gap problem is implemented for Sigma = c I only")
    rng = make_rng(seed)
    n, d = spec.n, spec.dim
    G = rng.standard_normal(n)
    H = rng.standard_normal(d)
    xi = spec.sigma * rng.standard_normal(n)
    if B < 0:
        return NEG_INF
    a = -math.sqrt(c) * spec.w_full
    R = math.sqrt(c) * B
    na = float(np.linalg.norm(a))
    lo = max(0.0, na - R)
    hi = na + R

    gg, gx, xx = float(G @ G), float(G @ xi), float(xi @ xi)

    def slack(rho):
        resid = np.sqrt(np.maximum(xx - 2 * rho * gx + rho * rho * gg, 0.0))
        return _support_max(H, a, R, rho) - resid

    if hi == 0.0:
        return 0.0 if slack(0.0) >= 0 else NEG_INF
    span = hi - lo
    rhos = lo + span * np.concatenate(([0.0], np.logspace(-8, 0, grid - 1)))
    ok = slack(rhos) >= 0
    if not ok.any():
        return NEG_INF
    j = int(np.flatnonzero(ok)[-1])
    if j == rhos.size - 1:
        return float(rhos[j] ** 2)
    left, right = rhos[j], rhos[j + 1]
    while right - left > 1e-10 * max(1.0, right):
        mid = 0.5 * (left + right)
        if slack(mid) >= 0:
            left = mid
        else:
            right = mid
    return float(left ** 2)


# ---------------------------------------------------------------------------
# norm pair

def _noise_spec(spec):
    return ProblemSpec(spec.cov, np.zeros(min(spec.w_star.size, spec.dim)), spec.sigma, spec.n, spec.noise_var)


def po_norm_value(spec, norm, seed):
    """``min_{Zw = xi} ||Sigma^{-1/2} w||`` as minimum-norm interpolation of noise."""
    norm = parse_norm(norm)
    if norm not in ("l1", "l2"):
        raise ValueError("norm must be l1 or l2")
    if spec.cov.rank < spec.dim:
        raise SingularCovariance("Sigma must be invertible")
    ds = sample_dataset(_noise_spec(spec), seed)
    if not np.any(ds.y):
        return 0.0
    return min_norm_interpolator(ds, norm).norm_value


def ao_norm_value(spec, norm, seed, mode="exact"):
    """Upper bound on the auxiliary norm value.

    Along ``w = alpha Sigma^{1/2} v`` with ``v`` the minimal-``||.||_Sigma``
    subgradient at ``Sigma^{1/2} H``, the constraint becomes the quadratic
    ``alpha^2 (D^2 - s^2 ||G||^2) + 2 alpha s <xi, G> - ||xi||^2 >= 0`` with
    ``D = ||Sigma^{1/2} H||_*`` and ``s = ||v||_Sigma``.  ``mode="exact"``
    returns its smallest non-negative root for the sampled ``(G, H, xi)``;
    ``mode="sketch"`` returns ``sigma (D^2/n - s^2)^{-1/2}``, the typical
    value obtained by replacing ``||G||^2``, ``||xi||^2`` and ``<xi, G>`` by
    their means.  Both return ``+inf`` when no feasible ``alpha`` exists.
    """
    norm = parse_norm(norm)
    if norm not in ("l1", "l2"):
        raise ValueError("norm must be l1 or l2")
    if spec.cov.rank < spec.dim:
        raise SingularCovariance("Sigma must be invertible")
    rng = make_rng(seed)
    n, d = spec.n, spec.dim
    G = rng.standard_normal(n)
    H = rng.standard_normal(d)
    xi = spec.sigma * rng.standard_normal(n)
    u = spec.cov.sqrt_rows(H[None, :])[0]
    v = subgradient_dual(norm, u, spec.cov)
    D = float(u @ v)
    s = math.sqrt(spec.cov.quad(v))
    if mode == "sketch":
        den = D * D / n - s * s
        return spec.sigma / math.sqrt(den) if den > 0 else POS_INF
    if mode != "exact":
        raise ValueError(f"unknown mode {mode!r}")
    C = float(xi @ xi)
    if C == 0.0:
        return 0.0
    A = D * D - s * s * float(G @ G)
    Bq = 2.0 * s * float(xi @ G)
    if A > 0:
        return (-Bq + math.sqrt(Bq * Bq + 4 * A * C)) / (2 * A)
    if A == 0:
        return C / Bq if Bq > 0 else POS_INF
    disc = Bq * Bq + 4 * A * C
    if Bq <= 0 or disc < 0:
        return POS_INF
    return (-Bq + math.sqrt(disc)) / (2 * A)


# ---------------------------------------------------------------------------
# tails

def _tail(values, t, strict):
    v = np.asarray(values, dtype=float)
    hits = (v[:, None] > t[None, :]) if strict else (v[:, None] >= t[None, :])
    p = hits.mean(axis=0)
    return p, np.sqrt(p * (1 - p) / v.size)


def sample_values(sampler, draws, seed, stream, threads=1):
    """``sampler(seed_i)`` for ``i < draws`` with seeds derived from ``(seed, stream, i)``."""
    seeds = [derive_seed(seed, stream, i) for i in range(draws)]
    if threads <= 1:
        return np.array([sampler(s) for s in seeds], dtype=float)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return np.array(list(pool.map(sampler, seeds)), dtype=float)


def default_t_grid(po_values, ao_values, points=20):
    pooled = np.concatenate([po_values, ao_values])
    pooled = pooled[np.isfinite(pooled)]
    return np.linspace(pooled.min(), pooled.max(), points)


def compare_tails(po_sampler, ao_sampler, draws, t_grid=None, seed=0, threads=1, points=20):
    """Empirical ``Pr(Phi > t)`` against ``2 Pr(phi >= t)``.

    Verdict at ``t``: ``po_tail <= 2 ao_tail + 3 se`` where ``se`` combines
    both binomial standard errors (the AO one scaled by two).
    """
    if draws < 500:
        raise ValueError("draws must be at least 500")
    po = sample_values(po_sampler, draws, seed, 0, threads)
    ao = sample_values(ao_sampler, draws, seed, 1, threads)
    t = default_t_grid(po, ao, points) if t_grid is None else np.asarray(t_grid, dtype=float)
    po_tail, po_se = _tail(po, t, strict=True)
    ao_tail, ao_se = _tail(ao, t, strict=False)
    se = np.sqrt(po_se ** 2 + 4 * ao_se ** 2)
    verdict = po_tail <= 2 * ao_tail + 3 * se
    notes = {"po_neg_inf": int(np.sum(po == NEG_INF)), "po_pos_inf": int(np.sum(po == POS_INF)),
             "ao_neg_inf": int(np.sum(ao == NEG_INF)), "ao_pos_inf": int(np.sum(ao == POS_INF))}
    return ComparisonReport(t_grid=t, po_tail=po_tail, po_se=po_se, ao_tail=ao_tail, ao_se=ao_se,
                            draws=int(draws), verdict=verdict, notes=notes, po_values=po, ao_values=ao)
