"""Gaussian widths, radii, dual-norm subgradients and effective ranks.

For a norm ball ``K = {||w|| <= B}`` and covariance ``Sigma``

    W(Sigma^{1/2} K) = B E||Sigma^{1/2} H||_*,     rad(Sigma^{1/2} K) = B sup_{||w||<=1} ||w||_Sigma,

with ``H`` standard normal and ``||.||_*`` the dual norm.  Expectations are
computed in closed form when the spectrum allows it and by Monte Carlo
otherwise.  The Monte Carlo path never materialises more than it must: for
the Euclidean norm only the spectrum matters, so each run of equal
eigenvalues contributes one chi-square variate per draw; for the l1 ball on a
diagonal covariance each run contributes the maximum of its ``|N(0,1)|``
coordinates, sampled by inverting its CDF.  This is what lets the junk-feature
diagnostics use dimensions like ``2**80``.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from . import kernels
from .errors import ZeroCovariance, ZeroVector
from .norms import parse_norm
from .rng import make_rng

DEFAULT_SAMPLES = 20_000
_CHUNK_ELEMS = 4_000_000
_TIE_REL = 1e-12


@dataclass(frozen=True)
class WidthEstimate:
    mean: float
    std_error: float
    samples: int
    method: str


@dataclass(frozen=True)
class RankReport:
    r: float
    R: float
    r_norm: float
    R_norm: float
    norm_tag: str
    mc_errors: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# radii

def radius(cov, norm, B):
    """``B sup_{||w|| <= 1} ||w||_Sigma`` for the l1, l2 and linf balls.

    For linf this is exact for diagonal covariances and for d <= 20 (sign
    enumeration); above that the lower end of :func:`radius_linf_bounds` is
    returned.
    """
    norm = parse_norm(norm)
    if B < 0:
        raise ValueError("B must be non-negative")
    if norm == "l2":
        return B * np.sqrt(cov.op_norm)
    if norm == "l1":
        return B * np.sqrt(cov.max_diag)
    lo, hi = radius_linf_bounds(cov, 1.0)
    return B * lo


def radius_linf_bounds(cov, B, samples=4096, seed=0):
    """Bracket ``B max_{s in {-1,1}^d} ||s||_Sigma``.

    Exact (lo == hi) for diagonal covariances and d <= 20.  Otherwise the
    lower end is the best of random sign vectors improved by single-flip
    local search, and the upper end is ``sqrt(sum_ij |Sigma_ij|)``.
    """
    if cov.is_diagonal:
        v = B * np.sqrt(cov.trace)
        return v, v
    M = cov.matrix()
    d = cov.dim
    if d <= 20:
        v = B * np.sqrt(max(kernels.max_sign_quadratic(M), 0.0))
        return v, v
    rng = make_rng(seed)
    best = -np.inf
    for _ in range(max(1, samples // 64)):
        s = np.where(rng.random(d) < 0.5, -1.0, 1.0)
        y = M @ s
        q = s @ y
        while True:
            gain = -4.0 * s * y + 4.0 * np.diag(M)
            j = int(np.argmax(gain))
            if gain[j] <= 1e-12 * abs(q):
                break
            q += gain[j]
            y -= 2.0 * s[j] * M[:, j]
            s[j] = -s[j]
        best = max(best, q)
    hi = np.sqrt(np.abs(M).sum())
    return B * np.sqrt(max(best, 0.0)), B * hi


# ---------------------------------------------------------------------------
# closed forms

def expected_chi_norm(m):
    """``E||H||_2`` for ``H ~ N(0, I_m)``: sqrt(2) Gamma((m+1)/2) / Gamma(m/2)."""
    m = float(m)
    return float(np.sqrt(2.0) * np.exp(special.gammaln((m + 1) / 2) - special.gammaln(m / 2)))


@lru_cache(maxsize=256)
def expected_max_abs_normal(m):
    """``E max_{i<=m} |H_i|`` for iid standard normals, by quadrature.

    Uses ``E M = int_0^inf 1 - (1 - 2 Phi(-t))^m dt`` with the power taken
    through ``log1p`` so that astronomically large ``m`` is fine.
    """
    m = float(m)
    if m < 1:
        return 0.0

    def integrand(t):
        return -np.expm1(m * np.log1p(-2.0 * special.ndtr(-t)))

    t0 = np.sqrt(2.0 * np.log(max(m, 2.0)))
    a, _ = integrate.quad(integrand, 0.0, t0, limit=200, epsabs=1e-13, epsrel=1e-12)
    b, _ = integrate.quad(integrand, t0, np.inf, limit=200, epsabs=1e-13, epsrel=1e-12)
    return a + b


def expected_dual_norm_closed(cov, norm):
    """Closed form of ``E||Sigma^{1/2} H||_*`` when available, else ``None``."""
    norm = parse_norm(norm)
    if cov.is_zero:
        return 0.0
    vals, cnts = cov.groups()
    pos = vals > 0
    if norm == "linf" and cov.is_diagonal:
        return float(np.sqrt(2 / np.pi) * np.dot(np.sqrt(vals), cnts))
    if pos.sum() != 1:
        return None
    v, m = float(vals[pos][0]), float(cnts[pos][0])
    if norm == "l2":
        return np.sqrt(v) * expected_chi_norm(m)
    if norm == "l1" and cov.is_diagonal:
        return np.sqrt(v) * expected_max_abs_normal(m)
    return None


# ---------------------------------------------------------------------------
# Monte Carlo

def _chunks(samples, width):
    size = max(1, min(samples, _CHUNK_ELEMS // max(int(width), 1)))
    out = []
    done = 0
    while done < samples:
        out.append(min(size, samples - done))
        done += out[-1]
    return out


def _max_abs_normal_draws(rng, m, size):
    """Draws of ``max`` over ``m`` iid ``|N(0,1)|`` by CDF inversion."""
    u = rng.random(size)
    q = -np.expm1(np.log(u) / m) / 2.0
    return -special.ndtri(q)


def dual_norm_draws(cov, norm, samples=DEFAULT_SAMPLES, seed=0):
    """Paired draws of ``||Sigma^{1/2} h||_*`` and ``||v*||_Sigma``.

    ``v*`` is the minimal-``||.||_Sigma`` subgradient of the dual norm at
    ``Sigma^{1/2} h``.  Chunk ``c`` uses the stream ``(seed, c)``.
    """
    norm = parse_norm(norm)
    if cov.is_zero:
        return np.zeros(samples), np.zeros(samples)
    vals, cnts = cov.groups()
    keep = vals > 0
    vals, cnts = vals[keep], cnts[keep]
    duals, vnorms = [], []
    if norm == "l2":
        for c, size in enumerate(_chunks(samples, vals.size)):
            rng = make_rng(seed, c)
            chi = rng.chisquare(np.broadcast_to(cnts, (size, cnts.size)))
            s1 = chi @ vals
            s2 = chi @ (vals ** 2)
            duals.append(np.sqrt(s1))
            vnorms.append(np.sqrt(s2 / s1))
    elif norm == "l1" and cov.is_diagonal:
        root = np.sqrt(vals)
        for c, size in enumerate(_chunks(samples, vals.size)):
            rng = make_rng(seed, c)
            M = _max_abs_normal_draws(rng, cnts[None, :], (size, vals.size)) * root
            j = np.argmax(M, axis=1)
            duals.append(M[np.arange(size), j])
            vnorms.append(root[j])
    else:
        d = cov.dim
        sig_diag = cov.diag()
        Smat = None if cov.is_diagonal else cov.matrix()
        for c, size in enumerate(_chunks(samples, d)):
            rng = make_rng(seed, c)
            U = cov.sqrt_rows(rng.standard_normal((size, d)))
            if norm == "l1":
                A = np.abs(U)
                top = A.max(axis=1, keepdims=True)
                tied = A >= top * (1 - _TIE_REL)
                cand = np.where(tied, sig_diag[None, :], np.inf)
                j = np.argmin(cand, axis=1)
                duals.append(top[:, 0])
                vnorms.append(np.sqrt(sig_diag[j]))
            else:
                S = np.sign(U)
                duals.append(np.abs(U).sum(axis=1))
                if Smat is None:
                    vnorms.append(np.sqrt(np.abs(S) @ sig_diag))
                else:
                    vnorms.append(np.sqrt(np.einsum("ij,ij->i", S @ Smat, S)))
    return np.concatenate(duals), np.concatenate(vnorms)


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float(x.mean()), 0.0
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.size))


def gaussian_width_mc(cov, norm, B=1.0, samples=DEFAULT_SAMPLES, seed=0):
    """Monte Carlo ``W(Sigma^{1/2} K) = B E||Sigma^{1/2} H||_*`` with its CLT error."""
    parse_norm(norm)
    if samples < 100:
        raise ValueError("samples must be at least 100")
    duals, _ = dual_norm_draws(cov, norm, samples, seed)
    mean, se = _mean_se(duals)
    return WidthEstimate(mean=B * mean, std_error=B * se, samples=int(samples), method="monte_carlo")


def gaussian_width(cov, norm, B=1.0, samples=DEFAULT_SAMPLES, seed=0, method="auto"):
    """Width by closed form when available (``method="auto"``), else Monte Carlo."""
    if method not in ("auto", "closed_form", "monte_carlo"):
        raise ValueError(f"unknown method {method!r}")
    if method != "monte_carlo":
        val = expected_dual_norm_closed(cov, norm)
        if val is not None:
            return WidthEstimate(mean=B * val, std_error=0.0, samples=0, method="closed_form")
        if method == "closed_form":
            raise ValueError("no closed form for this covariance and norm")
    est = _cached_width(cov, parse_norm(norm), samples, seed)
    return WidthEstimate(mean=B * est.mean, std_error=B * est.std_error, samples=est.samples,
                         method=est.method)


_WIDTH_CACHE = {}


def _fingerprint(cov):
    basis = None if cov.basis is None else cov.basis.tobytes()
    return (cov._vals.tobytes(), cov._counts, basis)


def _cached_width(cov, norm, samples, seed):
    key = (_fingerprint(cov), norm, samples, seed)
    hit = _WIDTH_CACHE.get(key)
    if hit is None:
        if len(_WIDTH_CACHE) > 512:
            _WIDTH_CACHE.clear()
        hit = gaussian_width_mc(cov, norm, 1.0, samples, seed)
        _WIDTH_CACHE[key] = hit
    return hit


# ---------------------------------------------------------------------------
# subgradients

def subgradient_dual(norm, u, cov=None):
    """Minimal-``||.||_Sigma`` element ``v`` of the subdifferential of ``||.||_*`` at ``u``.

    ``norm`` names the primal norm, so ``||v|| = 1`` and ``<v, u> = ||u||_*``.
    For the l1 ball, ties among the largest ``|u_i|`` are resolved by the
    smallest ``Sigma_ii`` and then the lowest index.
    """
    norm = parse_norm(norm)
    u = np.asarray(u, dtype=float).ravel()
    if not np.any(u):
        raise ZeroVector("subgradient of a norm at 0 is not a single direction")
    if norm == "l2":
        return u / np.linalg.norm(u)
    if norm == "linf":
        return np.sign(u)
    a = np.abs(u)
    top = a.max()
    tied = np.flatnonzero(a >= top * (1 - _TIE_REL))
    if tied.size > 1 and cov is not None:
        diag = cov.diag()[tied]
        tied = tied[diag == diag.min()]
    i = int(tied[0])
    v = np.zeros_like(u)
    v[i] = np.sign(u[i])
    return v


# ---------------------------------------------------------------------------
# effective ranks

def effective_ranks_l2(cov):
    """``r = Tr(Sigma)/||Sigma||_op`` and ``R = Tr(Sigma)^2/Tr(Sigma^2)``."""
    if cov.is_zero:
        raise ZeroCovariance("effective ranks of the zero covariance are undefined")
    tr = cov.trace
    return tr / cov.op_norm, tr * tr / cov.trace_sq


def _ratio_sq(num, den, cov_nd=0.0, var_num=0.0, var_den=0.0):
    """``(num/den)^2`` and its delta-method standard error."""
    val = (num / den) ** 2
    g_num = 2 * num / den ** 2
    g_den = -2 * num ** 2 / den ** 3
    var = g_num ** 2 * var_num + g_den ** 2 * var_den + 2 * g_num * g_den * cov_nd
    return val, float(np.sqrt(max(var, 0.0)))


def effective_ranks_general(cov, norm, samples=DEFAULT_SAMPLES, seed=0):
    """``r_||.||`` and ``R_||.||`` by Monte Carlo, alongside the exact ``r`` and ``R``.

    The numerator ``E||Sigma^{1/2}H||_*`` and ``E||v*||_Sigma`` are estimated
    from the same draws; the squared-ratio errors come from the delta method.
    """
    norm = parse_norm(norm)
    if samples < 100:
        raise ValueError("samples must be at least 100")
    if cov.is_zero:
        raise ZeroCovariance("effective ranks of the zero covariance are undefined")
    r, R = effective_ranks_l2(cov)
    duals, vn = dual_norm_draws(cov, norm, samples, seed)
    m = duals.size
    mu_d, mu_v = duals.mean(), vn.mean()
    var_d = duals.var(ddof=1) / m
    var_v = vn.var(ddof=1) / m
    cov_dv = float(np.cov(duals, vn)[0, 1]) / m
    rad = radius(cov, norm, 1.0)
    r_norm, r_err = _ratio_sq(mu_d, rad, var_num=var_d)
    if mu_v > 0:
        R_norm, R_err = _ratio_sq(mu_d, mu_v, cov_dv, var_d, var_v)
    else:
        R_norm, R_err = np.inf, 0.0
    checks = {}
    if norm == "l1":
        checks["r1_le_R1"] = bool(r_norm <= R_norm + 3 * np.hypot(r_err, R_err))
    return RankReport(r=r, R=R, r_norm=r_norm, R_norm=R_norm, norm_tag=norm,
                      mc_errors={"r_norm": r_err, "R_norm": R_err, "width": float(np.sqrt(var_d)),
                                 "vstar": float(np.sqrt(var_v))},
                      checks=checks)


def r1(cov, samples=DEFAULT_SAMPLES, seed=0, method="auto"):
    """``r_1(Sigma) = (E||Sigma^{1/2} g||_inf)^2 / max_i Sigma_ii`` with its error."""
    w = gaussian_width(cov, "l1", 1.0, samples, seed, method=method)
    md = cov.max_diag
    return w.mean ** 2 / md, 2 * w.mean * w.std_error / md
