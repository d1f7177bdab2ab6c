"""Minimum-norm interpolators and worst-case interpolators inside norm balls."""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linprog

from . import kernels
from .errors import DimensionMismatch, IllConditioned, Infeasible, NoInterpolator, NotConverged
from .model import empirical_loss, population_loss
from .norms import norm_value, parse_norm


@dataclass(frozen=True)
class InterpolatorResult:
    w: np.ndarray
    norm_used: str
    norm_value: float
    train_loss: float
    pop_loss: float
    solver_stats: dict = field(default_factory=dict)


@dataclass(frozen=True)
class WorstCaseResult:
    w: np.ndarray
    value: float
    ball_radius: float
    certificate: str
    kkt_residual: float
    solver_stats: dict = field(default_factory=dict)


def _residual_ok(X, w, Y, tol=1e-8):
    return np.max(np.abs(X @ w - Y), initial=0.0) <= tol * (1.0 + np.max(np.abs(Y), initial=0.0))


def _finish(ds, w, norm, spec, stats):
    if not _residual_ok(ds.x, w, ds.y):
        raise IllConditioned("computed solution does not interpolate to 1e-8")
    w = np.asarray(w, dtype=float)
    w.setflags(write=False)
    pop = population_loss(spec, w) if spec is not None else float("nan")
    return InterpolatorResult(w=w, norm_used=norm, norm_value=norm_value(w, norm),
                              train_loss=empirical_loss(ds, w), pop_loss=pop, solver_stats=stats)


def _check_shape(ds):
    n, d = ds.x.shape
    if ds.y.shape != (n,):
        raise DimensionMismatch("labels do not match the design")
    return n, d


# ---------------------------------------------------------------------------
# l2

def min_l2_interpolator(ds, spec=None, rcond=None, method="auto"):
    """Minimum Euclidean-norm solution of ``Xw = Y``.

    ``method="svd"`` uses the thin SVD of ``X``.  ``method="gram"`` takes the
    singular system from the eigendecomposition of ``X X^T``, which is much
    cheaper when ``d >> n``; ``"auto"`` uses it for ``d >= 4n`` where ``X`` is
    well conditioned, falling back to the SVD if the Gram spectrum is
    ill-conditioned.
    """
    n, d = _check_shape(ds)
    X, Y = ds.x, ds.y
    if n > d:
        raise NoInterpolator(f"n={n} exceeds d={d}")
    if rcond is None:
        rcond = max(n, d) * np.finfo(float).eps
    if method == "auto":
        method = "gram" if d >= 4 * n else "svd"
    if method == "gram":
        evals, U = np.linalg.eigh(X @ X.T)
        evals, U = evals[::-1], U[:, ::-1]
        smax2 = max(evals[0], 0.0)
        if smax2 > 0 and evals[-1] > 1e-10 * smax2:
            s = np.sqrt(evals)
            w = X.T @ (U @ ((U.T @ Y) / evals))
            stats = {"method": "gram", "rank": n, "s_max": float(s[0]), "s_min": float(s[-1])}
            return _finish(ds, w, "l2", spec, stats)
        method = "svd"
    if method != "svd":
        raise ValueError(f"unknown method {method!r}")
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    smax = s[0] if s.size else 0.0
    keep = s > rcond * smax if smax > 0 else np.zeros_like(s, dtype=bool)
    rank = int(keep.sum())
    coef = (U[:, keep].T @ Y) / s[keep]
    w = Vt[keep].T @ coef
    stats = {"method": "svd", "rank": rank, "s_max": float(smax),
             "s_min": float(s[keep][-1]) if rank else 0.0}
    if rank < n and not _residual_ok(X, w, Y):
        raise NoInterpolator(f"effective rank {rank} < n={n} and Y is not in the range of X")
    return _finish(ds, w, "l2", spec, stats)


# ---------------------------------------------------------------------------
# l1 (basis pursuit)

def _affine_projector(X):
    try:
        cf = sla.cho_factor(X @ X.T)
    except np.linalg.LinAlgError as exc:
        raise NoInterpolator("X X^T is singular") from exc
    return np.ascontiguousarray(sla.cho_solve(cf, X).T)


def _scaled_dual_gap(X, Y, lam, primal, dual_norm_ord):
    """Duality gap after scaling ``lam`` into the dual feasible set."""
    viol = np.linalg.norm(X.T @ lam, ord=dual_norm_ord)
    if viol == 0:
        return primal, lam
    lam = lam / max(1.0, viol)
    return primal - float(Y @ lam), lam


def _bp_vertex_certificate(X, Y, v):
    """Try to certify optimality of the basis spanned by the n largest |v_i|.

    Solves ``X_S w_S = Y`` and the dual system ``X_S^T lam = sign(w_S)`` on
    the active part; returns ``(w, lam, gap)`` or ``None``.
    """
    n, d = X.shape
    S = np.argsort(-np.abs(v), kind="stable")[:n]
    XS = X[:, S]
    try:
        wS = np.linalg.solve(XS, Y)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(wS)):
        return None
    w = np.zeros(d)
    w[S] = wS
    if not _residual_ok(X, w, Y, 1e-10):
        return None
    active = np.abs(wS) > 1e-12 * np.max(np.abs(wS))
    A = XS[:, active]
    lam = np.linalg.lstsq(A.T, np.sign(wS[active]), rcond=None)[0]
    gap, lam = _scaled_dual_gap(X, Y, lam, float(np.abs(w).sum()), np.inf)
    return w, lam, gap


def _independent_columns(X, order, tol=1e-10):
    """First ``n`` linearly independent columns of ``X`` along ``order``."""
    n = X.shape[0]
    Q = np.zeros((n, n))
    chosen = []
    for j in order:
        col = X[:, j]
        nrm = np.linalg.norm(col)
        if nrm == 0:
            continue
        r = col - Q[:, :len(chosen)] @ (Q[:, :len(chosen)].T @ col)
        r -= Q[:, :len(chosen)] @ (Q[:, :len(chosen)].T @ r)
        rn = np.linalg.norm(r)
        if rn > tol * nrm:
            Q[:, len(chosen)] = r / rn
            chosen.append(int(j))
            if len(chosen) == n:
                break
    return chosen


def _bp_crossover(X, Y, order, max_pivots=None, tol=1e-12):
    """Primal simplex for ``min 1^T p s.t. [X, -X] p = Y, p >= 0``.

    Warm-started from the first independent columns along ``order``; signing
    each column by the basic solution makes the start primal feasible.
    Dantzig pricing, switching to Bland's rule after a run of degenerate
    pivots.  Returns ``(w, lam, pivots)`` with ``lam`` the basis dual.
    """
    n, d = X.shape
    basis = _independent_columns(X, order)
    if len(basis) < n:
        raise NoInterpolator("X does not have full row rank")
    basis = np.array(basis)
    wB = np.linalg.solve(X[:, basis], Y)
    signs = np.where(wB < 0, -1.0, 1.0)
    max_pivots = 50 * n + 1000 if max_pivots is None else max_pivots
    degenerate = 0
    for pivots in range(max_pivots + 1):
        B = X[:, basis] * signs
        lu = sla.lu_factor(B)
        xB = np.maximum(sla.lu_solve(lu, Y), 0.0)
        lam = sla.lu_solve(lu, np.ones(n), trans=1)
        g = X.T @ lam
        viol = np.abs(g) - 1.0
        viol[basis] = 0.0
        if viol.max() <= tol:
            w = np.zeros(d)
            w[basis] = signs * xB
            return w, lam, pivots
        if pivots == max_pivots:
            break
        j = int(np.flatnonzero(viol > tol)[0]) if degenerate > 2 * n else int(np.argmax(viol))
        sj = 1.0 if g[j] > 0 else -1.0
        dB = sla.lu_solve(lu, sj * X[:, j])
        pos = np.flatnonzero(dB > 1e-12)
        if pos.size == 0:
            raise SolverError("basis pursuit crossover found an unbounded ray")
        ratios = xB[pos] / dB[pos]
        best = ratios.min()
        ties = pos[ratios <= best + 1e-15]
        leave = int(ties[np.argmin(basis[ties])])
        degenerate = degenerate + 1 if best <= 1e-15 else 0
        basis[leave] = j
        signs[leave] = sj
    raise NotConverged(f"basis pursuit crossover exceeded {max_pivots} pivots")


def min_l1_interpolator(ds, tol=1e-8, spec=None, rho=1.0, max_iter=50_000,
                        abs_tol=1e-10, rel_tol=1e-8, crossover_after=2000):
    """Basis pursuit ``min ||w||_1 s.t. Xw = Y`` by ADMM.

    The ADMM iterate is periodically polished into a vertex: the n largest
    coordinates form a basis, the primal is solved exactly on it and the dual
    ``lam`` from the sign pattern.  The point is accepted once the LP duality
    gap ``||w||_1 - Y^T lam`` (with ``lam`` scaled to ``||X^T lam||_inf <= 1``)
    is below ``tol * max(1, ||w||_1)``.  When the support guess keeps missing
    (tiny optimal coordinates that ADMM holds at zero), ``crossover_after``
    iterations in the ADMM ordering seeds a primal simplex that finishes at an
    exact vertex with its basis dual as the certificate.
    """
    n, d = _check_shape(ds)
    X = np.ascontiguousarray(ds.x)
    Y = np.ascontiguousarray(ds.y, dtype=float)
    if n > d:
        raise NoInterpolator(f"n={n} exceeds d={d}")
    if not np.any(Y):
        return _finish(ds, np.zeros(d), "l1", spec, {"iterations": 0, "duality_gap": 0.0, "polished": True})
    proj = _affine_projector(X)
    x = proj @ Y
    z = x.copy()
    u = np.zeros(d)
    total = 0
    chunk = 25
    r = s = np.inf
    while True:
        steps = min(chunk, max_iter - total)
        rho, it, r, s, converged = kernels.admm_bp(X, proj, Y, x, z, u, rho, steps, abs_tol, rel_tol)
        total += it
        cert = _bp_vertex_certificate(X, Y, z if np.any(z) else x)
        if cert is not None and cert[2] <= tol * max(1.0, float(np.abs(cert[0]).sum())):
            w, lam, gap = cert
            stats = {"iterations": total, "primal_residual": r, "dual_residual": s,
                     "rho": rho, "duality_gap": gap, "polished": True, "pivots": 0}
            return _finish(ds, w, "l1", spec, stats)
        if converged or total >= crossover_after or total >= max_iter:
            break
        if total >= 500:
            chunk = 100
    # hand the ADMM support guess to the simplex: nonzeros of z by size,
    # then the coordinates whose dual constraint is closest to active
    key = np.where(z != 0, 2.0 + np.abs(z), np.abs(rho * u))
    order = np.argsort(-key, kind="stable")
    w, lam, pivots = _bp_crossover(X, Y, order)
    gap, _ = _scaled_dual_gap(X, Y, lam, float(np.abs(w).sum()), np.inf)
    if gap > tol * max(1.0, float(np.abs(w).sum())):
        raise NotConverged(f"basis pursuit duality gap {gap:.3g} above tolerance")
    stats = {"iterations": total, "primal_residual": r, "dual_residual": s, "rho": rho,
             "duality_gap": gap, "polished": True, "pivots": pivots}
    return _finish(ds, w, "l1", spec, stats)


# ---------------------------------------------------------------------------
# linf

def min_linf_interpolator(ds, tol=1e-8, spec=None):
    """``min ||w||_inf s.t. Xw = Y`` as a linear program (HiGHS)."""
    n, d = _check_shape(ds)
    X, Y = ds.x, ds.y
    if n > d:
        raise NoInterpolator(f"n={n} exceeds d={d}")
    if not np.any(Y):
        return _finish(ds, np.zeros(d), "linf", spec, {"duality_gap": 0.0})
    c = np.zeros(d + 1)
    c[-1] = 1.0
    eye = np.eye(d)
    ones = np.ones((d, 1))
    A_ub = np.block([[eye, -ones], [-eye, -ones]])
    A_eq = np.hstack([X, np.zeros((n, 1))])
    bounds = [(None, None)] * d + [(0, None)]
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(2 * d), A_eq=A_eq, b_eq=Y, bounds=bounds,
                  method="highs", options={"primal_feasibility_tolerance": 1e-10,
                                           "dual_feasibility_tolerance": 1e-10})
    if res.status == 2:
        raise NoInterpolator("linear program infeasible")
    if res.status != 0:
        raise NotConverged(f"HiGHS status {res.status}: {res.message}")
    w = res.x[:d]
    proj = _affine_projector(X)
    w = w - proj @ (X @ w - Y)
    nu = np.asarray(res.eqlin.marginals, dtype=float)
    primal = float(np.max(np.abs(w)))
    gap = min(_scaled_dual_gap(X, Y, cand, primal, 1)[0] for cand in (nu, -nu))
    return _finish(ds, w, "linf", spec, {"duality_gap": gap, "iterations": int(res.nit)})


def min_norm_interpolator(ds, norm, spec=None):
    norm = parse_norm(norm)
    if norm == "l2":
        return min_l2_interpolator(ds, spec=spec)
    if norm == "l1":
        return min_l1_interpolator(ds, spec=spec)
    return min_linf_interpolator(ds, spec=spec)


# ---------------------------------------------------------------------------
# worst case inside an l2 ball

def _null_basis(X):
    n, d = X.shape
    U, s, Vt = np.linalg.svd(X, full_matrices=True)
    tol = max(n, d) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank = int((s > tol).sum())
    return Vt[rank:].T


def _trs_max(A, g, radius, bisect_tol=1e-12):
    """Maximise ``2 g^T z + z^T A z`` over ``||z|| <= radius`` for PSD ``A``.

    Returns ``(z, mu, hard_case)`` where ``mu >= lambda_max(A)`` is the
    multiplier of the boundary constraint, ``(mu I - A) z = g``.
    """
    p = g.shape[0]
    if p == 0 or radius == 0.0:
        return np.zeros(p), 0.0, False
    lam, Q = np.linalg.eigh(A)
    lam, Q = lam[::-1], Q[:, ::-1]
    b = Q.T @ g
    lmax = lam[0]
    scale = max(1.0, abs(lmax))
    top = lam >= lmax - 1e-10 * scale
    bnorm = np.linalg.norm(b)

    def ynorm(mu):
        return np.linalg.norm(b / (mu - lam))

    hard = False
    if bnorm == 0.0:
        hard = True
    else:
        lo, hi = lmax, lmax + bnorm / radius
        # ||y(mu)|| is decreasing on (lmax, inf) and <= radius at hi
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if ynorm(mid) > radius:
                lo = mid
            else:
                hi = mid
            if hi - lo <= bisect_tol * max(1.0, abs(hi)):
                break
        mu = hi
        if mu - lmax <= 1e-10 * scale:
            hard = True
    if hard:
        mu = lmax
        y = np.zeros(p)
        rest = ~top
        y[rest] = b[rest] / (lmax - lam[rest])
        slack = radius ** 2 - float(y @ y)
        if slack < 0:
            y *= radius / np.linalg.norm(y)
            slack = 0.0
        j = int(np.argmax(np.abs(b) * top)) if np.any(b[top]) else 0
        sign = 1.0 if b[j] >= 0 else -1.0
        y[j] += sign * np.sqrt(slack)
    else:
        y = b / (mu - lam)
        y *= radius / np.linalg.norm(y)
    return Q @ y, mu, hard


def worst_case_l2_interpolator(spec, ds, B):
    """Exact ``max L(w)`` over ``{Xw = Y, ||w||_2 <= B}``.

    Writing ``w = w_hat + N z`` with ``N`` an orthonormal basis of null(X)
    turns the problem into a trust-region maximisation of the convex
    quadratic ``||w_hat - w* + N z||_Sigma^2`` over ``||z|| <= rho``, solved
    through the eigendecomposition of ``N^T Sigma N`` and bisection on the
    secular equation.
    """
    base = min_l2_interpolator(ds, spec=spec, method="svd")
    w_hat = base.w
    m = base.norm_value
    B = float(B)
    if B < m * (1 - 1e-12):
        raise Infeasible(f"ball radius {B:.6g} below minimum norm {m:.6g}")
    rho = np.sqrt(max(B * B - m * m, 0.0))
    N = _null_basis(ds.x)
    Sig = spec.cov.matrix()
    A = N.T @ Sig @ N
    A = 0.5 * (A + A.T)
    g = N.T @ (Sig @ (w_hat - spec.w_full))
    z, mu, hard = _trs_max(A, g, rho)
    w = w_hat + N @ z
    nw = np.linalg.norm(w)
    if nw > B * (1 + 1e-10) and np.linalg.norm(z) > 0:
        z *= 1 - 1e-12
        w = w_hat + N @ z
    kkt = 0.0
    if z.size and rho > 0:
        scale = np.linalg.norm(g) + np.linalg.norm(A, 2) * rho + abs(mu) * rho
        kkt = float(np.linalg.norm(A @ z - mu * z + g) / max(scale, 1e-300)) if scale > 0 else 0.0
    if kkt > 1e-8:
        raise IllConditioned(f"trust-region KKT residual {kkt:.3g} exceeds 1e-8")
    if not _residual_ok(ds.x, w, ds.y):
        raise IllConditioned("worst-case point does not interpolate to 1e-8")
    w.setflags(write=False)
    return WorstCaseResult(w=w, value=population_loss(spec, w), ball_radius=B, certificate="exact",
                           kkt_residual=kkt, solver_stats={"multiplier": float(mu), "hard_case": hard,
                                                           "null_dim": int(N.shape[1])})


# ---------------------------------------------------------------------------
# worst case inside an l1 ball (witness only)

def _l1_line_max(base, direction, B):
    """Largest t >= 0 with ``||base + t direction||_1 <= B`` (``base`` feasible)."""
    if not np.any(direction):
        return 0.0
    lo, hi = 0.0, 1.0
    while np.abs(base + hi * direction).sum() <= B and hi < 1e12:
        lo, hi = hi, 2 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.abs(base + mid * direction).sum() <= B:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    return lo


def _feasibility_polish(w, w_bp, X, Y, proj, B):
    """Exact affine projection, then pull toward ``w_bp`` until ``||w||_1 <= B``."""
    w_aff = w - proj @ (X @ w - Y)
    if np.abs(w_aff).sum() <= B:
        return w_aff
    t = _l1_line_max(w_bp, w_aff - w_bp, B)
    return w_bp + min(t, 1.0) * (w_aff - w_bp)


def _l1_vertex_lp(X, Y, B, g):
    """A vertex maximising ``g^T w`` over ``{Xw = Y, ||w||_1 <= B}`` (None if the LP fails)."""
    n, d = X.shape
    res = linprog(np.concatenate([-g, g]), A_ub=np.ones((1, 2 * d)), b_ub=[B],
                  A_eq=np.hstack([X, -X]), b_eq=Y, bounds=(0, None), method="highs")
    if res.status != 0:
        return None
    return res.x[:d] - res.x[d:]


def _vertex_ascent(spec, X, Y, B, w, val, max_steps=50):
    """Successive linearisation: ``w <- argmax_{feasible} grad L(w)^T v``.

    For the convex loss each step cannot decrease ``L`` and lands on a
    vertex of the polytope, where convex maxima live.
    """
    for _ in range(max_steps):
        g = 2.0 * spec.cov.apply(w - spec.w_full)
        v = _l1_vertex_lp(X, Y, B, g)
        if v is None or not _residual_ok(X, v, Y):
            break
        new = population_loss(spec, v)
        if new <= val * (1 + 1e-14):
            break
        w, val = v, new
    return w, val


def worst_case_l1_witness(spec, ds, B, restarts=16, seed=0, n_iter=300, proj_iter=500):
    """Best feasible point found for ``max L(w)`` over ``{Xw = Y, ||w||_1 <= B}``.

    Multi-start projected gradient ascent, the projection onto the
    intersection being computed by Dykstra's alternating projections; each
    end point is then pushed to a vertex by successive linear programs.  The
    result is a lower bound on the maximum, not a certificate.
    """
    from .rng import make_rng

    bp = min_l1_interpolator(ds, spec=spec)
    w_bp = np.array(bp.w)
    B = float(B)
    if B < bp.norm_value * (1 - 1e-9):
        raise Infeasible(f"ball radius {B:.6g} below basis-pursuit norm {bp.norm_value:.6g}")
    B_eff = max(B, float(np.abs(w_bp).sum()))
    X = np.ascontiguousarray(ds.x)
    Y = np.ascontiguousarray(ds.y, dtype=float)
    proj = _affine_projector(X)
    Sig = np.ascontiguousarray(spec.cov.matrix())
    w_star = np.ascontiguousarray(spec.w_full)
    step = 10.0 / max(spec.cov.op_norm, 1e-300)
    N = _null_basis(X)
    rng = make_rng(seed)
    starts = [w_bp]
    for _ in range(max(restarts - 1, 0)):
        if N.shape[1] == 0:
            break
        direction = N @ rng.standard_normal(N.shape[1])
        starts.append(w_bp + _l1_line_max(w_bp, direction, B_eff) * direction)
    best_w, best_val = w_bp, population_loss(spec, w_bp)
    for w0 in starts:
        if spec.cov.is_zero or N.shape[1] == 0:
            break
        w = kernels.pga_l1(np.ascontiguousarray(w0), Sig, w_star, X, proj, Y, B_eff, step,
                           n_iter, proj_iter, 1e-13)
        w = _feasibility_polish(w, w_bp, X, Y, proj, B_eff)
        w, val = _vertex_ascent(spec, X, Y, B_eff, w, population_loss(spec, w))
        if val > best_val:
            best_w, best_val = w, val
    grad = 2.0 * Sig @ (best_w - w_star)
    moved = kernels.pga_l1(np.ascontiguousarray(best_w), Sig, w_star, X, proj, Y, B_eff, step, 1,
                           proj_iter, 1e-13)
    kkt = float(np.linalg.norm(moved - best_w) / step) / max(1.0, np.linalg.norm(grad))
    best_w = np.array(best_w)
    best_w.setflags(write=False)
    return WorstCaseResult(w=best_w, value=float(best_val), ball_radius=B, certificate="lower_bound_witness",
                           kkt_residual=kkt, solver_stats={"restarts": len(starts), "bp_norm": bp.norm_value})
