"""Hot inner loops, each with a numba kernel and a numpy fallback.

Public names at the bottom dispatch to one implementation depending on
``_accel.USE_NUMBA``.  Both implementations are importable directly (``NUMBA``
and ``NUMPY`` namespaces) so tests and the benchmark can compare them.
"""
from types import SimpleNamespace

import numpy as np

from . import _accel
from ._accel import jit


# ---------------------------------------------------------------------------
# l1-ball projection (sort based)

def _project_l1_ball_py(v, radius):
    d = v.shape[0]
    out = np.empty(d)
    if radius <= 0.0:
        out[:] = 0.0
        return out
    a = np.abs(v)
    if a.sum() <= radius:
        out[:] = v
        return out
    mu = np.sort(a)[::-1]
    cs = 0.0
    theta = 0.0
    for j in range(d):
        cs += mu[j]
        t = (cs - radius) / (j + 1)
        if mu[j] - t > 0.0:
            theta = t
    for i in range(d):
        m = a[i] - theta
        if m > 0.0:
            out[i] = m if v[i] > 0.0 else -m
        else:
            out[i] = 0.0
    return out


def _project_l1_ball_np(v, radius):
    v = np.asarray(v, dtype=float)
    if radius <= 0.0:
        return np.zeros_like(v)
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    mu = np.sort(a)[::-1]
    cs = np.cumsum(mu)
    j = np.arange(1, v.size + 1)
    t = (cs - radius) / j
    k = np.nonzero(mu - t > 0)[0][-1]
    return np.sign(v) * np.maximum(a - t[k], 0.0)


# ---------------------------------------------------------------------------
# ADMM for basis pursuit:  min ||z||_1  s.t.  x in {Xx = Y},  x = z
# ``proj`` is X^T (X X^T)^{-1}, so the affine projection is v - proj (X v - Y).
# x, z, u are updated in place; u is the scaled dual variable.

def _admm_bp_py(X, proj, Y, x, z, u, rho, max_steps, abs_tol, rel_tol):
    d = x.shape[0]
    sqrt_d = np.sqrt(d)
    z_old = np.empty(d)
    r = 0.0
    s = 0.0
    converged = False
    it = 0
    while it < max_steps:
        it += 1
        v = z - u
        res = np.dot(X, v) - Y
        x[:] = v - np.dot(proj, res)
        z_old[:] = z
        kappa = 1.0 / rho
        r2 = 0.0
        s2 = 0.0
        xn = 0.0
        zn = 0.0
        un = 0.0
        for i in range(d):
            t = x[i] + u[i]
            if t > kappa:
                zi = t - kappa
            elif t < -kappa:
                zi = t + kappa
            else:
                zi = 0.0
            z[i] = zi
            diff = x[i] - zi
            u[i] += diff
            r2 += diff * diff
            dz = zi - z_old[i]
            s2 += dz * dz
            xn += x[i] * x[i]
            zn += zi * zi
            un += u[i] * u[i]
        r = np.sqrt(r2)
        s = rho * np.sqrt(s2)
        eps_pri = sqrt_d * abs_tol + rel_tol * max(np.sqrt(xn), np.sqrt(zn))
        eps_dual = sqrt_d * abs_tol + rel_tol * rho * np.sqrt(un)
        if r <= eps_pri and s <= eps_dual:
            converged = True
            break
        if r > 10.0 * s:
            rho *= 2.0
            for i in range(d):
                u[i] *= 0.5
        elif s > 10.0 * r:
            rho *= 0.5
            for i in range(d):
                u[i] *= 2.0
    return rho, it, r, s, converged


def _admm_bp_np(X, proj, Y, x, z, u, rho, max_steps, abs_tol, rel_tol):
    sqrt_d = np.sqrt(x.size)
    r = s = 0.0
    converged = False
    it = 0
    while it < max_steps:
        it += 1
        v = z - u
        x[:] = v - proj @ (X @ v - Y)
        t = x + u
        z_new = np.sign(t) * np.maximum(np.abs(t) - 1.0 / rho, 0.0)
        s = rho * np.linalg.norm(z_new - z)
        z[:] = z_new
        u += x - z
        r = np.linalg.norm(x - z)
        eps_pri = sqrt_d * abs_tol + rel_tol * max(np.linalg.norm(x), np.linalg.norm(z))
        eps_dual = sqrt_d * abs_tol + rel_tol * rho * np.linalg.norm(u)
        if r <= eps_pri and s <= eps_dual:
            converged = True
            break
        if r > 10.0 * s:
            rho *= 2.0
            u *= 0.5
        elif s > 10.0 * r:
            rho *= 0.5
            u *= 2.0
    return rho, it, r, s, converged


# ---------------------------------------------------------------------------
# max_{s in {-1,1}^d} s^T M s, by Gray-code enumeration (s_0 fixed to +1
# since the objective is even in s).

def _max_sign_quadratic_py(M):
    d = M.shape[0]
    s = np.ones(d)
    y = np.empty(d)
    for i in range(d):
        acc = 0.0
        for j in range(d):
            acc += M[i, j]
        y[i] = acc
    q = 0.0
    for i in range(d):
        q += y[i]
    best = q
    if d <= 1:
        return best
    for g in range(1, 1 << (d - 1)):
        # bit that flips between Gray codes g-1 and g, shifted past s_0
        j = 1
        h = g
        while (h & 1) == 0:
            h >>= 1
            j += 1
        sj = s[j]
        q = q - 4.0 * sj * y[j] + 4.0 * M[j, j]
        for i in range(d):
            y[i] -= 2.0 * sj * M[i, j]
        s[j] = -sj
        if q > best:
            best = q
    return best


def _max_sign_quadratic_np(M, block=1 << 14):
    M = np.asarray(M, dtype=float)
    d = M.shape[0]
    if d <= 1:
        return float(M.sum())
    total = 1 << (d - 1)
    bits = np.arange(d - 1, dtype=np.int64)
    best = -np.inf
    for start in range(0, total, block):
        idx = np.arange(start, min(start + block, total), dtype=np.int64)
        S = np.ones((idx.size, d))
        S[:, 1:] = 1.0 - 2.0 * ((idx[:, None] >> bits) & 1)
        vals = np.einsum("ij,ij->i", S @ M, S)
        best = max(best, float(vals.max()))
    return best


# ---------------------------------------------------------------------------
# Projected gradient ascent of (w - w*)^T S (w - w*) over
# {Xw = Y} ∩ {||w||_1 <= B}; the projection onto the intersection is
# computed with Dykstra's alternating scheme.

def _dykstra_py(v, X, proj, Y, radius, n_iter, tol):
    d = v.shape[0]
    x = v.copy()
    p = np.zeros(d)
    q = np.zeros(d)
    for _ in range(n_iter):
        a = x + p
        yv = a - np.dot(proj, np.dot(X, a) - Y)
        p = a - yv
        b = yv + q
        x_new = _project_l1_ball_py(b, radius)
        q = b - x_new
        change = 0.0
        for i in range(d):
            diff = x_new[i] - x[i]
            change += diff * diff
        x = x_new
        if np.sqrt(change) <= tol:
            break
    return x


def _pga_l1_py(w0, S, w_star, X, proj, Y, radius, step, n_iter, proj_iter, tol):
    w = w0.copy()
    for _ in range(n_iter):
        g = 2.0 * np.dot(S, w - w_star)
        w_new = _dykstra_py(w + step * g, X, proj, Y, radius, proj_iter, tol)
        change = 0.0
        for i in range(w.shape[0]):
            diff = w_new[i] - w[i]
            change += diff * diff
        w = w_new
        if np.sqrt(change) <= tol:
            break
    return w


def _dykstra_np(v, X, proj, Y, radius, n_iter, tol):
    x = v.copy()
    p = np.zeros_like(v)
    q = np.zeros_like(v)
    for _ in range(n_iter):
        a = x + p
        yv = a - proj @ (X @ a - Y)
        p = a - yv
        b = yv + q
        x_new = _project_l1_ball_np(b, radius)
        q = b - x_new
        done = np.linalg.norm(x_new - x) <= tol
        x = x_new
        if done:
            break
    return x


def _pga_l1_np(w0, S, w_star, X, proj, Y, radius, step, n_iter, proj_iter, tol):
    w = w0.copy()
    for _ in range(n_iter):
        g = 2.0 * S @ (w - w_star)
        w_new = _dykstra_np(w + step * g, X, proj, Y, radius, proj_iter, tol)
        done = np.linalg.norm(w_new - w) <= tol
        w = w_new
        if done:
            break
    return w


# ---------------------------------------------------------------------------

NUMPY = SimpleNamespace(
    project_l1_ball=_project_l1_ball_np,
    admm_bp=_admm_bp_np,
    max_sign_quadratic=_max_sign_quadratic_np,
    pga_l1=_pga_l1_np,
    name="numpy",
)

if _accel.HAVE_NUMBA:
    _project_l1_ball_nb = jit(_project_l1_ball_py)

    def _make_numba():
        # the compiled Dykstra loop has to call the compiled projection
        proj_l1 = _project_l1_ball_nb

        def dykstra(v, X, proj, Y, radius, n_iter, tol):
            d = v.shape[0]
            x = v.copy()
            p = np.zeros(d)
            q = np.zeros(d)
            for _ in range(n_iter):
                a = x + p
                yv = a - np.dot(proj, np.dot(X, a) - Y)
                p = a - yv
                b = yv + q
                x_new = proj_l1(b, radius)
                q = b - x_new
                change = 0.0
                for i in range(d):
                    diff = x_new[i] - x[i]
                    change += diff * diff
                x = x_new
                if np.sqrt(change) <= tol:
                    break
            return x

        dykstra_nb = jit(dykstra)

        def pga(w0, S, w_star, X, proj, Y, radius, step, n_iter, proj_iter, tol):
            w = w0.copy()
            for _ in range(n_iter):
                g = 2.0 * np.dot(S, w - w_star)
                w_new = dykstra_nb(w + step * g, X, proj, Y, radius, proj_iter, tol)
                change = 0.0
                for i in range(w.shape[0]):
                    diff = w_new[i] - w[i]
                    change += diff * diff
                w = w_new
                if np.sqrt(change) <= tol:
                    break
            return w

        return SimpleNamespace(
            project_l1_ball=proj_l1,
            admm_bp=jit(_admm_bp_py),
            max_sign_quadratic=jit(_max_sign_quadratic_py),
            pga_l1=jit(pga),
            name="numba",
        )

    NUMBA = _make_numba()
else:  # pragma: no cover
    NUMBA = None

ACTIVE = NUMBA if _accel.USE_NUMBA else NUMPY


def project_l1_ball(v, radius):
    """Euclidean projection of ``v`` onto {w : ||w||_1 <= radius}."""
    return ACTIVE.project_l1_ball(np.ascontiguousarray(v, dtype=float), float(radius))


def admm_bp(X, proj, Y, x, z, u, rho, max_steps, abs_tol, rel_tol):
    return ACTIVE.admm_bp(X, proj, Y, x, z, u, float(rho), int(max_steps), float(abs_tol), float(rel_tol))


def max_sign_quadratic(M):
    """max over sign vectors s of s^T M s (exponential in the dimension)."""
    return float(ACTIVE.max_sign_quadratic(np.ascontiguousarray(M, dtype=float)))


def pga_l1(w0, S, w_star, X, proj, Y, radius, step, n_iter, proj_iter, tol):
    return ACTIVE.pga_l1(w0, S, w_star, X, proj, Y, float(radius), float(step), int(n_iter), int(proj_iter), float(tol))
