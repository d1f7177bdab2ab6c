"""Gaussian linear model: covariances, problem specs, datasets and losses.

Data follow ``Y = X w* + xi`` with rows of ``X`` iid ``N(0, Sigma)`` and
``xi ~ N(0, sigma^2 I_n)``.  The population loss of a predictor ``w`` is
``sigma^2 + (w - w*)^T Sigma (w - w*)`` and the empirical loss is the mean
squared training residual.

A :class:`CovarianceModel` is stored as a run-length encoded spectrum.  For a
diagonal covariance the runs are laid out in coordinate order, so a model such
as ``diag(1, c, c, ..., c)`` with ``2**40`` trailing coordinates costs two
numbers; spectral quantities (trace, effective ranks, Gaussian widths) never
need the expansion.  Only sampling a dataset materialises the coordinates, and
that is capped by :data:`LIMITS`.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch
from .rng import make_rng

# Largest dimensions we are willing to materialise.  ``expand`` guards plain
# numpy expansions of a diagonal (cheap, but 2**80 is not).
LIMITS = {"diagonal": 65536, "dense": 4096, "expand": 50_000_000}

_PSD_TOL = 1e-14
_ORTHO_TOL = 1e-10


def _run_length(values):
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return np.zeros(0), ()
    breaks = np.flatnonzero(values[1:] != values[:-1]) + 1
    starts = np.concatenate(([0], breaks))
    ends = np.concatenate((breaks, [values.size]))
    return values[starts].copy(), tuple(int(c) for c in ends - starts)


def _clamp_spectrum(values):
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return values
    if not np.all(np.isfinite(values)):
        raise ValueError("covariance eigenvalues must be finite")
    top = max(float(values.max()), 0.0)
    floor = -_PSD_TOL * top
    if np.any(values < floor) or (top == 0.0 and np.any(values < 0)):
        raise ValueError("covariance eigenvalues must be non-negative")
    return np.where(values < 0.0, 0.0, values)


class CovarianceModel:
    """A PSD covariance ``Sigma = basis diag(eigenvalues) basis^T``.

    ``CovarianceModel(eigenvalues, basis=None)`` takes a non-increasing
    spectrum; without a basis Sigma is ``diag(eigenvalues)``.  Use
    :meth:`diagonal` for a diagonal in arbitrary coordinate order and
    :meth:`from_blocks` for huge piecewise-constant diagonals.
    """

    def __init__(self, eigenvalues, basis=None):
        lam = _clamp_spectrum(np.ravel(eigenvalues))
        if lam.size == 0:
            raise ValueError("covariance dimension must be positive")
        if np.any(np.diff(lam) > 0):
            raise ValueError("eigenvalues must be sorted non-increasing")
        if basis is not None:
            basis = np.array(basis, dtype=float)
            d = lam.size
            if basis.shape != (d, d):
                raise DimensionMismatch(f"basis must be {d}x{d}, got {basis.shape}")
            if d > LIMITS["dense"]:
                raise ValueError(f"dense covariance dimension {d} exceeds cap {LIMITS['dense']}")
            if np.max(np.abs(basis.T @ basis - np.eye(d))) > _ORTHO_TOL:
                raise ValueError("basis is not orthonormal within 1e-10")
            basis.setflags(write=False)
        vals, counts = _run_length(lam)
        self._set(vals, counts, basis)

    def _set(self, vals, counts, basis):
        self._vals = np.asarray(vals, dtype=float)
        self._vals.setflags(write=False)
        self._counts = tuple(int(c) for c in counts)
        if any(c <= 0 for c in self._counts):
            raise ValueError("block counts must be positive")
        self._cnt = np.array(self._counts, dtype=float)
        self._starts = tuple(int(s) for s in np.concatenate(([0], np.cumsum(self._counts, dtype=object)[:-1])))
        self._dim = int(sum(self._counts))
        self._basis = basis
        self._cache = {}

    @classmethod
    def diagonal(cls, diag):
        """Diagonal covariance with ``Sigma_ii = diag[i]`` (any order)."""
        vals, counts = _run_length(_clamp_spectrum(np.ravel(diag)))
        if not counts:
            raise ValueError("covariance dimension must be positive")
        obj = cls.__new__(cls)
        obj._set(vals, counts, None)
        return obj

    @classmethod
    def from_blocks(cls, blocks):
        """Diagonal covariance from ``[(value, count), ...]`` runs in coordinate order.

        Counts may be arbitrarily large Python integers.
        """
        blocks = [(float(v), int(c)) for v, c in blocks if int(c) != 0]
        if not blocks:
            raise ValueError("covariance dimension must be positive")
        vals = _clamp_spectrum([v for v, _ in blocks])
        obj = cls.__new__(cls)
        obj._set(vals, [c for _, c in blocks], None)
        return obj

    @classmethod
    def identity(cls, d, scale=1.0):
        return cls.from_blocks([(scale, d)])

    # -- structure --------------------------------------------------------
    @property
    def dim(self):
        return self._dim

    @property
    def basis(self):
        return self._basis

    @property
    def is_diagonal(self):
        return self._basis is None

    @property
    def blocks(self):
        """Runs ``(value, count)`` of the diagonal core, in storage order."""
        return list(zip(self._vals.tolist(), self._counts))

    def groups(self):
        """Distinct eigenvalues (decreasing) and their multiplicities as floats."""
        if "groups" not in self._cache:
            uniq, inv = np.unique(self._vals, return_inverse=True)
            cnt = np.zeros(uniq.size)
            np.add.at(cnt, inv, self._cnt)
            self._cache["groups"] = (uniq[::-1].copy(), cnt[::-1].copy())
        return self._cache["groups"]

    def _expand_core(self):
        if self._dim > LIMITS["expand"]:
            raise ValueError(f"dimension {self._dim} is too large to expand")
        return np.repeat(self._vals, self._counts)

    @property
    def eigenvalues(self):
        """Spectrum sorted non-increasing, as a length-d array."""
        if "eig" not in self._cache:
            lam = np.sort(self._expand_core())[::-1].copy()
            lam.setflags(write=False)
            self._cache["eig"] = lam
        return self._cache["eig"]

    def diag(self):
        """Coordinate variances ``Sigma_ii``."""
        if "diag" not in self._cache:
            core = self._expand_core()
            if self._basis is None:
                out = core
            else:
                out = (self._basis ** 2) @ core
            out.setflags(write=False)
            self._cache["diag"] = out
        return self._cache["diag"]

    def diag_prefix(self, m):
        """``Sigma_ii`` for the first ``m`` coordinates (diagonal models only)."""
        if self._basis is not None:
            return self.diag()[:m]
        out = np.empty(m)
        for v, c, s in zip(self._vals, self._counts, self._starts):
            if s >= m:
                break
            out[s:min(s + c, m)] = v
        return out

    # -- spectral summaries -------------------------------------------------
    @property
    def trace(self):
        return float(np.dot(self._vals, self._cnt))

    @property
    def trace_sq(self):
        return float(np.dot(self._vals ** 2, self._cnt))

    @property
    def op_norm(self):
        return float(self._vals.max())

    @property
    def rank(self):
        return int(sum(c for v, c in zip(self._vals, self._counts) if v > 0))

    @property
    def max_diag(self):
        if self._basis is None:
            return float(self._vals.max())
        return float(self.diag().max())

    @property
    def is_zero(self):
        return float(self._vals.max()) == 0.0

    def scalar_value(self):
        """``c`` when Sigma = c I exactly, else ``None``."""
        if self._vals.size == 1 or np.all(self._vals == self._vals[0]):
            return float(self._vals[0])
        return None

    def matrix(self):
        d = self._dim
        if d > LIMITS["dense"]:
            raise ValueError(f"dimension {d} exceeds dense cap {LIMITS['dense']}")
        core = self._expand_core()
        if self._basis is None:
            return np.diag(core)
        Q = self._basis
        S = (Q * core) @ Q.T
        return 0.5 * (S + S.T)

    def apply(self, v):
        """``Sigma v`` for a length-d vector."""
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self._dim:
            raise DimensionMismatch(f"vector length {v.shape[0]} != dim {self._dim}")
        core = self._expand_core()
        if self._basis is None:
            return core * v
        Q = self._basis
        return Q @ (core * (Q.T @ v))

    def quad(self, v):
        """``v^T Sigma v``.

        For diagonal models ``v`` may be shorter than ``dim``; missing trailing
        coordinates are zero.
        """
        v = np.asarray(v, dtype=float).ravel()
        m = v.shape[0]
        if m > self._dim or (self._basis is not None and m != self._dim):
            raise DimensionMismatch(f"vector length {m} incompatible with dim {self._dim}")
        if self._basis is None:
            return float(np.dot(self.diag_prefix(m) * v, v))
        u = self._basis.T @ v
        return float(np.dot(self._expand_core() * u, u))

    def sqrt_rows(self, H):
        """Rows ``Sigma^{1/2} h`` for each row ``h`` of ``H`` (symmetric root)."""
        H = np.asarray(H, dtype=float)
        root = np.sqrt(self._expand_core())
        if self._basis is None:
            return H * root
        Q = self._basis
        return ((H @ Q) * root) @ Q.T

    def __repr__(self):
        kind = "diagonal" if self._basis is None else "dense"
        return f"CovarianceModel({kind}, dim={self._dim}, trace={self.trace:.6g})"


@dataclass(frozen=True)
class ProblemSpec:
    """Signal ``w_star``, noise level ``sigma`` and sample size ``n`` over ``cov``.

    ``w_star`` may be shorter than ``cov.dim`` for diagonal covariances; the
    missing trailing coordinates are zero.  This keeps specs over enormous
    implicit dimensions cheap.

    Use :meth:`from_variance` when the noise variance should be held exactly
    (``sqrt(0.5)**2`` is not ``0.5`` in floating point).
    """

    cov: CovarianceModel
    w_star: np.ndarray
    sigma: float
    n: int
    noise_var: float = None

    def __post_init__(self):
        w = np.array(self.w_star, dtype=float).ravel()
        if w.shape[0] > self.cov.dim:
            raise DimensionMismatch(f"w_star has length {w.shape[0]} > dim {self.cov.dim}")
        if w.shape[0] < self.cov.dim and not self.cov.is_diagonal:
            raise DimensionMismatch("w_star must have full length for a dense covariance")
        if not np.all(np.isfinite(w)):
            raise ValueError("w_star must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "w_star", w)
        if not (float(self.sigma) >= 0.0):
            raise ValueError("sigma must be non-negative")
        object.__setattr__(self, "sigma", float(self.sigma))
        var = self.sigma ** 2 if self.noise_var is None else float(self.noise_var)
        object.__setattr__(self, "noise_var", var)
        if int(self.n) != self.n or int(self.n) < 1:
            raise ValueError("n must be a positive integer")
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def from_variance(cls, cov, w_star, noise_var, n):
        noise_var = float(noise_var)
        if not noise_var >= 0.0:
            raise ValueError("noise variance must be non-negative")
        return cls(cov, w_star, math.sqrt(noise_var), n, noise_var)

    @property
    def dim(self):
        return self.cov.dim

    @property
    def w_full(self):
        d = self.cov.dim
        w = self.w_star
        if w.shape[0] == d:
            return w
        out = np.zeros(d)
        out[: w.shape[0]] = w
        return out

    @property
    def null_risk(self):
        return self.noise_var + self.cov.quad(self.w_star)


@dataclass(frozen=True)
class Dataset:
    x: np.ndarray
    xi: np.ndarray
    y: np.ndarray
    seed: int

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def d(self):
        return self.x.shape[1]


def _check_materialisable(cov):
    cap = LIMITS["diagonal"] if cov.is_diagonal else LIMITS["dense"]
    if cov.dim > cap:
        raise ValueError(f"dimension {cov.dim} exceeds sampling cap {cap}")


def sample_dataset(spec, seed):
    """Draw ``(X, xi, Y)``; identical ``(spec, seed)`` give identical bytes.

    ``X`` is generated as ``H Sigma^{1/2}`` with ``H`` an ``n x d`` standard
    normal matrix, then ``xi = sigma g`` from the same stream.
    """
    _check_materialisable(spec.cov)
    rng = make_rng(seed)
    H = rng.standard_normal((spec.n, spec.dim))
    x = spec.cov.sqrt_rows(H)
    xi = spec.sigma * rng.standard_normal(spec.n)
    y = x @ spec.w_full + xi
    for a in (x, xi, y):
        a.setflags(write=False)
    return Dataset(x=x, xi=xi, y=y, seed=int(seed))


def population_loss(spec, w):
    w = np.asarray(w, dtype=float).ravel()
    if w.shape[0] != spec.dim:
        raise DimensionMismatch(f"w has length {w.shape[0]}, expected {spec.dim}")
    return spec.noise_var + spec.cov.quad(w - spec.w_full)


def empirical_loss(ds, w):
    w = np.asarray(w, dtype=float).ravel()
    if w.shape[0] != ds.x.shape[1]:
        raise DimensionMismatch(f"w has length {w.shape[0]}, expected {ds.x.shape[1]}")
    r = ds.y - ds.x @ w
    return float(np.dot(r, r) / ds.x.shape[0])


# ---------------------------------------------------------------------------
# Covariance splits

def _zero_runs(vals, counts, coords, keep):
    """Runs after zeroing (keep=False) or keeping only (keep=True) ``coords``."""
    out = []
    coords = np.asarray(sorted(coords), dtype=object)
    ci = 0
    start = 0
    for v, c in zip(vals, counts):
        end = start + c
        pos = start
        while ci < len(coords) and coords[ci] < end:
            p = int(coords[ci])
            if p > pos:
                out.append((0.0 if keep else v, p - pos))
            out.append((v if keep else 0.0, 1))
            pos = p + 1
            ci += 1
        if end > pos:
            out.append((0.0 if keep else v, end - pos))
        start = end
    return out


@dataclass(frozen=True)
class CovSplit:
    """Eigen-aligned split ``Sigma = Sigma1 + Sigma2``.

    ``sel1`` indexes the non-increasing spectrum (ties broken by lowest
    coordinate) and lists the directions assigned to ``Sigma1``.
    """

    cov: CovarianceModel
    sel1: tuple
    _parts: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        sel = sorted({int(i) for i in self.sel1})
        if sel and (sel[0] < 0 or sel[-1] >= self.cov.dim):
            raise ValueError("split indices out of range")
        object.__setattr__(self, "sel1", tuple(sel))

    @property
    def k(self):
        return len(self.sel1)

    def _coords(self):
        """Storage positions (coordinates, or basis columns) of ``sel1``."""
        if "coords" in self._parts:
            return self._parts["coords"]
        cov = self.cov
        vals = cov._vals
        order = np.argsort(-vals, kind="stable")
        cum = np.cumsum(np.array([cov._counts[b] for b in order], dtype=object))
        coords = []
        for p in self.sel1:
            j = int(np.searchsorted(cum.astype(float), p, side="right"))
            b = int(order[j])
            before = int(cum[j - 1]) if j > 0 else 0
            coords.append(cov._starts[b] + (p - before))
        self._parts["coords"] = coords
        return coords

    def _part(self, which):
        if which in self._parts:
            return self._parts[which]
        cov = self.cov
        coords = self._coords()
        keep = which == "sigma1"
        if cov.is_diagonal:
            part = CovarianceModel.from_blocks(_zero_runs(cov._vals, cov._counts, coords, keep))
        else:
            lam = cov._expand_core()
            mask = np.zeros(cov.dim, dtype=bool)
            mask[coords] = True
            chosen = mask if keep else ~mask
            order = np.concatenate((np.flatnonzero(chosen), np.flatnonzero(~chosen)))
            eig = np.concatenate((lam[chosen], np.zeros(int((~chosen).sum()))))
            part = CovarianceModel(eig, basis=cov.basis[:, order])
        self._parts[which] = part
        return part

    @property
    def sigma1(self):
        return self._part("sigma1")

    @property
    def sigma2(self):
        return self._part("sigma2")

    def w_norm_sigma2(self, w):
        return float(np.sqrt(max(self.sigma2.quad(w), 0.0)))

    def projector(self):
        """Orthogonal projector onto span(Sigma2) as a dense matrix."""
        s2 = self.sigma2
        if s2.is_diagonal:
            return np.diag((s2.diag() > 0).astype(float))
        lam = s2._expand_core()
        Q = s2.basis[:, lam > 0]
        return Q @ Q.T
