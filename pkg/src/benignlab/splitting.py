"""Covariance splits Sigma = Sigma1 + Sigma2 aligned with the eigenbasis."""
import math
import warnings

import numpy as np

from .errors import DegenerateTail, KOutOfRange, LabError, ZeroCovariance
from .model import CovSplit

BOUND_FAMILIES = ("main", "euclid_risk", "general_risk", "bp_risk")


def split_top_k(cov, k):
    """Put the ``k`` largest eigen-directions in Sigma1 (ties: lowest index)."""
    if int(k) != k or not 0 <= k <= cov.dim:
        raise KOutOfRange(f"k={k} outside [0, {cov.dim}]")
    return CovSplit(cov, tuple(range(int(k))))


def _evaluate(spec, split, family, norm, B, delta, variant, samples, seed):
    from . import bounds

    if family == "main":
        return bounds.ucb_main(spec, split, norm, B, delta, variant=variant, samples=samples, seed=seed)
    if family == "euclid_risk":
        return bounds.euclid_suite(spec, split, B, delta, variant=variant)[2]
    if family == "general_risk":
        return bounds.general_norm_suite(spec, split, norm, B, delta, samples=samples, seed=seed,
                                         variant=variant)[2]
    return bounds.bp_suite(spec, split, B, delta, samples=samples, seed=seed, variant=variant)[2]


def scan_splits(spec, delta, bound_family, norm="l2", B=None, variant="theorem", samples=20_000, seed=0):
    """Evaluate the bound at every top-k split, ``k = 0..min(d, n)``.

    Returns a list of ``(k, report)``; ``report`` is ``None`` where the bound
    is undefined (for instance Sigma2 = 0).
    """
    if bound_family not in BOUND_FAMILIES:
        raise ValueError(f"bound_family must be one of {BOUND_FAMILIES}")
    if bound_family == "main" and B is None:
        raise ValueError("the main bound needs a ball radius B")
    out = []
    for k in range(min(spec.dim, spec.n) + 1):
        split = split_top_k(spec.cov, k)
        try:
            rep = _evaluate(spec, split, bound_family, norm, B, delta, variant, samples, seed)
        except (ZeroCovariance, DegenerateTail):
            rep = None
        out.append((k, rep))
    return out


def optimize_split(spec, delta, bound_family, norm="l2", B=None, variant="theorem", samples=20_000,
                   seed=0, return_scan=False):
    """``k`` minimising the chosen bound among valid evaluations.

    If no evaluation passes its validity checks the global minimum is used
    and a warning is issued.  Ties go to the smallest ``k``.
    """
    scan = scan_splits(spec, delta, bound_family, norm, B, variant, samples, seed)
    defined = [(k, r) for k, r in scan if r is not None and np.isfinite(r.value)]
    if not defined:
        raise LabError("the bound is undefined for every split")
    valid = [(k, r) for k, r in defined if r.valid]
    pool = valid
    if not valid:
        warnings.warn(f"no split gives a valid {bound_family} bound; using the unconstrained minimum",
                      RuntimeWarning, stacklevel=2)
        pool = defined
    k_star, rep = min(pool, key=lambda kr: (kr[1].value, kr[0]))
    if return_scan:
        return k_star, rep, scan
    return k_star, rep


def tau_split(cov, k, n, return_info=False):
    """Top-k split enlarged by the threshold set S_tau of the remaining tail.

    With ``v`` the tail spectrum after removing the top ``k`` eigenvalues,
    ``a = ||v||_1^2/||v||_2^2`` and ``b = ||v||_1/||v||_inf``, the threshold
    is chosen so that ``b/(tau a) = (n/a)^{3/4}`` and
    ``S_tau = {i : v_i >= tau ||v||_inf}`` joins Sigma1.
    """
    if int(k) != k or not 0 <= k <= cov.dim:
        raise KOutOfRange(f"k={k} outside [0, {cov.dim}]")
    lam = np.asarray(cov.eigenvalues)
    tail = lam[int(k):]
    l1 = float(tail.sum())
    if tail.size == 0 or l1 == 0.0:
        raise DegenerateTail("the tail spectrum is zero")
    l2sq = float(np.dot(tail, tail))
    vmax = float(tail[0])
    a = l1 * l1 / l2sq
    b = l1 / vmax
    tau = (b / a) * (a / n) ** 0.75
    m = int(np.count_nonzero(tail >= tau * vmax))
    split = CovSplit(cov, tuple(range(int(k) + m)))
    if not return_info:
        return split
    ratio = b / (tau * a)
    kept = float(tail[m:].sum())
    info = {
        "a": a, "b": b, "tau": tau, "s_tau": m, "ratio": ratio,
        "tail_l1": l1, "kept_l1": kept,
        "mass_check": kept >= (1.0 - ratio) * l1,
        "size_check": m <= a * ratio ** 2,
        "mass_check_closed": kept >= (1.0 - (n / a) ** 0.75) * l1,
        "size_check_closed": m <= a * (n / a) ** 1.5,
    }
    return split, info


def spec_split_rank(n, delta):
    """Rank of Sigma1 used for the trace-only bound: ceil(sqrt(n log(32/delta)))."""
    return int(math.ceil(math.sqrt(n * math.log(32.0 / delta))))
