"""Explicit numeric versions of the uniform-convergence and norm bounds.

Every bound is returned as a :class:`BoundReport` holding the value, the
named ingredients it was assembled from, and validity flags for the side
conditions under which the probabilistic guarantee is claimed.  Values are
always computed; flags only say whether the guarantee applies.

Two constant regimes are available through ``variant``:

* ``"theorem"`` uses the stated constants, e.g.
  ``beta = 66 (sqrt(log(1/delta)/n) + sqrt(rank(Sigma1)/n))``;
* ``"appendix_sharp"`` uses the constants that come out of the proofs, e.g.
  ``beta = 33 sqrt(log(32/delta)/n) + 18 sqrt(rank(Sigma1)/n)`` and
  ``1 + gamma = (1 + beta)(1 + 2 sqrt(2 log(32/delta)/r(Sigma2)))^2``.

The Euclidean norm-bound constant ``c2`` (default 64) only has an order of
magnitude behind it for the l2 case and is exposed as a parameter.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .complexity import (DEFAULT_SAMPLES, dual_norm_draws, effective_ranks_l2, expected_max_abs_normal,
                         gaussian_width, radius)
from .errors import (BTooSmall, DeltaOutOfRange, EmptySequence, NotDiagonal, UnsupportedForE4,
                     UnsupportedNorm, ZeroCovariance)
from .norms import norm_value, parse_norm
from .splitting import spec_split_rank, split_top_k

VARIANTS = ("theorem", "appendix_sharp")
C1 = 66.0
C2 = 64.0
C3 = 140.0
C_ISO = 368.0


@dataclass(frozen=True)
class BoundReport:
    name: str
    value: float
    delta: float
    variant: str
    terms: dict = field(default_factory=dict)
    validity: dict = field(default_factory=dict)
    interval: tuple = None

    @property
    def valid(self):
        return all(self.validity.values())


def _check_delta(delta, upper, what):
    if not 0.0 < delta <= upper:
        raise DeltaOutOfRange(f"{what} requires 0 < delta <= {upper:g}, got {delta}")


def _check_variant(variant):
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")


def _as_split(spec, split):
    return split_top_k(spec.cov, 0) if split is None else split


def beta(n, delta, rank1, variant="theorem"):
    """Multiplicative slack of the main bound."""
    _check_variant(variant)
    if variant == "theorem":
        return C1 * (math.sqrt(math.log(1 / delta) / n) + math.sqrt(rank1 / n))
    return 33.0 * math.sqrt(math.log(32 / delta) / n) + 18.0 * math.sqrt(rank1 / n)


def gamma_from_rank(n, delta, rank1, r_eff, variant="theorem"):
    """``gamma`` of the ball-specialised generalization bounds.

    ``r_eff`` is the relevant effective rank of Sigma2 (``r``, ``r_||.||`` or
    ``r_1``).
    """
    _check_variant(variant)
    if variant == "theorem":
        return C1 * (math.sqrt(math.log(1 / delta) / r_eff) + math.sqrt(math.log(1 / delta) / n)
                     + math.sqrt(rank1 / n))
    b = beta(n, delta, rank1, variant)
    return (1 + b) * (1 + 2 * math.sqrt(2 * math.log(32 / delta) / r_eff)) ** 2 - 1


def _interval(fn, centre, se):
    if se <= 0:
        return None
    vals = [fn(max(centre - 3 * se, 1e-300)), fn(centre + 3 * se)]
    return (min(vals), max(vals))


# ---------------------------------------------------------------------------
# main bound

def ucb_main(spec, split=None, norm="l2", B=1.0, delta=0.05, variant="theorem",
             samples=DEFAULT_SAMPLES, seed=0, width_method="auto"):
    """``(1+beta)/n [W + (rad + ||w*||_Sigma2) sqrt(2 log(32/delta))]^2``.

    ``W`` and ``rad`` are the Gaussian width and radius of ``Sigma2^{1/2} K``
    for the ball ``K = {||w|| <= B}``.
    """
    _check_delta(delta, 0.25, "the main bound")
    if not B > 0:
        raise ValueError("B must be positive")
    split = _as_split(spec, split)
    s2 = split.sigma2
    n = spec.n
    wid = gaussian_width(s2, norm, B, samples, seed, method=width_method)
    rad = radius(s2, norm, B)
    sig = split.w_norm_sigma2(spec.w_star)
    L = math.sqrt(2 * math.log(32 / delta))
    b = beta(n, delta, split.k, variant)

    def value(W):
        return (1 + b) / n * (W + rad * L + sig * L) ** 2

    terms = {
        "width_term": wid.mean, "width_se": wid.std_error, "radius_term": rad * L,
        "signal_term": sig * L, "beta": b, "n": n, "rank_sigma1": split.k,
    }
    validity = {"beta_le_1": b <= 1.0}
    return BoundReport("ucb_main", value(wid.mean), delta, variant, terms, validity,
                       _interval(value, wid.mean, wid.std_error))


def ucb_spec(spec, B, delta=0.05, variant="theorem"):
    """Trace-only bound ``(1 + gamma) B^2 Tr(Sigma)/n``.

    Sigma1 holds the ``ceil(sqrt(n log(32/delta)))`` largest eigenvalues and
    ``1 + gamma = (1 + beta)(1 + 6 sqrt(log(1/delta)/rank(Sigma1)))^2``.
    """
    _check_delta(delta, 0.25, "the trace bound")
    wnorm = norm_value(spec.w_star, "l2")
    if B < wnorm:
        raise BTooSmall(f"B={B} is below ||w*||_2={wnorm}")
    n = spec.n
    k = min(spec_split_rank(n, delta), spec.dim)
    b = beta(n, delta, k, variant)
    g = (1 + b) * (1 + 6 * math.sqrt(math.log(1 / delta) / k)) ** 2 - 1
    tr = spec.cov.trace
    lead = B * B * tr / n
    terms = {"gamma": g, "beta": b, "rank_sigma1": k, "leading": lead, "psi_n": tr, "n": n}
    return BoundReport("ucb_spec", (1 + g) * lead, delta, variant, terms, {"gamma_le_1": g <= 1.0})


# ---------------------------------------------------------------------------
# Euclidean suite

def euclid_suite(spec, split=None, B=1.0, delta=0.05, variant="theorem", c2=C2):
    """Generalization, norm and risk bounds for the Euclidean ball.

    Returns ``(gen, norm, risk)`` with

    * ``gen = (1+gamma) B^2 Tr(Sigma2)/n``,
    * ``norm = ||w*||_2 + (1+eps)^{1/2} sigma sqrt(n/Tr(Sigma2))``,
    * ``risk = (1+gamma)(1+eps)(sigma + ||w*||_2 sqrt(Tr(Sigma2)/n))^2``,

    ``eps = c2 (sqrt(log(1/delta)/r) + sqrt(log(1/delta)/n) + n log(1/delta)/R)``
    with ``r, R`` the effective ranks of Sigma2.  ``B=None`` means
    ``B = ||w*||_2``, the smallest radius the generalization bound admits.
    """
    _check_delta(delta, 0.5, "the Euclidean suite")
    split = _as_split(spec, split)
    s2 = split.sigma2
    r2, R2 = effective_ranks_l2(s2)
    n, k, sigma = spec.n, split.k, spec.sigma
    lg = math.log(1 / delta)
    tr2 = s2.trace
    wn = norm_value(spec.w_star, "l2")
    B = wn if B is None else B
    g = gamma_from_rank(n, delta, k, r2, variant)
    eps = c2 * (math.sqrt(lg / r2) + math.sqrt(lg / n) + n * lg / R2)
    shared = {"gamma": g, "epsilon": eps, "r_sigma2": r2, "R_sigma2": R2, "trace_sigma2": tr2,
              "rank_sigma1": k, "n": n}
    side = {"gamma_le_1": g <= 1.0, "epsilon_le_1": eps <= 1.0,
            "R_sigma2_large": R2 >= 64.0 * lg ** 2}

    gen = BoundReport("euclid_gen", (1 + g) * B * B * tr2 / n, delta, variant,
                      {**shared, "B": B},
                      {"gamma_le_1": side["gamma_le_1"], "delta_le_quarter": delta <= 0.25,
                       "B_ge_wstar": B >= wn})
    slack = math.sqrt(1 + eps) * sigma * math.sqrt(n / tr2)
    nb = BoundReport("euclid_norm", wn + slack, delta, variant,
                     {**shared, "wstar_norm": wn, "noise_term": slack},
                     {"epsilon_le_1": side["epsilon_le_1"], "R_sigma2_large": side["R_sigma2_large"]})
    base = sigma + wn * math.sqrt(tr2 / n)
    risk = BoundReport("euclid_risk", (1 + g) * (1 + eps) * base ** 2, delta, variant,
                       {**shared, "base": base, "wstar_norm": wn}, side)
    return gen, nb, risk


# ---------------------------------------------------------------------------
# general norms

def _quantile(x, level):
    return float(np.quantile(x, level, method="higher"))


def contraction_draws(split, norm, samples=2000, seed=0):
    """Draws of ``||P v*||^2`` with ``P`` the projector onto span(Sigma2)."""
    norm = parse_norm(norm)
    s2 = split.sigma2
    if norm == "l2" or (norm == "l1" and s2.is_diagonal):
        # v* already lies in span(Sigma2) and has unit norm
        return np.ones(samples)
    from .complexity import subgradient_dual
    from .rng import make_rng

    P = split.projector()
    rng = make_rng(seed)
    U = s2.sqrt_rows(rng.standard_normal((samples, s2.dim)))
    out = np.empty(samples)
    for i in range(samples):
        v = subgradient_dual(norm, U[i], s2) if np.any(U[i]) else np.zeros(s2.dim)
        out[i] = norm_value(P @ v, norm) ** 2
    return out


def general_norm_suite(spec, split=None, norm="l2", B=1.0, delta=0.05, samples=DEFAULT_SAMPLES, seed=0,
                       eps1=None, eps2=None, variant="theorem"):
    """Generalization, norm and risk bounds for an l1 or l2 ball.

    ``eps1``/``eps2`` default to Monte Carlo estimates at level
    ``1 - delta/4``: ``(1+eps1) E||v*|| `` is the quantile of ``||v*||_Sigma2``
    (or ``sqrt(max_i Sigma2_ii)`` for l1 on a diagonal Sigma2) and
    ``1 + eps2`` the quantile of ``||P v*||^2``.
    """
    norm = parse_norm(norm)
    if norm not in ("l1", "l2"):
        raise UnsupportedNorm("the general-norm suite supports l1 and l2")
    _check_delta(delta, 0.5, "the general-norm suite")
    split = _as_split(spec, split)
    s2 = split.sigma2
    if s2.is_zero:
        raise ZeroCovariance("Sigma2 is zero")
    n, k, sigma = spec.n, split.k, spec.sigma
    lg = math.log(1 / delta)
    duals, vn = dual_norm_draws(s2, norm, samples, seed)
    W1 = float(duals.mean())
    W1_se = float(duals.std(ddof=1) / math.sqrt(duals.size))
    Ev = float(vn.mean())
    rad1 = radius(s2, norm, 1.0)
    level = 1 - delta / 4
    if eps1 is None:
        if norm == "l1" and s2.is_diagonal:
            top = math.sqrt(s2.max_diag)
        else:
            top = _quantile(vn, level)
        eps1 = max(top / Ev - 1.0, 0.0)
    if eps2 is None:
        eps2 = max(_quantile(contraction_draws(split, norm, min(samples, 2000), seed), level) - 1.0, 0.0)
    wn = norm_value(spec.w_star, norm)
    B = wn if B is None else B

    def parts(W):
        r_n = (W / rad1) ** 2
        R_n = (W / Ev) ** 2
        g = gamma_from_rank(n, delta, k, r_n, variant)
        eps = C2 * (math.sqrt(lg / r_n) + math.sqrt(lg / n) + (1 + eps1) ** 2 * n / R_n + eps2)
        gen = (1 + g) * (B * W) ** 2 / n
        nb = wn + math.sqrt(1 + eps) * sigma * math.sqrt(n) / W
        base = sigma + wn * W / math.sqrt(n)
        return {"r_norm": r_n, "R_norm": R_n, "gamma": g, "epsilon": eps, "gen": gen, "norm": nb,
                "base": base, "risk": (1 + g) * (1 + eps) * base ** 2}

    p = parts(W1)
    shared = {"gamma": p["gamma"], "epsilon": p["epsilon"], "r_norm": p["r_norm"], "R_norm": p["R_norm"],
              "width": W1, "width_se": W1_se, "vstar_mean": Ev, "eps1": eps1, "eps2": eps2,
              "rank_sigma1": k, "n": n}
    side = {"gamma_le_1": p["gamma"] <= 1.0, "epsilon_le_1": p["epsilon"] <= 1.0}

    def iv(key):
        return _interval(lambda W: parts(W)[key], W1, W1_se)

    gen = BoundReport(f"general_gen_{norm}", p["gen"], delta, variant, {**shared, "B": B},
                      {"gamma_le_1": side["gamma_le_1"], "delta_le_quarter": delta <= 0.25}, iv("gen"))
    nb = BoundReport(f"general_norm_{norm}", p["norm"], delta, variant,
                     {**shared, "wstar_norm": wn, "noise_term": p["norm"] - wn},
                     {"epsilon_le_1": side["epsilon_le_1"]}, iv("norm"))
    risk = BoundReport(f"general_risk_{norm}", p["risk"], delta, variant,
                       {**shared, "base": p["base"], "wstar_norm": wn}, side, iv("risk"))
    return gen, nb, risk


# ---------------------------------------------------------------------------
# basis pursuit

def bp_suite(spec, split=None, B=1.0, delta=0.05, samples=DEFAULT_SAMPLES, seed=0, variant="theorem"):
    """Basis-pursuit bounds for a diagonal Sigma2, driven by ``r_1(Sigma2)``.

    Returns ``(gen, norm, risk, iso_norm)``; ``iso_norm`` is the bound that
    only needs the support of ``w*`` and is ``None`` unless Sigma = I.
    """
    _check_delta(delta, 0.25, "the basis-pursuit suite")
    split = _as_split(spec, split)
    s2 = split.sigma2
    if not s2.is_diagonal:
        raise NotDiagonal("the basis-pursuit bounds need a diagonal Sigma2")
    if s2.is_zero:
        raise ZeroCovariance("Sigma2 is zero")
    n, k, sigma = spec.n, split.k, spec.sigma
    lg = math.log(1 / delta)
    wid = gaussian_width(s2, "l1", 1.0, samples, seed)
    md = s2.max_diag
    w1n = norm_value(spec.w_star, "l1")
    B = w1n if B is None else B

    def parts(W):
        r1 = W * W / md
        g = gamma_from_rank(n, delta, k, r1, variant)
        eps = C2 * (math.sqrt(lg / r1) + math.sqrt(lg / n) + n / r1)
        base = sigma + w1n * W / math.sqrt(n)
        return {"r1": r1, "gamma": g, "epsilon": eps, "gen": (1 + g) * (B * W) ** 2 / n,
                "norm": w1n + math.sqrt(1 + eps) * sigma * math.sqrt(n) / W, "base": base,
                "risk": (1 + g) * (1 + eps) * base ** 2}

    p = parts(wid.mean)
    shared = {"gamma": p["gamma"], "epsilon": p["epsilon"], "r1": p["r1"], "width": wid.mean,
              "width_se": wid.std_error, "max_diag": md, "rank_sigma1": k, "n": n}
    side = {"gamma_le_1": p["gamma"] <= 1.0, "epsilon_le_1": p["epsilon"] <= 1.0}

    def iv(key):
        return _interval(lambda W: parts(W)[key], wid.mean, wid.std_error)

    gen = BoundReport("bp_gen", p["gen"], delta, variant, {**shared, "B": B},
                      {"gamma_le_1": side["gamma_le_1"]}, iv("gen"))
    nb = BoundReport("bp_norm", p["norm"], delta, variant,
                     {**shared, "wstar_l1": w1n, "noise_term": p["norm"] - w1n},
                     {"epsilon_le_1": side["epsilon_le_1"]}, iv("norm"))
    risk = BoundReport("bp_risk", p["risk"], delta, variant, {**shared, "base": p["base"], "wstar_l1": w1n},
                       side, iv("risk"))
    iso = None
    if spec.cov.scalar_value() == 1.0:
        iso = bp_isotropic_norm(spec, delta)
    return gen, nb, risk, iso


def _support_size(spec):
    return int(np.count_nonzero(spec.w_star))


def _require_identity(spec):
    if spec.cov.scalar_value() != 1.0:
        raise UnsupportedForE4("this bound needs Sigma = I")


def bp_isotropic_norm(spec, delta=0.05):
    """``||w_BP||_1 <= (1+eps)^{1/2} (sigma^2 + ||w*||_2^2)^{1/2} sqrt(n) / E||H'||_inf``.

    ``H'`` is standard normal on the ``d - |S|`` coordinates off the support
    ``S`` of ``w*`` and
    ``eps = 140 (sqrt(log(1/delta)/n) + sqrt(log(1/delta)/log(d-|S|)) + n/log(d-|S|))``.
    """
    _check_delta(delta, 0.25, "the isotropic basis-pursuit norm bound")
    _require_identity(spec)
    n = spec.n
    s = _support_size(spec)
    m = spec.dim - s
    lg = math.log(1 / delta)
    lm = math.log(m)
    eps = C3 * (math.sqrt(lg / n) + math.sqrt(lg / lm) + n / lm)
    emax = expected_max_abs_normal(m)
    scale = math.sqrt(spec.noise_var + float(np.dot(spec.w_star, spec.w_star)))
    value = math.sqrt(1 + eps) * scale * math.sqrt(n) / emax
    terms = {"epsilon": eps, "off_support_dim": m, "support_size": s, "expected_max": emax,
             "noise_scale": scale, "n": n}
    return BoundReport("bp_iso_norm", value, delta, "theorem", terms, {"epsilon_le_1": eps <= 1.0})


def bp_isotropic_risk(spec, delta=0.05):
    """``L(w_BP) <= (1+eta)(sigma^2 + ||w*||_2^2)`` for Sigma = I.

    ``eta = 368 (sqrt(log(1/delta)/n) + sqrt((log(1/delta) + log|S|)/log(d-|S|)) + n/log(d-|S|))``;
    an empty support contributes ``log 1 = 0``.
    """
    _check_delta(delta, 0.5, "the isotropic basis-pursuit risk bound")
    _require_identity(spec)
    n = spec.n
    s = _support_size(spec)
    m = spec.dim - s
    lg = math.log(1 / delta)
    lm = math.log(m)
    eta = C_ISO * (math.sqrt(lg / n) + math.sqrt((lg + math.log(max(s, 1))) / lm) + n / lm)
    null = spec.noise_var + float(np.dot(spec.w_star, spec.w_star))
    terms = {"eta": eta, "null_risk": null, "support_size": s, "off_support_dim": m, "n": n}
    return BoundReport("bp_iso_risk", (1 + eta) * null, delta, "theorem", terms, {"eta_le_1": eta <= 1.0})


# ---------------------------------------------------------------------------
# consistency diagnostics

def _decreasing(xs):
    xs = [x for x in xs if np.isfinite(x)]
    return all(b < a for a, b in zip(xs, xs[1:]))


def consistency_diagnostics(spec_sequence, norm="l2", family=None, etas=(0.1, 0.01),
                            samples=DEFAULT_SAMPLES, seed=0):
    """Finite-n ratios of the sufficient conditions for benign overfitting.

    ``family`` is ``"euclidean"`` (default for l2), ``"l1"`` (default for
    l1; ratios use ``r_1``) or ``"general"`` (any norm; adds ``1/r_||.||``
    and the contraction probabilities ``Pr(||P v*||^2 > 1 + eta)``).

    Returns ``(rows, verdict)`` where ``verdict`` maps each ratio name to
    whether it strictly decreases along the sequence.
    """
    seq = list(spec_sequence)
    if not seq:
        raise EmptySequence("need at least one (spec, split) pair")
    norm = parse_norm(norm)
    if family is None:
        family = "euclidean" if norm == "l2" else "l1"
    rows = []
    for spec, split in seq:
        split = _as_split(spec, split)
        s2 = split.sigma2
        n = spec.n
        row = {"n": n, "dim": spec.dim, "rank_ratio": split.k / n}
        if family == "euclidean":
            _, R2 = effective_ranks_l2(s2)
            row["signal_ratio"] = norm_value(spec.w_star, "l2") * math.sqrt(s2.trace / n)
            row["rank_R_ratio"] = n / R2
        elif family == "l1":
            wid = gaussian_width(s2, "l1", 1.0, samples, seed)
            r1 = wid.mean ** 2 / s2.max_diag
            row["signal_ratio"] = norm_value(spec.w_star, "l1") * wid.mean / math.sqrt(n)
            row["r1_ratio"] = n / r1
            row["r1"] = r1
        elif family == "general":
            duals, vn = dual_norm_draws(s2, norm, samples, seed)
            W = float(duals.mean())
            row["signal_ratio"] = norm_value(spec.w_star, norm) * W / math.sqrt(n)
            row["inv_r_norm"] = (radius(s2, norm, 1.0) / W) ** 2
            row["R_norm_ratio"] = n * (float(vn.mean()) / W) ** 2
            c = contraction_draws(split, norm, min(samples, 2000), seed)
            for eta in etas:
                row[f"contraction_{eta:g}"] = float(np.mean(c > 1 + eta))
        else:
            raise ValueError(f"unknown family {family!r}")
        rows.append(row)
    keys = [k for k in rows[0] if k.endswith("_ratio") or k == "inv_r_norm"]
    verdict = {k: _decreasing([r[k] for r in rows]) for k in keys}
    return rows, verdict


__all__ = ["BoundReport", "beta", "gamma_from_rank", "ucb_main", "ucb_spec", "euclid_suite",
           "general_norm_suite", "bp_suite", "bp_isotropic_norm", "bp_isotropic_risk",
           "consistency_diagnostics", "contraction_draws"]
