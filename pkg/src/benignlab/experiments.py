"""Experiment runners behind the command line.

Each runner takes a validated :class:`~benignlab.config.ExperimentConfig` and
returns an :class:`ExperimentResult` of named tables, SVG figures and
metadata.  Trials are independent: trial ``t`` at grid point ``g`` draws from
the stream ``derive_seed(master_seed, g..., t)``, workers never share mutable
state, and results are gathered in trial-index order.  BLAS is pinned to one
thread inside trials so the arithmetic is the same for any worker count.
"""
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest
from threadpoolctl import threadpool_limits

from . import bounds, cgmt
from .complexity import effective_ranks_general, gaussian_width, r1
from .config import build_spec
from .errors import ConfigError, SolverError
from .interpolators import min_l1_interpolator, min_l2_interpolator
from .io import HEADERS
from .model import population_loss, sample_dataset
from .norms import norm_value
from .rng import derive_seed
from .splitting import optimize_split, split_top_k
from .svg import line_plot

D_GRID_NOTE = ("the d-grid and axis scale of the reference figure are not stated; "
               "a log-spaced grid is used and the x axis is log-scaled")

# top-level stream keys, one per use of the master seed
_TRIALS, _MC, _PILOT = 0, 1, 2


@dataclass
class ExperimentResult:
    experiment: str
    tables: dict = field(default_factory=dict)
    figures: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def table(self, name):
        header, rows = self.tables[name]
        return [dict(zip(header, r)) for r in rows]


def run_pool(fn, tasks, threads=1):
    """``[fn(t) for t in tasks]`` on up to ``threads`` workers, in task order."""
    tasks = list(tasks)
    with threadpool_limits(limits=1):
        if threads <= 1 or len(tasks) <= 1:
            return [fn(t) for t in tasks]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, tasks))


def _mean_std(vals):
    v = np.array([x for x in vals if x is not None and np.isfinite(x)], dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    return float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else 0.0


def _mean_se(vals):
    m, s = _mean_std(vals)
    k = sum(1 for x in vals if x is not None and np.isfinite(x))
    return m, (s / math.sqrt(k) if k > 1 else math.nan)


def _coverage(flags):
    k, m = int(sum(flags)), len(flags)
    p = k / m
    ci = binomtest(k, m).proportion_ci(confidence_level=0.95)
    return p, math.sqrt(p * (1 - p) / m), float(ci.low), float(ci.high)


def _base_meta(cfg):
    return {"experiment": cfg.experiment, "config": cfg.to_dict()}


# ---------------------------------------------------------------------------
# figure 1

def _figure1_trial(args):
    spec, seed = args
    n, d = spec.n, spec.dim
    null = population_loss(spec, np.zeros(d))
    bayes = population_loss(spec, spec.w_full)
    if d < n:
        return math.nan, math.nan, null, bayes, math.nan
    ds = sample_dataset(spec, seed)
    try:
        res = min_l2_interpolator(ds, spec)
    except SolverError:
        return None, None, null, bayes, None
    nsq = res.norm_value ** 2
    return res.pop_loss, nsq * spec.cov.trace / n, null, bayes, nsq


def run_figure1(cfg, threads=1):
    """Risk of the minimum-l2 interpolator against ``||w||^2 Tr(Sigma)/n`` over a d-grid."""
    result = ExperimentResult("figure1", meta=_base_meta(cfg))
    summary = []
    for li, lam in enumerate(cfg.lambdas):
        tasks = []
        for di, d in enumerate(cfg.d_grid):
            spec = build_spec(cfg, d, lam)
            tasks += [(spec, derive_seed(cfg.master_seed, _TRIALS, li, di, t)) for t in range(cfg.trials)]
        out = run_pool(_figure1_trial, tasks, threads)
        rows = []
        series = {"loss": ([], []), "bound": ([], [])}
        for di, d in enumerate(cfg.d_grid):
            block = out[di * cfg.trials:(di + 1) * cfg.trials]
            for t, (loss, bnd, null, bayes, nsq) in enumerate(block):
                rows.append((int(d), t, loss, bnd, null, bayes, nsq))
            lm, ls = _mean_std([b[0] for b in block])
            bm, bs = _mean_std([b[1] for b in block])
            nm, _ = _mean_std([b[4] for b in block])
            interp = sum(1 for b in block if b[0] is not None and np.isfinite(b[0]))
            summary.append((float(lam), int(d), lm, ls, bm, bs, block[0][2], block[0][3], nm, interp))
            series["loss"][0].append(lm)
            series["loss"][1].append(ls)
            series["bound"][0].append(bm)
            series["bound"][1].append(bs)
        name = f"figure1_lam{lam:g}"
        result.tables[name] = (HEADERS["figure1"], rows)
        null, bayes = summary[-1][6], summary[-1][7]
        xs = [float(d) for d in cfg.d_grid]
        plot = [
            {"label": "loss", "x": xs, "y": series["loss"][0], "err": series["loss"][1]},
            {"label": "bound", "x": xs, "y": series["bound"][0], "err": series["bound"][1]},
            {"label": "null", "x": xs, "y": [null] * len(xs)},
            {"label": "bayes", "x": xs, "y": [bayes] * len(xs)},
        ]
        result.figures[name] = line_plot(plot, title=f"lambda = {lam:g}, n = {cfg.n}", xlabel="d",
                                         ylabel="population loss", vline=float(cfg.n),
                                         ylim=(0.0, 2.0 * max(null, 1e-12)))
    result.tables["figure1_summary"] = (HEADERS["figure1_summary"], summary)
    result.meta["d_grid_note"] = D_GRID_NOTE
    return result


# ---------------------------------------------------------------------------
# junk features

def _signal_split(spec, k):
    """Split whose Sigma1 is the leading ``k`` coordinates (the signal block)."""
    top = spec.cov.diag_prefix(k)
    rest = spec.cov.diag_prefix(k + 1)[-1]
    if np.min(top) <= rest:
        raise ConfigError("the signal block must carry the largest variances")
    return split_top_k(spec.cov, k)


def _bp_trial(args):
    spec, seed = args
    ds = sample_dataset(spec, seed)
    try:
        res = min_l1_interpolator(ds, spec=spec)
    except SolverError:
        return None, None
    return res.pop_loss, res.norm_value


def run_junk_features(cfg, threads=1):
    """Basis pursuit with a fixed signal block and ``d`` junk coordinates of variance ``lam/log d``."""
    result = ExperimentResult("junk_features", meta=_base_meta(cfg))
    if cfg.covariance["kind"] != "junk":
        raise ConfigError("junk_features needs covariance kind 'junk'")
    lam = cfg.lambdas[0]
    k = len(cfg.covariance.get("signal", [1.0]))
    rows, summary = [], []
    n = cfg.n
    for di, d in enumerate(cfg.d_grid):
        spec = build_spec(cfg, d, lam)
        split = _signal_split(spec, k)
        s2 = split.sigma2
        mc_seed = derive_seed(cfg.master_seed, _MC, di)
        r1v, r1e = r1(s2, cfg.samples, mc_seed)
        wid = gaussian_width(s2, "l1", 1.0, cfg.samples, mc_seed).mean
        width_ratio = (wid / math.sqrt(n)) / math.sqrt(lam / n)
        risk = bounds.bp_suite(spec, split, None, cfg.delta, cfg.samples, mc_seed, cfg.variant)[2]
        signal_ratio = norm_value(spec.w_star, "l1") * wid / math.sqrt(n)
        tasks = [(spec, derive_seed(cfg.master_seed, _TRIALS, di, t)) for t in range(cfg.trials)]
        out = run_pool(_bp_trial, tasks, threads)
        for t, (loss, l1n) in enumerate(out):
            rows.append((n, int(d), t, loss, risk.value, r1v, split.k, width_ratio, n / r1v, signal_ratio, l1n))
        lm, lse = _mean_se([o[0] for o in out])
        fails = sum(1 for o in out if o[0] is None)
        summary.append((n, int(d), lm, lse, risk.value, r1v, r1e, width_ratio, fails))
    result.tables["junk"] = (HEADERS["junk"], rows)
    result.tables["junk_summary"] = (HEADERS["junk_summary"], summary)
    return result


# ---------------------------------------------------------------------------
# isotropic basis pursuit

def run_isotropic_bp(cfg, threads=1):
    """Basis pursuit under Sigma = I against ``(1+eta)(sigma^2 + ||w*||^2)``."""
    result = ExperimentResult("isotropic_bp", meta=_base_meta(cfg))
    if cfg.covariance["kind"] != "identity" or float(cfg.covariance.get("scale", 1.0)) != 1.0:
        raise ConfigError("isotropic_bp needs the identity covariance")
    rows, summary = [], []
    n = cfg.n
    for di, d in enumerate(cfg.d_grid):
        spec = build_spec(cfg, d)
        rep = bounds.bp_isotropic_risk(spec, cfg.delta)
        eta, null = rep.terms["eta"], rep.terms["null_risk"]
        tasks = [(spec, derive_seed(cfg.master_seed, _TRIALS, di, t)) for t in range(cfg.trials)]
        out = run_pool(_bp_trial, tasks, threads)
        flags = []
        for t, (loss, _) in enumerate(out):
            cov_flag = None if loss is None else bool(loss <= rep.value)
            flags.append(bool(cov_flag))
            rows.append((n, int(d), t, loss, rep.value, eta, null, cov_flag))
        lm, lse = _mean_se([o[0] for o in out])
        p, se, _, _ = _coverage(flags)
        summary.append((n, int(d), lm, lse, rep.value, eta, bool(eta <= 1.0), null, p, se))
    result.tables["isotropic_bp"] = (HEADERS["isotropic_bp"], rows)
    result.tables["isotropic_bp_summary"] = (HEADERS["isotropic_bp_summary"], summary)
    return result


# ---------------------------------------------------------------------------
# bound coverage

def _bound_trial(args):
    spec, seed, cfg, norm_bound = args
    ds = sample_dataset(spec, seed)
    try:
        res = min_l2_interpolator(ds, spec)
    except SolverError:
        return None
    B = res.norm_value
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        k, rep = optimize_split(spec, cfg.delta, "main", "l2", B, cfg.variant, cfg.samples,
                                derive_seed(cfg.master_seed, _MC))
    return (res.pop_loss, B, rep.value, k, rep.valid, bool(res.pop_loss <= rep.value), norm_bound,
            bool(B <= norm_bound))


def run_bound_check(cfg, threads=1):
    """Coverage of the main bound at ``B = ||w_hat||_2`` and of the Euclidean norm bound.

    The main bound uses the best top-k split per trial.  The norm bound uses
    the split minimising the Euclidean risk bound, which depends on the
    specification only.
    """
    result = ExperimentResult("bound_check", meta=_base_meta(cfg))
    spec = build_spec(cfg, cfg.d_grid[0])
    mc_seed = derive_seed(cfg.master_seed, _MC)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        k_norm, _ = optimize_split(spec, cfg.delta, "euclid_risk", "l2", None, cfg.variant, cfg.samples, mc_seed)
    norm_rep = bounds.euclid_suite(spec, split_top_k(spec.cov, k_norm), None, cfg.delta, cfg.variant)[1]
    tasks = [(spec, derive_seed(cfg.master_seed, _TRIALS, 0, t), cfg, norm_rep.value) for t in range(cfg.trials)]
    out = run_pool(_bound_trial, tasks, threads)
    rows = []
    for t, o in enumerate(out):
        rows.append((t,) + (o if o is not None else (None,) * 8))
    target = 1 - cfg.delta
    summary = []
    for name, idx in (("ucb_main", 5), ("norm_bound", 7)):
        flags = [bool(o is not None and o[idx]) for o in out]
        p, se, lo, hi = _coverage(flags)
        summary.append((name, p, se, lo, hi, len(flags), target))
    result.tables["bound_check"] = (HEADERS["bound_check"], rows)
    result.tables["bound_check_summary"] = (HEADERS["bound_check_summary"], summary)
    result.meta["norm_split_k"] = k_norm
    result.meta["norm_bound"] = norm_rep.value
    return result


# ---------------------------------------------------------------------------
# Gaussian minimax comparison

def pilot_radius(spec, pilot, factor, seed, threads=1):
    """``factor`` times the median ``||w_hat||_2`` over ``pilot`` datasets."""
    def one(s):
        return min_l2_interpolator(sample_dataset(spec, s)).norm_value

    seeds = [derive_seed(seed, _PILOT, i) for i in range(pilot)]
    norms = run_pool(one, seeds, threads)
    return factor * float(np.median(norms))


def run_cgmt_check(cfg, threads=1):
    """Empirical ``Pr(Phi > t) <= 2 Pr(phi >= t)`` for the gap and norm pairs."""
    result = ExperimentResult("cgmt_check", meta=_base_meta(cfg))
    spec = build_spec(cfg, cfg.d_grid[0])
    B = cfg.B if cfg.B is not None else pilot_radius(spec, cfg.pilot, cfg.ball_factor, cfg.master_seed, threads)
    ball = ("l2", B)
    rows = []
    notes = {}
    pairs = (
        ("gap", lambda s: cgmt.po_gap_value(spec, ball, s), lambda s: cgmt.ao_gap_value(spec, ball, s)),
        ("norm", lambda s: cgmt.po_norm_value(spec, cfg.norm, s), lambda s: cgmt.ao_norm_value(spec, cfg.norm, s)),
    )
    for pi, (name, po, ao) in enumerate(pairs):
        with threadpool_limits(limits=1):
            rep = cgmt.compare_tails(po, ao, cfg.draws, seed=derive_seed(cfg.master_seed, _TRIALS, pi),
                                     threads=threads, points=cfg.t_points)
        se = np.sqrt(rep.po_se ** 2 + 4 * rep.ao_se ** 2)
        for j, t in enumerate(rep.t_grid):
            rows.append((name, float(t), float(rep.po_tail[j]), float(rep.po_se[j]), float(rep.ao_tail[j]),
                         float(rep.ao_se[j]), float(se[j]), bool(rep.verdict[j])))
        notes[name] = {**rep.notes, "all_pass": rep.all_pass}
    result.tables["cgmt_check"] = (HEADERS["cgmt_check"], rows)
    result.meta["ball_radius"] = B
    result.meta["sentinels"] = notes
    return result


# ---------------------------------------------------------------------------
# ranks and split scans

def run_ranks(cfg, threads=1):
    """Exact ``r, R`` and Monte Carlo ``r_||.||, R_||.||`` for l2 and l1."""
    result = ExperimentResult("ranks", meta=_base_meta(cfg))
    rows = []
    for di, d in enumerate(cfg.d_grid):
        cov = build_spec(cfg, d).cov
        for ni, norm in enumerate(("l2", "l1")):
            rep = effective_ranks_general(cov, norm, cfg.samples, derive_seed(cfg.master_seed, _MC, di, ni))
            e = rep.mc_errors["r_norm"]
            low = rep.r - 1 <= rep.r_norm + 3 * e if norm == "l2" else None
            high = rep.r_norm - 3 * e <= rep.r if norm == "l2" else None
            rows.append((int(d), norm, rep.r, rep.R, rep.r_norm, e, rep.R_norm, rep.mc_errors["R_norm"], low, high))
    result.tables["ranks"] = (HEADERS["ranks"], rows)
    return result


def run_split_scan(cfg, threads=1):
    """The chosen bound family at every top-k split."""
    result = ExperimentResult("split_scan", meta=_base_meta(cfg))
    rows = []
    best = {}
    for di, d in enumerate(cfg.d_grid):
        spec = build_spec(cfg, d)
        B = cfg.B
        if cfg.bound_family == "main" and B is None:
            B = norm_value(spec.w_star, cfg.norm)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            k_star, _, scan = optimize_split(spec, cfg.delta, cfg.bound_family, cfg.norm, B, cfg.variant,
                                             cfg.samples, derive_seed(cfg.master_seed, _MC, di), return_scan=True)
        for k, rep in scan:
            if rep is None:
                rows.append((int(d), k, math.nan, False, math.nan, math.nan))
                continue
            lo, hi = rep.interval if rep.interval else (rep.value, rep.value)
            rows.append((int(d), k, rep.value, rep.valid, lo, hi))
        best[int(d)] = k_star
    result.tables["split_scan"] = (HEADERS["split_scan"], rows)
    result.meta["k_star"] = best
    return result


RUNNERS = {
    "figure1": run_figure1, "junk_features": run_junk_features, "isotropic_bp": run_isotropic_bp,
    "bound_check": run_bound_check, "cgmt_check": run_cgmt_check, "ranks": run_ranks,
    "split_scan": run_split_scan,
}


def run(cfg, threads=1):
    return RUNNERS[cfg.experiment](cfg, threads)


__all__ = ["ExperimentResult", "run", "run_pool", "pilot_radius", "RUNNERS"]
