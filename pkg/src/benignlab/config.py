"""Declarative experiment configuration.

Configs are TOML (``key = value`` with nested tables) or JSON.  Both map onto
:class:`ExperimentConfig` and round-trip losslessly.  Validation errors name
the offending field and, when the source text is available, its line.
"""
import dataclasses
import json
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from .bounds import VARIANTS
from .errors import ConfigError, UnsupportedNorm
from .model import LIMITS, CovarianceModel, ProblemSpec
from .norms import parse_norm
from .splitting import BOUND_FAMILIES

EXPERIMENTS = ("figure1", "junk_features", "isotropic_bp", "bound_check", "cgmt_check", "ranks",
               "split_scan")
SUBCOMMANDS = {
    "figure1": "figure1", "junk": "junk_features", "iso-bp": "isotropic_bp",
    "bound-check": "bound_check", "cgmt-check": "cgmt_check", "ranks": "ranks", "split-scan": "split_scan",
}
# experiments whose outputs are bound evaluations carrying the delta <= 1/4 precondition
BOUND_EXPERIMENTS = ("bound_check", "split_scan", "junk_features", "isotropic_bp")
COVARIANCE_KINDS = ("identity", "figure1", "spiked", "junk", "diag", "blocks")
W_STAR_KINDS = ("zero", "e1", "sparse", "explicit")
FORMATS = ("csv", "json")


@dataclass
class ExperimentConfig:
    experiment: str
    n: int = 100
    d_grid: list = field(default_factory=lambda: [200])
    noise_var: float = 1.0
    lambdas: list = field(default_factory=lambda: [1.0])
    covariance: dict = field(default_factory=lambda: {"kind": "identity"})
    w_star: dict = field(default_factory=lambda: {"kind": "e1", "norm_sq": 1.0})
    trials: int = 100
    delta: float = 0.1
    master_seed: int = 0
    norm: str = "l2"
    variant: str = "theorem"
    bound_family: str = "main"
    B: float = None
    samples: int = 20_000
    draws: int = 2000
    t_points: int = 20
    pilot: int = 200
    ball_factor: float = 1.5
    out_dir: str = "out"
    format: str = "csv"
    threads: int = 1
    note: str = ""

    def to_dict(self):
        d = dataclasses.asdict(self)
        return {k: v for k, v in d.items() if v is not None}

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _locate(text, key):
    if not text:
        return None
    pat = re.compile(r'^\s*"?' + re.escape(key) + r'"?\s*[=:]', re.M)
    m = pat.search(text)
    if m is None:
        return None
    return text.count("\n", 0, m.start()) + 1


def _fail(key, msg, text=None, source=None):
    line = _locate(text, key)
    where = source or "<config>"
    if line is not None:
        where = f"{where}:{line}"
    raise ConfigError(f"{where}: field '{key}': {msg}")


def _is_int(v):
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


def _is_num(v):
    return (isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool)
            and math.isfinite(float(v)))


def _check_covariance(cov, fail):
    if not isinstance(cov, dict) or "kind" not in cov:
        fail("covariance", "must be a table with a 'kind' key")
    kind = cov["kind"]
    if kind not in COVARIANCE_KINDS:
        fail("covariance", f"kind must be one of {COVARIANCE_KINDS}, got {kind!r}")
    allowed = {
        "identity": {"scale"}, "figure1": set(), "spiked": {"spike", "tail_scale"},
        "junk": {"signal"}, "diag": {"values"}, "blocks": {"blocks"},
    }[kind]
    extra = set(cov) - allowed - {"kind"}
    if extra:
        fail("covariance", f"unknown keys {sorted(extra)} for kind {kind!r}")
    for key in ("scale", "spike", "tail_scale"):
        if key in cov and not (_is_num(cov[key]) and cov[key] >= 0):
            fail(key, "must be a non-negative number")
    if kind == "junk":
        sig = cov.get("signal", [1.0])
        if not sig or not all(_is_num(v) and v >= 0 for v in sig):
            fail("signal", "must be a non-empty list of non-negative numbers")
    if kind == "diag":
        vals = cov.get("values")
        if not vals or not all(_is_num(v) and v >= 0 for v in vals):
            fail("values", "must be a non-empty list of non-negative numbers")
    if kind == "blocks":
        blocks = cov.get("blocks")
        ok = bool(blocks) and all(
            isinstance(b, (list, tuple)) and len(b) == 2 and _is_num(b[0]) and b[0] >= 0
            and _is_int(b[1]) and b[1] > 0 for b in blocks)
        if not ok:
            fail("blocks", "must be a non-empty list of [value, count] pairs")


def _check_w_star(ws, fail):
    if not isinstance(ws, dict) or "kind" not in ws:
        fail("w_star", "must be a table with a 'kind' key")
    kind = ws["kind"]
    if kind not in W_STAR_KINDS:
        fail("w_star", f"kind must be one of {W_STAR_KINDS}, got {kind!r}")
    allowed = {"zero": set(), "e1": {"norm_sq"}, "sparse": {"support", "norm_sq"}, "explicit": {"values"}}[kind]
    extra = set(ws) - allowed - {"kind"}
    if extra:
        fail("w_star", f"unknown keys {sorted(extra)} for kind {kind!r}")
    if "norm_sq" in ws and not (_is_num(ws["norm_sq"]) and ws["norm_sq"] >= 0):
        fail("norm_sq", "must be a non-negative number")
    if kind == "sparse" and not (_is_int(ws.get("support")) and ws["support"] >= 1):
        fail("support", "must be a positive integer")
    if kind == "explicit":
        vals = ws.get("values")
        if not vals or not all(_is_num(v) for v in vals):
            fail("values", "must be a non-empty list of numbers")


def validate(cfg, text=None, source=None):
    """Check every field; raise :class:`ConfigError` on the first problem."""

    def fail(key, msg):
        _fail(key, msg, text, source)

    if cfg.experiment not in EXPERIMENTS:
        fail("experiment", f"must be one of {EXPERIMENTS}, got {cfg.experiment!r}")
    if not (_is_int(cfg.n) and cfg.n >= 1):
        fail("n", "must be a positive integer")
    if not cfg.d_grid or not all(_is_int(d) and d >= 1 for d in cfg.d_grid):
        fail("d_grid", "must be a non-empty list of positive integers")
    if not (_is_num(cfg.noise_var) and cfg.noise_var >= 0):
        fail("noise_var", "must be a non-negative number")
    if not cfg.lambdas or not all(_is_num(v) and v > 0 for v in cfg.lambdas):
        fail("lambdas", "must be a non-empty list of positive numbers")
    _check_covariance(cfg.covariance, fail)
    _check_w_star(cfg.w_star, fail)
    if not (_is_int(cfg.trials) and cfg.trials >= 1):
        fail("trials", "must be a positive integer")
    if not (_is_num(cfg.delta) and 0 < cfg.delta < 1):
        fail("delta", "must lie in (0, 1)")
    if cfg.experiment in BOUND_EXPERIMENTS and cfg.delta > 0.25:
        fail("delta", f"the generalization bounds evaluated by {cfg.experiment} hold only for "
                      f"delta <= 1/4, got {cfg.delta}")
    if not (_is_int(cfg.master_seed) and 0 <= cfg.master_seed < 2**64):
        fail("master_seed", "must be an unsigned 64-bit integer")
    try:
        parse_norm(cfg.norm)
    except UnsupportedNorm:
        fail("norm", f"unknown norm {cfg.norm!r}")
    if cfg.variant not in VARIANTS:
        fail("variant", f"must be one of {VARIANTS}")
    if cfg.bound_family not in BOUND_FAMILIES:
        fail("bound_family", f"must be one of {BOUND_FAMILIES}")
    if cfg.B is not None and not (_is_num(cfg.B) and cfg.B > 0):
        fail("B", "must be a positive number")
    if not (_is_int(cfg.samples) and cfg.samples >= 100):
        fail("samples", "must be an integer >= 100")
    if not (_is_int(cfg.draws) and cfg.draws >= 500):
        fail("draws", "must be an integer >= 500")
    if not (_is_int(cfg.t_points) and cfg.t_points >= 2):
        fail("t_points", "must be an integer >= 2")
    if not (_is_int(cfg.pilot) and cfg.pilot >= 1):
        fail("pilot", "must be a positive integer")
    if not (_is_num(cfg.ball_factor) and cfg.ball_factor > 0):
        fail("ball_factor", "must be positive")
    if cfg.format not in FORMATS:
        fail("format", f"must be one of {FORMATS}")
    if not (_is_int(cfg.threads) and cfg.threads >= 1):
        fail("threads", "must be a positive integer")
    for d in cfg.d_grid:
        dim = total_dim(cfg, d)
        if dim > LIMITS["diagonal"]:
            fail("d_grid", f"dimension {dim} exceeds the sampling cap {LIMITS['diagonal']}")
    return cfg


def from_dict(data, text=None, source=None):
    if not isinstance(data, dict):
        raise ConfigError(f"{source or '<config>'}: top level must be a table")
    unknown = [k for k in data if k not in _FIELDS]
    if unknown:
        _fail(unknown[0], "unknown field", text, source)
    if "experiment" not in data:
        raise ConfigError(f"{source or '<config>'}: field 'experiment' is required")
    cfg = ExperimentConfig(**data)
    return validate(cfg, text, source)


def loads(text, fmt="toml", source=None):
    try:
        if fmt == "json":
            data = json.loads(text)
        else:
            data = tomllib.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source or '<config>'}:{exc.lineno}: {exc.msg}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source or '<config>'}: {exc}") from exc
    return from_dict(data, text, source)


def load(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    fmt = "json" if path.suffix.lower() == ".json" else "toml"
    return loads(text, fmt, str(path))


def dumps(cfg, fmt="toml"):
    data = cfg.to_dict()
    if fmt == "json":
        return json.dumps(data, indent=2, sort_keys=True) + "\n"
    return tomli_w.dumps(data)


def packaged(name):
    """Text of a config shipped with the package (``configs/<name>.toml``)."""
    from importlib import resources

    return resources.files(__package__).joinpath("configs", f"{name}.toml").read_text()


def default_config(experiment):
    name = {"figure1": "figure1_desk", "junk_features": "junk", "isotropic_bp": "iso_bp",
            "bound_check": "bound_check", "cgmt_check": "cgmt", "ranks": "ranks",
            "split_scan": "split_scan"}[experiment]
    return loads(packaged(name), "toml", f"<packaged {name}.toml>")


# ---------------------------------------------------------------------------
# builders

def total_dim(cfg, d):
    if cfg.covariance["kind"] == "junk":
        return len(cfg.covariance.get("signal", [1.0])) + int(d)
    return int(d)


def build_covariance(cfg, d, lam=None):
    """Covariance for grid point ``d`` (``lam`` feeds the figure1 and junk kinds)."""
    c = cfg.covariance
    kind = c["kind"]
    d = int(d)
    lam = cfg.lambdas[0] if lam is None else lam
    if kind == "identity":
        return CovarianceModel.identity(d, float(c.get("scale", 1.0)))
    if kind == "figure1":
        return CovarianceModel.from_blocks([(1.0, 1), (lam * lam, d - 1)])
    if kind == "spiked":
        return CovarianceModel.from_blocks([(float(c.get("spike", 1.0)), 1),
                                            (float(c.get("tail_scale", 5.0)) / cfg.n, d - 1)])
    if kind == "junk":
        sig = [float(v) for v in c.get("signal", [1.0])]
        return CovarianceModel.from_blocks([(v, 1) for v in sig] + [(lam / math.log(d), d)])
    if kind == "diag":
        vals = c["values"]
        if len(vals) != d:
            raise ConfigError(f"field 'values': length {len(vals)} does not match d={d}")
        return CovarianceModel.diagonal(vals)
    blocks = [(float(v), int(k)) for v, k in c["blocks"]]
    if sum(k for _, k in blocks) != d:
        raise ConfigError(f"field 'blocks': counts do not add up to d={d}")
    return CovarianceModel.from_blocks(blocks)


def build_w_star(cfg):
    ws = cfg.w_star
    kind = ws["kind"]
    if kind == "zero":
        return np.zeros(1)
    if kind == "e1":
        return np.array([math.sqrt(float(ws.get("norm_sq", 1.0)))])
    if kind == "sparse":
        s = int(ws["support"])
        return np.full(s, math.sqrt(float(ws.get("norm_sq", 1.0)) / s))
    return np.array(ws["values"], dtype=float)


def build_spec(cfg, d, lam=None, n=None):
    cov = build_covariance(cfg, d, lam)
    w = build_w_star(cfg)
    if w.size > cov.dim:
        raise ConfigError(f"field 'w_star': length {w.size} exceeds dimension {cov.dim}")
    return ProblemSpec.from_variance(cov, w, cfg.noise_var, cfg.n if n is None else n)
