"""Norm tags and the primal/dual pairs l1 <-> linf, l2 <-> l2."""
import numpy as np

from .errors import UnsupportedNorm

_ALIASES = {
    "l1": "l1", "1": "l1",
    "l2": "l2", "2": "l2",
    "linf": "linf", "inf": "linf", "l_inf": "linf",
}
_ORD = {"l1": 1, "l2": 2, "linf": np.inf}
_DUAL = {"l1": "linf", "l2": "l2", "linf": "l1"}


def parse_norm(tag):
    key = str(tag).strip().lower()
    try:
        return _ALIASES[key]
    except KeyError:
        raise UnsupportedNorm(f"unsupported norm {tag!r}; expected one of l1, l2, linf") from None


def dual_of(tag):
    return _DUAL[parse_norm(tag)]


def norm_value(v, tag):
    return float(np.linalg.norm(np.asarray(v, dtype=float).ravel(), ord=_ORD[parse_norm(tag)]))
