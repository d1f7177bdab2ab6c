"""Flat-file output: CSV/JSON tables and a metadata sidecar.

Numbers are written in their shortest round-trip decimal form (``repr``).
Non-finite values use fixed sentinels: ``neg_inf``, ``pos_inf`` and ``nan``;
``None`` marks a trial whose solver failed and is written as ``infeasible``.
"""
import csv
import io as _io
import json
import math
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1

SENTINELS = {"neg_inf": -math.inf, "pos_inf": math.inf, "nan": math.nan, "infeasible": None}

HEADERS = {
    "figure1": ("d", "trial", "loss", "bound", "null", "bayes", "norm_sq"),
    "figure1_summary": ("lam", "d", "loss_mean", "loss_std", "bound_mean", "bound_std", "null", "bayes",
                        "norm_sq_mean", "interpolated"),
    "junk": ("n", "d", "trial", "loss", "risk_bound", "r1", "rank_sigma1", "width_ratio", "n_over_r1",
             "signal_ratio", "bp_l1_norm"),
    "junk_summary": ("n", "d", "loss_mean", "loss_se", "risk_bound", "r1", "r1_se", "width_ratio",
                     "failures"),
    "isotropic_bp": ("n", "d", "trial", "loss", "bound", "eta", "null", "covered"),
    "isotropic_bp_summary": ("n", "d", "loss_mean", "loss_se", "bound", "eta", "eta_le_1", "null",
                             "coverage", "coverage_se"),
    "bound_check": ("trial", "loss", "norm", "ucb_main", "k_star", "ucb_valid", "covered", "norm_bound",
                    "norm_covered"),
    "bound_check_summary": ("quantity", "coverage", "se", "ci_low", "ci_high", "trials", "target"),
    "cgmt_check": ("pair", "t", "po_tail", "po_se", "ao_tail", "ao_se", "combined_se", "pass"),
    "ranks": ("d", "norm", "r", "R", "r_norm", "r_norm_se", "R_norm", "R_norm_se", "sandwich_low",
              "sandwich_high"),
    "split_scan": ("d", "k", "value", "valid", "interval_low", "interval_high"),
}


def format_value(v):
    if v is None:
        return "infeasible"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "pos_inf" if v > 0 else "neg_inf"
        return repr(v)
    return str(v)


def parse_value(s):
    """Inverse of :func:`format_value` for numeric and sentinel cells."""
    if s in SENTINELS:
        return SENTINELS[s]
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def csv_text(header, rows):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} cells, header has {len(header)}")
        w.writerow([format_value(v) for v in row])
    return buf.getvalue()


def json_text(header, rows):
    recs = [{h: format_value(v) if _needs_sentinel(v) else _plain(v) for h, v in zip(header, row)}
            for row in rows]
    return json.dumps({"schema_version": SCHEMA_VERSION, "columns": list(header), "rows": recs},
                      indent=1) + "\n"


def _needs_sentinel(v):
    return v is None or (isinstance(v, (float, np.floating)) and not math.isfinite(float(v)))


def _plain(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    return v


def read_csv(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = tuple(next(r))
        rows = [tuple(parse_value(c) for c in row) for row in r]
    return header, rows


def write_table(out_dir, name, header, rows, fmt="csv"):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path = out_dir / f"{name}.json"
        path.write_text(json_text(header, rows))
    else:
        path = out_dir / f"{name}.csv"
        path.write_text(csv_text(header, rows))
    return path


def write_meta(out_dir, meta):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "meta.json"
    path.write_text(json.dumps({"schema_version": SCHEMA_VERSION, **meta}, indent=2, sort_keys=True,
                               default=_plain) + "\n")
    return path
