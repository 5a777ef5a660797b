"""Output-file writers shared by the CLI and the tests.

All writes are atomic (temp file in the target directory, then rename).
JSON files use sorted keys and no wall-clock content, so a rerun with the
same seed reproduces every byte; timing goes to a separate sidecar file.
NaN is never written to JSON (undefined values become null).
"""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile

import numpy as np

REPORT_FORMAT_VERSION = 1


def _clean(obj):
    """Recursively convert numpy scalars and NaN/inf into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    return obj


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, payload: dict) -> None:
    atomic_write_text(path, json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n")


def write_report(path, config: dict, results: dict, warnings=(), timing_file: str = "timing.json") -> None:
    """The versioned report envelope; timing lives in the sidecar file."""
    write_json(
        path,
        {
            "format_version": REPORT_FORMAT_VERSION,
            "config": config,
            "results": results,
            "warnings": list(warnings),
            "timing": {"see": timing_file},
        },
    )


def write_timing(path, seconds: float, details: dict | None = None) -> None:
    payload = {"wall_seconds": seconds}
    if details:
        payload.update(details)
    write_json(path, payload)


def _cell(value) -> str:
    """CSV cell: shortest round-trip decimals, empty string for undefined."""
    if value is None:
        return ""
    if isinstance(value, (np.bool_, bool)):
        return "true" if value else "false"
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return repr(v) if math.isfinite(v) else ""
    return str(value)


def write_csv_rows(path, header, rows) -> None:
    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".csv")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(v) for v in row])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_estimates_csv(path, test_indices, est) -> None:
    rows = (
        (
            int(test_indices[i]),
            est.delta[i],
            est.delta_s[i],
            est.r_s[i],
            est.zeta0_hat[i],
            bool(est.valid[i]),
        )
        for i in range(len(test_indices))
    )
    write_csv_rows(path, ["test_index", "delta", "delta_s", "r_s", "zeta0_hat", "valid"], rows)


def write_ci_csv(path, test_indices, cis) -> None:
    header = ["test_index"]
    for name in ("delta", "delta_s", "r_s"):
        header += [f"{name}_lower", f"{name}_upper", f"{name}_n_valid"]
    rows = []
    for i in range(len(test_indices)):
        row = [int(test_indices[i])]
        for name in ("delta", "delta_s", "r_s"):
            iv = cis[name]
            row += [iv.lower[i], iv.upper[i], int(iv.n_valid[i])]
        rows.append(row)
    write_csv_rows(path, header, rows)


def write_decisions_csv(path, test_indices, est, ci_rs, ident) -> None:
    rows = (
        (
            int(test_indices[i]),
            est.r_s[i],
            ci_rs.lower[i],
            ci_rs.upper[i],
            ident.p_raw[i],
            ident.p_adjusted[i],
            bool(ident.strong[i]),
        )
        for i in range(len(test_indices))
    )
    write_csv_rows(
        path,
        ["test_index", "estimate", "ci_lower", "ci_upper", "p_raw", "p_adjusted", "strong"],
        rows,
    )


def write_replicates_csv(path, matrix, valid) -> None:
    """Bootstrap replicate matrix (B rows, one column per test point)."""
    B, m = matrix.shape
    header = ["replicate"] + [f"test_{j}" for j in range(m)]
    rows = []
    for b in range(B):
        row = [b]
        for j in range(m):
            row.append(matrix[b, j] if valid[b, j] else None)
        rows.append(row)
    write_csv_rows(path, header, rows)


def write_study_long_csv(path, family: str, records) -> None:
    header = [
        "iteration",
        "test_row",
        "x1",
        "r_s_true",
        "r_s_hat",
        "ci_lower",
        "ci_upper",
        "boot_sd",
        "p_raw",
        "p_adjusted",
        "strong",
        "valid",
    ]
    rows = []
    for rec in records:
        m = rec["x1"].shape[0]
        for j in range(m):
            rows.append(
                (
                    rec["iteration"],
                    j,
                    rec["x1"][j],
                    rec["rs_true"][j],
                    rec["rs_hat"][j],
                    rec["ci_lo"][j],
                    rec["ci_hi"][j],
                    rec["boot_sd"][j],
                    rec["p_raw"][j],
                    rec["p_adjusted"][j],
                    bool(rec["strong"][j]),
                    bool(rec["valid"][j]),
                )
            )
    write_csv_rows(path, header, rows)
