"""CSV ingestion and result serialization."""

from __future__ import annotations

import csv
import json

import numpy as np

from .bootstrap import TestResult
from .errors import NonFiniteValue, SemigenError
from .types import Sample, validate_sample


class CsvFormatError(SemigenError):
    pass


def read_sample_csv(path) -> Sample:
    """Read a sample from CSV with header columns y, d, x1..xpX, z1..zp."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        header = [c.strip() for c in header]
        x_cols = [c for c in header if c.startswith("x") and c[1:].isdigit()]
        z_cols = [c for c in header if c.startswith("z") and c[1:].isdigit()]
        expected = ["y", "d"] + sorted(x_cols, key=lambda c: int(c[1:])) \
            + sorted(z_cols, key=lambda c: int(c[1:]))
        if "y" not in header or "d" not in header or not x_cols or not z_cols:
            raise CsvFormatError(
                f"{path}: header must name columns y, d, x1.., z1..; got {header}")
        if sorted(header) != sorted(expected):
            extra = set(header) - set(expected)
            raise CsvFormatError(f"{path}: unexpected columns {sorted(extra)}")
        pos = {c: header.index(c) for c in header}
        rows = []
        for rownum, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise CsvFormatError(
                    f"{path}: row {rownum} has {len(row)} cells, expected {len(header)}")
            vals = []
            for col in expected:
                cell = row[pos[col]].strip()
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise CsvFormatError(
                        f"{path}: non-numeric cell {cell!r} at row {rownum}, "
                        f"column {col}") from None
            rows.append(vals)
    if not rows:
        raise CsvFormatError(f"{path}: no data rows")
    data = np.array(rows)
    n_x = len(x_cols)
    sample = Sample(
        y=data[:, 0],
        d=data[:, 1],
        x=data[:, 2:2 + n_x],
        z=data[:, 2 + n_x:],
    )
    try:
        return validate_sample(sample)
    except NonFiniteValue as exc:
        raise CsvFormatError(f"{path}: {exc}") from exc


def test_result_to_dict(result: TestResult) -> dict:
    diagnostics = dict(result.diagnostics)
    diagnostics.pop("optimizer_trace", None)
    return {
        "s_n": result.s_n,
        "s_star": [float(v) for v in result.s_star],
        "critical_values": {str(a): v for a, v in result.critical_values.items()},
        "p_value": result.p_value,
        "beta_hat": [float(v) for v in result.beta_hat],
        "h_selected": result.h_selected,
        "reject": {str(a): v for a, v in result.reject.items()},
        "diagnostics": diagnostics,
    }


def test_result_from_dict(doc: dict) -> TestResult:
    return TestResult(
        s_n=doc["s_n"],
        s_star=np.array(doc["s_star"]),
        critical_values={float(a): v for a, v in doc["critical_values"].items()},
        p_value=doc["p_value"],
        beta_hat=np.array(doc["beta_hat"]),
        h_selected=doc["h_selected"],
        reject={float(a): v for a, v in doc["reject"].items()},
        diagnostics=doc.get("diagnostics", {}),
    )


def write_test_result_json(result: TestResult, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(test_result_to_dict(result), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_test_result_csv(result: TestResult, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["alpha", "critical_value", "reject"])
        for a in sorted(result.critical_values):
            writer.writerow([a, f"{result.critical_values[a]:.10g}",
                             int(result.reject[a])])
        writer.writerow([])
        writer.writerow(["s_n", f"{result.s_n:.10g}"])
        writer.writerow(["p_value", f"{result.p_value:.10g}"])
        writer.writerow(["h_selected", f"{result.h_selected:.10g}"])
        writer.writerow(["beta_hat"] + [f"{b:.10g}" for b in result.beta_hat])
