"""Report assembly, schema validation and deterministic serialization.

Everything that may differ between two runs of the same configuration
(wall-clock times, cache statistics, output locations, thread counts) lives
under the ``timing`` key, which determinism checks ignore.
"""

import csv
import json
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

SCHEMA_VERSION = "1"


@lru_cache(maxsize=1)
def report_schema():
    text = resources.files("fracbn.experiments").joinpath("schema/report.schema.json").read_text()
    return json.loads(text)


def plain(obj):
    """Convert numpy scalars/arrays and non-finite floats to JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else None
    return obj


def validate_report(report):
    jsonschema.validate(report, report_schema())
    return report


def dumps(report):
    return json.dumps(plain(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_report(report, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = plain(report)
    validate_report(report)
    path = out / "report.json"
    path.write_text(dumps(report))
    return path


def strip_timing(report):
    """Copy of a report without the run-dependent ``timing`` section."""
    return {k: v for k, v in report.items() if k != "timing"}


def write_table(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for row in rows:
            wr.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else plain(v) for v in row])
    return path
