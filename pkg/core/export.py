"""
CSV / JSON report writers.

CSV: header row, comma separated, LF line endings, UTF-8, floats in shortest round-trip form.
JSON: one object with "config", "result" and "residuals" keys.
Identical inputs give byte-identical files.
"""

from __future__ import annotations
import csv
import io
import json
import math
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Sequence

import numpy as np


def format_number(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(v: Any) -> Any:
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else repr(f)
    if isinstance(v, complex):
        return {"re": v.real, "im": v.imag}
    if isinstance(v, Fraction):
        return str(v)
    return v


def render_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(header))
    for row in rows:
        writer.writerow([format_number(v) for v in row])
    return buf.getvalue()


def render_json(config: Dict[str, Any], result: Any, residuals: Optional[Dict[str, Any]] = None) -> str:
    doc = {"config": config, "result": result, "residuals": residuals or {}}
    return json.dumps(_jsonable(doc), indent=2) + "\n"


def emit(text: str, out: Optional[str]) -> Optional[Path]:
    """Write text to out (UTF-8, LF kept as is) or return None so the caller prints it."""
    if out is None:
        return None
    path = Path(out)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    return path
