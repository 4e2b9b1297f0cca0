from __future__ import annotations

import sys
from typing import Any, Dict, List, Tuple

import yaml

DEFAULTS_PATH = "config/defaults.yaml"

_POSITIVE_INTS = {
    "spline": ("samples",),
    "zak": ("scan", "eval_grid", "verify_samples", "factor_grid"),
    "optimal": ("start", "max", "highredundancy_grid"),
    "dual": ("grid_points",),
    "sweep": ("denominator", "k_min", "k_max"),
}

_TOLERANCES = ("rate_merge", "pinv_rcond", "solve_pivot", "residual", "zak_tail")


def _read_yaml(path: str) -> Dict[str, Any]:
    with open(path, "r") as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise ValueError(f"YAML at {path} must be a mapping at top level")
    return data


def _check_positive_int(errs: List[str], where: str, val: Any) -> None:
    if isinstance(val, bool) or not isinstance(val, int):
        errs.append(f"{where} must be an integer")
    elif val <= 0:
        errs.append(f"{where} must be positive")


def validate_defaults_data(data: Dict[str, Any]) -> Tuple[bool, List[str]]:
    errs: List[str] = []

    for section, keys in _POSITIVE_INTS.items():
        block = data.get(section, {})
        if not isinstance(block, dict):
            errs.append(f"{section} must be a mapping")
            continue
        for key in keys:
            if key in block:
                _check_positive_int(errs, f"{section}.{key}", block[key])

    opt = data.get("optimal", {})
    if isinstance(opt, dict):
        start, cap = opt.get("start"), opt.get("max")
        if isinstance(start, int) and isinstance(cap, int) and start > cap:
            errs.append("optimal.start must not exceed optimal.max")
        if "rel_change" in opt:
            try:
                rc = float(opt["rel_change"])
                if not (0.0 < rc < 1.0):
                    errs.append("optimal.rel_change must be in (0,1)")
            except Exception:
                errs.append("optimal.rel_change must be numeric")

    dual = data.get("dual", {})
    if isinstance(dual, dict):
        gp = dual.get("grid_points")
        if isinstance(gp, int) and gp < 2:
            errs.append("dual.grid_points must be at least 2 (both endpoints of I)")
        ec = dual.get("extra_cols", 0)
        if isinstance(ec, bool) or not isinstance(ec, int) or ec < 0:
            errs.append("dual.extra_cols must be a non-negative integer")

    fig = data.get("sweep", {})
    if isinstance(fig, dict):
        k_min, k_max, den = fig.get("k_min"), fig.get("k_max"), fig.get("denominator")
        if all(isinstance(v, int) for v in (k_min, k_max, den)):
            if not (0 < k_min <= k_max < den):
                errs.append("sweep requires 0 < k_min <= k_max < denominator")
        if "lambda" in fig:
            try:
                if float(fig["lambda"]) <= 0.0:
                    errs.append("sweep.lambda must be positive")
            except Exception:
                errs.append("sweep.lambda must be numeric")

    tol = data.get("tolerances", {})
    if not isinstance(tol, dict):
        errs.append("tolerances must be a mapping")
    else:
        for key in _TOLERANCES:
            if key not in tol:
                continue
            try:
                v = float(tol[key])
                if not (0.0 < v < 1.0):
                    errs.append(f"tolerances.{key} must be in (0,1)")
            except Exception:
                errs.append(f"tolerances.{key} must be numeric")
        unknown = sorted(set(tol) - set(_TOLERANCES))
        for key in unknown:
            errs.append(f"tolerances.{key} is not a known tolerance")

    return (len(errs) == 0), errs


def validate_defaults_config(path: str) -> Tuple[bool, List[str]]:
    try:
        data = _read_yaml(path)
    except (OSError, ValueError, yaml.YAMLError) as e:
        return False, [str(e)]
    return validate_defaults_data(data)


def main(argv: List[str] | None = None) -> int:
    argv = argv or sys.argv[1:]
    path = argv[0] if argv else DEFAULTS_PATH

    ok, errors = validate_defaults_config(path)
    if not ok:
        print(f"Config validation FAILED: {path}")
        for e in errors:
            print(f" - {e}")
        return 2

    print(f"Config valid: {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
