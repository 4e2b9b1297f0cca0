"""
gabor-eb command line

    gabor-eb spline --rates -2,-1,1,2
    gabor-eb zak zero --rates 0,0 --format json
    gabor-eb dual --rates -2,-1,1,2 --alpha 1 --beta 0.86
    gabor-eb bounds sweep --out sweep.csv
    gabor-eb config validate config/defaults.yaml

Every command resolves its flags into a RunConfig before computing anything and embeds it
in JSON output. Library errors become one stderr line and an exit status:

    2  configuration / usage
    3  residual assertion or numerical failure
    4  window, lattice or argument rejected
    5  I/O
"""

from __future__ import annotations
import logging
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Optional, Sequence

import click
import numpy as np
from pydantic import ValidationError

from core.config.settings import NumericDefaults, load_defaults, resolve_defaults_path
from core.config.validator import validate_defaults_config
from core.errors import (
    ConfigError,
    ConvergenceError,
    DomainError,
    GaborEBError,
    LatticeError,
    ResidualError,
    SingularMatrixError,
    WindowError,
)
from core.export import emit, render_csv, render_json
from core.model import FrameBoundReport, LatticeParams, RunConfig, WindowSpec

logger = logging.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_RESIDUAL = 3
EXIT_REJECTED = 4
EXIT_IO = 5

VERIFY_TOL = 1e-10
FACTOR_TOL = 1e-8
CM_TOL = 1e-10

REPORT_HEADER = ["method", "alpha", "beta", "lower", "upper", "grid_x", "grid_omega", "max_residual", "minimizer"]
SWEEP_HEADER = ["panel", "k", "beta", "A_formula", "A_opt", "B_opt"]


def exit_code_for(err: BaseException) -> int:
    if isinstance(err, ConfigError):
        return EXIT_CONFIG
    if isinstance(err, (ResidualError, SingularMatrixError, ConvergenceError)):
        return EXIT_RESIDUAL
    if isinstance(err, (LatticeError, DomainError, WindowError)):
        return EXIT_REJECTED
    if isinstance(err, OSError):
        return EXIT_IO
    return 1


class GaborEBGroup(click.Group):
    """Root group: maps library errors anywhere below it to a diagnostic and exit status."""

    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except (GaborEBError, OSError) as e:
            logger.debug("[cli] %s", type(e).__name__, exc_info=True)
            click.echo(f"gabor-eb: {e}", err=True)
            ctx.exit(exit_code_for(e))


@dataclass
class CliState:
    config_path: Optional[str] = None
    _defaults: Optional[NumericDefaults] = field(default=None, repr=False)

    @property
    def defaults(self) -> NumericDefaults:
        if self._defaults is None:
            self._defaults = load_defaults(self.config_path)
        return self._defaults


# -------------------------
# Flag parsing
# -------------------------

def _float_list(ctx: click.Context, param: click.Parameter, value: Optional[str]) -> Optional[List[float]]:
    if value is None:
        return None
    try:
        out = [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got {value!r}")
    if not out:
        raise click.BadParameter("at least one value is required")
    return out


def _window_spec(rates: Optional[List[float]], poles: Optional[List[float]], C: float) -> WindowSpec:
    if (rates is None) == (poles is None):
        raise click.UsageError("give exactly one of --rates (EB-spline) or --poles (TP window)")
    if rates is not None:
        return WindowSpec.create(family="eb", rates=rates)
    return WindowSpec.create(family="tp", poles=poles, C=C)


def _lattice(alpha: float, beta: Optional[float], beta_frac: Optional[str]) -> LatticeParams:
    if (beta is None) == (beta_frac is None):
        raise click.UsageError("give exactly one of --beta or --beta-frac")
    if beta_frac is not None:
        # repr keeps decimal alphas such as 0.7 exact as 7/10
        return LatticeParams.from_fraction(Fraction(repr(alpha)), beta_frac)
    return LatticeParams.create(alpha, beta).with_inferred_rational()


def _run_config(**kwargs: Any) -> RunConfig:
    try:
        return RunConfig(**kwargs)
    except ValidationError as e:
        msg = "; ".join(err["msg"] for err in e.errors())
        raise ConfigError(msg, key=kwargs.get("command")) from e


def _write(text: str, out: Optional[str]) -> None:
    path = emit(text, out)
    if path is None:
        click.echo(text, nl=False)
    else:
        logger.info("[cli] wrote %s", path)


def _emit_report(
    cfg: RunConfig,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    result: Any,
    residuals: Optional[Dict[str, Any]] = None,
) -> None:
    if cfg.format == "json":
        _write(render_json(cfg.audit(), result, residuals), cfg.out)
    else:
        _write(render_csv(header, rows), cfg.out)


def _report_row(r: FrameBoundReport) -> List[Any]:
    return [r.method, r.lattice.alpha, r.lattice.beta, r.lower, r.upper, r.grid[0], r.grid[1], r.max_residual, r.minimizer]


def _check_residual(check: str, residual: float, tol: float) -> None:
    if residual > tol:
        logger.warning("[cli] %s residual %.3e above %.1e", check, residual, tol)
        raise ResidualError(f"{check} check failed", check=check, residual=residual, tolerance=tol)


def output_options(fn: Any) -> Any:
    fn = click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)(fn)
    fn = click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file (stdout if omitted)")(fn)
    return fn


def window_options(fn: Any) -> Any:
    fn = click.option("--C", "C", type=float, default=1.0, show_default=True, help="TP normalization constant")(fn)
    fn = click.option("--poles", callback=_float_list, default=None, help="TP pole rates a_1,...,a_M")(fn)
    fn = click.option("--rates", callback=_float_list, default=None, help="EB-spline rates lam_1,...,lam_m")(fn)
    return fn


def lattice_options(fn: Any) -> Any:
    fn = click.option("--beta-frac", default=None, help="beta as an exact fraction, e.g. 31/61")(fn)
    fn = click.option("--beta", type=float, default=None)(fn)
    fn = click.option("--alpha", type=float, default=1.0, show_default=True)(fn)
    return fn


# -------------------------
# Root
# -------------------------

@click.group(cls=GaborEBGroup)
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
              help="Numeric defaults YAML (else GABOR_EB_CONFIG, else config/defaults.yaml)")
@click.option("--log-level", envvar="GABOR_EB_LOG_LEVEL", default="WARNING", show_default=True,
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
@click.pass_context
def cli(ctx: click.Context, config_path: Optional[str], log_level: str) -> None:
    """EB-spline and TP Gabor windows: Zak transforms, dual windows and frame bounds."""
    logging.basicConfig(
        level=getattr(logging, log_level.upper()),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )
    ctx.obj = CliState(config_path=config_path)


# -------------------------
# spline
# -------------------------

@cli.command()
@click.option("--rates", callback=_float_list, required=True, help="Rates lam_1,...,lam_m")
@click.option("--samples", type=click.IntRange(min=2), default=None, help="Uniform samples over [0, m]")
@click.option("--check-cm", is_flag=True, help="Compare against the closed form (distinct rates)")
@output_options
@click.pass_obj
def spline(state: CliState, rates: List[float], samples: Optional[int], check_cm: bool, out: Optional[str], fmt: str) -> None:
    """Sample the EB-spline B_Lambda."""
    from core.spline.windows import christensen_massopust

    d = state.defaults
    n = samples or d.spline.samples
    spec = WindowSpec.create(family="eb", rates=rates)
    cfg = _run_config(
        command="spline", window=spec, grids={"samples": n}, out=out, format=fmt,
        options={"check_cm": check_cm}, defaults_source=d.source,
    )
    w = spec.build(d.tolerances.rate_merge)
    xs = np.linspace(0.0, float(w.order), n)
    vals = w(xs)

    residuals: Dict[str, Any] = {}
    if check_cm:
        residuals["christensen_massopust"] = float(np.max(np.abs(vals - christensen_massopust(rates, xs))))

    result = {
        "rates": list(w.rates),
        "m": w.order,
        "piecewise": w.shape.to_dict(),
        "samples": [[float(x), float(v)] for x, v in zip(xs, vals)],
    }
    _emit_report(cfg, ["x", "value"], zip(xs, vals), result, residuals)
    if check_cm:
        _check_residual("christensen_massopust", residuals["christensen_massopust"], CM_TOL)


# -------------------------
# zak
# -------------------------

@cli.group()
def zak() -> None:
    """Zak transform scans, zeros and identities."""


def _zak_setup(state: CliState, command: str, rates, poles, C, alpha, out, fmt, grids, options=None):
    from core.frames.zak import ZakEvaluator

    d = state.defaults
    if not alpha > 0.0:
        raise DomainError("alpha must be positive", parameter="alpha", value=alpha)
    spec = _window_spec(rates, poles, C)
    cfg = _run_config(
        command=command, window=spec, grids=grids, out=out, format=fmt,
        options={"alpha": alpha, **(options or {})}, defaults_source=d.source,
    )
    w = spec.build(d.tolerances.rate_merge)
    e = ZakEvaluator.for_window(w, alpha, d.tolerances.zak_tail)
    return cfg, w, e


@zak.command("eval")
@window_options
@click.option("--alpha", type=float, default=1.0, show_default=True)
@click.option("--n", "n", type=click.IntRange(min=1), default=None, help="Grid points per axis")
@output_options
@click.pass_obj
def zak_eval(state: CliState, rates, poles, C, alpha, n, out, fmt) -> None:
    """|Z|, Re Z and Im Z on the fundamental cell [0, alpha) x [0, 1/alpha)."""
    from core.frames.zak import modulus_grid

    n = n or state.defaults.zak.eval_grid
    cfg, _, e = _zak_setup(state, "zak eval", rates, poles, C, alpha, out, fmt, {"n_x": n, "n_omega": n})
    xs, om, Z = modulus_grid(e, n, n)
    rows = [
        (float(xs[i]), float(om[j]), float(abs(Z[i, j])), float(Z[i, j].real), float(Z[i, j].imag))
        for i in range(len(xs))
        for j in range(len(om))
    ]
    result = {
        "x": xs, "omega": om, "abs": np.abs(Z), "re": Z.real, "im": Z.imag,
        "truncation_half_width": e.truncation_half_width,
    }
    _emit_report(cfg, ["x", "omega", "abs", "re", "im"], rows, result, {"tail_bound": e.tail_bound})


@zak.command("zero")
@window_options
@click.option("--alpha", type=float, default=1.0, show_default=True)
@click.option("--scan", type=click.IntRange(min=4), default=None, help="n for the n x n cell scan")
@output_options
@click.pass_obj
def zak_zero(state: CliState, rates, poles, C, alpha, scan, out, fmt) -> None:
    """Locate the single zero of the Zak transform."""
    from core.frames.zak import locate_zero_on_half_line, locate_zero_tp

    scan = scan or state.defaults.zak.scan
    cfg, w, e = _zak_setup(state, "zak zero", rates, poles, C, alpha, out, fmt, {"scan": scan})
    if cfg.window.family == "tp":
        rep = locate_zero_tp(w, alpha, scan, state.defaults.tolerances.zak_tail)
    else:
        rep = locate_zero_on_half_line(e, scan)
    d = rep.to_dict()
    _emit_report(cfg, list(d), [list(d.values())], d, {"zero": rep.residual})


@zak.command("verify")
@window_options
@click.option("--alpha", type=float, default=1.0, show_default=True)
@click.option("--samples", type=click.IntRange(min=1), default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@output_options
@click.pass_obj
def zak_verify(state: CliState, rates, poles, C, alpha, samples, seed, out, fmt) -> None:
    """Periodicity, quasi-periodicity and scaling residuals on random points."""
    from core.frames.zak import identity_residuals

    samples = samples or state.defaults.zak.verify_samples
    cfg, _, e = _zak_setup(
        state, "zak verify", rates, poles, C, alpha, out, fmt, {"samples": samples}, {"seed": seed}
    )
    res = identity_residuals(e, samples=samples, seed=seed)
    _emit_report(cfg, ["identity", "residual"], sorted(res.items()), res, res)
    _check_residual("zak_identities", max(res.values()), VERIFY_TOL)


@zak.command("factor-check")
@window_options
@click.option("--alpha", type=float, default=1.0, show_default=True)
@click.option("--n", "n", type=click.IntRange(min=1), default=None, help="Grid points per axis")
@output_options
@click.pass_obj
def zak_factor_check(state: CliState, rates, poles, C, alpha, n, out, fmt) -> None:
    """Residual of the TP factorization through the partner EB-spline."""
    from core.frames.zak import factorization_residual

    if poles is None:
        raise click.UsageError("factor-check needs --poles")
    n = n or state.defaults.zak.factor_grid
    cfg, w, _ = _zak_setup(state, "zak factor-check", rates, poles, C, alpha, out, fmt, {"n_x": n, "n_omega": n})
    res = factorization_residual(w, alpha, n, state.defaults.tolerances.zak_tail)
    result = {"alpha": alpha, "n": n, "max_residual": res}
    _emit_report(cfg, ["alpha", "n", "max_residual"], [[alpha, n, res]], result, {"factorization": res})
    _check_residual("factorization", res, FACTOR_TOL)


# -------------------------
# dual
# -------------------------

@cli.command()
@click.option("--rates", callback=_float_list, required=True, help="EB-spline rates")
@lattice_options
@click.option("--grid-points", type=click.IntRange(min=2), default=None, help="Samples of I, endpoints included")
@click.option("--extra-cols", type=click.IntRange(min=0), default=None, help="0: square block, >0: widened section")
@output_options
@click.pass_obj
def dual(state: CliState, rates, alpha, beta, beta_frac, grid_points, extra_cols, out, fmt) -> None:
    """Dual window gamma from the pre-Gramian block inverse."""
    from core.frames.gramian import dual_window

    d = state.defaults
    grid_points = grid_points or d.dual.grid_points
    extra_cols = d.dual.extra_cols if extra_cols is None else extra_cols
    spec = WindowSpec.create(family="eb", rates=rates)
    lat = _lattice(alpha, beta, beta_frac)
    cfg = _run_config(
        command="dual", window=spec, lattice=lat, grids={"grid_points": grid_points},
        extra_cols=extra_cols, out=out, format=fmt, defaults_source=d.source,
    )
    dw = dual_window(
        spec.build(d.tolerances.rate_merge), lat, grid_points=grid_points, extra_cols=extra_cols,
        tol=d.tolerances.residual, pivot_rel=d.tolerances.solve_pivot, pinv_rcond=d.tolerances.pinv_rcond,
    )
    samples = dw.samples()
    result = dw.to_dict()
    result["samples"] = [[y, g, edge] for y, g, edge in samples]
    residuals = {"duality": dw.residual, "wiener_norm_estimate": dw.wiener_norm_estimate}
    _emit_report(cfg, ["x", "gamma", "discontinuity"], samples, result, residuals)


# -------------------------
# bounds
# -------------------------

@cli.group()
def bounds() -> None:
    """Closed-form and numerically optimal frame bounds."""


def _refine_options(d: NumericDefaults, start: Optional[int], cap: Optional[int], rel: Optional[float]) -> Dict[str, Any]:
    start = start or d.optimal.start
    cap = cap or d.optimal.max
    if start > cap:
        raise ConfigError(f"--start {start} exceeds --max {cap}", key="optimal")
    return {"start": start, "max_grid": cap, "rel_change": rel or d.optimal.rel_change}


def refine_options(fn: Any) -> Any:
    fn = click.option("--rel-change", type=click.FloatRange(min=0.0, max=1.0, min_open=True, max_open=True), default=None)(fn)
    fn = click.option("--max", "cap", type=click.IntRange(min=1), default=None, help="Grid cap per axis")(fn)
    fn = click.option("--start", type=click.IntRange(min=1), default=None, help="Initial grid per axis")(fn)
    return fn


@bounds.command("formula")
@click.option("--family", type=click.Choice(["eb2", "tp2"]), required=True)
@click.option("--lambda", "lam", type=float, default=1.0, show_default=True)
@lattice_options
@output_options
@click.pass_obj
def bounds_formula(state: CliState, family, lam, alpha, beta, beta_frac, out, fmt) -> None:
    """Closed-form lower bound for the order-2 spline or the two-sided exponential."""
    from core.frames.bounds import formula_report

    lat = _lattice(alpha, beta, beta_frac)
    spec = WindowSpec.create(family="eb", rates=[lam, -lam]) if family == "eb2" else WindowSpec.create(family="tp", poles=[lam, -lam])
    cfg = _run_config(
        command="bounds formula", window=spec, lattice=lat, out=out, format=fmt,
        options={"family": family, "lambda": lam}, defaults_source=state.defaults.source,
    )
    rep = formula_report(family, lam, lat)
    _emit_report(cfg, REPORT_HEADER, [_report_row(rep)], rep.model_dump(mode="json"))


@bounds.command("optimal")
@window_options
@lattice_options
@click.option("--method", type=click.Choice(["rational", "highredundancy", "zak"]), default="rational", show_default=True)
@click.option("--N", "N", type=click.IntRange(min=1), default=None, help="beta = 1/N for --method zak")
@click.option("--grid", type=click.IntRange(min=2), default=None, help="Grid for highredundancy / zak")
@refine_options
@output_options
@click.pass_obj
def bounds_optimal(state: CliState, rates, poles, C, alpha, beta, beta_frac, method, N, grid, start, cap, rel_change, out, fmt) -> None:
    """Optimal frame bounds on a grid."""
    from core.frames import bounds as fb

    d = state.defaults
    spec = _window_spec(rates, poles, C)
    options: Dict[str, Any] = {"method": method}
    grids: Dict[str, int] = {}
    refine: Dict[str, Any] = {}
    lat: Optional[LatticeParams] = None
    if method == "zak":
        if N is None:
            raise click.UsageError("--method zak needs --N")
        grid = grid or d.zak.scan
        grids["grid"] = grid
        options["N"] = N
    else:
        lat = _lattice(alpha, beta, beta_frac)
        if method == "highredundancy":
            grid = grid or d.optimal.highredundancy_grid
            grids["grid"] = grid
        else:
            refine = _refine_options(d, start, cap, rel_change)
            grids.update(start=refine["start"], max=refine["max_grid"])
            options["rel_change"] = refine["rel_change"]
    cfg = _run_config(
        command="bounds optimal", window=spec, lattice=lat, grids=grids, out=out, format=fmt,
        options=options, defaults_source=d.source,
    )

    w = spec.build(d.tolerances.rate_merge)
    if method == "zak":
        rep = fb.optimal_bound_zak_subsampled(w, N, grid)
    elif method == "highredundancy":
        rep = fb.optimal_bound_highredundancy(w, lat, grid)
    elif spec.family == "tp":
        rep = fb.optimal_bound_tp_transferred(w, lat, **refine)
    else:
        rep = fb.optimal_bound_rational(w, lat, **refine)
    _emit_report(cfg, REPORT_HEADER, [_report_row(rep)], rep.model_dump(mode="json"), {"max_residual": rep.max_residual})


@bounds.command("schur")
@click.option("--rates", callback=_float_list, required=True, help="EB-spline rates")
@lattice_options
@click.option("--grid", type=click.IntRange(min=2), default=None)
@output_options
@click.pass_obj
def bounds_schur(state: CliState, rates, alpha, beta, beta_frac, grid, out, fmt) -> None:
    """Schur-test upper frame bound."""
    from core.frames.bounds import upper_bound_schur

    d = state.defaults
    grid = grid or d.optimal.highredundancy_grid
    spec = WindowSpec.create(family="eb", rates=rates)
    lat = _lattice(alpha, beta, beta_frac)
    cfg = _run_config(
        command="bounds schur", window=spec, lattice=lat, grids={"grid": grid}, out=out, format=fmt,
        defaults_source=d.source,
    )
    rep = upper_bound_schur(spec.build(d.tolerances.rate_merge), lat, grid)
    _emit_report(cfg, REPORT_HEADER, [_report_row(rep)], rep.model_dump(mode="json"))


@bounds.command("sweep")
@click.option("--lambda", "lam", type=float, default=None)
@click.option("--denominator", type=click.IntRange(min=2), default=None)
@click.option("--k-min", type=click.IntRange(min=1), default=None)
@click.option("--k-max", type=click.IntRange(min=1), default=None)
@click.option("--workers", type=click.IntRange(min=0), default=None, help="0 = one per CPU (else GABOR_EB_THREADS)")
@refine_options
@output_options
@click.pass_obj
def bounds_sweep(state: CliState, lam, denominator, k_min, k_max, workers, start, cap, rel_change, out, fmt) -> None:
    """Formula and optimal lower bounds over beta = k/denominator for both windows."""
    from core.frames.bounds import bound_sweep

    d = state.defaults
    f = d.sweep
    lam = f.lambda_ if lam is None else lam
    denominator = denominator or f.denominator
    k_min = k_min or f.k_min
    k_max = k_max or f.k_max
    refine = _refine_options(d, start, cap, rel_change)
    cfg = _run_config(
        command=f"bounds {click.get_current_context().info_name}", grids={"start": refine["start"], "max": refine["max_grid"]},
        out=out, format=fmt, defaults_source=d.source,
        options={
            "lambda": lam, "denominator": denominator, "k_min": k_min, "k_max": k_max,
            "rel_change": refine["rel_change"], "workers": workers,
        },
    )
    rows = bound_sweep(lam, denominator, k_min, k_max, workers=workers, **refine)
    table = [[r.panel, r.k, r.beta, r.a_formula, r.a_opt, r.b_opt] for r in rows]
    violations = [r for r in rows if r.a_formula > r.a_opt]
    _emit_report(cfg, SWEEP_HEADER, table, [r.to_dict() for r in rows], {"formula_above_optimal": len(violations)})
    if violations:
        worst = max(r.a_formula - r.a_opt for r in violations)
        raise ResidualError(
            f"closed-form bound above the optimal bound at {len(violations)} points",
            check="sweep_ordering", residual=worst, tolerance=0.0,
        )


# `bounds figure3` runs the same sweep
bounds.add_command(bounds_sweep, name="figure3")


# -------------------------
# config
# -------------------------

@cli.group("config")
def config_group() -> None:
    """Numeric defaults file."""


@config_group.command("validate")
@click.argument("path", required=False, type=click.Path(dir_okay=False))
@click.pass_obj
def config_validate(state: CliState, path: Optional[str]) -> None:
    """Validate a defaults YAML (default: --config, GABOR_EB_CONFIG or the repository file)."""
    target = str(resolve_defaults_path(path or state.config_path))
    ok, errors = validate_defaults_config(target)
    if not ok:
        click.echo(f"Config validation FAILED: {target}")
        for e in errors:
            click.echo(f" - {e}")
        raise click.exceptions.Exit(EXIT_CONFIG)
    click.echo(f"Config valid: {target}")


def main(argv: Optional[List[str]] = None) -> None:
    cli.main(args=argv, prog_name="gabor-eb")


if __name__ == "__main__":
    main()
