"""Command-line interface.

Subcommands: ``estimate`` (moments from a panel), ``optimize`` (weights for a
P&L, Sharpe-floor or risk-cap target), ``frontier`` (P&L/risk/Sharpe sweep as
CSV), ``capacity`` (investment level maximizing optimized P&L), ``crosscheck``
(iterative solver vs exhaustive oracle) and ``synthetic`` (eigenportfolio
basis).

Exit codes: 0 success, 1 usage, 2 data error, 3 solver failure or oracle
mismatch, 4 infeasible target.

JSON output is deterministic: fixed key order and 17-significant-digit
floats, so identical inputs produce byte-identical bytes.
"""

from __future__ import annotations

import json
import sys

import click
import numpy as np

from . import costs as costs_mod
from . import factor as factor_mod
from .core import AlphaSet, DenseCovariance, FactorCovariance
from .errors import (
    AlphaWeightsError,
    BelowSharpeMaxPnl,
    CapacityExceeded,
    DegenerateStream,
    DegenerateWeights,
    DimensionMismatch,
    IllConditioned,
    InfeasibleSharpe,
    InfeasibleTarget,
    InvalidTarget,
    MissingTurnovers,
    NoProfitableScale,
    NonConvergence,
    NotCorrelation,
    NotPositiveDefinite,
    ParseError,
    UnboundedCapacity,
)
from .oracle import MAX_ORACLE_STREAMS, brute_force_min
from .panel import build_factor_model, estimate_moments, load_panel
from .synthetic import synthetic_portfolios

_DATA_ERRORS = (
    ParseError,
    DegenerateStream,
    DegenerateWeights,
    DimensionMismatch,
    NotPositiveDefinite,
    NotCorrelation,
    MissingTurnovers,
    IllConditioned,
)
_INFEASIBLE_ERRORS = (
    InfeasibleTarget,
    InfeasibleSharpe,
    BelowSharpeMaxPnl,
    InvalidTarget,
    CapacityExceeded,
    UnboundedCapacity,
    NoProfitableScale,
)

_COSTS_KEYS = {"L", "Q", "n", "I", "rho_star", "turnovers", "per_stream"}
_MODEL_KEYS = {"alphas", "vols", "turnovers", "cov"}
_FACTOR_COV_KEYS = {"specific_var", "loadings", "factor_cov"}


# --- deterministic JSON ------------------------------------------------------

def _fmt_float(x: float) -> str:
    if x != x or x in (float("inf"), float("-inf")):
        return "null"
    return format(float(x), ".17g")


def _emit_json(obj, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f'{pad}  {json.dumps(str(k))}: {_emit_json(v, indent + 1)}'
            for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = [_emit_json(v, indent) for v in obj]
        return "[" + ", ".join(seq) + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    return json.dumps(obj)


def _solution_dict(sol) -> dict:
    return {
        "schema": 1,
        "weights": [float(w) for w in sol.weights],
        "support": list(sol.support),
        "signs": list(sol.signs),
        "mu": sol.mu,
        "mu_tilde": sol.mu_tilde,
        "pnl": sol.pnl,
        "risk": sol.risk,
        "sharpe": sol.sharpe,
        "iterations": sol.iterations,
        "certified_global": sol.certified_global,
    }


# --- input loading -----------------------------------------------------------

def _load_model(path, factor_count, force_dense):
    """Load a panel CSV or model JSON into (alpha, cov, correlation)."""
    if str(path).endswith(".json"):
        with open(path, encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: {exc}") from None
        unknown = set(raw) - _MODEL_KEYS
        if unknown:
            raise ParseError(f"{path}: unknown model keys: {sorted(unknown)}")
        if "alphas" not in raw or "cov" not in raw:
            raise ParseError(f"{path}: model needs 'alphas' and 'cov'")
        cov_raw = raw["cov"]
        if isinstance(cov_raw, dict):
            unknown = set(cov_raw) - _FACTOR_COV_KEYS
            if unknown:
                raise ParseError(f"{path}: unknown cov keys: {sorted(unknown)}")
            cov = FactorCovariance(
                specific_var=np.asarray(cov_raw["specific_var"], dtype=float),
                loadings=np.asarray(cov_raw["loadings"], dtype=float),
                factor_cov=np.asarray(cov_raw["factor_cov"], dtype=float),
            )
        else:
            cov = DenseCovariance(np.asarray(cov_raw, dtype=float))
        vols = raw.get("vols")
        if vols is None:
            vols = np.sqrt(np.diag(cov.densify()))
        alpha = AlphaSet(
            alphas=np.asarray(raw["alphas"], dtype=float),
            vols=np.asarray(vols, dtype=float),
            turnovers=None
            if raw.get("turnovers") is None
            else np.asarray(raw["turnovers"], dtype=float),
        )
        corr = cov.correlation()
    else:
        panel = load_panel(path)
        alpha, cov, corr = estimate_moments(panel)
    if force_dense and isinstance(cov, FactorCovariance):
        cov = DenseCovariance(cov.densify())
    if factor_count is not None:
        if isinstance(cov, FactorCovariance):
            cov = DenseCovariance(cov.densify())
        cov = build_factor_model(cov, factor_count)
    return alpha, cov, corr


def _load_costs(path, alpha):
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from None
    unknown = set(raw) - _COSTS_KEYS
    if unknown:
        raise ParseError(f"{path}: unknown cost keys: {sorted(unknown)}")
    if raw.get("turnovers") is not None:
        alpha = AlphaSet(
            alphas=alpha.alphas,
            vols=alpha.vols,
            turnovers=np.asarray(raw["turnovers"], dtype=float),
        )
    spec = costs_mod.CostSpec(
        linear_rate=float(raw.get("L", 0.0)),
        impact_coeff=float(raw.get("Q", 0.0)),
        impact_exponent=float(raw.get("n", 2.0)),
        investment=None if raw.get("I") is None else float(raw["I"]),
        rho_star=None if raw.get("rho_star") is None else float(raw["rho_star"]),
        per_stream_override=None
        if raw.get("per_stream") is None
        else np.asarray(raw["per_stream"], dtype=float),
    )
    return spec, alpha


def _parse_target(text: str):
    for key in ("pnl", "sharpe-min", "risk-max"):
        prefix = key + "="
        if text.startswith(prefix):
            try:
                return key, float(text[len(prefix):])
            except ValueError:
                raise click.UsageError(
                    f"target value is not a number: {text!r}"
                ) from None
    raise click.UsageError(
        f"target must be pnl=X, sharpe-min=X or risk-max=X, got {text!r}"
    )


# --- commands ----------------------------------------------------------------

@click.group()
def cli():
    """Optimal capital weights for alpha streams on one execution platform."""


@cli.command()
@click.argument("panel", type=click.Path(exists=True, dir_okay=False))
def estimate(panel):
    """Estimate moments from PANEL and report the maximum-Sharpe point."""
    data = load_panel(panel)
    alpha, cov, corr = estimate_moments(data)
    _, s_max, p_star = factor_mod.smax_solution(alpha, cov)
    out = {
        "schema": 1,
        "stream_ids": list(data.stream_ids),
        "alphas": [float(x) for x in alpha.alphas],
        "vols": [float(x) for x in alpha.vols],
        "covariance": [[float(x) for x in row] for row in cov.matrix],
        "correlation": [[float(x) for x in row] for row in corr],
        "s_max": s_max,
        "p_star": p_star,
    }
    click.echo(_emit_json(out))


@cli.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--target", required=True, help="pnl=X | sharpe-min=X | risk-max=X")
@click.option("--costs", "costs_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--factor", "factor_count", type=int, default=None,
              help="Build an F-factor model from the covariance.")
@click.option("--dense", "force_dense", is_flag=True, help="Force the dense solver.")
def optimize(input_path, target, costs_path, factor_count, force_dense):
    """Solve for optimal weights on INPUT_PATH (panel CSV or model JSON)."""
    if factor_count is not None and force_dense:
        raise click.UsageError("--factor and --dense are mutually exclusive")
    alpha, cov, corr = _load_model(input_path, factor_count, force_dense)
    kind, value = _parse_target(target)
    if costs_path is not None:
        spec, alpha = _load_costs(costs_path, alpha)
        if kind == "pnl":
            sol = costs_mod.cost_solve_at(alpha, cov, spec, value)
        else:
            sol = factor_mod.target_search(
                alpha,
                cov,
                sharpe_min=value if kind == "sharpe-min" else None,
                risk_max=value if kind == "risk-max" else None,
                costs=spec,
            )
    else:
        if kind == "pnl":
            sol = factor_mod.solve_fixed_pnl_any(alpha, cov, value)
        else:
            sol = factor_mod.target_search(
                alpha,
                cov,
                sharpe_min=value if kind == "sharpe-min" else None,
                risk_max=value if kind == "risk-max" else None,
            )
    click.echo(_emit_json(_solution_dict(sol)))


@cli.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--points", type=int, default=20, show_default=True)
@click.option("--factor", "factor_count", type=int, default=None)
@click.option("--dense", "force_dense", is_flag=True)
def frontier(input_path, points, factor_count, force_dense):
    """Sweep the P&L range and emit pnl,risk,sharpe as CSV."""
    if points < 2:
        raise click.UsageError("--points must be at least 2")
    alpha, cov, _ = _load_model(input_path, factor_count, force_dense)
    _, _, p_star = factor_mod.smax_solution(alpha, cov)
    p_max = float(np.max(np.abs(alpha.alphas)))
    hi = p_star + (p_max - p_star) * (1.0 - 1e-6)
    click.echo("pnl,risk,sharpe")
    for p in np.linspace(p_star, hi, points):
        sol = factor_mod.solve_fixed_pnl_any(alpha, cov, float(p))
        click.echo(
            f"{_fmt_float(sol.pnl)},{_fmt_float(sol.risk)},{_fmt_float(sol.sharpe)}"
        )


@cli.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--costs", "costs_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--imin", type=float, required=True)
@click.option("--imax", type=float, required=True)
@click.option("--factor", "factor_count", type=int, default=None)
def capacity(input_path, costs_path, imin, imax, factor_count):
    """Find the investment level maximizing optimized P&L under impact."""
    alpha, cov, corr = _load_model(input_path, factor_count, False)
    spec, alpha = _load_costs(costs_path, alpha)
    i_star, pnl_star = costs_mod.capacity_search(
        alpha, cov, spec, (imin, imax), correlation=corr
    )
    click.echo(_emit_json({"schema": 1, "i_star": i_star, "pnl_at_star": pnl_star}))


@cli.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--target", default=None, help="pnl=X (defaults to mid-range)")
@click.option("--costs", "costs_path", type=click.Path(exists=True, dir_okay=False))
def crosscheck(input_path, target, costs_path):
    """Compare the iterative solver against the exhaustive oracle (N <= 12)."""
    alpha, cov, corr = _load_model(input_path, None, False)
    if alpha.n > MAX_ORACLE_STREAMS:
        raise DimensionMismatch(
            f"crosscheck enumerates 3^N patterns and is capped at "
            f"N={MAX_ORACLE_STREAMS}, got {alpha.n}"
        )
    dense = cov if isinstance(cov, DenseCovariance) else DenseCovariance(cov.densify())
    li = None
    spec = None
    if costs_path is not None:
        spec, alpha = _load_costs(costs_path, alpha)
        rho, _ = costs_mod._resolve_rho(spec, cov, corr)
        li = spec.linear_costs(alpha, rho)
        spec = costs_mod.CostSpec(
            linear_rate=spec.linear_rate,
            impact_coeff=spec.impact_coeff,
            impact_exponent=spec.impact_exponent,
            investment=spec.investment,
            rho_star=rho,
            per_stream_override=spec.per_stream_override,
        )
    if target is None:
        if spec is not None:
            p_lo, p_hi = costs_mod.cost_solve_bounds(alpha, cov, spec)
        else:
            _, _, p_lo = factor_mod.smax_solution(alpha, cov)
            p_hi = float(np.max(np.abs(alpha.alphas)))
        value = 0.5 * (p_lo + p_hi)
    else:
        kind, value = _parse_target(target)
        if kind != "pnl":
            raise click.UsageError("crosscheck only accepts a pnl target")
    if spec is not None:
        sol = costs_mod.linear_cost_solve(alpha, cov, spec, value)
        ref = brute_force_min(alpha, dense, value, costs=li)
    else:
        sol = factor_mod.solve_fixed_pnl_any(alpha, cov, value)
        ref = brute_force_min(alpha, dense, value)
    gap = abs(sol.risk - ref.risk) / max(ref.risk, 1e-30)
    if gap <= 1e-8 and sol.certified_global:
        click.echo(
            f"MATCH pnl={_fmt_float(value)} risk={_fmt_float(sol.risk)} "
            f"relative_gap={gap:.3e}"
        )
    else:
        click.echo(
            f"MISMATCH pnl={_fmt_float(value)} solver_risk={_fmt_float(sol.risk)} "
            f"oracle_risk={_fmt_float(ref.risk)} relative_gap={gap:.3e} "
            f"certified={sol.certified_global}"
        )
        raise NonConvergence("solver disagrees with the exhaustive oracle")


@cli.command("synthetic")
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
def synthetic_cmd(input_path):
    """Emit the eigenportfolio basis of the covariance as a CSV table."""
    alpha, cov, _ = _load_model(input_path, None, True)
    basis = synthetic_portfolios(alpha, cov)
    n = alpha.n
    header = ["portfolio", "alpha", "variance", "degenerate"]
    header += [f"w_{i}" for i in range(n)]
    click.echo(",".join(header))
    for a in range(n):
        row = [
            str(a),
            _fmt_float(basis.synthetic_alphas[a]),
            _fmt_float(basis.synthetic_vars[a]),
            "1" if a in basis.degenerate_rows else "0",
        ]
        row += [_fmt_float(x) for x in basis.portfolio_weights[a]]
        click.echo(",".join(row))


def main(argv=None) -> int:
    """Entry point with the documented exit-code mapping."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _INFEASIBLE_ERRORS as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 4
    except NonConvergence as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except AlphaWeightsError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
