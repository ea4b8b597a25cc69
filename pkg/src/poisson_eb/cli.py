"""Command-line front end: fit, estimate, sweep, match, verify.

Every artifact written by a subcommand starts with a header recording the
library version and the fully resolved configuration, so a run can be
reproduced from its own output.  Exit codes: 0 success, 1 verification
failure, 2 invalid configuration or input, 3 numerical failure in strict
mode.
"""

from __future__ import annotations

import csv
import io
import json
import sys
from pathlib import Path

import click

from ._version import __version__
from .errors import InvalidInputError, NumericalFailureError, PoissonEBError
from .experiments import parse_plan, run_plan
from .moment_match import local_moment_match
from .npmle import fit_npmle, load_count_data
from .priors import parse_prior_spec, resolve
from .rules import CLI_KIND_NAMES, EstimatorConfig, fit_rule
from .verify import run_all

_EXIT_VERIFY_FAIL = 1
_EXIT_BAD_CONFIG = 2
_EXIT_NUMERICAL = 3


def _config_header(command: str, **params) -> list[str]:
    body = " ".join(f"{k}={v}" for k, v in sorted(params.items()))
    return [f"# poisson_eb {__version__}", f"# {command}: {body}"]


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    raise SystemExit(code)


@click.group()
@click.version_option(version=__version__, prog_name="peb")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Base seed for any randomized step.")
@click.option("--threads", type=int, default=1, show_default=True,
              help="Accepted for interface stability; execution is single-threaded.")
@click.option("--strict/--lenient", default=None,
              help="Fail (exit 3) on solver non-convergence instead of flagging it.")
@click.pass_context
def main(ctx: click.Context, seed: int, threads: int, strict: bool | None) -> None:
    """Poisson empirical-Bayes toolkit: NPMLE fits, Robbins-style rules, sweeps."""
    ctx.ensure_object(dict)
    ctx.obj.update(seed=seed, threads=threads, strict=strict)


@main.command("npmle-fit")
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", default=None, help="Output JSON path (default stdout).")
@click.option("--tol", default=1e-6, show_default=True, help="KKT certificate tolerance.")
@click.option("--max-iter", default=10_000, show_default=True)
@click.option("--density", default=4.0, show_default=True,
              help="Grid points per unit of sqrt(theta).")
@click.pass_context
def cmd_npmle_fit(ctx, input_path, out_path, tol, max_iter, density):
    """Fit the nonparametric MLE mixing distribution to count data.

    INPUT_PATH holds either newline-separated integer counts or a JSON
    histogram {"counts": {"0": 12, "1": 7, ...}}.  Single fits default to
    strict mode.
    """
    strict = ctx.obj["strict"] is not False  # default strict for single fits
    try:
        data = load_count_data(Path(input_path).read_text())
    except (PoissonEBError, ValueError, json.JSONDecodeError) as exc:
        _fail(_EXIT_BAD_CONFIG, f"could not parse counts: {exc}")
    try:
        fit = fit_npmle(data, density=density, tol=tol, max_iter=max_iter, strict=strict)
    except NumericalFailureError as exc:
        _fail(_EXIT_NUMERICAL, str(exc))
    except PoissonEBError as exc:
        _fail(_EXIT_BAD_CONFIG, str(exc))
    doc = {
        "meta": {
            "tool": f"poisson_eb {__version__}",
            "command": "npmle-fit",
            "config": {"input": str(input_path), "tol": tol, "max_iter": max_iter,
                       "density": density, "strict": strict},
        },
        "fit": fit.to_dict(),
    }
    _write_text(out_path, json.dumps(doc, indent=2) + "\n")


@main.command("eb-estimate")
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--method", type=click.Choice(sorted(CLI_KIND_NAMES)), default="npmle",
              show_default=True)
@click.option("--y0", default=None, type=int,
              help="Truncation level: identity rule beyond this y.")
@click.option("--rho", default=1e-6, show_default=True,
              help="Density floor for the regularized mixture rule.")
@click.option("--y-cap", default=None, type=int,
              help="Largest y in the output table (default: max observed + 5).")
@click.option("--tol", default=1e-6, show_default=True)
@click.option("--out", "out_path", default=None, help="Output CSV path (default stdout).")
@click.pass_context
def cmd_eb_estimate(ctx, input_path, method, y0, rho, y_cap, tol, out_path):
    """Tabulate an empirical-Bayes estimate of theta for each count y."""
    strict = ctx.obj["strict"] is not False
    try:
        data = load_count_data(Path(input_path).read_text())
        kind = CLI_KIND_NAMES[method]
        if kind == "oracle":
            raise InvalidInputError("the oracle rule needs a known prior; use the library API")
        cfg_kwargs = {"kind": kind, "rho": rho, "npmle_tol": tol}
        if y0 is not None:
            cfg_kwargs["y0"] = y0
        elif kind == "robbins_trunc":
            raise InvalidInputError("--y0 is required for method robbins-trunc")
        config = EstimatorConfig(**cfg_kwargs)
    except (PoissonEBError, ValueError, json.JSONDecodeError) as exc:
        _fail(_EXIT_BAD_CONFIG, str(exc))
    cap = y_cap if y_cap is not None else data.y_max + 5
    try:
        if kind == "npmle_eb":
            fit = fit_npmle(data, tol=tol, strict=strict)
            rule = fit_rule(config, cap, fit=fit)
        else:
            rule = fit_rule(config, cap, train=data)
    except NumericalFailureError as exc:
        _fail(_EXIT_NUMERICAL, str(exc))
    buf = io.StringIO()
    for line in _config_header("eb-estimate", input=input_path, method=method,
                               y0=y0, rho=rho, y_cap=cap, tol=tol, strict=strict):
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["y", "estimate"])
    for y in range(cap + 1):
        w.writerow([y, repr(float(rule.table[y]))])
    _write_text(out_path, buf.getvalue())


def _run_plan_command(ctx, plan_path, out_rows, out_slopes, forced_metrics=None):
    from dataclasses import replace

    try:
        plan = parse_plan(Path(plan_path).read_text())
        if ctx.obj["seed"]:
            plan = replace(plan, seed=ctx.obj["seed"])
        if forced_metrics is not None:
            plan = replace(plan, metrics=forced_metrics)
    except (PoissonEBError, ValueError) as exc:
        _fail(_EXIT_BAD_CONFIG, f"bad plan: {exc}")
    report = run_plan(plan)
    _write_text(out_rows, report.rows_csv())
    if out_slopes is not None:
        _write_text(out_slopes, report.slopes_csv())
    n_failed = sum(1 for r in report.rows if r.flags.startswith("failed:"))
    if n_failed and ctx.obj["strict"]:
        _fail(_EXIT_NUMERICAL, f"{n_failed} trial(s) failed")


@main.command("regret-sweep")
@click.argument("plan_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_rows", default=None, help="Row CSV path (default stdout).")
@click.option("--out-slopes", default=None, help="Optional slope-summary CSV path.")
@click.pass_context
def cmd_regret_sweep(ctx, plan_path, out_rows, out_slopes):
    """Run a regret experiment plan and write its report CSVs."""
    _run_plan_command(ctx, plan_path, out_rows, out_slopes)


@main.command("density-risk")
@click.argument("plan_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_rows", default=None, help="Row CSV path (default stdout).")
@click.option("--out-slopes", default=None, help="Optional slope-summary CSV path.")
@click.pass_context
def cmd_density_risk(ctx, plan_path, out_rows, out_slopes):
    """Run a plan with the metric forced to squared-Hellinger density risk."""
    _run_plan_command(ctx, plan_path, out_rows, out_slopes,
                      forced_metrics=("hellinger_sq",))


@main.command("moment-match")
@click.option("--source", required=True,
              help='Prior spec, e.g. "family=heavy_tail p=2" or "family=discrete atoms=1,5 weights=0.5,0.5".')
@click.option("--m", "big_m", type=float, required=True, help="Window-scale parameter M.")
@click.option("--eta", type=float, required=True, help="Target sup-norm pmf accuracy.")
@click.option("--c", "c_const", type=float, default=1.0, show_default=True,
              help="Partition width constant.")
@click.option("--p", type=float, default=None, help="Moment index for resolving the source.")
@click.option("--out", "out_path", default=None, help="Output JSON path (default stdout).")
@click.pass_context
def cmd_moment_match(ctx, source, big_m, eta, c_const, p, out_path):
    """Compress a prior to few atoms while matching local moments."""
    try:
        spec = parse_prior_spec(source)
        resolved = resolve(spec, p=p, seed=ctx.obj["seed"])
        report = local_moment_match(resolved.discretization, big_m, eta, C=c_const)
    except NumericalFailureError as exc:
        _fail(_EXIT_NUMERICAL, str(exc))
    except (PoissonEBError, ValueError) as exc:
        _fail(_EXIT_BAD_CONFIG, str(exc))
    doc = {
        "meta": {
            "tool": f"poisson_eb {__version__}",
            "command": "moment-match",
            "config": {"source": source, "M": big_m, "eta": eta, "C": c_const, "p": p},
        },
        "report": report.to_dict(),
    }
    _write_text(out_path, json.dumps(doc, indent=2) + "\n")


@main.command("verify")
@click.pass_context
def cmd_verify(ctx):
    """Run the identity/bound/certificate self-checks; exit 1 on any failure."""
    results = run_all()
    for res in results:
        click.echo(str(res))
    failed = [r for r in results if not r.passed]
    click.echo(f"{len(results) - len(failed)}/{len(results)} checks passed")
    if failed:
        raise SystemExit(_EXIT_VERIFY_FAIL)


if __name__ == "__main__":
    main()
