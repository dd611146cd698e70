"""Command-line client for the re-phasing service.

Each subcommand builds the same request the HTTP API takes and either
dispatches it in-process (default) or posts it to a running service
(`--server URL`).  Result files land in `--out`.

Exit codes: 0 success, 1 usage error, 2 data error, 3 solver failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import httpx

from .loadflow import LoadFlowError
from .netmodel import NetworkFormatError, NetworkInvariantError
from .service import schemas
from .service.app import (
    create_app,
    handle_benchmark,
    handle_capacity,
    handle_loadflow,
    handle_run,
    handle_sweep,
    handle_validate,
)

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_SOLVER = 3

_LOCAL_HANDLERS = {
    "/api/validate": handle_validate,
    "/api/loadflow": handle_loadflow,
    "/api/run": handle_run,
    "/api/sweep": handle_sweep,
    "/api/capacity-study": handle_capacity,
    "/api/benchmark": handle_benchmark,
}


class CliDataError(click.ClickException):
    exit_code = EXIT_DATA


class CliSolverError(click.ClickException):
    exit_code = EXIT_SOLVER


def _dispatch(path: str, request, server: str | None) -> dict:
    """Run a request in-process or against a remote service."""
    if server is None:
        handler = _LOCAL_HANDLERS[path]
        try:
            return handler(request).model_dump()
        except (NetworkFormatError, NetworkInvariantError, ValueError) as exc:
            raise CliDataError(str(exc)) from exc
        except LoadFlowError as exc:
            raise CliSolverError(str(exc)) from exc
    with httpx.Client(base_url=server, timeout=None) as client:
        resp = client.post(path, json=request.model_dump())
        if resp.status_code >= 400:
            try:
                body = resp.json()
            except ValueError:
                body = {"detail": resp.text, "code": "data_error"}
            detail = body.get("detail", resp.text)
            if body.get("code") == "solver_error":
                raise CliSolverError(str(detail))
            raise CliDataError(str(detail))
        return resp.json()


def _write_files(out: str, files: dict[str, str]) -> None:
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, content in files.items():
        (out_dir / name).write_text(content, encoding="utf-8")


def _read(path: str | None) -> str | None:
    if path is None:
        return None
    p = Path(path)
    if not p.exists():
        raise CliDataError(f"file not found: {path}")
    return p.read_text(encoding="utf-8")


def common_options(fn):
    for opt in reversed(
        [
            click.option("--network", type=str, default=None, help="Network file (default: bundled feeder)."),
            click.option("--profiles", type=str, default=None, help="Hourly profiles CSV (default: bundled)."),
            click.option("--seed", type=int, default=0, show_default=True),
            click.option("--out", type=str, default="out", show_default=True, help="Output directory."),
            click.option("--server", type=str, default=None, help="Service URL; omit to run in-process."),
            click.option("--k1", type=float, default=10.0, show_default=True, help="Unbalance penalty weight."),
            click.option("--k2", type=float, default=100.0, show_default=True, help="Voltage penalty weight."),
            click.option("--vuf-max", type=float, default=1.0, show_default=True),
            click.option("--vmin", type=float, default=0.94, show_default=True),
            click.option("--vmax", type=float, default=1.06, show_default=True),
            click.option("--s", type=int, default=10, show_default=True, help="Population size."),
            click.option("--nc", type=int, default=5, show_default=True, help="Chemotaxis steps per cycle."),
            click.option("--nr", type=int, default=5, show_default=True, help="Re-phasing tries per step."),
            click.option("--nre", type=int, default=5, show_default=True, help="Reproduction cycles."),
            click.option("--ned", type=int, default=5, show_default=True, help="Dispersal events."),
            click.option("--ped", type=float, default=0.2, show_default=True, help="Dispersal probability."),
            click.option("--kn", type=int, default=3, show_default=True, help="Unbalance region radius (hops)."),
            click.option("--budget", type=int, default=None, help="Evaluation budget cap."),
            click.option("--init", type=click.Choice(["power-balance", "random"]), default="power-balance", show_default=True),
            click.option("--timing", is_flag=True, help="Write measured wall times into trace files (breaks byte-reproducibility)."),
        ]
    ):
        fn = opt(fn)
    return fn


def _base_kwargs(kw) -> dict:
    return dict(
        network=_read(kw["network"]),
        profiles=_read(kw["profiles"]),
        seed=kw["seed"],
        limits=schemas.LimitsModel(
            vuf_max=kw["vuf_max"], v_min=kw["vmin"], v_max=kw["vmax"], k1=kw["k1"], k2=kw["k2"]
        ),
        dbfoa=schemas.DbfoaModel(
            s=kw["s"], nc=kw["nc"], nr=kw["nr"], nre=kw["nre"], ned=kw["ned"],
            ped=kw["ped"], kn=kw["kn"],
        ),
        budget=kw["budget"],
        init=kw["init"],
        include_timing=kw["timing"],
    )


@click.group()
def cli():
    """Optimize the phase assignment of rooftop PV units on an LV feeder."""


@cli.command()
@common_options
@click.option("--hour", type=click.IntRange(0, 23), default=12, show_default=True)
@click.option("--algo", type=click.Choice(["dbfoa", "dga", "sfla", "hs"]), default="dbfoa", show_default=True)
def run(**kw):
    """Optimize a single hour and write the fixed-vs-optimized report."""
    req = schemas.RunRequest(hour=kw["hour"], algorithm=kw["algo"], **_base_kwargs(kw))
    resp = _dispatch("/api/run", req, kw["server"])
    _write_files(kw["out"], resp["files"])
    s = resp["summary"]
    click.echo(
        f"hour {s['hour']}: fixed total {s['fixed_total']:.4f} -> "
        f"optimized {s['optimized_total']:.4f} ({s['evaluations']} evaluations)"
    )
    click.echo(f"assignment: {s['assignment']}")
    click.echo(f"wrote {len(resp['files'])} files to {kw['out']}")


@cli.command()
@common_options
@click.option("--hours", type=str, default=None, help="Comma-separated hours (default 0-23).")
@click.option("--algo", type=click.Choice(["dbfoa", "dga", "sfla", "hs"]), default="dbfoa", show_default=True)
def sweep(**kw):
    """Optimize every requested hour of the day."""
    hours = None
    if kw["hours"] is not None:
        try:
            hours = [int(h) for h in kw["hours"].split(",") if h.strip() != ""]
        except ValueError:
            raise click.UsageError("--hours must be a comma-separated list of integers")
    req = schemas.SweepRequest(hours=hours, algorithm=kw["algo"], **_base_kwargs(kw))
    resp = _dispatch("/api/sweep", req, kw["server"])
    _write_files(kw["out"], resp["files"])
    for row in resp["summary"]["per_hour"]:
        click.echo(
            f"hour {row['hour']:2d}: mean VUF fixed {row['fixed_mean_vuf']:.4f}% "
            f"-> optimized {row['optimized_mean_vuf']:.4f}%"
        )
    click.echo(f"wrote {len(resp['files'])} files to {kw['out']}")


@cli.command("capacity-study")
@common_options
@click.option("--step-kw", type=float, default=5.4, show_default=True)
@click.option("--steps", type=int, default=10, show_default=True)
@click.option("--mc-runs", type=int, default=20, show_default=True)
def capacity_study(**kw):
    """Monte Carlo hosting-capacity study with and without re-phasing."""
    req = schemas.CapacityRequest(
        step_kw=kw["step_kw"], steps=kw["steps"], mc_runs=kw["mc_runs"], **_base_kwargs(kw)
    )
    resp = _dispatch("/api/capacity-study", req, kw["server"])
    _write_files(kw["out"], resp["files"])
    s = resp["summary"]
    click.echo(
        f"base {s['base_capacity_kw']:.1f} kW; usable capacity: "
        f"fixed {s['usable_capacity_fixed_kw']} kW, rephased {s['usable_capacity_rephased_kw']} kW"
    )
    click.echo(f"wrote {len(resp['files'])} files to {kw['out']}")


@cli.command()
@common_options
@click.option("--hour", type=click.IntRange(0, 23), default=12, show_default=True)
@click.option("--algos", type=str, default="dbfoa,dga,sfla,hs", show_default=True,
              help="Comma-separated algorithm list.")
@click.option("--seeds", type=int, default=5, show_default=True, help="Number of seeds.")
@click.option("--bench-budget", type=int, default=2000, show_default=True,
              help="Evaluation budget per run.")
@click.option("--ablations", is_flag=True,
              help="Also run classic-chemotaxis and random-init variants.")
@click.option("--classic-count", type=int, default=None,
              help="PVs mutated per try in the classic ablation (default: match the region).")
def benchmark(**kw):
    """Equal-budget optimizer comparison from shared initial populations."""
    algos = [a.strip() for a in kw["algos"].split(",") if a.strip()]
    base = _base_kwargs(kw)
    base.pop("budget")  # the per-run equal budget below takes its place
    base["dbfoa"].classic_count = kw["classic_count"]
    req = schemas.BenchmarkRequest(
        hour=kw["hour"], algorithms=algos, n_seeds=kw["seeds"],
        budget=kw["bench_budget"], ablations=kw["ablations"], **base,
    )
    resp = _dispatch("/api/benchmark", req, kw["server"])
    _write_files(kw["out"], resp["files"])
    for algo, med in resp["summary"]["median_final_cost"].items():
        click.echo(f"{algo:>15s}: median final cost {med:.4f}")
    click.echo(f"wrote {len(resp['files'])} files to {kw['out']}")


@cli.command()
@click.option("--network", type=str, default=None, help="Network file (default: bundled feeder).")
@click.option("--profiles", type=str, default=None, help="Hourly profiles CSV.")
@click.option("--server", type=str, default=None, help="Service URL; omit to run in-process.")
def validate(network, profiles, server):
    """Lint a dataset and print its key figures."""
    req = schemas.ValidateRequest(network=_read(network), profiles=_read(profiles))
    resp = _dispatch("/api/validate", req, server)
    click.echo(json.dumps(resp["summary"], indent=2, sort_keys=True))


@cli.command()
@click.option("--host", type=str, default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run(create_app(), host=host, port=port)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except CliDataError as exc:
        click.echo(f"error: {exc.message}", err=True)
        return EXIT_DATA
    except CliSolverError as exc:
        click.echo(f"error: {exc.message}", err=True)
        return EXIT_SOLVER
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return EXIT_USAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())
