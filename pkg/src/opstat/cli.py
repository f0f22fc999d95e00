"""Command-line front-end: reproducible experiments with a manifest per run.

Exit status: 0 on success, 1 on validation errors (bad flags, malformed
files), 2 on numerical failures.
"""
from __future__ import annotations

import datetime as _dt
import json
import math
import platform
import sys
import time
from dataclasses import replace
from pathlib import Path

import click
import numpy as np
import scipy

from . import __version__, kernels
from .channels import (
    OptimizerConfig,
    additivity_experiment,
    completely_depolarizing_channel,
    depolarizing_channel,
    identity_channel,
    random_channel,
    read_channel,
    reports_to_csv,
)
from .codec import Disk, decode, encode, fidelity, object_from_json, run_codec, stopping_check, tessellate
from .errors import NumericalError, OpstatError, ValidationError
from .operators import (
    HermitianOperator,
    UnitaryOperator,
    cayley_transform,
    eig_hermitian,
    eig_unitary,
    equal_arcs,
    inverse_cayley,
    max_abs,
    random_hermitian,
    read_matrix,
    resolution_of_identity,
)
from .poisson import (
    PoissonConfig,
    poisson_semigroup,
    poisson_series,
    sample_poisson_path,
    sigma_additivity_test,
)
from .rng import check_seed, make_rng
from .sde import SDEConfig, convergence_study, euler_maruyama, gbm_exact
from .selftest import run_selftest

EXPERIMENTS = {
    "spectral": "spectral",
    "poisson": "poisson",
    "holevo": "holevo-additivity",
    "holevo-additivity": "holevo-additivity",
    "sde": "sde-convergence",
    "sde-convergence": "sde-convergence",
    "codec": "codec-study",
    "codec-study": "codec-study",
}

DEFAULTS = {
    "spectral": {"matrix": None, "unitary": False, "dim": 4, "partition": 8, "trials": 100,
                 "rate": 5.0, "horizon": 1.0, "report": None},
    "poisson": {"rate": 5.0, "horizon": 10.0, "paths": 1000, "dim": 4, "t": 1.0},
    "holevo-additivity": {"channels": "random", "dim": 2, "kraus": 2, "pairs": 20, "p": 0.5,
                          "restarts": 16, "max_iters": 500, "tolerance": 1e-5,
                          "channel_a": None, "channel_b": None},
    "sde-convergence": {"x0": 1.0, "drift": 1.0, "omega": 0.2, "t_end": 1.0,
                        "steps": "32,64,128,256,512", "paths": 1000},
    "codec-study": {"object": None, "intensities": "250,500,1000,2000", "seeds": 10,
                    "resolution": 1000, "rounds": 5, "ramp": 0.0},
}


def _load_config(path):
    if path is None:
        return {}
    p = Path(path)
    text = p.read_text()
    if p.suffix.lower() == ".toml":
        try:
            import tomllib  # type: ignore[import-not-found]
        except ModuleNotFoundError:
            import tomli as tomllib
        try:
            return tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ValidationError(f"{p}: invalid TOML ({exc})") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{p}:{exc.lineno}: invalid JSON ({exc.msg})") from exc


def _resolve(experiment, config_path, flags):
    """Merge defaults, config-file values and explicit flags (flags win)."""
    cfg = _load_config(config_path)
    if cfg.get("experiment") and EXPERIMENTS.get(cfg["experiment"]) != experiment:
        raise ValidationError(
            f"config names experiment {cfg['experiment']!r}, command runs {experiment!r}"
        )
    params = dict(DEFAULTS[experiment])
    file_params = cfg.get("parameters", {})
    unknown = set(file_params) - set(params)
    if unknown:
        raise ValidationError(f"unknown parameter(s) for {experiment}: {sorted(unknown)}")
    params.update(file_params)
    common = {"seed": cfg.get("seed", 0), "output_dir": cfg.get("output_dir", "out"),
              "threads": cfg.get("threads", 1)}
    for key in ("seed", "output_dir", "threads"):
        if flags.get(key) is not None:
            common[key] = flags[key]
    for key, value in flags.items():
        if key in params and value is not None:
            params[key] = value
    common["seed"] = check_seed(common["seed"])
    return {"experiment": experiment, **common, "parameters": params}


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


class Run:
    """Collects output files and writes the manifest."""

    def __init__(self, resolved):
        self.resolved = resolved
        self.out = Path(resolved["output_dir"])
        self.out.mkdir(parents=True, exist_ok=True)
        self.files = []
        self.started = time.perf_counter()
        self.stamp = _dt.datetime.now(_dt.timezone.utc).isoformat()

    def write(self, name, text):
        (self.out / name).write_text(text)
        self.files.append(name)

    def finish(self, summary=None):
        manifest = {
            "experiment": self.resolved["experiment"],
            "config": self.resolved,
            "versions": {
                "opstat": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "kernel_backend": kernels.BACKEND,
            },
            "outputs": sorted(self.files),
            "summary": summary or {},
            "timestamp": {
                "started_utc": self.stamp,
                "wall_time_s": time.perf_counter() - self.started,
            },
        }
        (self.out / "manifest.json").write_text(_dump(manifest))
        click.echo(f"wrote {len(self.files)} output(s) and manifest.json to {self.out}")


def _ints(text):
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise ValidationError(f"expected a comma-separated integer list, got {text!r}") from exc


def common_options(f):
    f = click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                     help="TOML or JSON experiment config.")(f)
    f = click.option("--threads", type=int, default=None, help="Worker cap.")(f)
    f = click.option("--out", "output_dir", type=click.Path(file_okay=False), default=None,
                     help="Output directory.")(f)
    f = click.option("--seed", type=int, default=None, help="Top-level 64-bit seed.")(f)
    return f


# -- experiments --------------------------------------------------------------


def run_spectral(resolved):
    p = resolved["parameters"]
    seed = resolved["seed"]
    run = Run(resolved)
    if p["matrix"]:
        m = read_matrix(p["matrix"])
        if p["unitary"]:
            u = UnitaryOperator(m)
            h = None
        else:
            h = HermitianOperator(m)
            u = cayley_transform(h)
    else:
        h = random_hermitian(int(p["dim"]), make_rng(seed, 0), scale=3.0)
        u = cayley_transform(h)
    partition = equal_arcs(int(p["partition"]))
    decomp = eig_unitary(u)
    projs = resolution_of_identity(u, partition, decomp)
    eye = np.eye(u.dim)
    report = {
        "dim": u.dim,
        "eigenphases": decomp.phases.tolist(),
        "completeness_defect": max_abs(sum(q.matrix for q in projs) - eye),
        "projectors": [
            {
                "arc": arc.to_list(),
                "rank": q.rank,
                "idempotence_defect": max_abs(q.matrix @ q.matrix - q.matrix),
                "selfadjoint_defect": max_abs(q.matrix - q.matrix.conj().T),
                "commutator_defect": max_abs(q.matrix @ u.matrix - u.matrix @ q.matrix),
            }
            for arc, q in zip(partition, projs)
        ],
    }
    if h is not None:
        report["eigenvalues"] = eig_hermitian(h).eigenvalues.tolist()
        report["cayley_roundtrip_defect"] = max_abs(inverse_cayley(u).matrix - h.matrix)
    cfg = PoissonConfig(float(p["rate"]), float(p["horizon"]), seed)
    add = sigma_additivity_test(u, partition, int(p["trials"]), cfg, resolved["threads"])
    run.write("spectral.json", _dump(report))
    run.write("sigma_additivity.json", _dump(add.to_dict()))
    if p["report"]:
        Path(p["report"]).write_text(add.to_json() + "\n")
    run.finish({"pass_fraction": add.pass_fraction, "max_defect": add.max_defect})
    return 0


def run_poisson(resolved):
    p = resolved["parameters"]
    seed = resolved["seed"]
    run = Run(resolved)
    cfg = PoissonConfig(float(p["rate"]), float(p["horizon"]), seed)
    counts = [sample_poisson_path(cfg, (i,)).count for i in range(int(p["paths"]))]
    first = sample_poisson_path(cfg)
    lines = ["path,count"] + [f"{i},{c}" for i, c in enumerate(counts)]
    run.write("counts.csv", "\n".join(lines) + "\n")
    run.write("path.csv", "t\n" + "".join(f"{t!r}\n" for t in first.jump_times.tolist()))
    u = UnitaryOperator(cayley_transform(random_hermitian(int(p["dim"]), make_rng(seed, 1), 3.0)).matrix)
    t = float(p["t"])
    closed = poisson_semigroup(u, cfg.rate, t)
    n_terms = max(40, int(cfg.rate * t * 3 + 40))
    summary = {
        "mean_count": math.fsum(counts) / len(counts),
        "var_count": float(np.var(counts, ddof=1)) if len(counts) > 1 else 0.0,
        "expected": cfg.rate * cfg.horizon,
        "semigroup_vs_series": max_abs(closed - poisson_series(u, cfg.rate, t, n_terms)),
        "semigroup_norm": float(np.linalg.norm(closed, 2)),
    }
    run.write("poisson.json", _dump(summary))
    run.finish(summary)
    return 0


def _channel_pair(p, seed, i):
    kind = p["channels"]
    dim = int(p["dim"])
    if kind == "random":
        a = random_channel(dim, int(p["kraus"]), seed, (i, 0))
        b = random_channel(dim, int(p["kraus"]), seed, (i, 1))
        return replace(a, name=f"rand[{i}a]"), replace(b, name=f"rand[{i}b]")
    if kind == "depolarizing":
        return depolarizing_channel(float(p["p"]), dim), depolarizing_channel(float(p["p"]), dim)
    if kind == "identity":
        return identity_channel(dim), identity_channel(dim)
    if kind == "completely-depolarizing":
        return identity_channel(dim), completely_depolarizing_channel(dim)
    if kind == "file":
        if not p["channel_a"] or not p["channel_b"]:
            raise ValidationError("--channels file needs --channel-a and --channel-b")
        return read_channel(p["channel_a"]), read_channel(p["channel_b"])
    raise ValidationError(f"unknown channel family {kind!r}")


def run_holevo(resolved):
    p = resolved["parameters"]
    seed = resolved["seed"]
    run = Run(resolved)
    opt = OptimizerConfig(restarts=int(p["restarts"]), max_iters=int(p["max_iters"]),
                          tolerance=float(p["tolerance"]), seed=seed, threads=resolved["threads"])
    pairs = int(p["pairs"]) if p["channels"] == "random" else 1
    reports = []
    for i in range(pairs):
        a, b = _channel_pair(p, seed, i)
        reports.append(additivity_experiment(a, b, opt, stream=(i,)))
    run.write("holevo_additivity.csv", reports_to_csv(reports))
    run.write("holevo_additivity.json", _dump([r.to_dict() for r in reports]))
    verdicts = [r.verdict for r in reports]
    summary = {
        "pairs": len(reports),
        "additive_fraction": verdicts.count("additive_within_tolerance") / len(reports),
        "floor_violations": sum(not r.floor_ok for r in reports),
        "max_abs_defect": max(abs(r.defect) for r in reports),
    }
    run.finish(summary)
    return 0


def run_sde(resolved):
    p = resolved["parameters"]
    run = Run(resolved)
    steps = _ints(p["steps"])
    base = SDEConfig(x0=float(p["x0"]), drift_coeff=float(p["drift"]), omega=float(p["omega"]),
                     t_end=float(p["t_end"]), n_steps=steps[0], seed=resolved["seed"])
    table = convergence_study(base, steps, int(p["paths"]))
    run.write("convergence.csv", table.to_csv())
    path = euler_maruyama(base)
    exact = gbm_exact(base, path)
    lines = ["t,x,x_exact"] + [f"{t!r},{x!r},{y!r}" for t, x, y in
                               zip(path.times.tolist(), path.values.tolist(), exact.values.tolist())]
    run.write("path.csv", "\n".join(lines) + "\n")
    summary = {"strong_order": table.strong_order, "weak_order": table.weak_order}
    run.write("sde.json", _dump(summary))
    run.finish(summary)
    return 0


def run_codec_study(resolved):
    p = resolved["parameters"]
    seed = resolved["seed"]
    run = Run(resolved)
    obj = Disk(0.5, 0.5, 0.25)
    if p["object"]:
        obj = object_from_json(json.loads(Path(p["object"]).read_text()))
    res = int(p["resolution"])
    rows = ["intensity,seed,iou"]
    means = {}
    for lam in _ints(p["intensities"]):
        vals = []
        for s in range(int(p["seeds"])):
            sub = seed + s
            hits = encode(obj, lam, sub)
            iou = fidelity(obj, decode(tessellate(hits), hits), res)
            vals.append(iou)
            rows.append(f"{lam},{sub},{iou!r}")
        means[str(lam)] = math.fsum(vals) / len(vals)
    run.write("codec_study.csv", "\n".join(rows) + "\n")
    lam = _ints(p["intensities"])[-1]
    hits = encode(obj, lam, seed)
    run.write("hits.csv", hits.to_csv())
    run.write("reconstruction.json", _dump(decode(tessellate(hits), hits).descriptor()))
    rounds = int(p["rounds"])
    summary = {"mean_iou": means}
    if rounds >= 2:
        crun = run_codec(obj, lam, rounds, seed, ramp=float(p["ramp"]), resolution=res)
        stop, report = stopping_check(crun)
        run.write("stopping.json", _dump(report.to_dict()))
        summary["stop"] = stop
    run.finish(summary)
    return 0


RUNNERS = {
    "spectral": run_spectral,
    "poisson": run_poisson,
    "holevo-additivity": run_holevo,
    "sde-convergence": run_sde,
    "codec-study": run_codec_study,
}


# -- click wiring ---------------------------------------------------------------


@click.group()
@click.version_option(__version__, prog_name="opstat")
def cli():
    """Operator statistics laboratory."""


@click.group(name="run", invoke_without_command=True)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.pass_context
def run_group(ctx, config_path):
    """Run an experiment (or the one named in --config)."""
    if ctx.invoked_subcommand is None:
        if config_path is None:
            raise click.UsageError("give an experiment subcommand or --config")
        cfg = _load_config(config_path)
        name = EXPERIMENTS.get(cfg.get("experiment", ""))
        if name is None:
            raise ValidationError(f"{config_path}: unknown or missing experiment {cfg.get('experiment')!r}")
        ctx.exit(RUNNERS[name](_resolve(name, config_path, {})))


def _command(name, runner, *options):
    def callback(**kwargs):
        config_path = kwargs.pop("config_path")
        return runner(_resolve(name, config_path, kwargs))

    cmd = callback
    for opt in reversed(options):
        cmd = opt(cmd)
    return click.command(name=name)(common_options(cmd))


spectral_cmd = _command(
    "spectral", run_spectral,
    click.option("--matrix", type=click.Path(exists=True, dir_okay=False), default=None,
                 help="Matrix JSON file (Hermitian unless --unitary)."),
    click.option("--unitary", is_flag=True, default=None),
    click.option("--dim", type=int, default=None),
    click.option("--partition", type=int, default=None, help="Number of equal arcs."),
    click.option("--trials", type=int, default=None),
    click.option("--rate", type=float, default=None),
    click.option("--horizon", type=float, default=None),
    click.option("--report", type=click.Path(dir_okay=False), default=None,
                 help="Extra path for the sigma-additivity report JSON."),
)
poisson_cmd = _command(
    "poisson", run_poisson,
    click.option("--rate", type=float, default=None),
    click.option("--horizon", type=float, default=None),
    click.option("--paths", type=int, default=None),
    click.option("--dim", type=int, default=None),
    click.option("--t", type=float, default=None),
)
holevo_cmd = _command(
    "holevo-additivity", run_holevo,
    click.option("--channels", type=str, default=None,
                 help="random | depolarizing | identity | completely-depolarizing | file"),
    click.option("--dim", type=int, default=None),
    click.option("--kraus", type=int, default=None),
    click.option("--pairs", type=int, default=None),
    click.option("--p", type=float, default=None),
    click.option("--restarts", type=int, default=None),
    click.option("--max-iters", type=int, default=None),
    click.option("--tolerance", type=float, default=None),
    click.option("--channel-a", type=click.Path(exists=True, dir_okay=False), default=None),
    click.option("--channel-b", type=click.Path(exists=True, dir_okay=False), default=None),
)
sde_cmd = _command(
    "sde-convergence", run_sde,
    click.option("--x0", type=float, default=None),
    click.option("--drift", type=float, default=None),
    click.option("--omega", type=float, default=None),
    click.option("--t-end", type=float, default=None),
    click.option("--steps", type=str, default=None, help="Comma-separated step counts."),
    click.option("--paths", type=int, default=None),
)
codec_cmd = _command(
    "codec-study", run_codec_study,
    click.option("--object", type=click.Path(exists=True, dir_okay=False), default=None),
    click.option("--intensities", type=str, default=None),
    click.option("--seeds", type=int, default=None),
    click.option("--resolution", type=int, default=None),
    click.option("--rounds", type=int, default=None),
    click.option("--ramp", type=float, default=None),
)


@click.command(name="selftest")
@click.option("--seed", type=int, default=0)
def selftest_cmd(seed):
    """Run the fast invariant suite and print a JSON report."""
    report = run_selftest(seed)
    click.echo(_dump(report), nl=False)
    for name, g in report["groups"].items():
        click.echo(f"{'PASS' if g['pass'] else 'FAIL'} {name}", err=True)
    return 0 if report["pass"] else 2


for _cmd, _aliases in ((spectral_cmd, ()), (poisson_cmd, ()), (holevo_cmd, ("holevo",)),
                       (sde_cmd, ("sde",)), (codec_cmd, ("codec",))):
    for _group in (cli, run_group):
        _group.add_command(_cmd)
        for _alias in _aliases:
            _group.add_command(_cmd, name=_alias)
cli.add_command(run_group)
cli.add_command(selftest_cmd)


def main(argv=None) -> int:
    try:
        rv = cli.main(args=argv, prog_name="opstat", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except ValidationError as exc:
        click.echo(f"validation error: {exc}", err=True)
        return 1
    except (NumericalError, OpstatError, np.linalg.LinAlgError, FloatingPointError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return 2
    return rv if isinstance(rv, int) else 0


if __name__ == "__main__":
    sys.exit(main())
