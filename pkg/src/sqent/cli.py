"""Command-line entry point: ``sqent measure | bound | experiment``.

JSON goes to stdout, CSV tables to files. Exit codes: 2 parse/usage
error, 3 invariant violation, 4 optimizer did not converge (the value is
still printed, with ``"warning": "not-converged"``), 5 I/O failure.

A config file (``--config``, JSON) may supply any option under the
command's name, e.g. ``{"measure": {"restarts": 32, "seed": 7}}``;
flags given on the command line win.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from pathlib import Path

import click
import numpy as np

from . import energy, entropic, formation, models, squashed
from .state import LayoutError, StateError, StateFormatError, state_from_json
from .stiefel import OptimizerConfig

EXIT_PARSE, EXIT_INVARIANT, EXIT_NOT_CONVERGED, EXIT_IO = 2, 3, 4, 5


class CliFailure(click.ClickException):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.exit_code = code


def clean(x):
    """Make a value JSON-safe: inf becomes the string "inf", NaN is an error."""
    if isinstance(x, dict):
        return {k: clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isnan(x):
            raise CliFailure("computation produced NaN", EXIT_INVARIANT)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, np.integer):
        return int(x)
    return x


def emit(payload: dict):
    click.echo(json.dumps(clean(payload), indent=2, sort_keys=True))


def write_csv(path: Path, rows: list[dict]):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            if not rows:
                return
            w = csv.DictWriter(fh, fieldnames=list(rows[0].keys()), lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: ("" if v is None else clean(v)) for k, v in r.items()})
    except OSError as exc:
        raise CliFailure(f"cannot write {path}: {exc}", EXIT_IO) from exc


def apply_config(ctx: click.Context, section: str):
    """Fill parameters that were not set on the command line from the config file."""
    path = ctx.params.get("config")
    if not path:
        return
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliFailure(f"cannot read config {path}: {exc}", EXIT_PARSE) from exc
    values = cfg.get(section, {})
    if not isinstance(values, dict):
        raise CliFailure(f"config section {section!r} must be an object", EXIT_PARSE)
    for key, val in values.items():
        name = key.replace("-", "_")
        if name not in ctx.params:
            raise CliFailure(f"config field {section}.{key}: unknown option", EXIT_PARSE)
        src = ctx.get_parameter_source(name)
        if src in (click.core.ParameterSource.DEFAULT, None):
            param = next(p for p in ctx.command.params if p.name == name)
            try:
                ctx.params[name] = param.type_cast_value(ctx, val)
            except click.BadParameter as exc:
                raise CliFailure(f"config field {section}.{key}: {exc.message}", EXIT_PARSE) from exc


def threads_default() -> int:
    raw = os.environ.get("SQENT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise CliFailure(f"SQENT_THREADS={raw!r} is not an integer", EXIT_PARSE) from None


def optimizer_config(restarts, max_iterations, seed, threads) -> OptimizerConfig:
    try:
        return OptimizerConfig(restarts=restarts, max_iterations=max_iterations, seed=seed,
                               threads=threads or threads_default())
    except ValueError as exc:
        raise CliFailure(f"invalid optimizer config: {exc}", EXIT_PARSE) from exc


optimizer_options = [
    click.option("--restarts", type=int, default=8, show_default=True),
    click.option("--max-iterations", type=int, default=2000, show_default=True),
    click.option("--seed", type=int, default=0, show_default=True),
    click.option("--threads", type=int, default=None, help="Worker threads (fallback: SQENT_THREADS)."),
    click.option("--config", type=click.Path(dir_okay=False), default=None, help="JSON config file."),
]


def with_options(options):
    def deco(f):
        for opt in reversed(options):
            f = opt(f)
        return f
    return deco


@click.group()
def main():
    """Squashed entanglement, entanglement of formation and continuity bounds."""


@main.command()
@click.argument("state_file", type=click.Path(dir_okay=False))
@click.option("--measure", "measure",
              type=click.Choice(["entropy", "mi", "cmi", "esq", "eof", "sandwich"]), required=True)
@click.option("--n", "n", type=int, default=2, show_default=True, help="Extension dimension for esq.")
@click.option("--m", "m", type=int, default=None, help="Ensemble size for eof (default rank^2, max 16).")
@click.option("--parts", default=None, help="CMI parts as 'A;B;E' with comma-separated labels.")
@click.option("--bits", is_flag=True, help="Report values in bits (display only).")
@click.option("--timing", is_flag=True, help="Include wall time (breaks byte-identical output).")
@click.option("--trace-csv", type=click.Path(dir_okay=False), default=None,
              help="Write the per-iteration optimizer trace (esq) to this CSV.")
@click.option("--decomposition-out", type=click.Path(dir_okay=False), default=None,
              help="Write the best pure-state decomposition (eof) as JSON.")
@with_options(optimizer_options)
@click.pass_context
def measure(ctx, **_):
    """Evaluate an entropic quantity or entanglement measure of a state file."""
    apply_config(ctx, "measure")
    p = ctx.params
    path = p["state_file"]
    try:
        raw = Path(path).read_text()
    except OSError as exc:
        raise CliFailure(f"cannot read {path}: {exc}", EXIT_IO) from exc
    try:
        omega = state_from_json(json.loads(raw))
    except (json.JSONDecodeError, StateFormatError) as exc:
        raise CliFailure(f"{path}: {exc}", EXIT_PARSE) from exc
    except (StateError, LayoutError) as exc:
        raise CliFailure(f"{path}: {exc}", EXIT_INVARIANT) from exc
    cfg = optimizer_config(p["restarts"], p["max_iterations"], p["seed"], p["threads"])
    scale = 1 / math.log(2) if p["bits"] else 1.0
    out: dict = {"measure": p["measure"], "units": "bits" if p["bits"] else "nats", "seed": cfg.seed}
    converged = True
    t0 = time.perf_counter()
    try:
        kind = p["measure"]
        if kind == "entropy":
            out["value"] = entropic.entropy(omega) * scale
        elif kind == "mi":
            a, b = _two_parts(omega)
            out["value"] = entropic.mutual_information(omega, a, b) * scale
        elif kind == "cmi":
            a, b, e = _three_parts(omega, p["parts"])
            out["value"] = entropic.cmi(omega, a, b, e) * scale
        elif kind == "esq":
            steps: list[dict] = []
            sink = (lambda k, it, v: steps.append({"restart": k, "iteration": it, "value": v})) \
                if p["trace_csv"] else None
            val, cert = squashed.esq_upper(omega, p["n"], cfg, sink)
            if p["trace_csv"]:
                steps.sort(key=lambda r: (r["restart"], r["iteration"]))
                write_csv(Path(p["trace_csv"]), steps)
            converged = cert.converged
            out.update(value=val * scale, n=p["n"], lower=squashed.esq_lower(omega) * scale,
                       certificate={"provenance": cert.provenance, "cmi": cert.cmi_value * scale,
                                    "extension_dims": list(cert.extension.layout.dims)})
        elif kind == "eof":
            val, dec = formation.eof_upper(omega, p["m"], cfg)
            converged = dec.converged
            out.update(value=val * scale, ensemble_size=len(dec.members))
            if p["decomposition_out"]:
                try:
                    Path(p["decomposition_out"]).write_text(
                        json.dumps({"layout": [list(s) for s in dec.members[0].layout.subsystems],
                                    "members": dec.to_json()}) + "\n")
                except OSError as exc:
                    raise CliFailure(f"cannot write decomposition: {exc}", EXIT_IO) from exc
        else:
            rec = squashed.bounds_sandwich(omega, p["n"], cfg, p["m"])
            out.update({k: v * scale for k, v in rec.items()})
    except (StateError, LayoutError, entropic.EntropicInconsistency) as exc:
        raise CliFailure(str(exc), EXIT_INVARIANT) from exc
    if p["timing"]:
        out["wall_time_s"] = time.perf_counter() - t0
    if not converged:
        out["warning"] = "not-converged"
    emit(out)
    if not converged:
        ctx.exit(EXIT_NOT_CONVERGED)


def _two_parts(omega):
    if len(omega.labels) != 2:
        raise CliFailure("mi needs a bipartite state", EXIT_INVARIANT)
    return omega.labels


def _three_parts(omega, parts):
    if parts is None:
        if len(omega.labels) != 3:
            raise CliFailure("cmi needs --parts unless the state has exactly three labels", EXIT_PARSE)
        return tuple(omega.labels)
    groups = parts.split(";")
    if len(groups) != 3:
        raise CliFailure("--parts must look like 'A;B;E'", EXIT_PARSE)
    return tuple([g for g in grp.split(",") if g] for grp in groups)


def _spectrum(name: str, levels: str | None, dim: int | None) -> energy.HamiltonianSpectrum:
    if name == "oscillator":
        return energy.HamiltonianSpectrum.oscillator(dim, tail=False) if dim else \
            energy.HamiltonianSpectrum.oscillator(1, tail=True)
    if not levels:
        raise CliFailure("--spectrum levels needs --levels", EXIT_PARSE)
    try:
        return energy.HamiltonianSpectrum([float(x) for x in levels.split(",")])
    except ValueError as exc:
        raise CliFailure(f"invalid --levels: {exc}", EXIT_PARSE) from exc


def _floats(text: str | None) -> list[float]:
    if not text:
        return []
    try:
        return [float(x) for x in text.split(",")]
    except ValueError as exc:
        raise CliFailure(f"invalid number list {text!r}", EXIT_PARSE) from exc


@main.command()
@click.option("--bound", "bound", type=click.Choice(["cmi", "em", "finite-dim", "fannes"]), required=True)
@click.option("--spectrum", type=click.Choice(["oscillator", "levels"]), default="oscillator", show_default=True)
@click.option("--levels", default=None, help="Comma-separated energy levels for --spectrum levels.")
@click.option("--dim", type=int, default=None, help="Truncate the oscillator to this many levels.")
@click.option("--E", "E", type=float, default=1.0, show_default=True)
@click.option("--half-trace-eps", type=float, default=None, help="eps = (1/2)||rho - sigma||_1 (cmi, finite-dim).")
@click.option("--trace-eps", type=float, default=None, help="eps = ||rho - sigma||_1 (em, finite-dim).")
@click.option("--eps-prime", type=float, default=None,
              help="Free parameter eps' (cmi, em: minimized over a grid if omitted; required for fannes).")
@click.option("--dA", "d_a", type=int, default=2, show_default=True)
@click.option("--d", "d", type=int, default=2, show_default=True, help="Rank for the fannes bound.")
@click.option("--sweep-eps", default=None, help="Comma-separated eps grid; writes one CSV row per value.")
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None)
@click.option("--config", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def bound(ctx, **_):
    """Evaluate an itemized continuity bound."""
    apply_config(ctx, "bound")
    p = ctx.params
    kind = p["bound"]
    spec = _spectrum(p["spectrum"], p["levels"], p["dim"])

    def one(eps: float) -> dict:
        eps_prime = p["eps_prime"]
        if kind in ("cmi", "em"):
            fn = energy.cmi_continuity_bound if kind == "cmi" else energy.em_continuity_bound
            # without --eps-prime the bound is minimized over the admissible eps'
            rep = energy.optimized_bound(kind, spec, p["E"], eps) if eps_prime is None else \
                fn(spec, p["E"], eps, eps_prime)
            return rep.to_dict()
        if kind == "finite-dim":
            return {"bound": kind, "eps": eps, "dA": p["d_a"], "total": energy.finite_dim_esq_bound(p["d_a"], eps)}
        if eps_prime is None:
            raise CliFailure("fannes bound needs --eps-prime", EXIT_PARSE)
        return {"bound": kind, "d": p["d"], "eps_prime": eps_prime,
                "total": energy.fannes_cmi_bound(p["d"], eps_prime)}

    if kind == "cmi":
        eps_given = p["half_trace_eps"]
        if p["trace_eps"] is not None:
            raise CliFailure("the cmi bound takes --half-trace-eps (eps = (1/2)||.||_1)", EXIT_PARSE)
    elif kind == "em":
        eps_given = p["trace_eps"]
        if p["half_trace_eps"] is not None:
            raise CliFailure("the em bound takes --trace-eps (eps = ||.||_1)", EXIT_PARSE)
    elif kind == "finite-dim":
        # the finite-dimensional bound is stated for the full trace norm
        if p["half_trace_eps"] is not None and p["trace_eps"] is not None:
            raise CliFailure("give only one of --half-trace-eps / --trace-eps", EXIT_PARSE)
        eps_given = p["trace_eps"] if p["trace_eps"] is not None else (
            None if p["half_trace_eps"] is None else 2 * p["half_trace_eps"])
    else:
        eps_given = 0.0
    grid = _floats(p["sweep_eps"])
    try:
        if grid:
            rows = [_flatten(one(e)) for e in grid]
            if p["csv_path"]:
                write_csv(Path(p["csv_path"]), rows)
            emit({"bound": kind, "rows": rows})
            return
        if eps_given is None:
            raise CliFailure("missing eps flag for this bound", EXIT_PARSE)
        emit(one(eps_given))
    except energy.UnattainableEnergy as exc:
        raise CliFailure(str(exc), EXIT_INVARIANT) from exc
    except ValueError as exc:
        raise CliFailure(str(exc), EXIT_PARSE) from exc


def _flatten(rep: dict) -> dict:
    row = {k: v for k, v in rep.items() if k != "terms"}
    for name, v in rep.get("terms", {}).items():
        row[f"term_{name}"] = v
    return row


@main.command()
@click.option("--run", "run", type=click.Choice(["convergence", "dichotomy", "tightness"]), required=True)
@click.option("--family", type=click.Choice(list(models.FAMILIES)), default="tmsv", show_default=True)
@click.option("--param", type=float, default=None, help="Family parameter (lambda, p or tail exponent).")
@click.option("--d", "d", type=int, default=8, show_default=True, help="Truncation dimension.")
@click.option("--ladder", default=None, help="Comma-separated ladder ranks (default: powers of two up to d).")
@click.option("--n", "n", type=int, default=2, show_default=True)
@click.option("--n-list", default=None, help="Extension dimensions for the dichotomy probe.")
@click.option("--E", "E", type=float, default=1.0, show_default=True)
@click.option("--eps", type=float, default=0.1, show_default=True, help="Half trace distance of the witness.")
@click.option("--dim", type=int, default=25, show_default=True, help="Oscillator truncation for tightness.")
@click.option("--out", "out", type=click.Path(file_okay=False), required=True)
@with_options(optimizer_options)
@click.pass_context
def experiment(ctx, **_):
    """Run a truncation or tightness experiment; writes CSV plus a manifest."""
    apply_config(ctx, "experiment")
    p = ctx.params
    cfg = optimizer_config(p["restarts"], p["max_iterations"], p["seed"], p["threads"])
    out_dir = Path(p["out"])
    run = p["run"]
    try:
        if run == "convergence":
            spec = models.ModelStateSpec(p["family"], p["param"], p["d"])
            ladder = [int(x) for x in _floats(p["ladder"])] or _powers(spec.truncation_dim)
            rows = models.convergence_run(spec, ladder, p["n"], cfg)
            summary = {"spec": spec.to_dict(), "ladder": ladder}
        elif run == "dichotomy":
            n_list = [int(x) for x in _floats(p["n_list"])] or [2, p["d"]]
            rows = models.dichotomy_probe(p["d"], n_list, 2.0 if p["param"] is None else p["param"])
            summary = {"d": p["d"], "n_list": n_list}
        else:
            spectrum = energy.HamiltonianSpectrum.oscillator(p["dim"])
            w = energy.tightness_witness(spectrum, p["E"], p["eps"])
            rows = [{"E": p["E"], "eps": p["eps"], "dim": p["dim"], "gap": w.gap,
                     "expected_gap": w.expected_gap, "half_trace_distance": w.half_trace_distance,
                     "gibbs_entropy": energy.gibbs_entropy(spectrum, p["E"])}]
            summary = rows[0]
    except (StateError, LayoutError, entropic.EntropicInconsistency, ArithmeticError) as exc:
        raise CliFailure(str(exc), EXIT_INVARIANT) from exc
    except ValueError as exc:
        raise CliFailure(str(exc), EXIT_PARSE) from exc
    csv_path = out_dir / f"{run}.csv"
    write_csv(csv_path, rows)
    manifest = {"run": run, "seed": cfg.seed, "optimizer": vars(cfg),
                "params": {k: v for k, v in p.items() if k not in ("out", "config")},
                "csv": csv_path.name}
    try:
        (out_dir / f"{run}.manifest.json").write_text(json.dumps(clean(manifest), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise CliFailure(f"cannot write manifest: {exc}", EXIT_IO) from exc
    emit({"run": run, "csv": str(csv_path), "summary": summary})


def _powers(d: int) -> list[int]:
    out, r = [], 2
    while r < d:
        out.append(r)
        r *= 2
    return out + [d]


if __name__ == "__main__":
    main()
