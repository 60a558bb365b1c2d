"""Command-line surface: evolve, entropy-sweep, hadronize, geometry.

All data outputs are CSV or JSON-lines; every output file gets a
`<name>.meta.json` sidecar carrying the fully resolved configuration,
seed, and code version so the file can be reproduced exactly.  Reruns
with identical config and seed are byte-identical regardless of the
worker count.

Exit codes: 0 success, 2 configuration error, 3 capacity error,
4 accuracy error, 1 unexpected failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bridge import parse_events, run_pipeline
from .config import (
    OUTDIR_ENV_VAR,
    ResolvedRun,
    RunConfig,
    apply_overrides,
    load_config_file,
    resolve,
)
from .errors import (
    AccuracyError,
    CapacityError,
    ConfigError,
    LadderError,
    MalformedEventError,
)
from .hilbert import HamiltonianSpec
from .lattice import interaction_table
from .observe import field_expectations, max_entropy_sweep
from .propagate import central_excitation_state, krylov_evolve

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_CAPACITY = 3
EXIT_ACCURACY = 4


def _fmt(value) -> str:
    """Deterministic text form: shortest round-trip repr for floats."""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_sidecar(path: Path, run: ResolvedRun, command: str, extra: dict | None = None) -> None:
    payload = {
        "version": __version__,
        "command": command,
        "config": run.to_metadata(),
    }
    if extra:
        payload.update(extra)
    with open(Path(str(path) + ".meta.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_path(run: ResolvedRun, name: str) -> Path:
    out_dir = Path(run.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir / name


# ---------------------------------------------------------------------------
# commands

def cmd_evolve(run: ResolvedRun, args) -> int:
    geom = run.geometry
    spec = HamiltonianSpec.from_geometry(geom, run.params)
    psi0 = central_excitation_state(geom)
    times = np.unique(np.linspace(0.0, run.config.window, run.config.samples))
    traj = krylov_evolve(
        spec,
        psi0,
        run.config.window,
        record_times=times,
        tol=run.config.tolerance,
        max_dim=run.config.max_krylov_dim,
        observer=lambda _t, psi: field_expectations(psi, geom),
    )
    rows = []
    for t, fe in zip(traj.times, traj.records):
        for j in range(geom.n_rungs):
            rows.append(
                (t, j + 1, fe.e_avg[j], fe.p_minus[j], fe.p_zero[j], fe.p_plus[j], fe.p_rr[j])
            )
    path = _out_path(run, args.output)
    _write_csv(
        path,
        ["time_us", "rung", "e_avg", "p_minus", "p_zero", "p_plus", "p_rr"],
        rows,
    )
    _write_sidecar(path, run, "evolve")
    print(f"wrote {path} ({len(rows)} rows, {len(traj.times)} times)")
    return EXIT_OK


def cmd_entropy_sweep(run: ResolvedRun, args) -> int:
    cfg = run.config
    base = HamiltonianSpec.from_geometry(run.geometry, run.params)
    workers = cfg.workers or os.cpu_count() or 1

    def progress(done, total):
        print(f"grid point {done}/{total}", file=sys.stderr)

    diagram = max_entropy_sweep(
        base,
        cfg.sweep_delta,
        cfg.sweep_rb,
        cfg.window,
        n_samples=cfg.samples,
        workers=workers,
        tol=cfg.tolerance,
        max_dim=cfg.max_krylov_dim,
        progress=progress,
    )
    rows = [
        (d, r, diagram.values[i, j])
        for i, d in enumerate(diagram.delta_over_omega)
        for j, r in enumerate(diagram.rb_over_a)
    ]
    path = _out_path(run, args.output)
    _write_csv(path, ["delta_over_omega", "rb_over_a", "max_entropy"], rows)
    _write_sidecar(path, run, "entropy-sweep")
    json_path = _out_path(run, args.json_output)
    payload = {
        "version": __version__,
        "config": run.to_metadata(),
        "window_us": diagram.window,
        "delta_over_omega": [float(x) for x in diagram.delta_over_omega],
        "rb_over_a": [float(x) for x in diagram.rb_over_a],
        "max_entropy": [[float(v) for v in row] for row in diagram.values],
    }
    with open(json_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {path} and {json_path} ({diagram.values.size} grid points)")
    return EXIT_OK


def _load_reference(path: str) -> dict[int, float]:
    """Reference multiplicity distribution: CSV with columns
    multiplicity,frequency (extra columns ignored)."""
    ref = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        try:
            m_col = header.index("multiplicity")
            f_col = header.index("frequency")
        except ValueError as exc:
            raise ConfigError(
                f"reference file {path} needs 'multiplicity' and 'frequency' columns"
            ) from exc
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) <= max(m_col, f_col) or not parts[m_col]:
                continue
            ref[int(parts[m_col])] = float(parts[f_col])
    return ref


def cmd_hadronize(run: ResolvedRun, args) -> int:
    cfg = run.config
    try:
        with open(args.events, encoding="utf-8") as fh:
            events, issues = parse_events(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read events file {args.events}: {exc}") from exc
    for issue in issues:
        print(f"{args.events}:{issue.line_number}: {issue.message}", file=sys.stderr)
    workers = cfg.workers or os.cpu_count() or 1
    result = run_pipeline(
        events,
        run.hadronization_config(),
        cfg.n_shots,
        cfg.seed,
        workers=workers,
    )
    for failure in result.failures:
        print(f"event {failure.event_id} failed: {failure.message}", file=sys.stderr)

    hadron_path = _out_path(run, args.hadrons_output)
    with open(hadron_path, "w", encoding="utf-8", newline="\n") as fh:
        for record in result.records:
            fh.write(json.dumps(record.to_json_dict()) + "\n")
    _write_sidecar(hadron_path, run, "hadronize", {"events_file": args.events})

    hist = result.histogram
    reference = _load_reference(args.reference) if args.reference else None
    header = ["multiplicity", "count", "frequency"]
    if reference is not None:
        header.append("reference_frequency")
    rows = []
    for m in range(len(hist.counts)):
        row = [m, int(hist.counts[m]), float(hist.frequencies[m])]
        if reference is not None:
            row.append(reference.get(m, 0.0))
        rows.append(row)
    mult_path = _out_path(run, args.multiplicity_output)
    _write_csv(mult_path, header, rows)
    _write_sidecar(mult_path, run, "hadronize", {"events_file": args.events})
    print(
        f"wrote {hadron_path} ({len(result.records)} shots) and {mult_path} "
        f"(mean multiplicity {hist.mean!r})"
    )
    return EXIT_OK


def cmd_geometry(run: ResolvedRun, args) -> int:
    geom = run.geometry
    print(f"n_rungs={geom.n_rungs} a={_fmt(geom.lattice_spacing)} "
          f"rho={_fmt(geom.inv_aspect_ratio)} h={_fmt(geom.rung_spacing)}")
    print(f"omega={_fmt(run.params.rabi_frequency)} delta={_fmt(run.delta)} "
          f"c6={_fmt(run.params.c6)} blockade_radius={_fmt(run.blockade_radius)} "
          f"rb_over_a={_fmt(run.rb_over_a)}")
    print("atom,rung,leg,x_um,y_um")
    for i, (x, y) in enumerate(geom.positions):
        rung = i // 2 + 1
        leg = "top" if i % 2 == 0 else "bottom"
        print(f"{i},{rung},{leg},{_fmt(x)},{_fmt(y)}")
    print("atom_i,atom_j,distance_um,v_rad_per_us")
    table = interaction_table(geom, run.params)
    for (i, j), v in sorted(table.items()):
        d = float(np.linalg.norm(geom.positions[i] - geom.positions[j]))
        print(f"{i},{j},{_fmt(d)},{_fmt(v)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing

def _add_common_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    g = parser.add_argument_group("geometry")
    g.add_argument("--n-rungs", type=int, dest="n_rungs")
    g.add_argument("--a", type=float, dest="a", help="lattice spacing (um)")
    g.add_argument("--rb-over-a", type=float, dest="rb_over_a")
    g.add_argument("--rho", type=float, dest="rho")
    p = parser.add_argument_group("physics")
    p.add_argument("--omega", type=float, dest="omega")
    p.add_argument("--delta", type=float, dest="delta")
    p.add_argument("--delta-over-omega", type=float, dest="delta_over_omega")
    p.add_argument("--c6", type=float, dest="c6")
    e = parser.add_argument_group("evolution")
    e.add_argument("--window", type=float, dest="window")
    e.add_argument("--samples", type=int, dest="samples")
    e.add_argument("--t-f", type=float, dest="t_f")
    e.add_argument("--tolerance", type=float, dest="tolerance")
    e.add_argument("--max-krylov-dim", type=int, dest="max_krylov_dim")
    h = parser.add_argument_group("hadronization")
    h.add_argument("--n-shots", type=int, dest="n_shots")
    h.add_argument("--seed", type=int, dest="seed")
    h.add_argument("--rr-policy", choices=["zero", "discard"], dest="rr_policy")
    h.add_argument("--e-lo", type=float, dest="e_lo")
    h.add_argument("--e-hi", type=float, dest="e_hi")
    h.add_argument("--cal-delta-lo", type=float, dest="cal_delta_lo")
    h.add_argument("--cal-delta-hi", type=float, dest="cal_delta_hi")
    o = parser.add_argument_group("output")
    o.add_argument(
        "--out-dir",
        dest="out_dir",
        help=f"output directory (default: ${OUTDIR_ENV_VAR} or '.')",
    )
    o.add_argument("--workers", type=int, dest="workers")


def _csv_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats: {text}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rydladder",
        description="Two-leg Rydberg ladder simulator and hadronization pipeline",
    )
    parser.add_argument("--version", action="version", version=f"rydladder {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("evolve", help="field evolution of the central-excitation quench")
    _add_common_options(ev)
    ev.add_argument("--output", default="field_evolution.csv")
    ev.set_defaults(func=cmd_evolve)

    sw = sub.add_parser("entropy-sweep", help="max half-chain entropy over a parameter grid")
    _add_common_options(sw)
    sw.add_argument("--grid-delta", type=_csv_floats, dest="sweep_delta",
                    help="comma-separated Delta/Omega values")
    sw.add_argument("--grid-rb", type=_csv_floats, dest="sweep_rb",
                    help="comma-separated R_b/a values")
    sw.add_argument("--output", default="phase_diagram.csv")
    sw.add_argument("--json-output", default="phase_diagram.json")
    sw.set_defaults(func=cmd_entropy_sweep)

    ha = sub.add_parser("hadronize", help="hadronize parton events from a JSON-lines file")
    _add_common_options(ha)
    ha.add_argument("events", help="JSON-lines parton events file")
    ha.add_argument("--hadrons-output", default="hadrons.jsonl")
    ha.add_argument("--multiplicity-output", default="multiplicity.csv")
    ha.add_argument("--reference", help="reference multiplicity CSV to join for comparison")
    ha.set_defaults(func=cmd_hadronize)

    ge = sub.add_parser("geometry", help="print atom positions and the interaction table")
    _add_common_options(ge)
    ge.set_defaults(func=cmd_geometry)
    return parser


def _config_from_args(args) -> RunConfig:
    cfg = load_config_file(args.config) if args.config else RunConfig()
    overrides = {
        name: getattr(args, name)
        for name in RunConfig.__dataclass_fields__
        if hasattr(args, name)
    }
    return apply_overrides(cfg, overrides)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        run = resolve(_config_from_args(args))
        return args.func(run, args)
    except (ConfigError, MalformedEventError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except AccuracyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ACCURACY
    except LadderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
