"""Command-line entry point for the full workflow.

Subcommands: generate-walks, generate-checkins, fit-encoder, build-index,
evaluate, sweep, summarize.  Every parameter set is validated before any
file is touched, all randomness comes from explicit ``--seed`` flags, and
each output file gets a ``<file>.config.json`` sidecar that is sufficient
to regenerate it (timing columns excepted).

Exit codes (one per error class, each with a one-line greppable message on
standard error):

    0  success, all invariant self-checks passed
    2  usage error (unknown flag, bad value)
    3  missing input file
    4  invalid flag combination
    5  malformed input file
    6  invariant self-check failure
    7  generation failed (e.g. the separation constraint is unsatisfiable)

If the environment variable ``PROXTRACE_OUTPUT_DIR`` is set, relative
output paths are created under that directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from . import __version__, encoding, pipeline, simulate
from .errors import (
    DegenerateDataError,
    FormatError,
    SamplingError,
    ValidationError,
)
from .index import BACKENDS, index_save

EXIT_USAGE = 2
EXIT_MISSING_INPUT = 3
EXIT_BAD_COMBINATION = 4
EXIT_BAD_FORMAT = 5
EXIT_SELF_CHECK = 6
EXIT_GENERATION = 7

_KIND = {
    EXIT_USAGE: "usage",
    EXIT_MISSING_INPUT: "missing-input",
    EXIT_BAD_COMBINATION: "bad-combination",
    EXIT_BAD_FORMAT: "bad-format",
    EXIT_SELF_CHECK: "self-check",
    EXIT_GENERATION: "generation",
}


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _fail(code: int, message: str) -> CliError:
    return CliError(code, message)


def _out_path(path: str) -> Path:
    base = os.environ.get("PROXTRACE_OUTPUT_DIR")
    p = Path(path)
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _require_input(path: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise _fail(EXIT_MISSING_INPUT, f"input file not found: {p}")
    return p


def _write_sidecar(out: Path, command: str, params: dict) -> None:
    sidecar = Path(str(out) + ".config.json")
    payload = {"tool": "proxtrace", "version": __version__,
               "command": command, "params": params}
    sidecar.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# -- argument parsing --------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="proxtrace",
        description="Contact-tracing nearest-neighbour experiments over "
                    "space-time trajectories.")
    top.add_argument("--version", action="version",
                     version=f"proxtrace {__version__}")
    sub = top.add_subparsers(dest="command", required=True)

    gw = sub.add_parser(
        "generate-walks",
        help="simulate random-walk trajectories with contact ground truth")
    gw.add_argument("--users", type=int, required=True,
                    help="number of agents (count)")
    gw.add_argument("--box", type=float, default=100.0,
                    help="cube edge length (distance units, default 100)")
    gw.add_argument("--tau-min", type=int, default=100,
                    help="minimum steps per agent (timesteps, default 100)")
    gw.add_argument("--tau-max", type=int, default=200,
                    help="maximum steps per agent (timesteps, default 200)")
    gw.add_argument("--epsilon", type=float, default=1.0,
                    help="contact radius (distance units, default 1)")
    gw.add_argument("--reflect", action="store_true",
                    help="reflect walkers off the walls instead of clamping")
    gw.add_argument("--seed", type=int, default=0,
                    help="PRNG seed (default 0)")
    gw.add_argument("--out", required=True,
                    help="dataset file to write; ground truth goes to "
                         "<out>.gt")

    gc = sub.add_parser(
        "generate-checkins",
        help="simulate single check-ins surrounded by ghost users")
    gc.add_argument("--users", type=int, required=True,
                    help="number of real users (count)")
    gc.add_argument("--inner-count", type=int, default=30,
                    help="target ghosts inside the inner ball per user "
                         "(count, default 30)")
    gc.add_argument("--outer-count", type=int, default=60,
                    help="distractor ghosts in the annulus per user "
                         "(count, default 60)")
    gc.add_argument("--inner-radius", type=float, default=1.0,
                    help="inner ball radius (distance units, default 1)")
    gc.add_argument("--outer-radius", type=float, default=2.0,
                    help="annulus outer radius (distance units, default 2)")
    gc.add_argument("--box", type=float, default=None,
                    help="spatial edge; default scales with user count")
    gc.add_argument("--seed", type=int, default=0,
                    help="PRNG seed (default 0)")
    gc.add_argument("--out", required=True,
                    help="dataset file to write; ground truth goes to "
                         "<out>.gt")

    fe = sub.add_parser("fit-encoder",
                        help="fit a projection + grid encoding model")
    fe.add_argument("--dataset", required=True, help="input dataset file")
    fe.add_argument("--p", type=int, default=16,
                    help="projection dimension (count, default 16)")
    fe.add_argument("--m", type=int, default=128,
                    help="grid intervals per axis (count, default 128)")
    fe.add_argument("--seed", type=int, default=0,
                    help="projection PRNG seed (default 0)")
    fe.add_argument("--out", required=True, help="model JSON file to write")

    bi = sub.add_parser("build-index",
                        help="build and persist a nearest-neighbour index")
    bi.add_argument("--dataset", required=True, help="input dataset file")
    bi.add_argument("--backend", choices=sorted(BACKENDS), default="kd",
                    help="index backend (default kd)")
    bi.add_argument("--encoder", default=None,
                    help="encoding model JSON; index encoded cells instead "
                         "of raw points")
    bi.add_argument("--max-neighbors", type=int, default=None,
                    help="HNSW degree cap M (count, default 16)")
    bi.add_argument("--ef-construction", type=int, default=None,
                    help="HNSW construction beam width (count, default 200)")
    bi.add_argument("--hnsw-seed", type=int, default=0,
                    help="HNSW level PRNG seed (default 0)")
    bi.add_argument("--out", required=True, help="index file to write")

    for name, help_ in (("evaluate", "run one tracing experiment"),
                        ("sweep", "run an experiment per swept value")):
        ev = sub.add_parser(name, help=help_)
        ev.add_argument("--dataset", required=True,
                        help="input dataset file; ground truth read from "
                             "<dataset>.gt unless --ground-truth is given")
        ev.add_argument("--ground-truth", default=None,
                        help="ground-truth file (default <dataset>.gt)")
        ev.add_argument("--backend", choices=sorted(BACKENDS), default="kd",
                        help="index backend (default kd)")
        ev.add_argument("--r", type=int, default=100,
                        help="neighbours retrieved per trajectory point "
                             "(count, default 100)")
        ev.add_argument("--infected-fraction", type=float, default=0.01,
                        help="fraction of users marked infected "
                             "(default 0.01)")
        ev.add_argument("--seed", type=int, default=0,
                        help="infected-selection PRNG seed (default 0)")
        ev.add_argument("--encode", action="store_true",
                        help="enable privacy encoding with p=16, M=128")
        ev.add_argument("--encoding-p", type=int, default=None,
                        help="projection dimension (count); requires "
                             "--encoding-m")
        ev.add_argument("--encoding-m", type=int, default=None,
                        help="grid intervals per axis (count); requires "
                             "--encoding-p")
        ev.add_argument("--encoding-seed", type=int, default=0,
                        help="projection PRNG seed (default 0)")
        ev.add_argument("--k-final", type=int, default=None,
                        help="optional truncation of the aggregated "
                             "candidate list (count, default off)")
        ev.add_argument("--all-users", action="store_true",
                        help="sample infected users from everyone, not only "
                             "users with ground-truth contacts")
        ev.add_argument("--measure-speedup", action="store_true",
                        help="also time brute force on a query subsample")
        ev.add_argument("--ef-search", type=int, default=None,
                        help="HNSW query beam width (count, default "
                             "max(200, 2r); hnsw backend only)")
        ev.add_argument("--max-neighbors", type=int, default=None,
                        help="HNSW degree cap M (count, default 16; hnsw "
                             "backend only)")
        ev.add_argument("--ef-construction", type=int, default=None,
                        help="HNSW construction beam width (count, default "
                             "200; hnsw backend only)")
        ev.add_argument("--hnsw-seed", type=int, default=0,
                        help="HNSW level PRNG seed (default 0)")
        ev.add_argument("--label", default=None,
                        help="dataset label for the result table "
                             "(default: dataset file stem)")
        ev.add_argument("--out", default=None,
                        help="machine-readable results file to write "
                             "(tab-separated, one row per config+metric)")
        if name == "sweep":
            ev.add_argument("--axis", required=True,
                            choices=pipeline.SWEEP_AXES,
                            help="parameter to sweep")
            ev.add_argument("--values", required=True,
                            help="comma-separated sweep values")

    sm = sub.add_parser("summarize",
                        help="print dataset shape and density statistics")
    sm.add_argument("--dataset", required=True, help="input dataset file")
    sm.add_argument("--out", default=None,
                    help="also write the summary to this file")

    return top


# -- subcommand bodies -------------------------------------------------------


def _cmd_generate_walks(args) -> int:
    try:
        cfg = simulate.WalkConfig(
            n_agents=args.users, box_edge=args.box, tau_min=args.tau_min,
            tau_max=args.tau_max, contact_epsilon=args.epsilon,
            seed=args.seed, reflect=args.reflect)
    except ValidationError as exc:
        raise _fail(EXIT_USAGE, str(exc))
    out = _out_path(args.out)
    records, gt = simulate.generate_walks(cfg)
    gt.validate()
    simulate.dataset_save(records, gt, out)
    _write_sidecar(out, "generate-walks", dataclasses.asdict(cfg))
    print(f"wrote {out} and {simulate.default_ground_truth_path(out)} "
          f"({len(records)} users, {gt.n_pairs()} contact pairs)")
    return 0


def _cmd_generate_checkins(args) -> int:
    try:
        cfg = simulate.GhostConfig(
            n_real_users=args.users, inner_count=args.inner_count,
            outer_count=args.outer_count, inner_radius=args.inner_radius,
            outer_radius=args.outer_radius, seed=args.seed,
            box_edge=args.box)
    except ValidationError as exc:
        raise _fail(EXIT_USAGE, str(exc))
    out = _out_path(args.out)
    try:
        records, gt = simulate.generate_checkins(cfg)
    except SamplingError as exc:
        raise _fail(EXIT_GENERATION, str(exc))
    gt.validate()
    simulate.dataset_save(records, gt, out)
    _write_sidecar(out, "generate-checkins", dataclasses.asdict(cfg))
    print(f"wrote {out} and {simulate.default_ground_truth_path(out)} "
          f"({len(records)} records, {gt.n_pairs()} target pairs)")
    return 0


def _load_records(path):
    try:
        return simulate.load_dataset(_require_input(path))
    except FormatError as exc:
        raise _fail(EXIT_BAD_FORMAT, str(exc))


def _cmd_fit_encoder(args) -> int:
    if args.p < 1 or args.m < 1:
        raise _fail(EXIT_USAGE, "--p and --m must be >= 1")
    out = _out_path(args.out)
    records = _load_records(args.dataset)
    points = pipeline.flatten_records(records).vectors
    try:
        model = encoding.fit_encoding_model(points, args.p, args.m, args.seed)
    except DegenerateDataError as exc:
        raise _fail(EXIT_GENERATION, str(exc))
    encoding.save_model(model, out)
    _write_sidecar(out, "fit-encoder",
                   {"dataset": str(args.dataset), "p": args.p, "m": args.m,
                    "seed": args.seed})
    print(f"wrote {out} (p={args.p}, M={args.m}, delta={model.grid.delta:.6g})")
    return 0


def _cmd_build_index(args) -> int:
    if args.backend != "hnsw" and (args.max_neighbors is not None
                                   or args.ef_construction is not None):
        raise _fail(EXIT_BAD_COMBINATION,
                    "--max-neighbors/--ef-construction apply only to "
                    "--backend hnsw")
    out = _out_path(args.out)
    records = _load_records(args.dataset)
    enc = None
    if args.encoder is not None:
        try:
            model = encoding.load_model(_require_input(args.encoder))
        except FormatError as exc:
            raise _fail(EXIT_BAD_FORMAT, str(exc))
        enc = pipeline.EncodingParams(model.basis.vectors.shape[0],
                                      model.grid.m_intervals,
                                      model.basis.seed)
    cfg = pipeline.ExperimentConfig(
        backend=args.backend, encoding=enc,
        hnsw_max_neighbors=args.max_neighbors or 16,
        hnsw_ef_construction=args.ef_construction or 200,
        hnsw_seed=args.hnsw_seed)
    index, _, seconds = pipeline.build_index(records, cfg)
    index_save(index, out)
    _write_sidecar(out, "build-index", {
        "dataset": str(args.dataset), "backend": args.backend,
        "encoder": args.encoder, "max_neighbors": args.max_neighbors,
        "ef_construction": args.ef_construction, "hnsw_seed": args.hnsw_seed})
    print(f"wrote {out} ({len(index)} items, {args.backend}, "
          f"built in {seconds:.2f}s)")
    return 0


def _experiment_config(args) -> pipeline.ExperimentConfig:
    if (args.encoding_p is None) != (args.encoding_m is None):
        raise _fail(EXIT_BAD_COMBINATION,
                    "--encoding-p and --encoding-m must be given together")
    if args.backend != "hnsw":
        for flag, val in (("--ef-search", args.ef_search),
                          ("--max-neighbors", args.max_neighbors),
                          ("--ef-construction", args.ef_construction)):
            if val is not None:
                raise _fail(EXIT_BAD_COMBINATION,
                            f"{flag} applies only to --backend hnsw")
    enc = None
    if args.encode or args.encoding_p is not None:
        enc = pipeline.EncodingParams(args.encoding_p or 16,
                                      args.encoding_m or 128,
                                      args.encoding_seed)
    try:
        return pipeline.ExperimentConfig(
            backend=args.backend, r_per_timestep=args.r,
            infected_fraction=args.infected_fraction, encoding=enc,
            k_final=args.k_final, query_seed=args.seed,
            evaluable_only=not args.all_users,
            measure_speedup=args.measure_speedup,
            hnsw_max_neighbors=args.max_neighbors or 16,
            hnsw_ef_construction=args.ef_construction or 200,
            hnsw_ef_search=args.ef_search, hnsw_seed=args.hnsw_seed,
            label=args.label or Path(args.dataset).stem)
    except ValidationError as exc:
        raise _fail(EXIT_USAGE, str(exc))


def _load_experiment_inputs(args):
    try:
        loaded = simulate.dataset_load(_require_input(args.dataset),
                                       args.ground_truth)
    except FormatError as exc:
        raise _fail(EXIT_BAD_FORMAT, str(exc))
    if args.ground_truth is not None:
        _require_input(args.ground_truth)
    if loaded.ground_truth_missing:
        raise _fail(EXIT_MISSING_INPUT,
                    f"ground-truth file not found: "
                    f"{simulate.default_ground_truth_path(args.dataset)}")
    return loaded


def _finish_results(args, command: str, results) -> int:
    sys.stdout.write(pipeline.format_table(results))
    if args.out:
        out = _out_path(args.out)
        out.write_text(pipeline.results_tsv(results))
        params = {k: v for k, v in vars(args).items() if k != "command"}
        _write_sidecar(out, command, params)
        print(f"wrote {out}")
    violations = [v for res in results for v in res.self_check()]
    if violations:
        raise _fail(EXIT_SELF_CHECK, "; ".join(violations))
    return 0


def _cmd_evaluate(args) -> int:
    cfg = _experiment_config(args)
    loaded = _load_experiment_inputs(args)
    try:
        result = pipeline.evaluate(loaded.records, loaded.ground_truth, cfg)
    except (ValidationError, FormatError) as exc:
        raise _fail(EXIT_BAD_FORMAT if isinstance(exc, FormatError)
                    else EXIT_USAGE, str(exc))
    return _finish_results(args, "evaluate", [result])


def _cmd_sweep(args) -> int:
    cfg = _experiment_config(args)
    try:
        values = [float(v) if args.axis == "infected_fraction" else int(v)
                  for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise _fail(EXIT_USAGE, f"--values must be numeric: {args.values!r}")
    if not values:
        raise _fail(EXIT_USAGE, "--values is empty")
    if args.axis in ("p", "M") and cfg.encoding is None:
        raise _fail(EXIT_BAD_COMBINATION,
                    f"--axis {args.axis} requires encoding flags")
    loaded = _load_experiment_inputs(args)
    points = pipeline.sweep(loaded.records, loaded.ground_truth, cfg,
                            args.axis, values)
    failures = [(v, r) for v, r in points if isinstance(r, str)]
    for v, msg in failures:
        print(f"proxtrace: sweep point {args.axis}={v} failed: {msg}",
              file=sys.stderr)
    results = [r for _, r in points if not isinstance(r, str)]
    code = _finish_results(args, "sweep", results)
    return EXIT_SELF_CHECK if failures else code


def _cmd_summarize(args) -> int:
    records = _load_records(args.dataset)
    text = simulate.summary_text(simulate.summarize(records))
    sys.stdout.write(text)
    if args.out:
        out = _out_path(args.out)
        out.write_text(text)
        _write_sidecar(out, "summarize", {"dataset": str(args.dataset)})
    return 0


_COMMANDS = {
    "generate-walks": _cmd_generate_walks,
    "generate-checkins": _cmd_generate_checkins,
    "fit-encoder": _cmd_fit_encoder,
    "build-index": _cmd_build_index,
    "evaluate": _cmd_evaluate,
    "sweep": _cmd_sweep,
    "summarize": _cmd_summarize,
}


def run(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except CliError as exc:
        kind = _KIND.get(exc.code, "error")
        print(f"proxtrace: error: kind={kind} code={exc.code}: {exc}",
              file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"proxtrace: error: kind=missing-input code="
              f"{EXIT_MISSING_INPUT}: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
