"""Command-line entry point: ``tvpsvm {validate-data,estimate,exercise,table}``."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .errors import CoverageError, DegenerateBenchmarkError, ExerciseError, InputError, MCMCError
from .harness import (
    RECORDS_FILE,
    ExerciseConfig,
    ModelSpec,
    build_table,
    emit_band_csv,
    load_records,
    run_exercise,
)
from .model import run_mcmc, summarize_paths
from .vintages import information_set, parse_vintage_csv

log = logging.getLogger("tvpsvm")


def _load_config(args) -> ExerciseConfig:
    cfg = ExerciseConfig.from_yaml(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def _cmd_validate(args) -> int:
    if args.file is None and args.config is None:
        raise InputError("give a vintage file or --config")
    path = args.file or ExerciseConfig.from_yaml(args.config).vintage_file
    vs = parse_vintage_csv(path)
    cov = vs.coverage()
    print(f"file: {path}")
    print(f"observations: {len(vs.observations)} ({vs.observations[0]} .. {vs.observations[-1]})")
    print(f"vintages: {len(vs.vintages)} ({vs.vintages[0]} .. {vs.vintages[-1]})")
    print(cov.to_string(index=False, max_rows=args.max_rows))
    return 0


def _cmd_estimate(args) -> int:
    cfg = _load_config(args)
    spec = ModelSpec.parse(args.model)
    if spec.is_benchmark:
        raise InputError("estimate needs a model family, not the benchmark")
    vs = parse_vintage_csv(cfg.vintage_file)
    origin = args.origin or vs.vintages[-1]
    pi = information_set(vs, origin, start=cfg.sample_start)
    mcfg = cfg.model_config(spec, stream_id=0)
    log.info("estimating %s on %d observations (%s .. %s)", spec.label, len(pi), pi.index[0], pi.index[-1])
    draws = run_mcmc(pi.to_numpy(), None, mcfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{spec.family}_{spec.prior}".lower()
    emit_band_csv(summarize_paths(draws), out / f"bands_{stem}.csv", dates=pi.index)
    draws.to_npz(out / f"draws_{stem}.npz")
    draws.to_csv(out / f"draws_{stem}.csv")
    print(f"h acceptance {draws.diagnostics['h_acceptance']:.3f}; outputs in {out}")
    return 0


def _cmd_exercise(args) -> int:
    cfg = _load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out / "run.log", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    logging.getLogger().addHandler(handler)
    try:
        table = run_exercise(cfg, out, jobs=args.jobs)
    finally:
        logging.getLogger().removeHandler(handler)
        handler.close()
    _write_table(table, out, args.format)
    return 0


def _cmd_table(args) -> int:
    out = Path(args.out)
    records = load_records(out / RECORDS_FILE)
    if not records:
        raise InputError(f"no records in {out / RECORDS_FILE}")
    cfg = _load_config(args) if args.config else None
    _write_table(build_table(records, cfg), out, args.format)
    return 0


def _write_table(table, out: Path, fmt: str):
    (out / "table.txt").write_text(table.render(), encoding="utf-8")
    table.to_csv(out / "table.csv")
    table.to_csv(out / "table.tsv", sep="\t")
    if fmt == "text":
        print(table.render())
    else:
        sys.stdout.write(table.to_csv(sep="," if fmt == "csv" else "\t"))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tvpsvm", description="UC-SV / UC-SVM real-time inflation forecasting")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate-data", help="parse a vintage file and print its coverage")
    v.add_argument("file", nargs="?")
    v.add_argument("--config")
    v.add_argument("--max-rows", type=int, default=20)
    v.set_defaults(func=_cmd_validate)

    e = sub.add_parser("estimate", help="estimate one model on one vintage; writes bands and draws")
    e.add_argument("--config", required=True)
    e.add_argument("--model", default="UC-SVM/None", help="FAMILY/PRIOR, e.g. UC-SVM/DHS")
    e.add_argument("--origin", help="vintage quarter to use (default: final vintage)")
    e.add_argument("--seed", type=int)
    e.add_argument("--out", default="out")
    e.set_defaults(func=_cmd_estimate)

    x = sub.add_parser("exercise", help="run the rolling real-time forecast exercise")
    x.add_argument("--config", required=True)
    x.add_argument("--seed", type=int)
    x.add_argument("--jobs", type=int, default=1)
    x.add_argument("--out", default="out")
    x.add_argument("--format", choices=["text", "csv", "tsv"], default="text")
    x.set_defaults(func=_cmd_exercise)

    t = sub.add_parser("table", help="rebuild the evaluation table from stored records")
    t.add_argument("--out", default="out")
    t.add_argument("--config")
    t.add_argument("--seed", type=int)
    t.add_argument("--format", choices=["text", "csv", "tsv"], default="text")
    t.set_defaults(func=_cmd_table)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, CoverageError, ExerciseError, DegenerateBenchmarkError, MCMCError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
