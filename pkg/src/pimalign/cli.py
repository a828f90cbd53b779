"""Command-line front end: ``gen``, ``align``, ``simulate`` and ``sweep``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .alignment import (ALPHABET, InvalidCharacter, InvalidScheme, ScoringScheme, SizeCapExceeded,
                        align, encode_sequence)
from .config import MEMORY_SIDE, PROCESSOR_SIDE, SimConfig, load_config
from .fasta import FastaError, Record, encode_records, read_fasta, write_fasta
from .memory import ConfigError
from .plotting import placement_figure, sweep_figure
from .reports import RUN_COLUMNS, SWEEP_COLUMNS, run_row, sweep_row, write_csv, write_json
from .simulator import CapacityExceeded, Database, agu_traces, run, sweep_bandwidth, traceback_winner
from .workloads import PRESETS, gen_records, preset

log = logging.getLogger("pimalign")

EXIT_OK, EXIT_INPUT, EXIT_CONFIG = 0, 1, 2


class InputError(Exception):
    pass


def _setup_logging() -> None:
    level = os.environ.get("PIMALIGN_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _records(source: str, what: str) -> list[Record]:
    """A FASTA path, or an inline ACGT string."""
    path = Path(source)
    if path.is_file():
        return read_fasta(path)
    if source and set(source.upper()) <= set(ALPHABET):
        return [Record(what, source.upper())]
    raise InputError(f"{what}: {source!r} is neither a readable file nor an ACGT sequence")


def _first(records: list[Record], what: str) -> Record:
    if not records:
        raise InputError(f"{what}: no FASTA records")
    return records[0]


def _build_config(args) -> SimConfig:
    cfg = load_config(args.config) if args.config else SimConfig()
    if args.scheme:
        try:
            cfg = replace(cfg, scheme=ScoringScheme.parse(args.scheme))
        except InvalidScheme as exc:
            raise ConfigError(f"--scheme: {exc}") from None
    if getattr(args, "p", None) is not None:
        cfg = replace(cfg, fu_per_pe=args.p)
    if getattr(args, "fidelity", None):
        cfg = replace(cfg, fidelity=args.fidelity)
    return cfg


def _inputs(args):
    if args.preset:
        q, refs = preset(args.preset, seed=args.seed)
    else:
        if not args.query or not args.db:
            raise InputError("give --query and --db, or --preset")
        q = _first(_records(args.query, "query"), "query")
        refs = _records(args.db, "db")
    query = encode_records([q], "query")[0]
    db = Database(tuple(encode_records(refs, "db")), tuple(r.name for r in refs))
    return query, db


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen(args) -> int:
    if args.preset:
        q, refs = preset(args.preset, seed=args.seed)
        out = _out_dir(args)
        write_fasta(out / "query.fa", [q])
        write_fasta(out / "db.fa", refs)
        print(f"wrote {out / 'query.fa'} and {out / 'db.fa'} ({len(refs)} records)")
        return EXIT_OK
    try:
        records = gen_records(args.count, args.min_len, args.max_len, args.seed)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if args.out:
        write_fasta(args.out, records)
        print(f"wrote {len(records)} record{'' if len(records) == 1 else 's'} to {args.out}")
    else:
        from .fasta import format_fasta
        sys.stdout.write(format_fasta(records))
    return EXIT_OK


def cmd_align(args) -> int:
    cfg = _build_config(args)
    q = _first(_records(args.query, "query"), "query")
    r = _first(_records(args.reference, "reference"), "reference")
    a, b = encode_records([q, r], "align")
    aln = align(a, b, cfg.scheme)
    print(f"score\t{aln.score}")
    print(aln.aligned_a)
    print("".join("|" if x == y and x != "-" else " " for x, y in zip(aln.aligned_a, aln.aligned_b)))
    print(aln.aligned_b)
    return EXIT_OK


def _placements(choice: str) -> list[str]:
    return [MEMORY_SIDE, PROCESSOR_SIDE] if choice == "both" else [choice]


def _traceback_summary(report, db, query, scheme) -> dict:
    if report.global_max is None:
        return {"status": "no winner"}
    try:
        aln = traceback_winner(report, db, query, scheme)
    except SizeCapExceeded as exc:
        return {"status": "skipped", "reason": str(exc)}
    return {"status": "ok", "score": aln.score, "aligned_query": aln.aligned_a,
            "aligned_reference": aln.aligned_b}


def cmd_simulate(args) -> int:
    cfg = _build_config(args)
    query, db = _inputs(args)
    out = _out_dir(args)
    reports = []
    for placement in _placements(args.placement):
        c = cfg.with_placement(placement)
        rep = run(c, db, query, verify=args.verify)
        doc = rep.to_dict()
        doc["config"] = c.to_dict()
        doc["winner_name"] = db.names[rep.global_max[1]] if rep.global_max else None
        doc["traceback"] = _traceback_summary(rep, db, query, c.scheme)
        write_json(out / f"report_{placement}.json", doc)
        reports.append(rep)
        gm = rep.global_max
        print(f"{placement}: {rep.gcups:.3f} GCUPS, {rep.total_time_s:.6e} s, "
              f"winner {db.names[gm[1]] if gm else '-'} score {gm[0] if gm else '-'}")
        if args.trace:
            _write_trace(args.trace, c, db, query, placement, len(_placements(args.placement)) > 1)
    write_csv(out / "runs.csv", [run_row(r) for r in reports], RUN_COLUMNS)
    placement_figure(reports, out / "placement.png")
    if len(reports) == 2 and reports[0].total_time_s > 0:
        print(f"speedup memory-side over processor-side: "
              f"{reports[1].total_time_s / reports[0].total_time_s:.3f}x")
    return EXIT_OK


def _write_trace(path, cfg, db, query, placement, suffix: bool) -> None:
    path = Path(path)
    if suffix:
        path = path.with_name(f"{path.stem}_{placement}{path.suffix}")
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for pe, requests in agu_traces(cfg, db, query):
            for req in requests:
                fh.write(f"{pe} {req.trace_line()}\n")
                count += 1
    print(f"wrote {count} AGU requests to {path}")


def _factors(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"--factors: cannot parse {text!r}") from None
    if not vals or any(v < 1 for v in vals):
        raise InputError("--factors: need one or more values >= 1")
    return [int(v) if v.is_integer() else v for v in vals]


def cmd_sweep(args) -> int:
    cfg = _build_config(args)
    factors = _factors(args.factors)
    query, db = _inputs(args)
    out = _out_dir(args)
    rows = sweep_bandwidth(cfg, db, query, factors)
    write_csv(out / "sweep.csv", [sweep_row(r) for r in rows], SWEEP_COLUMNS)
    runs = [run_row(rows[0]["mem_report"], 1)] + [run_row(r["proc_report"], r["factor"]) for r in rows]
    write_csv(out / "runs.csv", runs, RUN_COLUMNS)
    sweep_figure(rows, out / "sweep.png")
    print("factor\tspeedup\tgcups_mem\tgcups_proc")
    for r in rows:
        print(f"{r['factor']}\t{r['speedup']:.3f}\t{r['gcups_mem']:.2f}\t{r['gcups_proc']:.2f}")
    return EXIT_OK


def _common(p: argparse.ArgumentParser, sim: bool) -> None:
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--scheme", help="match,mismatch,gap (default 1,-1,-2)")
    if sim:
        p.add_argument("--query", help="query FASTA path or inline sequence")
        p.add_argument("--db", help="reference database FASTA path")
        p.add_argument("--preset", choices=PRESETS, help="bundled synthetic workload")
        p.add_argument("--seed", type=int, default=0, help="seed for presets")
        p.add_argument("--p", type=int, help="functional units per PE (block width)")
        p.add_argument("--fidelity", choices=("fluid", "cycle"), help="timing model")
        p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pimalign", description="Near-memory sequence alignment simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate random sequences as FASTA")
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--min-len", type=int, default=1000)
    g.add_argument("--max-len", type=int, default=1000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--preset", choices=PRESETS, help="write query.fa and db.fa for a preset")
    g.add_argument("--out", help="output file (directory with --preset); stdout if omitted")
    g.set_defaults(func=cmd_gen)

    a = sub.add_parser("align", help="score and align two sequences")
    a.add_argument("--query", required=True, help="FASTA path or inline sequence")
    a.add_argument("--reference", "--db", dest="reference", required=True,
                   help="FASTA path or inline sequence")
    _common(a, sim=False)
    a.set_defaults(func=cmd_align)

    s = sub.add_parser("simulate", help="simulate a database search")
    _common(s, sim=True)
    s.add_argument("--placement", choices=(MEMORY_SIDE, PROCESSOR_SIDE, "both"), default=MEMORY_SIDE)
    s.add_argument("--trace", help="write the AGU request stream to this file")
    s.add_argument("--verify", action="store_true", help="check every score against the reference scorer")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="speedup against the internal/external bandwidth ratio")
    _common(w, sim=True)
    w.add_argument("--factors", default="1,2,4", help="comma-separated bandwidth factors")
    w.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InputError, FastaError, InvalidCharacter, CapacityExceeded) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"input error: {exc.filename or ''}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
