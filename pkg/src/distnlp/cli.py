"""Command line entry point: ``distnlp {corpus,simplify,job,console,bench} ...``."""

from __future__ import annotations

import argparse
import logging
import os
import re
import sys
from pathlib import Path

from . import bench
from .console import run_sequential
from .engine import FailurePlan, JobSpec, run_job
from .errors import ConfigurationError, DistNLPError
from .simplifier import SimplifierConfig, simplify_line
from .store import CorpusStore, StoreConfig

UNITS = {"": 1, "b": 1, "k": 1 << 10, "kib": 1 << 10, "kb": 1 << 10,
         "m": 1 << 20, "mib": 1 << 20, "mb": 1 << 20,
         "g": 1 << 30, "gib": 1 << 30, "gb": 1 << 30}


def parse_size(text: str) -> int:
    """``"64"`` -> 64, ``"64MiB"`` -> 67108864, ``"MiB"`` -> 1048576."""
    m = re.fullmatch(r"\s*(\d*)\s*([a-zA-Z]*)\s*", text)
    if not m or not text.strip() or m.group(2).lower() not in UNITS:
        raise argparse.ArgumentTypeError(f"invalid size {text!r}")
    return int(m.group(1) or 1) * UNITS[m.group(2).lower()]


def int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _simplifier(args) -> SimplifierConfig | None:
    if args.stopwords is None and args.suffixes is None:
        return None
    return SimplifierConfig.from_files(args.stopwords, args.suffixes)


def _add_lexicon_args(p):
    p.add_argument("--stopwords", type=Path, help="stopword file (default: shipped list)")
    p.add_argument("--suffixes", type=Path, help="suffix rule file (default: shipped rules)")


# ---------------------------------------------------------------- commands


def cmd_corpus_put(args) -> int:
    config = StoreConfig()
    if args.conf:
        config = StoreConfig.from_file(args.conf, config)
    overrides = {}
    if args.block_size is not None:
        overrides["dfs.block.size"] = args.block_size
    if args.replication is not None:
        overrides["dfs.replication"] = args.replication
    if args.nodes is not None:
        overrides["store.nodes"] = args.nodes
    config = StoreConfig.from_mapping(overrides, config)
    store = CorpusStore(args.root, config)
    for path in args.paths:
        name = args.name if args.name and len(args.paths) == 1 else None
        manifest = store.put_path(path, name)
        print(f"{manifest.file_name}\t{manifest.total_bytes}\t{len(manifest.blocks)} blocks")
    return 0


def cmd_corpus_ls(args) -> int:
    store = CorpusStore(args.root)
    for name in store.list_files():
        m = store.manifest(name)
        print(f"{name}\t{m.total_bytes}\t{len(m.blocks)}")
    return 0


def cmd_corpus_cat(args) -> int:
    store = CorpusStore(args.root)
    sys.stdout.write(store.cat(args.file, args.failed_nodes or ()))
    return 0


def cmd_simplify(args) -> int:
    config = _simplifier(args)
    if args.file is not None:
        fh = open(args.file, encoding="utf-8")
    else:
        fh = sys.stdin
    try:
        for line in fh:
            print(simplify_line(line.rstrip("\r\n"), config))
    finally:
        if fh is not sys.stdin:
            fh.close()
    return 0


def cmd_job_run(args) -> int:
    if (args.fail_worker is None) != (args.after_tasks is None):
        raise ConfigurationError("--fail-worker and --after-tasks go together")
    plan = FailurePlan(args.fail_worker, args.after_tasks) if args.fail_worker is not None else None
    spec = JobSpec(
        store_root=args.root,
        inputs=args.input,
        output_dir=args.out,
        mapper=args.mapper,
        reducer=args.reducer,
        workers=args.workers,
        task_overhead=args.task_overhead_ms / 1000.0,
        failure_plan=plan,
        failed_nodes=frozenset(args.failed_nodes or ()),
        simplifier=_simplifier(args),
    )
    result = run_job(spec)
    print(
        f"job={result.job_id} tasks={result.tasks_total} retried={result.tasks_retried} "
        f"wall_ms={result.wall_time * 1000:.1f}"
    )
    return 0


def cmd_console_run(args) -> int:
    run = run_sequential(args.input, args.out, _simplifier(args))
    print(f"lines={run.lines_processed} wall_ms={run.wall_time * 1000:.1f}")
    return 0


def _emit(records, args) -> None:
    text, report = bench.emit_results(records, args.csv, args.report)
    if args.csv is None:
        sys.stdout.write(text)
    print(report)


def cmd_bench_scaling(args) -> int:
    sizes = [s * args.unit for s in args.sizes]
    records = bench.experiment_scaling(
        sizes, workers=args.workers, repeats=args.repeats, workdir=args.workdir,
        block_size=args.block_size, seed=args.seed,
    )
    _emit(records, args)
    return 0


def cmd_bench_split(args) -> int:
    records = bench.experiment_split(
        args.size * args.unit, args.files, workers=args.workers, repeats=args.repeats,
        task_overhead=args.task_overhead_ms / 1000.0, workdir=args.workdir,
        block_size=args.block_size, seed=args.seed,
    )
    _emit(records, args)
    return 0


def cmd_bench_report(args) -> int:
    records = bench.parse_results(Path(args.csv).read_text(encoding="utf-8"))
    print(bench.format_report(records))
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="distnlp", description=__doc__)
    parser.add_argument(
        "--root", type=Path, default=Path(os.environ.get("DISTNLP_ROOT", "dfs")),
        help="block store root (default: $DISTNLP_ROOT or ./dfs)",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    groups = parser.add_subparsers(dest="group", required=True)

    corpus = groups.add_parser("corpus", help="block store").add_subparsers(dest="cmd", required=True)
    p = corpus.add_parser("put", help="split a file into blocks and store replicas")
    p.add_argument("paths", nargs="+", type=Path)
    p.add_argument("--name", help="store under this name (single path only)")
    p.add_argument("--block-size", type=parse_size)
    p.add_argument("--replication", type=int)
    p.add_argument("--nodes", type=int)
    p.add_argument("--conf", type=Path, help="properties or XML file with dfs.* keys")
    p.set_defaults(func=cmd_corpus_put)
    p = corpus.add_parser("ls", help="list stored files")
    p.set_defaults(func=cmd_corpus_ls)
    p = corpus.add_parser("cat", help="print a stored file")
    p.add_argument("file")
    p.add_argument("--failed-nodes", type=int_list)
    p.set_defaults(func=cmd_corpus_cat)

    p = groups.add_parser("simplify", help="simplify text line by line")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--stdin", action="store_true")
    src.add_argument("--file", type=Path)
    _add_lexicon_args(p)
    p.set_defaults(func=cmd_simplify)

    job = groups.add_parser("job", help="map-only jobs").add_subparsers(dest="cmd", required=True)
    p = job.add_parser("run", help="run a job over stored files")
    p.add_argument("--input", nargs="+", required=True, help="stored file name(s)")
    p.add_argument("--mapper", choices=["simplify", "identity", "wordcount-map"], default="simplify")
    p.add_argument("--reducer", choices=["none", "wordcount"], default="none")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--task-overhead-ms", type=float, default=0.0)
    p.add_argument("--fail-worker", type=int)
    p.add_argument("--after-tasks", type=int)
    p.add_argument("--failed-nodes", type=int_list, help="data nodes to treat as down")
    _add_lexicon_args(p)
    p.set_defaults(func=cmd_job_run)

    con = groups.add_parser("console", help="sequential baseline").add_subparsers(dest="cmd", required=True)
    p = con.add_parser("run")
    p.add_argument("--input", nargs="+", required=True, type=Path)
    p.add_argument("--out", type=Path, required=True)
    _add_lexicon_args(p)
    p.set_defaults(func=cmd_console_run)

    b = groups.add_parser("bench", help="benchmarks").add_subparsers(dest="cmd", required=True)

    def common(p):
        p.add_argument("--unit", type=parse_size, default=parse_size("MiB"))
        p.add_argument("--repeats", type=int, default=bench.DEFAULT_REPEATS)
        p.add_argument("--csv", type=Path)
        p.add_argument("--report", type=Path)
        p.add_argument("--workdir", type=Path, default=Path("bench-work"))
        p.add_argument("--block-size", type=parse_size, default=bench.DEFAULT_BENCH_BLOCK_SIZE)
        p.add_argument("--seed", type=int, default=0)

    p = b.add_parser("scaling", help="console vs parallel over growing sizes")
    p.add_argument("--sizes", type=int_list, default=list(bench.DEFAULT_SIZES_MIB))
    p.add_argument("--workers", type=int_list, default=[4])
    common(p)
    p.set_defaults(func=cmd_bench_scaling)
    p = b.add_parser("split", help="one file vs many files of equal total size")
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--files", type=int_list, default=list(bench.DEFAULT_FILE_COUNTS))
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--task-overhead-ms", type=float, default=bench.SPLIT_TASK_OVERHEAD * 1000)
    common(p)
    p.set_defaults(func=cmd_bench_split)
    p = b.add_parser("report", help="render a results CSV")
    p.add_argument("--csv", type=Path, required=True)
    p.set_defaults(func=cmd_bench_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"distnlp: configuration error: {exc}", file=sys.stderr)
        return 2
    except (DistNLPError, OSError) as exc:
        print(f"distnlp: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
