"""Map-only job execution over stored blocks.

A job plans one map task per block, runs the tasks on a pool of local worker
processes and commits each task's output as ``part-NNNNN`` in the job's
output directory. The scheduler owns all task state; workers only claim tasks
and report completion over queues. A worker that dies mid-task has its
in-flight tasks put back at the front of the pending queue with an incremented
attempt number, and re-executed output replaces the partial attempt.

An optional reduce stage (word count) groups the map output by key after all
map tasks are done.
"""

from __future__ import annotations

import enum
import logging
import multiprocessing as mp
import os
import queue
import shutil
import time
import uuid
from collections import defaultdict, deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import (
    BlockUnavailableError,
    ConfigurationError,
    JobFailedError,
    OutputExistsError,
)
from .simplifier import SimplifierConfig, default_config, simplify_line, tokenize
from .store import Block, BlockManifest, CorpusStore

logger = logging.getLogger(__name__)

MAPPERS = ("simplify", "identity", "wordcount-map")
REDUCERS = ("none", "wordcount")

JOB_SUMMARY = "_JOB"
TEMP_DIR = "_temporary"
INTERMEDIATE_DIR = "_intermediate"
REDUCE_PART = "part-r-00000"

_POLL_SECONDS = 0.05
_WORKER_EXIT_FAILED = 3


@dataclass(frozen=True)
class KeyValuePair:
    key: str
    value: str

    def __post_init__(self):
        if not self.key:
            raise ValueError("key must be non-empty")


class TaskStatus(str, enum.Enum):
    PENDING = "pending"
    RUNNING = "running"
    DONE = "done"
    FAILED = "failed"


@dataclass
class Task:
    task_id: str
    block_id: str
    index: int
    attempt: int = 1
    assigned_worker: int | None = None
    status: TaskStatus = TaskStatus.PENDING
    output: Path | None = None


@dataclass(frozen=True)
class FailurePlan:
    """Stop ``worker`` partway through the task after its first ``after_tasks``."""

    worker: int
    after_tasks: int


@dataclass
class JobSpec:
    store_root: Path
    inputs: Sequence[str]
    output_dir: Path
    mapper: str = "simplify"
    reducer: str = "none"
    workers: int = 1
    task_overhead: float = 0.0
    failure_plan: FailurePlan | None = None
    failed_nodes: frozenset = frozenset()
    simplifier: SimplifierConfig | None = None
    job_id: str | None = None

    def __post_init__(self):
        if isinstance(self.inputs, str):
            self.inputs = [self.inputs]
        self.store_root = Path(self.store_root)
        self.output_dir = Path(self.output_dir)
        self.failed_nodes = frozenset(self.failed_nodes)

    def validate(self) -> None:
        check_mapper(self.mapper)
        if self.reducer not in REDUCERS:
            raise ConfigurationError(f"unknown reducer {self.reducer!r}; expected one of {REDUCERS}")
        if self.workers < 1:
            raise ConfigurationError(f"workers must be >= 1, got {self.workers}")
        if self.task_overhead < 0:
            raise ConfigurationError("task_overhead must be >= 0")
        plan = self.failure_plan
        if plan is not None and not (0 <= plan.worker < self.workers and plan.after_tasks >= 0):
            raise ConfigurationError(f"invalid failure plan {plan} for {self.workers} workers")

    @property
    def map_only(self) -> bool:
        return self.reducer == "none"


@dataclass
class JobResult:
    job_id: str
    tasks_total: int
    tasks_retried: int
    wall_time: float
    output_files: list[Path] = field(default_factory=list)


def check_mapper(mapper: str) -> None:
    if mapper not in MAPPERS:
        raise ConfigurationError(f"unknown mapper {mapper!r}; expected one of {MAPPERS}")


# ---------------------------------------------------------------- map / reduce


def block_lines(content: str) -> list[str]:
    if not content:
        return []
    lines = content.split("\n")
    if content.endswith("\n"):
        lines.pop()
    return lines


def map_lines(
    lines: Iterable[str],
    key_prefix: str,
    mapper: str,
    config: SimplifierConfig | None = None,
) -> Iterable[KeyValuePair]:
    if mapper == "identity":
        for i, line in enumerate(lines):
            yield KeyValuePair(f"{key_prefix}:{i}", line)
    elif mapper == "simplify":
        config = config or default_config()
        for i, line in enumerate(lines):
            yield KeyValuePair(f"{key_prefix}:{i}", simplify_line(line, config))
    elif mapper == "wordcount-map":
        for line in lines:
            for token in tokenize(line):
                yield KeyValuePair(token.normalized, "1")
    else:
        raise ConfigurationError(f"unknown mapper {mapper!r}")


def map_task(block: Block, mapper: str, config: SimplifierConfig | None = None) -> list[KeyValuePair]:
    """Apply ``mapper`` to every line of ``block``.

    Positional mappers key each record ``<file>:<block index>:<line index>``;
    ``wordcount-map`` emits ``(word, "1")`` per token.
    """
    check_mapper(mapper)
    prefix = f"{block.file_name}:{block.index}"
    return list(map_lines(block_lines(block.content), prefix, mapper, config))


def shuffle_reduce(pairs: Iterable[KeyValuePair], reducer: str) -> list[KeyValuePair]:
    if reducer != "wordcount":
        raise ConfigurationError(f"shuffle_reduce needs a reducer, got {reducer!r}")
    groups: dict[str, list[str]] = defaultdict(list)
    for pair in pairs:
        groups[pair.key].append(pair.value)
    return [
        KeyValuePair(key, str(sum(int(v) for v in groups[key])))
        for key in sorted(groups)
    ]


# ---------------------------------------------------------------- planning


def plan_tasks(manifests: BlockManifest | Sequence[BlockManifest], job_id: str = "job") -> list[Task]:
    """One pending task per block, in manifest order then block order."""
    if isinstance(manifests, BlockManifest):
        manifests = [manifests]
    tasks = []
    for manifest in manifests:
        for entry in manifest.blocks:
            n = len(tasks)
            tasks.append(Task(f"{job_id}_m_{n:05d}", entry.block_id, n))
    return tasks


def part_name(index: int) -> str:
    return f"part-{index:05d}"


# ---------------------------------------------------------------- output


def prepare_output_dir(output_dir: Path) -> None:
    output_dir = Path(output_dir)
    if output_dir.exists() and (not output_dir.is_dir() or any(output_dir.iterdir())):
        raise OutputExistsError(f"output directory {output_dir} exists and is not empty")
    output_dir.mkdir(parents=True, exist_ok=True)


def format_records(pairs: Iterable[KeyValuePair], keyed: bool) -> str:
    if keyed:
        return "".join(f"{p.key}\t{p.value}\n" for p in pairs)
    return "".join(f"{p.value}\n" for p in pairs)


def write_part(tmp_dir: Path, index: int, attempt: int, text: str) -> Path:
    tmp_dir.mkdir(parents=True, exist_ok=True)
    tmp = tmp_dir / f"{part_name(index)}.attempt-{attempt}"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return tmp


def commit_part(tmp: Path, final: Path) -> Path:
    os.replace(tmp, final)
    return final


def write_output(
    output_dir: Path,
    pairs_per_task: Sequence[Sequence[KeyValuePair]],
    keyed: bool = False,
) -> list[Path]:
    """Write one ``part-NNNNN`` per task; refuses a non-empty ``output_dir``."""
    output_dir = Path(output_dir)
    prepare_output_dir(output_dir)
    tmp_dir = output_dir / TEMP_DIR
    files = []
    for index, pairs in enumerate(pairs_per_task):
        tmp = write_part(tmp_dir, index, 1, format_records(pairs, keyed))
        files.append(commit_part(tmp, output_dir / part_name(index)))
    shutil.rmtree(tmp_dir, ignore_errors=True)
    return files


def output_parts(output_dir: Path) -> list[Path]:
    return sorted(p for p in Path(output_dir).iterdir() if p.name.startswith("part-"))


def read_output(output_dir: Path) -> bytes:
    """Canonical job output: part files concatenated in part order."""
    return b"".join(p.read_bytes() for p in output_parts(output_dir))


# ---------------------------------------------------------------- scheduling


class Scheduler:
    """Owns task state for one job; workers interact only via claim/complete."""

    def __init__(self, tasks: Sequence[Task], workers: int):
        self.tasks = list(tasks)
        self.pending = deque(self.tasks)
        self.alive = set(range(workers))
        self.in_flight: dict[int, list[Task]] = {w: [] for w in range(workers)}
        self.completed = 0

    @property
    def finished(self) -> bool:
        return self.completed == len(self.tasks)

    @property
    def tasks_retried(self) -> int:
        return sum(1 for t in self.tasks if t.attempt > 1)

    def claim(self, worker: int) -> Task | None:
        if worker not in self.alive or not self.pending:
            return None
        task = self.pending.popleft()
        task.status = TaskStatus.RUNNING
        task.assigned_worker = worker
        self.in_flight[worker].append(task)
        return task

    def complete(self, worker: int, index: int, attempt: int) -> Task | None:
        """Mark a task done; returns None for reports from stale attempts."""
        task = self.tasks[index]
        if (
            task.status is not TaskStatus.RUNNING
            or task.assigned_worker != worker
            or task.attempt != attempt
        ):
            return None
        self.in_flight[worker].remove(task)
        task.status = TaskStatus.DONE
        self.completed += 1
        return task

    def handle_worker_failure(self, failed_worker: int) -> list[Task]:
        """Return the failed worker's in-flight tasks to the front of the queue."""
        self.alive.discard(failed_worker)
        in_flight = self.in_flight.get(failed_worker, [])
        self.in_flight[failed_worker] = []
        rescheduled = reschedule(in_flight)
        if rescheduled and not self.alive:
            raise JobFailedError(
                f"worker {failed_worker} failed with {len(rescheduled)} task(s) in flight "
                "and no surviving workers"
            )
        for task in reversed(rescheduled):
            self.pending.appendleft(task)
        return rescheduled


def reschedule(in_flight: Iterable[Task]) -> list[Task]:
    """Return in-flight tasks to pending with the attempt number bumped."""
    tasks = sorted(in_flight, key=lambda t: t.index)
    for task in tasks:
        task.attempt += 1
        task.status = TaskStatus.PENDING
        task.assigned_worker = None
    return tasks


# ---------------------------------------------------------------- workers


def _worker_main(ordinal, spec: JobSpec, inbox, outbox):
    logging.getLogger(__name__).debug("worker %d up (pid %d)", ordinal, os.getpid())
    store = CorpusStore(spec.store_root)
    config = spec.simplifier or default_config()
    keyed = spec.mapper == "wordcount-map" or not spec.map_only
    tmp_dir = spec.output_dir / TEMP_DIR
    plan = spec.failure_plan
    fail_on = plan.after_tasks if plan is not None and plan.worker == ordinal else None
    finished = 0
    outbox.put(("ready", ordinal))
    while True:
        msg = inbox.get()
        if msg is None:
            return
        index, bid, attempt = msg
        try:
            if spec.task_overhead:
                time.sleep(spec.task_overhead)
            block = store.read_block(bid, spec.failed_nodes)
            lines = block_lines(block.content)
            prefix = f"{block.file_name}:{block.index}"
            if fail_on is not None and finished == fail_on:
                # stop between lines, leaving a partial attempt behind
                half = lines[: len(lines) // 2]
                write_part(tmp_dir, index, attempt,
                           format_records(map_lines(half, prefix, spec.mapper, config), keyed))
                os._exit(_WORKER_EXIT_FAILED)
            text = format_records(map_lines(lines, prefix, spec.mapper, config), keyed)
            tmp = write_part(tmp_dir, index, attempt, text)
        except BlockUnavailableError as exc:
            outbox.put(("error", ordinal, index, "unavailable", str(exc), bid))
            continue
        except Exception as exc:  # reported to the scheduler, which aborts the job
            outbox.put(("error", ordinal, index, type(exc).__name__, str(exc), bid))
            continue
        finished += 1
        outbox.put(("done", ordinal, index, attempt, str(tmp)))


def _mp_context():
    methods = mp.get_all_start_methods()
    return mp.get_context("fork" if "fork" in methods else "spawn")


class WorkerPool:
    def __init__(self, spec: JobSpec):
        ctx = _mp_context()
        self.outbox = ctx.Queue()
        self.inboxes = [ctx.SimpleQueue() for _ in range(spec.workers)]
        self.procs = [
            ctx.Process(
                target=_worker_main,
                args=(w, spec, self.inboxes[w], self.outbox),
                name=f"distnlp-worker-{w}",
                daemon=True,
            )
            for w in range(spec.workers)
        ]
        for proc in self.procs:
            proc.start()

    def send(self, worker: int, task: Task) -> None:
        self.inboxes[worker].put((task.index, task.block_id, task.attempt))

    def dead(self, candidates: Iterable[int]) -> list[int]:
        return [w for w in candidates if not self.procs[w].is_alive()]

    def shutdown(self, alive: Iterable[int], timeout: float = 5.0) -> None:
        for w in alive:
            if self.procs[w].is_alive():
                self.inboxes[w].put(None)
        deadline = time.monotonic() + timeout
        for proc in self.procs:
            proc.join(max(0.0, deadline - time.monotonic()))
            if proc.is_alive():
                proc.terminate()
                proc.join()
        self.outbox.close()
        self.outbox.join_thread()


def _drive(spec: JobSpec, scheduler: Scheduler, out_dir: Path) -> None:
    pool = WorkerPool(spec)
    idle: deque[int] = deque()
    waiting = set(range(spec.workers))
    commit_dir = out_dir / INTERMEDIATE_DIR if not spec.map_only else out_dir
    commit_dir.mkdir(parents=True, exist_ok=True)
    try:
        while not scheduler.finished:
            # dispatch only once every worker is up so load spreads evenly
            if not waiting:
                while idle and scheduler.pending:
                    w = idle.popleft()
                    if w not in scheduler.alive:
                        continue
                    pool.send(w, scheduler.claim(w))
            try:
                msg = pool.outbox.get(timeout=_POLL_SECONDS)
            except queue.Empty:
                msg = None
            if msg is not None:
                kind, w = msg[0], msg[1]
                if kind == "ready":
                    waiting.discard(w)
                    idle.append(w)
                elif kind == "done":
                    _, _, index, attempt, tmp = msg
                    task = scheduler.complete(w, index, attempt)
                    if task is None:
                        Path(tmp).unlink(missing_ok=True)
                    else:
                        task.output = commit_part(Path(tmp), commit_dir / part_name(index))
                    idle.append(w)
                elif kind == "error":
                    _, _, index, what, text, bid = msg
                    if what == "unavailable":
                        raise JobFailedError(f"block {bid} unavailable on every replica: {text}")
                    raise JobFailedError(f"task {index} (block {bid}) failed: {what}: {text}")
            for w in pool.dead(sorted(scheduler.alive)):
                waiting.discard(w)
                lost = scheduler.handle_worker_failure(w)
                logger.warning(
                    "worker %d died (exit %s); rescheduled %s",
                    w, pool.procs[w].exitcode, [t.task_id for t in lost],
                )
            if waiting and not (waiting & scheduler.alive):
                waiting.clear()
            if not scheduler.alive and not scheduler.finished:
                raise JobFailedError("all workers failed before the job finished")
    finally:
        pool.shutdown(scheduler.alive)


def _write_summary(out_dir: Path, result: JobResult) -> None:
    text = (
        f"job_id={result.job_id}\n"
        f"tasks_total={result.tasks_total}\n"
        f"tasks_retried={result.tasks_retried}\n"
        f"wall_time_ms={result.wall_time * 1000:.3f}\n"
    )
    (out_dir / JOB_SUMMARY).write_text(text, encoding="utf-8")


def read_summary(output_dir: Path) -> dict[str, str]:
    text = (Path(output_dir) / JOB_SUMMARY).read_text(encoding="utf-8")
    return dict(line.split("=", 1) for line in text.splitlines() if "=" in line)


def _reduce_stage(out_dir: Path, reducer: str) -> list[Path]:
    inter = out_dir / INTERMEDIATE_DIR

    def pairs():
        if not inter.is_dir():
            return
        for part in output_parts(inter):
            with open(part, encoding="utf-8") as fh:
                for line in fh:
                    key, _, value = line.rstrip("\n").partition("\t")
                    yield KeyValuePair(key, value)

    reduced = shuffle_reduce(pairs(), reducer)
    tmp = write_part(out_dir / TEMP_DIR, 0, 1, format_records(reduced, keyed=True))
    final = commit_part(tmp, out_dir / REDUCE_PART)
    shutil.rmtree(inter, ignore_errors=True)
    return [final]


def run_job(spec: JobSpec) -> JobResult:
    """Run a job to completion and write its output tree.

    Raises ``ConfigurationError`` for an unknown mapper or reducer before any
    task runs, ``OutputExistsError`` if the output directory is not empty and
    ``JobFailedError`` when a block has no live replica or no worker survives.
    """
    started = time.perf_counter()
    spec.validate()
    job_id = spec.job_id or f"job_{uuid.uuid4().hex[:12]}"
    store = CorpusStore(spec.store_root)
    manifests = [store.manifest(name) for name in spec.inputs]
    out_dir = spec.output_dir
    prepare_output_dir(out_dir)

    tasks = plan_tasks(manifests, job_id)
    scheduler = Scheduler(tasks, spec.workers)
    if tasks:
        _drive(spec, scheduler, out_dir)
    shutil.rmtree(out_dir / TEMP_DIR, ignore_errors=True)

    if spec.map_only:
        files = [t.output for t in tasks]
    else:
        files = _reduce_stage(out_dir, spec.reducer)
    shutil.rmtree(out_dir / TEMP_DIR, ignore_errors=True)

    result = JobResult(
        job_id=job_id,
        tasks_total=len(tasks),
        tasks_retried=scheduler.tasks_retried,
        wall_time=time.perf_counter() - started,
        output_files=files,
    )
    _write_summary(out_dir, result)
    logger.info(
        "%s: %d tasks (%d retried) in %.3fs",
        job_id, result.tasks_total, result.tasks_retried, result.wall_time,
    )
    return result
