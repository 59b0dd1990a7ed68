"""Sequential single-process baseline: read, simplify and write line by line."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

from .errors import CorpusDecodeError
from .simplifier import SimplifierConfig, default_config, simplify_line

BUFFER_SIZE = 64 * 1024


@dataclass
class ConsoleRun:
    input_paths: list[Path]
    output_path: Path
    lines_processed: int = 0
    wall_time: float = 0.0
    per_file_lines: list[int] = field(default_factory=list)


def iter_lines(path: Path) -> Iterator[str]:
    """Yield the lines of a UTF-8 file with ``\\r\\n`` and ``\\r`` read as ``\\n``.

    Decode errors report the absolute byte offset within the file.
    """
    offset = 0
    with open(path, "rb", buffering=BUFFER_SIZE) as fh:
        for raw in fh:
            try:
                text = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise CorpusDecodeError(offset + exc.start, str(path), exc.reason) from None
            offset += len(raw)
            if "\r" in text:
                text = text.replace("\r\n", "\n").replace("\r", "\n")
                parts = text.split("\n")
                if text.endswith("\n"):
                    parts.pop()
                yield from parts
            else:
                yield text[:-1] if text.endswith("\n") else text


def run_sequential(
    input_paths: Sequence,
    output_path,
    config: SimplifierConfig | None = None,
) -> ConsoleRun:
    config = config or default_config()
    paths = [Path(p) for p in input_paths]
    run = ConsoleRun(paths, Path(output_path))
    started = time.perf_counter()
    with open(output_path, "w", encoding="utf-8", newline="\n", buffering=BUFFER_SIZE) as out:
        for path in paths:
            count = 0
            for line in iter_lines(path):
                out.write(simplify_line(line, config))
                out.write("\n")
                count += 1
            run.per_file_lines.append(count)
            run.lines_processed += count
    run.wall_time = time.perf_counter() - started
    return run
