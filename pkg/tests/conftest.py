import random
from pathlib import Path

import pytest

from distnlp.store import CorpusStore, StoreConfig

GOLDEN_SENTENCE = (
    "Feshe itiraz davası, işverence geçerli sebep gösterilmeden ya da kanunda "
    "öngörülen usule uyulmadan yapılan fesihlere karşı işçilerin başvurabileceği "
    "bir itiraz yolu olarak karşımıza çıkmaktadır."
)
GOLDEN_PAIRS = [
    ("davası", "dava"),
    ("işverence", "işveren"),
    ("kanunda", "kanun"),
    ("öngörülen", "öngör"),
    ("usule", "usul"),
    ("fesihlere", "fesih"),
    ("işçilerin", "işçi"),
    ("yolu", "yol"),
]

ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(line)


def random_text(rng: random.Random, n_lines: int, max_len: int = 120) -> str:
    alphabet = "abcçdefgğhıijklmnoöprsştuüvyzABCÇİIÖŞÜ .,;:!?'-0123456789"
    lines = []
    for _ in range(n_lines):
        k = rng.randint(0, max_len)
        lines.append("".join(rng.choice(alphabet) for _ in range(k)))
    return "\n".join(lines) + ("\n" if rng.random() < 0.7 else "")


def fixed_block_text(n_blocks, lines_per_block=16, width=63, seed=0):
    """Text of fixed-width lines that splits into exactly ``n_blocks`` blocks."""
    rng = random.Random(seed)
    words = GOLDEN_SENTENCE.split() + ["İşçilerin", "yolu", "ya", "da"]
    lines = []
    for _ in range(n_blocks * lines_per_block):
        s = ""
        while len(s.encode()) < width:
            s += rng.choice(words) + " "
        s = s.encode()[:width].decode("utf-8", "ignore")
        lines.append(s + " " * (width - len(s.encode())) + "\n")
    text = "".join(lines)
    block_size = len("".join(lines[:lines_per_block]).encode())
    return text, block_size


def tree_bytes(out: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.name != "_JOB"}


@pytest.fixture
def store(tmp_path):
    return CorpusStore(tmp_path / "dfs", StoreConfig(block_size=256, replication=3, node_count=7))
