import pytest

from distnlp.bench import CorpusSpec, generate_corpus
from distnlp.console import iter_lines, run_sequential
from distnlp.engine import JobSpec, read_output, run_job
from distnlp.errors import CorpusDecodeError
from distnlp.store import CorpusStore, StoreConfig

from conftest import GOLDEN_SENTENCE, GOLDEN_PAIRS


def test_empty_file(tmp_path):
    src = tmp_path / "e.txt"
    src.write_bytes(b"")
    run = run_sequential([src], tmp_path / "out.txt")
    assert run.lines_processed == 0
    assert (tmp_path / "out.txt").read_bytes() == b""
    assert run.wall_time > 0


def test_golden_file(tmp_path):
    src = tmp_path / "t.txt"
    src.write_text(GOLDEN_SENTENCE + "\n", encoding="utf-8")
    run = run_sequential([src], tmp_path / "out.txt")
    assert run.lines_processed == 1
    out = (tmp_path / "out.txt").read_text(encoding="utf-8").split()
    idx = [out.index(s) for _, s in GOLDEN_PAIRS]
    assert idx == sorted(idx) and "ya" not in out and "da" not in out


def test_order_and_blank_lines(tmp_path):
    src = tmp_path / "t.txt"
    src.write_text("kanunda\n\nya da\nyolu", encoding="utf-8")
    run = run_sequential([src], tmp_path / "out.txt")
    assert (tmp_path / "out.txt").read_text(encoding="utf-8") == "kanun\n\n\nyol\n"
    assert run.lines_processed == 4


def test_line_endings_match_store(tmp_path):
    raw = "a kanunda\r\nb yolu\rc usule\n".encode()
    assert list(iter_lines_of(tmp_path, raw)) == ["a kanunda", "b yolu", "c usule"]


def iter_lines_of(tmp_path, raw):
    p = tmp_path / "raw.txt"
    p.write_bytes(raw)
    return iter_lines(p)


def test_missing_path(tmp_path):
    with pytest.raises(OSError, match="nope.txt"):
        run_sequential([tmp_path / "nope.txt"], tmp_path / "out.txt")


def test_invalid_utf8_offset(tmp_path):
    src = tmp_path / "bad.txt"
    src.write_bytes(b"first line\nok \xc3\x28\n")
    with pytest.raises(CorpusDecodeError) as err:
        run_sequential([src], tmp_path / "out.txt")
    assert err.value.offset == 14
    assert "bad.txt" in str(err.value)


def test_matches_engine_one_worker(tmp_path):
    (src,) = generate_corpus(CorpusSpec(1 << 20, 1, seed=3), tmp_path / "c")
    run = run_sequential([src], tmp_path / "console.txt")
    store = CorpusStore(tmp_path / "dfs", StoreConfig(block_size=128 * 1024))
    store.put_path(src)
    run_job(JobSpec(store.root, [src.name], tmp_path / "job", workers=1))
    assert read_output(tmp_path / "job") == (tmp_path / "console.txt").read_bytes()
    assert run.lines_processed == src.read_bytes().count(b"\n")


def test_deterministic(tmp_path):
    (src,) = generate_corpus(CorpusSpec(64 * 1024, 1, seed=1), tmp_path / "c")
    run_sequential([src], tmp_path / "a.txt")
    run_sequential([src], tmp_path / "b.txt")
    assert (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()


def test_crlf_input_matches_engine(tmp_path):
    src = tmp_path / "crlf.txt"
    src.write_bytes("işçilerin yolu\r\nkanunda\r\n\r\nson".encode())
    run_sequential([src], tmp_path / "console.txt")
    store = CorpusStore(tmp_path / "dfs", StoreConfig(block_size=8))
    store.put_path(src)
    run_job(JobSpec(store.root, [src.name], tmp_path / "job", workers=2))
    assert read_output(tmp_path / "job") == (tmp_path / "console.txt").read_bytes()
