import io
import random

import pytest
from hypothesis import given, settings, strategies as st

from distnlp.errors import (
    BlockUnavailableError,
    ConfigurationError,
    CorpusDecodeError,
    FileExistsInStore,
    FileNotInStore,
)
from distnlp.store import (
    MiB,
    BlockManifest,
    CorpusStore,
    StoreConfig,
    place_replicas,
    split_file,
)

from conftest import random_text


def oracle_blocks(text: str, block_size: int) -> list[str]:
    """Single pass line accumulator: close the block when the next line would overflow it."""
    blocks, current, size = [], [], 0
    for line in io.StringIO(text, newline=""):
        n = len(line.encode("utf-8"))
        if current and size + n > block_size:
            blocks.append("".join(current))
            current, size = [], 0
        current.append(line)
        size += n
    if current:
        blocks.append("".join(current))
    return blocks


def test_oracle_sanity():
    assert oracle_blocks("ab\ncd\nef", 6) == ["ab\ncd\n", "ef"]
    assert oracle_blocks("abcdefgh\nx\n", 4) == ["abcdefgh\n", "x\n"]


def test_empty_stream():
    assert split_file(b"", 10) == []
    assert split_file(io.BytesIO(b""), 10) == []


def test_small_file_single_block_default_size():
    text = ("kanunda öngörülen usule uyulmadan\n" * (10 * MiB // 35))
    blocks = split_file(text, StoreConfig().block_size)
    assert len(blocks) == 1
    assert blocks[0].content == text
    assert blocks[0].byte_len == len(text.encode())


def test_matches_greedy_oracle_1000_lines():
    rng = random.Random(11)
    lines = []
    for i in range(1000):
        n = rng.randint(900, 1150)
        lines.append(("işçi " * 300)[:n].rstrip() + f" {i}\n")
    text = "".join(lines)
    blocks = split_file(text, 256 * 1024)
    assert "".join(b.content for b in blocks) == text
    assert [b.content for b in blocks] == oracle_blocks(text, 256 * 1024)
    assert [b.index for b in blocks] == list(range(len(blocks)))


def test_oversized_line_kept_whole():
    text = "x" * 50 + "\n" + "short\n" + "y" * 30
    blocks = split_file(text, 10)
    assert [b.content for b in blocks] == ["x" * 50 + "\n", "short\n", "y" * 30]
    assert blocks[0].line_count == 1 and blocks[0].byte_len == 51


def test_byte_not_char_boundaries():
    # each "ş" is two bytes: 3 chars + newline = 7 bytes per line
    text = "şşş\n" * 4
    blocks = split_file(text, 14)
    assert [b.byte_len for b in blocks] == [14, 14]


def test_newlines_normalized():
    blocks = split_file(b"a\r\nb\rc\n", 100)
    assert blocks[0].content == "a\nb\nc\n"
    assert blocks[0].line_count == 3


def test_invalid_utf8_names_offset():
    with pytest.raises(CorpusDecodeError) as err:
        split_file(b"abc\n\xffdef", 10)
    assert err.value.offset == 4
    assert "offset 4" in str(err.value)


def test_block_size_must_be_positive():
    with pytest.raises(ConfigurationError):
        split_file("a\n", 0)
    with pytest.raises(ConfigurationError):
        StoreConfig(block_size=0)
    with pytest.raises(ConfigurationError):
        StoreConfig(replication=0)


@settings(max_examples=150, deadline=None)
@given(
    text=st.text(alphabet=st.sampled_from("ab ğüİ\n\n"), max_size=400),
    block_size=st.integers(1, 64),
)
def test_split_properties(text, block_size):
    blocks = split_file(text, block_size)
    assert "".join(b.content for b in blocks) == text
    for b in blocks[:-1]:
        assert b.content.endswith("\n")
    for b in blocks:
        assert b.byte_len == len(b.content.encode())
        assert b.byte_len <= block_size or b.line_count == 1
    assert [b.content for b in blocks] == oracle_blocks(text, block_size)


# ---------------------------------------------------------------- placement


def test_placement_base_case():
    assert place_replicas(0, StoreConfig()) == [0, 1, 2]


def test_placement_clamped():
    nodes = place_replicas(0, StoreConfig(replication=3, node_count=2))
    assert len(nodes) == 2 and len(set(nodes)) == 2


def test_placement_wraps():
    cfg = StoreConfig(replication=3, node_count=7)
    assert place_replicas(5, cfg) == [5 % 7, 6 % 7, 7 % 7]


@given(st.integers(0, 10_000), st.integers(1, 6), st.integers(1, 12))
def test_placement_properties(index, replication, nodes):
    cfg = StoreConfig(block_size=1, replication=replication, node_count=nodes)
    got = place_replicas(index, cfg)
    assert len(got) == min(replication, nodes) == len(set(got))
    assert all(0 <= n < nodes for n in got)
    assert got == place_replicas(index, cfg)


# ---------------------------------------------------------------- store


def test_defaults():
    cfg = StoreConfig()
    assert (cfg.block_size, cfg.replication, cfg.node_count) == (64 * MiB, 3, 7)


def test_put_roundtrip(store):
    text = random_text(random.Random(3), 200)
    store.put_file("a.txt", text)
    assert store.cat("a.txt") == text


def test_put_manifest_1mib(tmp_path):
    rng = random.Random(5)
    text = random_text(rng, 17000, max_len=120)
    while len(text.encode()) < MiB:
        text += random_text(rng, 100)
    data = text.encode()[:MiB]
    data = data[: data.rfind(b"\n") + 1]
    text = data.decode()
    cfg = StoreConfig(block_size=256 * 1024, replication=3, node_count=7)
    m = CorpusStore(tmp_path, cfg).put_file("big", text)
    assert len(m.blocks) == len(oracle_blocks(text, 256 * 1024))
    assert len(m.blocks) in (4, 5)
    assert sum(b.byte_len for b in m.blocks) == m.total_bytes == len(data)
    for entry in m.blocks:
        assert len(set(entry.placements)) == 3


def test_manifest_text_roundtrip(store):
    m = store.put_file("x", "a\nb\n" * 100)
    text = store.manifest_path("x").read_text()
    assert text.splitlines()[0] == f"x {m.total_bytes}"
    assert text.splitlines()[1].split()[2] == "0,1,2"
    assert BlockManifest.from_text(text) == m


def test_duplicate_put(store):
    store.put_file("a", "x\n")
    with pytest.raises(FileExistsInStore):
        store.put_file("a", "y\n")


def test_bad_names(store):
    for name in ("", "a b", "a/b", "a:b", ".hidden"):
        with pytest.raises(Exception):
            store.put_file(name, "x\n")


def test_missing_file(store):
    with pytest.raises(FileNotInStore):
        store.manifest("nope")


def test_layout_on_disk(store):
    m = store.put_file("f", "line\n" * 200)
    for entry in m.blocks:
        for node in entry.placements:
            assert (store.root / f"node-{node}" / f"f.block-{entry.index}").is_file()


def test_get_block_failover(store):
    m = store.put_file("f", "abc\n" * 100)
    entry = m.blocks[0]
    first = store.get_block(entry.block_id)
    assert store.get_block(entry.block_id, {entry.placements[0]}) == first
    # prove the second replica served it
    store.block_path(entry.placements[0], "f", 0).write_text("corrupted\n")
    assert store.get_block(entry.block_id, {entry.placements[0]}) == first
    assert store.get_block(entry.block_id) == "corrupted\n"


def test_get_block_exhausted(store):
    m = store.put_file("f", "abc\n")
    entry = m.blocks[0]
    with pytest.raises(BlockUnavailableError) as err:
        store.get_block(entry.block_id, set(entry.placements))
    assert entry.block_id in str(err.value)


def test_reopen_reads_manifest(store):
    store.put_file("f", "abc\n" * 300)
    again = CorpusStore(store.root)
    assert again.list_files() == ["f"]
    assert again.cat("f") == "abc\n" * 300


def test_config_file_aliases(tmp_path):
    props = tmp_path / "store.properties"
    props.write_text("dfs.block.size = 1024\ndfs.replication=2  # two copies\nstore.nodes=4\n")
    assert StoreConfig.from_file(props) == StoreConfig(1024, 2, 4)
    xml = tmp_path / "hdfs-site.xml"
    xml.write_text(
        "<configuration>"
        "<property><name>dfs.block.size</name><value>2048</value></property>"
        "<property><name>dfs.replication</name><value>1</value></property>"
        "</configuration>"
    )
    assert StoreConfig.from_file(xml) == StoreConfig(2048, 1, 7)
    with pytest.raises(ConfigurationError):
        StoreConfig.from_mapping({"dfs.bogus": 1})
