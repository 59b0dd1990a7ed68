"""Line-aligned block storage with replica placement across logical nodes.

A store root holds one directory per node plus a manifest directory::

    <root>/node-<k>/<file_name>.block-<index>
    <root>/manifests/<file_name>.manifest

Manifests are plain text: a ``file_name total_bytes`` header followed by one
``index byte_len node,node,...`` line per block.
"""

from __future__ import annotations

import io
import logging
import os
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable

from .errors import (
    BlockUnavailableError,
    ConfigurationError,
    CorpusDecodeError,
    FileExistsInStore,
    FileNotInStore,
    StoreError,
)

logger = logging.getLogger(__name__)

MiB = 1 << 20
DEFAULT_BLOCK_SIZE = 64 * MiB
DEFAULT_REPLICATION = 3
DEFAULT_NODE_COUNT = 7

# config keys; the dfs.* spellings are the Hadoop names
_CONFIG_KEYS = {
    "dfs.block.size": "block_size",
    "dfs.blocksize": "block_size",
    "store.block.size": "block_size",
    "dfs.replication": "replication",
    "store.replication": "replication",
    "store.nodes": "node_count",
}

_BAD_NAME = re.compile(r"[\s/\\:]")


@dataclass(frozen=True)
class StoreConfig:
    block_size: int = DEFAULT_BLOCK_SIZE
    replication: int = DEFAULT_REPLICATION
    node_count: int = DEFAULT_NODE_COUNT

    def __post_init__(self):
        if self.block_size < 1:
            raise ConfigurationError(f"block_size must be >= 1, got {self.block_size}")
        if self.replication < 1:
            raise ConfigurationError(f"replication must be >= 1, got {self.replication}")
        if self.node_count < 1:
            raise ConfigurationError(f"node_count must be >= 1, got {self.node_count}")

    @property
    def effective_replication(self) -> int:
        return min(self.replication, self.node_count)

    @classmethod
    def from_mapping(cls, values: dict, base: StoreConfig | None = None) -> StoreConfig:
        base = base or cls()
        kwargs = {
            "block_size": base.block_size,
            "replication": base.replication,
            "node_count": base.node_count,
        }
        for key, raw in values.items():
            name = _CONFIG_KEYS.get(key.strip())
            if name is None:
                raise ConfigurationError(f"unknown store config key {key!r}")
            try:
                kwargs[name] = int(str(raw).strip())
            except ValueError:
                raise ConfigurationError(f"{key} must be an integer, got {raw!r}") from None
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path, base: StoreConfig | None = None) -> StoreConfig:
        """Load ``key=value`` properties, or Hadoop-style XML for ``*.xml``."""
        path = Path(path)
        values = {}
        if path.suffix == ".xml":
            for prop in ET.parse(path).getroot().iter("property"):
                values[prop.findtext("name", "").strip()] = prop.findtext("value", "")
        else:
            for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigurationError(f"{path}:{lineno}: expected key=value")
                key, value = line.split("=", 1)
                values[key.strip()] = value
        return cls.from_mapping(values, base)


@dataclass(frozen=True)
class Block:
    block_id: str
    file_name: str
    index: int
    byte_len: int
    line_count: int
    content: str


@dataclass(frozen=True)
class BlockEntry:
    block_id: str
    index: int
    byte_len: int
    placements: tuple[int, ...]


@dataclass
class BlockManifest:
    file_name: str
    total_bytes: int
    blocks: list[BlockEntry] = field(default_factory=list)

    def to_text(self) -> str:
        lines = [f"{self.file_name} {self.total_bytes}"]
        for entry in self.blocks:
            nodes = ",".join(str(n) for n in entry.placements)
            lines.append(f"{entry.index} {entry.byte_len} {nodes}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> BlockManifest:
        rows = text.splitlines()
        if not rows:
            raise StoreError("empty manifest")
        file_name, total = rows[0].split()
        manifest = cls(file_name, int(total))
        for row in rows[1:]:
            if not row.strip():
                continue
            index, byte_len, nodes = row.split()
            manifest.blocks.append(
                BlockEntry(
                    block_id(file_name, int(index)),
                    int(index),
                    int(byte_len),
                    tuple(int(n) for n in nodes.split(",")),
                )
            )
        return manifest


def block_id(file_name: str, index: int) -> str:
    return f"{file_name}:{index}"


def parse_block_id(bid: str) -> tuple[str, int]:
    file_name, _, index = bid.rpartition(":")
    if not file_name or not index.isdigit():
        raise StoreError(f"malformed block id {bid!r}")
    return file_name, int(index)


def normalize_newlines(data: bytes) -> bytes:
    return data.replace(b"\r\n", b"\n").replace(b"\r", b"\n")


def decode_utf8(data: bytes, source=None, base_offset: int = 0) -> str:
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CorpusDecodeError(base_offset + exc.start, source, exc.reason) from None


def _read_all(content) -> bytes:
    if isinstance(content, str):
        return content.encode("utf-8")
    if isinstance(content, (bytes, bytearray, memoryview)):
        return bytes(content)
    data = content.read()
    if isinstance(data, str):
        return data.encode("utf-8")
    return data


def block_spans(data: bytes, block_size: int) -> list[tuple[int, int]]:
    """Greedy line-aligned ``(start, end)`` byte spans over ``data``."""
    if block_size < 1:
        raise ConfigurationError(f"block_size must be >= 1, got {block_size}")
    spans = []
    pos, n = 0, len(data)
    while pos < n:
        limit = pos + block_size
        if limit >= n:
            end = n
        else:
            cut = data.rfind(b"\n", pos, limit)
            if cut >= 0:
                end = cut + 1
            else:
                # oversized line: keep it whole in its own block
                nl = data.find(b"\n", pos)
                end = n if nl < 0 else nl + 1
        spans.append((pos, end))
        pos = end
    return spans


def split_file(
    content: bytes | str | BinaryIO,
    block_size: int,
    file_name: str = "",
) -> list[Block]:
    """Split UTF-8 text into line-aligned blocks of at most ``block_size`` bytes.

    Newlines are normalized to ``\\n`` first. Each block holds the longest run
    of remaining whole lines that fits; a single line longer than
    ``block_size`` gets a block of its own.
    """
    data = _read_all(content)
    decode_utf8(data, file_name or None)
    data = normalize_newlines(data)
    blocks = []
    for index, (start, end) in enumerate(block_spans(data, block_size)):
        chunk = data[start:end]
        text = chunk.decode("utf-8")
        lines = chunk.count(b"\n") + (0 if chunk.endswith(b"\n") else 1)
        blocks.append(
            Block(block_id(file_name, index), file_name, index, len(chunk), lines, text)
        )
    return blocks


def place_replicas(block_index: int, config: StoreConfig) -> list[int]:
    """Round-robin placement: block ``i`` lands on nodes ``i, i+1, ...`` mod node_count."""
    return [(block_index + k) % config.node_count for k in range(config.effective_replication)]


def check_file_name(file_name: str) -> None:
    if not file_name or file_name.startswith(".") or _BAD_NAME.search(file_name):
        raise StoreError(
            f"invalid file name {file_name!r}: no whitespace, ':', path separators or leading '.'"
        )


class CorpusStore:
    """Directory-backed block store; each ``node-<k>`` directory is one data node."""

    def __init__(self, root, config: StoreConfig | None = None):
        self.root = Path(root)
        self.config = config or StoreConfig()
        self._manifests: dict[str, BlockManifest] = {}

    def node_dir(self, node: int) -> Path:
        return self.root / f"node-{node}"

    @property
    def manifest_dir(self) -> Path:
        return self.root / "manifests"

    def manifest_path(self, file_name: str) -> Path:
        return self.manifest_dir / f"{file_name}.manifest"

    def block_path(self, node: int, file_name: str, index: int) -> Path:
        return self.node_dir(node) / f"{file_name}.block-{index}"

    def exists(self, file_name: str) -> bool:
        return self.manifest_path(file_name).exists()

    def put_file(self, file_name: str, content, config: StoreConfig | None = None) -> BlockManifest:
        config = config or self.config
        check_file_name(file_name)
        if self.exists(file_name):
            raise FileExistsInStore(f"{file_name} already exists in store {self.root}")
        blocks = split_file(content, config.block_size, file_name)
        manifest = BlockManifest(file_name, sum(b.byte_len for b in blocks))
        try:
            self.manifest_dir.mkdir(parents=True, exist_ok=True)
            for block in blocks:
                nodes = place_replicas(block.index, config)
                payload = block.content.encode("utf-8")
                for node in nodes:
                    path = self.block_path(node, file_name, block.index)
                    path.parent.mkdir(parents=True, exist_ok=True)
                    path.write_bytes(payload)
                manifest.blocks.append(
                    BlockEntry(block.block_id, block.index, block.byte_len, tuple(nodes))
                )
            # manifest last: a file is visible only once all replicas exist
            tmp = self.manifest_path(file_name).with_suffix(".manifest.tmp")
            tmp.write_text(manifest.to_text(), encoding="utf-8")
            os.replace(tmp, self.manifest_path(file_name))
        except OSError as exc:
            raise StoreError(f"failed to store {file_name}: {exc}") from exc
        self._manifests[file_name] = manifest
        logger.debug("stored %s as %d blocks", file_name, len(blocks))
        return manifest

    def put_path(self, path, file_name: str | None = None, config: StoreConfig | None = None):
        path = Path(path)
        try:
            data = path.read_bytes()
        except OSError as exc:
            raise StoreError(f"cannot read {path}: {exc}") from exc
        decode_utf8(data, str(path))
        return self.put_file(file_name or path.name, data, config)

    def manifest(self, file_name: str) -> BlockManifest:
        cached = self._manifests.get(file_name)
        if cached is not None:
            return cached
        path = self.manifest_path(file_name)
        try:
            text = path.read_text(encoding="utf-8")
        except FileNotFoundError:
            raise FileNotInStore(f"{file_name} not found in store {self.root}") from None
        manifest = BlockManifest.from_text(text)
        self._manifests[file_name] = manifest
        return manifest

    def list_files(self) -> list[str]:
        if not self.manifest_dir.is_dir():
            return []
        return sorted(p.name[: -len(".manifest")] for p in self.manifest_dir.glob("*.manifest"))

    def get_block(self, bid: str, failed_nodes: Iterable[int] = ()) -> str:
        """Content of block ``bid`` read from the first replica not on a failed node."""
        return self.read_block(bid, failed_nodes).content

    def read_block(self, bid: str, failed_nodes: Iterable[int] = ()) -> Block:
        file_name, index = parse_block_id(bid)
        manifest = self.manifest(file_name)
        if index >= len(manifest.blocks):
            raise StoreError(f"block {bid} not in manifest of {file_name}")
        entry = manifest.blocks[index]
        failed = set(failed_nodes)
        for node in entry.placements:
            if node in failed:
                continue
            try:
                payload = self.block_path(node, file_name, index).read_bytes()
            except FileNotFoundError:
                logger.warning("replica of %s missing on node %d", bid, node)
                continue
            text = payload.decode("utf-8")
            lines = payload.count(b"\n") + (0 if payload.endswith(b"\n") else 1)
            return Block(bid, file_name, index, len(payload), lines, text)
        raise BlockUnavailableError(bid, entry.placements)

    def cat(self, file_name: str, failed_nodes: Iterable[int] = ()) -> str:
        buf = io.StringIO()
        for entry in self.manifest(file_name).blocks:
            buf.write(self.get_block(entry.block_id, failed_nodes))
        return buf.getvalue()
