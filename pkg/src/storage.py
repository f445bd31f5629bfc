"""
Storage backend for built indexes
Currently implements a single-file binary container with checksummed sections
"""
import json
import logging
import os
import zlib
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import List, Optional, Tuple

from pydantic import ValidationError

from src.codec import BlobReader, BlobWriter
from src.doclist import DocIndex
from src.exceptions import ContainerNotFoundError, CorruptContainerError, GramDocError, StorageError
from src.grammar import Grammar
from src.grid import Grid
from src.index import PatternIndex
from src.models import IndexConfig


logger = logging.getLogger(__name__)

MAGIC = b"GDLX"
FORMAT_VERSION = 1
SECTION_ORDER = (b"META", b"GRAM", b"GRID", b"PIDX", b"DOCS")


@dataclass
class IndexBundle:
    """A complete index: alphabet, build configuration and the grammar, pattern and listing layers"""

    alphabet: List[int]
    config: IndexConfig
    grammar: Grammar
    pidx: PatternIndex
    dix: DocIndex
    provenance: str = "ingested"

    @property
    def doc_count(self) -> int:
        return self.grammar.doc_count

    def encode(self, data: bytes) -> Optional[List[int]]:
        """Pattern bytes to symbols; None when some byte never occurs in the collection"""
        lookup = {b: k for k, b in enumerate(self.alphabet, start=1)}
        symbols = []
        for b in data:
            if b not in lookup:
                return None
            symbols.append(lookup[b])
        return symbols

    def meta(self) -> dict:
        return {
            "format": FORMAT_VERSION,
            "alphabet": self.alphabet,
            "config": self.config.model_dump(mode="json"),
            "documents": self.doc_count,
            "total_length": self.grammar.total_length,
            "provenance": self.provenance,
        }


@dataclass(frozen=True)
class SectionInfo:
    tag: str
    length: int
    crc32: int


class IndexStore(ABC):
    """Abstract base class for index storage backends"""

    @abstractmethod
    def save(self, bundle: IndexBundle, name: str) -> str:
        """Save an index and return where it went"""
        pass

    @abstractmethod
    def load(self, name: str) -> IndexBundle:
        """Load a stored index"""
        pass

    @abstractmethod
    def exists(self, name: str) -> bool:
        """Whether an index is stored under name"""
        pass

    @abstractmethod
    def sections(self, name: str) -> List[SectionInfo]:
        """Section table of a stored index"""
        pass


class FileIndexStore(IndexStore):
    """One container file per index: magic, section table, sections, whole-file crc32"""

    def __init__(self, root_dir: Optional[str] = None):
        """Initialize with an optional directory that relative names resolve against"""
        self.root_dir = root_dir

    def _path(self, name: str) -> str:
        if self.root_dir and not os.path.isabs(name):
            return os.path.join(self.root_dir, name)
        return name

    def exists(self, name: str) -> bool:
        return os.path.isfile(self._path(name))

    # encoding

    def encode(self, bundle: IndexBundle) -> bytes:
        payloads: List[Tuple[bytes, bytes]] = []

        meta = json.dumps(bundle.meta(), sort_keys=True).encode("utf-8")
        payloads.append((b"META", meta))

        w = BlobWriter()
        bundle.grammar.dump(w)
        payloads.append((b"GRAM", w.getvalue()))

        w = BlobWriter()
        w.varint(1 if bundle.pidx.grid is not None else 0)
        if bundle.pidx.grid is not None:
            bundle.pidx.grid.dump(w)
        payloads.append((b"GRID", w.getvalue()))

        w = BlobWriter()
        bundle.pidx.dump(w)
        payloads.append((b"PIDX", w.getvalue()))

        w = BlobWriter()
        bundle.dix.dump(w)
        payloads.append((b"DOCS", w.getvalue()))

        out = BlobWriter()
        out.tag(MAGIC, FORMAT_VERSION)
        out.u64(len(payloads))
        for tag, data in payloads:
            out.append(tag)
            out.u64(len(data))
            out.u64(zlib.crc32(data))
        for _, data in payloads:
            out.append(data)
        body = out.getvalue()
        return body + zlib.crc32(body).to_bytes(8, "little")

    def save(self, bundle: IndexBundle, name: str) -> str:
        """Save the container, creating parent directories"""
        path = self._path(name)
        data = self.encode(bundle)
        try:
            os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
            with open(path, "wb") as f:
                f.write(data)
        except OSError as e:
            raise StorageError(f"Cannot write index {path}: {e}") from e
        logger.info(f"saved index to {path} ({len(data)} bytes)")
        return path

    # decoding

    def _read(self, name: str) -> bytes:
        path = self._path(name)
        if not os.path.exists(path):
            raise ContainerNotFoundError(f"Index {path} not found")
        try:
            with open(path, "rb") as f:
                return f.read()
        except OSError as e:
            raise StorageError(f"Cannot read index {path}: {e}") from e

    def _split(self, data: bytes) -> List[Tuple[SectionInfo, bytes]]:
        if len(data) < 8 + 5 or data[:4] != MAGIC:
            raise CorruptContainerError("Not an index container (bad magic)")
        body, trailer = data[:-8], data[-8:]
        if zlib.crc32(body) != int.from_bytes(trailer, "little"):
            raise CorruptContainerError("Container checksum mismatch")
        r = BlobReader(body)
        r.expect_tag(MAGIC, FORMAT_VERSION)
        table = []
        for _ in range(r.u64()):
            tag = r.read(4)
            table.append(SectionInfo(tag=tag.decode("ascii", errors="replace"), length=r.u64(), crc32=r.u64()))
        sections = []
        for info in table:
            payload = r.read(info.length)
            if zlib.crc32(payload) != info.crc32:
                raise CorruptContainerError(f"Section {info.tag} checksum mismatch")
            sections.append((info, payload))
        if not r.exhausted:
            raise CorruptContainerError("Trailing bytes after the last section")
        if tuple(info.tag.encode() for info, _ in sections) != SECTION_ORDER:
            raise CorruptContainerError(f"Unexpected section table {[info.tag for info, _ in sections]}")
        return sections

    def sections(self, name: str) -> List[SectionInfo]:
        return [info for info, _ in self._split(self._read(name))]

    def decode(self, data: bytes) -> IndexBundle:
        sections = dict((info.tag, payload) for info, payload in self._split(data))
        try:
            meta = json.loads(sections["META"].decode("utf-8"))
            if meta.get("format") != FORMAT_VERSION:
                raise CorruptContainerError(f"Unsupported index format {meta.get('format')}")
            config = IndexConfig(**meta["config"])

            r = BlobReader(sections["GRAM"])
            grammar = Grammar.load(r)
            _finish(r, "GRAM")

            r = BlobReader(sections["GRID"])
            grid = Grid.load(r) if r.varint() else None
            _finish(r, "GRID")

            r = BlobReader(sections["PIDX"])
            pidx = PatternIndex.load(r, grammar, config, grid)
            _finish(r, "PIDX")

            r = BlobReader(sections["DOCS"])
            dix = DocIndex.load(r, pidx)
            _finish(r, "DOCS")
        except CorruptContainerError:
            raise
        except (GramDocError, ValidationError, ValueError, KeyError) as e:
            raise CorruptContainerError(f"Malformed index container: {e}") from e

        return IndexBundle(
            alphabet=list(meta["alphabet"]),
            config=config,
            grammar=grammar,
            pidx=pidx,
            dix=dix,
            provenance=meta.get("provenance", "ingested"),
        )

    def load(self, name: str) -> IndexBundle:
        bundle = self.decode(self._read(name))
        logger.info(f"loaded index {self._path(name)}: D={bundle.doc_count}")
        return bundle


def _finish(r: BlobReader, tag: str) -> None:
    if not r.exhausted:
        raise CorruptContainerError(f"Section {tag} has trailing bytes")
