"""
Document collections: synthetic generation under the edit model, file
ingestion, the collection and script text formats, and brute-force oracles
"""
import logging
import os
from collections import defaultdict
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from src.exceptions import CollectionError, DomainError
from src.grammar import EditSimulator, normalize_script
from src.models import Edit, EditModel, EditScript


logger = logging.getLogger(__name__)

SCRIPT_MAGIC = "gramdoc-script 1"
EDIT_KINDS = ("insert", "delete", "substitute")


class Collection(BaseModel):
    """D documents over symbols 1..sigma; symbol k stands for byte alphabet[k - 1]"""

    documents: List[List[int]] = Field(..., description="Documents as symbol sequences")
    alphabet: List[int] = Field(..., description="Byte value of each symbol, ascending")
    provenance: Literal["generated", "ingested"] = Field(default="ingested")
    seed: Optional[int] = Field(default=None, description="Generator seed, when generated")
    script: Optional[EditScript] = Field(default=None, description="Edit script, when generated")
    base: Optional[List[int]] = Field(default=None, description="Base document, when generated")

    @property
    def sigma(self) -> int:
        return len(self.alphabet)

    @property
    def doc_count(self) -> int:
        return len(self.documents)

    @property
    def total_length(self) -> int:
        """N"""
        return sum(len(doc) for doc in self.documents)

    def boundaries(self) -> List[int]:
        """Global 0-based start offset of each document, plus N"""
        bounds = [0]
        for doc in self.documents:
            bounds.append(bounds[-1] + len(doc))
        return bounds

    def encode(self, data: bytes) -> Optional[List[int]]:
        """Bytes to symbols; None when a byte is outside the alphabet"""
        lookup = {b: k for k, b in enumerate(self.alphabet, start=1)}
        symbols = []
        for b in data:
            sym = lookup.get(b)
            if sym is None:
                return None
            symbols.append(sym)
        return symbols

    def decode(self, symbols: Sequence[int]) -> bytes:
        return bytes(self.alphabet[s - 1] for s in symbols)

    def document_bytes(self, d: int) -> bytes:
        return self.decode(self.documents[d - 1])


class VersionTree:
    """
    Rooted tree of versions; node 1 is the root. Documents are numbered by
    preorder, so the documents of a subtree form one contiguous range.
    """

    def __init__(self, parents: Sequence[int]):
        # parents[v - 1] is the parent of node v (0 for the root)
        self.parents = list(parents)
        self.size = len(self.parents)
        if not self.size or self.parents[0] != 0:
            raise DomainError("version tree needs node 1 as its root")
        children: Dict[int, List[int]] = defaultdict(list)
        for v, parent in enumerate(self.parents[1:], start=2):
            if not 1 <= parent < v:
                raise DomainError(f"node {v} has invalid parent {parent}")
            children[parent].append(v)
        self._children = children
        self.preorder: List[int] = [0] * (self.size + 1)
        self.subtree: List[int] = [0] * (self.size + 1)
        order: List[int] = []
        stack = [1]
        while stack:
            v = stack.pop()
            order.append(v)
            stack.extend(reversed(children[v]))
        for rank, v in enumerate(order, start=1):
            self.preorder[v] = rank
        for v in reversed(order):
            self.subtree[v] = 1 + sum(self.subtree[c] for c in children[v])

    @classmethod
    def random(cls, size: int, rng: np.random.Generator) -> "VersionTree":
        """Random recursive tree: node v hangs from a uniform node among 1..v-1"""
        return cls([0] + [int(rng.integers(1, v)) for v in range(2, size + 1)])

    @classmethod
    def path(cls, size: int) -> "VersionTree":
        return cls([0] + list(range(1, size)))

    def children(self, v: int) -> List[int]:
        return list(self._children[v])

    def subtree_range(self, v: int) -> Tuple[int, int]:
        """Document range [d_i, d_j] of the subtree rooted at v"""
        first = self.preorder[v]
        return first, first + self.subtree[v] - 1


def _default_alphabet(sigma: int) -> List[int]:
    if sigma <= 26:
        return [ord("a") + k for k in range(sigma)]
    return list(range(1, sigma + 1))


def _draw_target(rng: np.random.Generator, doc_count: int, model: EditModel,
                 tree: Optional[VersionTree]) -> Tuple[int, int, Optional[int]]:
    if model == "single":
        d = int(rng.integers(1, doc_count + 1))
        return d, d, None
    if model == "range":
        a, b = sorted(int(v) for v in rng.integers(1, doc_count + 1, size=2))
        return a, b, None
    v = int(rng.integers(1, doc_count + 1))
    first, last = tree.subtree_range(v)
    return first, last, v


def generate(seed: int, n: int, doc_count: int, s: int, sigma: int,
             model: EditModel = "range") -> Tuple[Collection, EditScript]:
    """
    A random base document of length n copied into D documents, with s
    single-symbol edits applied to single documents, document ranges or
    version subtrees. Positions are drawn against the document the edit
    lands on, so no edit ever falls outside it.
    """
    if n < 1 or doc_count < 1 or s < 0:
        raise DomainError(f"invalid sizes n={n}, D={doc_count}, s={s}")
    if not 2 <= sigma <= 255:
        raise DomainError(f"alphabet size must lie in [2,255], got {sigma}")
    if model not in ("single", "range", "subtree"):
        raise DomainError(f"unknown edit model {model!r}")

    rng = np.random.default_rng(seed)
    base = [int(v) for v in rng.integers(1, sigma + 1, size=n)]
    tree = VersionTree.random(doc_count, rng) if model == "subtree" else None
    targets = sorted((_draw_target(rng, doc_count, model, tree) for _ in range(s)), key=lambda t: t[0])

    by_doc: Dict[int, List[Tuple[int, int, Optional[int]]]] = defaultdict(list)
    for target in targets:
        by_doc[target[0]].append(target)

    sim = EditSimulator(base, doc_count)
    edits: List[Edit] = []
    documents: List[List[int]] = []
    for _ in range(doc_count):
        sim.begin_document()
        for first, last, node in by_doc.get(sim.doc, []):
            edit = _draw_edit(rng, sim, sigma, first, last, node)
            sim.apply(edit)
            edits.append(edit)
        documents.append(sim.text)

    script = EditScript(base_length=n, doc_count=doc_count, edits=edits)
    collection = Collection(
        documents=documents,
        alphabet=_default_alphabet(sigma),
        provenance="generated",
        seed=seed,
        script=script,
        base=base,
    )
    logger.debug(f"generated D={doc_count} n={n} s={s} sigma={sigma} model={model} N={collection.total_length}")
    return collection, script


def _draw_edit(rng: np.random.Generator, sim: EditSimulator, sigma: int,
               first: int, last: int, node: Optional[int]) -> Edit:
    length = len(sim)
    kinds = list(EDIT_KINDS)
    # undone insertions may later shrink the document, keep at least one symbol beyond them
    if length - sim.pending_removals() < 2:
        kinds.remove("delete")
    kind = kinds[int(rng.integers(0, len(kinds)))]
    if kind == "insert":
        position = int(rng.integers(1, length + 2))
        symbol = int(rng.integers(1, sigma + 1))
    elif kind == "delete":
        position = int(rng.integers(1, length + 1))
        symbol = 0
    else:
        position = int(rng.integers(1, length + 1))
        current = sim.text[position - 1]
        symbol = int(rng.integers(1, sigma))
        if symbol >= current:
            symbol += 1
    return Edit(kind=kind, position=position, symbol=symbol, first_doc=first, last_doc=last, node=node)


def replay(script: EditScript, base: Sequence[int]) -> List[List[int]]:
    """Apply the normalised events cumulatively, one document after another"""
    events = normalize_script(script, base)
    by_doc = defaultdict(list)
    for event in events:
        by_doc[event.doc].append(event)
    current = list(base)
    documents = []
    for d in range(1, script.doc_count + 1):
        for event in by_doc.get(d, []):
            if event.kind == "insert":
                current.insert(event.position - 1, event.symbol)
            elif event.kind == "delete":
                del current[event.position - 1]
            else:
                current[event.position - 1] = event.symbol
        documents.append(list(current))
    return documents


def from_texts(texts: Sequence[bytes]) -> Collection:
    """Collection over the bytes that actually occur in texts"""
    if not texts:
        raise CollectionError("no documents given")
    for d, text in enumerate(texts, start=1):
        if not text:
            raise CollectionError(f"document {d} is empty")
    alphabet = sorted(set().union(*(set(t) for t in texts)))
    lookup = {b: k for k, b in enumerate(alphabet, start=1)}
    return Collection(documents=[[lookup[b] for b in t] for t in texts], alphabet=alphabet)


def ingest(paths: Sequence[str]) -> Collection:
    """One document per file, in path order"""
    texts = []
    for path in sorted(paths):
        try:
            with open(path, "rb") as f:
                data = f.read()
        except OSError as e:
            raise CollectionError(f"Cannot read {path}: {e}") from e
        if not data:
            raise CollectionError(f"Empty document file {path}")
        texts.append(data)
    collection = from_texts(texts)
    logger.info(f"ingested {collection.doc_count} documents, N={collection.total_length}")
    return collection


def ingest_directory(directory: str) -> Collection:
    paths = [os.path.join(directory, name) for name in os.listdir(directory)]
    paths = [p for p in paths if os.path.isfile(p)]
    if not paths:
        raise CollectionError(f"No files in {directory}")
    return ingest(paths)


# text formats


def escape_line(data: bytes) -> bytes:
    return data.replace(b"\\", b"\\\\").replace(b"\n", b"\\n")


def unescape_line(line: bytes) -> bytes:
    out = bytearray()
    k = 0
    while k < len(line):
        b = line[k]
        if b == 0x5C:
            if k + 1 >= len(line):
                raise CollectionError("dangling escape at end of line")
            nxt = line[k + 1]
            if nxt == 0x5C:
                out.append(0x5C)
            elif nxt == 0x6E:
                out.append(0x0A)
            else:
                raise CollectionError(f"unknown escape \\{chr(nxt)}")
            k += 2
        else:
            out.append(b)
            k += 1
    return bytes(out)


def write_collection(collection: Collection, path: str) -> None:
    """One escaped document per line"""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "wb") as f:
        for d in range(1, collection.doc_count + 1):
            f.write(escape_line(collection.document_bytes(d)) + b"\n")


def read_collection(path: str, alphabet: Optional[Sequence[int]] = None) -> Collection:
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as e:
        raise CollectionError(f"Cannot read {path}: {e}") from e
    lines = raw.split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()
    texts = [unescape_line(line) for line in lines]
    if alphabet is None:
        return from_texts(texts)
    lookup = {b: k for k, b in enumerate(alphabet, start=1)}
    documents = []
    for d, text in enumerate(texts, start=1):
        if not text:
            raise CollectionError(f"document {d} is empty")
        try:
            documents.append([lookup[b] for b in text])
        except KeyError as e:
            raise CollectionError(f"document {d} holds byte {e.args[0]} outside the alphabet") from e
    if not documents:
        raise CollectionError(f"No documents in {path}")
    return Collection(documents=documents, alphabet=list(alphabet))


def write_script(script: EditScript, base: Sequence[int], alphabet: Sequence[int], path: str) -> None:
    """Header, alphabet, escaped base document, then `kind pos symbol d_i d_j [node]` lines"""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "wb") as f:
        f.write(SCRIPT_MAGIC.encode() + b"\n")
        f.write(f"{script.base_length} {script.doc_count} {bytes(alphabet).hex()}\n".encode())
        f.write(escape_line(bytes(alphabet[s - 1] for s in base)) + b"\n")
        for e in script.edits:
            target = "" if e.node is None else f" {e.node}"
            f.write(f"{e.kind} {e.position} {e.symbol} {e.first_doc} {e.last_doc}{target}\n".encode())


def read_script(path: str) -> Tuple[EditScript, List[int], List[int]]:
    """(script, base document, alphabet)"""
    try:
        with open(path, "rb") as f:
            lines = f.read().split(b"\n")
    except OSError as e:
        raise CollectionError(f"Cannot read {path}: {e}") from e
    if len(lines) < 3 or lines[0].decode(errors="replace") != SCRIPT_MAGIC:
        raise CollectionError(f"{path} is not an edit script")
    try:
        n_text, d_text, alpha_hex = lines[1].decode().split()
        alphabet = list(bytes.fromhex(alpha_hex))
        lookup = {b: k for k, b in enumerate(alphabet, start=1)}
        base = [lookup[b] for b in unescape_line(lines[2])]
        edits = []
        for number, line in enumerate(lines[3:], start=4):
            if not line.strip():
                continue
            fields = line.decode().split()
            if len(fields) not in (5, 6):
                raise CollectionError(f"line {number}: expected 5 or 6 fields, found {len(fields)}")
            kind, pos, sym, first, last = fields[:5]
            if kind not in EDIT_KINDS:
                raise CollectionError(f"line {number}: unknown edit kind {kind!r}")
            edits.append(Edit(kind=kind, position=int(pos), symbol=int(sym),
                              first_doc=int(first), last_doc=int(last),
                              node=int(fields[5]) if len(fields) == 6 else None))
        script = EditScript(base_length=int(n_text), doc_count=int(d_text), edits=edits)
    except (ValueError, KeyError) as e:
        raise CollectionError(f"Malformed edit script {path}: {e}") from e
    if len(base) != script.base_length:
        raise CollectionError(f"base document has length {len(base)}, header says {script.base_length}")
    return script, base, alphabet


# oracles


def naive_occurrences(c: Collection, pattern: Sequence[int]) -> List[Tuple[int, int]]:
    """(document, 1-based offset) of every occurrence, overlaps included"""
    if not len(pattern):
        raise DomainError("pattern must be nonempty")
    p = list(pattern)
    m = len(p)
    found = []
    for d, doc in enumerate(c.documents, start=1):
        for start in range(len(doc) - m + 1):
            if doc[start:start + m] == p:
                found.append((d, start + 1))
    return found


def naive_count(c: Collection, pattern: Sequence[int]) -> int:
    return len(naive_occurrences(c, pattern))


def naive_list(c: Collection, pattern: Sequence[int]) -> List[int]:
    return sorted({d for d, _ in naive_occurrences(c, pattern)})


def find_occurrences(c: Collection, pattern: Sequence[int]) -> List[Tuple[int, int]]:
    """Second, independent scan using bytes.find over the symbol values"""
    if not len(pattern):
        raise DomainError("pattern must be nonempty")
    needle = bytes(s - 1 for s in pattern)
    found = []
    for d, doc in enumerate(c.documents, start=1):
        hay = bytes(s - 1 for s in doc)
        at = hay.find(needle)
        while at != -1:
            found.append((d, at + 1))
            at = hay.find(needle, at + 1)
    return found
