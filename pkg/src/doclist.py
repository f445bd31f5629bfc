"""
Document listing on top of the pattern index
Every grammar-tree node of the grid carries the concatenation of the inverted
lists of its labels, represented only by list-start marks M and a run-length
RMQ over the (never stored) previous-occurrence array E. Listing scans lists
from the left end of a range and jumps with the RMQ once a repeat shows up.
"""
import logging
from bisect import bisect_right
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Set, Tuple

from src.codec import BlobReader, BlobWriter
from src.exceptions import ConsistencyError, IntegrityError, QueryRangeError
from src.grammar import Grammar
from src.grid import NodeKey, NodeRange
from src.index import PatternIndex
from src.models import ComponentBits, DistinctResult, ListingResult, ListingStats, StatsReport
from src.succinct import BaseRMQ, RunLengthRMQ, ScratchBits, SparseBitVector, previous_occurrences


logger = logging.getLogger(__name__)


class RangeList:
    """A strictly increasing list of document identifiers kept as maximal [lo, hi] ranges"""

    def __init__(self, ranges: Sequence[Tuple[int, int]] = ()):
        self._lo: List[int] = []
        self._hi: List[int] = []
        self._cum: List[int] = [0]
        for lo, hi in ranges:
            if lo > hi:
                raise IntegrityError(f"empty range [{lo},{hi}] in inverted list")
            if self._hi and lo <= self._hi[-1] + 1:
                raise IntegrityError(f"range [{lo},{hi}] overlaps or touches its predecessor")
            self._lo.append(lo)
            self._hi.append(hi)
            self._cum.append(self._cum[-1] + hi - lo + 1)

    @classmethod
    def from_documents(cls, docs: Sequence[int]) -> "RangeList":
        ranges: List[Tuple[int, int]] = []
        for d in docs:
            if ranges and d == ranges[-1][1] + 1:
                ranges[-1] = (ranges[-1][0], d)
            elif ranges and d <= ranges[-1][1]:
                raise IntegrityError("document list must be strictly increasing")
            else:
                ranges.append((d, d))
        return cls(ranges)

    def __len__(self) -> int:
        return self._cum[-1]

    def __eq__(self, other) -> bool:
        return isinstance(other, RangeList) and self.ranges == other.ranges

    def __repr__(self) -> str:
        return f"RangeList({self.ranges})"

    def __iter__(self) -> Iterator[int]:
        for lo, hi in zip(self._lo, self._hi):
            yield from range(lo, hi + 1)

    @property
    def ranges(self) -> List[Tuple[int, int]]:
        return list(zip(self._lo, self._hi))

    @property
    def range_count(self) -> int:
        return len(self._lo)

    def documents(self) -> List[int]:
        return list(self)

    def at(self, k: int) -> int:
        """k-th document of the list, by binary search over cumulative range lengths"""
        if not 1 <= k <= len(self):
            raise QueryRangeError(f"list position {k} outside [1,{len(self)}]")
        r = bisect_right(self._cum, k - 1) - 1
        return self._lo[r] + (k - 1 - self._cum[r])

    def iter_from(self, k: int) -> Iterator[int]:
        """Documents from position k onwards"""
        if not 1 <= k <= len(self):
            return
        r = bisect_right(self._cum, k - 1) - 1
        start = self._lo[r] + (k - 1 - self._cum[r])
        yield from range(start, self._hi[r] + 1)
        for lo, hi in zip(self._lo[r + 1:], self._hi[r + 1:]):
            yield from range(lo, hi + 1)

    def size_in_bits(self, doc_count: int) -> int:
        return 2 * len(self._lo) * max(1, doc_count.bit_length())

    def dump(self, w: BlobWriter) -> None:
        w.varint(len(self._lo))
        for lo, hi in zip(self._lo, self._hi):
            w.varint(lo)
            w.varint(hi - lo)

    @classmethod
    def load(cls, r: BlobReader) -> "RangeList":
        ranges = []
        for _ in range(r.varint()):
            lo = r.varint()
            ranges.append((lo, lo + r.varint()))
        return cls(ranges)


def inverted_lists(g: Grammar) -> List[RangeList]:
    """
    l(A) for every nonterminal, comparing the nonterminal sets of consecutive
    documents: an appearing nonterminal opens [d, D], a disappearing one
    closes its open range at d - 1.
    """
    opened: Dict[int, int] = {}
    ranges: List[List[Tuple[int, int]]] = [[] for _ in range(g.size + 1)]
    previous: Set[int] = set()
    previous_start = 0
    for d, start in enumerate(g.starts, start=1):
        current = previous if start == previous_start else _reachable_from(g, start)
        for a in current - previous:
            opened[a] = d
        for a in previous - current:
            ranges[a].append((opened.pop(a), d - 1))
        previous, previous_start = current, start
    for a, first in opened.items():
        ranges[a].append((first, g.doc_count))
    return [RangeList(rs) for rs in ranges]


def _reachable_from(g: Grammar, start: int) -> Set[int]:
    seen: Set[int] = set()
    stack = [start]
    while stack:
        node = stack.pop()
        if node in seen:
            continue
        seen.add(node)
        if not g.is_terminal(node):
            stack.extend(g.children(node))
    return seen


@dataclass
class NodeDocs:
    """Listing structures of one grid node: list-start marks M and the RMQ over its E array"""

    marks: SparseBitVector
    rmq: RunLengthRMQ

    @property
    def total(self) -> int:
        return len(self.marks)

    @property
    def runs(self) -> int:
        return self.rmq.runs

    def span(self, nr: NodeRange) -> Tuple[int, int]:
        """[i', j'] inside the concatenated lists for node positions [i, j]"""
        first = self.marks.select(1, nr.i)
        last = self.marks.select(1, nr.j + 1) - 1 if nr.j < self.marks.ones else self.total
        return first, last


class DocIndex:
    """Document listing structures attached to a PatternIndex"""

    def __init__(self, pidx: PatternIndex):
        self.pidx = pidx
        self.layout = pidx.config.list_layout
        self.debug_checks = pidx.config.debug_checks
        self.doc_count = pidx.doc_count
        self.nodes: Dict[NodeKey, NodeDocs] = {}
        # inverted lists aligned to leaf or root positions, depending on the layout
        self.position_lists: List[RangeList] = []
        self.terminal_lists: Dict[int, RangeList] = {}
        self.short_lists: Dict[Tuple[int, ...], RangeList] = {}

    @property
    def grid(self):
        return self.pidx.grid

    # build

    @classmethod
    def build(cls, pidx: PatternIndex) -> "DocIndex":
        dix = cls(pidx)
        g = pidx.grammar
        lists = inverted_lists(g)
        if g.ms_len == 1:
            dix.terminal_lists = {a: lists[a] for a in g.terminal_rules()}
        else:
            dix.short_lists = _short_lists(g)

        grid = pidx.grid
        if grid is not None:
            labels = grid.leaf_labels if dix.layout == "leaves" else grid.root_labels
            dix.position_lists = [lists[int(a)] for a in labels]
            for key, seq in grid.node_labels().items():
                dix.nodes[key] = dix._build_node(key, seq, lists)
        logger.debug(
            f"doc index: D={dix.doc_count}, layout={dix.layout}, "
            f"{len(dix.nodes)} nodes, runs per level {dix.runs_per_level()}"
        )
        return dix

    def _build_node(self, key: NodeKey, labels: List[int], lists: List[RangeList]) -> NodeDocs:
        docs: List[int] = []
        starts: List[int] = []
        for a in labels:
            if not len(lists[a]):
                raise IntegrityError(f"nonterminal {a} at node {key} has an empty inverted list")
            starts.append(len(docs) + 1)
            docs.extend(lists[a])
        prev = previous_occurrences(docs)
        if self.debug_checks:
            for k, e in enumerate(prev, start=1):
                if e and (e >= k or docs[e - 1] != docs[k - 1]):
                    raise ConsistencyError(f"E[{k}]={e} at node {key} does not point to a copy of L[{k}]")
        return NodeDocs(marks=SparseBitVector(len(docs), starts), rmq=RunLengthRMQ.build(prev))

    def materialize(self, a: int, b: int) -> Tuple[List[int], List[int]]:
        """L and E of a node, rebuilt from the lists (for checks; never kept)"""
        node = self.grid.node(a, b)
        docs: List[int] = []
        for k in range(1, node.length + 1):
            docs.extend(self._list_at(a, b, k)[1])
        return docs, previous_occurrences(docs)

    # access

    def _list_at(self, a: int, b: int, k: int) -> Tuple[int, RangeList]:
        """(label, inverted list) of position k of node (a, b)"""
        if self.layout == "leaves":
            leaf_pos, label = self.grid.track_down(a, b, k)
            return label, self.position_lists[leaf_pos - 1]
        root_pos = self.grid.track_up(a, b, k)
        return int(self.grid.root_labels[root_pos - 1]), self.position_lists[root_pos - 1]

    def _value_at(self, nd: NodeDocs, nr: NodeRange, k: int, stats: ListingStats) -> int:
        idx = nd.marks.rank(1, k)
        offset = k - nd.marks.select(1, idx) + 1
        _, docs = self._list_at(nr.a, nr.b, idx)
        stats.lists_opened += 1
        if offset > len(docs):
            raise IntegrityError(f"M places L[{k}] past the end of list {idx} at node {nr.node}")
        return docs.at(offset)

    def _scan(self, nd: NodeDocs, nr: NodeRange, x: int, y: int, V: ScratchBits, W: ScratchBits,
              out: List[int], stats: ListingStats) -> Optional[int]:
        """Report L[x..] until a document already seen in this range appears; its position, or None"""
        idx = nd.marks.rank(1, x)
        offset = x - nd.marks.select(1, idx) + 1
        k = x
        while k <= y:
            _, docs = self._list_at(nr.a, nr.b, idx)
            stats.lists_opened += 1
            if offset > len(docs):
                raise IntegrityError(f"M and the length of list {idx} disagree at node {nr.node}")
            for doc in docs.iter_from(offset):
                if k > y:
                    return None
                stats.elements_scanned += 1
                if doc in W:
                    return k
                _report(doc, V, W, out)
                k += 1
            idx += 1
            offset = 1
        return None

    # queries

    def range_distinct(self, nr: NodeRange, V: ScratchBits, stats: Optional[ListingStats] = None,
                       W: Optional[ScratchBits] = None) -> List[int]:
        """
        Documents of L[i'..j'] for the node range, minus those already marked
        in V (which get marked). Scans until a repeat at x, then asks the
        run-length RMQ for the best run head in [x + 1, y]; a head whose
        document was already seen in this range ends the branch.
        """
        stats = stats if stats is not None else ListingStats()
        nd = self.nodes.get(nr.node)
        if nd is None:
            raise QueryRangeError(f"no listing structures at node {nr.node}")
        if not 1 <= nr.i <= nr.j <= nd.marks.ones:
            raise QueryRangeError(f"range [{nr.i},{nr.j}] invalid at node {nr.node}")
        W = W if W is not None else ScratchBits(self.doc_count)
        checkpoint = W.checkpoint()
        out: List[int] = []
        first, last = nd.span(nr)
        stats.ranges += 1
        try:
            pending = [("scan", first, last)]
            while pending:
                kind, x, y = pending.pop()
                if x > y:
                    continue
                if kind == "scan":
                    repeat = self._scan(nd, nr, x, y, V, W, out, stats)
                    if repeat is not None:
                        pending.append(("rmq", repeat, y))
                    continue
                # L[x] is known to be a repeat
                if x + 1 > y:
                    continue
                _, head = nd.rmq.candidates(x + 1, y)
                stats.rmq_calls += 1
                if head is None:
                    continue
                doc = self._value_at(nd, nr, head, stats)
                if doc in W:
                    continue
                _report(doc, V, W, out)
                pending.append(("scan", head + 1, y))
                pending.append(("rmq", x, head - 1))
        finally:
            W.rollback(checkpoint)
        return out

    def list_documents(self, pattern: Sequence[int]) -> ListingResult:
        """Documents where the pattern appears"""
        if not len(pattern):
            raise QueryRangeError("pattern must be nonempty")
        stats = ListingStats()
        pidx = self.pidx
        found: List[int] = []

        if pidx.has_short_table and pidx.is_short(pattern):
            found = list(self.short_lists.get(tuple(pattern), ()))
            stats.lists_opened = 1 if found else 0
        elif len(pattern) == 1:
            a = pidx.grammar.terminal_rule((pattern[0],))
            if a is not None:
                found = list(self.terminal_lists[a])
                stats.lists_opened = 1
        else:
            V = ScratchBits(self.doc_count)
            W = ScratchBits(self.doc_count)
            seen_labels: Set[int] = set()
            for _, rect in pidx.cut_rectangles(pattern):
                for nr in self.grid.decompose(*rect):
                    stats.nodes_visited += 1
                    if len(nr) == 1:
                        label, docs = self._list_at(nr.a, nr.b, nr.i)
                        stats.ranges += 1
                        if label in seen_labels:
                            continue
                        seen_labels.add(label)
                        stats.lists_opened += 1
                        for doc in docs:
                            stats.elements_scanned += 1
                            if V.mark(doc):
                                found.append(doc)
                        continue
                    found.extend(self.range_distinct(nr, V, stats, W))
            V.reset()
            if self.debug_checks and not (V.is_clear() and W.is_clear()):
                raise ConsistencyError("scratch bitvectors not cleared after the query")

        return ListingResult(documents=sorted(found), discovery_order=found, stats=stats)

    # statistics

    def runs_per_level(self) -> List[int]:
        if self.grid is None:
            return []
        levels = self.grid.levels()
        return [sum(self.nodes[n.key].runs for n in levels[d]) for d in sorted(levels)]

    def nodes_per_level(self) -> List[int]:
        if self.grid is None:
            return []
        levels = self.grid.levels()
        return [len(levels[d]) for d in sorted(levels)]

    def stats(self) -> StatsReport:
        g = self.pidx.grammar
        D = self.doc_count
        lists = list(self.position_lists) + list(self.terminal_lists.values())
        bits = ComponentBits(
            grammar=g.size_in_bits(),
            grid=self.pidx.size_in_bits(),
            m_bitvectors=sum(nd.marks.size_in_bits() for nd in self.nodes.values()),
            rmq=sum(nd.rmq.size_in_bits() for nd in self.nodes.values()),
            lists=sum(lst.size_in_bits(D) for lst in lists),
            short_table=self.pidx.short_table_bits() + sum(lst.size_in_bits(D) for lst in self.short_lists.values()),
        )
        return StatsReport(
            documents=D,
            total_length=g.total_length,
            rules=g.size,
            points=self.grid.size if self.grid is not None else 0,
            rho_per_level=self.runs_per_level(),
            nodes_per_level=self.nodes_per_level(),
            list_ranges=sum(lst.range_count for lst in lists),
            bits=bits,
            total_bits=bits.total,
            config=self.pidx.config,
        )

    # serialisation

    def dump(self, w: BlobWriter) -> None:
        w.tag(b"DOCS")
        w.text(self.layout)
        w.varint(self.doc_count)
        w.varint(len(self.position_lists))
        for lst in self.position_lists:
            lst.dump(w)
        w.varint(len(self.terminal_lists))
        for a in sorted(self.terminal_lists):
            w.varint(a)
            self.terminal_lists[a].dump(w)
        w.varint(len(self.short_lists))
        for key in sorted(self.short_lists):
            w.varints(key)
            self.short_lists[key].dump(w)
        w.varint(len(self.nodes))
        for key in sorted(self.nodes):
            w.varint(key[0])
            w.varint(key[1])
            self.nodes[key].marks.dump(w)
            self.nodes[key].rmq.dump(w)

    @classmethod
    def load(cls, r: BlobReader, pidx: PatternIndex) -> "DocIndex":
        r.expect_tag(b"DOCS")
        dix = cls(pidx)
        layout = r.text()
        if layout != dix.layout:
            raise ConsistencyError(f"stored list layout {layout!r} differs from the configured {dix.layout!r}")
        if r.varint() != dix.doc_count:
            raise ConsistencyError("stored document count differs from the grammar's")
        dix.position_lists = [RangeList.load(r) for _ in range(r.varint())]
        for _ in range(r.varint()):
            a = r.varint()
            dix.terminal_lists[a] = RangeList.load(r)
        for _ in range(r.varint()):
            key = tuple(r.varints())
            dix.short_lists[key] = RangeList.load(r)
        for _ in range(r.varint()):
            key = (r.varint(), r.varint())
            marks = SparseBitVector.load(r)
            dix.nodes[key] = NodeDocs(marks=marks, rmq=RunLengthRMQ.load(r))
        return dix


def _report(doc: int, V: ScratchBits, W: ScratchBits, out: List[int]) -> None:
    W.mark(doc)
    if V.mark(doc):
        out.append(doc)


def _short_lists(g: Grammar) -> Dict[Tuple[int, ...], RangeList]:
    docs: Dict[Tuple[int, ...], List[int]] = defaultdict(list)
    limit = g.ms_len
    for d, s in enumerate(g.starts, start=1):
        text = g.expand(s)
        seen = set()
        for start in range(len(text)):
            for length in range(1, min(limit, len(text) - start) + 1):
                seen.add(tuple(text[start:start + length]))
        for key in seen:
            docs[key].append(d)
    return {key: RangeList.from_documents(ds) for key, ds in docs.items()}


def leftist_distinct(L: Sequence[int], q: BaseRMQ, V: ScratchBits, sp: int, ep: int) -> DistinctResult:
    """
    Reference listing over an explicit array with a true RMQ over its E
    array: scan from the left until a repeat at d, take the minimum of
    E[d..j], stop if its value was already seen, else recurse on [d, k - 1],
    report L[k] and continue scanning at k + 1. Values already in V are
    not reported (and new ones are marked).
    """
    result = DistinctResult()
    if sp > ep:
        return result
    if not 1 <= sp <= ep <= len(L):
        raise QueryRangeError(f"range [{sp},{ep}] invalid for length {len(L)}")
    W = ScratchBits(len(V))

    def report(k: int) -> None:
        value = L[k - 1]
        W.mark(value)
        if V.mark(value):
            result.values.append(value)
            result.positions.append(k)

    pending = [("scan", sp, ep)]
    while pending:
        kind, x, y = pending.pop()
        if x > y:
            continue
        if kind == "scan":
            k = x
            while k <= y and L[k - 1] not in W:
                report(k)
                k += 1
            if k <= y:
                pending.append(("rmq", k, y))
            continue
        k = q.query(x, y)
        result.rmq_calls += 1
        if L[k - 1] in W:
            continue
        report(k)
        pending.append(("scan", k + 1, y))
        pending.append(("rmq", x, k - 1))
    return result


def build_doc_index(pidx: PatternIndex) -> DocIndex:
    return DocIndex.build(pidx)


def list_documents(dix: DocIndex, pattern: Sequence[int]) -> ListingResult:
    return dix.list_documents(pattern)


def range_distinct(dix: DocIndex, nr: NodeRange, V: ScratchBits,
                   stats: Optional[ListingStats] = None) -> List[int]:
    return dix.range_distinct(nr, V, stats)


def doc_stats(dix: DocIndex) -> StatsReport:
    return dix.stats()
