"""
Grammar-based pattern index
Left symbols sorted by reversed expansion give the grid columns, right symbols
sorted by expansion give the rows, and every rule A -> BC is a point weighted
by the number of parse-tree occurrences of A.
"""
import logging
from bisect import bisect_left, bisect_right
from collections import defaultdict
from functools import cmp_to_key
from itertools import islice, zip_longest
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from src.codec import BlobReader, BlobWriter
from src.exceptions import BuildError, ConsistencyError, QueryRangeError
from src.grammar import Grammar, OccCounts, occ_counts
from src.grid import Grid, Point
from src.models import IndexConfig, Occurrence


logger = logging.getLogger(__name__)

_END = object()


def _compare_streams(first: Iterator[int], second: Iterator[int]) -> int:
    """Lexicographic comparison of two lazy symbol streams (a proper prefix sorts first)"""
    for a, b in zip_longest(first, second, fillvalue=_END):
        if a is b:
            continue
        if a is _END:
            return -1
        if b is _END:
            return 1
        if a != b:
            return -1 if a < b else 1
    return 0


def _sorted_classes(symbols: Sequence[int], stream) -> Tuple[List[int], Dict[int, int]]:
    """Sort symbols by their streams and group equal streams; returns representatives and rank map"""
    ordered = sorted(symbols, key=cmp_to_key(lambda a, b: _compare_streams(stream(a), stream(b))))
    representatives: List[int] = []
    rank: Dict[int, int] = {}
    for sym in ordered:
        if not representatives or _compare_streams(stream(representatives[-1]), stream(sym)) != 0:
            representatives.append(sym)
        rank[sym] = len(representatives)
    return representatives, rank


class PatternIndex:
    """Pattern search over a grammar: the grid, its column and row orders, and the uses table"""

    def __init__(self, grammar: Grammar, config: IndexConfig):
        self.grammar = grammar
        self.config = config
        self.occ: OccCounts = occ_counts(grammar)
        self.columns: List[int] = []
        self.rows: List[int] = []
        self.grid: Optional[Grid] = None
        # uses[A]: (parent, offset of s(A) inside s(parent), 0-based)
        self.uses: List[List[Tuple[int, int]]] = [[] for _ in range(grammar.size + 1)]
        self.roots: Dict[int, List[int]] = defaultdict(list)
        self.bounds: List[int] = grammar.boundaries()
        self.short_counts: Dict[Tuple[int, ...], int] = {}

    @property
    def doc_count(self) -> int:
        return self.grammar.doc_count

    @property
    def has_short_table(self) -> bool:
        return self.grammar.ms_len > 1

    def is_short(self, pattern: Sequence[int]) -> bool:
        """Patterns that may lie entirely inside one metasymbol leaf"""
        return len(pattern) <= self.grammar.ms_len

    # build

    @classmethod
    def build(cls, grammar: Grammar, config: Optional[IndexConfig] = None) -> "PatternIndex":
        config = config or IndexConfig(ms_len=grammar.ms_len)
        if not grammar.starts:
            raise BuildError("grammar has no documents")
        idx = cls(grammar, config)
        idx._fill_uses()
        idx._build_grid()
        if idx.has_short_table:
            idx.short_counts = idx._count_short_strings()
        logger.debug(
            f"pattern index: {len(idx.columns)} columns, {len(idx.rows)} rows, "
            f"{idx.grid.size if idx.grid else 0} points, {len(idx.short_counts)} short strings"
        )
        return idx

    def _fill_uses(self) -> None:
        g = self.grammar
        for a, left, right in g.pair_rules():
            self.uses[left].append((a, 0))
            self.uses[right].append((a, g.exp_len(left)))
        for d, s in enumerate(g.starts, start=1):
            self.roots[s].append(d)

    def _build_grid(self) -> None:
        g = self.grammar
        rules = list(g.pair_rules())
        if not rules:
            return
        lefts = sorted({left for _, left, _ in rules})
        rights = sorted({right for _, _, right in rules})
        self.columns, col_rank = _sorted_classes(lefts, g.iter_backward)
        self.rows, row_rank = _sorted_classes(rights, g.iter_forward)
        points = sorted(
            (Point(x=col_rank[left], y=row_rank[right], label=a, weight=self.occ[a]) for a, left, right in rules),
            key=lambda pt: (pt.x, pt.label),
        )
        self.grid = Grid.build(points, len(self.columns), len(self.rows), self.config.tau, self.config.epsilon)

    def _count_short_strings(self) -> Dict[Tuple[int, ...], int]:
        counts: Dict[Tuple[int, ...], int] = defaultdict(int)
        limit = self.grammar.ms_len
        for s in self.grammar.starts:
            text = self.grammar.expand(s)
            for start in range(len(text)):
                for length in range(1, min(limit, len(text) - start) + 1):
                    counts[tuple(text[start:start + length])] += 1
        return dict(counts)

    # search

    def _range(self, reps: List[int], stream, key: Sequence[int]) -> Tuple[int, int]:
        target = list(key)
        size = len(target)
        prefixes = _PrefixView(reps, stream, size)
        lo = bisect_left(prefixes, target)
        hi = bisect_right(prefixes, target)
        return lo + 1, hi

    def search_left(self, p1_reversed: Sequence[int]) -> Tuple[int, int]:
        """Columns whose reversed left expansion starts with p1_reversed; (x1, x1 - 1) when none"""
        if not len(p1_reversed):
            raise QueryRangeError("search key must be nonempty")
        return self._range(self.columns, self.grammar.iter_backward, p1_reversed)

    def search_right(self, p2: Sequence[int]) -> Tuple[int, int]:
        """Rows whose right expansion starts with p2; (y1, y1 - 1) when none"""
        if not len(p2):
            raise QueryRangeError("search key must be nonempty")
        return self._range(self.rows, self.grammar.iter_forward, p2)

    def cut_rectangles(self, pattern: Sequence[int]) -> Iterator[Tuple[int, Tuple[int, int, int, int]]]:
        """(split, rectangle) for every cut P = P1 P2 whose column and row ranges are nonempty"""
        if self.grid is None:
            return
        for split in range(1, len(pattern)):
            x1, x2 = self.search_left(list(reversed(pattern[:split])))
            if x1 > x2:
                continue
            y1, y2 = self.search_right(pattern[split:])
            if y1 > y2:
                continue
            yield split, (x1, x2, y1, y2)

    def primary_occurrences(self, pattern: Sequence[int]) -> List[Tuple[int, int]]:
        """(A, |P1|) for every rule A -> BC whose B/C boundary cuts an occurrence of P"""
        if len(pattern) < 2:
            return []
        via = "root" if self.config.list_layout == "root" else "leaves"
        found = []
        for split, rect in self.cut_rectangles(pattern):
            for _, _, label in self.grid.report(*rect, via=via):
                found.append((label, split))
        return found

    def leaf_occurrences(self, pattern: Sequence[int]) -> List[Tuple[int, int]]:
        """(A, offset) for occurrences lying inside the metasymbol of a terminal rule A"""
        key = tuple(pattern)
        m = len(key)
        if not m or m > self.grammar.ms_len:
            return []
        if self.grammar.ms_len == 1:
            a = self.grammar.terminal_rule(key)
            return [(a, 1)] if a is not None else []
        found = []
        for a in self.grammar.terminal_rules():
            leaf = self.grammar.leaf_symbols(a)
            for start in range(len(leaf) - m + 1):
                if leaf[start:start + m] == key:
                    found.append((a, start + 1))
        return found

    def count(self, pattern: Sequence[int]) -> int:
        """Occurrences of P in the collection, without enumerating them"""
        if not len(pattern):
            raise QueryRangeError("pattern must be nonempty")
        if self.has_short_table and self.is_short(pattern):
            return self.short_counts.get(tuple(pattern), 0)
        if len(pattern) == 1:
            a = self.grammar.terminal_rule((pattern[0],))
            return self.occ[a] if a is not None else 0
        return sum(self.grid.sum(*rect) for _, rect in self.cut_rectangles(pattern))

    def locate(self, pattern: Sequence[int]) -> List[Occurrence]:
        """Every occurrence, sorted by (document, offset)"""
        if not len(pattern):
            raise QueryRangeError("pattern must be nonempty")
        g = self.grammar
        seeds: List[Tuple[int, int]] = []
        for a, split in self.primary_occurrences(pattern):
            left, _ = g.children(a)
            seeds.append((a, g.exp_len(left) - split + 1))
        seeds.extend(self.leaf_occurrences(pattern))

        hits: List[Tuple[int, int]] = []
        for a, offset in seeds:
            pending = [(a, offset)]
            while pending:
                node, off = pending.pop()
                for d in self.roots.get(node, ()):
                    hits.append((d, off))
                for parent, shift in self.uses[node]:
                    pending.append((parent, off + shift))

        hits.sort()
        for prev, cur in zip(hits, hits[1:]):
            if prev == cur:
                raise ConsistencyError(f"occurrence at document {cur[0]} offset {cur[1]} reported twice")
        return [Occurrence(doc=d, offset=off, global_offset=self.bounds[d - 1] + off) for d, off in hits]

    # size and serialisation

    def size_in_bits(self) -> int:
        g = self.grammar
        id_bits = max(1, g.size.bit_length())
        bits = (len(self.columns) + len(self.rows)) * id_bits
        bits += sum(len(u) for u in self.uses) * 2 * id_bits
        if self.grid is not None:
            bits += self.grid.size_in_bits()
        return bits

    def short_table_bits(self) -> int:
        if not self.short_counts:
            return 0
        count_bits = max(1, max(self.short_counts.values()).bit_length())
        symbol_bits = max(1, self.grammar.alphabet_size().bit_length())
        return sum(len(k) * symbol_bits + count_bits for k in self.short_counts)

    def dump(self, w: BlobWriter) -> None:
        """Column and row orders plus the short-string counts; the grid is stored on its own"""
        w.tag(b"PIDX")
        w.varints(self.columns)
        w.varints(self.rows)
        w.varint(len(self.short_counts))
        for key in sorted(self.short_counts):
            w.varints(key)
            w.varint(self.short_counts[key])

    @classmethod
    def load(cls, r: BlobReader, grammar: Grammar, config: IndexConfig, grid: Optional[Grid]) -> "PatternIndex":
        r.expect_tag(b"PIDX")
        idx = cls(grammar, config)
        idx._fill_uses()
        idx.columns = r.varints()
        idx.rows = r.varints()
        idx.grid = grid
        for _ in range(r.varint()):
            key = tuple(r.varints())
            idx.short_counts[key] = r.varint()
        if (grid is None) != (not idx.columns):
            raise ConsistencyError("stored grid and column order disagree on whether the grammar has pair rules")
        if grid is not None and (grid.ncols != len(idx.columns) or grid.nrows != len(idx.rows)):
            raise ConsistencyError("stored grid does not match the stored column and row orders")
        return idx


class _PrefixView:
    """Sequence view of representatives' streams truncated to a fixed length, for bisect"""

    def __init__(self, reps: List[int], stream, size: int):
        self._reps = reps
        self._stream = stream
        self._size = size

    def __len__(self) -> int:
        return len(self._reps)

    def __getitem__(self, k: int) -> List[int]:
        return list(islice(self._stream(self._reps[k]), self._size))


def build_pattern_index(g: Grammar, config: Optional[IndexConfig] = None) -> PatternIndex:
    return PatternIndex.build(g, config)


def search_left(idx: PatternIndex, p1_reversed: Sequence[int]) -> Tuple[int, int]:
    return idx.search_left(p1_reversed)


def search_right(idx: PatternIndex, p2: Sequence[int]) -> Tuple[int, int]:
    return idx.search_right(p2)


def primary_occurrences(idx: PatternIndex, pattern: Sequence[int]) -> List[Tuple[int, int]]:
    return idx.primary_occurrences(pattern)


def count(idx: PatternIndex, pattern: Sequence[int]) -> int:
    return idx.count(pattern)


def locate(idx: PatternIndex, pattern: Sequence[int]) -> List[Occurrence]:
    return idx.locate(pattern)
