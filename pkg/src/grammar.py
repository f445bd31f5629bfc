"""
Grammar compression of a document collection
Chomsky-normal-form grammars with hash-consed rules, a balanced builder, an
edit-model builder that shares parse trees between consecutive documents,
substring extraction and per-nonterminal occurrence counts.
"""
import logging
import math
from collections import defaultdict
from itertools import islice
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from src.codec import BlobReader, BlobWriter
from src.exceptions import BuildError, GrammarError, QueryRangeError, ScriptError
from src.models import Edit, EditEvent, EditScript


logger = logging.getLogger(__name__)

# height(S_d) <= MAX_HEIGHT_FACTOR * log2(n_d + s) for edit-model grammars, leaves at height 1
MAX_HEIGHT_FACTOR = 2


def _width(value: int) -> int:
    return max(1, value.bit_length())


def height_bound(length: int, edits: int) -> float:
    return MAX_HEIGHT_FACTOR * math.log2(max(2, length + edits))


class Grammar:
    """
    A CNF grammar over integer symbols. Nonterminal identifiers run 1..r and
    are created bottom-up, so identifier order is a topological order.

    Terminal rules A -> a carry a metasymbol: a tuple of up to ms_len symbols
    (exactly one symbol when ms_len = 1, never empty).
    """

    def __init__(self, ms_len: int = 1):
        if ms_len < 1:
            raise BuildError(f"metasymbol length must be >= 1, got {ms_len}")
        self.ms_len = ms_len
        self._left: List[int] = [0]
        self._right: List[int] = [0]
        self._leaf: List[Optional[Tuple[int, ...]]] = [None]
        self._len: List[int] = [0]
        self._height: List[int] = [0]
        self._pairs: Dict[Tuple[int, int], int] = {}
        self._terminals: Dict[Tuple[int, ...], int] = {}
        self.starts: List[int] = []

    # construction

    def terminal(self, symbols: Sequence[int]) -> int:
        """Nonterminal A -> symbols, reusing an existing rule when there is one"""
        key = tuple(symbols)
        found = self._terminals.get(key)
        if found is not None:
            return found
        if len(key) > self.ms_len:
            raise GrammarError(f"metasymbol of length {len(key)} exceeds {self.ms_len}")
        self._left.append(0)
        self._right.append(0)
        self._leaf.append(key)
        self._len.append(len(key))
        self._height.append(1)
        ident = len(self._left) - 1
        self._terminals[key] = ident
        return ident

    def pair(self, left: int, right: int) -> int:
        """Nonterminal A -> left right, reusing an existing rule when there is one"""
        found = self._pairs.get((left, right))
        if found is not None:
            return found
        if not (1 <= left < len(self._left) and 1 <= right < len(self._left)):
            raise GrammarError(f"rule refers to unknown nonterminals ({left}, {right})")
        self._left.append(left)
        self._right.append(right)
        self._leaf.append(None)
        self._len.append(self._len[left] + self._len[right])
        self._height.append(1 + max(self._height[left], self._height[right]))
        ident = len(self._left) - 1
        self._pairs[(left, right)] = ident
        return ident

    def balanced_pair(self, left: int, right: int) -> int:
        """pair() followed by an AVL rotation when the two heights differ by more than one"""
        hl, hr = self._height[left], self._height[right]
        if hl > hr + 1:
            ll, lr = self.children(left)
            if self._height[ll] >= self._height[lr]:
                return self.pair(ll, self.pair(lr, right))
            lrl, lrr = self.children(lr)
            return self.pair(self.pair(ll, lrl), self.pair(lrr, right))
        if hr > hl + 1:
            rl, rr = self.children(right)
            if self._height[rr] >= self._height[rl]:
                return self.pair(self.pair(left, rl), rr)
            rll, rlr = self.children(rl)
            return self.pair(self.pair(left, rll), self.pair(rlr, rr))
        return self.pair(left, right)

    def balanced_tree(self, nodes: Sequence[int]) -> int:
        """Perfectly balanced binary tree over nodes, left halves rounded up"""
        if not nodes:
            raise BuildError("cannot build a tree over no leaves")
        level = list(nodes)
        return self._balanced(level, 0, len(level))

    def _balanced(self, nodes: List[int], lo: int, hi: int) -> int:
        if hi - lo == 1:
            return nodes[lo]
        mid = lo + (hi - lo + 1) // 2
        return self.pair(self._balanced(nodes, lo, mid), self._balanced(nodes, mid, hi))

    # access

    @property
    def size(self) -> int:
        """r, the number of rules"""
        return len(self._left) - 1

    def __len__(self) -> int:
        return self.size

    def is_terminal(self, a: int) -> bool:
        return self._leaf[a] is not None

    def children(self, a: int) -> Tuple[int, int]:
        if self._leaf[a] is not None:
            raise GrammarError(f"nonterminal {a} is a terminal rule")
        return self._left[a], self._right[a]

    def leaf_symbols(self, a: int) -> Tuple[int, ...]:
        leaf = self._leaf[a]
        if leaf is None:
            raise GrammarError(f"nonterminal {a} is not a terminal rule")
        return leaf

    def exp_len(self, a: int) -> int:
        return self._len[a]

    def height(self, a: int) -> int:
        return self._height[a]

    def terminal_rule(self, symbols: Sequence[int]) -> Optional[int]:
        return self._terminals.get(tuple(symbols))

    def terminal_rules(self) -> Iterator[int]:
        return (a for a in range(1, self.size + 1) if self._leaf[a] is not None)

    def pair_rules(self) -> Iterator[Tuple[int, int, int]]:
        """(A, B, C) for every rule A -> BC, in identifier order"""
        return ((a, self._left[a], self._right[a]) for a in range(1, self.size + 1) if self._leaf[a] is None)

    @property
    def doc_count(self) -> int:
        return len(self.starts)

    @property
    def total_length(self) -> int:
        """N"""
        return sum(self._len[s] for s in self.starts)

    def boundaries(self) -> List[int]:
        """Global offset (0-based) where each document starts, plus N at the end"""
        bounds = [0]
        for s in self.starts:
            bounds.append(bounds[-1] + self._len[s])
        return bounds

    def alphabet_size(self) -> int:
        return max((max(leaf) for leaf in self._leaf[1:] if leaf), default=0)

    # extraction

    def iter_forward(self, a: int) -> Iterator[int]:
        """Symbols of s(A) left to right, expanded lazily"""
        stack = [a]
        while stack:
            node = stack.pop()
            leaf = self._leaf[node]
            if leaf is not None:
                yield from leaf
            else:
                stack.append(self._right[node])
                stack.append(self._left[node])

    def iter_backward(self, a: int) -> Iterator[int]:
        """Symbols of s(A) right to left, expanded lazily"""
        stack = [a]
        while stack:
            node = stack.pop()
            leaf = self._leaf[node]
            if leaf is not None:
                yield from reversed(leaf)
            else:
                stack.append(self._left[node])
                stack.append(self._right[node])

    def expand(self, a: int) -> List[int]:
        return list(self.iter_forward(a))

    def extract(self, a: int, i: int, j: int) -> List[int]:
        """s(A)[i..j], descending only into the subtrees that overlap it"""
        if not 1 <= i <= j <= self._len[a]:
            raise QueryRangeError(f"extract [{i},{j}] outside [1,{self._len[a]}]")
        out: List[int] = []
        stack = [(a, i, j)]
        while stack:
            node, lo, hi = stack.pop()
            leaf = self._leaf[node]
            if leaf is not None:
                out.extend(leaf[lo - 1:hi])
                continue
            left, right = self._left[node], self._right[node]
            split = self._len[left]
            if hi <= split:
                stack.append((left, lo, hi))
            elif lo > split:
                stack.append((right, lo - split, hi - split))
            else:
                stack.append((right, 1, hi - split))
                stack.append((left, lo, split))
        return out

    def extract_prefix(self, a: int, length: int) -> List[int]:
        if not 1 <= length <= self._len[a]:
            raise QueryRangeError(f"prefix length {length} outside [1,{self._len[a]}]")
        return list(islice(self.iter_forward(a), length))

    def extract_suffix(self, a: int, length: int) -> List[int]:
        if not 1 <= length <= self._len[a]:
            raise QueryRangeError(f"suffix length {length} outside [1,{self._len[a]}]")
        tail = list(islice(self.iter_backward(a), length))
        tail.reverse()
        return tail

    def documents(self) -> List[List[int]]:
        return [self.expand(s) for s in self.starts]

    # maintenance

    def reachable(self) -> List[bool]:
        seen = [False] * (self.size + 1)
        stack = list(self.starts)
        while stack:
            node = stack.pop()
            if seen[node]:
                continue
            seen[node] = True
            if self._leaf[node] is None:
                stack.append(self._left[node])
                stack.append(self._right[node])
        return seen

    def compact(self) -> "Grammar":
        """Copy keeping only nonterminals reachable from a start symbol, renumbered in order"""
        seen = self.reachable()
        compacted = Grammar(self.ms_len)
        remap = [0] * (self.size + 1)
        for a in range(1, self.size + 1):
            if not seen[a]:
                continue
            if self._leaf[a] is not None:
                remap[a] = compacted.terminal(self._leaf[a])
            else:
                remap[a] = compacted.pair(remap[self._left[a]], remap[self._right[a]])
        compacted.starts = [remap[s] for s in self.starts]
        dropped = self.size - compacted.size
        if dropped:
            logger.debug(f"compaction dropped {dropped} unreachable rules")
        return compacted

    def check(self) -> None:
        """Validate topological order, expansion lengths and rule uniqueness"""
        seen_pairs = set()
        seen_leaves = set()
        for a in range(1, self.size + 1):
            leaf = self._leaf[a]
            if leaf is not None:
                if not leaf:
                    raise GrammarError(f"terminal rule {a} is empty")
                if leaf in seen_leaves:
                    raise GrammarError(f"duplicate terminal rule {leaf}")
                seen_leaves.add(leaf)
                if self._len[a] != len(leaf) or len(leaf) > self.ms_len:
                    raise GrammarError(f"terminal rule {a} has an inconsistent length")
                continue
            left, right = self._left[a], self._right[a]
            if not (1 <= left < a and 1 <= right < a):
                raise GrammarError(f"rule {a} -> {left} {right} breaks topological order")
            if (left, right) in seen_pairs:
                raise GrammarError(f"duplicate rule right-hand side ({left}, {right})")
            seen_pairs.add((left, right))
            if self._len[a] != self._len[left] + self._len[right]:
                raise GrammarError(f"rule {a} has exp_len {self._len[a]} != children sum")

    def size_in_bits(self) -> int:
        r = self.size
        id_bits = _width(r)
        symbol_bits = _width(self.alphabet_size())
        bits = 0
        for a in range(1, r + 1):
            leaf = self._leaf[a]
            if leaf is None:
                bits += 2 * id_bits
            else:
                bits += _width(self.ms_len) + len(leaf) * symbol_bits
        bits += r * _width(max(self.total_length, 1))
        bits += len(self.starts) * id_bits
        return bits

    def dump(self, w: BlobWriter) -> None:
        w.tag(b"GRAM")
        w.varint(self.ms_len)
        w.varint(self.size)
        for a in range(1, self.size + 1):
            leaf = self._leaf[a]
            if leaf is not None:
                w.varint(0)
                w.varints(leaf)
            else:
                w.varint(1)
                w.varint(self._left[a])
                w.varint(self._right[a])
        w.varints(self.starts)

    @classmethod
    def load(cls, r: BlobReader) -> "Grammar":
        r.expect_tag(b"GRAM")
        grammar = cls(r.varint())
        rules = r.varint()
        for expected in range(1, rules + 1):
            kind = r.varint()
            if kind == 0:
                got = grammar.terminal(r.varints())
            else:
                left = r.varint()
                right = r.varint()
                if not (1 <= left < expected and 1 <= right < expected):
                    raise GrammarError(f"stored rule {expected} breaks topological order")
                got = grammar.pair(left, right)
            if got != expected:
                raise GrammarError(f"stored rule {expected} duplicates rule {got}")
        grammar.starts = r.varints()
        if any(not 1 <= s <= grammar.size for s in grammar.starts):
            raise GrammarError("stored start symbol out of range")
        return grammar


class OccCounts:
    """count(A): number of parse-tree nodes labelled A over all documents"""

    def __init__(self, counts: List[int]):
        self._counts = counts

    def __getitem__(self, a: int) -> int:
        return self._counts[a]

    def count(self, a: int) -> int:
        return self._counts[a]

    def __len__(self) -> int:
        return len(self._counts) - 1

    def as_list(self) -> List[int]:
        return list(self._counts)


def occ_counts(g: Grammar) -> OccCounts:
    """Propagate start-symbol multiplicities down in reverse topological order"""
    counts = [0] * (g.size + 1)
    for s in g.starts:
        counts[s] += 1
    for a in range(g.size, 0, -1):
        if g.is_terminal(a):
            continue
        left, right = g.children(a)
        if left >= a or right >= a:
            raise GrammarError(f"cycle or order violation at rule {a} -> {left} {right}")
        counts[left] += counts[a]
        counts[right] += counts[a]
    return OccCounts(counts)


def extract(g: Grammar, a: int, i: int, j: int) -> List[int]:
    return g.extract(a, i, j)


def extract_prefix(g: Grammar, a: int, length: int) -> List[int]:
    return g.extract_prefix(a, length)


def extract_suffix(g: Grammar, a: int, length: int) -> List[int]:
    return g.extract_suffix(a, length)


def build_generic(documents: Sequence[Sequence[int]], ms_len: int = 1) -> Grammar:
    """One perfectly balanced parse tree per document over leaves of up to ms_len symbols"""
    if not documents:
        raise BuildError("no documents to build a grammar from")
    if ms_len < 1:
        raise BuildError(f"metasymbol length must be >= 1, got {ms_len}")
    g = Grammar(ms_len=ms_len)
    for d, doc in enumerate(documents, start=1):
        if not len(doc):
            raise BuildError(f"document {d} is empty")
        if min(doc) < 1:
            raise BuildError(f"document {d} holds a symbol < 1")
        leaves = [g.terminal(tuple(doc[k:k + ms_len])) for k in range(0, len(doc), ms_len)]
        g.starts.append(g.balanced_tree(leaves))
    logger.debug(f"generic grammar: {g.size} rules for {len(documents)} documents, N={g.total_length}")
    return g


class EditSimulator:
    """
    Replays edits document by document while tracking character identities,
    so that an edit applied to documents [d_i, d_j] can be undone at d_j + 1.
    """

    def __init__(self, base: Sequence[int], doc_count: int):
        self._chars: List[List[int]] = [[tag, sym] for tag, sym in enumerate(base)]
        self._next_tag = len(base)
        self._doc_count = doc_count
        self._undo: Dict[int, List[tuple]] = defaultdict(list)
        self.doc = 0

    @property
    def text(self) -> List[int]:
        return [sym for _, sym in self._chars]

    def __len__(self) -> int:
        return len(self._chars)

    def pending_removals(self) -> int:
        """Characters present now that a scheduled undo will delete"""
        tags = {undo[1] for undos in self._undo.values() for undo in undos if undo[0] == "insert"}
        return sum(1 for tag, _ in self._chars if tag in tags)

    def _index_of(self, tag: int) -> Optional[int]:
        for idx, (t, _) in enumerate(self._chars):
            if t == tag:
                return idx
        return None

    def begin_document(self) -> List[EditEvent]:
        """Move to the next document and apply the undos that fall on it"""
        self.doc += 1
        events = []
        for undo in reversed(self._undo.pop(self.doc, [])):
            event = self._apply_undo(undo)
            if event is not None:
                events.append(event)
        return events

    def _apply_undo(self, undo: tuple) -> Optional[EditEvent]:
        kind = undo[0]
        if kind == "substitute":
            _, tag, old, new = undo
            idx = self._index_of(tag)
            if idx is None or self._chars[idx][1] != new:
                return None
            self._chars[idx][1] = old
            return EditEvent(doc=self.doc, kind="substitute", position=idx + 1, symbol=old)
        if kind == "insert":
            _, tag = undo
            idx = self._index_of(tag)
            if idx is None:
                return None
            del self._chars[idx]
            return EditEvent(doc=self.doc, kind="delete", position=idx + 1)
        _, tag, sym, left_tag, old_idx = undo
        if self._index_of(tag) is not None:
            return None
        if left_tag is None:
            idx = 0
        else:
            left_idx = self._index_of(left_tag)
            idx = left_idx + 1 if left_idx is not None else min(old_idx, len(self._chars))
        self._chars.insert(idx, [tag, sym])
        return EditEvent(doc=self.doc, kind="insert", position=idx + 1, symbol=sym)

    def apply(self, edit: Edit) -> EditEvent:
        """Apply an edit to the current document, scheduling its undo after last_doc"""
        if edit.first_doc != self.doc:
            raise ScriptError(f"edit for document {edit.first_doc} applied at document {self.doc}")
        length = len(self._chars)
        p = edit.position
        undo_doc = edit.last_doc + 1
        if edit.kind == "insert":
            if not 1 <= p <= length + 1:
                raise ScriptError(f"insert position {p} outside [1,{length + 1}] in document {self.doc}")
            tag = self._next_tag
            self._next_tag += 1
            self._chars.insert(p - 1, [tag, edit.symbol])
            undo = ("insert", tag)
        else:
            if not 1 <= p <= length:
                raise ScriptError(f"{edit.kind} position {p} outside [1,{length}] in document {self.doc}")
            tag, old = self._chars[p - 1]
            if edit.kind == "substitute":
                self._chars[p - 1][1] = edit.symbol
                undo = ("substitute", tag, old, edit.symbol)
            else:
                left_tag = self._chars[p - 2][0] if p > 1 else None
                del self._chars[p - 1]
                undo = ("delete", tag, old, left_tag, p - 1)
        if undo_doc <= self._doc_count:
            self._undo[undo_doc].append(undo)
        return EditEvent(doc=self.doc, kind=edit.kind, position=p,
                         symbol=edit.symbol if edit.kind != "delete" else 0)


def normalize_script(script: EditScript, base: Sequence[int]) -> List[EditEvent]:
    """Turn range edits into per-document events (apply at d_i, undo at d_j + 1)"""
    if len(base) != script.base_length:
        raise ScriptError(f"base document has length {len(base)}, script says {script.base_length}")
    by_doc: Dict[int, List[Edit]] = defaultdict(list)
    for edit in script.edits:
        by_doc[edit.first_doc].append(edit)
    sim = EditSimulator(base, script.doc_count)
    events: List[EditEvent] = []
    for _ in range(script.doc_count):
        events.extend(sim.begin_document())
        for edit in by_doc.get(sim.doc, []):
            events.append(sim.apply(edit))
    return events


def _apply_event(g: Grammar, root: int, event: EditEvent) -> int:
    """Path-copy one edit into the tree rooted at root and return the new root"""
    length = g.exp_len(root)
    p = event.position
    limit = length + 1 if event.kind == "insert" else length
    if not 1 <= p <= limit:
        raise ScriptError(f"{event.kind} position {p} outside [1,{limit}] in document {event.doc}")

    path: List[Tuple[int, bool]] = []
    node = root
    while not g.is_terminal(node):
        left, right = g.children(node)
        split = g.exp_len(left)
        if p <= split:
            path.append((node, False))
            node = left
        else:
            path.append((node, True))
            p -= split
            node = right

    leaf = list(g.leaf_symbols(node))
    offset = p - 1
    if event.kind == "substitute":
        leaf[offset] = event.symbol
        replacement = g.terminal(leaf)
    elif event.kind == "delete":
        del leaf[offset]
        if leaf:
            replacement = g.terminal(leaf)
        elif path:
            # the emptied leaf disappears and its sibling takes the parent's place
            parent, went_right = path.pop()
            left, right = g.children(parent)
            replacement = left if went_right else right
        else:
            raise ScriptError(f"deletion empties document {event.doc}")
    else:
        leaf.insert(offset, event.symbol)
        if len(leaf) > g.ms_len:
            cut = (len(leaf) + 1) // 2
            replacement = g.pair(g.terminal(leaf[:cut]), g.terminal(leaf[cut:]))
        else:
            replacement = g.terminal(leaf)

    for parent, went_right in reversed(path):
        left, right = g.children(parent)
        if went_right:
            replacement = g.balanced_pair(left, replacement)
        else:
            replacement = g.balanced_pair(replacement, right)
    return replacement


def build_repetitive(script: EditScript, base: Sequence[int], ms_len: int = 1) -> Grammar:
    """
    Balanced tree over the base document's metasymbols, then each document
    copies the previous tree and path-copies its own edit events into it.
    """
    if not len(base):
        raise BuildError("base document is empty")
    events = normalize_script(script, base)
    by_doc: Dict[int, List[EditEvent]] = defaultdict(list)
    for event in events:
        by_doc[event.doc].append(event)

    g = Grammar(ms_len=ms_len)
    leaves = [g.terminal(base[i:i + ms_len]) for i in range(0, len(base), ms_len)]
    root = g.balanced_tree(leaves)
    for d in range(1, script.doc_count + 1):
        for event in by_doc.get(d, []):
            root = _apply_event(g, root, event)
        g.starts.append(root)

    compacted = g.compact()
    logger.debug(
        f"repetitive grammar: {compacted.size} rules, {len(events)} events, "
        f"D={script.doc_count}, N={compacted.total_length}"
    )
    return compacted
