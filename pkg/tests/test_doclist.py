"""
Tests for document listing
Range lists, inverted lists, per-range distinct documents and whole-pattern listing
"""
import itertools
import random
from types import SimpleNamespace

import pytest

from src.codec import BlobReader, BlobWriter
from src.collection import Collection, generate, naive_list
from src.doclist import (
    DocIndex,
    RangeList,
    build_doc_index,
    doc_stats,
    inverted_lists,
    leftist_distinct,
    list_documents,
    range_distinct,
)
from src.exceptions import ConsistencyError, IntegrityError, QueryRangeError
from src.grammar import build_repetitive
from src.grid import Grid, NodeRange, Point
from src.index import PatternIndex
from src.models import Edit, EditScript, IndexConfig, ListingStats
from src.succinct import BaseRMQ, ScratchBits, previous_occurrences


SYMBOLS = {c: k for k, c in enumerate("abcdklr", start=1)}
TEXTS = ["abracada", "abrakada", "ablakada"]

# document array of a node and its previous-occurrence array
FIGURE_L = [1, 2, 3, 1, 1, 1, 2, 3, 2, 3, 3, 1, 2]
FIGURE_E = [0, 0, 0, 1, 4, 5, 2, 3, 7, 8, 10, 6, 9]


def encode(text):
    return [SYMBOLS[c] for c in text]


def example_script():
    return EditScript(base_length=8, doc_count=3, edits=[
        Edit(kind="substitute", position=5, symbol=SYMBOLS["k"], first_doc=2, last_doc=3),
        Edit(kind="substitute", position=3, symbol=SYMBOLS["l"], first_doc=3, last_doc=3),
    ])


def example_dix(layout="leaves"):
    g = build_repetitive(example_script(), encode("abracada"))
    return build_doc_index(PatternIndex.build(g, IndexConfig(list_layout=layout)))


def generated_dix(seed, layout="leaves", ms_len=1, n=30, doc_count=8, s=6):
    collection, script = generate(seed, n, doc_count, s, 3, "range")
    g = build_repetitive(script, collection.base, ms_len)
    pidx = PatternIndex.build(g, IndexConfig(ms_len=ms_len, list_layout=layout))
    return collection, DocIndex.build(pidx)


def figure_dix():
    """A one-row grid whose single node holds the lists [1,2,3],[1],[1],[1,2,3],[2,3],[3],[1,2]"""
    grid = Grid.build([Point(x=k, y=1, label=k) for k in range(1, 8)], 7, 1)
    dix = DocIndex(SimpleNamespace(config=IndexConfig(), doc_count=3, grid=grid))
    lists = [RangeList()] + [RangeList.from_documents(docs) for docs in
                             ([1, 2, 3], [1], [1], [1, 2, 3], [2, 3], [3], [1, 2])]
    dix.position_lists = lists[1:]
    dix.nodes[(1, 1)] = dix._build_node((1, 1), list(range(1, 8)), lists)
    return dix


def node_ranges(dix, rng, per_node=None):
    """NodeRanges over every node; all of them, or per_node random ones"""
    out = []
    for key, labels in sorted(dix.grid.node_labels().items()):
        size = len(labels)
        if per_node is None:
            out.extend(NodeRange(key[0], key[1], i, j) for i in range(1, size + 1) for j in range(i, size + 1))
        else:
            for _ in range(per_node):
                i = rng.randint(1, size)
                out.append(NodeRange(key[0], key[1], i, rng.randint(i, size)))
    return out


def span_documents(dix, nr):
    L, _ = dix.materialize(nr.a, nr.b)
    first, last = dix.nodes[nr.node].span(nr)
    return L[first - 1:last]


class TestRangeList:
    """Tests for range-encoded document lists"""

    def test_from_documents(self):
        """Test consecutive identifiers merge into ranges"""
        lst = RangeList.from_documents([1, 2, 3, 5, 7, 8])
        assert lst.ranges == [(1, 3), (5, 5), (7, 8)]
        assert len(lst) == 6
        assert lst.range_count == 3
        assert lst.documents() == [1, 2, 3, 5, 7, 8]

    def test_access(self):
        """Test the k-th document and iteration from a position"""
        lst = RangeList([(2, 4), (9, 9), (11, 13)])
        assert [lst.at(k) for k in range(1, 8)] == [2, 3, 4, 9, 11, 12, 13]
        assert list(lst.iter_from(3)) == [4, 9, 11, 12, 13]
        assert list(lst.iter_from(6)) == [12, 13]
        assert list(lst.iter_from(8)) == []

    def test_access_out_of_range(self):
        """Test positions beyond the list"""
        with pytest.raises(QueryRangeError):
            RangeList([(1, 2)]).at(3)

    def test_rejects_touching_ranges(self):
        """Test ranges must be maximal and increasing"""
        with pytest.raises(IntegrityError):
            RangeList([(1, 2), (3, 4)])
        with pytest.raises(IntegrityError):
            RangeList([(5, 4)])
        with pytest.raises(IntegrityError):
            RangeList.from_documents([3, 2])

    def test_dump_load(self):
        """Test a list reads back equal"""
        lst = RangeList([(1, 1), (4, 10), (12, 12)])
        w = BlobWriter()
        lst.dump(w)
        assert RangeList.load(BlobReader(w.getvalue())) == lst


class TestInvertedLists:
    """Tests for per-nonterminal document lists"""

    @staticmethod
    def brute_lists(g):
        lists = {a: [] for a in range(1, g.size + 1)}
        for d, start in enumerate(g.starts, start=1):
            seen = set()
            stack = [start]
            while stack:
                a = stack.pop()
                if a in seen:
                    continue
                seen.add(a)
                if not g.is_terminal(a):
                    stack.extend(g.children(a))
            for a in seen:
                lists[a].append(d)
        return lists

    def test_example_lists(self):
        """Test every list holds exactly the documents whose tree contains the rule"""
        g = build_repetitive(example_script(), encode("abracada"))
        lists = inverted_lists(g)
        for a, docs in self.brute_lists(g).items():
            assert lists[a].documents() == sorted(docs)

    def test_generated_lists(self):
        """Test lists on generated collections with insertions and deletions"""
        for seed in range(5):
            collection, script = generate(seed, 40, 12, 10, 4, "subtree")
            g = build_repetitive(script, collection.base)
            lists = inverted_lists(g)
            for a, docs in self.brute_lists(g).items():
                assert lists[a].documents() == sorted(docs)

    def test_example_list_encoding(self):
        """Test shared and edited subtrees keep their documents as ranges"""
        g = build_repetitive(example_script(), encode("abracada"))
        lists = inverted_lists(g)
        by_text = {tuple(g.expand(a)): lists[a].ranges for a in range(1, g.size + 1)}
        assert by_text[tuple(encode("abra"))] == [(1, 2)]
        assert by_text[tuple(encode("abla"))] == [(3, 3)]
        assert by_text[tuple(encode("kada"))] == [(2, 3)]
        assert by_text[tuple(encode("cada"))] == [(1, 1)]

    def test_unchanged_collection_single_range(self):
        """Test identical documents give one range per list"""
        collection, script = generate(3, 20, 6, 0, 3, "range")
        g = build_repetitive(script, collection.base)
        for lst in inverted_lists(g)[1:]:
            if len(lst):
                assert lst.ranges == [(1, 6)]


class TestLeftistDistinct:
    """Tests for the explicit-array reference listing"""

    def test_example_array(self):
        """Test the range [5, 13] of the example array"""
        q = BaseRMQ(FIGURE_E)
        V = ScratchBits(3)
        result = leftist_distinct(FIGURE_L, q, V, 5, 13)
        assert result.values == [1, 2, 3]
        assert result.positions == [5, 7, 8]
        assert sorted(V.marked()) == [1, 2, 3]

    def test_empty_range(self):
        """Test sp > ep reports nothing"""
        result = leftist_distinct(FIGURE_L, BaseRMQ(FIGURE_E), ScratchBits(3), 4, 3)
        assert result.values == []

    def test_random_arrays(self):
        """Test against a set on random arrays with values already marked"""
        rng = random.Random(21)
        for _ in range(200):
            D = rng.randint(1, 6)
            L = [rng.randint(1, D) for _ in range(rng.randint(1, 14))]
            q = BaseRMQ(previous_occurrences(L))
            i = rng.randint(1, len(L))
            j = rng.randint(i, len(L))
            V = ScratchBits(D)
            prior = {v for v in range(1, D + 1) if rng.random() < 0.3}
            for v in prior:
                V.mark(v)
            result = leftist_distinct(L, q, V, i, j)
            assert len(result.values) == len(set(result.values))
            assert set(result.values) == set(L[i - 1:j]) - prior
            for value, pos in zip(result.values, result.positions):
                assert L[pos - 1] == value


class TestRangeDistinct:
    """Tests for distinct documents of one grid node range"""

    @pytest.mark.parametrize("layout", ["leaves", "root"])
    def test_example_every_range(self, layout):
        """Test every range of every node of the example grid"""
        dix = example_dix(layout)
        for nr in node_ranges(dix, None):
            expected = span_documents(dix, nr)
            V = ScratchBits(dix.doc_count)
            out = range_distinct(dix, nr, V)
            assert sorted(out) == sorted(set(expected))

    @pytest.mark.parametrize("layout", ["leaves", "root"])
    def test_generated_with_prior_marks(self, layout):
        """Test documents already in V are skipped and the rest get marked"""
        rng = random.Random(layout)
        for seed in range(4):
            _, dix = generated_dix(seed, layout)
            for nr in node_ranges(dix, rng, per_node=6):
                expected = set(span_documents(dix, nr))
                V = ScratchBits(dix.doc_count)
                prior = {d for d in range(1, dix.doc_count + 1) if rng.random() < 0.25}
                for d in prior:
                    V.mark(d)
                out = dix.range_distinct(nr, V)
                assert len(out) == len(set(out))
                assert set(out) == expected - prior
                assert set(V.marked()) == prior | expected

    def test_figure_node(self):
        """Test node positions [3, 7] cover L[5..13] and report 1, 2, 3 in that order"""
        dix = figure_dix()
        assert dix.materialize(1, 1) == (FIGURE_L, FIGURE_E)
        nr = NodeRange(1, 1, 3, 7)
        assert dix.nodes[(1, 1)].span(nr) == (5, 13)
        V = ScratchBits(3)
        assert dix.range_distinct(nr, V) == [1, 2, 3]
        assert sorted(V.marked()) == [1, 2, 3]

    def test_every_prior_state(self):
        """Test every range of every node against every set of documents already in V"""
        priors = [set(c) for k in range(5) for c in itertools.combinations(range(1, 5), k)]
        for seed in range(3):
            for layout in ("leaves", "root"):
                _, dix = generated_dix(seed, layout, n=12, doc_count=4, s=4)
                for nr in node_ranges(dix, None):
                    expected = set(span_documents(dix, nr))
                    for prior in priors:
                        V = ScratchBits(dix.doc_count)
                        for d in prior:
                            V.mark(d)
                        out = dix.range_distinct(nr, V)
                        assert len(out) == len(set(out))
                        assert set(out) == expected - prior
                        assert set(V.marked()) == prior | expected

    def test_step_bound(self):
        """Test RMQ calls plus opened lists stay linear in the distinct documents of a range"""
        rng = random.Random(5)
        for seed in range(4):
            _, dix = generated_dix(seed, n=40, doc_count=16, s=12)
            for nr in node_ranges(dix, rng, per_node=8):
                stats = ListingStats()
                distinct = len(set(span_documents(dix, nr)))
                dix.range_distinct(nr, ScratchBits(dix.doc_count), stats)
                assert stats.rmq_calls + stats.lists_opened <= 6 * (distinct + 1)

    def test_shared_scratch_rolled_back(self):
        """Test the range-local marks are cleared after each range"""
        dix = example_dix()
        W = ScratchBits(dix.doc_count)
        nr = node_ranges(dix, None)[0]
        dix.range_distinct(nr, ScratchBits(dix.doc_count), W=W)
        assert W.is_clear()

    def test_invalid_range(self):
        """Test ranges outside the node"""
        dix = example_dix()
        key, labels = next(iter(dix.grid.node_labels().items()))
        with pytest.raises(QueryRangeError):
            dix.range_distinct(NodeRange(key[0], key[1], 1, len(labels) + 1), ScratchBits(dix.doc_count))


class TestListDocuments:
    """Tests for listing the documents of a pattern"""

    @pytest.mark.parametrize("layout", ["leaves", "root"])
    def test_example_patterns(self, layout):
        """Test the example collection"""
        dix = example_dix(layout)
        assert list_documents(dix, encode("bra")).documents == [1, 2]
        assert dix.list_documents(encode("a")).documents == [1, 2, 3]
        assert dix.list_documents(encode("c")).documents == [1]
        assert dix.list_documents(encode("aka")).documents == [2, 3]
        assert dix.list_documents(encode("bla")).documents == [3]
        assert dix.list_documents(encode("rr")).documents == []

    def test_discovery_order_is_permutation(self):
        """Test discovery order holds the same documents, each once"""
        result = example_dix().list_documents(encode("ada"))
        assert sorted(result.discovery_order) == result.documents == [1, 2, 3]

    def test_empty_pattern(self):
        """Test the empty pattern is rejected"""
        with pytest.raises(QueryRangeError):
            example_dix().list_documents([])

    @pytest.mark.parametrize("layout", ["leaves", "root"])
    def test_every_substring(self, layout):
        """Test all substrings of the example against a scan"""
        dix = example_dix(layout)
        docs = [encode(t) for t in TEXTS]
        c = Collection(documents=docs, alphabet=[ord(ch) for ch in "abcdklr"])
        for doc in docs:
            for i in range(len(doc)):
                for k in range(i + 1, len(doc) + 1):
                    assert dix.list_documents(doc[i:k]).documents == naive_list(c, doc[i:k])

    @pytest.mark.parametrize("ms_len", [1, 3])
    @pytest.mark.parametrize("layout", ["leaves", "root"])
    def test_generated_against_oracle(self, ms_len, layout):
        """Test generated collections with occurring and random patterns"""
        rng = random.Random(ms_len)
        for seed in range(5):
            collection, dix = generated_dix(seed, layout, ms_len, n=40, doc_count=10, s=8)
            patterns = []
            for _ in range(40):
                doc = rng.choice(collection.documents)
                m = rng.randint(1, min(8, len(doc)))
                start = rng.randint(0, len(doc) - m)
                patterns.append(doc[start:start + m])
            patterns += [[rng.randint(1, 3) for _ in range(rng.randint(1, 6))] for _ in range(20)]
            for pattern in patterns:
                assert dix.list_documents(pattern).documents == naive_list(collection, pattern)


class TestDocStats:
    """Tests for space and run statistics"""

    def test_example_stats(self):
        """Test the report is consistent with the index"""
        dix = example_dix()
        report = doc_stats(dix)
        assert report.documents == 3
        assert report.total_length == 24
        assert report.points == dix.grid.size
        assert len(report.rho_per_level) == len(report.nodes_per_level)
        assert report.nodes_per_level[0] == 1
        assert report.total_bits == report.bits.total > 0

    def test_runs_at_most_entries(self):
        """Test no node has more runs than list entries"""
        _, dix = generated_dix(2)
        for nd in dix.nodes.values():
            assert 1 <= nd.runs <= nd.total

    def test_runs_match_rebuilt_e(self):
        """Test every node's run count equals the runs of its rebuilt E array"""
        dixes = [example_dix(), figure_dix()] + [generated_dix(seed, layout)[1]
                                                 for seed in range(3) for layout in ("leaves", "root")]
        for dix in dixes:
            for (a, b), nd in dix.nodes.items():
                E = dix.materialize(a, b)[1]
                assert nd.runs == 1 + sum(1 for k in range(1, len(E)) if E[k] < E[k - 1])
                assert nd.total == len(E)

    def test_identical_documents_few_runs(self):
        """Test identical documents give a single nondecreasing run in every node"""
        collection, script = generate(7, 30, 20, 0, 4, "range")
        g = build_repetitive(script, collection.base)
        dix = DocIndex.build(PatternIndex.build(g, IndexConfig()))
        for nd in dix.nodes.values():
            assert nd.runs == 1


class TestDocIndexSerialisation:
    """Tests for listing structures dump and load"""

    def test_dump_load(self):
        """Test a loaded index lists like the original"""
        dix = example_dix()
        w = BlobWriter()
        dix.dump(w)
        loaded = DocIndex.load(BlobReader(w.getvalue()), dix.pidx)
        for text in ("bra", "a", "ka", "cada"):
            assert loaded.list_documents(encode(text)).documents == dix.list_documents(encode(text)).documents

    def test_load_rejects_other_layout(self):
        """Test the stored layout must match the configured one"""
        dix = example_dix("leaves")
        w = BlobWriter()
        dix.dump(w)
        other = example_dix("root").pidx
        with pytest.raises(ConsistencyError):
            DocIndex.load(BlobReader(w.getvalue()), other)
