"""
Tests for the succinct building blocks
Bitvectors, scratch marks, range-minimum structures and distinct-value listing
"""
import itertools
import math
import random

import pytest

from src.codec import BlobReader, BlobWriter
from src.exceptions import BuildError, ConsistencyError, DomainError, QueryRangeError
from src.doclist import leftist_distinct
from src.succinct import (
    SPARSE_SIZE_FACTOR,
    BaseRMQ,
    BitVector,
    RunLengthRMQ,
    ScratchBits,
    SparseBitVector,
    distinct_muthu,
    distinct_sadakane,
    previous_occurrences,
)


EXAMPLE_L = [1, 2, 3, 1, 1, 1, 2, 3, 2, 3, 3, 1, 2]
EXAMPLE_E = [0, 0, 0, 1, 4, 5, 2, 3, 7, 8, 10, 6, 9]


def naive_rank(bits, v, k):
    return sum(1 for b in bits[:k] if b == v)


def naive_select(bits, v, j):
    seen = 0
    for pos, b in enumerate(bits, start=1):
        if b == v:
            seen += 1
            if seen == j:
                return pos
    raise AssertionError("select out of range")


def leftmost_min(values, i, j):
    window = values[i - 1:j]
    return i + window.index(min(window))


class TestBitVector:
    """Tests for the plain bitvector"""

    def test_rank_select_small(self):
        """Test rank and select on a short bitvector"""
        bv = BitVector("1011001")
        assert bv.rank(1, 0) == 0
        assert bv.rank(1, 4) == 3
        assert bv.rank(0, 4) == 1
        assert bv.select(1, 1) == 1
        assert bv.select(1, 3) == 4
        assert bv.select(0, 1) == 2
        assert bv.select(0, 3) == 6

    def test_against_naive_across_blocks(self):
        """Test rank and select across several directory blocks"""
        rng = random.Random(5)
        bits = [rng.randint(0, 1) for _ in range(2000)]
        bv = BitVector(bits)
        assert bv.ones == sum(bits)
        for k in range(0, 2001, 37):
            assert bv.rank(1, k) == naive_rank(bits, 1, k)
            assert bv.rank(0, k) == naive_rank(bits, 0, k)
        for j in range(1, bv.ones + 1, 29):
            assert bv.select(1, j) == naive_select(bits, 1, j)
        for j in range(1, len(bits) - bv.ones + 1, 31):
            assert bv.select(0, j) == naive_select(bits, 0, j)

    def test_rank_select_inverse(self):
        """Test rank(select(j)) = j"""
        bv = BitVector("0110100111010")
        for j in range(1, bv.ones + 1):
            assert bv.rank(1, bv.select(1, j)) == j

    def test_out_of_range(self):
        """Test invalid positions raise QueryRangeError"""
        bv = BitVector("101")
        with pytest.raises(QueryRangeError):
            bv.access(0)
        with pytest.raises(QueryRangeError):
            bv.rank(1, 4)
        with pytest.raises(QueryRangeError):
            bv.select(1, 3)
        with pytest.raises(IndexError):
            bv.select(0, 2)

    def test_empty(self):
        """Test an empty bitvector answers rank(0)"""
        bv = BitVector([])
        assert len(bv) == 0
        assert bv.rank(1, 0) == 0
        with pytest.raises(QueryRangeError):
            bv.select(1, 1)

    def test_dump_load(self):
        """Test a bitvector survives serialisation"""
        bv = BitVector("1100101110001")
        w = BlobWriter()
        bv.dump(w)
        loaded = BitVector.load(BlobReader(w.getvalue()))
        assert loaded == bv
        assert loaded.select(1, 5) == bv.select(1, 5)


class TestSparseBitVector:
    """Tests for the Elias-Fano bitvector"""

    def test_matches_plain(self):
        """Test rank, select and access agree with a plain bitvector"""
        rng = random.Random(11)
        length = 700
        positions = sorted(rng.sample(range(1, length + 1), 40))
        sparse = SparseBitVector(length, positions)
        bits = [0] * length
        for p in positions:
            bits[p - 1] = 1
        plain = BitVector(bits)
        assert sparse.ones == 40
        assert sparse.positions() == positions
        for k in range(0, length + 1, 13):
            assert sparse.rank(1, k) == plain.rank(1, k)
            assert sparse.rank(0, k) == plain.rank(0, k)
        for j in range(1, 41):
            assert sparse.select(1, j) == positions[j - 1]
        for k in range(1, length + 1, 17):
            assert sparse.access(k) == bits[k - 1]

    def test_size_within_bound(self):
        """Test measured size stays within the constant-factor Elias-Fano bound"""
        rng = random.Random(4)
        for length in (1, 2, 7, 100, 1000, 5000, 100000):
            for ones in sorted({1, 2, 4, max(1, length // 64), max(1, length // 2), length}):
                if ones > min(length, 5000):
                    continue
                sparse = SparseBitVector(length, sorted(rng.sample(range(1, length + 1), ones)))
                bound = SPARSE_SIZE_FACTOR * ones * (math.log2(length / ones) + 2)
                assert sparse.size_bound() == pytest.approx(bound)
                assert sparse.size_in_bits() <= bound

    def test_single_one_is_small(self):
        """Test one set bit in a long vector costs about its logarithm"""
        sparse = SparseBitVector(1000, [500])
        assert sparse.size_in_bits() <= 3 * (math.log2(1000) + 2)

    def test_dense_and_full(self):
        """Test every position set"""
        sparse = SparseBitVector(5, [1, 2, 3, 4, 5])
        assert [sparse.rank(1, k) for k in range(6)] == [0, 1, 2, 3, 4, 5]
        assert sparse.select(1, 4) == 4

    def test_rejects_unsorted(self):
        """Test positions must increase strictly"""
        with pytest.raises(BuildError):
            SparseBitVector(10, [3, 3])
        with pytest.raises(BuildError):
            SparseBitVector(10, [11])

    def test_select_range(self):
        """Test select beyond the number of ones"""
        sparse = SparseBitVector(10, [2, 7])
        with pytest.raises(QueryRangeError):
            sparse.select(1, 3)

    def test_dump_load(self):
        """Test a sparse bitvector survives serialisation"""
        sparse = SparseBitVector(300, [1, 50, 51, 299])
        w = BlobWriter()
        sparse.dump(w)
        loaded = SparseBitVector.load(BlobReader(w.getvalue()))
        assert loaded.positions() == [1, 50, 51, 299]
        assert loaded.rank(1, 60) == 3


class TestScratchBits:
    """Tests for the resettable mark set"""

    def test_mark_and_reset(self):
        """Test marking twice and resetting only touched bits"""
        V = ScratchBits(8)
        assert V.mark(3) is True
        assert V.mark(3) is False
        assert V.mark(8) is True
        assert 3 in V and V.test(8)
        assert sorted(V.marked()) == [3, 8]
        V.reset()
        assert V.is_clear()

    def test_checkpoint_rollback(self):
        """Test rollback keeps marks made before the checkpoint"""
        V = ScratchBits(5)
        V.mark(1)
        cp = V.checkpoint()
        V.mark(2)
        V.mark(4)
        V.rollback(cp)
        assert 1 in V
        assert 2 not in V and 4 not in V

    def test_domain(self):
        """Test values outside [1, D]"""
        V = ScratchBits(4)
        with pytest.raises(DomainError):
            V.mark(0)
        with pytest.raises(ValueError):
            V.mark(5)


class TestBaseRMQ:
    """Tests for the Cartesian-tree RMQ"""

    def test_example_array(self):
        """Test the minimum of E over [5,13] sits at position 7"""
        q = BaseRMQ(EXAMPLE_E)
        assert q.query(5, 13) == 7
        assert q.query(1, 13) == 1
        assert q.query(9, 11) == 9

    def test_leftmost_tie(self):
        """Test ties resolve to the leftmost position"""
        q = BaseRMQ([3, 1, 2, 1, 1])
        assert q.query(1, 5) == 2
        assert q.query(3, 5) == 4

    def test_exhaustive_small(self):
        """Test every range of random arrays against a scan"""
        rng = random.Random(3)
        for _ in range(40):
            values = [rng.randint(0, 6) for _ in range(rng.randint(1, 25))]
            q = BaseRMQ(values)
            for i in range(1, len(values) + 1):
                for j in range(i, len(values) + 1):
                    assert q.query(i, j) == leftmost_min(values, i, j)

    def test_values_not_retained(self):
        """Test values are only available when retained"""
        assert BaseRMQ([2, 1], retain_values=True).values == [2, 1]
        with pytest.raises(ConsistencyError):
            BaseRMQ([2, 1]).values

    def test_invalid_range(self):
        """Test reversed or out-of-bounds ranges"""
        q = BaseRMQ([1, 2, 3])
        with pytest.raises(QueryRangeError):
            q.query(3, 2)
        with pytest.raises(QueryRangeError):
            q.query(1, 4)

    def test_dump_load(self):
        """Test a loaded RMQ answers like the original"""
        values = [5, 3, 8, 1, 9, 2, 2, 7]
        q = BaseRMQ(values)
        w = BlobWriter()
        q.dump(w)
        loaded = BaseRMQ.load(BlobReader(w.getvalue()))
        for i in range(1, 9):
            for j in range(i, 9):
                assert loaded.query(i, j) == q.query(i, j)


class TestRunLengthRMQ:
    """Tests for the run-length RMQ"""

    def test_example_runs(self):
        """Test the example E array has three runs with heads 1, 7 and 12"""
        q = RunLengthRMQ.build(EXAMPLE_E)
        assert q.runs == 3
        assert q.heads.positions() == [1, 7, 12]
        assert q.candidates(5, 13) == (5, 7)

    def test_no_head_in_range(self):
        """Test a range inside one run has no head candidate"""
        q = RunLengthRMQ.build(EXAMPLE_E)
        assert q.candidates(2, 6) == (2, None)

    def test_candidates_contain_minimum(self):
        """Test the true minimum is one of the two candidates"""
        rng = random.Random(17)
        for _ in range(60):
            values = [rng.randint(0, 9) for _ in range(rng.randint(1, 30))]
            q = RunLengthRMQ.build(values)
            for i in range(1, len(values) + 1):
                for j in range(i, len(values) + 1):
                    left, head = q.candidates(i, j)
                    best = min(values[i - 1:j])
                    options = [values[left - 1]] + ([values[head - 1]] if head else [])
                    assert min(options) == best

    def test_nondecreasing_single_run(self):
        """Test a sorted array is one run"""
        assert RunLengthRMQ.build([0, 0, 1, 4, 4]).runs == 1

    def test_empty_rejected(self):
        """Test an empty array cannot be indexed"""
        with pytest.raises(BuildError):
            RunLengthRMQ.build([])


class TestDistinct:
    """Tests for the three distinct-value listings"""

    def test_previous_occurrences(self):
        """Test the E array of the example"""
        assert previous_occurrences(EXAMPLE_L) == EXAMPLE_E

    def test_muthu_example(self):
        """Test distinct values over [5,13] with the first RMQ answer at 7"""
        q = BaseRMQ(EXAMPLE_E)
        result = distinct_muthu(EXAMPLE_L, EXAMPLE_E, q, 5, 13, check=True)
        assert result.as_set() == {1, 2, 3}
        assert result.positions[0] == 7
        assert result.values[0] == 2

    def test_leftist_example(self):
        """Test the leftist listing reports 1, 2, 3 at positions 5, 7, 8"""
        q = BaseRMQ(EXAMPLE_E)
        V = ScratchBits(3)
        result = leftist_distinct(EXAMPLE_L, q, V, 5, 13)
        assert result.values == [1, 2, 3]
        assert result.positions == [5, 7, 8]
        assert result.rmq_calls <= 2 * 3 + 1

    def test_sadakane_example(self):
        """Test the marks-based listing leaves V as it found it"""
        q = BaseRMQ(EXAMPLE_E)
        V = ScratchBits(3)
        result = distinct_sadakane(EXAMPLE_L, q, 3, 5, 13, V)
        assert result.as_set() == {1, 2, 3}
        assert V.is_clear()

    def test_muthu_detects_bad_e(self):
        """Test a malformed E array is reported"""
        bad = list(EXAMPLE_E)
        bad[3] = 2
        q = BaseRMQ(bad)
        with pytest.raises(ConsistencyError):
            distinct_muthu(EXAMPLE_L, bad, q, 1, 13, check=True)

    def test_sadakane_domain(self):
        """Test values larger than D are rejected"""
        L = [1, 5]
        q = BaseRMQ(previous_occurrences(L))
        with pytest.raises(DomainError):
            distinct_sadakane(L, q, 5, 1, 2, ScratchBits(4))

    def test_empty_range(self):
        """Test i > j gives nothing"""
        q = BaseRMQ(EXAMPLE_E)
        assert distinct_muthu(EXAMPLE_L, EXAMPLE_E, q, 4, 3).values == []

    def test_equivalence_exhaustive(self):
        """Test the three listings agree with a scan on every small array and range"""
        for length in range(1, 7):
            for L in itertools.product(range(1, 5), repeat=length):
                E = previous_occurrences(L)
                q = BaseRMQ(E)
                V = ScratchBits(4)
                for i in range(1, length + 1):
                    for j in range(i, length + 1):
                        expected = set(L[i - 1:j])
                        assert distinct_muthu(L, E, q, i, j).as_set() == expected
                        assert distinct_sadakane(L, q, 4, i, j, V).as_set() == expected
                        left = leftist_distinct(L, q, V, i, j)
                        assert left.as_set() == expected
                        assert len(left.values) == len(expected)
                        V.reset()

    @pytest.mark.parametrize("length", [7, 8])
    def test_equivalence_exhaustive_longer(self, length):
        """Test every array over three values on every range, and over four values on the full range"""
        V = ScratchBits(4)
        for L in itertools.product(range(1, 4), repeat=length):
            E = previous_occurrences(L)
            q = BaseRMQ(E)
            for i in range(1, length + 1):
                for j in range(i, length + 1):
                    expected = set(L[i - 1:j])
                    assert distinct_muthu(L, E, q, i, j).as_set() == expected
                    assert distinct_sadakane(L, q, 4, i, j, V).as_set() == expected
                    left = leftist_distinct(L, q, V, i, j)
                    assert left.as_set() == expected
                    assert left.rmq_calls <= 2 * len(expected) + 1
                    V.reset()
        for L in itertools.product(range(1, 5), repeat=length):
            E = previous_occurrences(L)
            q = BaseRMQ(E)
            expected = set(L)
            assert distinct_muthu(L, E, q, 1, length).as_set() == expected
            assert distinct_sadakane(L, q, 4, 1, length, V).as_set() == expected
            assert leftist_distinct(L, q, V, 1, length).as_set() == expected
            V.reset()

    def test_leftist_every_prior_state(self):
        """Test every array of length <= 4, every range and every set of prior marks"""
        priors = [set(c) for k in range(5) for c in itertools.combinations(range(1, 5), k)]
        for length in range(1, 5):
            for L in itertools.product(range(1, 5), repeat=length):
                q = BaseRMQ(previous_occurrences(L))
                for i in range(1, length + 1):
                    for j in range(i, length + 1):
                        for prior in priors:
                            V = ScratchBits(4)
                            for v in prior:
                                V.mark(v)
                            result = leftist_distinct(L, q, V, i, j)
                            assert set(result.values) == set(L[i - 1:j]) - prior
                            assert len(result.values) == len(set(result.values))
                            assert set(V.marked()) == prior | set(L[i - 1:j])

    def test_equivalence_random_long(self):
        """Test arrays of length up to 10 with prior marks"""
        rng = random.Random(23)
        for _ in range(300):
            L = [rng.randint(1, 4) for _ in range(rng.randint(1, 10))]
            E = previous_occurrences(L)
            q = BaseRMQ(E)
            i = rng.randint(1, len(L))
            j = rng.randint(i, len(L))
            V = ScratchBits(4)
            prior = {v for v in range(1, 5) if rng.random() < 0.3}
            for v in prior:
                V.mark(v)
            result = leftist_distinct(L, q, V, i, j)
            assert result.as_set() == set(L[i - 1:j]) - prior
            assert result.rmq_calls <= 2 * len(set(L[i - 1:j])) + 1
