"""
Succinct building blocks: bitvectors with rank/select, range-minimum queries
(plain and run-length) and the two classic distinct-values listings.

All positions are 1-based. rank_v(k) counts v-bits in [1, k]; select_v(j) is
the position of the j-th v-bit.
"""
import logging
import math
from bisect import bisect_left
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from bitarray import bitarray
from bitarray.util import ba2int, count_n, int2ba

from src.codec import BlobReader, BlobWriter
from src.exceptions import BuildError, ConsistencyError, DomainError, QueryRangeError
from src.models import DistinctResult


logger = logging.getLogger(__name__)

# SparseBitVector.size_in_bits() <= SPARSE_SIZE_FACTOR * rho * (log2(t / rho) + 2)
SPARSE_SIZE_FACTOR = 3


def _ilog2(value: int) -> int:
    """Integral part of the base-2 logarithm of a positive integer"""
    return value.bit_length() - 1


def _width(value: int) -> int:
    """Bits needed to store integers in [0, value]"""
    return max(1, value.bit_length())


class BitVector:
    """
    Plain bitvector with a one-level rank directory.

    The directory holds the number of 1s before every block of BLOCK bits;
    rank adds a popcount inside the block and select binary-searches the
    directory before counting inside one block.
    """

    BLOCK = 512

    def __init__(self, bits: Union[bitarray, Sequence[int], str]):
        self._bits = bitarray(bits, endian="big") if not isinstance(bits, bitarray) else bitarray(bits)
        self._t = len(self._bits)
        self._build_directory()

    def _build_directory(self) -> None:
        blocks = self._t // self.BLOCK + 1
        before = np.zeros(blocks + 1, dtype=np.int64)
        for b in range(blocks):
            start = b * self.BLOCK
            stop = min(start + self.BLOCK, self._t)
            before[b + 1] = before[b] + (self._bits.count(1, start, stop) if start < stop else 0)
        self._ones_before = before
        self._zeros_before = np.arange(blocks + 1, dtype=np.int64) * self.BLOCK - before
        self._zeros_before[-1] = self._t - before[-1]
        self._ones = int(before[-1])

    def __len__(self) -> int:
        return self._t

    def __iter__(self):
        return (int(b) for b in self._bits)

    def __eq__(self, other) -> bool:
        return isinstance(other, BitVector) and self._bits == other._bits

    def __repr__(self) -> str:
        shown = self._bits.to01() if self._t <= 64 else self._bits[:64].to01() + "..."
        return f"BitVector({shown})"

    def to01(self) -> str:
        return self._bits.to01()

    @property
    def ones(self) -> int:
        return self._ones

    def access(self, k: int) -> int:
        if not 1 <= k <= self._t:
            raise QueryRangeError(f"position {k} outside [1,{self._t}]")
        return self._bits[k - 1]

    def rank(self, v: int, k: int) -> int:
        if not 0 <= k <= self._t:
            raise QueryRangeError(f"rank position {k} outside [0,{self._t}]")
        block = k // self.BLOCK
        start = block * self.BLOCK
        ones = int(self._ones_before[block]) + (self._bits.count(1, start, k) if start < k else 0)
        return ones if v else k - ones

    def select(self, v: int, j: int) -> int:
        total = self._ones if v else self._t - self._ones
        if not 1 <= j <= total:
            raise QueryRangeError(f"select_{v}({j}) outside [1,{total}]")
        before = self._ones_before if v else self._zeros_before
        block = int(np.searchsorted(before, j, side="left")) - 1
        start = block * self.BLOCK
        stop = min(start + self.BLOCK, self._t)
        inside = count_n(self._bits[start:stop], j - int(before[block]), v)
        return start + inside

    def size_in_bits(self) -> int:
        """t bits plus one 64-bit counter per full block"""
        return self._t + 64 * (self._t // self.BLOCK)

    def dump(self, w: BlobWriter) -> None:
        w.tag(b"BITV")
        w.bits(self._bits)

    @classmethod
    def load(cls, r: BlobReader) -> "BitVector":
        r.expect_tag(b"BITV")
        return cls(r.bits())


class SparseBitVector:
    """
    Elias-Fano bitvector for few 1s: each 1-position is split into a low part
    of w = floor(log2(t/rho)) bits, packed, and a high part stored in unary in
    an upper BitVector. select_1 indexes directly; rank_1 binary-searches the
    low parts inside one high bucket.
    """

    def __init__(self, length: int, positions: Sequence[int]):
        positions = [int(p) for p in positions]
        for a, b in zip(positions, positions[1:]):
            if a >= b:
                raise BuildError("sparse bitvector positions must be strictly increasing")
        if positions and not (1 <= positions[0] and positions[-1] <= length):
            raise BuildError(f"sparse bitvector positions must lie in [1,{length}]")

        self._t = length
        self._rho = len(positions)
        self._w = _ilog2(length // self._rho) if self._rho and length > self._rho else 0
        self._mask = (1 << self._w) - 1
        max_high = (length - 1) >> self._w if length else 0
        self._max_high = max_high

        lows = bitarray(self._rho * self._w, endian="big")
        upper = bitarray(self._rho + max_high + 1, endian="big")
        upper.setall(0)
        for i, p in enumerate(positions):
            value = p - 1
            if self._w:
                lows[i * self._w:(i + 1) * self._w] = int2ba(value & self._mask, self._w, endian="big")
            upper[(value >> self._w) + i] = 1
        self._lows = lows
        self._upper = BitVector(upper)

    def __len__(self) -> int:
        return self._t

    @property
    def ones(self) -> int:
        return self._rho

    def _low(self, i: int) -> int:
        if not self._w:
            return 0
        return ba2int(self._lows[i * self._w:(i + 1) * self._w])

    def _value(self, i: int) -> int:
        high = self._upper.select(1, i + 1) - 1 - i
        return (high << self._w) | self._low(i)

    def positions(self) -> List[int]:
        return [self._value(i) + 1 for i in range(self._rho)]

    def rank(self, v: int, k: int) -> int:
        if not 0 <= k <= self._t:
            raise QueryRangeError(f"rank position {k} outside [0,{self._t}]")
        ones = self._rank1(k)
        return ones if v else k - ones

    def _rank1(self, k: int) -> int:
        # number of stored values < k
        if k == 0 or self._rho == 0:
            return 0
        high = k >> self._w
        if high > self._max_high:
            return self._rho
        start = self._upper.select(0, high) - high if high else 0
        stop = self._upper.select(0, high + 1) - (high + 1)
        target = k & self._mask
        lo, hi = start, stop
        while lo < hi:
            mid = (lo + hi) // 2
            if self._low(mid) < target:
                lo = mid + 1
            else:
                hi = mid
        return lo

    def select(self, v: int, j: int) -> int:
        if v:
            if not 1 <= j <= self._rho:
                raise QueryRangeError(f"select_1({j}) outside [1,{self._rho}]")
            return self._value(j - 1) + 1
        zeros = self._t - self._rho
        if not 1 <= j <= zeros:
            raise QueryRangeError(f"select_0({j}) outside [1,{zeros}]")
        lo, hi = 1, self._t
        while lo < hi:
            mid = (lo + hi) // 2
            if mid - self._rank1(mid) >= j:
                hi = mid
            else:
                lo = mid + 1
        return lo

    def access(self, k: int) -> int:
        if not 1 <= k <= self._t:
            raise QueryRangeError(f"position {k} outside [1,{self._t}]")
        return self._rank1(k) - self._rank1(k - 1)

    def size_in_bits(self) -> int:
        return self._upper.size_in_bits() + len(self._lows)

    def size_bound(self) -> float:
        if not self._rho:
            return 0.0
        return SPARSE_SIZE_FACTOR * self._rho * (math.log2(self._t / self._rho) + 2)

    def dump(self, w: BlobWriter) -> None:
        w.tag(b"EFBV")
        w.u64(self._t)
        w.array(self.positions())

    @classmethod
    def load(cls, r: BlobReader) -> "SparseBitVector":
        r.expect_tag(b"EFBV")
        length = r.u64()
        return cls(length, r.array().tolist())


def bv_rank(bv: Union[BitVector, SparseBitVector], v: int, k: int) -> int:
    """Number of v-bits in bv[1, k]"""
    return bv.rank(v, k)


def bv_select(bv: Union[BitVector, SparseBitVector], v: int, j: int) -> int:
    """Position of the j-th v-bit of bv"""
    return bv.select(v, j)


class ScratchBits:
    """Mutable marks over [1, size] with an undo list, for per-query bookkeeping"""

    def __init__(self, size: int):
        self._size = size
        self._bits = bitarray(size + 1)
        self._bits.setall(0)
        self._marked: List[int] = []

    def __len__(self) -> int:
        return self._size

    def __contains__(self, value: int) -> bool:
        return bool(self._bits[value])

    def test(self, value: int) -> bool:
        if not 1 <= value <= self._size:
            raise DomainError(f"value {value} outside [1,{self._size}]")
        return bool(self._bits[value])

    def mark(self, value: int) -> bool:
        """Mark value; returns False if it was already marked"""
        if not 1 <= value <= self._size:
            raise DomainError(f"value {value} outside [1,{self._size}]")
        if self._bits[value]:
            return False
        self._bits[value] = 1
        self._marked.append(value)
        return True

    def checkpoint(self) -> int:
        return len(self._marked)

    def rollback(self, checkpoint: int) -> None:
        """Clear the marks made after checkpoint"""
        while len(self._marked) > checkpoint:
            self._bits[self._marked.pop()] = 0

    def reset(self) -> None:
        self.rollback(0)

    def marked(self) -> List[int]:
        return list(self._marked)

    def is_clear(self) -> bool:
        return not self._bits.any()


class BaseRMQ:
    """
    Range-minimum queries through the Cartesian tree: the leftmost minimum of
    values[i..j] is the lowest common ancestor of i and j, found as the
    shallowest entry of the Euler tour between their first visits with a
    sparse table over tour depths. Queries never read the values.
    """

    def __init__(self, values: Sequence[int], retain_values: bool = False):
        u = len(values)
        self._u = u
        self._values = [int(v) for v in values] if retain_values else None
        if u == 0:
            self._euler = np.zeros(0, dtype=np.int32)
            self._depth = np.zeros(0, dtype=np.int32)
            self._first = np.zeros(0, dtype=np.int32)
            self._table = []
            return

        left = [-1] * u
        right = [-1] * u
        stack: List[int] = []
        for k in range(u):
            v = values[k]
            last = -1
            while stack and values[stack[-1]] > v:
                last = stack.pop()
            left[k] = last
            if stack:
                right[stack[-1]] = k
            stack.append(k)
        root = stack[0]

        euler: List[int] = []
        depth: List[int] = []
        first = [0] * u
        walk = [(root, 0, 0)]
        while walk:
            node, d, state = walk.pop()
            if state == 0:
                first[node] = len(euler)
            euler.append(node)
            depth.append(d)
            if state == 0 and left[node] != -1:
                walk.append((node, d, 1))
                walk.append((left[node], d + 1, 0))
            elif state <= 1 and right[node] != -1:
                walk.append((node, d, 2))
                walk.append((right[node], d + 1, 0))

        self._euler = np.asarray(euler, dtype=np.int32)
        self._depth = np.asarray(depth, dtype=np.int32)
        self._first = np.asarray(first, dtype=np.int32)
        self._table = self._sparse_table(self._depth)

    @staticmethod
    def _sparse_table(depth: np.ndarray) -> List[np.ndarray]:
        m = len(depth)
        table = [np.arange(m, dtype=np.int32)]
        k = 1
        while (1 << k) <= m:
            prev = table[-1]
            half = 1 << (k - 1)
            a = prev[:m - (1 << k) + 1]
            b = prev[half:half + len(a)]
            table.append(np.where(depth[a] <= depth[b], a, b).astype(np.int32))
            k += 1
        return table

    def __len__(self) -> int:
        return self._u

    @property
    def values(self) -> List[int]:
        if self._values is None:
            raise ConsistencyError("values were not retained by this RMQ structure")
        return self._values

    def query(self, i: int, j: int) -> int:
        if not 1 <= i <= j <= self._u:
            raise QueryRangeError(f"rmq range [{i},{j}] invalid for length {self._u}")
        if i == j:
            return i
        a = int(self._first[i - 1])
        b = int(self._first[j - 1])
        lo, hi = (a, b) if a <= b else (b, a)
        k = _ilog2(hi - lo + 1)
        x = self._table[k][lo]
        y = self._table[k][hi - (1 << k) + 1]
        best = x if self._depth[x] <= self._depth[y] else y
        return int(self._euler[best]) + 1

    def size_in_bits(self) -> int:
        m = len(self._euler)
        if not m:
            return 0
        cell = _width(m)
        return sum(len(level) for level in self._table) * cell + m * (2 * _width(self._u)) + self._u * cell

    def dump(self, w: BlobWriter) -> None:
        w.tag(b"RMQB")
        w.u64(self._u)
        w.array(self._euler)
        w.array(self._depth)
        w.array(self._first)

    @classmethod
    def load(cls, r: BlobReader) -> "BaseRMQ":
        r.expect_tag(b"RMQB")
        rmq_struct = cls.__new__(cls)
        rmq_struct._u = r.u64()
        rmq_struct._values = None
        rmq_struct._euler = r.array().astype(np.int32)
        rmq_struct._depth = r.array().astype(np.int32)
        rmq_struct._first = r.array().astype(np.int32)
        if not (len(rmq_struct._first) == rmq_struct._u and len(rmq_struct._euler) == len(rmq_struct._depth)):
            raise ConsistencyError("RMQ blob arrays have inconsistent lengths")
        rmq_struct._table = cls._sparse_table(rmq_struct._depth) if rmq_struct._u else []
        return rmq_struct


def rmq(q: BaseRMQ, i: int, j: int) -> int:
    """Leftmost position of the minimum in [i, j]"""
    return q.query(i, j)


class RunLengthRMQ:
    """
    RMQ over an array cut into rho maximal nondecreasing runs. Only the run
    heads are kept: F marks them and an inner BaseRMQ answers over their
    values. The array itself is never stored, so a query yields two
    candidates, the left end and the best run head.
    """

    def __init__(self, heads: SparseBitVector, inner: BaseRMQ):
        if heads.ones != len(inner):
            raise ConsistencyError(f"{heads.ones} run heads but inner RMQ over {len(inner)} values")
        self._heads = heads
        self._inner = inner

    @classmethod
    def build(cls, values: Sequence[int]) -> "RunLengthRMQ":
        if not len(values):
            raise BuildError("run-length RMQ needs a nonempty array")
        head_positions = [1] + [k + 1 for k in range(1, len(values)) if values[k] < values[k - 1]]
        head_values = [values[p - 1] for p in head_positions]
        return cls(SparseBitVector(len(values), head_positions), BaseRMQ(head_values))

    def __len__(self) -> int:
        return len(self._heads)

    @property
    def runs(self) -> int:
        return self._heads.ones

    @property
    def heads(self) -> SparseBitVector:
        return self._heads

    def candidates(self, i: int, j: int) -> Tuple[int, Optional[int]]:
        """(i, smallest run head in [i, j]) or (i, None) when [i, j] holds no run head"""
        t = len(self._heads)
        if not 1 <= i <= j <= t:
            raise QueryRangeError(f"range [{i},{j}] invalid for length {t}")
        first = self._heads.rank(1, i - 1) + 1
        last = self._heads.rank(1, j)
        if first > last:
            return i, None
        return i, self._heads.select(1, self._inner.query(first, last))

    def size_in_bits(self) -> int:
        return self._heads.size_in_bits() + self._inner.size_in_bits()

    def dump(self, w: BlobWriter) -> None:
        w.tag(b"RMQR")
        self._heads.dump(w)
        self._inner.dump(w)

    @classmethod
    def load(cls, r: BlobReader) -> "RunLengthRMQ":
        r.expect_tag(b"RMQR")
        heads = SparseBitVector.load(r)
        return cls(heads, BaseRMQ.load(r))


def rl_build(values: Sequence[int]) -> RunLengthRMQ:
    return RunLengthRMQ.build(values)


def rl_candidates(q: RunLengthRMQ, i: int, j: int) -> Tuple[int, Optional[int]]:
    return q.candidates(i, j)


def previous_occurrences(values: Sequence[int]) -> List[int]:
    """E array: E[k] is the last position l < k with values[l] = values[k], else 0"""
    last = {}
    prev = []
    for k, v in enumerate(values, start=1):
        prev.append(last.get(v, 0))
        last[v] = k
    return prev


def distinct_muthu(L: Sequence[int], E: Sequence[int], q: BaseRMQ, i: int, j: int,
                   check: bool = False) -> DistinctResult:
    """Distinct values of L[i..j]: report k = rmq(E) while E[k] < i, splitting around k"""
    result = DistinctResult()
    if i > j:
        return result
    if not 1 <= i <= j <= len(L):
        raise QueryRangeError(f"range [{i},{j}] invalid for length {len(L)}")

    pending = [(i, j)]
    while pending:
        x, y = pending.pop()
        if x > y:
            continue
        k = q.query(x, y)
        result.rmq_calls += 1
        prev = E[k - 1]
        if check and prev and (prev >= k or L[prev - 1] != L[k - 1]):
            raise ConsistencyError(f"E[{k}]={prev} does not point to a previous copy of L[{k}]")
        if prev >= i:
            continue
        result.values.append(L[k - 1])
        result.positions.append(k)
        pending.append((k + 1, y))
        pending.append((x, k - 1))
    return result


def distinct_sadakane(L: Sequence[int], q: BaseRMQ, D: int, i: int, j: int,
                      V: ScratchBits) -> DistinctResult:
    """Distinct values of L[i..j] testing a reported-marks bitvector instead of E"""
    result = DistinctResult()
    if i > j:
        return result
    if not 1 <= i <= j <= len(L):
        raise QueryRangeError(f"range [{i},{j}] invalid for length {len(L)}")
    if len(V) < D:
        raise DomainError(f"scratch of size {len(V)} cannot hold values up to {D}")

    checkpoint = V.checkpoint()
    try:
        pending = [(i, j)]
        while pending:
            x, y = pending.pop()
            if x > y:
                continue
            k = q.query(x, y)
            result.rmq_calls += 1
            value = L[k - 1]
            if not 1 <= value <= D:
                raise DomainError(f"L[{k}]={value} outside [1,{D}]")
            if not V.mark(value):
                continue
            result.values.append(value)
            result.positions.append(k)
            # left before right
            pending.append((k + 1, y))
            pending.append((x, k - 1))
    finally:
        V.rollback(checkpoint)
    return result
