"""
Wavelet tree over a grid of labelled, weighted points
Columns may hold several points; a column bitvector R maps x coordinates to
root positions. Supports counting, reporting, decomposition into node ranges,
tracking positions down to the leaves and up to the root, and weight sums.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from bitarray import bitarray

from src.codec import BlobReader, BlobWriter
from src.exceptions import BuildError, ConsistencyError, QueryRangeError
from src.succinct import BitVector


logger = logging.getLogger(__name__)

NodeKey = Tuple[int, int]


@dataclass(frozen=True)
class Point:
    x: int
    y: int
    label: int
    weight: int = 1


@dataclass(frozen=True)
class NodeRange:
    """Positions [i, j] of the sequence at wavelet-tree node (a, b)"""

    a: int
    b: int
    i: int
    j: int

    @property
    def node(self) -> NodeKey:
        return (self.a, self.b)

    def __len__(self) -> int:
        return self.j - self.i + 1


def split_point(a: int, b: int) -> int:
    """mu = ceil((a + b) / 2); the left child handles [a, mu - 1]"""
    return (a + b + 1) // 2


@dataclass
class GridNode:
    """One wavelet-tree node: its bitvector (internal nodes), prefix-sum samples and root pointers"""

    a: int
    b: int
    length: int
    bits: Optional[BitVector] = None
    psums: np.ndarray = field(default_factory=lambda: np.zeros(1, dtype=np.int64))
    samples: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    leaf_offset: int = 0
    parent: Optional[NodeKey] = None
    is_right: bool = False

    @property
    def key(self) -> NodeKey:
        return (self.a, self.b)

    @property
    def is_leaf(self) -> bool:
        return self.a == self.b


class TrackCounter:
    """Hop counter for track_up instrumentation"""

    def __init__(self):
        self.hops = 0
        self.calls = 0
        self.max_hops = 0


class Grid:
    """
    The points are kept in x order at the root (stable for equal x). Each
    internal node (a, b) stably partitions its sequence by y < mu into its
    children, so every level is a permutation of the root sequence and the
    leaves list the y values in sorted order.
    """

    def __init__(self, ncols: int, nrows: int, tau: int, epsilon: float):
        self.ncols = ncols
        self.nrows = nrows
        self.tau = tau
        self.epsilon = epsilon
        self.sample_step = 1
        self.nodes: Dict[NodeKey, GridNode] = {}
        self.columns = BitVector([1])
        self.root_labels = np.zeros(0, dtype=np.int64)
        self.root_weights = np.zeros(0, dtype=np.int64)
        self.leaf_labels = np.zeros(0, dtype=np.int64)

    @property
    def size(self) -> int:
        """p, the number of points"""
        return len(self.root_labels)

    @property
    def root(self) -> GridNode:
        return self.nodes[(1, self.nrows)]

    def node(self, a: int, b: int) -> GridNode:
        found = self.nodes.get((a, b))
        if found is None:
            raise QueryRangeError(f"wavelet-tree node ({a},{b}) holds no points")
        return found

    def children(self, node: GridNode) -> Tuple[NodeKey, NodeKey]:
        mu = split_point(node.a, node.b)
        return (node.a, mu - 1), (mu, node.b)

    # construction

    @classmethod
    def build(cls, points: Sequence[Point], ncols: int, nrows: int,
              tau: Optional[int] = None, epsilon: float = 0.5) -> "Grid":
        if not points:
            raise BuildError("grid needs at least one point")
        if ncols < 1 or nrows < 1:
            raise BuildError(f"grid dimensions must be positive, got {ncols}x{nrows}")
        for prev, cur in zip(points, points[1:]):
            if cur.x < prev.x:
                raise BuildError("grid points must be sorted by x")
        seen_columns = set()
        for pt in points:
            if not (1 <= pt.x <= ncols and 1 <= pt.y <= nrows):
                raise BuildError(f"point ({pt.x},{pt.y}) outside [1,{ncols}]x[1,{nrows}]")
            if pt.weight < 0:
                raise BuildError(f"point ({pt.x},{pt.y}) has negative weight {pt.weight}")
            seen_columns.add(pt.x)
        if len(seen_columns) != ncols:
            missing = sorted(set(range(1, ncols + 1)) - seen_columns)
            raise BuildError(f"columns without points: {missing[:10]}")

        p = len(points)
        if tau is None:
            tau = max(1, math.ceil(math.log2(p))) if p > 1 else 1
        grid = cls(ncols, nrows, tau, epsilon)
        grid.sample_step = max(1, math.ceil(p ** epsilon))

        column_bits = bitarray(p + 1, endian="big")
        column_bits.setall(0)
        column_bits[p] = 1
        for k, pt in enumerate(points):
            if k == 0 or pt.x != points[k - 1].x:
                column_bits[k] = 1
        grid.columns = BitVector(column_bits)
        grid.root_labels = np.asarray([pt.label for pt in points], dtype=np.int64)
        grid.root_weights = np.asarray([pt.weight for pt in points], dtype=np.int64)

        ys = [pt.y for pt in points]
        leaf_positions: Dict[NodeKey, List[int]] = {}
        # (a, b, root positions in node order, parent, is_right)
        pending = [(1, nrows, list(range(1, p + 1)), None, False)]
        while pending:
            a, b, positions, parent, is_right = pending.pop()
            node = GridNode(a=a, b=b, length=len(positions), parent=parent, is_right=is_right)
            grid._attach_samples(node, positions)
            grid.nodes[node.key] = node
            if a == b:
                leaf_positions[node.key] = positions
                continue
            mu = split_point(a, b)
            bits = [1 if ys[pos - 1] >= mu else 0 for pos in positions]
            node.bits = BitVector(bits)
            left = [pos for pos, bit in zip(positions, bits) if not bit]
            right = [pos for pos, bit in zip(positions, bits) if bit]
            if right:
                pending.append((mu, b, right, node.key, True))
            if left:
                pending.append((a, mu - 1, left, node.key, False))

        ordered: List[int] = []
        for key in sorted(leaf_positions):
            grid.nodes[key].leaf_offset = len(ordered)
            ordered.extend(leaf_positions[key])
        grid.leaf_labels = grid.root_labels[np.asarray(ordered, dtype=np.int64) - 1]

        logger.debug(
            f"grid built: p={p}, {ncols}x{nrows}, {len(grid.nodes)} nodes, "
            f"tau={grid.tau}, sample step={grid.sample_step}"
        )
        return grid

    def _attach_samples(self, node: GridNode, positions: List[int]) -> None:
        weights = self.root_weights[np.asarray(positions, dtype=np.int64) - 1]
        cumulative = np.concatenate(([0], np.cumsum(weights, dtype=np.int64)))
        node.psums = cumulative[::self.tau].astype(np.int64)
        node.samples = np.asarray(positions[self.sample_step - 1::self.sample_step], dtype=np.int64)

    # navigation

    def map_columns(self, x1: int, x2: int) -> Tuple[int, int]:
        """Root interval holding the points with x in [x1, x2] (empty when x1 = x2 + 1)"""
        if x1 == x2 + 1 and 1 <= x1 <= self.ncols + 1:
            start = self.columns.select(1, x1)
            return start, start - 1
        if not 1 <= x1 <= x2 <= self.ncols:
            raise QueryRangeError(f"column range [{x1},{x2}] outside [1,{self.ncols}]")
        return self.columns.select(1, x1), self.columns.select(1, x2 + 1) - 1

    def column_of(self, root_pos: int) -> int:
        """x = rank_1(R, pos)"""
        if not 1 <= root_pos <= self.size:
            raise QueryRangeError(f"root position {root_pos} outside [1,{self.size}]")
        return self.columns.rank(1, root_pos)

    def _descend(self, a: int, b: int, k: int) -> Tuple[GridNode, int]:
        node = self.node(a, b)
        if not 1 <= k <= node.length:
            raise QueryRangeError(f"position {k} outside node ({a},{b}) of length {node.length}")
        while not node.is_leaf:
            bit = node.bits.access(k)
            k = node.bits.rank(bit, k)
            left, right = self.children(node)
            node = self.nodes[right if bit else left]
        return node, k

    def track_down(self, a: int, b: int, k: int) -> Tuple[int, int]:
        """(global leaf position, label) of position k of node (a, b)"""
        leaf, k = self._descend(a, b, k)
        leaf_pos = leaf.leaf_offset + k
        return leaf_pos, int(self.leaf_labels[leaf_pos - 1])

    def row_of(self, a: int, b: int, k: int) -> int:
        """y coordinate of position k of node (a, b)"""
        return self._descend(a, b, k)[0].a

    def track_up(self, a: int, b: int, k: int, counter: Optional[TrackCounter] = None) -> int:
        """Root position of position k of node (a, b), stopping at the first sampled position"""
        node = self.node(a, b)
        if not 1 <= k <= node.length:
            raise QueryRangeError(f"position {k} outside node ({a},{b}) of length {node.length}")
        hops = 0
        while node.parent is not None:
            if k % self.sample_step == 0:
                k = int(node.samples[k // self.sample_step - 1])
                break
            parent = self.nodes[node.parent]
            k = parent.bits.select(1 if node.is_right else 0, k)
            node = parent
            hops += 1
        if counter is not None:
            counter.calls += 1
            counter.hops += hops
            counter.max_hops = max(counter.max_hops, hops)
        return k

    # queries

    def _check_rect(self, x1: int, x2: int, y1: int, y2: int) -> None:
        if not (1 <= x1 and x2 <= self.ncols and x1 <= x2 + 1):
            raise QueryRangeError(f"column range [{x1},{x2}] outside [1,{self.ncols}]")
        if not (1 <= y1 and y2 <= self.nrows and y1 <= y2 + 1):
            raise QueryRangeError(f"row range [{y1},{y2}] outside [1,{self.nrows}]")

    def decompose(self, x1: int, x2: int, y1: int, y2: int) -> List[NodeRange]:
        """Maximal nodes whose rows lie inside [y1, y2], with the projected nonempty intervals"""
        self._check_rect(x1, x2, y1, y2)
        if x1 > x2 or y1 > y2:
            return []
        i, j = self.map_columns(x1, x2)
        ranges: List[NodeRange] = []
        pending = [(1, self.nrows, i, j)]
        while pending:
            a, b, lo, hi = pending.pop()
            if lo > hi or b < y1 or a > y2:
                continue
            if y1 <= a and b <= y2:
                ranges.append(NodeRange(a, b, lo, hi))
                continue
            node = self.nodes[(a, b)]
            mu = split_point(a, b)
            bits = node.bits
            ones_before, ones_upto = bits.rank(1, lo - 1), bits.rank(1, hi)
            pending.append((mu, b, ones_before + 1, ones_upto))
            pending.append((a, mu - 1, lo - ones_before, hi - ones_upto))
        return ranges

    def count(self, x1: int, x2: int, y1: int, y2: int) -> int:
        return sum(len(nr) for nr in self.decompose(x1, x2, y1, y2))

    def report(self, x1: int, x2: int, y1: int, y2: int, via: str = "leaves") -> List[Tuple[int, int, int]]:
        """(x, y, label) of every point in the rectangle, labels read at the leaves or at the root"""
        found = []
        for nr in self.decompose(x1, x2, y1, y2):
            for k in range(nr.i, nr.j + 1):
                root_pos = self.track_up(nr.a, nr.b, k)
                leaf, leaf_k = self._descend(nr.a, nr.b, k)
                if via == "root":
                    label = int(self.root_labels[root_pos - 1])
                else:
                    label = int(self.leaf_labels[leaf.leaf_offset + leaf_k - 1])
                found.append((self.column_of(root_pos), leaf.a, label))
        return found

    def range_sum(self, nr: NodeRange, counter: Optional[TrackCounter] = None) -> int:
        return self._prefix_sum(nr.a, nr.b, nr.j, counter) - self._prefix_sum(nr.a, nr.b, nr.i - 1, counter)

    def _prefix_sum(self, a: int, b: int, k: int, counter: Optional[TrackCounter]) -> int:
        # sampled cumulative weight, then the elements past the last sample tracked up to the root
        node = self.nodes[(a, b)]
        block = k // self.tau
        total = int(node.psums[block])
        for pos in range(block * self.tau + 1, k + 1):
            total += int(self.root_weights[self.track_up(a, b, pos, counter) - 1])
        return total

    def sum(self, x1: int, x2: int, y1: int, y2: int, counter: Optional[TrackCounter] = None) -> int:
        """Total weight of the points in the rectangle"""
        return sum(self.range_sum(nr, counter) for nr in self.decompose(x1, x2, y1, y2))

    def points(self) -> List[Point]:
        """Every point, read back from the leaves in leaf order"""
        out = []
        for key in sorted(k for k in self.nodes if k[0] == k[1]):
            leaf = self.nodes[key]
            for k in range(1, leaf.length + 1):
                root_pos = self.track_up(leaf.a, leaf.b, k)
                out.append(Point(
                    x=self.column_of(root_pos),
                    y=leaf.a,
                    label=int(self.leaf_labels[leaf.leaf_offset + k - 1]),
                    weight=int(self.root_weights[root_pos - 1]),
                ))
        return out

    def node_labels(self) -> Dict[NodeKey, List[int]]:
        """Label sequence of every node, obtained by pushing the root labels down the bitvectors"""
        out: Dict[NodeKey, List[int]] = {}
        pending = [(self.root, [int(v) for v in self.root_labels])]
        while pending:
            node, labels = pending.pop()
            out[node.key] = labels
            if node.is_leaf:
                continue
            left_key, right_key = self.children(node)
            left = [lab for lab, bit in zip(labels, node.bits) if not bit]
            right = [lab for lab, bit in zip(labels, node.bits) if bit]
            if left:
                pending.append((self.nodes[left_key], left))
            if right:
                pending.append((self.nodes[right_key], right))
        return out

    def height(self) -> int:
        return max(1, math.ceil(math.log2(self.nrows))) if self.nrows > 1 else 0

    def levels(self) -> Dict[int, List[GridNode]]:
        """Nodes grouped by depth, root at depth 0"""
        depth: Dict[NodeKey, int] = {self.root.key: 0}
        grouped: Dict[int, List[GridNode]] = {0: [self.root]}
        pending = [self.root]
        while pending:
            node = pending.pop()
            if node.is_leaf:
                continue
            for key in self.children(node):
                child = self.nodes.get(key)
                if child is None:
                    continue
                depth[key] = depth[node.key] + 1
                grouped.setdefault(depth[key], []).append(child)
                pending.append(child)
        return grouped

    def size_in_bits(self) -> int:
        p = self.size
        label_bits = max(1, int(self.root_labels.max(initial=0)).bit_length())
        weight_bits = max(1, int(self.root_weights.sum()).bit_length())
        pos_bits = max(1, p.bit_length())
        bits = self.columns.size_in_bits() + 2 * p * label_bits + p * weight_bits
        for node in self.nodes.values():
            if node.bits is not None:
                bits += node.bits.size_in_bits()
            bits += len(node.psums) * weight_bits + len(node.samples) * pos_bits
        return bits

    # serialisation

    def dump(self, w: BlobWriter) -> None:
        w.tag(b"GRID")
        w.u64(self.ncols)
        w.u64(self.nrows)
        w.u64(self.tau)
        w.f64(self.epsilon)
        w.u64(self.sample_step)
        self.columns.dump(w)
        w.array(self.root_labels)
        w.array(self.root_weights)
        w.array(self.leaf_labels)
        w.u64(len(self.nodes))
        for key in sorted(self.nodes):
            node = self.nodes[key]
            w.u64(node.a)
            w.u64(node.b)
            w.u64(node.length)
            w.u64(node.leaf_offset)
            w.array(node.psums)
            w.array(node.samples)
            if node.bits is not None:
                node.bits.dump(w)

    @classmethod
    def load(cls, r: BlobReader) -> "Grid":
        r.expect_tag(b"GRID")
        ncols, nrows, tau = r.u64(), r.u64(), r.u64()
        grid = cls(ncols, nrows, tau, r.f64())
        grid.sample_step = r.u64()
        grid.columns = BitVector.load(r)
        grid.root_labels = r.array()
        grid.root_weights = r.array()
        grid.leaf_labels = r.array()
        for _ in range(r.u64()):
            node = GridNode(a=r.u64(), b=r.u64(), length=r.u64())
            node.leaf_offset = r.u64()
            node.psums = r.array()
            node.samples = r.array()
            if not node.is_leaf:
                node.bits = BitVector.load(r)
            grid.nodes[node.key] = node
        for node in list(grid.nodes.values()):
            if node.is_leaf:
                continue
            left, right = grid.children(node)
            for key, is_right in ((left, False), (right, True)):
                child = grid.nodes.get(key)
                if child is not None:
                    child.parent = node.key
                    child.is_right = is_right
        if (1, nrows) not in grid.nodes or grid.root.length != grid.size:
            raise ConsistencyError("grid blob root does not hold every point")
        return grid


def grid_build(points: Sequence[Point], ncols: int, nrows: int,
               tau: Optional[int] = None, epsilon: float = 0.5) -> Grid:
    return Grid.build(points, ncols, nrows, tau, epsilon)


def map_columns(g: Grid, x1: int, x2: int) -> Tuple[int, int]:
    return g.map_columns(x1, x2)


def decompose(g: Grid, x1: int, x2: int, y1: int, y2: int) -> List[NodeRange]:
    return g.decompose(x1, x2, y1, y2)


def grid_count(g: Grid, x1: int, x2: int, y1: int, y2: int) -> int:
    return g.count(x1, x2, y1, y2)


def grid_report(g: Grid, x1: int, x2: int, y1: int, y2: int, via: str = "leaves") -> List[Tuple[int, int, int]]:
    return g.report(x1, x2, y1, y2, via)


def track_down(g: Grid, nr: NodeRange, k: int) -> Tuple[int, int]:
    """Leaf position and label of the k-th element of a node range"""
    if not 1 <= k <= len(nr):
        raise QueryRangeError(f"offset {k} outside node range of length {len(nr)}")
    return g.track_down(nr.a, nr.b, nr.i + k - 1)


def track_up(g: Grid, node: NodeKey, pos: int, counter: Optional[TrackCounter] = None) -> int:
    return g.track_up(node[0], node[1], pos, counter)


def grid_sum(g: Grid, x1: int, x2: int, y1: int, y2: int) -> int:
    return g.sum(x1, x2, y1, y2)
