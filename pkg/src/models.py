"""
Pydantic data models for the document listing index
Defines edit scripts, query results, statistics and CLI records
"""
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.config import Settings


EditKind = Literal["insert", "delete", "substitute"]
EditModel = Literal["single", "range", "subtree"]
ListLayout = Literal["leaves", "root"]


class Edit(BaseModel):
    """One single-character edit applied to a range of documents"""

    kind: EditKind = Field(..., description="insert, delete or substitute")
    position: int = Field(..., ge=1, description="1-based position in the document at the time the edit applies")
    symbol: int = Field(default=0, ge=0, description="Inserted or substituted symbol (0 for deletions)")
    first_doc: int = Field(..., ge=1, description="First document the edit applies to")
    last_doc: int = Field(..., ge=1, description="Last document the edit applies to")
    node: Optional[int] = Field(default=None, description="Version-tree node the edit targets, if any")

    @model_validator(mode="after")
    def _check_target(self):
        if self.last_doc < self.first_doc:
            raise ValueError(f"empty document range [{self.first_doc},{self.last_doc}]")
        if self.kind != "delete" and self.symbol < 1:
            raise ValueError(f"{self.kind} edit needs a symbol >= 1")
        return self


class EditScript(BaseModel):
    """A base document length, a document count and the edits producing the collection"""

    base_length: int = Field(..., ge=1, description="Length n of the base document")
    doc_count: int = Field(..., ge=1, description="Number of documents D")
    edits: List[Edit] = Field(default_factory=list, description="Edits in script order")

    @model_validator(mode="after")
    def _check_targets(self):
        for edit in self.edits:
            if edit.last_doc > self.doc_count:
                raise ValueError(f"edit targets document {edit.last_doc} > D={self.doc_count}")
        return self


class EditEvent(BaseModel):
    """A normalised edit: applied to one document and inherited by the following ones"""

    model_config = ConfigDict(frozen=True)

    doc: int = Field(..., ge=1, description="Document where the change first appears")
    kind: EditKind = Field(..., description="insert, delete or substitute")
    position: int = Field(..., ge=1, description="1-based position in that document")
    symbol: int = Field(default=0, ge=0, description="Symbol written (0 for deletions)")


class IndexConfig(BaseModel):
    """Build parameters of an index"""

    ms_len: int = Field(default=1, ge=1, le=16, description="Maximum metasymbol length")
    epsilon: float = Field(default=0.5, gt=0.0, le=1.0, description="Upward-tracking sample exponent")
    tau: Optional[int] = Field(default=None, ge=1, description="Prefix-sum sampling step (None = ceil(log2 p))")
    list_layout: ListLayout = Field(default="leaves", description="Inverted lists keyed by leaf or root positions")
    debug_checks: bool = Field(default=True, description="Run build-time and per-query consistency checks")

    @classmethod
    def from_settings(cls, settings: Settings, **overrides) -> "IndexConfig":
        """Take defaults from Settings, letting explicit values win"""
        values = {
            "ms_len": settings.ms_len,
            "epsilon": settings.epsilon,
            "tau": settings.tau,
            "list_layout": settings.list_layout,
            "debug_checks": settings.debug_checks,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


class Occurrence(BaseModel):
    """A pattern occurrence inside one document"""

    model_config = ConfigDict(frozen=True)

    doc: int = Field(..., ge=1, description="Document identifier")
    offset: int = Field(..., ge=1, description="1-based offset inside the document")
    global_offset: int = Field(..., ge=1, description="1-based offset in the concatenated text")


class ListingStats(BaseModel):
    """Instrumentation counters of one listing query"""

    rmq_calls: int = Field(default=0, ge=0)
    lists_opened: int = Field(default=0, ge=0)
    elements_scanned: int = Field(default=0, ge=0)
    nodes_visited: int = Field(default=0, ge=0)
    ranges: int = Field(default=0, ge=0, description="Node ranges processed")

    def add(self, other: "ListingStats") -> None:
        """Accumulate another counter set into this one"""
        self.rmq_calls += other.rmq_calls
        self.lists_opened += other.lists_opened
        self.elements_scanned += other.elements_scanned
        self.nodes_visited += other.nodes_visited
        self.ranges += other.ranges


class DistinctResult(BaseModel):
    """Output of a distinct-values listing over an explicit array"""

    values: List[int] = Field(default_factory=list, description="Distinct values in discovery order")
    positions: List[int] = Field(default_factory=list, description="Position where each value was taken")
    rmq_calls: int = Field(default=0, ge=0)

    def as_set(self) -> set:
        return set(self.values)


class ListingResult(BaseModel):
    """Documents containing a pattern"""

    documents: List[int] = Field(default_factory=list, description="Sorted document identifiers")
    discovery_order: List[int] = Field(default_factory=list, description="Documents in the order found")
    stats: ListingStats = Field(default_factory=ListingStats)


class ComponentBits(BaseModel):
    """Measured size of each index component, in bits"""

    grammar: int = 0
    grid: int = 0
    m_bitvectors: int = 0
    rmq: int = 0
    lists: int = 0
    short_table: int = 0

    @property
    def total(self) -> int:
        return self.grammar + self.grid + self.m_bitvectors + self.rmq + self.lists + self.short_table


class StatsReport(BaseModel):
    """Space and run statistics of a built index"""

    documents: int = Field(..., ge=0)
    total_length: int = Field(..., ge=0, description="N")
    rules: int = Field(..., ge=0, description="r")
    points: int = Field(..., ge=0, description="Grid points (A -> BC rules)")
    rho_per_level: List[int] = Field(default_factory=list)
    nodes_per_level: List[int] = Field(default_factory=list)
    list_ranges: int = Field(default=0, ge=0, description="Total ranges over all inverted lists")
    bits: ComponentBits = Field(default_factory=ComponentBits)
    total_bits: int = Field(default=0, ge=0)
    config: IndexConfig = Field(default_factory=IndexConfig)

    @property
    def rho_total(self) -> int:
        return sum(self.rho_per_level)


class QueryRecord(BaseModel):
    """One machine-readable query answer, as printed by the CLI"""

    operation: Literal["list", "count", "locate"]
    pattern: str
    result: Any
    stats: Dict[str, int] = Field(default_factory=dict)


class Mismatch(BaseModel):
    """A disagreement between the index and an oracle"""

    operation: str
    pattern: List[int]
    expected: Any
    actual: Any
    seed: Optional[int] = None


class VerifyReport(BaseModel):
    """Outcome of comparing an index against the brute-force oracles"""

    patterns_checked: int = 0
    queries_checked: int = 0
    mismatches: List[Mismatch] = Field(default_factory=list)
    warnings: List[str] = Field(default_factory=list)
    seed: Optional[int] = None

    @property
    def passed(self) -> bool:
        return not self.mismatches


class BenchRow(BaseModel):
    """One line of benchmark output"""

    operation: str
    pattern_length: int
    queries: int
    mean_us: float
    max_us: float
    mean_results: float
