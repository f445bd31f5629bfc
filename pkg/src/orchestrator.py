"""
IndexOrchestrator - build, persistence, query, verification and benchmark pipeline
Ties collections, the grammar, the pattern index and the listing layer together
"""
import asyncio
import logging
import time
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.collection import Collection, find_occurrences, naive_list, naive_occurrences, replay
from src.config import Settings, load_settings
from src.doclist import DocIndex
from src.exceptions import BuildError, DomainError
from src.grammar import build_generic, build_repetitive
from src.index import PatternIndex
from src.models import BenchRow, EditScript, IndexConfig, Mismatch, QueryRecord, StatsReport, VerifyReport
from src.storage import FileIndexStore, IndexBundle, IndexStore
from src.utils import pattern_text


logger = logging.getLogger(__name__)

OPERATIONS = ("list", "count", "locate")


def sample_patterns(documents: Sequence[Sequence[int]], sigma: int, count: int, max_m: int,
                    rng: np.random.Generator) -> List[List[int]]:
    """Half substrings of the documents, half uniform random strings, lengths in [1, max_m]"""
    patterns: List[List[int]] = []
    occurring = (count + 1) // 2
    for _ in range(occurring):
        doc = documents[int(rng.integers(0, len(documents)))]
        m = int(rng.integers(1, min(max_m, len(doc)) + 1))
        start = int(rng.integers(0, len(doc) - m + 1))
        patterns.append([int(s) for s in doc[start:start + m]])
    for _ in range(count - occurring):
        m = int(rng.integers(1, max_m + 1))
        patterns.append([int(s) for s in rng.integers(1, sigma + 1, size=m)])
    return patterns


class IndexOrchestrator:
    """Builds indexes from collections and answers queries against them"""

    def __init__(self, settings: Optional[Settings] = None, store: Optional[IndexStore] = None):
        """Initialize with optional settings and storage backend"""
        self.settings = settings or load_settings()
        self.store = store or FileIndexStore()

    def config(self, **overrides) -> IndexConfig:
        return IndexConfig.from_settings(self.settings, **overrides)

    # build and persistence

    def build(self, collection: Collection, config: Optional[IndexConfig] = None,
              script: Optional[EditScript] = None, base: Optional[Sequence[int]] = None) -> IndexBundle:
        """
        Build the grammar, pattern index and listing structures

        With an edit script the grammar follows the edits (the script must
        reproduce the collection); without one every document is parsed
        independently into a balanced tree.
        """
        config = config or self.config()
        start = time.perf_counter()

        if script is not None:
            if base is None:
                raise BuildError("an edit script needs its base document")
            expected = replay(script, base)
            if expected != [list(doc) for doc in collection.documents]:
                raise BuildError("the edit script does not reproduce the collection")
            grammar = build_repetitive(script, base, config.ms_len)
        else:
            grammar = build_generic(collection.documents, config.ms_len)

        if config.debug_checks:
            grammar.check()
        pidx = PatternIndex.build(grammar, config)
        dix = DocIndex.build(pidx)

        elapsed = (time.perf_counter() - start) * 1000
        logger.info(
            f"built index: D={grammar.doc_count} N={grammar.total_length} r={grammar.size} "
            f"({'repetitive' if script is not None else 'generic'}) in {elapsed:.1f}ms"
        )
        return IndexBundle(
            alphabet=list(collection.alphabet),
            config=config,
            grammar=grammar,
            pidx=pidx,
            dix=dix,
            provenance=collection.provenance,
        )

    def save(self, bundle: IndexBundle, path: str) -> str:
        return self.store.save(bundle, path)

    def load(self, path: str) -> IndexBundle:
        return self.store.load(path)

    # queries

    def query(self, bundle: IndexBundle, operation: str, pattern: bytes) -> QueryRecord:
        """Answer one list, count or locate query given the raw pattern bytes"""
        if operation not in OPERATIONS:
            raise DomainError(f"unknown operation {operation!r}")
        if not pattern:
            raise DomainError("pattern must be nonempty")

        symbols = bundle.encode(pattern)
        text = pattern_text(pattern)
        if symbols is None:
            # a byte absent from the collection cannot occur
            empty = 0 if operation == "count" else []
            return QueryRecord(operation=operation, pattern=text, result=empty)

        if operation == "list":
            listing = bundle.dix.list_documents(symbols)
            return QueryRecord(operation=operation, pattern=text, result=listing.documents,
                               stats=listing.stats.model_dump())
        if operation == "count":
            return QueryRecord(operation=operation, pattern=text, result=bundle.pidx.count(symbols))
        occurrences = bundle.pidx.locate(symbols)
        return QueryRecord(operation=operation, pattern=text,
                           result=[[o.doc, o.offset] for o in occurrences])

    def stats(self, bundle: IndexBundle) -> StatsReport:
        return bundle.dix.stats()

    # verification

    def _check_pattern(self, bundle: IndexBundle, collection: Collection, pattern: Sequence[int],
                       seed: Optional[int]) -> Tuple[int, List[Mismatch]]:
        """Compare one pattern (in collection symbols) against the oracles; (queries run, mismatches)"""
        mismatches: List[Mismatch] = []

        def record(operation: str, expected, actual) -> None:
            mismatches.append(Mismatch(operation=operation, pattern=list(pattern),
                                       expected=expected, actual=actual, seed=seed))

        expected_occ = naive_occurrences(collection, pattern)
        second = find_occurrences(collection, pattern)
        if second != expected_occ:
            record("oracle", expected_occ, second)

        symbols = bundle.encode(collection.decode(pattern))
        if symbols is None:
            if expected_occ:
                record("encode", expected_occ, None)
            return 1, mismatches

        listing = bundle.dix.list_documents(symbols).documents
        expected_docs = naive_list(collection, pattern)
        if listing != expected_docs:
            record("list", expected_docs, listing)

        counted = bundle.pidx.count(symbols)
        if counted != len(expected_occ):
            record("count", len(expected_occ), counted)

        located = [(o.doc, o.offset) for o in bundle.pidx.locate(symbols)]
        if located != expected_occ:
            record("locate", expected_occ, located)
        if len(located) != counted:
            record("locate-vs-count", counted, len(located))
        return 3, mismatches

    def _check_batch(self, bundle: IndexBundle, collection: Collection, patterns: List[List[int]],
                     seed: Optional[int]) -> Tuple[int, List[Mismatch]]:
        queries = 0
        mismatches: List[Mismatch] = []
        for pattern in patterns:
            ran, found = self._check_pattern(bundle, collection, pattern, seed)
            queries += ran
            mismatches.extend(found)
        return queries, mismatches

    def _check_documents(self, bundle: IndexBundle, collection: Collection) -> List[Mismatch]:
        mismatches: List[Mismatch] = []
        extracted = bundle.grammar.documents()
        if len(extracted) != collection.doc_count:
            return [Mismatch(operation="documents", pattern=[], expected=collection.doc_count,
                             actual=len(extracted))]
        for d, symbols in enumerate(extracted, start=1):
            got = bytes(bundle.alphabet[s - 1] for s in symbols)
            want = collection.document_bytes(d)
            if got != want:
                mismatches.append(Mismatch(operation="extract", pattern=[d], expected=want.hex(), actual=got.hex()))
        return mismatches

    async def verify(self, bundle: IndexBundle, collection: Collection, num_patterns: int = 200,
                     max_m: int = 10, seed: int = 0, batch_size: int = 25) -> VerifyReport:
        """
        Sample patterns and compare list, count and locate against the brute-force oracles

        Batches run concurrently in worker threads over the shared index; the
        index is never mutated by queries.
        """
        if num_patterns < 0 or max_m < 1 or batch_size < 1:
            raise DomainError(f"invalid verify parameters num_patterns={num_patterns}, max_m={max_m}")
        report = VerifyReport(seed=seed)
        report.mismatches.extend(self._check_documents(bundle, collection))

        if num_patterns == 0:
            report.warnings.append("no patterns sampled; verification is vacuous")
            logger.warning("verify called with num_patterns=0")
            return report

        rng = np.random.default_rng(seed)
        patterns = sample_patterns(collection.documents, collection.sigma, num_patterns, max_m, rng)
        batches = [patterns[k:k + batch_size] for k in range(0, len(patterns), batch_size)]
        results = await asyncio.gather(
            *(asyncio.to_thread(self._check_batch, bundle, collection, batch, seed) for batch in batches)
        )
        for queries, mismatches in results:
            report.queries_checked += queries
            report.mismatches.extend(mismatches)
        report.patterns_checked = len(patterns)

        if report.passed:
            logger.info(f"verify passed: {report.patterns_checked} patterns, {report.queries_checked} queries")
        else:
            logger.warning(f"verify failed: {len(report.mismatches)} mismatches (seed {seed})")
        return report

    # benchmarking

    def bench(self, bundle: IndexBundle, lengths: Sequence[int], queries: int = 50,
              seed: int = 0) -> List[BenchRow]:
        """Time list, count and locate on substrings of each length drawn from the documents"""
        if queries < 1:
            raise DomainError(f"need at least one query per length, got {queries}")
        rng = np.random.default_rng(seed)
        documents = bundle.grammar.documents()
        rows: List[BenchRow] = []
        for m in lengths:
            candidates = [doc for doc in documents if len(doc) >= m]
            if m < 1 or not candidates:
                logger.warning(f"skipping pattern length {m}: no document is long enough")
                continue
            patterns = []
            for _ in range(queries):
                doc = candidates[int(rng.integers(0, len(candidates)))]
                start = int(rng.integers(0, len(doc) - m + 1))
                patterns.append(doc[start:start + m])
            for operation in OPERATIONS:
                rows.append(self._time(bundle, operation, m, patterns))
        return rows

    def _time(self, bundle: IndexBundle, operation: str, m: int, patterns: List[List[int]]) -> BenchRow:
        timings: List[float] = []
        sizes: List[int] = []
        for pattern in patterns:
            start = time.perf_counter()
            if operation == "list":
                size = len(bundle.dix.list_documents(pattern).documents)
            elif operation == "count":
                size = bundle.pidx.count(pattern)
            else:
                size = len(bundle.pidx.locate(pattern))
            timings.append((time.perf_counter() - start) * 1e6)
            sizes.append(size)
        return BenchRow(
            operation=operation,
            pattern_length=m,
            queries=len(patterns),
            mean_us=float(np.mean(timings)),
            max_us=float(np.max(timings)),
            mean_results=float(np.mean(sizes)),
        )
