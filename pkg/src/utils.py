"""
Utility functions for pattern decoding and output formatting
"""
import csv
import io
import json
from typing import List, Sequence

from pydantic import BaseModel

from src.exceptions import DomainError
from src.models import BenchRow, StatsReport, VerifyReport


_ESCAPES = {ord("\\"): 0x5C, ord("n"): 0x0A, ord("t"): 0x09, ord("r"): 0x0D, ord("0"): 0x00}


def decode_pattern(text: str, hex_mode: bool = False) -> bytes:
    """
    Pattern argument to bytes: UTF-8 with \\\\, \\n, \\t, \\r, \\0 and \\xHH
    escapes, or plain hexadecimal when hex_mode is set
    """
    if hex_mode:
        try:
            data = bytes.fromhex(text)
        except ValueError as e:
            raise DomainError(f"invalid hexadecimal pattern {text!r}") from e
    else:
        raw = text.encode("utf-8")
        out = bytearray()
        k = 0
        while k < len(raw):
            b = raw[k]
            if b != 0x5C:
                out.append(b)
                k += 1
                continue
            if k + 1 >= len(raw):
                raise DomainError("pattern ends with a dangling backslash")
            nxt = raw[k + 1]
            if nxt == ord("x"):
                digits = raw[k + 2:k + 4]
                try:
                    if len(digits) != 2:
                        raise ValueError(digits)
                    out.append(int(digits.decode("ascii"), 16))
                except (ValueError, UnicodeDecodeError) as e:
                    raise DomainError(f"invalid \\x escape in {text!r}") from e
                k += 4
            elif nxt in _ESCAPES:
                out.append(_ESCAPES[nxt])
                k += 2
            else:
                raise DomainError(f"unknown escape \\{chr(nxt)} in {text!r}")
        data = bytes(out)
    if not data:
        raise DomainError("pattern must be nonempty")
    return data


def pattern_text(data: bytes) -> str:
    """Printable form of a pattern: ASCII kept, other bytes as \\xHH"""
    parts = []
    for b in data:
        if b == 0x5C:
            parts.append("\\\\")
        elif 0x20 <= b < 0x7F:
            parts.append(chr(b))
        else:
            parts.append(f"\\x{b:02x}")
    return "".join(parts)


def json_line(record: BaseModel) -> str:
    """One compact JSON object with sorted keys"""
    return json.dumps(record.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))


def format_stats_table(report: StatsReport) -> str:
    """Format index statistics for terminal display"""
    lines = []

    lines.append("=" * 60)
    lines.append(f"  INDEX: D={report.documents}  N={report.total_length}  r={report.rules}  points={report.points}")
    lines.append("=" * 60)
    lines.append("")

    lines.append("COMPONENT BITS:")
    for name, value in report.bits.model_dump().items():
        lines.append(f"  {name:<14}{value:>14,}")
    lines.append(f"  {'total':<14}{report.total_bits:>14,}")
    if report.total_length:
        lines.append(f"  {'bits/symbol':<14}{report.total_bits / report.total_length:>14.2f}")
    lines.append("")

    lines.append("RUNS PER LEVEL:")
    lines.append(f"  {'level':>5}  {'nodes':>7}  {'runs':>9}")
    for level, (nodes, runs) in enumerate(zip(report.nodes_per_level, report.rho_per_level)):
        lines.append(f"  {level:>5}  {nodes:>7}  {runs:>9}")
    lines.append(f"  {'total':>5}  {sum(report.nodes_per_level):>7}  {report.rho_total:>9}")
    lines.append("")

    lines.append(f"Inverted-list ranges: {report.list_ranges}")
    config = report.config
    lines.append(
        f"Config: ms_len={config.ms_len} epsilon={config.epsilon} "
        f"tau={config.tau if config.tau is not None else 'auto'} layout={config.list_layout}"
    )
    lines.append("=" * 60)

    return "\n".join(lines)


def bench_csv(rows: Sequence[BenchRow]) -> str:
    """Benchmark rows as CSV with a header line"""
    buffer = io.StringIO()
    fields = list(BenchRow.model_fields)
    writer = csv.DictWriter(buffer, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        values = row.model_dump()
        for key in ("mean_us", "max_us", "mean_results"):
            values[key] = f"{values[key]:.3f}"
        writer.writerow(values)
    return buffer.getvalue()


def format_verify_report(report: VerifyReport, limit: int = 10) -> str:
    """Format a verification report; at most limit mismatches are shown in full"""
    lines: List[str] = []
    status = "PASS" if report.passed else "FAIL"
    lines.append(
        f"{status}: {report.patterns_checked} patterns, {report.queries_checked} queries, "
        f"{len(report.mismatches)} mismatches (seed {report.seed})"
    )
    for warning in report.warnings:
        lines.append(f"warning: {warning}")
    for mismatch in report.mismatches[:limit]:
        lines.append(
            f"  {mismatch.operation} pattern={mismatch.pattern} "
            f"expected={mismatch.expected} actual={mismatch.actual}"
        )
    if len(report.mismatches) > limit:
        lines.append(f"  ... {len(report.mismatches) - limit} more")
    return "\n".join(lines)


def parse_lengths(text: str) -> List[int]:
    """Comma-separated pattern lengths"""
    try:
        lengths = [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise DomainError(f"invalid length list {text!r}") from e
    if not lengths or min(lengths) < 1:
        raise DomainError(f"pattern lengths must be positive, got {text!r}")
    return lengths
