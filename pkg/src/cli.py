"""
CLI interface using Click framework
Provides commands to generate collections, build indexes and query, verify,
inspect and benchmark them
"""
import asyncio
import json
import logging
import os

import click

from src.collection import (
    Collection,
    generate,
    ingest_directory,
    read_collection,
    read_script,
    replay,
    write_collection,
    write_script,
)
from src.config import load_settings
from src.exceptions import (
    BuildError,
    CollectionError,
    ConfigurationError,
    ConsistencyError,
    DomainError,
    GramDocError,
    IntegrityError,
    QueryRangeError,
    StorageError,
)
from src.orchestrator import IndexOrchestrator
from src.utils import bench_csv, decode_pattern, format_stats_table, format_verify_report, json_line, parse_lengths


EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2
EXIT_IO = 3


class CommandError(click.ClickException):
    """ClickException carrying the process exit code"""

    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.exit_code = exit_code


def exit_code_for(error: Exception) -> int:
    """0 success, 1 verification failure, 2 usage, 3 I/O or corruption"""
    if isinstance(error, (StorageError, CollectionError, IntegrityError, ConsistencyError, OSError)):
        return EXIT_IO
    if isinstance(error, (DomainError, BuildError, ConfigurationError, QueryRangeError)):
        return EXIT_USAGE
    if isinstance(error, GramDocError):
        return EXIT_USAGE
    return EXIT_IO


def fail(error: Exception) -> CommandError:
    click.echo(f"❌ Error: {error}", err=True)
    return CommandError(str(error), exit_code_for(error))


def _orchestrator() -> IndexOrchestrator:
    return IndexOrchestrator(settings=click.get_current_context().obj["settings"])


def _load_collection(path: str, alphabet=None):
    if os.path.isdir(path):
        collection = ingest_directory(path)
        if alphabet is not None and collection.alphabet != list(alphabet):
            collection = _reencode(collection, alphabet)
        return collection
    return read_collection(path, alphabet)


def _reencode(collection, alphabet):
    """Re-encode an ingested collection over a given byte alphabet"""
    lookup = {b: k for k, b in enumerate(alphabet, start=1)}
    documents = []
    for d in range(1, collection.doc_count + 1):
        data = collection.document_bytes(d)
        missing = [b for b in data if b not in lookup]
        if missing:
            raise CollectionError(f"document {d} holds byte {missing[0]} outside the script alphabet")
        documents.append([lookup[b] for b in data])
    return collection.model_copy(update={"documents": documents, "alphabet": list(alphabet)})


@click.group()
@click.option('--verbose', '-v', is_flag=True, help='Log progress to stderr')
@click.option('--env-file', default=None, help='Optional .env file with GRAMDOC_* settings')
@click.pass_context
def cli_group(ctx, verbose, env_file):
    """Grammar-based document listing index CLI"""
    try:
        settings = load_settings(env_file)
    except ConfigurationError as e:
        raise fail(e)
    level = logging.DEBUG if verbose else getattr(logging, settings.log_level.upper(), logging.WARNING)
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")
    ctx.ensure_object(dict)
    ctx.obj["settings"] = settings


@cli_group.command(name='gen')
@click.option('--seed', default=0, type=int, help='Random seed')
@click.option('--n', 'n', required=True, type=click.IntRange(min=1), help='Base document length')
@click.option('--D', 'doc_count', required=True, type=click.IntRange(min=1), help='Number of documents')
@click.option('--s', 's', default=0, type=click.IntRange(min=0), help='Number of edits')
@click.option('--sigma', default=4, type=click.IntRange(min=2, max=255), help='Alphabet size')
@click.option('--model', default='range', type=click.Choice(['single', 'range', 'subtree']), help='Edit model')
@click.option('--out', required=True, help='Output directory for collection.txt and script.txt')
def gen_command(seed, n, doc_count, s, sigma, model, out):
    """Generate a synthetic repetitive collection and its edit script"""
    try:
        collection, script = generate(seed, n, doc_count, s, sigma, model)
        collection_path = os.path.join(out, "collection.txt")
        script_path = os.path.join(out, "script.txt")
        write_collection(collection, collection_path)
        write_script(script, collection.base, collection.alphabet, script_path)
    except (GramDocError, OSError) as e:
        raise fail(e)

    click.echo(json.dumps({
        "collection": collection_path,
        "script": script_path,
        "documents": collection.doc_count,
        "total_length": collection.total_length,
        "edits": len(script.edits),
    }, sort_keys=True))


@cli_group.command(name='build')
@click.option('--in', 'input_path', default=None, help='Collection file (one escaped document per line) or directory')
@click.option('--script', 'script_path', default=None, help='Edit script; selects the repetitive builder')
@click.option('--out', required=True, help='Output container file')
@click.option('--ms-len', default=None, type=click.IntRange(min=1, max=16), help='Maximum metasymbol length')
@click.option('--epsilon', default=None, type=click.FloatRange(min=0.0, max=1.0, min_open=True), help='Upward-tracking sample exponent')
@click.option('--tau', default=None, type=click.IntRange(min=1), help='Prefix-sum sampling step')
@click.option('--list-layout', default=None, type=click.Choice(['leaves', 'root']), help='Inverted list layout')
def build_command(input_path, script_path, out, ms_len, epsilon, tau, list_layout):
    """Build an index container from a collection"""
    if input_path is None and script_path is None:
        raise click.UsageError("give --in, --script or both")
    try:
        orchestrator = _orchestrator()
        config = orchestrator.config(ms_len=ms_len, epsilon=epsilon, tau=tau, list_layout=list_layout)
        script = base = None
        if script_path is not None:
            script, base, alphabet = read_script(script_path)
            if input_path is not None:
                collection = _load_collection(input_path, alphabet)
            else:
                collection = Collection(documents=replay(script, base), alphabet=alphabet, provenance="generated")
        else:
            collection = _load_collection(input_path)
        bundle = orchestrator.build(collection, config, script=script, base=base)
        path = orchestrator.save(bundle, out)
    except (GramDocError, OSError) as e:
        raise fail(e)

    click.echo(json.dumps({
        "index": path,
        "documents": bundle.doc_count,
        "total_length": bundle.grammar.total_length,
        "rules": bundle.grammar.size,
        "builder": "repetitive" if script is not None else "generic",
    }, sort_keys=True))


@cli_group.command(name='query')
@click.option('--index', 'index_path', required=True, help='Index container file')
@click.option('--op', 'operation', default='list', type=click.Choice(['list', 'count', 'locate']), help='Query operation')
@click.option('--hex', 'hex_mode', is_flag=True, help='Patterns are hexadecimal byte strings')
@click.argument('patterns', nargs=-1, required=True)
def query_command(index_path, operation, hex_mode, patterns):
    """Answer list, count or locate queries; one JSON line per pattern"""
    try:
        decoded = [decode_pattern(p, hex_mode) for p in patterns]
    except DomainError as e:
        raise click.UsageError(str(e))
    try:
        orchestrator = _orchestrator()
        bundle = orchestrator.load(index_path)
        for pattern in decoded:
            click.echo(json_line(orchestrator.query(bundle, operation, pattern)))
    except (GramDocError, OSError) as e:
        raise fail(e)


@cli_group.command(name='verify')
@click.option('--index', 'index_path', required=True, help='Index container file')
@click.option('--collection', 'collection_path', required=True, help='Collection the index was built from')
@click.option('--num-patterns', default=200, type=click.IntRange(min=0), help='Patterns to sample')
@click.option('--max-m', default=10, type=click.IntRange(min=1), help='Maximum pattern length')
@click.option('--seed', default=0, type=int, help='Pattern sampling seed')
@click.option('--batch-size', default=25, type=click.IntRange(min=1), help='Patterns per concurrent batch')
def verify_command(index_path, collection_path, num_patterns, max_m, seed, batch_size):
    """Compare the index against brute-force oracles"""
    try:
        orchestrator = _orchestrator()
        bundle = orchestrator.load(index_path)
        collection = _load_collection(collection_path, bundle.alphabet)
        report = asyncio.run(orchestrator.verify(bundle, collection, num_patterns, max_m, seed, batch_size))
    except (GramDocError, OSError) as e:
        raise fail(e)

    click.echo(format_verify_report(report))
    if not report.passed:
        click.echo(f"❌ Verification failed; reproduce with --seed {seed} --max-m {max_m}", err=True)
        raise CommandError(f"{len(report.mismatches)} mismatches", EXIT_VERIFY_FAILED)


@cli_group.command(name='stats')
@click.option('--index', 'index_path', required=True, help='Index container file')
@click.option('--format', 'output_format', default='json', type=click.Choice(['json', 'table']), help='Output format')
def stats_command(index_path, output_format):
    """Per-component bits and runs per grid level"""
    try:
        orchestrator = _orchestrator()
        report = orchestrator.stats(orchestrator.load(index_path))
    except (GramDocError, OSError) as e:
        raise fail(e)

    if output_format == 'table':
        click.echo(format_stats_table(report))
    else:
        payload = report.model_dump(mode='json')
        payload["rho_total"] = report.rho_total
        click.echo(json.dumps(payload, sort_keys=True))


@cli_group.command(name='bench')
@click.option('--index', 'index_path', required=True, help='Index container file')
@click.option('--lengths', default='2,4,8,16', help='Comma-separated pattern lengths')
@click.option('--queries', default=50, type=click.IntRange(min=1), help='Queries per length and operation')
@click.option('--seed', default=0, type=int, help='Pattern sampling seed')
@click.option('--output', default=None, help='Also write the CSV to this file')
def bench_command(index_path, lengths, queries, seed, output):
    """Time list, count and locate over a sweep of pattern lengths; CSV output"""
    try:
        sweep = parse_lengths(lengths)
    except DomainError as e:
        raise click.UsageError(str(e))
    try:
        orchestrator = _orchestrator()
        rows = orchestrator.bench(orchestrator.load(index_path), sweep, queries, seed)
        content = bench_csv(rows)
        if output:
            os.makedirs(os.path.dirname(output) or '.', exist_ok=True)
            with open(output, 'w') as f:
                f.write(content)
    except (GramDocError, OSError) as e:
        raise fail(e)

    click.echo(content, nl=False)


def main():
    """Entry point for CLI"""
    cli_group()


if __name__ == '__main__':
    main()
