"""
Tests for index storage
Container round trips, section table and corruption detection
"""
import json
import zlib

import pytest

from src.collection import from_texts, generate
from src.config import Settings
from src.exceptions import ContainerNotFoundError, CorruptContainerError, StorageError
from src.orchestrator import IndexOrchestrator
from src.storage import FORMAT_VERSION, MAGIC, SECTION_ORDER, FileIndexStore


@pytest.fixture
def orchestrator(tmp_path):
    return IndexOrchestrator(settings=Settings(), store=FileIndexStore(str(tmp_path)))


@pytest.fixture
def example_bundle(orchestrator):
    collection = from_texts([b"abracada", b"abrakada", b"ablakada"])
    return orchestrator.build(collection)


def listing(bundle, text):
    return bundle.dix.list_documents(bundle.encode(text)).documents


class TestFileIndexStore:
    """Tests for the single-file container"""

    def test_save_and_load(self, orchestrator, example_bundle, tmp_path):
        """Test a stored index answers like the original"""
        path = orchestrator.save(example_bundle, "example.gdx")
        assert path == str(tmp_path / "example.gdx")
        assert orchestrator.store.exists("example.gdx")

        loaded = orchestrator.load("example.gdx")
        assert loaded.alphabet == example_bundle.alphabet
        assert loaded.config == example_bundle.config
        assert loaded.doc_count == 3
        assert loaded.grammar.documents() == example_bundle.grammar.documents()
        assert listing(loaded, b"bra") == [1, 2]
        assert loaded.pidx.count(loaded.encode(b"a")) == 12

    def test_repetitive_round_trip(self, orchestrator):
        """Test an index built from an edit script with several metasymbol lengths"""
        collection, script = generate(4, 60, 12, 20, 4, "subtree")
        for ms_len in (1, 3):
            config = orchestrator.config(ms_len=ms_len, list_layout="root")
            bundle = orchestrator.build(collection, config, script=script, base=collection.base)
            orchestrator.save(bundle, f"rep{ms_len}.gdx")
            loaded = orchestrator.load(f"rep{ms_len}.gdx")
            assert loaded.config.ms_len == ms_len
            assert loaded.provenance == "generated"
            for pattern in (b"ab", b"abc", b"d", b"cab"):
                assert listing(loaded, pattern) == listing(bundle, pattern)

    def test_encoding_is_deterministic(self, orchestrator, example_bundle):
        """Test the same index encodes to the same bytes"""
        store = orchestrator.store
        assert store.encode(example_bundle) == store.encode(example_bundle)

    def test_layout(self, orchestrator, example_bundle):
        """Test magic, version and the whole-file checksum"""
        data = orchestrator.store.encode(example_bundle)
        assert data[:4] == MAGIC
        assert zlib.crc32(data[:-8]) == int.from_bytes(data[-8:], "little")

    def test_sections(self, orchestrator, example_bundle):
        """Test the section table lists every section in order"""
        orchestrator.save(example_bundle, "example.gdx")
        sections = orchestrator.store.sections("example.gdx")
        assert tuple(s.tag.encode() for s in sections) == SECTION_ORDER
        assert all(s.length > 0 for s in sections)

    def test_meta_section(self, orchestrator, example_bundle):
        """Test the metadata section is JSON"""
        meta = example_bundle.meta()
        assert meta["format"] == FORMAT_VERSION
        assert meta["documents"] == 3
        assert meta["total_length"] == 24
        assert json.loads(json.dumps(meta, sort_keys=True)) == meta

    def test_missing(self, orchestrator):
        """Test loading an absent container"""
        assert not orchestrator.store.exists("nope.gdx")
        with pytest.raises(ContainerNotFoundError):
            orchestrator.load("nope.gdx")

    @pytest.mark.parametrize("offset", [0, 10, 40, -100, -1])
    def test_flipped_bit(self, orchestrator, example_bundle, tmp_path, offset):
        """Test a single flipped bit anywhere is detected"""
        orchestrator.save(example_bundle, "example.gdx")
        path = tmp_path / "example.gdx"
        data = bytearray(path.read_bytes())
        data[offset] ^= 0x04
        path.write_bytes(bytes(data))
        with pytest.raises(CorruptContainerError):
            orchestrator.load("example.gdx")

    def test_truncated(self, orchestrator, example_bundle, tmp_path):
        """Test a truncated container"""
        orchestrator.save(example_bundle, "example.gdx")
        path = tmp_path / "example.gdx"
        path.write_bytes(path.read_bytes()[:-20])
        with pytest.raises(CorruptContainerError):
            orchestrator.load("example.gdx")

    def test_not_a_container(self, orchestrator, tmp_path):
        """Test a file without the magic"""
        (tmp_path / "junk.gdx").write_bytes(b"hello world, not an index at all")
        with pytest.raises(CorruptContainerError):
            orchestrator.load("junk.gdx")

    def test_corruption_is_storage_error(self):
        """Test corruption and absence share the storage error base"""
        assert issubclass(CorruptContainerError, StorageError)
        assert issubclass(ContainerNotFoundError, StorageError)
