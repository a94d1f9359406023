"""
Tests for the artifact ledger.

Tests file hashing, manifest storage, and change detection between runs.
"""

import json

from src.hartogs_kit.ledger import ArtifactLedger, MANIFEST_NAME


class TestLedgerInitialization:
    """Test ledger initialization and manifest path handling."""

    def test_default_manifest_file(self, tmp_path):
        """Test manifest defaults to the output directory."""
        ledger = ArtifactLedger(tmp_path)
        assert ledger.manifest_file == tmp_path / MANIFEST_NAME

    def test_custom_manifest_file(self, tmp_path):
        """Test explicit manifest path takes precedence."""
        ledger = ArtifactLedger(tmp_path, manifest_file=str(tmp_path / 'other.json'))
        assert ledger.manifest_file == tmp_path / 'other.json'


class TestFileHashing:
    """Test file hash computation."""

    def test_hash_simple_file(self, tmp_path):
        """Test hashing a simple text file."""
        test_file = tmp_path / "test.txt"
        test_file.write_text("Hello, World!")

        file_hash = ArtifactLedger.get_file_hash(test_file)

        # Known MD5 of "Hello, World!"
        assert file_hash == '65a8e27d8879283831b664bd8b7f0ad4'

    def test_hash_large_file(self, tmp_path):
        """Test hashing a file larger than one chunk."""
        test_file = tmp_path / "large.csv"
        test_file.write_text("X" * 10000)

        file_hash = ArtifactLedger.get_file_hash(test_file)

        assert file_hash is not None
        assert len(file_hash) == 32

    def test_hash_nonexistent_file(self, tmp_path):
        """Test hashing a nonexistent file returns None."""
        assert ArtifactLedger.get_file_hash(tmp_path / "missing.csv") is None


class TestChangeDetection:
    """Test comparison against the previous run's manifest."""

    def test_first_run_reports_new_files(self, tmp_path):
        """Test every artifact of a first run is new."""
        artifact = tmp_path / "summary.txt"
        artifact.write_text("epsilon=inf\n")
        ledger = ArtifactLedger(tmp_path)
        ledger.load()

        assert ledger.compare(artifact) == (True, "new file")

    def test_identical_rerun_is_unchanged(self, tmp_path):
        """Test a rerun with byte-identical output reports no change."""
        artifact = tmp_path / "summary.txt"
        artifact.write_text("epsilon=inf\n")
        first = ArtifactLedger(tmp_path)
        first.load()
        first.update(artifact, 'summary')
        first.save()

        second = ArtifactLedger(tmp_path)
        second.load()
        second.update(artifact, 'summary')

        assert second.compare(artifact) == (False, "unchanged")
        assert second.changed_files() == []
        assert second.get_stats() == {'total_entries': 1, 'changed': 0}

    def test_modified_output_is_reported(self, tmp_path):
        """Test a changed artifact is flagged on the next run."""
        artifact = tmp_path / "trace.csv"
        artifact.write_text("t,step\n0,0\n")
        first = ArtifactLedger(tmp_path)
        first.load()
        first.update(artifact, 'trace')
        first.save()

        artifact.write_text("t,step\n0,0.5\n")
        second = ArtifactLedger(tmp_path)
        second.load()
        second.update(artifact, 'trace')

        assert second.changed_files() == ['trace.csv']
        assert second.entries['trace.csv']['status'] == 'file modified'


class TestManifestStorage:
    """Test manifest persistence."""

    def test_manifest_keys_are_relative(self, tmp_path):
        """Test entries are keyed by path relative to the output directory."""
        artifact = tmp_path / "norm_table.csv"
        artifact.write_text("degree\n2\n")
        ledger = ArtifactLedger(tmp_path)
        ledger.update(artifact, 'trace')
        ledger.save()

        data = json.loads((tmp_path / MANIFEST_NAME).read_text())
        assert list(data) == ['norm_table.csv']
        assert data['norm_table.csv']['kind'] == 'trace'

    def test_corrupt_manifest_is_ignored(self, tmp_path):
        """Test a corrupt manifest loads as empty."""
        (tmp_path / MANIFEST_NAME).write_text("{ not json")
        ledger = ArtifactLedger(tmp_path)
        assert ledger.load() == {}
