"""
Ledger of run artifacts.
Tracks MD5 hashes of output files so a rerun can report whether results changed
"""

import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Dict, List, Optional, Tuple

logger = logging.getLogger(__name__)

MANIFEST_NAME = 'manifest.json'


class ArtifactLedger:
    """Manages the manifest of artifacts produced in one output directory"""

    def __init__(self, out_dir: str, manifest_file: Optional[str] = None):
        """
        Initialize the ledger

        Args:
            out_dir: Run output directory
            manifest_file: Path to the manifest (defaults to out_dir/manifest.json)
        """
        self.out_dir = Path(out_dir)
        self.manifest_file = Path(manifest_file) if manifest_file else self.out_dir / MANIFEST_NAME
        self.entries: Dict[str, dict] = {}
        self.previous: Dict[str, dict] = {}

    def load(self) -> Dict[str, dict]:
        """
        Load the manifest of the previous run, if any

        Returns:
            Previous entries keyed by file name
        """
        if self.manifest_file.exists():
            try:
                with open(self.manifest_file, 'r') as f:
                    self.previous = json.load(f)
                logger.debug(f"📂 Loaded manifest with {len(self.previous)} entries")
            except (OSError, ValueError) as e:
                logger.warning(f"⚠️  Error loading manifest: {e}")
                self.previous = {}
        else:
            self.previous = {}
        return self.previous

    def save(self):
        """Write the manifest, sorted by file name"""
        os.makedirs(self.manifest_file.parent, exist_ok=True)
        with open(self.manifest_file, 'w') as f:
            json.dump(dict(sorted(self.entries.items())), f, indent=2)
        logger.debug(f"📝 Manifest saved ({len(self.entries)} entries)")

    @staticmethod
    def get_file_hash(file_path: Path) -> Optional[str]:
        """
        Get MD5 hash of file content

        Args:
            file_path: Path to file

        Returns:
            MD5 hash string or None if the file cannot be read
        """
        hash_md5 = hashlib.md5()
        try:
            with open(file_path, "rb") as f:
                for chunk in iter(lambda: f.read(4096), b""):
                    hash_md5.update(chunk)
            return hash_md5.hexdigest()
        except OSError as e:
            logger.warning(f"⚠️  Error hashing {file_path}: {e}")
            return None

    def _key(self, file_path: Path) -> str:
        path = Path(file_path)
        try:
            return str(path.relative_to(self.out_dir))
        except ValueError:
            return str(path)

    def compare(self, file_path: Path) -> Tuple[bool, str]:
        """
        Compare a file against the previous run

        Returns:
            Tuple of (changed: bool, reason: str)
        """
        file_hash = self.get_file_hash(file_path)
        if not file_hash:
            return True, "error reading file"
        key = self._key(file_path)
        if key not in self.previous:
            return True, "new file"
        if self.previous[key].get('hash') != file_hash:
            return True, "file modified"
        return False, "unchanged"

    def update(self, file_path: Path, kind: str):
        """
        Record an artifact of this run

        Args:
            file_path: Artifact path
            kind: Artifact role (summary, trace, series, ...)
        """
        file_hash = self.get_file_hash(file_path)
        if file_hash:
            _, reason = self.compare(file_path)
            self.entries[self._key(file_path)] = {
                'hash': file_hash,
                'kind': kind,
                'status': reason,
            }

    def changed_files(self) -> List[str]:
        return sorted(key for key, entry in self.entries.items() if entry['status'] != 'unchanged')

    def get_stats(self) -> Dict[str, int]:
        """
        Get ledger statistics

        Returns:
            Dictionary with artifact counts
        """
        return {
            'total_entries': len(self.entries),
            'changed': len(self.changed_files()),
        }
