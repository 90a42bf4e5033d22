"""On-disk cache of term tables: <root>/<M>-<N>/<norm>/<method>[-p<modulus>].terms"""
import logging
from pathlib import Path
from typing import Optional

from src.services.errors import TermFileError
from src.services.lattice import LatticeSpec
from src.services.settings import get_settings
from src.services.termtable import Normalization, TermTable, read_terms, write_terms

_LOGGER = logging.getLogger(__name__)


class TermCache:
    """Longest-known prefix per (spec, normalization, method, modulus)."""

    def __init__(self, root: Optional[Path] = None):
        self.root = Path(root) if root is not None else get_settings().cache_dir

    def path_for(self, spec: LatticeSpec, normalization: Normalization, method: str, modulus: int = 0) -> Path:
        name = f"{method}-p{modulus}.terms" if modulus else f"{method}.terms"
        return self.root / spec.label / Normalization(normalization).value / name

    def get(
        self,
        spec: LatticeSpec,
        normalization: Normalization,
        method: str,
        count: int,
        modulus: int = 0,
    ) -> Optional[TermTable]:
        """
        Cached prefix with at least count terms.

        Returns:
            The first count terms, or None on a miss or an unreadable file
        """
        path = self.path_for(spec, normalization, method, modulus)
        if not path.exists():
            return None
        try:
            table = read_terms(path)
        except TermFileError as e:
            _LOGGER.warning(f"Ignoring unreadable cache file {path}: {e.detail}")
            return None
        if table.spec != spec or table.modulus != modulus or len(table) < count:
            return None
        _LOGGER.debug(f"Term cache hit: {path} ({len(table)} terms)")
        return table.head(count)

    def set(self, table: TermTable) -> Path:
        """Store a table unless a longer prefix is already cached."""
        path = self.path_for(table.spec, table.normalization, table.method, table.modulus)
        existing = self.get(table.spec, table.normalization, table.method, len(table), table.modulus)
        if existing is not None:
            return path
        write_terms(table, path)
        return path


_term_cache: Optional[TermCache] = None


def get_term_cache() -> TermCache:
    """Get the singleton term cache instance."""
    global _term_cache
    if _term_cache is None:
        _term_cache = TermCache()
    return _term_cache


def reset_term_cache() -> None:
    global _term_cache
    _term_cache = None
