"""Term tables and the term-file format."""
import hashlib
import logging
import os
import tempfile
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

from src.services.errors import TermFileError
from src.services.lattice import LatticeSpec

_LOGGER = logging.getLogger(__name__)

FORMAT_TAG = "greenwalks-terms"
FORMAT_VERSION = "v1"


class Normalization(str, Enum):
    RAW = "raw"          # r(n)
    TILDE = "tilde"      # r(2n)
    TILDE_ODD = "tilde-odd"  # r(2n + 1)


@dataclass(frozen=True)
class TermTable:
    """A prefix of r_{M,N} (or of one of its parity parts), exact or modulo a prime."""

    spec: LatticeSpec
    normalization: Normalization
    modulus: int
    terms: tuple[int, ...]
    method: str

    def __post_init__(self):
        object.__setattr__(self, "normalization", Normalization(self.normalization))
        object.__setattr__(self, "terms", tuple(int(t) for t in self.terms))

    def __len__(self) -> int:
        return len(self.terms)

    def __getitem__(self, index):
        return self.terms[index]

    @property
    def is_exact(self) -> bool:
        return self.modulus == 0

    @property
    def step_base(self) -> int:
        """q for raw tables, q^2 for the parity parts."""
        q = self.spec.q
        return q if self.normalization is Normalization.RAW else q * q

    def violations(self) -> list[str]:
        """Invariant violations; empty for a well-formed table."""
        problems = []
        t = self.terms
        q = self.spec.q % self.modulus if self.modulus else self.spec.q
        if self.normalization is Normalization.RAW:
            if t and t[0] != 1:
                problems.append("r(0) != 1")
            if len(t) > 1 and t[1] != 0:
                problems.append("r(1) != 0")
            if len(t) > 2 and t[2] != q:
                problems.append(f"r(2) != q = {self.spec.q}")
            if self.spec.parity_vanishing and any(t[1::2]):
                problems.append("nonzero odd-index term")
        elif self.normalization is Normalization.TILDE:
            if t and t[0] != 1:
                problems.append("r(0) != 1")
            if len(t) > 1 and t[1] != q:
                problems.append(f"r(2) != q = {self.spec.q}")
        if self.is_exact and any(x < 0 for x in t):
            problems.append("negative walk count")
        return problems

    def head(self, count: int) -> "TermTable":
        return replace(self, terms=self.terms[:count])

    def reduce(self, p: int) -> "TermTable":
        if not self.is_exact:
            raise ValueError("table is already modular")
        return replace(self, modulus=p, terms=tuple(t % p for t in self.terms))

    def to_tilde(self) -> "TermTable":
        """Even-index part r(2n) of a raw table."""
        if self.normalization is Normalization.TILDE:
            return self
        if self.normalization is not Normalization.RAW:
            raise ValueError(f"cannot take the even part of a {self.normalization.value} table")
        return replace(self, normalization=Normalization.TILDE, terms=self.terms[::2])

    def parity_parts(self) -> tuple["TermTable", "TermTable"]:
        """(r(2n), r(2n + 1)) as two tables."""
        if self.normalization is not Normalization.RAW:
            raise ValueError("parity parts need a raw table")
        even = replace(self, normalization=Normalization.TILDE, terms=self.terms[::2])
        odd = replace(self, normalization=Normalization.TILDE_ODD, terms=self.terms[1::2])
        return even, odd

    def to_raw(self) -> "TermTable":
        """Interleave zeros back in; only meaningful when odd terms vanish."""
        if self.normalization is Normalization.RAW:
            return self
        if self.normalization is not Normalization.TILDE or not self.spec.parity_vanishing:
            raise ValueError(f"cannot rebuild a raw table for {self.spec.label} from {self.normalization.value}")
        raw = []
        for t in self.terms:
            raw.extend((t, 0))
        return replace(self, normalization=Normalization.RAW, terms=tuple(raw[:-1]))

    def header(self) -> str:
        return (
            f"{FORMAT_TAG} {FORMAT_VERSION} M={self.spec.M} N={self.spec.N} "
            f"norm={self.normalization.value} modulus={self.modulus} "
            f"count={len(self.terms)} method={self.method}"
        )

    def digest(self) -> str:
        """sha256 over the serialized table."""
        h = hashlib.sha256(self.header().encode())
        for t in self.terms:
            h.update(f"\n{t}".encode())
        return h.hexdigest()


def format_terms(table: TermTable) -> str:
    return "\n".join([table.header(), *(str(t) for t in table.terms)]) + "\n"


def parse_terms(text: str) -> TermTable:
    """Parse the term-file format."""
    lines = text.strip().splitlines()
    if not lines:
        raise TermFileError("empty term file")
    fields = lines[0].split()
    if len(fields) < 2 or fields[0] != FORMAT_TAG or fields[1] != FORMAT_VERSION:
        raise TermFileError(f"unrecognized header: {lines[0]!r}")
    try:
        meta = dict(f.split("=", 1) for f in fields[2:])
        spec = LatticeSpec(int(meta["M"]), int(meta["N"]))
        terms = tuple(int(line) for line in lines[1:])
        count = int(meta["count"])
        table = TermTable(spec, Normalization(meta["norm"]), int(meta["modulus"]), terms, meta["method"])
    except (KeyError, ValueError) as e:
        raise TermFileError(f"malformed term file: {e}") from e
    if count != len(terms):
        raise TermFileError(f"header declares {count} terms, found {len(terms)}")
    return table


def read_terms(path: Path) -> TermTable:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise TermFileError(f"cannot read {path}: {e}") from e
    return parse_terms(text)


def atomic_write_text(path: Path, text: str) -> None:
    """Write through a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_terms(table: TermTable, path: Path) -> None:
    atomic_write_text(path, format_terms(table))
    _LOGGER.info(f"Wrote {len(table)} terms to {path}")
