import pytest

from src.services.errors import TermFileError
from src.services.lattice import LatticeSpec
from src.services.termtable import (
    Normalization,
    TermTable,
    format_terms,
    parse_terms,
    read_terms,
    write_terms,
)

SQUARE = TermTable(LatticeSpec(1, 2), Normalization.RAW, 0, (1, 0, 4, 0, 36, 0, 400), "walk-dp")


def test_well_formed_table():
    assert SQUARE.violations() == []
    assert SQUARE.step_base == 4
    assert SQUARE.is_exact


def test_violations():
    broken = TermTable(LatticeSpec(1, 2), Normalization.RAW, 0, (1, 1, 3, 2), "walk-dp")
    problems = broken.violations()
    assert "r(1) != 0" in problems
    assert any(p.startswith("r(2) != q") for p in problems)
    assert "nonzero odd-index term" in problems
    negative = TermTable(LatticeSpec(2, 3), Normalization.TILDE, 0, (1, 12, -5), "factor-dp")
    assert negative.violations() == ["negative walk count"]


def test_parity_views():
    even = SQUARE.to_tilde()
    assert even.terms == (1, 4, 36, 400)
    assert even.step_base == 16
    assert even.to_raw() == SQUARE
    evens, odds = SQUARE.parity_parts()
    assert evens == even
    assert odds.terms == (0, 0, 0)
    assert odds.normalization is Normalization.TILDE_ODD


def test_to_raw_needs_vanishing_odd_terms():
    table = TermTable(LatticeSpec(2, 3), Normalization.TILDE, 0, (1, 12), "factor-dp")
    with pytest.raises(ValueError):
        table.to_raw()


def test_reduce_and_head():
    reduced = SQUARE.reduce(7)
    assert reduced.terms == (1, 0, 4, 0, 1, 0, 1)
    assert not reduced.is_exact
    assert reduced.violations() == []
    with pytest.raises(ValueError):
        reduced.reduce(5)
    assert SQUARE.head(3).terms == (1, 0, 4)


def test_file_format_roundtrip(tmp_path):
    path = tmp_path / "square.terms"
    write_terms(SQUARE, path)
    assert read_terms(path) == SQUARE
    assert format_terms(SQUARE).splitlines()[0] == (
        "greenwalks-terms v1 M=1 N=2 norm=raw modulus=0 count=7 method=walk-dp"
    )


def test_digest_depends_on_content():
    assert SQUARE.digest() == parse_terms(format_terms(SQUARE)).digest()
    assert SQUARE.digest() != SQUARE.head(5).digest()


@pytest.mark.parametrize(
    "text",
    [
        "",
        "not-a-term-file\n1\n",
        "greenwalks-terms v1 M=1 N=2 norm=raw modulus=0 count=3 method=walk-dp\n1\n0\n",
        "greenwalks-terms v1 M=3 N=2 norm=raw modulus=0 count=1 method=walk-dp\n1\n",
        "greenwalks-terms v1 M=1 N=2 norm=raw modulus=0 count=2 method=walk-dp\n1\nx\n",
    ],
)
def test_parse_errors(text):
    with pytest.raises(TermFileError):
        parse_terms(text)


def test_read_missing_file(tmp_path):
    with pytest.raises(TermFileError):
        read_terms(tmp_path / "missing.terms")
