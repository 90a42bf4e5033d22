"""
Artifact verification.

Replays the cheap checks on stored artifacts (recurrence verification,
certification, conversion replays, invariant checks) without regenerating terms,
and prints a PASS/FAIL report.
"""
import json
import logging
from datetime import datetime
from pathlib import Path

from src.services.errors import WorkbenchError
from src.services.guess import certify_candidate
from src.services.pfinite import convert, operator_from_dict, rec_verify, theta_ode_to_rec
from src.services.termtable import read_terms

_LOGGER = logging.getLogger(__name__)


class _Report:
    """PASS/FAIL lines grouped by artifact, with running totals."""

    def __init__(self):
        self.passed = 0
        self.failed = 0
        self.skipped = 0

    @staticmethod
    def section(title: str) -> None:
        print(f"\n--- {title}")

    def record(self, name: str, success: bool, data=None, error=None) -> None:
        mark = "PASS" if success else "FAIL"
        line = f"  [{mark}] {name}"
        if data is not None:
            line += f"  {_summarize(data)}"
        print(line)
        if error is not None:
            print(f"         {error}")
        if success:
            self.passed += 1
        else:
            self.failed += 1

    def skip(self, name: str, note: str) -> None:
        print(f"  [SKIP] {name}  {note}")
        self.skipped += 1

    def summary(self, artifacts: int) -> None:
        print(f"\n{artifacts} artifacts: {self.passed} passed, {self.failed} failed, {self.skipped} skipped")


def _summarize(data) -> str:
    if isinstance(data, dict):
        return ", ".join(f"{k}={v}" for k, v in data.items())
    if isinstance(data, list):
        return json.dumps(data, default=str)
    return str(data)


def _verify_terms(record: dict, report: _Report) -> None:
    table = read_terms(Path(record["path"]))
    report.record("term file digest", table.digest() == record["digest"], data=record["digest"][:16])
    problems = table.violations()
    report.record("term table invariants", not problems, error="; ".join(problems) or None)


def _verify_guess(record: dict, report: _Report) -> None:
    if record.get("operator") is None:
        status = record["report"]["reconstruction_status"]
        report.record("guess result", status == "not-found", data=status)
        return
    table = read_terms(Path(record["input"]))
    report.record("terms digest", table.digest() == record["terms_digest"], data=record["terms_digest"][:16])
    op = operator_from_dict(record["operator"])
    if record["kind"] == "rec":
        check = rec_verify(op, table)
        report.record(f"rec_verify on {len(table)} terms", bool(check), data=check.checked,
                     error=None if check else f"first failure at n={check.first_failure}")
        cert = certify_candidate(op, table)
        report.record("certify_candidate", cert.passed, data=cert.to_dict(), error=None if cert.passed else cert.detail)
    else:
        check = rec_verify(theta_ode_to_rec(op), table, padded=True)
        report.record(f"ODE recurrence on {len(table)} terms", bool(check), data=check.checked,
                     error=None if check else f"first failure at n={check.first_failure}")


def _verify_convert(record: dict, report: _Report) -> None:
    sources = [operator_from_dict(s) for s in record["sources"]]
    params = record["params"]
    other = sources[1] if len(sources) > 1 else None
    replay = convert(record["op"], sources[0], other, params["offset"], params["power"], params["kill_rows"])
    stored = operator_from_dict(record["operator"])
    report.record(f"replay {record['op']}", replay == stored, data={"order": stored.order, "degree": stored.degree})


def _verify_polya(record: dict, report: _Report) -> None:
    est = record["estimate"]
    if est["status"] == "recurrent":
        report.record("recurrent estimate", est["value"] == 1.0, data=est)
        return
    ok = 0 < est["value"] < 1 and est["tail_bound"] < record["tolerance"] and est["green_value"] >= 1
    report.record("transient estimate", ok, data=est)


def _verify_asympt(record: dict, report: _Report) -> None:
    fit = record["fit"]
    report.record("asymptotic fit", fit["rho"] > 0 and fit["C"] > 0, data=fit,
                 error="low confidence" if fit["low_confidence"] else None)


def _verify_mc(record: dict, report: _Report) -> None:
    ok = 0 <= record["estimate"] <= 1 and record["stderr"] >= 0
    report.record("Monte Carlo estimate", ok, data={"estimate": record["estimate"], "stderr": record["stderr"]})


def _verify_reproduce(record: dict, report: _Report) -> None:
    for check in record["checks"]:
        if check["status"] == "skip":
            report.skip(f"{check['label']}: {check['check']}", check["note"])
            continue
        report.record(
            f"{check['label']}: {check['check']}",
            check["status"] == "pass",
            data={"expected": check["expected"], "observed": check["observed"]},
            error=check["note"] or None,
        )


_VERIFIERS = {
    "terms": _verify_terms,
    "guess": _verify_guess,
    "convert": _verify_convert,
    "polya": _verify_polya,
    "asympt": _verify_asympt,
    "mc": _verify_mc,
    "reproduce": _verify_reproduce,
}


def verify_artifacts(paths: list[Path]) -> int:
    """Replay checks on each artifact. Returns 0 when every check passes."""
    print(f"greenwalks verify, {datetime.now().isoformat(timespec='seconds')}")
    report = _Report()
    for path in paths:
        report.section(str(path))
        try:
            record = json.loads(Path(path).read_text())
            verifier = _VERIFIERS.get(record.get("command"))
            if verifier is None:
                report.record("artifact type", False, error=f"unknown command {record.get('command')!r}")
                continue
            verifier(record, report)
        except (OSError, json.JSONDecodeError, KeyError) as e:
            report.record("read artifact", False, error=str(e))
        except WorkbenchError as e:
            report.record("replay", False, error=f"{e.code}: {e.detail}")

    report.summary(len(paths))
    _LOGGER.info(f"Verified {len(paths)} artifacts: {report.passed} passed, {report.failed} failed")
    return 0 if report.failed == 0 else 1
