"""
Job models and dispatch for the command line.

Every job is validated by pydantic before any computation starts. Results are
written as JSON artifacts carrying the sha256 of their inputs.
"""
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

from pydantic import AfterValidator, BaseModel, Field, TypeAdapter, field_validator, model_validator

from src.api.reproduce import reproduce
from src.api.verify import verify_artifacts
from src.services.analysis import asymptotic_fit, polya_estimate
from src.services.errors import InternalError, InvalidJobError, OperatorFormatError, WorkbenchError
from src.services.guess import GuessConfig, certify_candidate, guess_rec, guess_theta_ode
from src.services.lattice import LatticeSpec
from src.services.modular import is_probable_prime
from src.services.pfinite import (
    Operator,
    PolyRec,
    convert,
    ode_anchors,
    operator_from_dict,
    padded_failures,
    rec_anchors,
    rec_verify,
)
from src.services.settings import get_settings
from src.services.termgen import default_method, extend_terms, generate_terms
from src.services.termtable import Normalization, TermTable, atomic_write_text, format_terms, read_terms
from src.services.walker import mc_return_probability

_LOGGER = logging.getLogger(__name__)

MethodName = Literal["auto", "walk-dp", "factor-dp", "heracles", "closed-form"]


def _existing(path: Path) -> Path:
    if not path.is_file():
        raise ValueError(f"no such file: {path}")
    return path


ExistingPath = Annotated[Path, AfterValidator(_existing)]


class JobBase(BaseModel):
    out: Optional[Path] = None
    workers: Optional[int] = Field(None, ge=1)


class LatticeJob(JobBase):
    M: int = Field(ge=1)
    N: int = Field(ge=1)

    @model_validator(mode="after")
    def _check_heads(self):
        if self.M > self.N:
            raise ValueError(f"M must not exceed N, got M={self.M}, N={self.N}")
        return self

    @property
    def spec(self) -> LatticeSpec:
        return LatticeSpec(self.M, self.N)


class TermsJob(LatticeJob):
    command: Literal["terms"] = "terms"
    nmax: int = Field(ge=0)
    method: MethodName = "auto"
    normalization: Normalization = Normalization.RAW
    modulus: int = Field(0, ge=0)
    use_cache: bool = True

    @field_validator("modulus")
    @classmethod
    def _prime_modulus(cls, value: int) -> int:
        if value and not is_probable_prime(value):
            raise ValueError(f"modulus {value} is not prime")
        return value


class GuessJob(JobBase):
    command: Literal["guess"] = "guess"
    kind: Literal["rec", "ode"]
    input: ExistingPath
    max_order: int = Field(6, ge=0)
    max_degree: int = Field(30, ge=0)
    objective: Literal["order-first", "degree-first"] = "order-first"
    oversample: int = Field(25, ge=25)
    prime_count: int = Field(2, ge=2)
    max_primes: int = Field(64, ge=3)


class ConvertJob(JobBase):
    command: Literal["convert"] = "convert"
    op: Literal["rec2ode", "ode2rec", "theta2d", "d2theta", "interleave", "compose", "add"]
    input: ExistingPath
    other: Optional[ExistingPath] = None
    terms: Optional[ExistingPath] = None
    offset: Literal[0, 1] = 0
    power: int = Field(2, ge=1)
    kill_rows: list[int] = []

    @model_validator(mode="after")
    def _check_operands(self):
        if self.op == "add" and self.other is None:
            raise ValueError("add needs --other")
        if self.terms is not None and self.op != "rec2ode":
            raise ValueError("--terms only applies to rec2ode")
        return self


class SequenceJob(LatticeJob):
    """Shared term source for the analysis commands."""

    nmax: int = Field(1000, ge=12)
    method: MethodName = "auto"
    input: Optional[ExistingPath] = None
    rec: Optional[ExistingPath] = None
    seed_terms: int = Field(200, ge=2)


class PolyaJob(SequenceJob):
    command: Literal["polya"] = "polya"
    tol: float = Field(5e-4, gt=0, lt=1)


class AsymptJob(SequenceJob):
    command: Literal["asympt"] = "asympt"
    nmax: int = Field(500, ge=12)


class McJob(LatticeJob):
    command: Literal["mc"] = "mc"
    horizon: int = Field(1000, ge=1)
    trials: int = Field(ge=1)
    seed: int = Field(ge=0, lt=2 ** 64)
    batch_size: Optional[int] = Field(None, ge=1)


class VerifyJob(JobBase):
    command: Literal["verify"] = "verify"
    artifacts: list[ExistingPath] = Field(min_length=1)


class ReproduceJob(JobBase):
    command: Literal["reproduce"] = "reproduce"
    target: Literal["table1", "theorems", "cerberus"]
    rows: list[str] = []
    seed: Optional[int] = Field(None, ge=0, lt=2 ** 64)
    trials: int = Field(200_000, ge=1)

    @model_validator(mode="after")
    def _seed_for_sampling(self):
        if self.target == "cerberus" and self.seed is None:
            raise ValueError("reproduce cerberus runs a Monte Carlo check and needs --seed")
        return self


JobSpec = Annotated[
    Union[TermsJob, GuessJob, ConvertJob, PolyaJob, AsymptJob, McJob, VerifyJob, ReproduceJob],
    Field(discriminator="command"),
]

_JOB_ADAPTER = TypeAdapter(JobSpec)


def parse_job(data: dict) -> JobSpec:
    """Validate raw options into a job; raises pydantic.ValidationError."""
    return _JOB_ADAPTER.validate_python(data)


# --- artifacts ---------------------------------------------------------------------

def input_hash(job: JobBase) -> str:
    """sha256 over the job options and the contents of its input files."""
    payload = job.model_dump(mode="json", exclude={"out", "workers"})
    h = hashlib.sha256(json.dumps(payload, sort_keys=True).encode())
    for name in ("input", "other", "terms", "rec"):
        path = getattr(job, name, None)
        if path is not None:
            h.update(Path(path).read_bytes())
    return h.hexdigest()


def emit(job: JobBase, record: dict) -> dict:
    """Stamp the record and write it to job.out, or print it."""
    record = {"command": job.command, "input_hash": input_hash(job), **record, "settings": get_settings().to_dict()}
    text = json.dumps(record, indent=2, default=str) + "\n"
    if job.out is not None:
        atomic_write_text(job.out, text)
        _LOGGER.info(f"Wrote {job.command} artifact to {job.out}")
    else:
        sys.stdout.write(text)
    return record


def report_error(record: dict) -> None:
    sys.stderr.write(json.dumps(record) + "\n")


def load_operator(path: Path) -> Operator:
    """Operator from a JSON file; guess and convert artifacts are unwrapped."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise OperatorFormatError(f"cannot read operator from {path}: {e}") from e
    if isinstance(data, dict) and "operator" in data:
        data = data["operator"]
    if not isinstance(data, dict):
        raise OperatorFormatError(f"{path} holds no operator")
    return operator_from_dict(data)


# --- handlers ----------------------------------------------------------------------

def _run_terms(job: TermsJob) -> int:
    table = generate_terms(job.spec, job.nmax, job.method, job.normalization, job.modulus, job.use_cache)
    if job.out is None:
        sys.stdout.write(format_terms(table))
        return 0
    atomic_write_text(job.out, format_terms(table))
    meta = {
        "command": job.command,
        "input_hash": input_hash(job),
        "path": str(job.out),
        "lattice": table.spec.label,
        "normalization": table.normalization.value,
        "count": len(table),
        "digest": table.digest(),
    }
    atomic_write_text(job.out.with_name(job.out.name + ".json"), json.dumps(meta, indent=2) + "\n")
    _LOGGER.info(f"Wrote {len(table)} terms of {table.spec.label} to {job.out}")
    return 0


def _run_guess(job: GuessJob) -> int:
    table = read_terms(job.input)
    cfg = GuessConfig(
        max_order=job.max_order,
        max_degree=job.max_degree,
        objective=job.objective,
        oversample=job.oversample,
        prime_count=job.prime_count,
        max_primes=job.max_primes,
        prime_bits=get_settings().prime_bits,
        workers=job.workers,
    )
    report = guess_rec(table, cfg) if job.kind == "rec" else guess_theta_ode(table, cfg)
    record = {
        "kind": job.kind,
        "input": str(job.input),
        "lattice": table.spec.label,
        "normalization": table.normalization.value,
        "terms_digest": table.digest(),
        "report": report.to_dict(),
        "operator": report.found.to_dict() if report.found is not None else None,
    }
    if report.found is not None:
        if job.kind == "rec":
            record["anchors"] = rec_anchors(report.found)
            record["certification"] = certify_candidate(report.found, table).to_dict()
        else:
            record["anchors"] = ode_anchors(report.found)
    emit(job, record)
    return 0


def _run_convert(job: ConvertJob) -> int:
    op = load_operator(job.input)
    other = load_operator(job.other) if job.other is not None else None
    kill_rows = list(job.kill_rows)
    if job.terms is not None:
        if not isinstance(op, PolyRec):
            raise OperatorFormatError("rec2ode needs a PolyRec")
        kill_rows = padded_failures(op, read_terms(job.terms))
        _LOGGER.info(f"Boundary rows failing with zero padding: {kill_rows}")
    result = convert(job.op, op, other, job.offset, job.power, kill_rows)
    emit(job, {
        "op": job.op,
        "sources": [op.to_dict()] + ([other.to_dict()] if other is not None else []),
        "params": {"offset": job.offset, "power": job.power, "kill_rows": kill_rows},
        "operator": result.to_dict(),
    })
    return 0


def sequence_for(job: SequenceJob) -> TermTable:
    """The term table an analysis job works on: a file, generated terms, or a recurrence extension."""
    spec = job.spec
    if job.input is not None:
        table = read_terms(job.input)
        if table.spec != spec:
            raise InvalidJobError(f"{job.input} holds {table.spec.label}, job asks for {spec.label}")
    else:
        norm = Normalization.TILDE if spec.parity_vanishing else Normalization.RAW
        count = min(job.nmax, job.seed_terms - 1) if job.rec is not None else job.nmax
        method = default_method(spec) if job.method == "auto" else job.method
        if job.rec is None and method != "closed-form" and job.nmax >= job.seed_terms:
            _LOGGER.warning(
                f"Generating {job.nmax + 1} exact terms of {spec.label} with {method}; this grows steeply with nmax. "
                f"Pass --rec to extend {job.seed_terms} generated terms with a recurrence instead"
            )
        table = generate_terms(spec, count, job.method, norm)
    if job.rec is None:
        return table.head(job.nmax + 1)
    rec = load_operator(job.rec)
    if not isinstance(rec, PolyRec):
        raise OperatorFormatError(f"{job.rec} does not hold a recurrence")
    check = rec_verify(rec, table)
    if not check:
        raise InvalidJobError(f"recurrence in {job.rec} fails on the seed terms at n={check.first_failure}")
    return extend_terms(rec, table, job.nmax)


def _run_polya(job: PolyaJob) -> int:
    table = sequence_for(job)
    estimate = polya_estimate(table, job.tol)
    emit(job, {
        "lattice": table.spec.label,
        "terms_digest": table.digest(),
        "tolerance": job.tol,
        "estimate": estimate.to_dict(),
    })
    return 0


def _run_asympt(job: AsymptJob) -> int:
    table = sequence_for(job)
    fit = asymptotic_fit(table)
    emit(job, {"lattice": table.spec.label, "terms_digest": table.digest(), "fit": fit.to_dict()})
    return 0


def _run_mc(job: McJob) -> int:
    estimate, stderr = mc_return_probability(job.spec, job.horizon, job.trials, job.seed, job.batch_size, job.workers)
    emit(job, {
        "lattice": job.spec.label,
        "horizon": job.horizon,
        "trials": job.trials,
        "seed": job.seed,
        "estimate": estimate,
        "stderr": stderr,
    })
    return 0


def _run_verify(job: VerifyJob) -> int:
    return verify_artifacts(job.artifacts)


def _run_reproduce(job: ReproduceJob) -> int:
    result = reproduce(job.target, rows=job.rows, seed=job.seed, trials=job.trials)
    emit(job, result)
    return 0 if result["passed"] else 1


_HANDLERS = {
    "terms": _run_terms,
    "guess": _run_guess,
    "convert": _run_convert,
    "polya": _run_polya,
    "asympt": _run_asympt,
    "mc": _run_mc,
    "verify": _run_verify,
    "reproduce": _run_reproduce,
}


def run(job: JobSpec) -> int:
    """
    Execute a validated job.

    Returns:
        0 on success, 1 on a module error or failed check, 2 on an invalid job
    """
    if job.workers is not None:
        get_settings().workers = job.workers
    try:
        return _HANDLERS[job.command](job)
    except InvalidJobError as e:
        _LOGGER.error(f"{job.command} rejected: {e.detail}")
        report_error(e.to_record(job.command))
        return 2
    except WorkbenchError as e:
        _LOGGER.error(f"{job.command} failed: {e.detail}")
        report_error(e.to_record(job.command))
        return 1
    except (ArithmeticError, ValueError) as e:
        _LOGGER.exception(f"{job.command} hit an internal error")
        report_error(InternalError(f"{type(e).__name__}: {e}").to_record(job.command))
        return 1
