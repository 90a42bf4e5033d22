"""greenwalks command line: python -m src.main <command> [options]"""
import argparse
import logging
import sys
from typing import Optional

from pydantic import ValidationError

from src.api.jobs import parse_job, report_error, run
from src.services.pfinite import CONVERSIONS

logger = logging.getLogger(__name__)

METHODS = ["auto", "walk-dp", "factor-dp", "heracles", "closed-form"]


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", help="artifact path (default: stdout)")
    parser.add_argument("--workers", type=int, help="worker processes/threads for this job")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    parser.add_argument("--quiet", action="store_true", help="warnings and errors only")


def _add_lattice(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--M", type=int, required=True, help="coordinates changed per step")
    parser.add_argument("--N", type=int, required=True, help="dimension")


def _add_sequence(parser: argparse.ArgumentParser, nmax: int) -> None:
    _add_lattice(parser)
    parser.add_argument("--nmax", type=int, default=nmax)
    parser.add_argument("--method", choices=METHODS, default="auto")
    parser.add_argument("--in", dest="input", help="term file instead of generating terms")
    parser.add_argument("--rec", help="recurrence (JSON) used to extend the terms to nmax")
    parser.add_argument("--seed-terms", type=int, default=200, help="generated terms before extension")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="greenwalks", description="Exact workbench for M-headed lattice walks")
    commands = parser.add_subparsers(dest="command", required=True)

    terms = commands.add_parser("terms", help="generate r(n) or a parity part")
    _add_lattice(terms)
    terms.add_argument("--nmax", type=int, required=True)
    terms.add_argument("--method", choices=METHODS, default="auto")
    norm = terms.add_mutually_exclusive_group()
    norm.add_argument("--tilde", action="store_const", const="tilde", dest="normalization", help="r(2n)")
    norm.add_argument("--tilde-odd", action="store_const", const="tilde-odd", dest="normalization", help="r(2n+1)")
    terms.add_argument("--modulus", type=int, default=0, help="prime modulus (0 = exact)")
    terms.add_argument("--no-cache", action="store_false", dest="use_cache")
    _add_common(terms)

    guess = commands.add_parser("guess", help="guess a recurrence or theta-ODE")
    guess.add_argument("kind", choices=["rec", "ode"])
    guess.add_argument("--in", dest="input", required=True)
    guess.add_argument("--max-order", type=int, default=6)
    guess.add_argument("--max-degree", type=int, default=30)
    guess.add_argument("--objective", choices=["order-first", "degree-first"], default="order-first")
    guess.add_argument("--oversample", type=int, default=25)
    guess.add_argument("--prime-count", type=int, default=2)
    guess.add_argument("--max-primes", type=int, default=64)
    _add_common(guess)

    convert = commands.add_parser("convert", help="operator conversions and closure operations")
    convert.add_argument("op", choices=CONVERSIONS)
    convert.add_argument("--in", dest="input", required=True)
    convert.add_argument("--other", help="second operand for add")
    convert.add_argument("--terms", help="term file; boundary rows failing with zero padding are killed")
    convert.add_argument("--offset", type=int, choices=[0, 1], default=0)
    convert.add_argument("--power", type=int, default=2)
    convert.add_argument("--kill-rows", type=int, nargs="*", default=[])
    _add_common(convert)

    polya = commands.add_parser("polya", help="Pólya number with a fitted tail")
    _add_sequence(polya, nmax=1000)
    polya.add_argument("--tol", type=float, default=5e-4)
    _add_common(polya)

    asympt = commands.add_parser("asympt", help="fit r(n) ~ C rho^n n^alpha")
    _add_sequence(asympt, nmax=500)
    _add_common(asympt)

    mc = commands.add_parser("mc", help="Monte Carlo return probability")
    _add_lattice(mc)
    mc.add_argument("--horizon", type=int, default=1000)
    mc.add_argument("--trials", type=int, required=True)
    mc.add_argument("--seed", type=int, required=True)
    mc.add_argument("--batch-size", type=int)
    _add_common(mc)

    verify = commands.add_parser("verify", help="replay checks on stored artifacts")
    verify.add_argument("artifacts", nargs="+")
    _add_common(verify)

    reproduce = commands.add_parser("reproduce", help="reproduction targets")
    reproduce.add_argument("target", choices=["table1", "theorems", "cerberus"])
    reproduce.add_argument("--rows", nargs="*", default=[], help="lattice labels M-N to include")
    reproduce.add_argument("--seed", type=int)
    reproduce.add_argument("--trials", type=int, default=200_000)
    _add_common(reproduce)

    return parser


def _job_options(args: argparse.Namespace) -> dict:
    options = {k: v for k, v in vars(args).items() if v is not None and k not in ("verbose", "quiet")}
    return options


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, stream=sys.stderr)

    options = _job_options(args)
    try:
        job = parse_job(options)
    except ValidationError as e:
        logger.error(f"Invalid {args.command} job")
        report_error({"error": "invalid-job", "detail": str(e), "command": args.command})
        return 2

    logger.info(f"Running {job.command}")
    return run(job)


if __name__ == "__main__":
    sys.exit(main())
