"""`mbinv check`: class-membership test of a matrix file."""
import argparse

import structlog

from mbinv.config import get_settings
from mbinv.exceptions import InputError
from mbinv.models.schemas import BandDocument, BlockDocument, DenseDocument, ScalarGeneratorDocument, parse_matrix_document
from mbinv.services.banded_markov_service import banded_markov_service
from mbinv.services.block_markov_service import block_markov_service
from mbinv.services.scalar_markov_service import scalar_markov_service
from mbinv.utils.helpers import dump_json, read_json

logger = structlog.get_logger()
settings = get_settings()


def register(subparsers) -> None:
    parser = subparsers.add_parser("check", help="test whether a matrix is m-connected or block Markov")
    parser.add_argument("--in", dest="input", required=True, help="matrix JSON")
    parser.add_argument("--out", default=None, help="report JSON (stdout when omitted)")
    parser.add_argument("--m", type=int, default=1, help="claimed half-bandwidth of the inverse")
    parser.add_argument("--block-size", type=int, default=None, help="claimed block size; overrides --m")
    parser.add_argument("--tol", type=float, default=settings.STRUCTURE_TOL, help="structure tolerance")
    parser.set_defaults(handler=run)


def dense_of(document):
    if isinstance(document, DenseDocument):
        return document.to_array()
    if isinstance(document, ScalarGeneratorDocument):
        return scalar_markov_service.expand(document.to_form())
    if isinstance(document, BandDocument):
        return banded_markov_service.expand(document.to_form())
    if isinstance(document, BlockDocument):
        return block_markov_service.expand(document.to_form())
    raise InputError(f"cannot check a '{document.kind}' document")


def run(args: argparse.Namespace) -> int:
    M = dense_of(parse_matrix_document(read_json(args.input)))

    if args.block_size is not None:
        report = block_markov_service.markov_block_test(M, args.block_size, args.tol)
    else:
        report = banded_markov_service.connectivity_test(M, args.m, args.tol)

    dump_json(report.model_dump(), args.out)
    logger.info("check_completed", passed=report.passed, residual=report.residual)
    return 0 if report.passed else 2
