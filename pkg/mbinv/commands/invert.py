"""`mbinv invert`: structured inverse of a matrix file."""
import argparse
import sys

import numpy as np
import structlog

from mbinv.config import get_settings
from mbinv.exceptions import InputError, NotGeneratorForm
from mbinv.models.matrices import BandedGeneratorForm
from mbinv.models.schemas import (
    BandDocument,
    BandInverseDocument,
    BlockDocument,
    BlockTridiagonalDocument,
    DenseDocument,
    InversionReport,
    MatrixKind,
    ScalarGeneratorDocument,
    TridiagonalDocument,
    parse_matrix_document,
)
from mbinv.services.banded_markov_service import banded_markov_service
from mbinv.services.block_markov_service import block_markov_service
from mbinv.services.scalar_markov_service import scalar_markov_service
from mbinv.utils.helpers import dump_json, read_json

logger = structlog.get_logger()
settings = get_settings()


def register(subparsers) -> None:
    parser = subparsers.add_parser("invert", help="invert a generator-form or dense Markov matrix")
    parser.add_argument("--in", dest="input", required=True, help="matrix JSON")
    parser.add_argument("--out", default=None, help="output JSON (stdout when omitted)")
    hint = parser.add_mutually_exclusive_group()
    hint.add_argument("--m", type=int, default=None, help="half-bandwidth for dense input")
    hint.add_argument("--block-size", type=int, default=None, help="block size for dense input")
    parser.add_argument("--tol", type=float, default=settings.STRUCTURE_TOL, help="structure tolerance")
    parser.set_defaults(handler=run)


def _reject(report) -> None:
    raise NotGeneratorForm(report.row, report.col, report.residual)


def invert_document(document, m=None, block_size=None, tol=None):
    """
    Structured inverse of a parsed document

    Returns:
        (inverse document, InversionReport)
    """
    tol = settings.STRUCTURE_TOL if tol is None else tol

    if isinstance(document, DenseDocument):
        M = document.to_array()
        if block_size is not None:
            report = block_markov_service.markov_block_test(M, block_size, tol)
            if not report.passed:
                _reject(report)
            document = BlockDocument.from_form(block_markov_service.generator_from_dense(M, block_size))
        elif m is not None and m > 1:
            report = banded_markov_service.connectivity_test(M, m, tol)
            if not report.passed:
                _reject(report)
            document = BandDocument.from_form(BandedGeneratorForm.from_dense(M, m))
        else:
            document = ScalarGeneratorDocument.from_form(scalar_markov_service.compress(M, tol))

    if isinstance(document, ScalarGeneratorDocument):
        gen = document.to_form()
        inverse = scalar_markov_service.invert(gen)
        det = scalar_markov_service.determinant(gen)
        report = InversionReport(
            kind=MatrixKind.SCALAR_GENERATOR,
            size=gen.n,
            determinant=det.value,
            alphas=inverse.alphas.tolist(),
            multiplications=inverse.operations.multiplications,
        )
        return TridiagonalDocument.from_matrix(inverse), report

    if isinstance(document, BandDocument):
        K = document.to_form()
        inverse = banded_markov_service.invert(K)
        report = InversionReport(
            kind=MatrixKind.BAND,
            size=K.n,
            determinant=float(np.prod(inverse.alphas)),
            alphas=inverse.alphas.tolist(),
            multiplications=inverse.operations.multiplications,
        )
        return BandInverseDocument.from_matrix(inverse), report

    if isinstance(document, BlockDocument):
        gen = document.to_form()
        inverse = block_markov_service.invert(gen)
        block_dets = block_markov_service.block_determinants(inverse)
        report = InversionReport(
            kind=MatrixKind.BLOCK,
            size=gen.size,
            determinant=float(np.prod(block_dets)),
            block_determinants=block_dets.tolist(),
            multiplications=inverse.operations.multiplications,
            inversions=inverse.operations.inversions,
        )
        return BlockTridiagonalDocument.from_matrix(inverse), report

    raise InputError(f"cannot invert a '{document.kind}' document")


def run(args: argparse.Namespace) -> int:
    document = parse_matrix_document(read_json(args.input))
    result, report = invert_document(document, args.m, args.block_size, args.tol)

    dump_json(result.model_dump(by_alias=True), args.out)
    sys.stderr.write(report.model_dump_json(exclude_none=True) + "\n")
    logger.info("invert_completed", kind=report.kind.value, size=report.size, determinant=report.determinant)
    return 0
