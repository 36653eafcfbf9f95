"""`mbinv estimate`: BLUE of mean-model coefficients from a measurement CSV."""
import argparse

import structlog

from mbinv.config import get_settings
from mbinv.exceptions import DimensionMismatch
from mbinv.models.kernels import SamplingGrid, parse_kernel
from mbinv.models.matrices import LinearMeanModel
from mbinv.models.schemas import EstimateDocument
from mbinv.services.blue_service import blue_service
from mbinv.utils.helpers import dump_json, read_json, read_measurements

logger = structlog.get_logger()
settings = get_settings()


def register(subparsers) -> None:
    parser = subparsers.add_parser("estimate", help="best linear unbiased estimate under Markov noise")
    parser.add_argument("--data", required=True, help="CSV with header t,z or t,z1..zm")
    parser.add_argument("--basis", default="const", help="const | poly:K")
    parser.add_argument("--kernel", required=True, help="kernel JSON")
    parser.add_argument("--tol", type=float, default=None, help="pivot tolerance")
    parser.add_argument("--out", default=None, help="output JSON (stdout when omitted)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    points, values = read_measurements(args.data)
    kernel = parse_kernel(read_json(args.kernel))
    if values.shape[1] != kernel.dimension:
        raise DimensionMismatch(
            f"{values.shape[1]} measurement columns for a {kernel.dimension}-dimensional kernel"
        )

    grid = SamplingGrid(points)
    model = LinearMeanModel.from_basis(args.basis, grid.points, kernel.dimension)
    result = blue_service.estimate(model, values.ravel(), kernel, grid, args.tol)

    document = EstimateDocument(B=result.B.tolist(), D=result.D.tolist(), residual_norm=result.residual_norm)
    dump_json(document.model_dump(), args.out)
    logger.info("estimate_completed", basis=args.basis, kernel=kernel.kind, parameters=model.parameters)
    return 0
