"""`mbinv demo2d`: the coupled Wiener / Ornstein-Uhlenbeck process on a uniform grid."""
import argparse

import numpy as np
import structlog

from mbinv.exceptions import InvalidGrid
from mbinv.models.kernels import Example2DKernel, SamplingGrid
from mbinv.models.matrices import BlockGeneratorForm
from mbinv.models.schemas import BlockTridiagonalDocument, GridDocument
from mbinv.services.block_markov_service import block_markov_service
from mbinv.services.dense_oracle_service import dense_oracle_service
from mbinv.services.kernel_service import kernel_service
from mbinv.utils.helpers import dump_json

logger = structlog.get_logger()


def register(subparsers) -> None:
    parser = subparsers.add_parser("demo2d", help="closed-form blocks and inverse of the 2D example")
    parser.add_argument("--sigma1", type=float, default=1.0)
    parser.add_argument("--sigma2", type=float, default=1.0)
    parser.add_argument("--alpha", type=float, default=1.0)
    parser.add_argument("--tau", type=float, default=1.0, help="grid spacing; t_i = i * tau")
    parser.add_argument("--n", type=int, default=4, help="number of grid points")
    parser.add_argument("--out", default=None, help="output JSON (stdout when omitted)")
    parser.set_defaults(handler=run)


def demo_bundle(sigma1: float, sigma2: float, alpha: float, tau: float, n: int) -> dict:
    if n < 2 or tau <= 0:
        raise InvalidGrid(f"need n >= 2 and tau > 0 (n={n}, tau={tau})")
    kernel = Example2DKernel(sigma1=sigma1, sigma2=sigma2, alpha=alpha)
    grid = SamplingGrid.uniform(tau, n)

    blocks = kernel_service.example_2d_blocks(sigma1, sigma2, alpha, grid)
    gen = BlockGeneratorForm(diag_blocks=blocks.K_diag, trans_blocks=blocks.Gamma)
    inverse = block_markov_service.invert(gen)

    oracle = dense_oracle_service.invert_dense(kernel_service.covariance_matrix(kernel, grid))
    deviation = float(np.max(np.abs(inverse.to_dense() - oracle)))

    bundle = {
        "grid": GridDocument(points=grid.points.tolist()).model_dump(),
        "K_diag": blocks.K_diag,
        "K_super": blocks.K_super,
        "Gamma": blocks.Gamma,
        "A": blocks.A,
        "A_inv": blocks.A_inv,
        "M": blocks.M,
        "det_A": blocks.det_A,
        "determinant": float(np.prod(blocks.det_A)),
        "inverse": BlockTridiagonalDocument.from_matrix(inverse).model_dump(),
        "max_deviation": deviation,
        "multiplications": inverse.operations.multiplications,
    }
    if sigma1 == sigma2:
        bundle["uniform"] = kernel_service.example_2d_uniform(sigma1, alpha, tau)
    return bundle


def run(args: argparse.Namespace) -> int:
    bundle = demo_bundle(args.sigma1, args.sigma2, args.alpha, args.tau, args.n)
    dump_json(bundle, args.out)
    logger.info("demo2d_completed", n=args.n, max_deviation=bundle["max_deviation"])
    return 0
