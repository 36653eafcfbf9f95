"""`mbinv opcount`: predicted (and optionally measured) arithmetic of block inversion."""
import argparse

import structlog

from mbinv.config import get_settings
from mbinv.services.block_markov_service import block_markov_service
from mbinv.utils.helpers import dump_json

logger = structlog.get_logger()
settings = get_settings()


def register(subparsers) -> None:
    parser = subparsers.add_parser("opcount", help="operation-count model for block-tridiagonal inversion")
    parser.add_argument("--n", type=int, required=True, help="number of blocks")
    parser.add_argument("--m", type=int, required=True, help="block size")
    parser.add_argument("--measure", action="store_true", help="also invert a random instance and count")
    parser.add_argument("--seed", type=int, default=settings.DEFAULT_SEED)
    parser.add_argument("--out", default=None, help="output JSON (stdout when omitted)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    measured = None
    if args.measure:
        gen = block_markov_service.random_instance(args.n, args.m, args.seed)
        measured = block_markov_service.invert(gen).operations

    model = block_markov_service.op_count_model(args.n, args.m, measured)
    dump_json(model.model_dump(exclude_none=True), args.out)
    logger.info("opcount_completed", n=args.n, m=args.m, predicted=model.predicted_mult, measured=model.measured_mult)
    return 0
