"""`mbinv table1`: storage ratio of dense symmetric against block generator form."""
import argparse

from mbinv.config import get_settings
from mbinv.services.block_markov_service import block_markov_service
from mbinv.utils.helpers import dump_csv, format_half_even, parse_int_list

settings = get_settings()


def register(subparsers) -> None:
    parser = subparsers.add_parser("table1", help="memory ratio table as CSV")
    parser.add_argument("--n", default=None, help="point counts, e.g. 5,10,50")
    parser.add_argument("--m", default=None, help="block sizes, e.g. 1,2,3")
    parser.add_argument("--out", default=None, help="output CSV (stdout when omitted)")
    parser.set_defaults(handler=run)


def table_rows(ns, ms):
    return [
        (m, n, format_half_even(block_markov_service.memory_ratio(n, m)))
        for m in ms
        for n in ns
    ]


def run(args: argparse.Namespace) -> int:
    ns = parse_int_list(args.n) if args.n else settings.TABLE1_N
    ms = parse_int_list(args.m) if args.m else settings.TABLE1_M
    dump_csv(("m", "n", "ratio"), table_rows(ns, ms), args.out)
    return 0
