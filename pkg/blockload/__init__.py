#
# __init__.py
#
# Copyright 2024 The blockload authors. All rights reserved.
#

"""
    blockload

    Batching strategies for variable-length sequences in data-parallel
    training: naive padding, fixed chunks, trim-and-pad and block packing,
    with a simulator for gradient-sync deadlocks.
"""

# see the run function in cli.py for the entry point
import sys
from typing import NoReturn

from blockload.cli import cli, run


def main() -> NoReturn:
    """Console script entry point"""
    sys.exit(run(sys.argv[1:]))


__all__ = ["cli", "main", "run"]
