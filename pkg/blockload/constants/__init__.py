#
# __init__.py
#
# Copyright 2024 The blockload authors. All rights reserved.
#

"""
Constants shared across the application: dataset presets, report labels
and exit codes.
"""

from typing import Dict

# Action Genome length statistics; only the summary numbers are published
AG_TRAIN_COUNT = 7464
AG_TRAIN_FRAMES = 166785
AG_TEST_COUNT = 1737
AG_TEST_FRAMES = 54371
AG_MIN_LEN = 3
AG_MAX_LEN = 94

# generator presets, keyed by the name accepted on the command line
PRESETS: Dict[str, Dict[str, int]] = {
    "action-genome-train": {
        "count": AG_TRAIN_COUNT,
        "total_frames": AG_TRAIN_FRAMES,
        "min_len": AG_MIN_LEN,
        "max_len": AG_MAX_LEN,
    },
    "action-genome-test": {
        "count": AG_TEST_COUNT,
        "total_frames": AG_TEST_FRAMES,
        "min_len": AG_MIN_LEN,
        "max_len": AG_MAX_LEN,
    },
}

# measured padding, deleted frames and epoch minutes of the four strategies on the training split
REFERENCE_PADDING = {"naive": 534831, "chunks": 0, "mixed": 37712, "bload": 3695}
REFERENCE_DELETED = {"naive": 0, "chunks": 92271, "mixed": 40289, "bload": 0}
REFERENCE_MINUTES = {"naive": 170, "chunks": 18, "mixed": 40, "bload": 41}

# column headers for the comparison table, in display order
STRATEGY_LABELS = {
    "naive": "0 padding",
    "chunks": "sampling",
    "mixed": "mix pad",
    "bload": "block_pad",
}

ROW_PADDING = "padding amount"
ROW_DELETED = "# frames deleted"
ROW_BLOCKS = "# blocks"
ROW_PROCESSED = "processed frames"
ROW_UTILIZATION = "utilization"
ROW_TIME = "time (per epoch)"

# exhaustive search bound for the oracle
ORACLE_MAX_SEQUENCES = 12

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVALID_MANIFEST = 2
EXIT_INFEASIBLE = 3
