#
# __init__.py
#
# Copyright 2024 The blockload authors. All rights reserved.
#

"""
Application directories and settings
"""

from platformdirs import PlatformDirs


DIRS = PlatformDirs(  # pylint: disable=unexpected-keyword-arg
    "blockload",
    "blockload",
    roaming=True,
)
ENVVAR_PREFIX = "BLOCKLOAD"
