#
# __init__.py
#
# Copyright 2024 The blockload authors. All rights reserved.
#

"""
Various utilities for blockload
"""

from fractions import Fraction
import os
from pathlib import Path
import tempfile
from typing import Callable, Optional, TypeVar, Union

from blockload.utils.types import DelayedLog

global log  # pylint: disable=global-at-module-level,invalid-name
# the global log object, used everywhere
log = DelayedLog()


T = TypeVar("T")
U = TypeVar("U")


def map_optional(func: Callable[[T], U], value: Optional[T]) -> Optional[U]:
    """Map a function over an optional value, returning None if the value is None"""
    if value is None:
        return None
    return func(value)


def current_umask() -> int:
    """The process umask; reading it requires setting it, so it is restored at once"""
    mask = os.umask(0)
    os.umask(mask)
    return mask


def write_atomic(path: Path, data: Union[bytes, str]) -> None:
    """
    Write data to path by writing a temporary file in the same directory
    and renaming it over the target, so readers never see a partial file
    """
    if isinstance(data, str):
        data = data.encode("utf-8")
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    directory.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=directory)
    try:
        with os.fdopen(fd, "wb") as tmp_file:
            tmp_file.write(data)
            tmp_file.flush()
            os.fsync(tmp_file.fileno())
        # mkstemp creates 0600; give the result the mode a plain open() would
        os.chmod(tmp_name, 0o666 & ~current_umask())
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    log.debug(f"Wrote {len(data)} bytes to {path}")


def fraction_str(value: Fraction) -> str:
    """Format a fraction as num/den, or as an integer when it is one"""
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def pretty_ratio(value: Optional[Fraction], precision: int = 2) -> str:
    """Format an optional ratio for tables; None means the denominator was zero"""
    if value is None:
        return "inf"
    return f"{float(value):.{precision}f}"


def pretty_count(value: int) -> str:
    """Format a frame count with thousands separators"""
    return f"{value:,}"
