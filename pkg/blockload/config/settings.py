#
# settings.py
#
# Copyright 2024 The blockload authors. All rights reserved.
#

"""
Default experiment settings. Each value can be overridden per invocation by
a command-line flag or by the BLOCKLOAD_<NAME> environment variable.
"""

from dataclasses import asdict, dataclass, fields
from fractions import Fraction

from blockload.config import ENVVAR_PREFIX


@dataclass(frozen=True)
class Settings:  # pylint: disable=too-many-instance-attributes
    """
    Defaults used by the command line when a flag is omitted.
    Seeds have no default, every seeded command requires one.
    """

    # the experiments ran on a single machine with eight GPUs
    world_size: int = 8
    batch_size: int = 1
    cost_per_frame: Fraction = Fraction(1)
    sampling: str = "sequence"
    sigma: float = 1.4
    output_format: str = "text"

    def as_dict(self) -> dict:
        """Returns the settings as a dictionary"""
        data = asdict(self)
        data["cost_per_frame"] = str(self.cost_per_frame)
        return data

    @staticmethod
    def envvar(name: str) -> str:
        """The environment variable that overrides a setting"""
        if name not in {field.name for field in fields(Settings)}:
            raise KeyError(name)
        return f"{ENVVAR_PREFIX}_{name.upper()}"


DEFAULT_SETTINGS = Settings()
