# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-pruned-render development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

from ._format import (
    AblationTableDirFmt,
    AblationTableFormat,
    EpsmDirFmt,
    EpsmFormat,
)
from ._type import AblationTable, PixelMap

__all__ = [
    "EpsmFormat",
    "EpsmDirFmt",
    "PixelMap",
    "AblationTableFormat",
    "AblationTableDirFmt",
    "AblationTable",
]
