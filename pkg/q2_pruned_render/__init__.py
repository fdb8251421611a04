# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-pruned-render development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

from ._version import __version__
from .eio import sampling_intervals
from .ero import candidate_map
from .harness import run_ablation

__all__ = [
    "__version__",
    "candidate_map",
    "sampling_intervals",
    "run_ablation",
]
