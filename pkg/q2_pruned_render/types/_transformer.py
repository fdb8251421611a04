# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-pruned-render development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------
import json
import math
import os

import pandas as pd

from .._utils import read_epsm, write_epsm
from ..maps import ScalarMap
from ..plugin_setup import plugin
from ._format import ABLATION_COLUMNS, AblationTableDirFmt, EpsmDirFmt


@plugin.register_transformer
def _1(data: ScalarMap) -> EpsmDirFmt:
    ff = EpsmDirFmt()
    write_epsm(data, os.path.join(str(ff), "map.epsm"))
    return ff


@plugin.register_transformer
def _2(data: EpsmDirFmt) -> ScalarMap:
    return read_epsm(os.path.join(str(data), "map.epsm"))


# JSON has no infinity, so an exact match is stored as the string "inf"
@plugin.register_transformer
def _3(data: pd.DataFrame) -> AblationTableDirFmt:
    ff = AblationTableDirFmt()
    rows = []
    for row in data.loc[:, list(ABLATION_COLUMNS)].to_dict(orient="records"):
        for key, value in row.items():
            if isinstance(value, float) and math.isinf(value):
                row[key] = "inf"
            elif isinstance(value, float) and math.isnan(value):
                row[key] = None
        rows.append(row)
    with open(os.path.join(str(ff), "ablation.json"), "w") as fh:
        json.dump(rows, fh, indent=2)
    return ff


@plugin.register_transformer
def _4(data: AblationTableDirFmt) -> pd.DataFrame:
    with open(os.path.join(str(data), "ablation.json")) as fh:
        rows = json.load(fh)
    table = pd.DataFrame(rows, columns=list(ABLATION_COLUMNS))
    table["PSNR"] = [math.inf if v == "inf" else v for v in table["PSNR"]]
    return table
