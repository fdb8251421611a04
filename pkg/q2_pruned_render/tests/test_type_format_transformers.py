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

import numpy as np
import pandas as pd
from qiime2.plugin import ValidationError

from q2_pruned_render.maps import ScalarMap
from q2_pruned_render.types._format import (
    ABLATION_COLUMNS,
    AblationTableDirFmt,
    AblationTableFormat,
    EpsmDirFmt,
    EpsmFormat,
)

from .test_pruned_render import PrunedRenderTestsBase


class TestEpsm(PrunedRenderTestsBase):
    def test_EpsmFormat_validate(self):
        filepath = self.get_data_path("type/epsm/map.epsm")
        format = EpsmFormat(filepath, mode="r")
        format.validate()

    def test_EpsmFormat_validate_bad_magic(self):
        filepath = self.get_data_path("type/epsm_bad/map.epsm")
        format = EpsmFormat(filepath, mode="r")
        with self.assertRaisesRegex(ValidationError, "Bad EPSM magic"):
            format.validate()

    def test_EpsmDirFmt_to_ScalarMap_transformer(self):
        transformer = self.get_transformer(EpsmDirFmt, ScalarMap)
        fmt = EpsmDirFmt(self.get_data_path("type/epsm/"), "r")
        obs = transformer(fmt)
        self.assertEqual(obs, ScalarMap.full(2, 2, 1.0))

    def test_ScalarMap_to_EpsmDirFmt_transformer(self):
        transformer = self.get_transformer(ScalarMap, EpsmDirFmt)
        data = ScalarMap([[0.0, 0.25, 0.5], [0.75, 1.0, 4.5]])
        fmt = transformer(data)
        self.assertIsInstance(fmt, EpsmDirFmt)
        fmt.validate()
        back = self.get_transformer(EpsmDirFmt, ScalarMap)(fmt)
        self.assertEqual(back, data)


class TestAblationTable(PrunedRenderTestsBase):
    def test_AblationTableFormat_validate(self):
        filepath = self.get_data_path("type/ablation/ablation.json")
        format = AblationTableFormat(filepath, mode="r")
        format.validate()

    def test_AblationTableFormat_validate_missing_columns(self):
        filepath = self.get_data_path("type/ablation_bad/ablation.json")
        format = AblationTableFormat(filepath, mode="r")
        with self.assertRaisesRegex(ValidationError, "missing column"):
            format.validate()

    def test_AblationTableDirFmt_to_df_transformer(self):
        transformer = self.get_transformer(AblationTableDirFmt, pd.DataFrame)
        fmt = AblationTableDirFmt(self.get_data_path("type/ablation/"), "r")
        table = transformer(fmt)
        self.assertEqual(list(table.columns), list(ABLATION_COLUMNS))
        self.assertEqual(table["label"].tolist(), ["F", "J"])
        self.assertEqual(table["mode"].tolist(), ["-", "binary"])
        self.assertTrue(math.isinf(table.loc[0, "PSNR"]))
        self.assertAlmostEqual(table.loc[1, "PSNR"], 44.1)

    def test_df_to_AblationTableDirFmt_transformer(self):
        transformer = self.get_transformer(pd.DataFrame, AblationTableDirFmt)
        table = pd.DataFrame(
            [
                ["F", "no", "no", "-", 96, 100.0, np.inf, 0, 1.2, 1.0],
                ["J", "yes", "yes", "binary", 28, 7.5, 43.2, 0, 0.1, np.nan],
            ],
            columns=list(ABLATION_COLUMNS),
        )
        fmt = transformer(table)
        self.assertIsInstance(fmt, AblationTableDirFmt)
        with open(os.path.join(str(fmt), "ablation.json")) as fh:
            rows = json.load(fh)
        self.assertEqual(rows[0]["PSNR"], "inf")
        self.assertIsNone(rows[1]["speedup"])
        self.assertEqual(rows[1]["n_s"], 28)
        self.assertEqual(rows[1]["mode"], "binary")
