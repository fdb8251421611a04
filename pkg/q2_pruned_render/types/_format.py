# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-pruned-render development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------
import json

from qiime2.plugin import ValidationError, model

from q2_pruned_render._utils import read_epsm

ABLATION_COLUMNS = (
    "label",
    "ERO",
    "EIO",
    "mode",
    "n_s",
    "sampling ratio %",
    "PSNR",
    "coverage errors",
    "seconds/frame",
    "speedup",
)


class EpsmFormat(model.BinaryFileFormat):
    def _validate_(self, level):
        try:
            read_epsm(str(self))
        except ValueError as e:
            raise ValidationError(str(e))


EpsmDirFmt = model.SingleFileDirectoryFormat("EpsmDirFmt", "map.epsm", EpsmFormat)


class AblationTableFormat(model.TextFileFormat):
    def _validate(self, n_records=None):
        with open(str(self), "r") as fh:
            try:
                rows = json.load(fh)
            except json.JSONDecodeError as e:
                raise ValidationError(f"Ablation table is not valid JSON: {e}")
        if not isinstance(rows, list):
            raise ValidationError("Ablation table must be a JSON array of rows.")

        for number, row in enumerate(rows[:n_records], start=1):
            if not isinstance(row, dict):
                raise ValidationError(f"Row {number}: expected an object.")
            missing = [c for c in ABLATION_COLUMNS if c not in row]
            if missing:
                raise ValidationError(
                    f"Row {number}: missing column(s) {', '.join(missing)}."
                )

    def _validate_(self, level):
        self._validate(n_records={"min": 5, "max": None}[level])


AblationTableDirFmt = model.SingleFileDirectoryFormat(
    "AblationTableDirFmt", "ablation.json", AblationTableFormat
)
