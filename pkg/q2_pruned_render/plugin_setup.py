# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-pruned-render development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

import importlib

from qiime2.plugin import Citations, Plugin

import q2_pruned_render
from q2_pruned_render import __version__
from q2_pruned_render._action_params import (
    candidate_map_dsc,
    candidate_map_inputs,
    candidate_map_inputs_dsc,
    candidate_map_outputs,
    candidate_map_outputs_dsc,
    candidate_map_param_dsc,
    candidate_map_params,
    run_ablation_dsc,
    run_ablation_outputs,
    run_ablation_outputs_dsc,
    run_ablation_param_dsc,
    run_ablation_params,
    sampling_intervals_dsc,
    sampling_intervals_inputs,
    sampling_intervals_inputs_dsc,
    sampling_intervals_outputs,
    sampling_intervals_outputs_dsc,
    sampling_intervals_param_dsc,
    sampling_intervals_params,
)
from q2_pruned_render.types._format import (
    AblationTableDirFmt,
    AblationTableFormat,
    EpsmDirFmt,
    EpsmFormat,
)
from q2_pruned_render.types._type import AblationTable, PixelMap

citations = Citations.load("citations.bib", package="q2_pruned_render")

plugin = Plugin(
    name="pruned-render",
    version=__version__,
    website="https://github.com/q2-pruned-render/q2-pruned-render",
    package="q2_pruned_render",
    description="Plugin for volume rendering of clothed bodies with pruning "
    "of empty rays and empty depth intervals.",
    short_description="",
)

plugin.register_formats(
    EpsmFormat,
    EpsmDirFmt,
    AblationTableFormat,
    AblationTableDirFmt,
)
plugin.register_semantic_types(PixelMap, AblationTable)

plugin.register_artifact_class(
    PixelMap,
    directory_format=EpsmDirFmt,
    description=(
        "A dense grid of float32 values, one per image pixel, such as a "
        "silhouette, a depth map, an opacity map or a ray mask."
    ),
)

plugin.register_artifact_class(
    AblationTable,
    directory_format=AblationTableDirFmt,
    description=(
        "Results of rendering one sequence under several pruning "
        "configurations, one row per configuration."
    ),
)

plugin.methods.register_function(
    function=q2_pruned_render.candidate_map,
    inputs=candidate_map_inputs,
    parameters=candidate_map_params,
    outputs=candidate_map_outputs,
    input_descriptions=candidate_map_inputs_dsc,
    parameter_descriptions=candidate_map_param_dsc,
    output_descriptions=candidate_map_outputs_dsc,
    name="Select rays that can show content.",
    description=candidate_map_dsc,
)

plugin.methods.register_function(
    function=q2_pruned_render.sampling_intervals,
    inputs=sampling_intervals_inputs,
    parameters=sampling_intervals_params,
    outputs=sampling_intervals_outputs,
    input_descriptions=sampling_intervals_inputs_dsc,
    parameter_descriptions=sampling_intervals_param_dsc,
    output_descriptions=sampling_intervals_outputs_dsc,
    name="Narrow per-ray sampling intervals.",
    description=sampling_intervals_dsc,
    citations=[citations["mildenhall2020nerf"]],
)

plugin.methods.register_function(
    function=q2_pruned_render.run_ablation,
    inputs={},
    parameters=run_ablation_params,
    outputs=run_ablation_outputs,
    input_descriptions={},
    parameter_descriptions=run_ablation_param_dsc,
    output_descriptions=run_ablation_outputs_dsc,
    name="Run a pruning ablation sweep.",
    description=run_ablation_dsc,
    citations=[citations["mildenhall2020nerf"], citations["liu2021swin"]],
)

importlib.import_module("q2_pruned_render.types._transformer")
