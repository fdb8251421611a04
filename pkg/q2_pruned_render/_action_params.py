# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-pruned-render development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

from qiime2.plugin import Bool, Choices, Float, Int, Range, Str

from q2_pruned_render.types._type import AblationTable, PixelMap

OddKernel = Int % Range(1, None)

# candidate-map
candidate_map_inputs = {
    "silhouette": PixelMap,
    "previous_weights": PixelMap,
}
candidate_map_outputs = [("rays", PixelMap)]
candidate_map_inputs_dsc = {
    "silhouette": "Binary silhouette of the body mesh for the current frame.",
    "previous_weights": "Accumulated opacity of the previous rendered frame. "
    "When omitted the candidates come from the silhouette alone, as for the "
    "first frame of a sequence.",
}
candidate_map_outputs_dsc = {
    "rays": "1 for every pixel whose ray is rendered, 0 for pixels that are "
    "filled with the background colour.",
}
candidate_map_params = {
    "tau": Float % Range(0.0, None, inclusive_start=False),
    "k1": OddKernel,
    "k2": OddKernel,
    "mode": Str % Choices(["average", "binary"]),
}
candidate_map_param_dsc = {
    "tau": "Candidate values must be strictly above this threshold.",
    "k1": "Odd kernel size used on the first frame.",
    "k2": "Odd kernel size used when previous weights are given. Must not "
    "exceed k1.",
    "mode": "average: box filter of the summed maps. binary: dilation of the "
    "positive support by (k - 1) / 2 pixels.",
}
candidate_map_dsc = (
    "This method decides which camera rays can carry visible content by "
    "spreading the body silhouette, together with the previous frame's "
    "rendered opacity, over a square neighbourhood and thresholding the result."
)

# sampling-intervals
sampling_intervals_inputs = {"depth": PixelMap}
sampling_intervals_outputs = [
    ("near", PixelMap),
    ("far", PixelMap),
    ("sample_counts", PixelMap),
]
sampling_intervals_inputs_dsc = {
    "depth": "Depth of the first mesh intersection per pixel; pixels without "
    "an intersection hold t_far.",
}
sampling_intervals_outputs_dsc = {
    "near": "Start of the sampling interval per pixel.",
    "far": "End of the sampling interval per pixel.",
    "sample_counts": "Number of samples to take along each ray.",
}
sampling_intervals_params = {
    "t_near": Float % Range(0.0, None),
    "t_far": Float % Range(0.0, None, inclusive_start=False),
    "n_patch": Int % Range(1, None),
    "shift": Bool,
    "epsilon": Float % Range(0.0, None),
    "wide_threshold": Float % Range(0.0, None),
    "n_s_reduced": Int % Range(2, None),
    "n_s_full": Int % Range(2, None),
    "pad": Bool,
}
sampling_intervals_param_dsc = {
    "t_near": "Near plane of the camera.",
    "t_far": "Far plane of the camera; also the depth of pixels with no mesh.",
    "n_patch": "Number of patches along each image side.",
    "shift": "Also use windows shifted by half a patch, so that bodies split "
    "by a patch border are seen as one.",
    "epsilon": "Margin added on both sides of the patch depth range. Defaults "
    "to 5% of the depth range.",
    "wide_threshold": "Intervals wider than this get n_s_full samples. "
    "Defaults to 25% of the depth range.",
    "n_s_reduced": "Samples per ray on narrowed intervals.",
    "n_s_full": "Samples per ray on wide intervals.",
    "pad": "Allow image sides that are not divisible by n_patch; the last "
    "patch in each direction is then smaller.",
}
sampling_intervals_dsc = (
    "This method narrows the sampling interval of every ray to the depth range "
    "of the mesh inside its image patch, widened by a margin for clothing."
)

# run-ablation
run_ablation_outputs = [("table", AblationTable)]
run_ablation_outputs_dsc = {
    "table": "One row per configuration and candidate mode with its sampling "
    "ratio, PSNR against dense sampling, coverage errors and timings.",
}
run_ablation_params = {
    "config": Str,
    "sweep": Str,
    "modes": Str,
    "verbose": Bool,
}
run_ablation_param_dsc = {
    "config": "Path to a key = value run configuration. Built-in defaults are "
    "used when omitted.",
    "sweep": "Comma separated configuration labels out of F, G, H, I and J.",
    "modes": "Comma separated candidate modes (average, binary). Labels with "
    "ray omission run once per mode; the configured mode is used when empty.",
    "verbose": "Log one line per rendered frame.",
}
run_ablation_dsc = (
    "This method renders the synthetic sequence once per configuration, with "
    "and without ray and interval pruning, and compares each frame against "
    "dense sampling of every ray."
)
