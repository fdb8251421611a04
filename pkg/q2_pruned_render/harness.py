# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-pruned-render development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------
import json
import logging
import math
import os
import re
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from q2_pruned_render._config import ConfigError, load_config, resolve
from q2_pruned_render._utils import create_directory, write_epsm, write_pgm, write_ppm
from q2_pruned_render.eio import (
    EioConfig,
    compute_intervals,
    full_intervals,
    offset_intervals,
    sampling_volume_ratio,
)
from q2_pruned_render.ero import (
    BINARY_WEIGHT_THRESHOLD,
    CANDIDATE_MODES,
    EroConfig,
    RaySet,
    build_candidates,
    threshold_rays,
)
from q2_pruned_render.maps import binarize, max_kernel_size, support_violations
from q2_pruned_render.oracle import (
    compare,
    coverage_error_map,
    format_psnr,
    render_oracle,
)
from q2_pruned_render.render import RenderConfig, RenderOutput, render_frame
from q2_pruned_render.scene import (
    SCENE_PRESETS,
    CameraSpec,
    ClothField,
    Scene,
    check_depth_range,
    default_scene,
    rasterize_depth,
    silhouette_from_depth,
)
from q2_pruned_render.types._format import ABLATION_COLUMNS

logger = logging.getLogger(__name__)

# label -> (ERO, EIO, n_s)
ABLATIONS = {
    "F": (False, False, 96),
    "G": (True, False, 96),
    "H": (False, True, 48),
    "I": (True, True, 48),
    "J": (True, True, 28),
}

TABLE_COLUMNS = list(ABLATION_COLUMNS)
VOLUME_COLUMNS = [
    "intervals",
    "n_patch",
    "shift",
    "sampling volume %",
    "coverage errors",
]


class AcceptanceError(Exception):
    pass


def config_label(ero: bool, eio: bool, n_s: int) -> str:
    for label, key in ABLATIONS.items():
        if key == (ero, eio, n_s):
            return label
    return f"X(ero={'on' if ero else 'off'},eio={'on' if eio else 'off'},ns={n_s})"


def check_labels(labels):
    """Reject unknown or repeated sweep labels before anything renders."""
    unknown = [label for label in labels if label not in ABLATIONS]
    if unknown:
        raise ConfigError(
            f"Unknown ablation label(s) {', '.join(map(repr, unknown))}; choose "
            f"from {', '.join(ABLATIONS)}.",
            keys=["run.sweep"],
        )
    repeated = sorted({label for label in labels if labels.count(label) > 1})
    if repeated:
        raise ConfigError(
            f"Each configuration label may appear only once; repeated: "
            f"{', '.join(repeated)}.",
            keys=["run.sweep"],
        )


def _check_geometry(camera, scene, ero, eio):
    problems = []
    try:
        check_depth_range(scene.body, camera)
    except ValueError as e:
        problems.append((("camera.t_near", "camera.t_far"), str(e)))

    limit = max_kernel_size(camera.height, camera.width)
    for key, size in (("ero.k1", ero.k1), ("ero.k2", ero.k2)):
        if size > limit:
            problems.append(
                (
                    (key,),
                    f"kernel size {size} exceeds {limit} for a "
                    f"{camera.height}x{camera.width} image",
                )
            )

    if not eio.pad and (camera.width % eio.n_patch or camera.height % eio.n_patch):
        problems.append(
            (
                ("eio.n_patch",),
                f"a {camera.height}x{camera.width} image does not split into "
                f"{eio.n_patch} x {eio.n_patch} patches; set eio.pad = true",
            )
        )

    if problems:
        details = "; ".join(why for _, why in problems)
        raise ConfigError(
            f"Invalid configuration ({details}).",
            keys=[key for keys, _ in problems for key in keys],
        )


@dataclass(frozen=True)
class AcceptanceThresholds:
    min_psnr: float = 40.0
    max_coverage_errors: int = 0
    max_sampling_ratio: Optional[float] = None


@dataclass(frozen=True)
class RunConfig:
    camera: CameraSpec = field(default_factory=CameraSpec)
    scene: Scene = None
    ero: EroConfig = field(default_factory=EroConfig)
    eio: EioConfig = field(default_factory=EioConfig)
    render: RenderConfig = field(default_factory=RenderConfig)
    ero_enabled: bool = True
    eio_enabled: bool = True
    out: str = "pruned-render-out"
    sweep: Tuple[str, ...] = ()
    weight_threshold: float = 1e-2
    check: AcceptanceThresholds = field(default_factory=AcceptanceThresholds)
    oracle_n_s: int = 96
    modes: Tuple[str, ...] = ()
    volume_patches: Tuple[int, ...] = (1, 2, 4)

    def __post_init__(self):
        if self.scene is None:
            object.__setattr__(self, "scene", default_scene(self.camera))

    @property
    def frames(self) -> int:
        return self.scene.frames.frames

    @property
    def n_s(self) -> int:
        return self.eio.n_s_reduced if self.eio_enabled else self.eio.n_s_full

    @property
    def label(self) -> str:
        return config_label(self.ero_enabled, self.eio_enabled, self.n_s)

    @property
    def mode(self) -> Optional[str]:
        """Candidate mode, or None when rays are not pruned."""
        return self.ero.mode if self.ero_enabled else None

    @property
    def key(self) -> str:
        """Label, qualified by the candidate mode when rays are pruned."""
        return self.label if self.mode is None else f"{self.label}/{self.mode}"

    def with_mode(self, mode: str) -> "RunConfig":
        return replace(self, ero=replace(self.ero, mode=mode))

    def for_label(self, label: str) -> "RunConfig":
        check_labels([label])
        ero, eio, n_s = ABLATIONS[label]
        if eio:
            eio_cfg = replace(self.eio, n_s_reduced=n_s)
        else:
            eio_cfg = replace(self.eio, n_s_full=n_s)
        return replace(self, ero_enabled=ero, eio_enabled=eio, eio=eio_cfg)

    @classmethod
    def from_values(cls, values: Dict) -> "RunConfig":
        """Build a run from resolved configuration values."""
        try:
            width, height = values["camera.width"], values["camera.height"]
            extent = values["camera.extent"]
            camera = CameraSpec(
                width,
                height,
                -extent,
                extent,
                -extent * height / width,
                extent * height / width,
                values["camera.t_near"],
                values["camera.t_far"],
            )
            cloth = ClothField(
                values["cloth.shell_offset"],
                values["cloth.falloff"],
                values["cloth.sigma_max"],
                values["cloth.albedo"],
            )
            preset = values["scene.preset"]
            if preset == "default":
                scene = default_scene(
                    camera,
                    values["motion.frames"],
                    values["motion.amplitude"],
                    values["motion.period"],
                    cloth,
                    values["scene.background"],
                )
            else:
                scene = SCENE_PRESETS[preset](camera, cloth, values["scene.background"])
            ero = EroConfig(
                values["ero.tau"],
                values["ero.k1"],
                values["ero.k2"],
                values["ero.mode"],
            )
            eio = EioConfig(
                values["eio.n_patch"],
                values["eio.shift"],
                values["eio.epsilon"],
                values["eio.wide_threshold"],
                values["eio.n_s_reduced"],
                values["eio.n_s_full"],
                values["eio.pad"],
            )
            render = RenderConfig(
                values["render.n_threads"],
                values["render.chunk_size"],
                values["render.jitter"],
                values["run.seed"],
                values["render.deform_work_units"],
                values["oracle.density_threshold"],
            )
        except ValueError as e:
            raise ConfigError(f"Invalid configuration: {e}") from e
        _check_geometry(camera, scene, ero, eio)
        check_labels(values["run.sweep"])
        return cls(
            camera=camera,
            scene=scene,
            ero=ero,
            eio=eio,
            render=render,
            ero_enabled=values["ero.enabled"],
            eio_enabled=values["eio.enabled"],
            out=values["run.out"],
            sweep=tuple(values["run.sweep"]),
            weight_threshold=values["oracle.weight_threshold"],
            check=AcceptanceThresholds(
                values["check.min_psnr"],
                values["check.max_coverage_errors"],
                values["check.max_sampling_ratio"],
            ),
            oracle_n_s=values["eio.n_s_full"],
            modes=tuple(values["run.modes"]),
            volume_patches=tuple(values["volumes.n_patch"]),
        )

    @classmethod
    def from_file(cls, path, overrides=None) -> "RunConfig":
        return cls.from_values(load_config(path, overrides))

    @classmethod
    def defaults(cls, overrides=None) -> "RunConfig":
        return cls.from_values(resolve({}, overrides))


@dataclass
class SequenceReport:
    label: str
    ero: bool
    eio: bool
    n_s: int
    frames: pd.DataFrame
    timing: pd.DataFrame
    mode: Optional[str] = None

    @property
    def key(self) -> str:
        """Label, qualified by the candidate mode when rays are pruned."""
        return self.label if self.mode is None else f"{self.label}/{self.mode}"

    @property
    def aggregate(self) -> Dict:
        frames = self.frames
        psnr = frames["psnr"].astype(float)
        return {
            "frames": int(len(frames)),
            "sampling_ratio": float(frames["sampling_ratio"].mean()),
            "sampling_volume": float(frames["sampling_volume"].mean()),
            "psnr": format_psnr(float(psnr.mean())),
            "min_psnr": format_psnr(float(psnr.min())),
            "coverage_errors": int(frames["coverage_errors"].sum()),
            "candidate_violations": int(frames["candidate_violations"].sum()),
            "points_sampled": int(frames["points_sampled"].sum()),
        }

    @property
    def seconds_per_frame(self) -> float:
        return float(self.timing["seconds"].mean())

    @property
    def speedup(self) -> float:
        seconds = self.timing["seconds"].sum()
        if seconds <= 0:
            return math.nan
        return float(self.timing["oracle_seconds"].sum() / seconds)

    def to_dict(self) -> Dict:
        frames = self.frames.copy()
        frames["psnr"] = [format_psnr(float(v)) for v in frames["psnr"]]
        return {
            "label": self.label,
            "mode": self.mode,
            "ero": self.ero,
            "eio": self.eio,
            "n_s": self.n_s,
            "aggregate": self.aggregate,
            "frames": frames.to_dict(orient="records"),
        }

    def timing_dict(self) -> Dict:
        return {
            "seconds_per_frame": self.seconds_per_frame,
            "speedup": _finite_or_none(self.speedup),
            "frames": self.timing.to_dict(orient="records"),
        }


def _finite_or_none(value):
    return value if math.isfinite(value) else None


def _slug(label):
    return re.sub(r"[^A-Za-z0-9]+", "_", label).strip("_")


def _frame_prefix(out_dir, frame):
    return os.path.join(out_dir, f"frame_{frame:04d}")


def _prepare_output(path):
    try:
        create_directory(path)
        marker = os.path.join(path, ".write-test")
        with open(marker, "w"):
            pass
        os.remove(marker)
    except OSError as e:
        raise ConfigError(
            f"Output directory {path} is not writable: {e}", keys=["run.out"]
        ) from e




def run_sequence(
    cfg: RunConfig,
    oracle_cache: Optional[Dict[int, RenderOutput]] = None,
    out_dir: Optional[str] = None,
) -> SequenceReport:
    """Render every frame of the scene with pruning and judge it against
    the dense reference.

    The weight map of each rendered frame feeds the candidate map of the
    next one. Reference renders are taken from ``oracle_cache`` when present
    and stored there otherwise.
    """
    oracle_cache = {} if oracle_cache is None else oracle_cache
    key = cfg.key
    if out_dir is not None:
        _prepare_output(out_dir)
    cam, scene = cfg.camera, cfg.scene

    rows, timing = [], []
    prev_weights = None
    for frame in range(1, cfg.frames + 1):
        # rasterize the proxy body
        depth = rasterize_depth(scene, cam, frame)
        silhouette = silhouette_from_depth(depth, cam)

        # empty ray omission
        candidates = None
        if cfg.ero_enabled:
            candidates = build_candidates(frame, silhouette, prev_weights, cfg.ero)
            rays = threshold_rays(candidates, cfg.ero.tau_ero)
        else:
            rays = RaySet.full(cam.height, cam.width)

        # empty interval omission
        if cfg.eio_enabled:
            intervals = compute_intervals(depth, cam, cfg.eio)
        else:
            intervals = full_intervals(cam, cfg.eio.n_s_full)

        # render and score against the dense reference
        output = render_frame(scene, cam, rays, intervals, cfg.render, depth, frame)
        if frame not in oracle_cache:
            oracle_cache[frame] = render_oracle(
                scene, cam, frame, cfg.oracle_n_s, cfg.render, depth
            )
        reference = oracle_cache[frame]
        report = compare(output, reference, rays, intervals, cfg.weight_threshold)

        violations = 0
        if candidates is not None and frame >= 2:
            violations = support_violations(
                binarize(reference.weights, BINARY_WEIGHT_THRESHOLD), candidates
            )
        row = {
            "frame": frame,
            "rays_rendered": output.rays_rendered,
            "points_sampled": output.points_sampled,
            "points_deformed": output.points_deformed,
            "sampling_volume": sampling_volume_ratio(intervals, rays, cam),
            "candidate_violations": violations,
            "deform_checksum": output.checksum,
        }
        row.update(report.to_dict())
        row["psnr"] = report.psnr
        rows.append(row)
        timing.append(
            {
                "frame": frame,
                "seconds": output.seconds,
                "oracle_seconds": reference.seconds,
                "speedup": _finite_or_none(report.speedup),
            }
        )
        logger.info(
            "%s frame %d: %d rays, %d points, ratio %.4f, PSNR %s",
            key,
            frame,
            output.rays_rendered,
            output.points_sampled,
            report.sampling_ratio,
            format_psnr(report.psnr),
        )

        if out_dir is not None:
            prefix = _frame_prefix(out_dir, frame)
            write_ppm(output.image, prefix + ".ppm")
            write_epsm(output.weights, prefix + ".weight.epsm")
            write_pgm(silhouette, prefix + ".silhouette.pgm")
            write_pgm(rays.as_map(), prefix + ".rays.pgm")
            frame_json = {k: v for k, v in row.items()}
            frame_json["psnr"] = format_psnr(report.psnr)
            frame_json["label"] = cfg.label
            frame_json["mode"] = cfg.mode
            frame_json["timing"] = timing[-1]
            with open(prefix + ".json", "w") as fh:
                json.dump(frame_json, fh, indent=2, sort_keys=True)

        # causality: the weights of this frame are read only from the next one
        prev_weights = output.weights

    return SequenceReport(
        cfg.label,
        cfg.ero_enabled,
        cfg.eio_enabled,
        cfg.n_s,
        pd.DataFrame(rows),
        pd.DataFrame(timing),
        cfg.mode,
    )


def expand_runs(cfg: RunConfig, labels=None, modes=None) -> List[RunConfig]:
    """One configuration per label, and per candidate mode where rays are
    pruned.

    Labels without ray omission run once whatever modes are requested.
    """
    labels = list(labels if labels is not None else cfg.sweep)
    check_labels(labels)
    modes = list(modes or cfg.modes or [cfg.ero.mode])
    unknown = [m for m in modes if m not in CANDIDATE_MODES]
    repeated = sorted({m for m in modes if modes.count(m) > 1})
    if unknown or repeated:
        raise ConfigError(
            f"Candidate modes must be distinct values of "
            f"{', '.join(CANDIDATE_MODES)}; got {', '.join(modes)}.",
            keys=["run.modes"],
        )
    bases = [cfg.for_label(label) for label in labels] if labels else [cfg]
    runs = []
    for base in bases:
        if base.ero_enabled:
            runs.extend(base.with_mode(mode) for mode in modes)
        else:
            runs.append(base)
    return runs


def run_sweep(
    cfg: RunConfig, labels=None, write=True, modes=None
) -> List[SequenceReport]:
    """Run every configuration of a sweep, sharing reference renders."""
    runs = expand_runs(cfg, labels, modes)
    if write:
        _prepare_output(cfg.out)
    oracle_cache = {}
    reports = []
    for run in runs:
        out_dir = None
        if write:
            out_dir = os.path.join(cfg.out, _slug(run.key))
        reports.append(run_sequence(run, oracle_cache, out_dir))
    if write:
        write_reports(reports, cfg.out)
    return reports


def emit_table(reports: List[SequenceReport]):
    """Ablation table as (fixed-width text, JSON array of row objects)."""
    keys = [r.key for r in reports]
    duplicated = sorted({key for key in keys if keys.count(key) > 1})
    if duplicated:
        raise ValueError(
            f"Each configuration label may appear only once; repeated: "
            f"{', '.join(duplicated)}."
        )
    table = ablation_frame(reports)
    if table.empty:
        text = "  ".join(TABLE_COLUMNS)
    else:
        text = table.to_string(index=False)
    return text, table.to_json(orient="records")


def ablation_frame(reports: List[SequenceReport]) -> pd.DataFrame:
    rows = []
    for r in reports:
        aggregate = r.aggregate
        rows.append(
            {
                "label": r.label,
                "ERO": "yes" if r.ero else "no",
                "EIO": "yes" if r.eio else "no",
                "mode": r.mode or "-",
                "n_s": r.n_s,
                "sampling ratio %": round(100 * aggregate["sampling_ratio"], 3),
                "PSNR": aggregate["psnr"],
                "coverage errors": aggregate["coverage_errors"],
                "seconds/frame": round(r.seconds_per_frame, 4),
                "speedup": round(r.speedup, 3),
            }
        )
    return pd.DataFrame(rows, columns=TABLE_COLUMNS)


def write_reports(reports: List[SequenceReport], out_dir: str):
    deterministic = {"runs": [r.to_dict() for r in reports]}
    deterministic["timing"] = {r.key: r.timing_dict() for r in reports}
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(deterministic, fh, indent=2, sort_keys=True)
    text, _ = emit_table(reports)
    with open(os.path.join(out_dir, "table.txt"), "w") as fh:
        fh.write(text + "\n")


def check_acceptance(reports: List[SequenceReport], thresholds: AcceptanceThresholds):
    """Every threshold breach across the runs, as readable messages."""
    failures = []
    for r in reports:
        aggregate = r.aggregate
        min_psnr = float(aggregate["min_psnr"])
        if min_psnr < thresholds.min_psnr:
            failures.append(
                f"{r.key}: PSNR {min_psnr:.2f} dB below {thresholds.min_psnr} dB"
            )
        if aggregate["coverage_errors"] > thresholds.max_coverage_errors:
            failures.append(
                f"{r.key}: {aggregate['coverage_errors']} coverage errors "
                f"(allowed {thresholds.max_coverage_errors})"
            )
        ratio = thresholds.max_sampling_ratio
        if ratio is not None and aggregate["sampling_ratio"] > ratio:
            failures.append(
                f"{r.key}: sampling ratio {aggregate['sampling_ratio']:.4f} "
                f"above {ratio}"
            )
    return failures


def run_volume_sweep(cfg: RunConfig, write=True) -> pd.DataFrame:
    """Sampling volume and coverage errors of each interval strategy.

    Scores the first frame. Rays come from the first-frame candidates when
    ray omission is on and cover the whole image otherwise. Besides the patch
    grids of ``cfg.volume_patches``, with and without the shifted windows,
    the table holds the full interval and the per-pixel offset interval
    [D - epsilon, D].
    """
    cam, scene = cfg.camera, cfg.scene
    bad = [n for n in cfg.volume_patches if cam.width % n or cam.height % n]
    if bad and not cfg.eio.pad:
        raise ConfigError(
            f"Patch count(s) {', '.join(map(str, bad))} do not divide a "
            f"{cam.height}x{cam.width} image; set eio.pad = true.",
            keys=["volumes.n_patch"],
        )
    if write:
        _prepare_output(cfg.out)

    depth = rasterize_depth(scene, cam, 1)
    if cfg.ero_enabled:
        silhouette = silhouette_from_depth(depth, cam)
        rays = threshold_rays(
            build_candidates(1, silhouette, None, cfg.ero), cfg.ero.tau_ero
        )
    else:
        rays = RaySet.full(cam.height, cam.width)
    reference = render_oracle(scene, cam, 1, cfg.oracle_n_s, cfg.render, depth)

    # (intervals, n_patch, shift, per-pixel bounds)
    strategies = [
        ("full", "-", "-", full_intervals(cam, cfg.eio.n_s_full)),
        (
            "offset",
            "-",
            "-",
            offset_intervals(depth, cam, cfg.eio.margin(cam), cfg.eio.n_s_reduced),
        ),
    ]
    for n_patch in cfg.volume_patches:
        for shift in (False, True):
            eio = replace(cfg.eio, n_patch=n_patch, shift=shift)
            strategies.append(
                (
                    "patch",
                    n_patch,
                    "yes" if shift else "no",
                    compute_intervals(depth, cam, eio),
                )
            )

    rows = []
    for name, n_patch, shift, intervals in strategies:
        errors = coverage_error_map(reference, rays, intervals, cfg.weight_threshold)
        rows.append(
            {
                "intervals": name,
                "n_patch": n_patch,
                "shift": shift,
                "sampling volume %": round(
                    100 * sampling_volume_ratio(intervals, rays, cam), 3
                ),
                "coverage errors": int(np.count_nonzero(errors)),
            }
        )
        logger.info(
            "%s n_patch=%s shift=%s: volume %.3f%%, %d coverage errors",
            name,
            n_patch,
            shift,
            rows[-1]["sampling volume %"],
            rows[-1]["coverage errors"],
        )
    table = pd.DataFrame(rows, columns=VOLUME_COLUMNS)

    if write:
        with open(os.path.join(cfg.out, "volumes.txt"), "w") as fh:
            fh.write(table.to_string(index=False) + "\n")
        with open(os.path.join(cfg.out, "volumes.json"), "w") as fh:
            fh.write(table.to_json(orient="records"))
    return table


def run_ablation(
    config: str = None,
    sweep: str = "F,G,H,I,J",
    modes: str = "",
    verbose: bool = False,
) -> pd.DataFrame:
    """Run an ablation sweep and return its table.

    Args:
        config (str): Path to a ``key = value`` run configuration. Defaults
            are used when omitted.
        sweep (str): Comma separated configuration labels.
        modes (str): Comma separated candidate modes to run each label with
            ray omission in. The configured mode when empty.
        verbose (bool): Log one line per rendered frame.

    Returns:
        pd.DataFrame: One row per label and candidate mode.
    """
    if verbose:
        logging.getLogger("q2_pruned_render").setLevel(logging.INFO)
    overrides = {"run.sweep": sweep, "run.modes": modes or None}
    values = load_config(config, overrides) if config else resolve({}, overrides)
    cfg = RunConfig.from_values(values)
    reports = run_sweep(cfg, cfg.sweep, write=False)
    table = ablation_frame(reports)
    table["PSNR"] = [np.inf if v == "inf" else v for v in table["PSNR"]]
    return table
