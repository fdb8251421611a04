# ----------------------------------------------------------------------------
# Copyright (c) 2024, q2-pruned-render development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------
import os


class ConfigError(ValueError):
    """Invalid run configuration; ``keys`` names every offending key."""

    def __init__(self, message, keys=()):
        super().__init__(message)
        self.keys = tuple(keys)


def _bool(value):
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {value!r}")


def _optional_float(value):
    if value.strip().lower() in ("", "none", "auto"):
        return None
    return float(value)


def _rgb(value):
    parts = [float(v) for v in value.split(",")]
    if len(parts) != 3 or not all(0.0 <= v <= 1.0 for v in parts):
        raise ValueError(f"expected an r,g,b triple in [0, 1], got {value!r}")
    return tuple(parts)


def _choice(*options):
    def convert(value):
        value = value.strip()
        if value not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {value!r}")
        return value

    return convert


def _labels(value):
    return tuple(v.strip() for v in value.split(",") if v.strip())


def _modes(value):
    modes = _labels(value)
    for mode in modes:
        _choice("average", "binary")(mode)
    return modes


def _positive_ints(value):
    numbers = tuple(int(v) for v in _labels(value))
    if not numbers or min(numbers) < 1:
        raise ValueError(f"expected positive integers, got {value!r}")
    return numbers


def _str(value):
    return value.strip()


# key -> (converter, default)
SCHEMA = {
    "scene.preset": (_choice("default", "protrusion"), "default"),
    "scene.background": (_rgb, (1.0, 1.0, 1.0)),
    "camera.width": (int, 256),
    "camera.height": (int, 256),
    "camera.extent": (float, 2.0),
    "camera.t_near": (float, 2.0),
    "camera.t_far": (float, 10.0),
    "cloth.shell_offset": (float, 0.08),
    "cloth.falloff": (float, 0.03),
    "cloth.sigma_max": (float, 6.0),
    "cloth.albedo": (_rgb, (0.25, 0.35, 0.7)),
    "motion.frames": (int, 30),
    "motion.amplitude": (float, 0.15),
    "motion.period": (float, 30.0),
    "ero.enabled": (_bool, True),
    "ero.tau": (float, 0.9),
    "ero.k1": (int, 41),
    "ero.k2": (int, 21),
    "ero.mode": (_choice("average", "binary"), "average"),
    "eio.enabled": (_bool, True),
    "eio.n_patch": (int, 2),
    "eio.shift": (_bool, True),
    "eio.epsilon": (_optional_float, None),
    "eio.wide_threshold": (_optional_float, None),
    "eio.n_s_reduced": (int, 28),
    "eio.n_s_full": (int, 96),
    "eio.pad": (_bool, False),
    "render.n_threads": (int, 1),
    "render.chunk_size": (int, 4096),
    "render.jitter": (_bool, False),
    "render.deform_work_units": (int, 0),
    "oracle.weight_threshold": (float, 1e-2),
    "oracle.density_threshold": (float, 0.0),
    "check.min_psnr": (float, 40.0),
    "check.max_coverage_errors": (int, 0),
    "check.max_sampling_ratio": (_optional_float, None),
    "run.seed": (int, 0),
    "run.out": (_str, "pruned-render-out"),
    "run.sweep": (_labels, ()),
    "run.modes": (_modes, ()),
    "volumes.n_patch": (_positive_ints, (1, 2, 4)),
}


def parse_config_text(text):
    """Split ``key = value`` lines into a dict of raw strings.

    Blank lines and ``#`` comments are skipped. Malformed lines, repeated
    keys and keys missing from the schema are all reported together.
    """
    raw, problems = {}, []
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            problems.append((f"line {number}", "expected 'key = value'"))
            continue
        if key in raw:
            problems.append((key, f"repeated on line {number}"))
        elif key not in SCHEMA:
            problems.append((key, "unknown key"))
        raw[key] = value.strip()
    _raise_on(problems)
    return raw


def resolve(raw, overrides=None):
    """Convert raw strings with the schema, filling in defaults."""
    values, problems = {}, []
    merged = dict(raw)
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    for key in merged:
        if key not in SCHEMA:
            problems.append((key, "unknown key"))
    for key, (convert, default) in SCHEMA.items():
        if key not in merged:
            values[key] = default
            continue
        value = merged[key]
        if not isinstance(value, str):
            values[key] = value
            continue
        try:
            values[key] = convert(value)
        except ValueError as e:
            problems.append((key, str(e)))
    _raise_on(problems)
    return values


def load_config(path, overrides=None):
    if not os.path.isfile(path):
        raise ConfigError(f"Configuration file {path} does not exist.")
    with open(path) as fh:
        return resolve(parse_config_text(fh.read()), overrides)


def _raise_on(problems):
    if problems:
        details = "; ".join(f"{key}: {why}" for key, why in problems)
        raise ConfigError(
            f"Invalid configuration ({details}).", keys=[k for k, _ in problems]
        )
