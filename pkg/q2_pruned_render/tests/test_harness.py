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
import tempfile
from unittest.mock import patch

import numpy as np
import pandas as pd

from q2_pruned_render import ero
from q2_pruned_render._config import ConfigError
from q2_pruned_render.harness import (
    TABLE_COLUMNS,
    VOLUME_COLUMNS,
    AcceptanceThresholds,
    RunConfig,
    SequenceReport,
    ablation_frame,
    check_acceptance,
    config_label,
    emit_table,
    run_ablation,
    run_sequence,
    run_sweep,
    run_volume_sweep,
)
from q2_pruned_render.tests.test_pruned_render import PrunedRenderTestsBase

FAST = {"eio.n_s_full": "16", "eio.n_s_reduced": "8"}


def fake_report(label, psnr=45.0, coverage_errors=0, ratio=0.1):
    frames = pd.DataFrame(
        {
            "frame": [1, 2],
            "sampling_ratio": [ratio, ratio],
            "sampling_volume": [0.05, 0.05],
            "psnr": [psnr, psnr + 1.0],
            "coverage_errors": [coverage_errors, 0],
            "candidate_violations": [0, 0],
            "points_sampled": [100, 100],
        }
    )
    timing = pd.DataFrame(
        {
            "frame": [1, 2],
            "seconds": [0.5, 0.5],
            "oracle_seconds": [2.0, 2.0],
            "speedup": [4.0, 4.0],
        }
    )
    return SequenceReport(label, True, True, 28, frames, timing)


class TestLabels(PrunedRenderTestsBase):
    def test_known_labels(self):
        self.assertEqual(config_label(False, False, 96), "F")
        self.assertEqual(config_label(True, False, 96), "G")
        self.assertEqual(config_label(False, True, 48), "H")
        self.assertEqual(config_label(True, True, 48), "I")
        self.assertEqual(config_label(True, True, 28), "J")

    def test_other_combinations(self):
        self.assertEqual(config_label(True, False, 50), "X(ero=on,eio=off,ns=50)")


class TestRunConfig(PrunedRenderTestsBase):
    def setUp(self):
        super().setUp()
        self.path = self.get_data_path("config/small.cfg")

    def test_from_file(self):
        cfg = RunConfig.from_file(self.path)
        self.assertEqual((cfg.camera.width, cfg.camera.height), (64, 64))
        self.assertEqual(cfg.frames, 3)
        self.assertEqual(cfg.ero.mode, "binary")
        self.assertEqual(cfg.render.seed, 7)
        self.assertEqual(cfg.label, "J")
        self.assertEqual(cfg.oracle_n_s, 96)

    def test_overrides(self):
        cfg = RunConfig.from_file(self.path, {"run.seed": "11", "run.out": None})
        self.assertEqual(cfg.render.seed, 11)
        self.assertEqual(cfg.out, "pruned-render-out")

    def test_for_label(self):
        cfg = RunConfig.from_file(self.path)
        f = cfg.for_label("F")
        self.assertEqual((f.ero_enabled, f.eio_enabled, f.n_s), (False, False, 96))
        h = cfg.for_label("H")
        self.assertEqual((h.ero_enabled, h.eio_enabled, h.n_s), (False, True, 48))
        self.assertEqual(h.label, "H")

    def test_unknown_label(self):
        with self.assertRaises(ConfigError) as cm:
            RunConfig.from_file(self.path).for_label("K")
        self.assertEqual(cm.exception.keys, ("run.sweep",))

    def test_invalid_value(self):
        with self.assertRaisesRegex(ConfigError, "k1 must be a positive odd"):
            RunConfig.from_file(self.path, {"ero.k1": "40"})

    def test_protrusion_preset(self):
        cfg = RunConfig.defaults({"scene.preset": "protrusion"})
        self.assertEqual(cfg.frames, 1)
        self.assertIsNotNone(cfg.scene.cloth.lobe)

    def test_body_outside_depth_range(self):
        with self.assertRaisesRegex(ConfigError, "strictly inside") as cm:
            RunConfig.from_file(
                self.path, {"camera.t_far": "4.0", "ero.enabled": "false"}
            )
        self.assertIn("camera.t_far", cm.exception.keys)

    def test_repeated_sweep_label(self):
        with self.assertRaisesRegex(ConfigError, "repeated: F") as cm:
            RunConfig.from_file(self.path, {"run.sweep": "F,F"})
        self.assertEqual(cm.exception.keys, ("run.sweep",))

    def test_kernel_larger_than_image(self):
        with self.assertRaisesRegex(ConfigError, "kernel size 41 exceeds 33") as cm:
            RunConfig.from_file(
                self.path, {"camera.width": "16", "camera.height": "16"}
            )
        self.assertEqual(cm.exception.keys, ("ero.k1",))

    def test_patches_must_divide_image(self):
        with self.assertRaisesRegex(ConfigError, "eio.pad = true") as cm:
            RunConfig.from_file(self.path, {"eio.n_patch": "3"})
        self.assertEqual(cm.exception.keys, ("eio.n_patch",))
        cfg = RunConfig.from_file(self.path, {"eio.n_patch": "3", "eio.pad": "true"})
        self.assertEqual(cfg.eio.n_patch, 3)

    def test_modes(self):
        cfg = RunConfig.from_file(self.path, {"run.modes": "average, binary"})
        self.assertEqual(cfg.modes, ("average", "binary"))
        self.assertEqual(cfg.mode, "binary")
        self.assertEqual(cfg.key, "J/binary")
        self.assertEqual(cfg.with_mode("average").key, "J/average")
        self.assertIsNone(cfg.for_label("F").mode)
        self.assertEqual(cfg.for_label("F").key, "F")

    def test_unknown_mode(self):
        with self.assertRaises(ConfigError) as cm:
            RunConfig.from_file(self.path, {"run.modes": "average,median"})
        self.assertEqual(cm.exception.keys, ("run.modes",))


class TestRunSequence(PrunedRenderTestsBase):
    def setUp(self):
        super().setUp()
        self.path = self.get_data_path("config/small.cfg")

    def test_dense_run_matches_reference(self):
        cfg = RunConfig.from_file(
            self.path,
            {
                "ero.enabled": "false",
                "eio.enabled": "false",
                "eio.n_s_full": "16",
                "eio.n_s_reduced": "8",
            },
        )
        report = run_sequence(cfg)
        aggregate = report.aggregate
        self.assertEqual(aggregate["frames"], 3)
        self.assertEqual(aggregate["psnr"], "inf")
        self.assertEqual(aggregate["coverage_errors"], 0)
        self.assertEqual(aggregate["sampling_ratio"], 1.0)
        self.assertEqual(aggregate["sampling_volume"], 1.0)
        self.assertEqual(aggregate["points_sampled"], 3 * 64 * 64 * 16)

    def test_single_frame_uses_training_candidates(self):
        cfg = RunConfig.from_file(
            self.path, dict(FAST, **{"motion.frames": "1"})
        )
        with patch(
            "q2_pruned_render.ero.candidate_infer", wraps=ero.candidate_infer
        ) as infer:
            run_sequence(cfg)
        infer.assert_not_called()

    def test_later_frames_use_previous_weights(self):
        cfg = RunConfig.from_file(self.path, FAST)
        with patch(
            "q2_pruned_render.ero.candidate_infer", wraps=ero.candidate_infer
        ) as infer:
            report = run_sequence(cfg)
        self.assertEqual(infer.call_count, 2)
        self.assertEqual(report.aggregate["candidate_violations"], 0)

    def test_shared_reference_cache(self):
        cfg = RunConfig.from_file(self.path, FAST)
        cache = {}
        run_sequence(cfg, cache)
        self.assertEqual(sorted(cache), [1, 2, 3])
        with patch("q2_pruned_render.harness.render_oracle") as oracle:
            run_sequence(cfg, cache)
        oracle.assert_not_called()

    def test_frame_outputs(self):
        cfg = RunConfig.from_file(self.path, FAST)
        with tempfile.TemporaryDirectory() as tmpdir:
            run_sequence(cfg, out_dir=tmpdir)
            names = sorted(os.listdir(tmpdir))
            with open(os.path.join(tmpdir, "frame_0002.json")) as fh:
                frame = json.load(fh)
            with open(os.path.join(tmpdir, "frame_0001.rays.pgm"), "rb") as fh:
                rays_header = fh.read(13)
        self.assertEqual(len(names), 15)
        self.assertIn("frame_0002.silhouette.pgm", names)
        self.assertEqual(rays_header, b"P5\n64 64\n255\n")
        self.assertIn("frame_0003.ppm", names)
        self.assertIn("frame_0001.weight.epsm", names)
        self.assertEqual(frame["frame"], 2)
        self.assertEqual(frame["label"], cfg.label)
        self.assertEqual(frame["mode"], "binary")
        self.assertIn("seconds", frame["timing"])

    def test_logs_each_frame(self):
        cfg = RunConfig.from_file(self.path, FAST)
        with self.assertLogs("q2_pruned_render.harness", level="INFO") as logs:
            run_sequence(cfg)
        self.assertEqual(len(logs.records), 3)


class TestSweep(PrunedRenderTestsBase):
    def test_writes_reports(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            cfg = RunConfig.from_file(
                self.get_data_path("config/small.cfg"), {"run.out": tmpdir}
            )
            reports = run_sweep(cfg, ["F", "J"])
            with open(os.path.join(tmpdir, "report.json")) as fh:
                written = json.load(fh)
            with open(os.path.join(tmpdir, "table.txt")) as fh:
                table = fh.read()
            self.assertTrue(os.path.isdir(os.path.join(tmpdir, "J_binary")))

        self.assertEqual([r.label for r in reports], ["F", "J"])
        self.assertEqual([r["label"] for r in written["runs"]], ["F", "J"])
        self.assertEqual(sorted(written["timing"]), ["F", "J/binary"])
        self.assertEqual([r["mode"] for r in written["runs"]], [None, "binary"])
        self.assertEqual(written["runs"][0]["aggregate"]["psnr"], "inf")
        self.assertLess(
            reports[1].aggregate["sampling_ratio"],
            reports[0].aggregate["sampling_ratio"],
        )
        self.assertTrue(table.lstrip().startswith("label"))

    def test_one_run_per_mode(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            cfg = RunConfig.from_file(
                self.get_data_path("config/small.cfg"),
                dict(FAST, **{"run.out": tmpdir, "motion.frames": "2"}),
            )
            reports = run_sweep(cfg, ["F", "J"], modes=["average", "binary"])
            dirs = sorted(
                name
                for name in os.listdir(tmpdir)
                if os.path.isdir(os.path.join(tmpdir, name))
            )
            with open(os.path.join(tmpdir, "table.txt")) as fh:
                header = fh.readline().split()

        self.assertEqual([r.key for r in reports], ["F", "J/average", "J/binary"])
        self.assertEqual(dirs, ["F", "J_average", "J_binary"])
        self.assertIn("mode", header)
        table = ablation_frame(reports)
        self.assertEqual(table["mode"].tolist(), ["-", "average", "binary"])

    def test_configured_modes(self):
        cfg = RunConfig.from_file(
            self.get_data_path("config/small.cfg"),
            dict(FAST, **{"run.modes": "average,binary", "motion.frames": "1"}),
        )
        reports = run_sweep(cfg, ["G"], write=False)
        self.assertEqual([r.key for r in reports], ["G/average", "G/binary"])

    def test_repeated_mode(self):
        cfg = RunConfig.from_file(self.get_data_path("config/small.cfg"), FAST)
        with patch("q2_pruned_render.harness.run_sequence") as run:
            with self.assertRaises(ConfigError) as cm:
                run_sweep(cfg, ["J"], write=False, modes=["binary", "binary"])
        self.assertEqual(cm.exception.keys, ("run.modes",))
        run.assert_not_called()

    def test_repeated_label(self):
        cfg = RunConfig.from_file(self.get_data_path("config/small.cfg"), FAST)
        with patch("q2_pruned_render.harness.run_sequence") as run:
            with self.assertRaisesRegex(ConfigError, "repeated: F"):
                run_sweep(cfg, ["F", "F"], write=False)
        run.assert_not_called()

    def test_unwritable_output(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            blocker = os.path.join(tmpdir, "file")
            with open(blocker, "w") as fh:
                fh.write("x")
            cfg = RunConfig.from_file(
                self.get_data_path("config/small.cfg"),
                {"run.out": os.path.join(blocker, "out")},
            )
            with self.assertRaises(ConfigError) as cm:
                run_sweep(cfg, ["J"])
        self.assertEqual(cm.exception.keys, ("run.out",))

class TestVolumeSweep(PrunedRenderTestsBase):
    def setUp(self):
        super().setUp()
        self.path = self.get_data_path("config/small.cfg")

    def test_strategies(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            cfg = RunConfig.from_file(self.path, {"run.out": tmpdir})
            table = run_volume_sweep(cfg)
            with open(os.path.join(tmpdir, "volumes.json")) as fh:
                written = json.load(fh)
            with open(os.path.join(tmpdir, "volumes.txt")) as fh:
                header = fh.readline().split()

        self.assertEqual(list(table.columns), VOLUME_COLUMNS)
        self.assertEqual(len(table), 8)
        self.assertEqual(len(written), 8)
        self.assertEqual(header[0], "intervals")
        self.assertEqual(
            table["intervals"].tolist(), ["full", "offset"] + ["patch"] * 6
        )
        self.assertEqual(table["n_patch"].tolist()[2:], [1, 1, 2, 2, 4, 4])
        self.assertEqual(table["shift"].tolist()[2:], ["no", "yes"] * 3)
        self.assertEqual(table.loc[0, "coverage errors"], 0)
        volumes = table["sampling volume %"]
        self.assertTrue(((volumes > 0) & (volumes <= 100)).all())
        self.assertEqual(volumes.max(), volumes[0])
        self.assertLess(volumes[1], volumes[0])
        # rays beside the silhouette sample only [t_far - tau, t_far]
        self.assertGreaterEqual(table.loc[1, "coverage errors"], 1)

    def test_full_rays_without_omission(self):
        cfg = RunConfig.from_file(
            self.path, dict(FAST, **{"ero.enabled": "false", "volumes.n_patch": "2"})
        )
        table = run_volume_sweep(cfg, write=False)
        self.assertEqual(len(table), 4)
        self.assertEqual(table.loc[0, "sampling volume %"], 100.0)

    def test_patches_must_divide_image(self):
        cfg = RunConfig.from_file(self.path, {"volumes.n_patch": "1,3"})
        with patch("q2_pruned_render.harness.render_oracle") as oracle:
            with self.assertRaisesRegex(ConfigError, "count\\(s\\) 3") as cm:
                run_volume_sweep(cfg, write=False)
        self.assertEqual(cm.exception.keys, ("volumes.n_patch",))
        oracle.assert_not_called()



class TestTable(PrunedRenderTestsBase):
    def test_single_run(self):
        text, rows = emit_table([fake_report("J")])
        self.assertEqual(len(text.splitlines()), 2)
        parsed = json.loads(rows)
        self.assertEqual(len(parsed), 1)
        self.assertEqual(parsed[0]["label"], "J")
        self.assertEqual(parsed[0]["speedup"], 4.0)
        self.assertEqual(parsed[0]["sampling ratio %"], 10.0)

    def test_empty(self):
        text, rows = emit_table([])
        self.assertEqual(text, "  ".join(TABLE_COLUMNS))
        self.assertEqual(json.loads(rows), [])

    def test_duplicate_label(self):
        with self.assertRaisesRegex(ValueError, "repeated: J"):
            emit_table([fake_report("J"), fake_report("J")])


class TestAcceptance(PrunedRenderTestsBase):
    def test_passing(self):
        self.assertEqual(
            check_acceptance([fake_report("J")], AcceptanceThresholds()), []
        )

    def test_every_breach_is_reported(self):
        failures = check_acceptance(
            [fake_report("J", psnr=35.0, coverage_errors=2, ratio=0.2)],
            AcceptanceThresholds(max_sampling_ratio=0.15),
        )
        self.assertEqual(len(failures), 3)
        self.assertIn("PSNR 35.00 dB", failures[0])
        self.assertIn("2 coverage errors", failures[1])
        self.assertIn("sampling ratio 0.2000", failures[2])

    def test_infinite_psnr_passes(self):
        self.assertEqual(
            check_acceptance(
                [fake_report("F", psnr=math.inf)], AcceptanceThresholds()
            ),
            [],
        )


class TestRunAblationAction(PrunedRenderTestsBase):
    def test_returns_table(self):
        table = run_ablation(self.get_data_path("config/small.cfg"), sweep="F")
        self.assertEqual(list(table.columns), TABLE_COLUMNS)
        self.assertEqual(table["label"].tolist(), ["F"])
        self.assertEqual(table.loc[0, "PSNR"], np.inf)
        self.assertEqual(table.loc[0, "coverage errors"], 0)
        self.assertEqual(table.loc[0, "mode"], "-")

    def test_modes(self):
        table = run_ablation(
            self.get_data_path("config/small.cfg"), sweep="G", modes="average,binary"
        )
        self.assertEqual(table["label"].tolist(), ["G", "G"])
        self.assertEqual(table["mode"].tolist(), ["average", "binary"])
