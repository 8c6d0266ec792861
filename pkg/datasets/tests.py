import json
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import CommandError, call_command
from django.test import SimpleTestCase, tag

from feedpuf.exceptions import ConfigurationError, InfeasibleError, UsageError
from feedpuf.files import sidecar_path
from pufs.bits import bits_to_string
from pufs.cyclic import CyclicPuf
from pufs.models import Fault, FaultKind, FaultSite, FaultSpec, FeedbackConfig, PufCategory, Tap, VariationModel
from pufs.simulation import evaluate, sample_instance

from .generation import dedupe_rows, generate_acyclic, generate_cyclic, replay_dataset, split_80_20
from .models import CrpDataset, challenge_groups
from .storage import dataset_format, read_dataset, render_dataset, write_dataset

VM = VariationModel()


def toy_dataset(num_challenges, cycles):
    challenges = np.array(
        [[(value >> bit) & 1 for bit in range(8)] for value in range(num_challenges)], dtype=np.uint8
    )
    rows = num_challenges * cycles
    return CrpDataset(
        instance_id="toy",
        challenges=np.repeat(challenges, cycles, axis=0),
        responses=np.zeros((rows, 1), dtype=np.uint8),
        cycle_index=np.tile(np.arange(1, cycles + 1), num_challenges),
        faulty=False,
    )


class GenerationTests(SimpleTestCase):
    def setUp(self):
        self.inst = sample_instance(PufCategory.ARBITER, 16, 1, VM, 1, 2)
        self.fb = FeedbackConfig((Tap(0, 3, 0), Tap(0, 5, 9), Tap(0, 1, 12), Tap(0, 8, 15)))

    def test_exhaustive_acyclic(self):
        inst = sample_instance(PufCategory.BUTTERFLY, 2, 1, VM, 0, 0)
        ds = generate_acyclic(inst, 4, challenge_seed=3)
        self.assertEqual(sorted(bits_to_string(ch) for ch in ds.challenges), ["00", "01", "10", "11"])
        self.assertTrue((ds.cycle_index == 1).all())
        self.assertFalse(ds.faulty)
        np.testing.assert_array_equal(ds.responses, evaluate(inst, ds.challenges))

    def test_infeasible_request(self):
        with self.assertRaises(InfeasibleError):
            generate_acyclic(sample_instance(PufCategory.ARBITER, 3, 1, VM, 0, 0), 9, challenge_seed=0)

    def test_same_seed_same_rows(self):
        a = generate_cyclic(self.inst, 50, 8, challenge_seed=4, fb=self.fb)
        b = generate_cyclic(self.inst, 50, 8, challenge_seed=4, fb=self.fb)
        self.assertEqual(render_dataset(a, "csv"), render_dataset(b, "csv"))

    def test_cyclic_row_layout(self):
        ds = generate_cyclic(self.inst, 30, 8, challenge_seed=1, fb=self.fb)
        self.assertEqual(len(ds), 30 * 8)
        self.assertEqual(ds.cycle_index[:9].tolist(), [1, 2, 3, 4, 5, 6, 7, 8, 1])
        self.assertEqual(ds.num_challenges(), 30)
        self.assertEqual(ds.meta["form"], "cyclic")
        self.assertEqual(ds.meta["taps"], [[0, 3, 0], [0, 5, 9], [0, 1, 12], [0, 8, 15]])

    def test_empty_feedback_collapses_to_acyclic(self):
        cyclic = generate_cyclic(self.inst, 40, 6, challenge_seed=2)
        acyclic = generate_acyclic(self.inst, 40, challenge_seed=2)
        for cycle in range(6):
            np.testing.assert_array_equal(cyclic.responses[cycle::6], acyclic.responses)
        self.assertEqual(cyclic.crp_equivalents(), 40)

    def test_binary_challenge_gives_identical_rows(self):
        ds = generate_cyclic(self.inst, 200, 64, challenge_seed=5, fb=self.fb)
        blocks = ds.responses.reshape(200, 64)
        binary = [block for block in blocks if (block == block[0]).all()]
        self.assertTrue(binary)
        self.assertGreaterEqual(ds.crp_equivalents(), 200)

    def test_dedupe(self):
        ds = generate_cyclic(self.inst, 100, 8, challenge_seed=1, fb=self.fb, dedupe=True)
        full = generate_cyclic(self.inst, 100, 8, challenge_seed=1, fb=self.fb)
        self.assertEqual(len(ds), full.crp_equivalents())
        self.assertEqual(len(dedupe_rows(ds)), len(ds))
        self.assertTrue(ds.meta["dedupe"])

    def test_faulty_rows_are_flagged(self):
        spec = FaultSpec((Fault(FaultSite("response_bit", 0), FaultKind.STUCK_AT_1),))
        ds = generate_cyclic(CyclicPuf(self.inst, self.fb, spec), 20, 4, challenge_seed=0)
        self.assertTrue(ds.faulty)
        self.assertTrue(ds.responses.all())
        self.assertEqual(ds.meta["form"], "faulty_cyclic")
        self.assertEqual(ds.meta["faults"], [{"site": "response_bit", "index": 0, "kind": "stuck_at_1"}])

    def test_unbiased_arbiters_are_balanced(self):
        ones = [
            generate_acyclic(sample_instance(PufCategory.ARBITER, 64, 1, VM, 9, seed), 1000, challenge_seed=seed)
            .responses.mean()
            for seed in range(10)
        ]
        self.assertGreaterEqual(np.mean(ones), 0.45)
        self.assertLessEqual(np.mean(ones), 0.55)


class SplitTests(SimpleTestCase):
    def test_acyclic_split_is_exactly_80_20(self):
        ds = split_80_20(toy_dataset(200, 1), seed=3)
        self.assertEqual((len(ds.train_idx), len(ds.test_idx)), (160, 40))

    def test_groups_never_straddle(self):
        ds = split_80_20(toy_dataset(10, 2), seed=1)
        self.assertEqual((len(ds.train_idx), len(ds.test_idx)), (16, 4))
        group, _ = challenge_groups(ds.challenges)
        self.assertFalse(set(group[ds.train_idx]) & set(group[ds.test_idx]))
        self.assertEqual(sorted(np.concatenate([ds.train_idx, ds.test_idx]).tolist()), list(range(20)))

    def test_few_large_groups_stay_whole(self):
        ds = split_80_20(toy_dataset(2, 5), seed=0)
        self.assertEqual((len(ds.train_idx), len(ds.test_idx)), (5, 5))
        self.assertEqual(len({row.tobytes() for row in ds.challenges[ds.test_idx]}), 1)

    def test_deterministic_under_seed(self):
        a = split_80_20(toy_dataset(50, 3), seed=7)
        b = split_80_20(toy_dataset(50, 3), seed=7)
        np.testing.assert_array_equal(a.test_idx, b.test_idx)
        self.assertEqual(a.meta["split_seed"], 7)

    def test_too_few_rows(self):
        with self.assertRaises(UsageError):
            split_80_20(toy_dataset(4, 1), seed=0)
        with self.assertRaises(UsageError):
            split_80_20(toy_dataset(1, 8), seed=0)

    @tag("slow")
    def test_half_million_row_split(self):
        inst = sample_instance(PufCategory.ARBITER, 64, 1, VM, 0, 0)
        ds = split_80_20(generate_acyclic(inst, 500_000, challenge_seed=0), seed=0)
        self.assertEqual((len(ds.train_idx), len(ds.test_idx)), (400_000, 100_000))


class StorageTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        inst = sample_instance(PufCategory.RING_OSCILLATOR, 12, 2, VM, 3, 3)
        self.ds = split_80_20(
            generate_cyclic(inst, 40, 5, challenge_seed=2, fb=FeedbackConfig((Tap(1, 0, 4),))), seed=2
        )

    def path(self, name):
        return Path(self.tmp.name) / name

    def test_format_from_suffix(self):
        self.assertEqual(dataset_format("a.csv"), ("csv", False))
        self.assertEqual(dataset_format("a.jsonl.gz"), ("jsonl", True))
        with self.assertRaises(ConfigurationError):
            dataset_format("a.parquet")

    def test_csv_layout(self):
        path = self.path("rows.csv")
        write_dataset(self.ds, path)
        lines = path.read_text().splitlines()
        self.assertEqual(lines[0], "instance_id,challenge,response,cycle_index,faulty")
        instance_id, challenge, response, cycle, faulty = lines[1].split(",")
        self.assertEqual(instance_id, self.ds.instance_id)
        self.assertEqual(len(challenge), 12)
        self.assertEqual(len(response), 2)
        self.assertEqual(cycle, "1")
        self.assertEqual(faulty, "False")

    def test_round_trip_is_byte_identical(self):
        for name in ("rows.csv", "rows.jsonl", "rows.csv.gz", "rows.jsonl.gz"):
            first, second = self.path(name), self.path("again-" + name)
            write_dataset(self.ds, first)
            loaded = read_dataset(first)
            write_dataset(loaded, second)
            self.assertEqual(first.read_bytes(), second.read_bytes(), name)
            self.assertEqual(sidecar_path(first).read_bytes(), sidecar_path(second).read_bytes(), name)
            np.testing.assert_array_equal(loaded.test_idx, self.ds.test_idx)

    def test_leading_zeros_survive(self):
        path = self.path("rows.csv")
        write_dataset(self.ds, path)
        np.testing.assert_array_equal(read_dataset(path).challenges, self.ds.challenges)

    def test_metadata_replays_the_rows(self):
        path = self.path("rows.jsonl")
        write_dataset(self.ds, path)
        meta = json.loads(sidecar_path(path).read_text())["meta"]
        replayed = replay_dataset(meta)
        self.assertEqual(render_dataset(replayed, "jsonl"), render_dataset(self.ds, "jsonl"))
        np.testing.assert_array_equal(replayed.train_idx, self.ds.train_idx)

    def test_row_count_mismatch(self):
        path = self.path("rows.csv")
        write_dataset(self.ds, path)
        path.write_text("\n".join(path.read_text().splitlines()[:-1]) + "\n")
        with self.assertRaises(UsageError):
            read_dataset(path)


class DatasetCommandTests(SimpleTestCase):
    def run_command(self, **kwargs):
        out = StringIO()
        call_command("dataset", stdout=out, **kwargs)
        return out.getvalue()

    def test_cyclic_dataset_and_replay(self):
        with tempfile.TemporaryDirectory() as tmp:
            first = Path(tmp) / "cyc.csv.gz"
            out = self.run_command(
                category="apuf", nc=16, n=1, lot_seed=1, instance_seed=1, form="cyclic", taps="random:4:1",
                challenges=60, cycles=6, split_seed=5, output=str(first),
            )
            self.assertIn("crp-equivalents", out)
            second = Path(tmp) / "again.csv.gz"
            self.run_command(replay=str(sidecar_path(first)), output=str(second))
            self.assertEqual(first.read_bytes(), second.read_bytes())
            self.assertEqual(sidecar_path(first).read_bytes(), sidecar_path(second).read_bytes())

    def test_acyclic_rejects_taps(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(CommandError) as ctx:
                self.run_command(category="apuf", nc=8, taps="0:0:1", output=str(Path(tmp) / "x.csv"))
            self.assertEqual(ctx.exception.returncode, 2)

    def test_infeasible_config_exits_3(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(CommandError) as ctx:
                self.run_command(category="apuf", nc=3, challenges=9, output=str(Path(tmp) / "x.csv"))
            self.assertEqual(ctx.exception.returncode, 3)
