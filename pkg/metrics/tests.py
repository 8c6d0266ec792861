import json
import tempfile
from io import StringIO
from itertools import product
from pathlib import Path

import numpy as np
from django.core.management import CommandError, call_command
from django.test import SimpleTestCase, tag

from feedpuf.exceptions import UsageError
from pufs.challenges import all_challenges
from pufs.cyclic import CyclicPuf, sample_feedback
from pufs.models import EnvCondition, FeedbackConfig, PufCategory, Trajectory, VariationModel

from .functional import (
    abv,
    abv_response,
    hamming_distance,
    hamming_weight,
    pairwise_uniqueness,
    reliability,
    uniformity,
    uniqueness,
)
from .serializers import MetricReportSerializer, Table2ConfigSerializer
from .management.commands.table2 import default_config
from .suite import (
    MetricConfig,
    acyclic_metric_suite,
    cyclic_metric_suite,
    design_lot,
    device_metric_suite,
    lot_instances,
    run_table2_experiment,
    sample_conditions,
)

SWEEP = [
    EnvCondition(1.0, "nominal"),
    EnvCondition(0.97, "cold"),
    EnvCondition(1.03, "hot"),
    EnvCondition(1.05, "low-voltage"),
    EnvCondition(0.95, "high-voltage"),
]


def brute_uniqueness(arr):
    k, m, n = arr.shape
    per_challenge = []
    for ch in range(m):
        total = 0.0
        for i in range(k - 1):
            for j in range(i + 1, k):
                total += sum(int(a) ^ int(b) for a, b in zip(arr[i, ch], arr[j, ch])) / n
        per_challenge.append(2.0 / (k * (k - 1)) * total)
    return 100.0 * sum(per_challenge) / m


def brute_reliability(ref, samples):
    s = len(samples)
    return 100.0 * (1.0 - sum(sum(int(a) ^ int(b) for a, b in zip(ref, r)) / len(ref) for r in samples) / s)


def brute_uniformity(rows):
    return 100.0 * sum(sum(int(bit) for bit in row) / len(row) for row in rows) / len(rows)


class HammingTests(SimpleTestCase):
    def test_distance(self):
        self.assertEqual(hamming_distance("0000", "0000"), 0)
        self.assertEqual(hamming_distance("1010", "0101"), 4)
        self.assertEqual(hamming_distance("1100", "1010"), 2)

    def test_weight(self):
        self.assertEqual(hamming_weight("0000"), 0)
        self.assertEqual(hamming_weight("1111"), 4)
        self.assertEqual(hamming_weight([1, 0, 1, 0]), 2)

    def test_width_mismatch(self):
        with self.assertRaises(UsageError):
            hamming_distance("101", "1010")

    def test_metric_axioms_on_three_bits(self):
        vectors = ["".join(bits) for bits in product("01", repeat=3)]
        for a, b, c in product(vectors, repeat=3):
            self.assertEqual(hamming_distance(a, b), hamming_distance(b, a))
            self.assertLessEqual(hamming_distance(a, c), hamming_distance(a, b) + hamming_distance(b, c))
            self.assertLessEqual(hamming_distance(a, b), 3)
        for a in vectors:
            self.assertEqual(hamming_distance(a, a), 0)


class MetricFormulaTests(SimpleTestCase):
    def test_uniqueness(self):
        self.assertEqual(uniqueness(["00", "11"]), 100.0)
        self.assertEqual(uniqueness(["0110", "0110"]), 0.0)
        self.assertAlmostEqual(uniqueness(["00", "01", "11"]), 200.0 / 3)

    def test_uniqueness_needs_two_instances(self):
        with self.assertRaises(UsageError):
            uniqueness(["0101"])

    def test_pairwise_breakdown(self):
        pairs = pairwise_uniqueness(["00", "01", "11"])
        self.assertEqual([(i, j) for i, j, _ in pairs], [(0, 1), (0, 2), (1, 2)])
        self.assertEqual([value for _, _, value in pairs], [50.0, 100.0, 50.0])

    def test_reliability(self):
        self.assertEqual(reliability("1010", ["1010", "1010", "1010"]), 100.0)
        self.assertEqual(reliability("1010", ["0101"]), 0.0)
        self.assertEqual(reliability("1010", ["1011", "1010"]), 87.5)

    def test_reliability_width_mismatch(self):
        with self.assertRaises(UsageError):
            reliability("1010", ["101"])

    def test_uniformity(self):
        self.assertEqual(uniformity(["0000", "0000"]), 0.0)
        self.assertEqual(uniformity(["1100", "0101", "1010"]), 50.0)
        self.assertEqual(uniformity(["1100", "1110"]), 62.5)

    def test_abv(self):
        trace = Trajectory(np.zeros(2, dtype=np.uint8), np.array([[1], [1], [0], [1]], dtype=np.uint8))
        self.assertEqual(abv(trace).tolist(), [0.75])
        self.assertEqual(abv_response(trace).tolist(), [1])
        tie = np.array([[1], [0], [1], [0]], dtype=np.uint8)
        self.assertEqual(abv_response(tie).tolist(), [1])
        constant = np.tile(np.array([0, 1, 1, 0], dtype=np.uint8), (7, 1))
        self.assertEqual(abv_response(constant).tolist(), [0, 1, 1, 0])

    def test_permutation_invariance(self):
        rng = np.random.default_rng(4)
        arr = rng.integers(0, 2, size=(6, 5, 8), dtype=np.uint8)
        order = rng.permutation(6)
        self.assertEqual(uniqueness(arr), uniqueness(arr[order]))
        rows = arr[0]
        self.assertEqual(uniformity(rows), uniformity(rows[rng.permutation(5)]))

    def test_complement_duality(self):
        rows = np.random.default_rng(5).integers(0, 2, size=(9, 7), dtype=np.uint8)
        self.assertAlmostEqual(uniformity(1 - rows), 100.0 - uniformity(rows))

    def test_against_brute_force(self):
        rng = np.random.default_rng(2024)
        for _ in range(20):
            k, m, n, s = (int(v) for v in rng.integers(2, 7, size=4))
            arr = rng.integers(0, 2, size=(k, m, n), dtype=np.uint8)
            self.assertAlmostEqual(uniqueness(arr), brute_uniqueness(arr), places=9)
            ref = arr[0, 0]
            samples = rng.integers(0, 2, size=(s, n), dtype=np.uint8)
            self.assertAlmostEqual(reliability(ref, samples), brute_reliability(ref, samples), places=9)
            self.assertAlmostEqual(uniformity(arr[0]), brute_uniformity(arr[0]), places=9)


class MetricSuiteTests(SimpleTestCase):
    def setUp(self):
        self.cfg = MetricConfig(k=4, m=16, s=3, c=12)
        self.challenges = all_challenges(4)

    def population(self, category, jitter=0.005, **variation):
        vm = VariationModel(jitter_sigma=jitter, **variation)
        return lot_instances(category, 4, 4, vm, lot_seed=1, k=self.cfg.k)

    def test_config_bounds(self):
        with self.assertRaises(UsageError):
            MetricConfig(k=1)

    def test_condition_samples_cycle_through_the_sweep(self):
        labels = [env.label for env in sample_conditions(SWEEP, 7)]
        self.assertEqual(labels, ["nominal", "cold", "hot", "low-voltage", "high-voltage", "nominal", "cold"])

    def test_empty_feedback_matches_acyclic_suite(self):
        for category in PufCategory:
            instances = self.population(category, jitter=0.0)
            acyclic = acyclic_metric_suite(instances, self.challenges, self.cfg, SWEEP, noise_seed=3)
            cyclic = cyclic_metric_suite(instances, FeedbackConfig.empty(), self.challenges, self.cfg, SWEEP, noise_seed=3)
            a = dict(MetricReportSerializer(acyclic).data)
            c = dict(MetricReportSerializer(cyclic).data)
            self.assertEqual(c.pop("design"), f"Cyc{category.label}")
            a.pop("design")
            self.assertEqual(a, c)

    def test_empty_feedback_keeps_nominal_metrics_under_jitter(self):
        instances = self.population(PufCategory.ARBITER)
        acyclic = acyclic_metric_suite(instances, self.challenges, self.cfg, SWEEP, noise_seed=0)
        cyclic = cyclic_metric_suite(instances, FeedbackConfig.empty(), self.challenges, self.cfg, SWEEP, noise_seed=0)
        self.assertEqual(acyclic.uniqueness_pct, cyclic.uniqueness_pct)
        self.assertEqual(acyclic.uniformity_pct, cyclic.uniformity_pct)

    def test_noiseless_samples_are_fully_reliable(self):
        instances = self.population(PufCategory.RING_OSCILLATOR)
        fb = sample_feedback(4, 4, 4, seed=2)
        report = cyclic_metric_suite(instances, fb, self.challenges, self.cfg, SWEEP, noise_seed=None)
        self.assertEqual(report.reliability_pct, 100.0)
        self.assertEqual([row["env"] for row in report.sample_reliability], ["nominal", "cold", "hot"])

    def test_breakdowns(self):
        instances = self.population(PufCategory.BUTTERFLY)
        report = acyclic_metric_suite(instances, self.challenges, self.cfg, SWEEP, noise_seed=1)
        self.assertEqual(len(report.pairwise_uniqueness), 6)
        self.assertAlmostEqual(
            np.mean([row["uniqueness_pct"] for row in report.pairwise_uniqueness]), report.uniqueness_pct
        )
        self.assertAlmostEqual(np.mean(report.instance_uniformity), report.uniformity_pct)
        self.assertAlmostEqual(np.mean(report.instance_reliability), report.reliability_pct)

    def test_seeded_suite_is_deterministic(self):
        instances = self.population(PufCategory.ARBITER)
        fb = sample_feedback(4, 4, 4, seed=0)
        first = cyclic_metric_suite(instances, fb, self.challenges, self.cfg, SWEEP, noise_seed=9)
        second = cyclic_metric_suite(instances, fb, self.challenges, self.cfg, SWEEP, noise_seed=9)
        self.assertEqual(MetricReportSerializer(first).data, MetricReportSerializer(second).data)

    def test_population_size_must_match(self):
        with self.assertRaises(UsageError):
            acyclic_metric_suite(self.population(PufCategory.ARBITER)[:3], self.challenges, self.cfg)

    @tag("slow")
    def test_biased_arbiter_lot_is_not_unique(self):
        cfg = MetricConfig(k=10, m=256, s=8, c=64)
        instances = lot_instances(
            PufCategory.ARBITER, 4, 4, VariationModel(sigma_systematic=0.2, sigma_random=0.01), 0, cfg.k
        )
        acyclic = acyclic_metric_suite(instances, all_challenges(4), cfg, SWEEP, noise_seed=0)
        self.assertLess(acyclic.uniqueness_pct, 20.0)

    def test_design_lot_draws_taps_and_bias_per_design(self):
        vm = VariationModel(sigma_systematic=0.2, sigma_random=0.01)
        devices = design_lot(PufCategory.ARBITER, 8, 2, vm, lot_seed=3, k=4, f=3, feedback_seed=0)
        shared = lot_instances(PufCategory.ARBITER, 8, 2, vm, 3, 4)
        self.assertEqual([d.inst.design for d in devices], [0, 1, 2, 3])
        self.assertEqual(devices[1].inst.instance_id, "arbiter-3-1-d1")
        self.assertEqual(shared[1].instance_id, "arbiter-3-1")
        self.assertEqual(len({d.fb for d in devices}), 4)
        self.assertTrue(all(len(d.fb) == 3 for d in devices))
        # shared-macro instances differ only by the small random draw
        spread = np.abs(shared[0].params["delays"] - shared[1].params["delays"]).max()
        design_spread = np.abs(devices[0].inst.params["delays"] - devices[1].inst.params["delays"]).max()
        self.assertLess(spread, 0.1)
        self.assertGreater(design_spread, 0.2)
        again = design_lot(PufCategory.ARBITER, 8, 2, vm, lot_seed=3, k=4, f=3, feedback_seed=0)
        self.assertTrue(all(a.inst.same_params(b.inst) and a.fb == b.fb for a, b in zip(devices, again)))

    def test_device_suite_matches_shared_wiring(self):
        instances = self.population(PufCategory.ARBITER)
        fb = sample_feedback(4, 4, 4, seed=0)
        shared = cyclic_metric_suite(instances, fb, self.challenges, self.cfg, SWEEP, noise_seed=2)
        devices = [CyclicPuf(inst, fb) for inst in instances]
        per_device = device_metric_suite(devices, self.challenges, self.cfg, SWEEP, noise_seed=2)
        self.assertEqual(MetricReportSerializer(shared).data, MetricReportSerializer(per_device).data)

    @tag("slow")
    def test_biased_lot_gains_uniqueness_from_feedback(self):
        uniformities = []
        for lot_seed in range(3):
            serializer = Table2ConfigSerializer(data={**default_config(), "categories": ["arbiter"], "lot_seed": lot_seed})
            serializer.is_valid(raise_exception=True)
            with self.subTest(lot_seed=lot_seed):
                apuf, cyc = run_table2_experiment(serializer.validated_data)
                self.assertEqual((apuf.design, cyc.design), ("APUF", "CycAPUF"))
                self.assertLess(apuf.uniqueness_pct, 20.0)
                self.assertGreaterEqual(cyc.uniqueness_pct, 40.0)
                self.assertLessEqual(cyc.uniqueness_pct, 60.0)
                self.assertGreaterEqual(apuf.reliability_pct, 90.0)
                self.assertGreaterEqual(cyc.reliability_pct, 90.0)
                # ties in the average bit value resolve to 1, so one lot may sit a few points high
                self.assertGreaterEqual(cyc.uniformity_pct, 35.0)
                self.assertLessEqual(cyc.uniformity_pct, 65.0)
                uniformities.append(cyc.uniformity_pct)
        self.assertGreaterEqual(np.mean(uniformities), 40.0)
        self.assertLessEqual(np.mean(uniformities), 60.0)

    @tag("slow")
    def test_cyclic_butterfly_designs_are_unique(self):
        cfg = MetricConfig(k=10, m=256, s=8, c=64)
        vm = VariationModel(sigma_systematic=0.2, sigma_random=0.01)
        shared = lot_instances(PufCategory.BUTTERFLY, 4, 4, vm, 0, cfg.k)
        devices = design_lot(PufCategory.BUTTERFLY, 4, 4, vm, 0, cfg.k, 4, feedback_seed=0)
        acyclic = acyclic_metric_suite(shared, all_challenges(4), cfg, SWEEP, noise_seed=0)
        cyclic = device_metric_suite(devices, all_challenges(4), cfg, SWEEP, noise_seed=0)
        self.assertLess(acyclic.uniqueness_pct, 20.0)
        self.assertGreaterEqual(cyclic.uniqueness_pct, 40.0)
        self.assertLessEqual(cyclic.uniqueness_pct, 60.0)

    @tag("slow")
    def test_acyclic_reliability_under_sweep_and_jitter(self):
        cfg = MetricConfig(k=10, m=256, s=8, c=64)
        for category in PufCategory:
            instances = lot_instances(category, 4, 4, VariationModel(), 0, cfg.k)
            report = acyclic_metric_suite(instances, all_challenges(4), cfg, SWEEP, noise_seed=0)
            self.assertGreaterEqual(report.reliability_pct, 90.0, category)


class MetricCommandTests(SimpleTestCase):
    def run_command(self, name, *args, **kwargs):
        out = StringIO()
        call_command(name, *args, stdout=out, **kwargs)
        return out.getvalue()

    def test_metrics_table(self):
        out = self.run_command("metrics", category="apuf", k=3, s=2, c=4, form="cyclic", taps="random:2:0")
        header, rule, row = out.splitlines()
        self.assertTrue(header.startswith("PUF design"))
        self.assertTrue(row.startswith("CycAPUF"))
        self.assertEqual(row.count("%"), 3)

    def test_metrics_json(self):
        out = self.run_command("metrics", category="bpuf", k=3, s=2, json=True)
        document = json.loads(out)
        self.assertEqual(document["config"]["num_challenges"], 16)
        self.assertEqual(document["config"]["form"], "acyclic")
        self.assertEqual(len(document["report"]["pairwise_uniqueness"]), 3)

    def test_taps_need_cyclic_form(self):
        with self.assertRaises(CommandError) as ctx:
            self.run_command("metrics", category="apuf", k=3, taps="0:0:1")
        self.assertEqual(ctx.exception.returncode, 2)

    def test_single_instance_is_rejected(self):
        with self.assertRaises(CommandError) as ctx:
            self.run_command("metrics", category="apuf", k=1)
        self.assertEqual(ctx.exception.returncode, 2)

    def test_table2_is_reproducible(self):
        with tempfile.TemporaryDirectory() as tmp:
            first, second = Path(tmp) / "a.json", Path(tmp) / "b.json"
            out = self.run_command("table2", k=3, s=2, c=8, output=str(first))
            self.assertEqual(
                [line.split()[0] for line in out.splitlines()[2:]],
                ["APUF", "CycAPUF", "ROPUF", "CycROPUF", "BPUF", "CycBPUF"],
            )
            document = json.loads(first.read_text())
            self.assertEqual(len(document["rows"]), 6)
            self.assertEqual(document["config"]["k"], 3)

            config = Path(tmp) / "config.json"
            config.write_text(json.dumps(document["config"]))
            self.run_command("table2", config=str(config), output=str(second))
            self.assertEqual(first.read_bytes(), second.read_bytes())

    def test_table2_shared_taps(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "shared.json"
            self.run_command("table2", k=3, s=2, c=8, shared_taps=True, output=str(path))
            self.assertFalse(json.loads(path.read_text())["config"]["distinct_designs"])
