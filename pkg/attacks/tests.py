import json
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import CommandError, call_command
from django.test import SimpleTestCase, tag

from feedpuf.exceptions import UsageError
from datasets.generation import generate_acyclic, generate_cyclic, split_80_20
from datasets.models import CrpDataset
from datasets.storage import read_dataset
from pufs.bits import parity_transform
from pufs.challenges import all_challenges, sample_challenges
from pufs.cyclic import CyclicPuf, sample_feedback
from pufs.models import (
    Fault,
    FaultKind,
    FaultSite,
    FaultSpec,
    FeedbackConfig,
    PufCategory,
    PufInstance,
    SiteKind,
    Tap,
    VariationModel,
)
from pufs.simulation import linear_weights, sample_instance

from .features import FeatureMap, feature_width, featurize
from .learners import LogisticRegression, Mlp, logistic_loss, sigmoid
from .serializers import AttackModelSerializer, Table1ConfigSerializer
from .training import Hyperparameters, ModelKind, evaluate, model_from_params, train

VM = VariationModel()


def labelled(challenges, labels) -> CrpDataset:
    challenges = np.asarray(challenges, dtype=np.uint8)
    return CrpDataset(
        instance_id="toy",
        challenges=challenges,
        responses=np.asarray(labels, dtype=np.uint8).reshape(-1, 1),
        cycle_index=np.ones(len(challenges), dtype=np.int64),
        faulty=False,
    )


def numeric_grad(learner, X, y, name, eps=1e-5):
    param = learner.params[name]
    grad = np.zeros_like(param)
    for idx in np.ndindex(param.shape):
        old = param[idx]
        param[idx] = old + eps
        up = learner.loss_and_grad(X, y)[0]
        param[idx] = old - eps
        down = learner.loss_and_grad(X, y)[0]
        param[idx] = old
        grad[idx] = (up - down) / (2 * eps)
    return grad


def lcg(seed):
    state = seed
    while True:
        state = (state * 1103515245 + 12345) % 2**31
        yield state


def formula_arbiter(n_c, seed):
    # integer-derived delays; the pinned accuracies below do not depend on numpy generator streams
    draws = lcg(seed)
    delays = [1.0 + ((next(draws) >> 8) % 2001 - 1000) / 10000.0 for _ in range(n_c * 4)]
    return PufInstance(PufCategory.ARBITER, n_c, 1, VM, 0, 0, {"delays": np.reshape(delays, (1, n_c, 4))})


def held_rows(device, external, cycles) -> CrpDataset:
    """Challenge-major cyclic rows; the last fifth of the challenges is held out."""
    rows = len(external) * cycles
    ds = CrpDataset(
        instance_id=device.inst.instance_id,
        challenges=np.repeat(external, cycles, axis=0),
        responses=device.simulate(external, cycles).reshape(rows, 1),
        cycle_index=np.tile(np.arange(1, cycles + 1, dtype=np.int64), len(external)),
        faulty=device.faulty,
    )
    cut = (len(external) * 4 // 5) * cycles
    return ds.with_split(np.arange(cut), np.arange(cut, rows))


class FeatureTests(SimpleTestCase):
    def test_parity_of_the_zero_challenge_is_all_ones(self):
        np.testing.assert_array_equal(featurize(np.zeros(4, dtype=np.uint8), FeatureMap.PARITY), np.ones(5))

    def test_parity_of_a_single_last_bit(self):
        np.testing.assert_array_equal(featurize([0, 0, 0, 1], FeatureMap.PARITY), [-1, -1, -1, -1, 1])

    def test_raw_bits_are_signed(self):
        np.testing.assert_array_equal(featurize([0, 1, 1, 0], FeatureMap.RAW_BITS), [-1, 1, 1, -1])

    def test_raw_plus_parity_concatenates(self):
        ch = sample_challenges(6, 20, 3)
        joined = featurize(ch, FeatureMap.RAW_PLUS_PARITY)
        self.assertEqual(joined.shape, (20, feature_width(FeatureMap.RAW_PLUS_PARITY, 6)))
        np.testing.assert_array_equal(joined[:, :6], featurize(ch, FeatureMap.RAW_BITS))
        np.testing.assert_array_equal(joined[:, 6:], parity_transform(ch))

    def test_widths(self):
        self.assertEqual(feature_width(FeatureMap.PARITY, 64), 65)
        self.assertEqual(feature_width(FeatureMap.RAW_BITS, 64), 64)
        self.assertEqual(feature_width("raw_plus_parity", 64), 129)


class LearnerTests(SimpleTestCase):
    def assertGradientsMatch(self, learner, X, y):
        _, analytic = learner.loss_and_grad(X, y)
        for name, grad in analytic.items():
            numeric = numeric_grad(learner, X, y, name)
            scale = max(np.linalg.norm(grad) + np.linalg.norm(numeric), 1e-12)
            self.assertLess(np.linalg.norm(grad - numeric) / scale, 1e-4, name)

    def test_logistic_regression_gradient(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            X = rng.choice([-1.0, 1.0], size=(8, 5))
            y = rng.integers(0, 2, 8)
            learner = LogisticRegression(w=rng.normal(size=5), b=rng.normal(size=1))
            self.assertGradientsMatch(learner, X, y)

    def test_mlp_gradient(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            X = rng.choice([-1.0, 1.0], size=(8, 5))
            y = rng.integers(0, 2, 8)
            learner = Mlp(
                W1=rng.normal(size=(5, 4)), b1=rng.normal(size=4), w2=rng.normal(size=4), b2=rng.normal(size=1)
            )
            self.assertGradientsMatch(learner, X, y)

    def test_sigmoid_and_loss_stay_finite(self):
        z = np.array([-1000.0, 0.0, 1000.0])
        np.testing.assert_allclose(sigmoid(z), [0.0, 0.5, 1.0])
        self.assertTrue(np.isfinite(logistic_loss(z, np.array([1.0, 1.0, 0.0]))))

    def test_mlp_initial_shapes(self):
        mlp = Mlp.initial(9, np.random.default_rng(0), hidden=16)
        self.assertEqual(mlp.params["W1"].shape, (9, 16))
        self.assertEqual(mlp.hidden, 16)


class TrainingTests(SimpleTestCase):
    def test_separable_toy_problem_is_learned(self):
        # odd sum of integer weights keeps every parity logit away from zero
        w = np.array([3, -2, 5, 1, -4, 2, -1, 3, 2], dtype=np.float64)
        ch = np.random.default_rng(4).integers(0, 2, size=(1000, 8), dtype=np.uint8)
        ds = split_80_20(labelled(ch, parity_transform(ch) @ w > 0), 0)
        hyper = Hyperparameters(learning_rate=0.1, epochs=500, batch_size=64)
        model = train(ds, FeatureMap.PARITY, ModelKind.LR, hyper, 0)
        self.assertGreaterEqual(evaluate(model, ds).test_accuracy_pct, 99.0)

    def test_coin_flip_labels_cannot_be_learned(self):
        ch = sample_challenges(20, 50000, 2)
        labels = np.random.default_rng(9).integers(0, 2, len(ch))
        ds = split_80_20(labelled(ch, labels), 0)
        self.assertGreaterEqual(len(ds.test_idx), 10000)
        model = train(ds, FeatureMap.PARITY, ModelKind.LR, Hyperparameters(epochs=2), 0)
        accuracy = evaluate(model, ds).test_accuracy_pct
        self.assertGreaterEqual(accuracy, 45.0)
        self.assertLessEqual(accuracy, 55.0)

    def test_the_linear_delay_model_is_a_perfect_attack(self):
        inst = sample_instance(PufCategory.ARBITER, 8, 1, VM, 0, 0)
        ds = split_80_20(generate_acyclic(inst, 256, 0), 0)
        model = model_from_params("parity", "lr", 8, {"w": linear_weights(inst)[0], "b": [0.0]})
        self.assertEqual(evaluate(model, ds).test_accuracy_pct, 100.0)

    def test_constant_predictor_scores_the_share_of_zeros(self):
        ch = all_challenges(8)
        ds = split_80_20(labelled(ch, np.arange(256) % 2), 0)
        model = model_from_params("parity", "lr", 8, {"w": np.zeros(9), "b": [-1.0]})
        report = evaluate(model, ds)
        zeros = np.count_nonzero(ds.responses[ds.test_idx, 0] == 0)
        self.assertAlmostEqual(report.test_accuracy_pct, 100.0 * zeros / report.test_rows)
        self.assertEqual(report.confusion["tp"] + report.confusion["fp"], 0)

    def test_training_is_deterministic(self):
        inst = sample_instance(PufCategory.ARBITER, 16, 1, VM, 0, 3)
        ds = split_80_20(generate_acyclic(inst, 2000, 1), 1)
        hyper = Hyperparameters(epochs=5, hidden=8)
        for kind in ModelKind:
            first = train(ds, FeatureMap.RAW_PLUS_PARITY, kind, hyper, 7)
            second = train(ds, FeatureMap.RAW_PLUS_PARITY, kind, hyper, 7)
            for name, value in first.learner.params.items():
                np.testing.assert_array_equal(value, second.learner.params[name])
            self.assertEqual(first.train_meta, second.train_meta)

    def test_repeated_rows_do_not_change_the_picture(self):
        inst = sample_instance(PufCategory.ARBITER, 16, 1, VM, 0, 5)
        hyper = Hyperparameters(learning_rate=0.5, epochs=100)
        acyclic = split_80_20(generate_acyclic(inst, 2000, 2), 0)
        repeated = split_80_20(generate_cyclic(CyclicPuf(inst, FeedbackConfig.empty()), 2000, 4, 2), 0)
        self.assertEqual(len(repeated.test_idx), 4 * len(acyclic.test_idx))
        a = evaluate(train(acyclic, FeatureMap.PARITY, ModelKind.LR, hyper, 0), acyclic).test_accuracy_pct
        b = evaluate(train(repeated, FeatureMap.PARITY, ModelKind.LR, hyper, 0), repeated).test_accuracy_pct
        self.assertGreaterEqual(a, 90.0)
        self.assertLessEqual(abs(a - b), 5.0)

    def test_multi_bit_datasets_are_rejected(self):
        inst = sample_instance(PufCategory.ARBITER, 8, 2, VM, 0, 0)
        ds = split_80_20(generate_acyclic(inst, 100, 0), 0)
        with self.assertRaises(UsageError):
            train(ds, FeatureMap.PARITY, ModelKind.LR, Hyperparameters(epochs=1), 0)

    def test_unsplit_and_empty_splits(self):
        ch = sample_challenges(8, 50, 0)
        ds = labelled(ch, np.zeros(50))
        with self.assertRaises(UsageError):
            train(ds, FeatureMap.PARITY, ModelKind.LR, Hyperparameters(epochs=1), 0)
        model = model_from_params("parity", "lr", 8, {"w": np.zeros(9), "b": [0.0]})
        with self.assertRaises(UsageError):
            evaluate(model, ds.with_split(np.arange(50), []))

    def test_weights_must_fit_the_feature_map(self):
        with self.assertRaises(UsageError):
            model_from_params("raw_bits", "lr", 8, {"w": np.zeros(9), "b": [0.0]})

    def test_invalid_hyperparameters(self):
        with self.assertRaises(UsageError):
            Hyperparameters(learning_rate=0.0)
        with self.assertRaises(UsageError):
            Hyperparameters(epochs=0)

    def test_fault_assisted_attack_fixture(self):
        # clean and faulty accuracy on the same held-out challenges, side by side
        inst = formula_arbiter(32, seed=23)
        fb = FeedbackConfig((Tap(0, 4, 31), Tap(0, 9, 20), Tap(0, 15, 7), Tap(0, 27, 2)))
        spec = FaultSpec(
            (
                Fault(FaultSite(SiteKind.FEEDBACK_XOR, 1), FaultKind.STUCK_AT_1),
                Fault(FaultSite(SiteKind.EFFECTIVE_CHALLENGE_BIT, 11), FaultKind.BIT_FLIP),
            )
        )
        draws = lcg(9)
        external = np.array([[(next(draws) >> 16) & 1 for _ in range(32)] for _ in range(2000)], dtype=np.uint8)
        faulty = held_rows(CyclicPuf(inst, fb, spec), external, 8)
        clean = held_rows(CyclicPuf(inst, fb), external, 8)
        hyper = Hyperparameters(learning_rate=0.1, epochs=200, batch_size=len(faulty.train_idx))
        model = train(faulty, FeatureMap.RAW_PLUS_PARITY, ModelKind.LR, hyper, 0)
        self.assertAlmostEqual(evaluate(model, faulty).test_accuracy_pct, 64.125, places=6)
        self.assertAlmostEqual(evaluate(model, clean).test_accuracy_pct, 56.375, places=6)

    @tag("slow")
    def test_acyclic_arbiter_is_modeled(self):
        for seed in range(3):
            inst = sample_instance(PufCategory.ARBITER, 32, 1, VM, seed, seed)
            ds = split_80_20(generate_acyclic(inst, 50000, seed), seed)
            model = train(ds, FeatureMap.PARITY, ModelKind.LR, Hyperparameters(), seed)
            self.assertGreaterEqual(evaluate(model, ds).test_accuracy_pct, 95.0)

    @tag("slow")
    def test_feedback_lowers_attack_accuracy(self):
        # (category, taps, minimum drop in mean accuracy over three seeds)
        for category, taps, margin in (
            (PufCategory.ARBITER, 4, 15.0),
            (PufCategory.RING_OSCILLATOR, 16, 10.0),
            (PufCategory.BUTTERFLY, 12, 10.0),
        ):
            acyclic, cyclic = [], []
            for seed in range(3):
                inst = sample_instance(category, 32, 1, VM, seed, seed)
                ds = split_80_20(generate_acyclic(inst, 50000, seed), seed)
                model = train(ds, FeatureMap.RAW_PLUS_PARITY, ModelKind.LR, Hyperparameters(), seed)
                acyclic.append(evaluate(model, ds).test_accuracy_pct)
                device = CyclicPuf(inst, sample_feedback(32, 1, taps, seed))
                ds = split_80_20(generate_cyclic(device, 50000, 8, seed), seed)
                model = train(ds, FeatureMap.RAW_PLUS_PARITY, ModelKind.LR, Hyperparameters(), seed)
                cyclic.append(evaluate(model, ds).test_accuracy_pct)
            with self.subTest(category=category):
                self.assertGreaterEqual(np.mean(acyclic) - np.mean(cyclic), margin)

    @tag("slow")
    def test_more_challenges_help(self):
        inst = sample_instance(PufCategory.ARBITER, 32, 1, VM, 0, 0)
        scores = []
        for budget in (5000, 50000):
            ds = split_80_20(generate_acyclic(inst, budget, 0), 0)
            scores.append(evaluate(train(ds, FeatureMap.PARITY, ModelKind.LR, Hyperparameters(), 0), ds).test_accuracy_pct)
        self.assertGreaterEqual(scores[1], scores[0])


class AttackCommandTests(SimpleTestCase):
    def run_command(self, *args, **kwargs):
        out = StringIO()
        call_command(*args, stdout=out, **kwargs)
        return out.getvalue()

    def make_dataset(self, tmp, n=1):
        path = Path(tmp) / "apuf.csv"
        self.run_command(
            "dataset", category="apuf", nc=16, n=n, lot_seed=0, instance_seed=1, challenges=2000, output=str(path)
        )
        return path

    def test_attack_saves_a_reloadable_model(self):
        with tempfile.TemporaryDirectory() as tmp:
            data = self.make_dataset(tmp)
            model_path, report_path = Path(tmp) / "model.json", Path(tmp) / "report.json"
            out = self.run_command(
                "attack", dataset=str(data), epochs=20, save_model=str(model_path), output=str(report_path)
            )
            self.assertIn("%", out)
            report = json.loads(report_path.read_text())["report"]
            self.assertEqual(report["test_rows"], 400)

            serializer = AttackModelSerializer(data=json.loads(model_path.read_text()))
            self.assertTrue(serializer.is_valid(), serializer.errors)
            model = serializer.save()
            self.assertEqual(model.train_meta["train_rows"], 1600)
            self.assertEqual(evaluate(model, read_dataset(data)).test_accuracy_pct, report["test_accuracy_pct"])

    def test_multi_bit_dataset_exits_2(self):
        with tempfile.TemporaryDirectory() as tmp:
            data = self.make_dataset(tmp, n=2)
            with self.assertRaises(CommandError) as ctx:
                self.run_command("attack", dataset=str(data), epochs=1)
            self.assertEqual(ctx.exception.returncode, 2)

    def test_small_table1_is_reproducible(self):
        flags = {"nc": 16, "challenges": 300, "cycles": 4, "epochs": 2}
        with tempfile.TemporaryDirectory() as tmp:
            paths = [Path(tmp) / name for name in ("a.json", "b.json", "c.json")]
            table = self.run_command("table1", output=str(paths[0]), **flags)
            self.run_command("table1", output=str(paths[1]), **flags)
            self.run_command("table1", output=str(paths[2]), jobs=2, **flags)
            self.assertEqual(paths[0].read_bytes(), paths[1].read_bytes())
            self.assertEqual(paths[0].read_bytes(), paths[2].read_bytes())

            document = json.loads(paths[0].read_text())
            rows = document["rows"]
            self.assertEqual(len(rows), 9)
            self.assertEqual(
                [row["design"] for row in rows[:3]], ["APUF", "CycAPUF", "Faulty CycAPUF"]
            )
            self.assertIsNone(rows[0]["clean_accuracy_pct"])
            self.assertIsNotNone(rows[2]["clean_accuracy_pct"])
            self.assertEqual(rows[1]["dataset_rows"], 1200)
            self.assertIn("Faulty CycBPUF", table)

            again = Table1ConfigSerializer(data=document["config"])
            self.assertTrue(again.is_valid(), again.errors)

    def test_table1_rejects_too_many_faults(self):
        with tempfile.TemporaryDirectory() as tmp:
            config = Path(tmp) / "config.json"
            config.write_text(json.dumps({"faults": {"arbiter": 100, "ring_oscillator": 0, "butterfly": 0}}))
            with self.assertRaises(CommandError) as ctx:
                self.run_command("table1", config=str(config), nc=16, challenges=50, cycles=2, epochs=1)
            self.assertEqual(ctx.exception.returncode, 3)
