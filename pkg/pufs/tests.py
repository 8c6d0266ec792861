import hashlib
import hmac
import itertools
import json
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import CommandError, call_command
from django.test import SimpleTestCase
from rest_framework import serializers

from feedpuf.exceptions import ConfigurationError, InfeasibleError, UsageError
from feedpuf.files import parse_json, render_json, sidecar_path

from .bits import bits_from_string, bits_to_string, parity_transform, strings_to_rows
from .challenges import all_challenges, challenge_space, sample_challenges
from .cyclic import (
    CyclicPuf,
    classify_mode,
    classify_responses,
    collect_crm,
    collect_crms,
    crm_matches,
    derive_key,
    effective_challenge,
    feedback_reachable,
    mode_histogram,
    parse_taps,
    replay_matches,
    sample_feedback,
    simulate_trajectory,
)
from .faults import apply_fault, fault_sites, parse_fault_spec, sample_fault_spec
from .models import (
    Crm,
    EnvCondition,
    Fault,
    FaultKind,
    FaultSite,
    FaultSpec,
    FeedbackConfig,
    ModeKind,
    PufCategory,
    PufInstance,
    PufType,
    ResponseMode,
    SiteKind,
    Tap,
    Trajectory,
    VariationModel,
)
from .serializers import dump_instance, load_instance, trajectory_record
from .simulation import evaluate, eval_acyclic, linear_weights, sample_instance

VM = VariationModel()


def arbiter(delays):
    delays = np.asarray(delays, dtype=np.float64)
    return PufInstance(PufCategory.ARBITER, delays.shape[1], delays.shape[0], VM, 0, 0, {"delays": delays})


def toggling_arbiter():
    # one stage whose response equals its (effective) challenge bit
    return arbiter([[[2.0, 1.0, 1.0, 2.0]]])


def lcg(seed):
    """Integer LCG; fixtures built from it do not depend on numpy generator streams."""
    state = seed
    while True:
        state = (state * 1103515245 + 12345) % 2**31
        yield state


def formula_arbiter(n_c, n, seed):
    # delays are 1 +- k / 10000 for integer k, so every value is exactly reproducible
    draws = lcg(seed)
    delays = [1.0 + ((next(draws) >> 8) % 2001 - 1000) / 10000.0 for _ in range(n * n_c * 4)]
    return arbiter(np.reshape(delays, (n, n_c, 4)))


def formula_challenges(width, num, seed):
    draws = lcg(seed)
    return np.array([[(next(draws) >> 16) & 1 for _ in range(width)] for _ in range(num)], dtype=np.uint8)


class BitConventionTests(SimpleTestCase):
    def test_strings_are_msb_first(self):
        bits = bits_from_string("1000")
        self.assertEqual(bits.tolist(), [1, 0, 0, 0])
        self.assertEqual(bits_to_string(bits), "1000")
        self.assertEqual(strings_to_rows(["10", "01"], 2).tolist(), [[1, 0], [0, 1]])

    def test_rejects_non_bits(self):
        with self.assertRaises(UsageError):
            bits_from_string("10a1")
        with self.assertRaises(UsageError):
            strings_to_rows(["101", "01"], 3)

    def test_parity_transform(self):
        self.assertEqual(parity_transform([0, 0, 0, 0]).tolist(), [1, 1, 1, 1, 1])
        self.assertEqual(parity_transform(bits_from_string("0001")).tolist(), [-1, -1, -1, -1, 1])
        self.assertEqual(parity_transform(bits_from_string("1000")).tolist(), [-1, 1, 1, 1, 1])
        self.assertEqual(parity_transform(np.zeros((3, 2))).shape, (3, 3))


class SamplingTests(SimpleTestCase):
    def test_same_seeds_reproduce_params(self):
        for category in PufCategory:
            a = sample_instance(category, 4, 4, VM, 1, 2)
            b = sample_instance(category, 4, 4, VM, 1, 2)
            self.assertTrue(a.same_params(b))
            self.assertFalse(a.same_params(sample_instance(category, 4, 4, VM, 1, 3)))

    def test_zero_variance_instances_are_identical(self):
        vm = VariationModel(sigma_random=0.0, sigma_systematic=0.0)
        a = sample_instance(PufCategory.ARBITER, 4, 4, vm, 7, 1)
        b = sample_instance(PufCategory.ARBITER, 4, 4, vm, 7, 2)
        self.assertTrue(a.same_params(b))
        challenges = all_challenges(4)
        np.testing.assert_array_equal(evaluate(a, challenges), evaluate(b, challenges))
        # every stage ties, and ties resolve to 0
        self.assertFalse(evaluate(a, challenges).any())

    def test_delays_are_clamped_to_the_floor(self):
        vm = VariationModel(sigma_random=5.0)
        inst = sample_instance(PufCategory.RING_OSCILLATOR, 8, 2, vm, 0, 0)
        self.assertGreaterEqual(inst.params["delays"].min(), vm.delay_floor)

    def test_invalid_configuration(self):
        with self.assertRaises(ConfigurationError):
            sample_instance(PufCategory.ARBITER, 0, 1, VM, 0, 0)
        with self.assertRaises(ConfigurationError):
            sample_instance(PufCategory.ARBITER, 4, 1, VM, -1, 0)
        with self.assertRaises(ConfigurationError):
            VariationModel(mu=0.0)
        with self.assertRaises(ConfigurationError):
            EnvCondition(1.1, "nominal")

    def test_systematic_bias_makes_instances_agree(self):
        vm = VariationModel(sigma_random=0.005, sigma_systematic=0.05)
        population = [sample_instance(PufCategory.ARBITER, 64, 1, vm, 3, seed) for seed in range(10)]
        challenges = sample_challenges(64, 1000, seed=11)
        responses = [evaluate(inst, challenges)[:, 0] for inst in population]
        for a, b in itertools.combinations(responses, 2):
            self.assertGreater(np.mean(a == b), 0.8)


class AcyclicEvaluationTests(SimpleTestCase):
    def test_faster_top_path_answers_one(self):
        inst = arbiter([[[1.0, 1.0, 2.0, 2.0]]])
        self.assertEqual(eval_acyclic(inst, [0]).tolist(), [1])
        self.assertEqual(eval_acyclic(inst, [1]).tolist(), [1])

    def test_ties_answer_zero(self):
        inst = arbiter(np.ones((1, 4, 4)))
        self.assertFalse(evaluate(inst, all_challenges(4)).any())

    def test_ring_oscillator_faster_ring_answers_one(self):
        # ring A selects {1.0, 1.0}, ring B selects {1.0, 1.1} for challenge 00
        delays = np.full((1, 2, 2, 2), 5.0)
        delays[0, 0, :, 0] = [1.0, 1.0]
        delays[0, 1, :, 0] = [1.0, 1.1]
        inst = PufInstance(PufCategory.RING_OSCILLATOR, 2, 1, VM, 0, 0, {"delays": delays})
        self.assertEqual(eval_acyclic(inst, [0, 0]).tolist(), [1])

    def test_arbiter_matches_linear_delay_model(self):
        for seed in range(20):
            n_c = 4 + seed % 5
            inst = sample_instance(PufCategory.ARBITER, n_c, 2, VM, 100, seed)
            challenges = all_challenges(n_c)
            expected = (parity_transform(challenges) @ linear_weights(inst).T > 0).astype(np.uint8)
            np.testing.assert_array_equal(evaluate(inst, challenges), expected)

    def test_linear_weights_only_for_arbiter(self):
        with self.assertRaises(ConfigurationError):
            linear_weights(sample_instance(PufCategory.BUTTERFLY, 4, 1, VM, 0, 0))

    def test_noiseless_scale_invariance(self):
        env = EnvCondition(1.03, "hot")
        challenges = all_challenges(8)
        for category in (PufCategory.ARBITER, PufCategory.RING_OSCILLATOR):
            inst = sample_instance(category, 8, 3, VM, 5, 6)
            np.testing.assert_array_equal(evaluate(inst, challenges), evaluate(inst, challenges, env))

    def test_width_mismatch(self):
        inst = sample_instance(PufCategory.ARBITER, 4, 1, VM, 0, 0)
        with self.assertRaises(UsageError):
            eval_acyclic(inst, [0, 1, 0])

    def test_noisy_evaluation_is_seeded(self):
        inst = sample_instance(PufCategory.BUTTERFLY, 16, 4, VariationModel(jitter_sigma=0.05), 0, 0)
        ch = sample_challenges(16, 1, 2)[0]
        np.testing.assert_array_equal(eval_acyclic(inst, ch, noise_seed=9), eval_acyclic(inst, ch, noise_seed=9))

    def test_flip_rate_grows_with_jitter(self):
        challenges = sample_challenges(32, 10_000, seed=4)
        rates = []
        for jitter in (0.001, 0.01, 0.05):
            inst = sample_instance(PufCategory.ARBITER, 32, 1, VariationModel(jitter_sigma=jitter), 1, 1)
            clean = evaluate(inst, challenges)
            noisy = evaluate(inst, challenges, rng=np.random.default_rng(77))
            rates.append(np.mean(clean != noisy))
        self.assertEqual(rates, sorted(rates))
        self.assertGreater(rates[-1], rates[0])


class EffectiveChallengeTests(SimpleTestCase):
    def test_no_taps_is_identity(self):
        ext = bits_from_string("1010")
        np.testing.assert_array_equal(effective_challenge(ext, [1, 1], FeedbackConfig.empty()), ext)

    def test_zero_feedback_copies_the_challenge_bit(self):
        fb = FeedbackConfig((Tap(0, 1, 3), Tap(1, 0, 2)))
        result = effective_challenge(bits_from_string("1100"), [0, 0], fb)
        self.assertEqual(bits_to_string(result), "1111")

    def test_msb_first_xor(self):
        fb = FeedbackConfig((Tap(0, 0, 3),))
        result = effective_challenge(bits_from_string("1010"), [1, 0, 1, 1], fb)
        self.assertEqual(bits_to_string(result), "1010")
        result = effective_challenge(bits_from_string("1010"), [0, 0, 1, 1], fb)
        self.assertEqual(bits_to_string(result), "1011")

    def test_taps_are_validated(self):
        with self.assertRaises(ConfigurationError):
            FeedbackConfig((Tap(0, 0, 1), Tap(1, 1, 1)))
        with self.assertRaises(ConfigurationError):
            effective_challenge([0, 0], [0], FeedbackConfig((Tap(1, 0, 0),)))
        with self.assertRaises(ConfigurationError):
            parse_taps("0:0:9", 4, 1)
        with self.assertRaises(ConfigurationError):
            parse_taps("0:0", 4, 1)
        with self.assertRaises(ConfigurationError):
            parse_taps("random:9:1", 4, 1)

    def test_parse_taps(self):
        self.assertEqual(str(parse_taps("0:1:2,1:0:3", 4, 2)), "0:1:2,1:0:3")
        self.assertEqual(len(parse_taps("none", 4, 2)), 0)
        self.assertEqual(parse_taps("random:3:5", 8, 2), sample_feedback(8, 2, 3, 5))


class TrajectoryTests(SimpleTestCase):
    def test_empty_feedback_reduces_to_acyclic(self):
        inst = sample_instance(PufCategory.ARBITER, 10, 3, VM, 2, 2)
        challenges = all_challenges(10)
        trajectories = CyclicPuf(inst).simulate(challenges, 4)
        acyclic = evaluate(inst, challenges)
        for cycle in range(4):
            np.testing.assert_array_equal(trajectories[:, cycle], acyclic)
        modes = {classify_responses(traj).kind for traj in trajectories}
        self.assertEqual(modes, {ModeKind.BINARY})

    def test_single_cycle_matches_acyclic(self):
        inst = sample_instance(PufCategory.BUTTERFLY, 6, 2, VM, 1, 1)
        traj = simulate_trajectory(inst, FeedbackConfig.empty(), [1, 0, 1, 1, 0, 0], 1)
        np.testing.assert_array_equal(traj.responses[0], eval_acyclic(inst, [1, 0, 1, 1, 0, 0]))
        self.assertEqual(classify_mode(traj).kind, ModeKind.PSEUDO_RANDOM)

    def test_fed_back_bit_toggles(self):
        traj = simulate_trajectory(toggling_arbiter(), FeedbackConfig((Tap(0, 0, 0),)), [1], 6)
        self.assertEqual(traj.response_strings(), ["1", "0", "1", "0", "1", "0"])
        self.assertEqual(classify_mode(traj), ResponseMode.oscillating(0, 2))
        traj = simulate_trajectory(toggling_arbiter(), FeedbackConfig((Tap(0, 0, 0),)), [0], 6)
        self.assertEqual(classify_mode(traj), ResponseMode.binary())

    def test_batch_and_single_views_agree(self):
        inst = sample_instance(PufCategory.RING_OSCILLATOR, 6, 3, VM, 4, 4)
        device = CyclicPuf(inst, sample_feedback(6, 3, 3, seed=1))
        challenges = all_challenges(6)
        batch = device.simulate(challenges, 9)
        for ch, responses in zip(challenges[::7], batch[::7]):
            np.testing.assert_array_equal(device.trajectory(ch, 9).responses, responses)

    def test_rejects_zero_cycles(self):
        with self.assertRaises(ConfigurationError):
            CyclicPuf(toggling_arbiter()).simulate([[0]], 0)


def brute_force_mode(rows):
    for j in range(1, len(rows)):
        for i in range(j):
            if np.array_equal(rows[i], rows[j]):
                period = j - i
                if period == 1:
                    return ResponseMode.binary() if i == 0 else ResponseMode.steady_state(i)
                return ResponseMode.oscillating(i, period)
    return ResponseMode.pseudo_random()


class ClassificationTests(SimpleTestCase):
    def rows(self, labels, width=2):
        codes = {label: index for index, label in enumerate(dict.fromkeys(labels))}
        return np.array([[(codes[label] >> b) & 1 for b in range(width)] for label in labels], dtype=np.uint8)

    def test_labelled_patterns(self):
        self.assertEqual(classify_responses(self.rows("AAAA")), ResponseMode.binary())
        self.assertEqual(classify_responses(self.rows("ABCCC")), ResponseMode.steady_state(2))
        self.assertEqual(classify_responses(self.rows("ABABA")), ResponseMode.oscillating(0, 2))
        self.assertEqual(classify_responses(self.rows("ABCDBC", 3)), ResponseMode.oscillating(1, 3))

    def test_distinct_window_is_pseudo_random(self):
        rows = np.array([[(v >> b) & 1 for b in range(8)] for v in range(20)], dtype=np.uint8)
        self.assertEqual(classify_responses(rows).kind, ModeKind.PSEUDO_RANDOM)

    def test_mode_invariants(self):
        with self.assertRaises(ConfigurationError):
            ResponseMode(ModeKind.STEADY_STATE, 0, 1)
        with self.assertRaises(ConfigurationError):
            ResponseMode(ModeKind.OSCILLATING, 0, 1)

    def test_matches_brute_force_recurrence(self):
        rng = np.random.default_rng(2024)
        for pair in range(30):
            n = 1 + pair % 4
            n_c = 3 + pair % 4
            category = list(PufCategory)[pair % 3]
            inst = sample_instance(category, n_c, n, VM, pair, pair + 1)
            fb = sample_feedback(n_c, n, int(rng.integers(1, n_c + 1)), seed=pair)
            device = CyclicPuf(inst, fb)
            for traj in device.simulate(all_challenges(n_c), 24):
                mode = classify_responses(traj)
                self.assertEqual(mode, brute_force_mode(traj))
                self.assertTrue(replay_matches(Trajectory(np.zeros(n_c), traj), mode))
                if mode.period is not None:
                    self.assertLessEqual(mode.transient_len + mode.period, 2**n)


class CrmTests(SimpleTestCase):
    def test_response_sets(self):
        inst = toggling_arbiter()
        fb = FeedbackConfig((Tap(0, 0, 0),))
        binary = collect_crm(inst, fb, [0], 8)
        self.assertEqual(binary.response_set, ("0",))
        oscillating = collect_crm(inst, fb, [1], 8)
        self.assertEqual(oscillating.response_set, ("1", "0"))
        self.assertEqual(oscillating.mode, ResponseMode.oscillating(0, 2))

    def test_collection_is_deterministic(self):
        inst = sample_instance(PufCategory.ARBITER, 16, 2, VM, 8, 9)
        device = CyclicPuf(inst, sample_feedback(16, 2, 4, seed=3))
        challenges = sample_challenges(16, 50, seed=1)
        self.assertEqual(collect_crms(device, challenges, 16), collect_crms(device, challenges, 16))

    def test_cyclic_arbiter_shows_several_modes(self):
        inst = sample_instance(PufCategory.ARBITER, 64, 1, VM, 1, 1)
        device = CyclicPuf(inst, sample_feedback(64, 1, 4, seed=1))
        crms = collect_crms(device, sample_challenges(64, 1000, seed=1), 64)
        histogram = mode_histogram(crm.mode for crm in crms)
        self.assertEqual(sum(histogram.values()), 1000)
        self.assertGreaterEqual(sum(1 for count in histogram.values() if count), 2)

    def test_mode_histogram_fixture(self):
        device = CyclicPuf(
            formula_arbiter(64, 4, seed=11),
            FeedbackConfig((Tap(0, 3, 63), Tap(1, 17, 40), Tap(2, 29, 12), Tap(3, 50, 0))),
        )
        crms = collect_crms(device, formula_challenges(64, 1000, seed=5), 64)
        self.assertEqual(
            mode_histogram(crm.mode for crm in crms),
            {"binary": 195, "steady_state": 205, "oscillating": 600, "pseudo_random": 0},
        )

    def test_crm_authentication(self):
        inst = sample_instance(PufCategory.ARBITER, 8, 3, VM, 2, 3)
        other = sample_instance(PufCategory.ARBITER, 8, 3, VM, 2, 4)
        fb = FeedbackConfig((Tap(0, 1, 2), Tap(2, 3, 5)))
        ext = bits_from_string("10110010")
        enrolled = collect_crm(inst, fb, ext, 32)
        self.assertTrue(crm_matches(enrolled, simulate_trajectory(inst, fb, ext, 32)))
        wrong_challenge = simulate_trajectory(inst, fb, bits_from_string("00000000"), 32)
        self.assertFalse(crm_matches(enrolled, wrong_challenge))
        observed = simulate_trajectory(other, fb, ext, 32)
        expected = np.mean([text in enrolled.response_set for text in observed.response_strings()]) >= 0.9
        self.assertEqual(crm_matches(enrolled, observed), expected)

    def test_key_from_pseudo_random_crms(self):
        wandering = Crm("0101", ResponseMode.pseudo_random(), ("10", "01", "11"))
        settled = Crm("1100", ResponseMode.binary(), ("00",))
        other = Crm("0011", ResponseMode.pseudo_random(), ("00", "11", "10"))
        key = derive_key([wandering, settled, other])
        prk = hmac.new(bytes(32), b"0011:00,11,10|0101:10,01,11", hashlib.sha256).digest()
        self.assertEqual(key, hmac.new(prk, b"feedpuf-crm-key\x01", hashlib.sha256).digest())
        self.assertEqual(derive_key([other, wandering]), key)
        self.assertEqual(derive_key([wandering, settled, other], length=80)[:32], key)
        self.assertEqual(len(derive_key([wandering], length=5)), 5)
        self.assertNotEqual(derive_key([wandering, other], salt=b"chip-7"), key)
        reordered = Crm("0101", ResponseMode.pseudo_random(), ("01", "10", "11"))
        self.assertNotEqual(derive_key([reordered, other]), key)

    def test_key_needs_pseudo_random_crms(self):
        with self.assertRaises(InfeasibleError):
            derive_key([Crm("1100", ResponseMode.binary(), ("00",))])
        with self.assertRaises(ConfigurationError):
            derive_key([Crm("0101", ResponseMode.pseudo_random(), ("10", "01"))], length=0)


class FaultTests(SimpleTestCase):
    def setUp(self):
        self.inst = sample_instance(PufCategory.ARBITER, 6, 3, VM, 3, 5)
        self.fb = FeedbackConfig((Tap(0, 1, 4), Tap(0, 2, 5)))
        self.challenges = all_challenges(6)

    def simulate(self, spec):
        return CyclicPuf(self.inst, self.fb, spec).simulate(self.challenges, 10)

    def test_apply_fault(self):
        self.assertEqual(apply_fault(1, FaultKind.STUCK_AT_0), 0)
        self.assertEqual(apply_fault(0, FaultKind.BIT_FLIP), 1)
        self.assertEqual(apply_fault(1, FaultKind.STUCK_AT_1), 1)
        np.testing.assert_array_equal(apply_fault(np.array([0, 1]), FaultKind.BIT_FLIP), [1, 0])

    def test_empty_spec_is_clean(self):
        np.testing.assert_array_equal(self.simulate(FaultSpec()), CyclicPuf(self.inst, self.fb).simulate(self.challenges, 10))

    def test_stuck_response_bit(self):
        inst = sample_instance(PufCategory.BUTTERFLY, 8, 1, VM, 0, 0)
        spec = FaultSpec((Fault(FaultSite(SiteKind.RESPONSE_BIT, 0), FaultKind.STUCK_AT_1),))
        device = CyclicPuf(inst, FeedbackConfig((Tap(0, 0, 0),)), spec)
        self.assertTrue(device.simulate(all_challenges(8), 5).all())

    def test_stuck_at_is_idempotent(self):
        site = FaultSite(SiteKind.EFFECTIVE_CHALLENGE_BIT, 2)
        once = FaultSpec((Fault(site, FaultKind.STUCK_AT_0),))
        twice = once.compose(once)
        self.assertEqual(twice, once)
        np.testing.assert_array_equal(self.simulate(twice), self.simulate(once))

    def test_bit_flip_is_an_involution(self):
        for site in fault_sites(self.inst, self.fb):
            flip = FaultSpec((Fault(site, FaultKind.BIT_FLIP),))
            self.assertEqual(flip.compose(flip), FaultSpec())
        flip = FaultSpec((Fault(FaultSite(SiteKind.FEEDBACK_XOR, 1), FaultKind.BIT_FLIP),))
        np.testing.assert_array_equal(self.simulate(flip.compose(flip)), self.simulate(FaultSpec()))

    def test_flip_after_stuck_at(self):
        site = FaultSite(SiteKind.RESPONSE_BIT, 1)
        stuck = FaultSpec((Fault(site, FaultKind.STUCK_AT_0),))
        flip = FaultSpec((Fault(site, FaultKind.BIT_FLIP),))
        self.assertEqual(stuck.compose(flip), FaultSpec((Fault(site, FaultKind.STUCK_AT_1),)))
        self.assertEqual(flip.compose(stuck), stuck)

    def test_response_fault_stays_local(self):
        clean = self.simulate(FaultSpec())
        for j in range(self.inst.response_width):
            for kind in FaultKind:
                faulty = self.simulate(FaultSpec((Fault(FaultSite(SiteKind.RESPONSE_BIT, j), kind),)))
                outside = sorted(set(range(3)) - feedback_reachable(self.fb, 3, j))
                np.testing.assert_array_equal(faulty[..., outside], clean[..., outside])
        self.assertEqual(feedback_reachable(self.fb, 3, 2), {2})
        self.assertEqual(feedback_reachable(self.fb, 3, 0), {0, 1, 2})

    def test_sample_fault_spec(self):
        sites = fault_sites(self.inst, self.fb)
        self.assertEqual(len(sites), 3 + 2 + 6)
        self.assertEqual(sample_fault_spec(self.inst, self.fb, 0, seed=1), FaultSpec())
        everything = sample_fault_spec(self.inst, self.fb, len(sites), seed=1)
        self.assertEqual({fault.site for fault in everything.faults}, set(sites))
        self.assertEqual(
            sample_fault_spec(self.inst, self.fb, 2, seed=4), sample_fault_spec(self.inst, self.fb, 2, seed=4)
        )
        with self.assertRaises(ConfigurationError):
            sample_fault_spec(self.inst, self.fb, len(sites) + 1, seed=1)

    def test_invalid_sites(self):
        with self.assertRaises(ConfigurationError):
            CyclicPuf(self.inst, self.fb, FaultSpec((Fault(FaultSite(SiteKind.FEEDBACK_XOR, 2), FaultKind.BIT_FLIP),)))
        with self.assertRaises(ConfigurationError):
            FaultSpec(
                (
                    Fault(FaultSite(SiteKind.RESPONSE_BIT, 0), FaultKind.BIT_FLIP),
                    Fault(FaultSite(SiteKind.RESPONSE_BIT, 0), FaultKind.STUCK_AT_0),
                )
            )

    def test_parse_fault_spec(self):
        spec = parse_fault_spec("response_bit:0:stuck_at_1,feedback_xor:1:bit_flip")
        self.assertEqual(
            spec.faults,
            (
                Fault(FaultSite(SiteKind.RESPONSE_BIT, 0), FaultKind.STUCK_AT_1),
                Fault(FaultSite(SiteKind.FEEDBACK_XOR, 1), FaultKind.BIT_FLIP),
            ),
        )
        with self.assertRaises(ConfigurationError):
            parse_fault_spec("response_bit:0")


class ChallengeTests(SimpleTestCase):
    def test_exhaustive_draw(self):
        drawn = sample_challenges(2, 4, seed=3)
        self.assertEqual(sorted(bits_to_string(row) for row in drawn), ["00", "01", "10", "11"])

    def test_distinct_and_seeded(self):
        drawn = sample_challenges(40, 500, seed=6)
        self.assertEqual(len({row.tobytes() for row in drawn}), 500)
        np.testing.assert_array_equal(drawn, sample_challenges(40, 500, seed=6))

    def test_infeasible(self):
        with self.assertRaises(InfeasibleError):
            sample_challenges(3, 9, seed=0)

    def test_challenge_space(self):
        self.assertEqual(challenge_space(4, PufType.WEAK, 3, seed=0).shape, (16, 4))
        self.assertEqual(challenge_space(32, PufType.STRONG, 100, seed=0).shape, (100, 32))


class SerializerTests(SimpleTestCase):
    def test_instance_round_trip(self):
        for category in PufCategory:
            inst = sample_instance(category, 5, 2, VM, 4, 8)
            loaded = load_instance(parse_json(render_json(dump_instance(inst))))
            self.assertEqual(loaded.instance_id, inst.instance_id)
            self.assertTrue(loaded.same_params(inst))
            np.testing.assert_array_equal(evaluate(loaded, all_challenges(5)), evaluate(inst, all_challenges(5)))

    def test_design_index_survives_a_round_trip(self):
        inst = sample_instance(PufCategory.ARBITER, 5, 2, VM, 4, 8, design=8)
        loaded = load_instance(parse_json(render_json(dump_instance(inst))))
        self.assertEqual(loaded.design, 8)
        self.assertEqual(loaded.instance_id, "arbiter-4-8-d8")
        self.assertTrue(loaded.same_params(inst))
        biased = VariationModel(sigma_systematic=0.2)
        self.assertFalse(
            sample_instance(PufCategory.ARBITER, 5, 2, biased, 4, 8, design=8).same_params(
                sample_instance(PufCategory.ARBITER, 5, 2, biased, 4, 8)
            )
        )

    def test_instance_shapes_are_checked(self):
        data = dump_instance(sample_instance(PufCategory.ARBITER, 3, 1, VM, 0, 0))
        data = dict(data, challenge_width=4)
        with self.assertRaises(serializers.ValidationError):
            load_instance(data)

    def test_trajectory_record(self):
        traj = simulate_trajectory(toggling_arbiter(), FeedbackConfig((Tap(0, 0, 0),)), [1], 4)
        record = trajectory_record(traj, classify_mode(traj))
        self.assertEqual(
            json.loads(json.dumps(record)),
            {
                "challenge": "1",
                "cycles": 4,
                "mode": {"tag": "oscillating", "transient_len": 0, "period": 2},
                "responses": ["1", "0", "1", "0"],
            },
        )


class CommandTests(SimpleTestCase):
    def run_command(self, *args, **kwargs):
        out = StringIO()
        call_command(*args, stdout=out, **kwargs)
        return out.getvalue()

    def test_simulate_without_feedback_repeats_the_response(self):
        out = self.run_command("simulate", category="apuf", nc=4, n=4, challenge=["1010"], cycles=8)
        lines = out.splitlines()
        self.assertEqual(len(lines), 8)
        self.assertEqual(len(set(lines)), 1)

    def test_gen_then_simulate_from_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "inst.json"
            self.run_command("gen", category="bpuf", nc=8, n=2, lot_seed=1, instance_seed=2, output=str(path))
            inline = self.run_command(
                "simulate", category="bpuf", nc=8, n=2, lot_seed=1, instance_seed=2, challenge=["10110001"], cycles=3
            )
            from_file = self.run_command("simulate", instance=str(path), challenge=["10110001"], cycles=3)
            self.assertEqual(inline, from_file)

    def test_simulate_writes_json_lines_and_config(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "traj.jsonl"
            self.run_command(
                "simulate", category="apuf", nc=8, n=2, taps="0:0:7", challenge=["10101010", "01010101"],
                cycles=5, output=str(path),
            )
            lines = path.read_text().splitlines()
            self.assertEqual(len(lines), 2)
            self.assertEqual(json.loads(lines[0])["challenge"], "10101010")
            config = json.loads(sidecar_path(path).read_text())["config"]
            self.assertEqual(config["taps"], [[0, 0, 7]])

    def test_challenge_flag_repeats_or_takes_several_values(self):
        listed = self.run_command("simulate", "--challenge", "1010", "0110", category="apuf", nc=4, n=2, cycles=3)
        repeated = self.run_command(
            "simulate", "--challenge", "1010", "--challenge", "0110", category="apuf", nc=4, n=2, cycles=3
        )
        self.assertEqual(listed, repeated)
        lines = listed.splitlines()
        self.assertEqual(len(lines), 8)
        self.assertEqual((lines[0], lines[4]), ("# 1010", "# 0110"))

    def test_collect_and_inject(self):
        out = self.run_command("collect", category="apuf", nc=16, n=2, taps="random:4:1", random=20, cycles=12)
        self.assertIn("pseudo_random", out)
        out = self.run_command("inject", category="apuf", nc=16, n=2, taps="random:4:1", fault_count=2, challenges=50, cycles=8)
        self.assertIn("changed rows", out)

    def test_collect_derives_instance_keys(self):
        options = dict(category="apuf", nc=16, n=2, taps="random:4:1", random=20, cycles=12, key_bytes=16)
        first = self.run_command("collect", **options).splitlines()[-1]
        again = self.run_command("collect", **options).splitlines()[-1]
        other = self.run_command("collect", instance_seed=1, **options).splitlines()[-1]
        self.assertRegex(first, r"^key [0-9a-f]{32}$")
        self.assertEqual(first, again)
        self.assertNotEqual(first, other)

    def test_exit_codes(self):
        with self.assertRaises(CommandError) as ctx:
            self.run_command("simulate", category="apuf", nc=4, n=1, challenge=["101"], cycles=2)
        self.assertEqual(ctx.exception.returncode, 2)
        with self.assertRaises(CommandError) as ctx:
            self.run_command("simulate", category="apuf", nc=4, n=1, taps="0:0:9", challenge=["1010"], cycles=2)
        self.assertEqual(ctx.exception.returncode, 3)
        with self.assertRaises(CommandError) as ctx:
            self.run_command("simulate", instance="/nonexistent/inst.json", challenge=["1010"], cycles=2)
        self.assertEqual(ctx.exception.returncode, 4)
