"""
CRP and CRP-equivalent dataset generation, plus the challenge-grouped 80/20 split.
"""

import logging

import numpy as np

from feedpuf.exceptions import UsageError
from pufs.challenges import sample_challenges
from pufs.cyclic import CyclicPuf
from pufs.models import NOMINAL, EnvCondition, FaultSpec, FeedbackConfig, PufCategory, PufForm, PufInstance, VariationModel
from pufs.serializers import dump_fault_spec, instance_summary
from pufs.simulation import evaluate, sample_instance

from .models import CrpDataset, challenge_groups

logger = logging.getLogger(__name__)

SPLIT_STREAM = 5
TRAIN_FRACTION = 0.8
MIN_SPLIT_ROWS = 5


def _meta(inst: PufInstance, form: PufForm, num: int, challenge_seed: int, env: EnvCondition, **extra) -> dict:
    summary = instance_summary(inst)
    return {
        **summary,
        "form": str(form),
        "num_challenges": num,
        "challenge_seed": challenge_seed,
        "env": {"label": env.label, "delay_scale": env.delay_scale},
        "taps": [],
        "faults": [],
        "cycles": 1,
        "dedupe": False,
        "split_seed": None,
        **extra,
    }


def generate_acyclic(inst: PufInstance, num_challenges: int, challenge_seed: int, env: EnvCondition = NOMINAL) -> CrpDataset:
    """One noiseless row per distinct, uniformly drawn challenge."""
    challenges = sample_challenges(inst.challenge_width, num_challenges, challenge_seed)
    responses = evaluate(inst, challenges, env)
    logger.info("generated %d acyclic CRPs for %s", len(challenges), inst.instance_id)
    return CrpDataset(
        instance_id=inst.instance_id,
        challenges=challenges,
        responses=responses,
        cycle_index=np.ones(len(challenges), dtype=np.int64),
        faulty=False,
        meta=_meta(inst, PufForm.ACYCLIC, num_challenges, challenge_seed, env),
    )


def dedupe_rows(ds: CrpDataset) -> CrpDataset:
    """Keep the first row of every distinct (challenge, response) pair."""
    joined = np.concatenate([ds.challenges, ds.responses], axis=1)
    _, first = np.unique(joined, axis=0, return_index=True)
    return ds.subset(np.sort(first))


def generate_cyclic(
    device: CyclicPuf | PufInstance,
    num_challenges: int,
    cycles: int,
    challenge_seed: int,
    env: EnvCondition = NOMINAL,
    fb: FeedbackConfig | None = None,
    faults: FaultSpec | None = None,
    dedupe: bool = False,
) -> CrpDataset:
    """
    One CRP-equivalent row per cycle of every held challenge, challenge-major.

    Duplicate rows are kept unless ``dedupe`` is set; they carry the mode
    statistics of each challenge.
    """
    if not isinstance(device, CyclicPuf):
        device = CyclicPuf(device, fb, faults)
    inst = device.inst
    if cycles < 1:
        raise UsageError(f"cycles must be at least 1, got {cycles}")
    external = sample_challenges(inst.challenge_width, num_challenges, challenge_seed)
    trajectories = device.simulate(external, cycles, env)

    rows = num_challenges * cycles
    form = PufForm.FAULTY_CYCLIC if device.faulty else PufForm.CYCLIC
    ds = CrpDataset(
        instance_id=inst.instance_id,
        challenges=np.repeat(external, cycles, axis=0),
        responses=trajectories.reshape(rows, inst.response_width),
        cycle_index=np.tile(np.arange(1, cycles + 1, dtype=np.int64), num_challenges),
        faulty=device.faulty,
        meta=_meta(
            inst,
            form,
            num_challenges,
            challenge_seed,
            env,
            taps=[list(tap) for tap in device.fb.taps],
            faults=dump_fault_spec(device.faults),
            cycles=cycles,
            dedupe=dedupe,
        ),
    )
    if dedupe:
        ds = dedupe_rows(ds)
    logger.info("generated %d %s rows for %s (%d challenges x %d cycles)", len(ds), form, inst.instance_id, num_challenges, cycles)
    return ds


def split_80_20(ds: CrpDataset, seed: int) -> CrpDataset:
    """
    Seeded challenge-grouped split: every row of a held challenge lands on the
    same side. Shuffled groups go to the test side while that moves the test
    row count closer to 20% of all rows.
    """
    if len(ds) < MIN_SPLIT_ROWS:
        raise UsageError(f"need at least {MIN_SPLIT_ROWS} rows to split, got {len(ds)}")
    group, sizes = challenge_groups(ds.challenges)
    num_groups = len(sizes)
    if num_groups < 2:
        raise UsageError("need at least two distinct challenges to split")

    order = np.random.default_rng([seed, SPLIT_STREAM]).permutation(num_groups)
    shuffled = sizes[order]
    target = (1.0 - TRAIN_FRACTION) * len(ds)
    fits = np.cumsum(shuffled) - shuffled / 2.0 <= target
    taken = num_groups if fits.all() else int(np.argmin(fits))
    taken = min(max(taken, 1), num_groups - 1)

    in_test = np.isin(group, order[:taken])
    train_idx = np.flatnonzero(~in_test)
    test_idx = np.flatnonzero(in_test)
    logger.debug("split %d rows into %d/%d", len(ds), len(train_idx), len(test_idx))
    return ds.with_split(train_idx, test_idx, split_seed=seed)


def _fault_spec(items) -> FaultSpec:
    return FaultSpec(tuple(((item["site"], item["index"]), item["kind"]) for item in items))


def device_from_meta(meta: dict) -> tuple[CyclicPuf, EnvCondition]:
    """Re-sample the instance from its seeds and rewire it as described by ``meta``."""
    inst = sample_instance(
        PufCategory(meta["category"]),
        meta["challenge_width"],
        meta["response_width"],
        VariationModel(**meta["variation"]),
        meta["lot_seed"],
        meta["instance_seed"],
        meta.get("design"),
    )
    env = EnvCondition(**meta["env"]) if meta.get("env") else NOMINAL
    device = CyclicPuf(inst, FeedbackConfig(tuple(meta["taps"])), _fault_spec(meta["faults"]))
    return device, env


def replay_dataset(meta: dict) -> CrpDataset:
    """Regenerate a dataset from validated metadata alone."""
    device, env = device_from_meta(meta)
    if PufForm(meta["form"]) == PufForm.ACYCLIC:
        ds = generate_acyclic(device.inst, meta["num_challenges"], meta["challenge_seed"], env)
    else:
        ds = generate_cyclic(device, meta["num_challenges"], meta["cycles"], meta["challenge_seed"], env, dedupe=meta["dedupe"])
    if meta.get("split_seed") is not None:
        ds = split_80_20(ds, meta["split_seed"])
    return ds
