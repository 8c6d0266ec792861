"""
Behavioral models of the three acyclic delay-based PUFs.

Instances are sampled from a variation model: every delay is
``mu + systematic + random`` clamped to ``0.01 * mu``. The systematic draw is
shared by all instances of a lot, the random draw is per instance, and jitter
is drawn per evaluation from a caller-supplied generator.
"""

import logging

import numpy as np

from feedpuf.exceptions import ConfigurationError

from .bits import as_batch, parity_transform
from .models import NOMINAL, EnvCondition, PufCategory, PufInstance, VariationModel

logger = logging.getLogger(__name__)

# stream tags keep lot, instance and noise draws independent for equal seeds
SYSTEMATIC_STREAM = 0
RANDOM_STREAM = 1


def param_shapes(category: PufCategory, n_c: int, n: int) -> tuple[int, ...]:
    if category == PufCategory.ARBITER:
        return (n, n_c, 4)
    if category == PufCategory.RING_OSCILLATOR:
        return (n, 2, n_c, 2)
    # butterfly: two latch-delay vectors whose difference is the mismatch
    return (2, n, n_c + 1)


def _check_seed(name: str, seed) -> int:
    if not isinstance(seed, (int, np.integer)) or seed < 0:
        raise ConfigurationError(f"{name} must be a non-negative integer, got {seed!r}")
    return int(seed)


def sample_delays(
    shape, vm: VariationModel, lot_seed: int, instance_seed: int, design: int | None = None
) -> np.ndarray:
    # instances of one design share its placement bias; a separately placed design draws its own
    entropy = [lot_seed, SYSTEMATIC_STREAM] if design is None else [lot_seed, SYSTEMATIC_STREAM, design]
    systematic = np.random.default_rng(entropy).normal(
        0.0, vm.sigma_systematic, size=shape
    )
    random = np.random.default_rng([instance_seed, RANDOM_STREAM]).normal(
        0.0, vm.sigma_random, size=shape
    )
    return np.maximum(vm.mu + systematic + random, vm.delay_floor)


def sample_instance(
    category: PufCategory,
    n_c: int,
    n: int,
    vm: VariationModel,
    lot_seed: int,
    instance_seed: int,
    design: int | None = None,
) -> PufInstance:
    category = PufCategory(category)
    if n_c < 1 or n < 1:
        raise ConfigurationError(f"dimensions must be at least 1, got n_c={n_c}, n={n}")
    lot_seed = _check_seed("lot_seed", lot_seed)
    instance_seed = _check_seed("instance_seed", instance_seed)
    if design is not None:
        design = _check_seed("design", design)

    delays = sample_delays(param_shapes(category, n_c, n), vm, lot_seed, instance_seed, design)
    if category == PufCategory.BUTTERFLY:
        params = {
            "mismatch": delays[0] - delays[1],
            "metastability_sigma": np.full(n, vm.jitter_sigma * vm.mu * np.sqrt(n_c + 1)),
        }
    else:
        params = {"delays": delays}
    inst = PufInstance(category, n_c, n, vm, lot_seed, instance_seed, params, design)
    logger.debug("sampled %s (n_c=%d, n=%d)", inst.instance_id, n_c, n)
    return inst


def _arbiter_race(inst, batch, env, rng):
    delays = inst.params["delays"] * env.delay_scale
    shape = (batch.shape[0], inst.response_width)
    top = np.zeros(shape)
    bottom = np.zeros(shape)
    for stage in range(inst.challenge_width):
        crossed = batch[:, stage : stage + 1].astype(bool)
        top_straight, top_cross, bottom_straight, bottom_cross = delays[:, stage, :].T
        top, bottom = (
            np.where(crossed, bottom + top_cross, top + top_straight),
            np.where(crossed, top + bottom_cross, bottom + bottom_straight),
        )
    if rng is not None:
        sd = inst.variation.jitter_sigma * inst.variation.mu
        top = top + rng.normal(0.0, sd, size=shape)
        bottom = bottom + rng.normal(0.0, sd, size=shape)
    # exact ties resolve to 0
    return top < bottom


def _ring_oscillator(inst, batch, env, rng):
    delays = inst.params["delays"] * env.delay_scale
    n = inst.response_width
    base = delays[..., 0].sum(axis=-1)  # (n, 2)
    swing = (delays[..., 1] - delays[..., 0]).reshape(n * 2, inst.challenge_width)
    periods = 2.0 * (base.reshape(1, n * 2) + batch.astype(np.float64) @ swing.T)
    periods = periods.reshape(batch.shape[0], n, 2)
    if rng is not None:
        sd = inst.variation.jitter_sigma * inst.variation.mu
        periods = periods + rng.normal(0.0, sd, size=periods.shape)
    freq = 1.0 / periods
    return freq[..., 0] > freq[..., 1]


def _butterfly(inst, batch, env, rng):
    mismatch = inst.params["mismatch"] * env.delay_scale
    settle = parity_transform(batch) @ mismatch.T
    if rng is not None:
        settle = settle + rng.normal(size=settle.shape) * inst.params["metastability_sigma"]
    return settle > 0


_MODELS = {
    PufCategory.ARBITER: _arbiter_race,
    PufCategory.RING_OSCILLATOR: _ring_oscillator,
    PufCategory.BUTTERFLY: _butterfly,
}


def evaluate(
    inst: PufInstance,
    challenges,
    env: EnvCondition = NOMINAL,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Responses ``(N, n)`` for a batch of challenges ``(N, n_c)``; noiseless when ``rng`` is None."""
    batch = as_batch(challenges, inst.challenge_width)
    return _MODELS[inst.category](inst, batch, env, rng).astype(np.uint8)


def eval_acyclic(inst: PufInstance, ch, env: EnvCondition = NOMINAL, noise_seed=None) -> np.ndarray:
    rng = None if noise_seed is None else np.random.default_rng(noise_seed)
    return evaluate(inst, np.asarray(ch, dtype=np.uint8).reshape(1, -1), env, rng)[0]


def linear_weights(inst: PufInstance) -> np.ndarray:
    """
    Additive delay-difference model of an arbiter instance, shape ``(n, n_c + 1)``.

    The structural race answers 1 exactly when ``w @ parity_transform(ch) > 0``.
    """
    if inst.category != PufCategory.ARBITER:
        raise ConfigurationError("the linear delay model only exists for arbiter PUFs")
    delays = inst.params["delays"]
    straight = delays[..., 0] - delays[..., 2]
    crossed = delays[..., 1] - delays[..., 3]
    half_diff = (straight - crossed) / 2.0
    half_sum = (straight + crossed) / 2.0
    weights = np.zeros((inst.response_width, inst.challenge_width + 1))
    weights[:, :-1] -= half_diff
    weights[:, 1:] -= half_sum
    return weights
