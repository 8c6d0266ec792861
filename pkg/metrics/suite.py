"""
Metric suites over a population of instances, and the functional-metrics
comparison of acyclic and cyclic designs.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from feedpuf.exceptions import ConfigurationError, UsageError
from feedpuf.tables import format_table, pct
from pufs.challenges import challenge_space
from pufs.cyclic import CyclicPuf, sample_feedback
from pufs.models import NOMINAL, EnvCondition, FeedbackConfig, PufCategory, PufInstance, PufType, VariationModel
from pufs.simulation import evaluate, sample_instance

from .functional import abv_response, pairwise_uniqueness, reliability, uniformity, uniqueness

logger = logging.getLogger(__name__)

METRIC_NOISE_STREAM = 6


@dataclass(frozen=True)
class MetricConfig:
    k: int = 10
    m: int = 256
    s: int = 8
    c: int = 64

    def __post_init__(self):
        if self.k < 2:
            raise UsageError(f"uniqueness needs at least two instances, got k={self.k}")
        for name in ("m", "s", "c"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be at least 1, got {getattr(self, name)}")


@dataclass
class MetricReport:
    design: str
    uniqueness_pct: float
    uniformity_pct: float
    reliability_pct: float
    # {"pair": [i, j], "uniqueness_pct"} per instance pair
    pairwise_uniqueness: list = field(default_factory=list)
    instance_uniformity: list = field(default_factory=list)
    instance_reliability: list = field(default_factory=list)
    # {"env", "reliability_pct"} per condition sample, averaged over instances
    sample_reliability: list = field(default_factory=list)

    def __post_init__(self):
        for name in ("uniqueness_pct", "uniformity_pct", "reliability_pct"):
            assert 0.0 <= getattr(self, name) <= 100.0, name


def sample_conditions(envs, s: int) -> list[EnvCondition]:
    """``s`` condition samples, cycling through the sweep."""
    envs = list(envs) or [NOMINAL]
    return [envs[i % len(envs)] for i in range(s)]


def _sample_rng(noise_seed, instance_index: int, sample_index: int):
    if noise_seed is None:
        return None
    return np.random.default_rng([noise_seed, METRIC_NOISE_STREAM, instance_index, sample_index])


def _run_suite(design, instances, respond, cfg: MetricConfig, envs, noise_seed) -> MetricReport:
    if len(instances) != cfg.k:
        raise UsageError(f"expected {cfg.k} instances, got {len(instances)}")
    # the reference is taken at nominal conditions with jitter off
    reference = np.stack([respond(inst, NOMINAL, None) for inst in instances])
    conditions = sample_conditions(envs, cfg.s)
    samples = np.stack(
        [
            np.stack([respond(inst, env, _sample_rng(noise_seed, i, j)) for j, env in enumerate(conditions)])
            for i, inst in enumerate(instances)
        ]
    )  # (k, s, m, n)

    report = MetricReport(
        design=design,
        uniqueness_pct=uniqueness(reference),
        uniformity_pct=uniformity(reference),
        reliability_pct=reliability(reference, samples.swapaxes(0, 1)),
        pairwise_uniqueness=[
            {"pair": [i, j], "uniqueness_pct": value} for i, j, value in pairwise_uniqueness(reference)
        ],
        instance_uniformity=[uniformity(ref) for ref in reference],
        instance_reliability=[reliability(ref, sampled) for ref, sampled in zip(reference, samples)],
        sample_reliability=[
            {"env": env.label, "reliability_pct": reliability(reference, samples[:, j])}
            for j, env in enumerate(conditions)
        ],
    )
    logger.info(
        "%s: uniqueness %.2f%%, uniformity %.2f%%, reliability %.2f%%",
        design,
        report.uniqueness_pct,
        report.uniformity_pct,
        report.reliability_pct,
    )
    return report


def acyclic_metric_suite(
    instances: list[PufInstance],
    challenges,
    cfg: MetricConfig,
    envs=(NOMINAL,),
    noise_seed=None,
    design: str | None = None,
) -> MetricReport:
    """One evaluation per (instance, challenge, condition sample)."""
    design = design or instances[0].category.label

    def respond(inst, env, rng):
        return evaluate(inst, challenges, env, rng)

    return _run_suite(design, instances, respond, cfg, envs, noise_seed)


def cyclic_metric_suite(
    instances: list[PufInstance],
    fb: FeedbackConfig,
    challenges,
    cfg: MetricConfig,
    envs=(NOMINAL,),
    noise_seed=None,
    design: str | None = None,
) -> MetricReport:
    """
    Metrics over ABV-thresholded responses: every challenge is held for ``cfg.c``
    cycles and each response bit is reduced to its average value.
    """
    devices = [CyclicPuf(inst, fb) for inst in instances]
    return device_metric_suite(devices, challenges, cfg, envs, noise_seed, design)


def device_metric_suite(
    devices: list[CyclicPuf],
    challenges,
    cfg: MetricConfig,
    envs=(NOMINAL,),
    noise_seed=None,
    design: str | None = None,
) -> MetricReport:
    """As ``cyclic_metric_suite``, for devices that may each carry their own feedback wiring."""
    design = design or f"Cyc{devices[0].inst.category.label}"

    def respond(device, env, rng):
        return abv_response(device.simulate(challenges, cfg.c, env, rng))

    return _run_suite(design, devices, respond, cfg, envs, noise_seed)


def lot_instances(category, n_c: int, n: int, vm: VariationModel, lot_seed: int, k: int, first_seed: int = 0):
    """``k`` instances of one lot, instance seeds ``first_seed .. first_seed + k - 1``."""
    return [sample_instance(category, n_c, n, vm, lot_seed, first_seed + i) for i in range(k)]


def design_lot(
    category,
    n_c: int,
    n: int,
    vm: VariationModel,
    lot_seed: int,
    k: int,
    f: int,
    feedback_seed: int,
    first_seed: int = 0,
) -> list[CyclicPuf]:
    """
    ``k`` cyclic devices that are separately generated netlists: each draws its own
    ``f`` feedback taps and, being placed on its own, its own systematic bias.
    """
    devices = []
    for i in range(first_seed, first_seed + k):
        inst = sample_instance(category, n_c, n, vm, lot_seed, i, design=i)
        devices.append(CyclicPuf(inst, sample_feedback(n_c, n, f, feedback_seed, design=i)))
    return devices


def run_table2_experiment(config: dict) -> list[MetricReport]:
    """
    Acyclic and cyclic metric reports for each category over one shared lot.

    The acyclic instances are copies of one placed macro and share its systematic
    bias. With ``distinct_designs`` every cyclic instance is a netlist of its own,
    with its own taps and placement; otherwise the cyclic side rewires the acyclic
    instances with one shared set of taps.

    ``config`` is validated ``Table2ConfigSerializer`` data.
    """
    cfg = MetricConfig(config["k"], config["m"], config["s"], config["c"])
    n_c, n = config["challenge_width"], config["response_width"]
    puf_type = config.get("puf_type") or (PufType.WEAK if n_c <= 16 else PufType.STRONG)
    challenges = challenge_space(n_c, puf_type, cfg.m, config["challenge_seed"])
    envs = [EnvCondition(env["delay_scale"], env["label"]) for env in config["envs"]]
    distinct = config.get("distinct_designs", True)

    reports = []
    for name in config["categories"]:
        category = PufCategory(name)
        variation = {**config["variation"], **config["variation_overrides"].get(name, {})}
        vm = VariationModel(**variation)
        f = config["feedback"][name]
        instances = lot_instances(category, n_c, n, vm, config["lot_seed"], cfg.k)
        if distinct:
            devices = design_lot(category, n_c, n, vm, config["lot_seed"], cfg.k, f, config["feedback_seed"])
        else:
            fb = sample_feedback(n_c, n, f, config["feedback_seed"])
            devices = [CyclicPuf(inst, fb) for inst in instances]
        logger.info(
            "table2 %s: %d instances, %d challenges, %d taps (%s)",
            category.label,
            cfg.k,
            len(challenges),
            f,
            "per design" if distinct else devices[0].fb,
        )
        reports.append(acyclic_metric_suite(instances, challenges, cfg, envs, config["noise_seed"]))
        reports.append(device_metric_suite(devices, challenges, cfg, envs, config["noise_seed"]))
    return reports


def metric_table(reports) -> str:
    rows = [(r.design, pct(r.uniqueness_pct), pct(r.uniformity_pct), pct(r.reliability_pct)) for r in reports]
    return format_table(["PUF design", "Uniqueness", "Uniformity", "Reliability"], rows)
