"""
Stuck-at and bit-flip faults at behavioral signal sites.

A fault is applied every cycle, after the clean value at its site is computed
and before that value propagates.
"""

import numpy as np

from feedpuf.exceptions import ConfigurationError

from .models import Fault, FaultKind, FaultSite, FaultSpec, FeedbackConfig, PufInstance, SiteKind

FAULT_STREAM = 3


def apply_fault(value, kind: FaultKind):
    """Works on a single bit or an array of bits."""
    if kind == FaultKind.STUCK_AT_0:
        return np.zeros_like(value) if isinstance(value, np.ndarray) else 0
    if kind == FaultKind.STUCK_AT_1:
        return np.ones_like(value) if isinstance(value, np.ndarray) else 1
    return 1 - value


def fault_sites(inst: PufInstance, fb: FeedbackConfig) -> list[FaultSite]:
    return (
        [FaultSite(SiteKind.RESPONSE_BIT, i) for i in range(inst.response_width)]
        + [FaultSite(SiteKind.FEEDBACK_XOR, t) for t in range(len(fb))]
        + [FaultSite(SiteKind.EFFECTIVE_CHALLENGE_BIT, p) for p in range(inst.challenge_width)]
    )


def check_fault_sites(spec: FaultSpec, inst: PufInstance, fb: FeedbackConfig) -> FaultSpec:
    valid = set(fault_sites(inst, fb))
    for fault in spec.faults:
        if fault.site not in valid:
            raise ConfigurationError(f"fault site {fault.site} does not exist on this device")
    return spec


def sample_fault_spec(inst: PufInstance, fb: FeedbackConfig, count: int, seed: int) -> FaultSpec:
    sites = fault_sites(inst, fb)
    if not 0 <= count <= len(sites):
        raise ConfigurationError(f"cannot place {count} faults on {len(sites)} sites")
    rng = np.random.default_rng([seed, FAULT_STREAM])
    chosen = rng.choice(len(sites), size=count, replace=False)
    kinds = list(FaultKind)
    picks = rng.integers(0, len(kinds), size=count)
    return FaultSpec(tuple(Fault(sites[i], kinds[k]) for i, k in zip(chosen, picks)))


def faulty_instance(inst: PufInstance, fb: FeedbackConfig, spec: FaultSpec):
    from .cyclic import CyclicPuf

    return CyclicPuf(inst, fb, spec)


def parse_fault_spec(text: str | None) -> FaultSpec:
    """Parse ``<site>:<index>:<kind>[,...]``, e.g. ``response_bit:0:stuck_at_1``."""
    text = (text or "").strip()
    if text in ("", "none"):
        return FaultSpec()
    faults = []
    for item in text.split(","):
        try:
            site, index, kind = item.split(":")
            faults.append(Fault(FaultSite(SiteKind(site), int(index)), FaultKind(kind)))
        except ValueError:
            raise ConfigurationError(f"bad fault {item!r}, expected site:index:kind")
    return FaultSpec(tuple(faults))
