"""
Domain types for simulated PUF devices.

Nothing here is stored in the database; the classes are plain immutable values.
Choice enums use Django's ``TextChoices`` so that serializers and command-line
flags share one vocabulary.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from django.db import models

from feedpuf.exceptions import ConfigurationError

from .bits import bits_to_string


class PufCategory(models.TextChoices):
    ARBITER = "arbiter", "APUF"
    RING_OSCILLATOR = "ring_oscillator", "ROPUF"
    BUTTERFLY = "butterfly", "BPUF"

    @classmethod
    def from_alias(cls, value: str) -> "PufCategory":
        aliases = {"apuf": cls.ARBITER, "ropuf": cls.RING_OSCILLATOR, "bpuf": cls.BUTTERFLY}
        value = value.lower()
        if value in aliases:
            return aliases[value]
        try:
            return cls(value)
        except ValueError:
            raise ConfigurationError(f"unknown PUF category {value!r}")


class PufForm(models.TextChoices):
    ACYCLIC = "acyclic", "Acyclic"
    CYCLIC = "cyclic", "Cyclic"
    FAULTY_CYCLIC = "faulty_cyclic", "Faulty cyclic"


class PufType(models.TextChoices):
    WEAK = "weak", "Weak"
    STRONG = "strong", "Strong"


# weak PUFs are evaluated over their whole challenge space
WEAK_CHALLENGE_LIMIT = 16


@dataclass(frozen=True)
class VariationModel:
    mu: float = 1.0
    sigma_random: float = 0.05
    sigma_systematic: float = 0.0
    jitter_sigma: float = 0.005

    def __post_init__(self):
        if not self.mu > 0:
            raise ConfigurationError(f"nominal delay mu must be positive, got {self.mu}")
        for name in ("sigma_random", "sigma_systematic", "jitter_sigma"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be non-negative")

    @property
    def delay_floor(self) -> float:
        return 0.01 * self.mu


@dataclass(frozen=True)
class EnvCondition:
    delay_scale: float = 1.0
    label: str = "nominal"

    def __post_init__(self):
        if not self.delay_scale > 0:
            raise ConfigurationError(f"delay_scale must be positive, got {self.delay_scale}")
        if self.label == "nominal" and self.delay_scale != 1.0:
            raise ConfigurationError("the nominal condition has delay_scale 1.0")


NOMINAL = EnvCondition()


@dataclass(frozen=True, eq=False)
class PufInstance:
    """
    One simulated chip.

    ``params`` layout per category:
      arbiter          delays[n, n_c, 4]: top-straight, top-cross, bottom-straight, bottom-cross
      ring_oscillator  delays[n, 2, n_c, 2]: ring A/B, stage, inverter for challenge bit 0/1
      butterfly        mismatch[n, n_c + 1], metastability_sigma[n]
    """

    category: PufCategory
    challenge_width: int
    response_width: int
    variation: VariationModel
    lot_seed: int
    instance_seed: int
    params: dict = field(repr=False)
    # set for a separately placed netlist, which carries its own systematic draw
    design: int | None = None

    @property
    def instance_id(self) -> str:
        suffix = "" if self.design is None else f"-d{self.design}"
        return f"{self.category}-{self.lot_seed}-{self.instance_seed}{suffix}"

    def same_params(self, other: "PufInstance") -> bool:
        return self.params.keys() == other.params.keys() and all(
            np.array_equal(self.params[key], other.params[key]) for key in self.params
        )


class Tap(NamedTuple):
    resp_idx: int
    ch_idx: int
    target_pos: int

    def __str__(self):
        return f"{self.resp_idx}:{self.ch_idx}:{self.target_pos}"


@dataclass(frozen=True)
class FeedbackConfig:
    taps: tuple[Tap, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "taps", tuple(Tap(*map(int, tap)) for tap in self.taps))
        targets = [tap.target_pos for tap in self.taps]
        if len(set(targets)) != len(targets):
            raise ConfigurationError("feedback target positions must be distinct")

    @classmethod
    def empty(cls) -> "FeedbackConfig":
        return cls(())

    def __len__(self):
        return len(self.taps)

    def __str__(self):
        return ",".join(str(tap) for tap in self.taps)

    def validate_for(self, challenge_width: int, response_width: int) -> "FeedbackConfig":
        for tap in self.taps:
            if not 0 <= tap.resp_idx < response_width:
                raise ConfigurationError(f"tap {tap}: response index out of range")
            if not 0 <= tap.ch_idx < challenge_width:
                raise ConfigurationError(f"tap {tap}: challenge index out of range")
            if not 0 <= tap.target_pos < challenge_width:
                raise ConfigurationError(f"tap {tap}: target position out of range")
        return self


@dataclass(frozen=True, eq=False)
class Trajectory:
    challenge: np.ndarray
    responses: np.ndarray  # (c, n)

    @property
    def cycles(self) -> int:
        return self.responses.shape[0]

    def response_strings(self) -> list[str]:
        return [bits_to_string(row) for row in self.responses]


class ModeKind(models.TextChoices):
    BINARY = "binary", "Binary"
    STEADY_STATE = "steady_state", "Steady-state"
    OSCILLATING = "oscillating", "Oscillating"
    PSEUDO_RANDOM = "pseudo_random", "Pseudo-random"


@dataclass(frozen=True)
class ResponseMode:
    kind: ModeKind
    transient_len: int | None = None
    period: int | None = None

    def __post_init__(self):
        if self.kind == ModeKind.STEADY_STATE and (self.transient_len or 0) < 1:
            raise ConfigurationError("steady-state mode needs a transient of at least one cycle")
        if self.kind == ModeKind.OSCILLATING and (self.period or 0) < 2:
            raise ConfigurationError("oscillating mode needs a period of at least two")

    @classmethod
    def binary(cls):
        return cls(ModeKind.BINARY)

    @classmethod
    def steady_state(cls, transient_len: int):
        return cls(ModeKind.STEADY_STATE, transient_len, 1)

    @classmethod
    def oscillating(cls, transient_len: int, period: int):
        return cls(ModeKind.OSCILLATING, transient_len, period)

    @classmethod
    def pseudo_random(cls):
        return cls(ModeKind.PSEUDO_RANDOM)

    def __str__(self):
        if self.kind == ModeKind.STEADY_STATE:
            return f"{self.kind}(transient={self.transient_len})"
        if self.kind == ModeKind.OSCILLATING:
            return f"{self.kind}(transient={self.transient_len}, period={self.period})"
        return str(self.kind)


@dataclass(frozen=True)
class Crm:
    challenge: str
    mode: ResponseMode
    response_set: tuple[str, ...]

    def __post_init__(self):
        if not self.response_set:
            raise ConfigurationError("a CRM needs at least one response")
        if self.mode.kind == ModeKind.BINARY and len(self.response_set) != 1:
            raise ConfigurationError("a binary CRM has exactly one response")


class SiteKind(models.TextChoices):
    RESPONSE_BIT = "response_bit", "Response bit"
    FEEDBACK_XOR = "feedback_xor", "Feedback XOR output"
    EFFECTIVE_CHALLENGE_BIT = "effective_challenge_bit", "Effective challenge bit"


class FaultKind(models.TextChoices):
    STUCK_AT_0 = "stuck_at_0", "Stuck-at-0"
    STUCK_AT_1 = "stuck_at_1", "Stuck-at-1"
    BIT_FLIP = "bit_flip", "Bit flip"


class FaultSite(NamedTuple):
    kind: SiteKind
    index: int

    def __str__(self):
        return f"{self.kind}[{self.index}]"


class Fault(NamedTuple):
    site: FaultSite
    kind: FaultKind


# (earlier, later) -> net effect; None means the site is clean again
_COMPOSED_KIND = {
    (FaultKind.STUCK_AT_0, FaultKind.BIT_FLIP): FaultKind.STUCK_AT_1,
    (FaultKind.STUCK_AT_1, FaultKind.BIT_FLIP): FaultKind.STUCK_AT_0,
    (FaultKind.BIT_FLIP, FaultKind.BIT_FLIP): None,
}


@dataclass(frozen=True)
class FaultSpec:
    faults: tuple[Fault, ...] = ()

    def __post_init__(self):
        normalized = tuple(
            Fault(FaultSite(SiteKind(site[0]), int(site[1])), FaultKind(kind))
            for site, kind in self.faults
        )
        object.__setattr__(self, "faults", normalized)
        sites = [fault.site for fault in normalized]
        if len(set(sites)) != len(sites):
            raise ConfigurationError("at most one fault per site")

    def __len__(self):
        return len(self.faults)

    def __bool__(self):
        return bool(self.faults)

    def at(self, kind: SiteKind) -> list[Fault]:
        return [fault for fault in self.faults if fault.site.kind == kind]

    def compose(self, later: "FaultSpec") -> "FaultSpec":
        """The fault spec equivalent to applying ``self`` and then ``later`` at every site."""
        merged = {fault.site: fault.kind for fault in self.faults}
        for site, kind in later.faults:
            if site not in merged:
                merged[site] = kind
                continue
            # a later stuck-at overrides whatever came before it
            net = _COMPOSED_KIND.get((merged[site], kind), kind)
            if net is None:
                del merged[site]
            else:
                merged[site] = net
        return FaultSpec(tuple(Fault(site, kind) for site, kind in merged.items()))
