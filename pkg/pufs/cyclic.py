"""
Feedback-augmented PUFs and their response modes.

Selected response bits are XORed with external challenge bits and routed back
into challenge inputs. With the external challenge held, the device is iterated
as a synchronous system: the response registered in cycle ``i - 1`` drives the
feedback of cycle ``i``, and the register powers on at all zeros.
"""

import hashlib
import hmac
import logging
from collections import Counter

import numpy as np

from feedpuf.exceptions import ConfigurationError, InfeasibleError, UsageError

from .bits import as_batch, bits_from_string, bits_to_string
from .faults import apply_fault, check_fault_sites
from .models import (
    NOMINAL,
    Crm,
    EnvCondition,
    FaultSpec,
    FeedbackConfig,
    ModeKind,
    PufInstance,
    ResponseMode,
    SiteKind,
    Tap,
    Trajectory,
)
from .simulation import evaluate

logger = logging.getLogger(__name__)

FEEDBACK_STREAM = 2
KEY_INFO = b"feedpuf-crm-key"
DIGEST_SIZE = hashlib.sha256().digest_size


class CyclicPuf:
    """An acyclic core plus feedback wiring and an optional fault spec. Immutable."""

    def __init__(self, inst: PufInstance, fb: FeedbackConfig | None = None, faults: FaultSpec | None = None):
        self.inst = inst
        self.fb = (fb or FeedbackConfig.empty()).validate_for(inst.challenge_width, inst.response_width)
        self.faults = check_fault_sites(faults or FaultSpec(), inst, self.fb)
        taps = self.fb.taps
        self._resp_idx = np.array([tap.resp_idx for tap in taps], dtype=np.intp)
        self._ch_idx = np.array([tap.ch_idx for tap in taps], dtype=np.intp)
        self._target = np.array([tap.target_pos for tap in taps], dtype=np.intp)

    @property
    def faulty(self) -> bool:
        return bool(self.faults)

    def _inject(self, values: np.ndarray, kind: SiteKind) -> np.ndarray:
        for site, fault_kind in self.faults.at(kind):
            values[:, site.index] = apply_fault(values[:, site.index], fault_kind)
        return values

    def effective_challenges(self, ext: np.ndarray, prev: np.ndarray) -> np.ndarray:
        effective = ext.copy()
        if len(self.fb):
            xor_out = ext[:, self._ch_idx] ^ prev[:, self._resp_idx]
            effective[:, self._target] = self._inject(xor_out, SiteKind.FEEDBACK_XOR)
        return self._inject(effective, SiteKind.EFFECTIVE_CHALLENGE_BIT)

    def step(self, ext, prev, env: EnvCondition = NOMINAL, rng=None) -> np.ndarray:
        raw = evaluate(self.inst, self.effective_challenges(ext, prev), env, rng)
        # a faulted response bit is both emitted and fed back
        return self._inject(raw, SiteKind.RESPONSE_BIT)

    def simulate(self, challenges, cycles: int, env: EnvCondition = NOMINAL, rng=None) -> np.ndarray:
        """Trajectories ``(N, cycles, n)`` for a batch of held external challenges."""
        if cycles < 1:
            raise ConfigurationError(f"cycles must be at least 1, got {cycles}")
        ext = as_batch(challenges, self.inst.challenge_width)
        out = np.empty((ext.shape[0], cycles, self.inst.response_width), dtype=np.uint8)
        prev = np.zeros((ext.shape[0], self.inst.response_width), dtype=np.uint8)
        for cycle in range(cycles):
            prev = self.step(ext, prev, env, rng)
            out[:, cycle] = prev
        return out

    def trajectory(self, ext, cycles: int, env: EnvCondition = NOMINAL, noise_seed=None) -> Trajectory:
        ext = np.asarray(ext, dtype=np.uint8)
        rng = None if noise_seed is None else np.random.default_rng(noise_seed)
        return Trajectory(ext.copy(), self.simulate(ext.reshape(1, -1), cycles, env, rng)[0])


def effective_challenge(ext, prev_resp, fb: FeedbackConfig) -> np.ndarray:
    ext = np.asarray(ext, dtype=np.uint8)
    prev_resp = np.asarray(prev_resp, dtype=np.uint8)
    fb.validate_for(ext.size, prev_resp.size)
    result = ext.copy()
    for tap in fb.taps:
        result[tap.target_pos] = ext[tap.ch_idx] ^ prev_resp[tap.resp_idx]
    return result


def simulate_trajectory(
    inst: PufInstance,
    fb: FeedbackConfig,
    ext,
    c: int,
    env: EnvCondition = NOMINAL,
    noise_seed=None,
) -> Trajectory:
    return CyclicPuf(inst, fb).trajectory(ext, c, env, noise_seed)


def classify_responses(responses: np.ndarray) -> ResponseMode:
    """Classify a ``(c, n)`` response sequence by its first state recurrence."""
    first_seen = {}
    for j, row in enumerate(responses, start=1):
        key = row.tobytes()
        if key in first_seen:
            i = first_seen[key]
            period = j - i
            if period == 1:
                return ResponseMode.binary() if i == 1 else ResponseMode.steady_state(i - 1)
            return ResponseMode.oscillating(i - 1, period)
        first_seen[key] = j
    return ResponseMode.pseudo_random()


def classify_mode(traj: Trajectory) -> ResponseMode:
    return classify_responses(traj.responses)


def replay_matches(traj: Trajectory, mode: ResponseMode) -> bool:
    """Re-expand ``mode`` from the trajectory head and compare it with the whole trajectory."""
    responses = traj.responses
    if mode.kind == ModeKind.PSEUDO_RANDOM:
        return len({row.tobytes() for row in responses}) == traj.cycles
    transient = mode.transient_len or 0
    period = mode.period or 1
    cycle = np.arange(traj.cycles)
    source = np.where(cycle < transient, cycle, transient + (cycle - transient) % period)
    return bool(np.array_equal(responses[source], responses))


def distinct_responses(responses: np.ndarray) -> tuple[str, ...]:
    ordered = dict.fromkeys(bits_to_string(row) for row in responses)
    return tuple(ordered)


def crm_from_trajectory(traj: Trajectory) -> Crm:
    mode = classify_mode(traj)
    if mode.period is not None:
        # a noiseless trajectory lives on at most 2^n response vectors
        assert mode.transient_len + mode.period <= 2 ** traj.responses.shape[1]
    return Crm(bits_to_string(traj.challenge), mode, distinct_responses(traj.responses))


def collect_crm(
    inst: PufInstance | CyclicPuf,
    fb: FeedbackConfig | None,
    ext,
    c: int,
    env: EnvCondition = NOMINAL,
) -> Crm:
    device = inst if isinstance(inst, CyclicPuf) else CyclicPuf(inst, fb)
    return crm_from_trajectory(device.trajectory(ext, c, env))


def collect_crms(device: CyclicPuf, challenges, c: int, env: EnvCondition = NOMINAL) -> list[Crm]:
    ext = as_batch(challenges, device.inst.challenge_width)
    trajectories = device.simulate(ext, c, env)
    return [crm_from_trajectory(Trajectory(ch, traj)) for ch, traj in zip(ext, trajectories)]


def mode_histogram(modes) -> dict[str, int]:
    counts = Counter(mode.kind for mode in modes)
    return {kind.value: counts.get(kind, 0) for kind in ModeKind}


def crm_matches(enrolled: Crm, observed: Trajectory, min_agreement: float = 0.9) -> bool:
    """Accept a device if enough of its observed responses fall in the enrolled response set."""
    if bits_to_string(observed.challenge) != enrolled.challenge:
        return False
    allowed = set(enrolled.response_set)
    hits = sum(1 for text in observed.response_strings() if text in allowed)
    return hits >= min_agreement * observed.cycles


def derive_key(crms, length: int = 32, salt: bytes = b"", info: bytes = KEY_INFO) -> bytes:
    """
    Device-specific key material from pseudo-random CRMs.

    Each pseudo-random CRM contributes its challenge and its response set in order
    of first appearance; the material is extracted and expanded with HMAC-SHA256.
    Binary, steady-state and oscillating CRMs are left out.
    """
    if not 1 <= length <= 255 * DIGEST_SIZE:
        raise ConfigurationError(f"key length must be 1..{255 * DIGEST_SIZE} bytes, got {length}")
    material = sorted(
        f"{crm.challenge}:{','.join(crm.response_set)}" for crm in crms if crm.mode.kind == ModeKind.PSEUDO_RANDOM
    )
    if not material:
        raise InfeasibleError("no pseudo-random CRMs to derive a key from")
    prk = hmac.new(salt or bytes(DIGEST_SIZE), "|".join(material).encode(), hashlib.sha256).digest()
    okm, block = b"", b""
    counter = 1
    while len(okm) < length:
        block = hmac.new(prk, block + info + bytes([counter]), hashlib.sha256).digest()
        okm += block
        counter += 1
    logger.debug("derived a %d-byte key from %d pseudo-random CRMs", length, len(material))
    return okm[:length]


def feedback_reachable(fb: FeedbackConfig, n: int, j: int) -> set[int]:
    # every core response bit reads every challenge position
    if any(tap.resp_idx == j for tap in fb.taps):
        return set(range(n))
    return {j}


def sample_feedback(n_c: int, n: int, f: int, seed: int, design: int | None = None) -> FeedbackConfig:
    if not 0 <= f <= n_c:
        raise ConfigurationError(f"cannot place {f} feedback taps on {n_c} challenge inputs")
    rng = np.random.default_rng([seed, FEEDBACK_STREAM] if design is None else [seed, FEEDBACK_STREAM, design])
    targets = rng.choice(n_c, size=f, replace=False)
    resp = rng.integers(0, n, size=f)
    chal = rng.integers(0, n_c, size=f)
    return FeedbackConfig(tuple(Tap(int(r), int(c), int(p)) for r, c, p in zip(resp, chal, targets)))


def parse_taps(text: str | None, n_c: int, n: int) -> FeedbackConfig:
    """Parse ``r:c:p,...``, ``random:<f>:<seed>`` or an empty/``none`` spec."""
    text = (text or "").strip()
    if text in ("", "none"):
        return FeedbackConfig.empty()
    if text.startswith("random:"):
        try:
            _, count, seed = text.split(":")
            count, seed = int(count), int(seed)
        except ValueError:
            raise ConfigurationError(f"bad random tap spec {text!r}, expected random:<f>:<seed>")
        return sample_feedback(n_c, n, count, seed)
    try:
        taps = tuple(Tap(*(int(part) for part in item.split(":"))) for item in text.split(","))
    except (TypeError, ValueError):
        raise ConfigurationError(f"bad tap spec {text!r}, expected resp:ch:pos[,...]")
    return FeedbackConfig(taps).validate_for(n_c, n)


def parse_challenge(text: str, n_c: int) -> np.ndarray:
    bits = bits_from_string(text)
    if bits.size != n_c:
        raise UsageError(f"challenge {text!r} is not {n_c} bits wide")
    return bits
