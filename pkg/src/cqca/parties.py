"""Protocol state machines, the hybrid packet codec, and transcripts.

A session runs between a source station (Alice) that emits and announces,
and two receiving stations (Bob, Charlie) that pick a per-round setting,
report their detector read-outs on sampled rounds, and sift a shared key
from the D1 announcements.  Classical control traffic and the per-round
quantum slots ride in a common packet format with a fixed header, a typed
body, and a terminator-plus-checksum footer.

Every public announcement covers every round (including NULL outcomes);
disclosure of settings and station read-outs happens only for the jointly
sampled test fraction.  Key bits derive from each station's own setting
plus the announcement alone, so the keys are reconstructible from a
censored transcript.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import metrics
from .adversary import (
    EveRecord,
    alice_double_path,
    alice_single_path,
    eve_extract_bit,
)
from .channel import (
    AttackConfig,
    AttackKind,
    AttackTarget,
    ChannelConfig,
    return_leg,
    transmit_onward,
)
from .photonics import (
    Action,
    Arm,
    EveProbePair,
    JointState,
    Outcome,
    apply_party_action,
    emit,
    recombine_at_bs,
    sample_detection,
)

MAGIC = b"\xc1\xca"
VERSION = 1
TERMINATOR = 0x03  # two terminator bits, padded into one octet
_HEADER_LEN = 12
_FOOTER_LEN = 2


class PartyId(Enum):
    ALICE = 1
    BOB = 2
    CHARLIE = 3
    EVE = 4  # never a legal packet endpoint


_WIRE_PARTIES = {PartyId.ALICE, PartyId.BOB, PartyId.CHARLIE}


class BodyType(Enum):
    QUANTUM_SLOT = 1
    CONTROL = 2
    ANNOUNCE = 3
    DISCLOSE = 4


class ControlOp(Enum):
    REQUEST = 1
    ACK = 2
    INTIMATE = 3
    CONSENT = 4
    SAMPLE = 5
    SAMPLE_OK = 6


class MalformedPacket(ValueError):
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


@dataclass(frozen=True, slots=True)
class HybridPacket:
    """Decoded packet.  Wire-only fields (magic, body length, terminator,
    checksum) are produced and verified by the codec."""

    version: int
    packet_number: int
    origin: PartyId
    destination: PartyId
    body_type: BodyType
    body: bytes


def _xor_checksum(body: bytes) -> int:
    value = 0
    for b in body:
        value ^= b
    return value


def encode_packet(packet: HybridPacket) -> bytes:
    if packet.origin not in _WIRE_PARTIES or packet.destination not in _WIRE_PARTIES:
        raise ValueError("packet endpoints must be Alice, Bob, or Charlie")
    if len(packet.body) > 0xFFFF:
        raise ValueError("body exceeds the 16-bit length field")
    if not 0 <= packet.packet_number <= 0xFFFFFFFF:
        raise ValueError("packet number exceeds 32 bits")
    header = MAGIC + struct.pack(
        ">BIBBHB",
        packet.version,
        packet.packet_number,
        packet.origin.value,
        packet.destination.value,
        len(packet.body),
        packet.body_type.value,
    )
    footer = bytes([TERMINATOR, _xor_checksum(packet.body)])
    return header + packet.body + footer


def decode_packet(data: bytes) -> HybridPacket:
    if len(data) < _HEADER_LEN + _FOOTER_LEN:
        raise MalformedPacket("truncated")
    if data[:2] != MAGIC:
        raise MalformedPacket("bad magic")
    version, number, origin, destination, body_len, body_type = struct.unpack(
        ">BIBBHB", data[2:_HEADER_LEN]
    )
    if version != VERSION:
        raise MalformedPacket(f"unsupported version {version}")
    expected = _HEADER_LEN + body_len + _FOOTER_LEN
    if len(data) < expected:
        raise MalformedPacket("truncated")
    if len(data) > expected:
        raise MalformedPacket("trailing bytes")
    try:
        origin_id = PartyId(origin)
        destination_id = PartyId(destination)
    except ValueError:
        raise MalformedPacket("unknown party code") from None
    if origin_id not in _WIRE_PARTIES or destination_id not in _WIRE_PARTIES:
        raise MalformedPacket("illegal party on the wire")
    try:
        kind = BodyType(body_type)
    except ValueError:
        raise MalformedPacket(f"unknown body type {body_type}") from None
    body = data[_HEADER_LEN : _HEADER_LEN + body_len]
    terminator, checksum = data[expected - 2], data[expected - 1]
    if terminator != TERMINATOR:
        raise MalformedPacket("bad terminator")
    if checksum != _xor_checksum(body):
        raise MalformedPacket("bad checksum")
    return HybridPacket(version, number, origin_id, destination_id, kind, body)


class PacketLog:
    """Orders outgoing packets and numbers them per (origin, destination)."""

    def __init__(self):
        self.packets: list[HybridPacket] = []
        self._counters: dict[tuple[PartyId, PartyId], int] = {}

    def send(
        self, origin: PartyId, destination: PartyId, body_type: BodyType, body: bytes
    ) -> HybridPacket:
        key = (origin, destination)
        number = self._counters.get(key, 0)
        self._counters[key] = number + 1
        packet = HybridPacket(VERSION, number, origin, destination, body_type, body)
        self.packets.append(packet)
        return packet


def quantum_slot_body(round_id: int) -> bytes:
    return struct.pack(">Q", round_id)


def announce_body(round_id: int, outcome: Outcome, multi_count: bool) -> bytes:
    return struct.pack(">Q", round_id) + outcome.value.encode() + bytes([int(multi_count)])


def disclose_body(round_id: int, setting: Action, clicked: bool) -> bytes:
    return struct.pack(">Q", round_id) + setting.value.encode() + bytes([int(clicked)])


def control_body(op: ControlOp, payload: bytes = b"") -> bytes:
    return bytes([op.value]) + payload


@dataclass(slots=True)
class RoundRecord:
    """One protocol round as the stations can reconstruct it afterwards."""

    round_id: int
    setting_b: Action
    setting_c: Action
    outcome_alice: Outcome
    click_b: bool
    click_c: bool
    multi_count: bool
    sampled: bool = False
    sifted_bit: int | None = None


@dataclass(slots=True)
class Transcript:
    rounds: list[RoundRecord]
    packets: list[HybridPacket]
    verdict: metrics.Verdict
    report: metrics.MeritReport
    key_bob: list[int]
    key_charlie: list[int]
    key_round_ids: list[int]
    eve_records: list[EveRecord] = field(default_factory=list)


@dataclass(slots=True)
class SimulationResult:
    """Statistics-only run: all rounds plus the eavesdropper's records."""

    rounds: list[RoundRecord]
    eve_records: list[EveRecord]


def choose_setting(rng: np.random.Generator) -> Action:
    """Fair coin over the two station operations."""
    return Action.F if rng.random() < 0.5 else Action.A


def canonical_sifted_bit(setting_b: Action, setting_c: Action) -> int | None:
    """Key bit implied by a D1 announcement: (A,F) -> 0, (F,A) -> 1,
    correlated settings carry no agreed bit."""
    if setting_b is Action.A and setting_c is Action.F:
        return 0
    if setting_b is Action.F and setting_c is Action.A:
        return 1
    return None


def sift_key(rounds: list[RoundRecord]) -> tuple[list[int], list[int]]:
    """Each station's key from its local view only.

    A station keeps every unsampled D1 round and maps its own setting
    through the convention (Bob: A -> 0, F -> 1; Charlie: F -> 0, A -> 1).
    Rounds whose settings were secretly correlated yield mismatched bits,
    surfacing as key errors rather than being discarded.
    """
    key_bob: list[int] = []
    key_charlie: list[int] = []
    for r in rounds:
        if r.outcome_alice is Outcome.D1 and not r.sampled:
            key_bob.append(0 if r.setting_b is Action.A else 1)
            key_charlie.append(0 if r.setting_c is Action.F else 1)
    return key_bob, key_charlie


@dataclass(slots=True)
class _RoundOutput:
    record: RoundRecord
    probe: EveProbePair | None


def _resolve_target(target: AttackTarget, rng: np.random.Generator) -> Arm:
    if target is AttackTarget.B:
        return Arm.B
    if target is AttackTarget.C:
        return Arm.C
    return Arm.B if rng.random() < 0.5 else Arm.C


def _play_round(
    round_id: int,
    setting_b: Action,
    setting_c: Action,
    channel_cfg: ChannelConfig,
    attack: AttackConfig,
    rng_attack: np.random.Generator,
    rng_quantum: np.random.Generator,
) -> _RoundOutput:
    """Simulate one emission through announcement.

    Source-side attacks replace the split photon with bare probe photons
    and a fabricated announcement; those rounds ignore the channel loss and
    the source's dark counts (the announcement is fabricated anyway) but
    the station detectors still dark-fire.
    """
    kind = attack.kind
    probe: EveProbePair | None = None
    if kind is AttackKind.ALICE_SINGLE_PATH and rng_attack.random() < attack.p:
        target = _resolve_target(attack.target, rng_attack)
        target_setting = setting_b if target is Arm.B else setting_c
        returned = target_setting is Action.F
        outcome, _ = alice_single_path(attack.strategy, returned, rng_attack)
        click_b = target is Arm.B and not returned
        click_c = target is Arm.C and not returned
        alice_clicks = 0 if outcome is Outcome.NULL else 1
    elif kind is AttackKind.ALICE_DOUBLE_PATH and rng_attack.random() < attack.p:
        outcome, _ = alice_double_path(setting_b, setting_c, rng_attack)
        click_b = setting_b is Action.A
        click_c = setting_c is Action.A
        alice_clicks = 0 if outcome is Outcome.NULL else 1
    else:
        state = emit()
        state = transmit_onward(state, channel_cfg, attack, rng_attack)
        state, absorbed_b = apply_party_action(state, Arm.B, setting_b, rng_quantum)
        state, absorbed_c = apply_party_action(state, Arm.C, setting_c, rng_quantum)
        state = return_leg(state)
        if absorbed_b or absorbed_c:
            zeros = (0j,) * state.probe_dim
            amp_d1, amp_d2 = zeros, zeros
        else:
            amp_d1, amp_d2 = recombine_at_bs(state)
        detection = sample_detection(
            amp_d1, amp_d2, channel_cfg.loss_rate, channel_cfg.dark_rate, rng_quantum
        )
        outcome = detection.outcome
        alice_clicks = detection.click_count
        click_b = absorbed_b
        click_c = absorbed_c
        if outcome is Outcome.D1 and state.probe_dim > 1 and not (absorbed_b or absorbed_c):
            probe = EveProbePair(theta=attack.theta, collapsed_state=amp_d1)
    if channel_cfg.dark_rate > 0.0:
        if setting_b is Action.A and not click_b:
            click_b = rng_quantum.random() < channel_cfg.dark_rate
        if setting_c is Action.A and not click_c:
            click_c = rng_quantum.random() < channel_cfg.dark_rate
    multi = alice_clicks + int(click_b) + int(click_c) >= 2
    record = RoundRecord(
        round_id=round_id,
        setting_b=setting_b,
        setting_c=setting_c,
        outcome_alice=outcome,
        click_b=click_b,
        click_c=click_c,
        multi_count=multi,
    )
    return _RoundOutput(record=record, probe=probe)


def _spawn_streams(seed: int, count: int) -> list[np.random.Generator]:
    root = np.random.SeedSequence(seed)
    return [np.random.Generator(np.random.PCG64(child)) for child in root.spawn(count)]


def _eve_measurements(
    outputs: list[_RoundOutput], rng_eve: np.random.Generator, unsampled_only: bool
) -> list[EveRecord]:
    records = []
    for out in outputs:
        if out.probe is None:
            continue
        r = out.record
        if unsampled_only and r.sampled:
            continue
        guess = eve_extract_bit(out.probe, r.outcome_alice, rng_eve)
        records.append(
            EveRecord(
                round_id=r.round_id,
                guess=guess,
                true_bit=canonical_sifted_bit(r.setting_b, r.setting_c),
            )
        )
    return records


def run_rounds(
    n: int,
    attack: AttackConfig = AttackConfig.none(),
    channel_cfg: ChannelConfig = ChannelConfig(),
    seed: int = 0,
) -> SimulationResult:
    """Statistics run: n independent rounds, no packet traffic or sampling.

    The eavesdropper, when configured, measures every D1 round.  Rounds are
    deterministic in (n, attack, channel, seed).
    """
    if n < 1:
        raise ValueError("need at least one round")
    attack.validate()
    channel_cfg.validate()
    rng_bob, rng_charlie, rng_attackers, rng_quantum, rng_eve, _ = _spawn_streams(seed, 6)
    outputs = []
    for round_id in range(n):
        setting_b = choose_setting(rng_bob)
        setting_c = choose_setting(rng_charlie)
        outputs.append(
            _play_round(
                round_id, setting_b, setting_c, channel_cfg, attack, rng_attackers, rng_quantum
            )
        )
    eve_records = _eve_measurements(outputs, rng_eve, unsampled_only=False)
    return SimulationResult(rounds=[o.record for o in outputs], eve_records=eve_records)


_SAMPLE_IDS_PER_PACKET = 8000


def run_protocol(
    n: int,
    f: float,
    attack: AttackConfig = AttackConfig.none(),
    seed: int = 0,
    channel_cfg: ChannelConfig = ChannelConfig(),
    policy: metrics.TolerancePolicy | None = None,
) -> Transcript:
    """Execute a full session and return its transcript.

    Runs n rounds with per-round announcements, samples floor(n*f) rounds
    for disclosure, estimates the figures of merit from the disclosed
    sample, and either aborts (empty keys, failing figures named) or sifts
    the stations' keys from the unsampled D1 rounds.  Deterministic in
    (n, f, attack, channel, seed).
    """
    if n < 1:
        raise ValueError("need at least one round")
    if not 0.0 < f < 1.0:
        raise ValueError("test fraction f must lie in (0, 1)")
    attack.validate()
    channel_cfg.validate()
    if policy is None:
        policy = metrics.TolerancePolicy(
            expected_coincidence=channel_cfg.dark_rate,
            expected_multi=metrics.expected_multi_rate(
                channel_cfg.dark_rate, channel_cfg.loss_rate
            ),
            expected_loss=channel_cfg.loss_rate,
        )
    rng_bob, rng_charlie, rng_attackers, rng_quantum, rng_eve, rng_sampler = _spawn_streams(
        seed, 6
    )
    log = PacketLog()
    log.send(PartyId.CHARLIE, PartyId.ALICE, BodyType.CONTROL, control_body(ControlOp.REQUEST))
    log.send(PartyId.ALICE, PartyId.CHARLIE, BodyType.CONTROL, control_body(ControlOp.ACK))
    log.send(PartyId.ALICE, PartyId.BOB, BodyType.CONTROL, control_body(ControlOp.INTIMATE))
    log.send(PartyId.BOB, PartyId.ALICE, BodyType.CONTROL, control_body(ControlOp.CONSENT))

    outputs = []
    for round_id in range(n):
        setting_b = choose_setting(rng_bob)
        setting_c = choose_setting(rng_charlie)
        slot = quantum_slot_body(round_id)
        log.send(PartyId.ALICE, PartyId.BOB, BodyType.QUANTUM_SLOT, slot)
        log.send(PartyId.ALICE, PartyId.CHARLIE, BodyType.QUANTUM_SLOT, slot)
        out = _play_round(
            round_id, setting_b, setting_c, channel_cfg, attack, rng_attackers, rng_quantum
        )
        announcement = announce_body(round_id, out.record.outcome_alice, out.record.multi_count)
        log.send(PartyId.ALICE, PartyId.BOB, BodyType.ANNOUNCE, announcement)
        log.send(PartyId.ALICE, PartyId.CHARLIE, BodyType.ANNOUNCE, announcement)
        outputs.append(out)

    records = [o.record for o in outputs]
    sample_size = int(n * f)
    sampled_ids = sorted(rng_sampler.choice(n, size=sample_size, replace=False).tolist())
    for chunk_start in range(0, sample_size, _SAMPLE_IDS_PER_PACKET):
        chunk = sampled_ids[chunk_start : chunk_start + _SAMPLE_IDS_PER_PACKET]
        payload = b"".join(struct.pack(">Q", i) for i in chunk)
        log.send(PartyId.BOB, PartyId.CHARLIE, BodyType.CONTROL, control_body(ControlOp.SAMPLE, payload))
    log.send(PartyId.CHARLIE, PartyId.BOB, BodyType.CONTROL, control_body(ControlOp.SAMPLE_OK))
    for i in sampled_ids:
        r = records[i]
        r.sampled = True
        log.send(
            PartyId.BOB,
            PartyId.CHARLIE,
            BodyType.DISCLOSE,
            disclose_body(i, r.setting_b, r.click_b),
        )
        log.send(
            PartyId.CHARLIE,
            PartyId.BOB,
            BodyType.DISCLOSE,
            disclose_body(i, r.setting_c, r.click_c),
        )

    disclosed = [records[i] for i in sampled_ids]
    report = metrics.compute_merit_report(disclosed, records, n)
    verdict = metrics.abort_decision(report, policy)

    key_bob: list[int] = []
    key_charlie: list[int] = []
    key_round_ids: list[int] = []
    eve_records: list[EveRecord] = []
    if verdict.key_produced:
        for r in records:
            if r.outcome_alice is Outcome.D1 and not r.sampled:
                r.sifted_bit = canonical_sifted_bit(r.setting_b, r.setting_c)
                key_round_ids.append(r.round_id)
        key_bob, key_charlie = sift_key(records)
        eve_records = _eve_measurements(outputs, rng_eve, unsampled_only=True)
    return Transcript(
        rounds=records,
        packets=log.packets,
        verdict=verdict,
        report=report,
        key_bob=key_bob,
        key_charlie=key_charlie,
        key_round_ids=key_round_ids,
        eve_records=eve_records,
    )


def round_to_line(r: RoundRecord) -> str:
    """Fixed field order, decimal integers and single-character enums."""
    bit = "-" if r.sifted_bit is None else str(r.sifted_bit)
    return (
        f"{r.round_id} {r.setting_b.value} {r.setting_c.value} {r.outcome_alice.value} "
        f"{int(r.click_b)} {int(r.click_c)} {int(r.multi_count)} {int(r.sampled)} {bit}"
    )


def line_to_round(line: str) -> RoundRecord:
    parts = line.split()
    if len(parts) != 9:
        raise ValueError(f"expected 9 fields, got {len(parts)}")
    return RoundRecord(
        round_id=int(parts[0]),
        setting_b=Action(parts[1]),
        setting_c=Action(parts[2]),
        outcome_alice=Outcome(parts[3]),
        click_b=bool(int(parts[4])),
        click_c=bool(int(parts[5])),
        multi_count=bool(int(parts[6])),
        sampled=bool(int(parts[7])),
        sifted_bit=None if parts[8] == "-" else int(parts[8]),
    )


def transcript_lines(transcript: Transcript) -> list[str]:
    return [round_to_line(r) for r in transcript.rounds]


def key_to_hex(bits: list[int]) -> str:
    """Bits packed most-significant first, zero-padded to whole octets."""
    if not bits:
        return ""
    value = 0
    for b in bits:
        value = (value << 1) | b
    width = (len(bits) + 7) // 8
    value <<= width * 8 - len(bits)
    return value.to_bytes(width, "big").hex()
