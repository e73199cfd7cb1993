"""Deterministic simulator of a consortium permissioned blockchain where node
attestation verdicts gate validator selection, governance adapts to node
diversity, and policy/audit digests are anchored on a hash-linked ledger.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .attester import AttestingEnvironment, TargetEnvironment
from .conveyance import VerifierContext
from .model import (
    AttestationResult,
    Decoder,
    Digest,
    Encoder,
    EvidencePolicy,
    GeoFence,
    ModelError,
    SignerIdentity,
    Verdict,
    ZERO_DIGEST,
    digest,
)

GENESIS_PREV = Digest(ZERO_DIGEST)


class SimError(ValueError):
    """Raised on invalid simulator configuration or state."""


# ---------------------------------------------------------------------------
# Ledger
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LedgerRecord:
    kind: str  # policy_digest | audit_digest | endorsement_record | transaction
    #            | result_digest | policy.conflict | governance | no_eligible
    #            | remuneration
    payload: bytes


@dataclass(frozen=True)
class LedgerBlock:
    height: int
    prev_digest: Digest
    records: tuple[LedgerRecord, ...]
    forger: str
    tick: int
    block_digest: Digest = field(default=GENESIS_PREV)

    def content_bytes(self) -> bytes:
        enc = Encoder()
        enc.u64(self.height)
        enc.raw(self.prev_digest.value)
        enc.u64(len(self.records))
        for rec in self.records:
            enc.text(rec.kind)
            enc.blob(rec.payload)
        enc.text(self.forger)
        enc.u64(self.tick)
        return enc.getvalue()

    def sealed(self) -> "LedgerBlock":
        return LedgerBlock(
            self.height, self.prev_digest, self.records, self.forger, self.tick,
            digest(self.content_bytes()),
        )

    def to_bytes(self) -> bytes:
        enc = Encoder()
        enc.raw(self.content_bytes())
        enc.raw(self.block_digest.value)
        return enc.getvalue()

    @staticmethod
    def from_bytes(data: bytes) -> "LedgerBlock":
        dec = Decoder(data)
        height = dec.u64()
        prev = Digest(dec.raw(32))
        records = tuple(LedgerRecord(dec.text(), dec.blob()) for _ in range(dec.u64()))
        forger = dec.text()
        tick = dec.u64()
        block_digest = Digest(dec.raw(32))
        dec.done()
        return LedgerBlock(height, prev, records, forger, tick, block_digest)


def verify_chain(blocks: Sequence[LedgerBlock]) -> Optional[str]:
    """None if the chain verifies; otherwise a description of the first fault."""
    prev = GENESIS_PREV
    for i, block in enumerate(blocks):
        if block.height != i:
            return f"block {i}: height {block.height} not dense"
        if block.prev_digest != prev:
            return f"block {i}: broken prev link"
        if digest(block.content_bytes()) != block.block_digest:
            return f"block {i}: block digest mismatch"
        prev = block.block_digest
    return None


# ---------------------------------------------------------------------------
# Network entities
# ---------------------------------------------------------------------------


@dataclass
class Node:
    node_id: str
    domain_id: str
    attesting_env: AttestingEnvironment
    target_env: TargetEnvironment
    local_verifier: VerifierContext
    last_result: Optional[AttestationResult] = None
    ledger_copy: list[bytes] = field(default_factory=list)


@dataclass
class Domain:
    domain_id: str
    owner: SignerIdentity
    domain_verifier: VerifierContext
    audit_log: list[tuple[int, bytes]] = field(default_factory=list)
    node_ids: list[str] = field(default_factory=list)

    def append_audit(self, tick: int, entry: bytes):
        if self.audit_log and tick < self.audit_log[-1][0]:
            raise SimError("audit log must be tick-ordered")
        self.audit_log.append((tick, entry))


@dataclass
class ConsortiumConfig:
    consortium_verifier: VerifierContext
    consortium_policy: EvidencePolicy
    majority_parameter: int = 51
    diversity_threshold: float = 0.5
    raised_majority: int = 70
    geo_fence: Optional[GeoFence] = None
    epoch_length: int = 10

    def __post_init__(self):
        if not 50 < self.majority_parameter <= 100:
            raise ModelError("majority parameter must be in (50, 100]")
        if self.raised_majority < self.majority_parameter:
            raise ModelError("raised majority must be >= majority parameter")
        if not 0 < self.diversity_threshold <= 1:
            raise ModelError("diversity threshold must be in (0, 1]")


@dataclass(frozen=True)
class Transaction:
    originator_key: bytes
    payload: bytes

    def to_bytes(self) -> bytes:
        enc = Encoder()
        enc.blob(self.originator_key)
        enc.blob(self.payload)
        return enc.getvalue()


@dataclass(frozen=True)
class FaultInjection:
    tick: int
    node_id: str
    mutation: str  # flip_sw_byte | change_fw | move_geo | clone_config
    lat: float = 0.0
    lon: float = 0.0
    fw_version: int = 0
    from_node: str = ""


@dataclass
class EpochReport:
    epoch: int
    tick: int
    verdicts: dict[str, str]
    domain_verdicts: dict[str, str]
    validator: Optional[str]
    diversity: float
    majority: int
    block_digest: Optional[Digest]

    def render(self) -> str:
        lines = [
            f"epoch {self.epoch} tick {self.tick}",
            f"  diversity {self.diversity:.4f} majority {self.majority}",
            f"  validator {self.validator or '(none eligible)'}",
        ]
        for node_id in sorted(self.verdicts):
            lines.append(
                f"  node {node_id}: consortium={self.verdicts[node_id]}"
                f" domain={self.domain_verdicts[node_id]}"
            )
        if self.block_digest is not None:
            lines.append(f"  block {self.block_digest.hex()}")
        return "\n".join(lines)


class Universe:
    """All simulation state; fully determined by the scenario seed."""

    def __init__(self, config: ConsortiumConfig, seed: int, permissionless: bool = False):
        self.config = config
        self.rng = random.Random(seed)
        self.clock = 0
        self.domains: dict[str, Domain] = {}
        self.nodes: dict[str, Node] = {}
        self.ledger: list[LedgerBlock] = []
        self.pending_records: list[LedgerRecord] = []
        self.effective_majority = config.majority_parameter
        self.permissionless = permissionless
        self.faults: list[FaultInjection] = []
        self.epoch_index = 0
        self._recorded_policy_digests: set[bytes] = set()

    def add_domain(self, domain: Domain):
        if domain.domain_id in self.domains:
            raise SimError(f"duplicate domain id {domain.domain_id}")
        self.domains[domain.domain_id] = domain

    def add_node(self, node: Node):
        if node.node_id in self.nodes:
            raise SimError(f"duplicate node id {node.node_id}")
        if node.domain_id not in self.domains:
            raise SimError(f"node {node.node_id} references unknown domain {node.domain_id}")
        self.nodes[node.node_id] = node
        self.domains[node.domain_id].node_ids.append(node.node_id)

    def sorted_nodes(self) -> list[Node]:
        return [self.nodes[nid] for nid in sorted(self.nodes)]


# ---------------------------------------------------------------------------
# Policy distribution
# ---------------------------------------------------------------------------


def _conflicting_rules(consortium: EvidencePolicy, domain: EvidencePolicy) -> list[str]:
    by_id = {r.rule_id: r for r in consortium.rules}
    return [r.rule_id for r in domain.rules if r.rule_id in by_id and r != by_id[r.rule_id]]


def distribute_policies(universe: Universe):
    """Push consortium and domain policies into every node's local verifier and
    anchor their digests on the ledger (idempotent by digest). A domain rule
    conflicting with a consortium rule is recorded and loses."""
    consortium_policy = universe.config.consortium_policy
    _record_policy_digest(universe, consortium_policy)
    for domain in universe.domains.values():
        domain_policy = domain.domain_verifier.policy
        for rule_id in _conflicting_rules(consortium_policy, domain_policy):
            universe.pending_records.append(
                LedgerRecord("policy.conflict", f"{domain.domain_id}:{rule_id}".encode())
            )
        # consortium rule wins on conflict: replace the domain copy
        by_id = {r.rule_id: r for r in consortium_policy.rules}
        resolved = tuple(by_id.get(r.rule_id, r) for r in domain_policy.rules)
        if resolved != domain_policy.rules:
            domain_policy = EvidencePolicy(
                domain_policy.policy_id, resolved,
                domain_policy.freshness_window, domain_policy.required_claims,
            )
            domain.domain_verifier.policy = domain_policy
        _record_policy_digest(universe, domain_policy)
        for node_id in domain.node_ids:
            node = universe.nodes[node_id]
            node.local_verifier.policy = consortium_policy
            node.local_verifier.endorsements = list(
                universe.config.consortium_verifier.endorsements
            )


def _record_policy_digest(universe: Universe, policy: EvidencePolicy):
    d = policy.digest()
    if d.value not in universe._recorded_policy_digests:
        universe._recorded_policy_digests.add(d.value)
        universe.pending_records.append(LedgerRecord("policy_digest", d.value))


# ---------------------------------------------------------------------------
# Faults
# ---------------------------------------------------------------------------


def _apply_fault(universe: Universe, fault: FaultInjection):
    node = universe.nodes[fault.node_id]
    env = node.target_env
    if fault.mutation == "flip_sw_byte":
        if not env.sw_images:
            raise SimError(f"node {fault.node_id} has no sw images to flip")
        name, image = env.sw_images[0]
        flipped = bytes([image[0] ^ 0x01]) + image[1:]
        images = ((name, flipped),) + env.sw_images[1:]
        node.target_env = TargetEnvironment(
            env.hw_model, env.fw_version, images, env.geo, env.gpu_count, env.stake
        )
    elif fault.mutation == "change_fw":
        node.target_env = TargetEnvironment(
            env.hw_model, fault.fw_version, env.sw_images, env.geo, env.gpu_count, env.stake
        )
    elif fault.mutation == "move_geo":
        from .model import GeoPoint

        node.target_env = TargetEnvironment(
            env.hw_model, env.fw_version, env.sw_images,
            GeoPoint(fault.lat, fault.lon, env.geo.altitude), env.gpu_count, env.stake,
        )
    elif fault.mutation == "clone_config":
        node.target_env = universe.nodes[fault.from_node].target_env
    else:
        raise SimError(f"unknown fault mutation {fault.mutation!r}")


# ---------------------------------------------------------------------------
# Epoch machinery
# ---------------------------------------------------------------------------


def diversity_metric(universe: Universe) -> float:
    nodes = universe.sorted_nodes()
    if not nodes:
        raise SimError("diversity metric requires at least one node")
    distinct = {n.target_env.config_digest().value for n in nodes}
    return len(distinct) / len(nodes)


def update_governance(universe: Universe) -> int:
    """Evaluate the diversity rule and switch the effective majority parameter."""
    cfg = universe.config
    diversity = diversity_metric(universe)
    new = cfg.raised_majority if diversity < cfg.diversity_threshold else cfg.majority_parameter
    if new != universe.effective_majority:
        universe.effective_majority = new
        enc = Encoder()
        enc.u64(new)
        enc.f64(diversity)
        universe.pending_records.append(LedgerRecord("governance", enc.getvalue()))
    return universe.effective_majority


def _node_in_fence(universe: Universe, node: Node) -> bool:
    fence = universe.config.geo_fence
    return fence is None or fence.contains(node.target_env.geo)


def eligible_nodes(universe: Universe) -> list[Node]:
    out = []
    for node in universe.sorted_nodes():
        result = node.last_result
        if result is None or result.verdict != Verdict.COMPLIANT:
            continue
        if universe.clock - result.created_at > universe.config.epoch_length:
            continue
        if not _node_in_fence(universe, node):
            continue
        out.append(node)
    return out


def _stake_weighted_pick(nodes: Sequence[Node], round_seed: int) -> Optional[str]:
    candidates = [n for n in nodes if n.target_env.stake > 0]
    if not candidates:
        return None
    total = sum(n.target_env.stake for n in candidates)
    draw = random.Random(round_seed).random() * total
    acc = 0
    for node in candidates:  # already in ascending node_id order
        acc += node.target_env.stake
        if draw < acc:
            return node.node_id
    return candidates[-1].node_id


def select_validator(universe: Universe, round_seed: int) -> Optional[str]:
    """Stake-weighted pick among attestation-eligible nodes; None = no_eligible."""
    return _stake_weighted_pick(eligible_nodes(universe), round_seed)


def forge_block(universe: Universe, validator: str, records: Sequence[LedgerRecord]) -> LedgerBlock:
    prev = universe.ledger[-1].block_digest if universe.ledger else GENESIS_PREV
    block = LedgerBlock(
        len(universe.ledger), prev, tuple(records), validator, universe.clock
    ).sealed()
    universe.ledger.append(block)
    raw = block.to_bytes()
    for node in universe.nodes.values():
        node.ledger_copy.append(raw)
    return block


def peer_appraise(universe: Universe, node_x: Node, node_y: Node) -> AttestationResult:
    """Node Y's local verifier appraises fresh evidence from node X, acting as
    its own relying party for consensus decisions."""
    lv = node_y.local_verifier
    nonce = lv.issue_challenge(universe.clock)
    evidence = node_x.attesting_env.generate_evidence(node_x.target_env, nonce, universe.clock)
    return lv.appraise(evidence, nonce, universe.clock)


def run_epoch(universe: Universe) -> EpochReport:
    """One attestation epoch: apply scheduled faults, attest every node to its
    domain and the consortium verifier, anchor audit digests, re-evaluate
    governance, select a validator, and forge the epoch's block."""
    cfg = universe.config
    clock = universe.clock
    due = [f for f in universe.faults if clock <= f.tick < clock + cfg.epoch_length]
    for fault in sorted(due, key=lambda f: (f.tick, f.node_id)):
        _apply_fault(universe, fault)

    verdicts: dict[str, str] = {}
    domain_verdicts: dict[str, str] = {}
    new_audit: dict[str, list[bytes]] = {d: [] for d in universe.domains}
    cv = cfg.consortium_verifier
    for node in universe.sorted_nodes():
        domain = universe.domains[node.domain_id]
        dv = domain.domain_verifier

        dv_nonce = dv.issue_challenge(clock)
        dv_evidence = node.attesting_env.generate_evidence(node.target_env, dv_nonce, clock)
        dv_result = dv.appraise(dv_evidence, dv_nonce, clock)

        cv_nonce = cv.issue_challenge(clock)
        cv_evidence = node.attesting_env.generate_evidence(node.target_env, cv_nonce, clock)
        cv_result = cv.appraise(cv_evidence, cv_nonce, clock)

        node.last_result = cv_result
        verdicts[node.node_id] = cv_result.verdict.value
        domain_verdicts[node.node_id] = dv_result.verdict.value

        for entry in (dv_evidence.to_bytes(), dv_result.to_bytes(),
                      cv_evidence.to_bytes(), cv_result.to_bytes()):
            domain.append_audit(clock, entry)
            new_audit[domain.domain_id].append(entry)
        universe.pending_records.append(
            LedgerRecord("result_digest", digest(cv_result.to_bytes()).value)
        )

    for domain_id in sorted(new_audit):
        entries = new_audit[domain_id]
        if entries:
            universe.pending_records.append(
                LedgerRecord("audit_digest", audit_digest(domain_id, entries).value)
            )

    majority = update_governance(universe)
    diversity = diversity_metric(universe)

    round_seed = universe.rng.getrandbits(64)
    validator = select_validator(universe, round_seed)
    block = None
    if validator is None:
        universe.pending_records.append(LedgerRecord("no_eligible", b""))
    else:
        block = forge_block(universe, validator, universe.pending_records)
        universe.pending_records = []

    report = EpochReport(
        epoch=universe.epoch_index,
        tick=clock,
        verdicts=verdicts,
        domain_verdicts=domain_verdicts,
        validator=validator,
        diversity=diversity,
        majority=majority,
        block_digest=block.block_digest if block else None,
    )
    universe.epoch_index += 1
    universe.clock += cfg.epoch_length
    return report


def audit_digest(domain_id: str, entries: Sequence[bytes]) -> Digest:
    enc = Encoder()
    enc.text(domain_id)
    enc.u64(len(entries))
    for e in entries:
        enc.blob(e)
    return digest(enc.getvalue())


# ---------------------------------------------------------------------------
# Honest-node segregation (permissionless mode)
# ---------------------------------------------------------------------------


def honest_subset_round(
    universe: Universe,
    registered_user_keys: set,
    pending_txs: Sequence[Transaction],
    round_seed: int,
) -> tuple[Optional[LedgerBlock], list[Transaction]]:
    """An honest node (compliant latest verdict) forges a block containing only
    transactions from pre-registered user keys; others stay pending. The
    forger is credited with a remuneration record."""
    if not universe.permissionless:
        raise SimError("honest subset rounds require permissionless mode")
    honest = [
        n for n in universe.sorted_nodes()
        if n.last_result is not None and n.last_result.verdict == Verdict.COMPLIANT
    ]
    forger = _stake_weighted_pick(honest, round_seed)
    if forger is None:
        universe.pending_records.append(LedgerRecord("no_eligible", b""))
        return None, list(pending_txs)
    included = [tx for tx in pending_txs if tx.originator_key in registered_user_keys]
    remaining = [tx for tx in pending_txs if tx.originator_key not in registered_user_keys]
    records = list(universe.pending_records)
    universe.pending_records = []
    records.extend(LedgerRecord("transaction", tx.to_bytes()) for tx in included)
    records.append(LedgerRecord("remuneration", forger.encode()))
    block = forge_block(universe, forger, records)
    return block, remaining


# ---------------------------------------------------------------------------
# Ledger export
# ---------------------------------------------------------------------------


def export_ledger(blocks: Sequence[LedgerBlock]) -> str:
    """One canonical-encoded block per line, hex."""
    return "\n".join(b.to_bytes().hex() for b in blocks) + ("\n" if blocks else "")


def import_ledger(text: str) -> list[LedgerBlock]:
    blocks = []
    for line in text.splitlines():
        line = line.strip()
        if line:
            blocks.append(LedgerBlock.from_bytes(bytes.fromhex(line)))
    return blocks


def render_block(block: LedgerBlock) -> str:
    lines = [
        f"block {block.height} tick {block.tick} forger {block.forger or '(none)'}",
        f"  prev   {block.prev_digest.hex()}",
        f"  digest {block.block_digest.hex()}",
    ]
    for rec in block.records:
        payload = rec.payload.hex()
        if len(payload) > 64:
            payload = payload[:64] + "..."
        lines.append(f"  record {rec.kind} {payload}")
    return "\n".join(lines)
