"""Attestation conveyance: passport and background-check flows run as message
sequences over an in-memory reliable transport, with nonce replay rejection.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from .attester import AttestingEnvironment, TargetEnvironment
from .model import (
    AttestationResult,
    Endorsement,
    EntityId,
    Evidence,
    EvidencePolicy,
    Nonce,
    ResultPolicy,
    SignerIdentity,
    new_nonce,
)
from .verifier import appraise_evidence, appraise_result


class FlowError(RuntimeError):
    """Transport or protocol failure that aborts a flow."""


# ---------------------------------------------------------------------------
# Messages
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AccessRequest:
    sender: EntityId
    resource_id: str


@dataclass(frozen=True)
class ChallengeNonce:
    sender: EntityId
    nonce: Nonce


@dataclass(frozen=True)
class EvidenceMsg:
    sender: EntityId
    evidence: Evidence


@dataclass(frozen=True)
class ResultMsg:
    sender: EntityId
    result_bytes: bytes  # canonical encoding; forwarded byte-identical

    def result(self) -> AttestationResult:
        return AttestationResult.from_bytes(self.result_bytes)


FlowMessage = Union[AccessRequest, ChallengeNonce, EvidenceMsg, ResultMsg]


@dataclass(frozen=True)
class Decision:
    granted: bool
    reasons: tuple[str, ...] = ()


class Transport:
    """Reliable, ordered in-memory channel; records a transcript."""

    def __init__(self):
        self.log: list[FlowMessage] = []
        self._open = True

    def close(self):
        self._open = False

    def send(self, msg: FlowMessage) -> FlowMessage:
        if not self._open:
            raise FlowError("transport closed")
        if isinstance(msg, EvidenceMsg) and not msg.evidence.verify_signature():
            raise FlowError("evidence message not signature-valid at send time")
        if isinstance(msg, ResultMsg) and not msg.result().verify_signature():
            raise FlowError("result message not signature-valid at send time")
        self.log.append(msg)
        return msg

    def transcript(self) -> str:
        lines = []
        for msg in self.log:
            kind = type(msg).__name__
            lines.append(f"{kind} from {msg.sender.role.value}:{msg.sender.name}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# Role contexts
# ---------------------------------------------------------------------------


@dataclass
class VerifierContext:
    """A verifier with its policy, endorsements, nonce source, and replay cache."""

    identity: SignerIdentity
    policy: EvidencePolicy
    endorsements: list[Endorsement]
    rng: object
    seen_nonces: set = field(default_factory=set)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def issue_challenge(self, clock: int) -> Nonce:
        return new_nonce(clock, self.rng)

    def consume_nonce(self, nonce: Nonce) -> bool:
        """Atomically mark a nonce used; False means it was already consumed."""
        with self._lock:
            if nonce.value in self.seen_nonces:
                return False
            self.seen_nonces.add(nonce.value)
            return True

    def appraise(self, evidence: Evidence, expected_nonce: Nonce, clock: int) -> AttestationResult:
        return appraise_evidence(
            evidence, self.endorsements, self.policy, expected_nonce, self.identity, clock
        )


@dataclass
class RelyingPartyContext:
    identity: SignerIdentity
    result_policy: ResultPolicy
    resource_id: str = "resource"


# ---------------------------------------------------------------------------
# Flows
# ---------------------------------------------------------------------------


def run_passport_flow(
    attester: AttestingEnvironment,
    env: TargetEnvironment,
    verifier_ctx: VerifierContext,
    rp_ctx: RelyingPartyContext,
    transport: Transport,
    clock: int,
    evidence_override: Optional[Evidence] = None,
    result_tamper=None,
) -> Decision:
    """Attester obtains a signed result from the verifier and carries it to the
    relying party like a passport. `evidence_override` and `result_tamper` are
    test hooks modelling a misbehaving attester."""
    transport.send(AccessRequest(attester.identity, rp_ctx.resource_id))
    challenge = verifier_ctx.issue_challenge(clock)
    transport.send(ChallengeNonce(verifier_ctx.identity.entity, challenge))

    evidence = evidence_override or attester.generate_evidence(env, challenge, clock)
    transport.send(EvidenceMsg(attester.identity, evidence))

    if not verifier_ctx.consume_nonce(evidence.nonce_echo):
        return Decision(False, ("replay",))
    result = verifier_ctx.appraise(evidence, challenge, clock)
    result_bytes = result.to_bytes()
    transport.send(ResultMsg(verifier_ctx.identity.entity, result_bytes))

    forwarded = result_tamper(result_bytes) if result_tamper else result_bytes
    try:
        received = AttestationResult.from_bytes(forwarded)
    except (ValueError, KeyError):
        return Decision(False, ("result_decode",))
    granted = appraise_result(received, rp_ctx.result_policy, clock)
    if granted:
        transport.send(ResultMsg(attester.identity, forwarded))
        return Decision(True)
    return Decision(False, received.reasons or ("result_rejected",))


def run_background_check_flow(
    attester: AttestingEnvironment,
    env: TargetEnvironment,
    rp_ctx: RelyingPartyContext,
    verifier_ctx: VerifierContext,
    transport: Transport,
    clock: int,
    evidence_override: Optional[Evidence] = None,
) -> Decision:
    """Relying party forwards the evidence to the verifier and receives the
    result directly; the verifier's challenge reaches the attester via the RP."""
    transport.send(AccessRequest(attester.identity, rp_ctx.resource_id))
    challenge = verifier_ctx.issue_challenge(clock)
    transport.send(ChallengeNonce(verifier_ctx.identity.entity, challenge))
    transport.send(ChallengeNonce(rp_ctx.identity.entity, challenge))  # RP relays

    evidence = evidence_override or attester.generate_evidence(env, challenge, clock)
    transport.send(EvidenceMsg(attester.identity, evidence))  # attester -> RP
    transport.send(EvidenceMsg(rp_ctx.identity.entity, evidence))  # RP -> verifier

    if not verifier_ctx.consume_nonce(evidence.nonce_echo):
        return Decision(False, ("replay",))
    result = verifier_ctx.appraise(evidence, challenge, clock)
    transport.send(ResultMsg(verifier_ctx.identity.entity, result.to_bytes()))

    granted = appraise_result(result, rp_ctx.result_policy, clock)
    if granted:
        return Decision(True)
    return Decision(False, result.reasons or ("result_rejected",))
