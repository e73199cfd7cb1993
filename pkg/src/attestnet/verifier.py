"""Verifier role: appraises evidence against endorsements and policy, emits
signed attestation results; also the relying-party appraisal of results.

Reason vocabulary: builtin ids "sig", "nonce", "stale", "missing_claim:<key>",
layer ids "layer.<i>" / "layer.len" / "layer.no_secret", and policy rule ids.
A reason carrying the ".no_reference" suffix (or "layer.no_secret") marks a
check the verifier could not judge; if only such reasons occur the verdict is
`unknown` rather than `non_compliant`.
"""

from __future__ import annotations

import logging
from typing import Mapping, Optional, Sequence

from .model import (
    AttestationResult,
    ClaimValue,
    Digest,
    Endorsement,
    Evidence,
    EvidencePolicy,
    Nonce,
    ResultPolicy,
    RuleKind,
    SignerIdentity,
    Verdict,
    digest,
)

logger = logging.getLogger(__name__)

NO_REFERENCE_SUFFIX = ".no_reference"
NO_SECRET_REASON = "layer.no_secret"


def _is_unknown_reason(reason: str) -> bool:
    return reason.endswith(NO_REFERENCE_SUFFIX) or reason == NO_SECRET_REASON


def _verdict_from_reasons(reasons: Sequence[str]) -> Verdict:
    if not reasons:
        return Verdict.COMPLIANT
    if all(_is_unknown_reason(r) for r in reasons):
        return Verdict.UNKNOWN
    return Verdict.NON_COMPLIANT


def merge_reference_claims(endorsements: Sequence[Endorsement]) -> dict[str, ClaimValue]:
    """Union of reference claims from signature-valid endorsements.

    On conflicting values for the same claim key the later issued_at wins;
    the conflict is logged and does not affect the verdict.
    """
    merged: dict[str, tuple[int, ClaimValue]] = {}
    for end in endorsements:
        if not end.verify_signature():
            logger.warning("discarding endorsement for %s: invalid signature", end.product_id)
            continue
        for key, value in end.reference_claims.items():
            prev = merged.get(key)
            if prev is not None and prev[1] != value:
                logger.warning("endorsement.conflict on claim %s (product %s)", key, end.product_id)
            if prev is None or end.issued_at >= prev[0]:
                merged[key] = (end.issued_at, value)
    return {k: v for k, (_, v) in merged.items()}


def _evaluate_rules(
    evidence: Evidence,
    references: Mapping[str, ClaimValue],
    policy: EvidencePolicy,
) -> list[str]:
    reasons = []
    for key in policy.required_claims:
        if key not in evidence.target_claims:
            reasons.append(f"missing_claim:{key}")
    for rule in policy.rules:
        if rule.kind == RuleKind.COMPONENTS_ALL_COMPLIANT:
            continue  # handled by composite appraisal
        claim = evidence.target_claims.get(rule.claim_key)
        if rule.kind == RuleKind.CLAIM_PRESENT:
            if claim is None:
                reasons.append(rule.rule_id)
        elif rule.kind == RuleKind.REFERENCE_MATCH:
            if claim is None:
                # vacuous on an absent claim; presence is enforced separately
                # via claim_present rules or required_claims
                continue
            ref = references.get(rule.claim_key)
            if ref is None:
                reasons.append(rule.rule_id + NO_REFERENCE_SUFFIX)
            elif claim != ref:
                reasons.append(rule.rule_id)
        elif rule.kind == RuleKind.VERSION_AT_LEAST:
            if claim is None or claim.kind != "int" or claim.value < rule.bound:
                reasons.append(rule.rule_id)
        elif rule.kind == RuleKind.GEO_FENCE:
            if claim is None or claim.kind != "geo" or not rule.fence.contains(claim.value):
                reasons.append(rule.rule_id)
    return reasons


def _evaluate_evidence(
    evidence: Evidence,
    references: Mapping[str, ClaimValue],
    policy: EvidencePolicy,
    expected_nonce: Optional[Nonce],
    clock: int,
) -> list[str]:
    """Core checks; expected_nonce=None relaxes nonce and freshness checks."""
    reasons = []
    if not evidence.verify_signature():
        reasons.append("sig")
    if expected_nonce is not None:
        if evidence.nonce_echo.value != expected_nonce.value:
            reasons.append("nonce")
        if clock - evidence.nonce_echo.issued_at > policy.freshness_window:
            reasons.append("stale")
    reasons.extend(_evaluate_rules(evidence, references, policy))
    return reasons


def _make_result(
    verifier: SignerIdentity,
    evidence: Evidence,
    policy: EvidencePolicy,
    reasons: Sequence[str],
    clock: int,
) -> AttestationResult:
    verdict = _verdict_from_reasons(reasons)
    unsigned = AttestationResult(
        verifier=verifier.entity,
        attester=evidence.attester,
        verdict=verdict,
        policy_digest=policy.digest(),
        appraised_nonce=evidence.nonce_echo,
        reasons=tuple(reasons),
        created_at=clock,
    )
    sig = verifier.key.sign(unsigned.signing_bytes())
    return AttestationResult(
        unsigned.verifier,
        unsigned.attester,
        unsigned.verdict,
        unsigned.policy_digest,
        unsigned.appraised_nonce,
        unsigned.reasons,
        unsigned.created_at,
        sig,
    )


def appraise_evidence(
    evidence: Evidence,
    endorsements: Sequence[Endorsement],
    policy: EvidencePolicy,
    expected_nonce: Nonce,
    verifier: SignerIdentity,
    clock: int,
) -> AttestationResult:
    """Appraise one piece of evidence; every failure is a verdict, not an error."""
    references = merge_reference_claims(endorsements)
    reasons = _evaluate_evidence(evidence, references, policy, expected_nonce, clock)
    return _make_result(verifier, evidence, policy, reasons, clock)


def appraise_layered(
    evidence: Evidence,
    golden_measurements: Sequence[Digest],
    device_secret_registry: Mapping[str, bytes],
    endorsements: Sequence[Endorsement],
    policy: EvidencePolicy,
    expected_nonce: Nonce,
    verifier: SignerIdentity,
    clock: int,
) -> AttestationResult:
    """Recompute the layer-key chain from the registered device secret and the
    golden measurements; trust in a layer requires all previous layers."""
    from .attester import derive_layer_key  # local import avoids a cycle

    reasons: list[str] = []
    chain = evidence.layer_chain or ()
    secret = device_secret_registry.get(evidence.attester.name)
    if secret is None:
        reasons.append(NO_SECRET_REASON)
    elif len(chain) != len(golden_measurements):
        reasons.append("layer.len")
    else:
        current = secret
        for i, golden in enumerate(golden_measurements):
            current = derive_layer_key(current, golden)
            rec = chain[i]
            if rec.measurement != golden or rec.layer_key_id != digest(current):
                reasons.append(f"layer.{i}")
                break
    references = merge_reference_claims(endorsements)
    reasons.extend(_evaluate_evidence(evidence, references, policy, expected_nonce, clock))
    return _make_result(verifier, evidence, policy, reasons, clock)


def appraise_composite(
    evidence: Evidence,
    endorsements: Sequence[Endorsement],
    policy: EvidencePolicy,
    expected_nonce: Nonce,
    verifier: SignerIdentity,
    clock: int,
    component_policies: Optional[Sequence[EvidencePolicy]] = None,
    component_endorsements: Optional[Sequence[Sequence[Endorsement]]] = None,
) -> AttestationResult:
    """Appraise lead evidence plus each component against its own policy.

    Component nonces are not independently challenged; components inherit the
    session's freshness through the lead evidence, so only signature and rule
    checks apply to them. Component failures surface as
    "component.<index>.<rule_id>" and gate the verdict only when the lead
    policy contains a components_all_compliant rule.
    """
    references = merge_reference_claims(endorsements)
    reasons = _evaluate_evidence(evidence, references, policy, expected_nonce, clock)
    gate = any(r.kind == RuleKind.COMPONENTS_ALL_COMPLIANT for r in policy.rules)
    if gate:
        components = evidence.components or ()
        for i, comp in enumerate(components):
            comp_policy = component_policies[i] if component_policies else policy
            comp_ends = component_endorsements[i] if component_endorsements else endorsements
            comp_refs = merge_reference_claims(comp_ends)
            comp_reasons = _evaluate_evidence(comp, comp_refs, comp_policy, None, clock)
            reasons.extend(f"component.{i}.{r}" for r in comp_reasons)
    return _make_result(verifier, evidence, policy, reasons, clock)


def appraise_result(result: AttestationResult, rp_policy: ResultPolicy, clock: int) -> bool:
    """Relying-party decision over a verifier's signed result."""
    if not result.verify_signature():
        return False
    if result.verifier not in rp_policy.accepted_verifiers:
        return False
    if clock - result.created_at > rp_policy.max_result_age:
        return False
    return result.verdict == rp_policy.required_verdict
