"""Remote-attestation protocol library and attestation-gated consortium
blockchain simulator."""

from .model import (
    AttestationResult,
    ClaimSet,
    ClaimValue,
    Digest,
    Endorsement,
    EntityId,
    Evidence,
    EvidencePolicy,
    GeoFence,
    GeoPoint,
    LayerRecord,
    ModelError,
    Nonce,
    PolicyRule,
    ResultPolicy,
    Role,
    RuleKind,
    SignerIdentity,
    SigningKey,
    Verdict,
    canonical_serialize,
    digest,
    keyed_digest,
    make_endorsement,
    new_nonce,
    verify_bytes,
)

__all__ = [
    "AttestationResult",
    "ClaimSet",
    "ClaimValue",
    "Digest",
    "Endorsement",
    "EntityId",
    "Evidence",
    "EvidencePolicy",
    "GeoFence",
    "GeoPoint",
    "LayerRecord",
    "ModelError",
    "Nonce",
    "PolicyRule",
    "ResultPolicy",
    "Role",
    "RuleKind",
    "SignerIdentity",
    "SigningKey",
    "Verdict",
    "canonical_serialize",
    "digest",
    "keyed_digest",
    "make_endorsement",
    "new_nonce",
    "verify_bytes",
]
