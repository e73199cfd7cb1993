import random

import pytest

from attestnet.attester import AttestingEnvironment
from attestnet.conveyance import (
    Decision,
    EvidenceMsg,
    FlowError,
    RelyingPartyContext,
    ResultMsg,
    Transport,
    VerifierContext,
    run_background_check_flow,
    run_passport_flow,
)
from attestnet.model import (
    ClaimSet,
    ClaimValue,
    EvidencePolicy,
    PolicyRule,
    ResultPolicy,
    Role,
    RuleKind,
    SignerIdentity,
    digest,
    make_endorsement,
)

from .conftest import random_env


def make_contexts(rng, env, rules=(), endorsements=None, freshness=10):
    policy = EvidencePolicy("flow-policy", tuple(rules), freshness)
    verifier = VerifierContext(
        SignerIdentity.create(Role.VERIFIER, "flow-verifier", rng),
        policy,
        list(endorsements or []),
        rng,
    )
    rp = RelyingPartyContext(
        SignerIdentity.create(Role.RELYING_PARTY, "flow-rp", rng),
        ResultPolicy((verifier.identity.entity,), max_result_age=10),
    )
    return verifier, rp


def endorse_env(rng, env):
    endorser = SignerIdentity.create(Role.ENDORSER, "flow-endorser", rng)
    refs = {
        f"sw.{name}.digest": ClaimValue.of_digest(digest(image))
        for name, image in env.sw_images
    }
    if not refs:
        refs = {"x": ClaimValue.of_int(0)}
    return make_endorsement(endorser, env.hw_model, ClaimSet(refs), 0)


def ref_rules(env):
    return [
        PolicyRule(f"ref.{name}", RuleKind.REFERENCE_MATCH, f"sw.{name}.digest")
        for name, _ in env.sw_images
    ]


class TestPassportFlow:
    def test_compliant_node_granted(self, attester, env, rng):
        verifier, rp = make_contexts(rng, env, ref_rules(env), [endorse_env(rng, env)])
        decision = run_passport_flow(attester, env, verifier, rp, Transport(), clock=0)
        assert decision == Decision(True)

    def test_result_tamper_denied_at_rp(self, attester, env, rng):
        verifier, rp = make_contexts(rng, env)

        def flip(raw: bytes) -> bytes:
            out = bytearray(raw)
            out[5] ^= 1
            return bytes(out)

        decision = run_passport_flow(
            attester, env, verifier, rp, Transport(), clock=0, result_tamper=flip
        )
        assert not decision.granted

    def test_replayed_evidence_denied(self, attester, env, rng):
        verifier, rp = make_contexts(rng, env)
        transport = Transport()
        first = run_passport_flow(attester, env, verifier, rp, transport, clock=0)
        assert first.granted
        replayed = next(m.evidence for m in transport.log if isinstance(m, EvidenceMsg))
        second = run_passport_flow(
            attester, env, verifier, rp, Transport(), clock=0, evidence_override=replayed
        )
        assert second == Decision(False, ("replay",))

    def test_rp_receives_verifier_bytes_unmodified(self, attester, env, rng):
        verifier, rp = make_contexts(rng, env)
        transport = Transport()
        run_passport_flow(attester, env, verifier, rp, transport, clock=0)
        result_msgs = [m for m in transport.log if isinstance(m, ResultMsg)]
        emitted = [m for m in result_msgs if m.sender == verifier.identity.entity]
        forwarded = [m for m in result_msgs if m.sender == attester.identity]
        assert emitted and forwarded
        assert emitted[0].result_bytes == forwarded[0].result_bytes

    def test_closed_transport_aborts(self, attester, env, rng):
        verifier, rp = make_contexts(rng, env)
        transport = Transport()
        transport.close()
        with pytest.raises(FlowError):
            run_passport_flow(attester, env, verifier, rp, transport, clock=0)


class TestBackgroundCheckFlow:
    def test_compliant_node_granted(self, attester, env, rng):
        verifier, rp = make_contexts(rng, env, ref_rules(env), [endorse_env(rng, env)])
        decision = run_background_check_flow(attester, env, rp, verifier, Transport(), clock=0)
        assert decision == Decision(True)

    def test_reference_mismatch_carries_rule_id(self, attester, env, rng):
        stale = make_endorsement(
            SignerIdentity.create(Role.ENDORSER, "e", rng),
            env.hw_model,
            ClaimSet({"sw.os.digest": ClaimValue.of_digest(digest(b"older image"))}),
            0,
        )
        verifier, rp = make_contexts(rng, env, ref_rules(env), [stale])
        decision = run_background_check_flow(attester, env, rp, verifier, Transport(), clock=0)
        assert not decision.granted
        assert "ref.os" in decision.reasons


class TestFlowProperties:
    def _random_setup(self, rng):
        env = random_env(rng)
        att = AttestingEnvironment.create(f"n{rng.randrange(1 << 30)}", rng, [])
        honest = rng.random() < 0.6
        if honest or not env.sw_images:
            endorsement = endorse_env(rng, env)
        else:
            name = env.sw_images[0][0]
            endorsement = make_endorsement(
                SignerIdentity.create(Role.ENDORSER, "e", rng),
                env.hw_model,
                ClaimSet({f"sw.{name}.digest": ClaimValue.of_digest(digest(b"wrong"))}),
                0,
            )
        rules = ref_rules(env)
        return env, att, rules, endorsement

    def test_flow_equivalence_randomized(self):
        rng = random.Random(5150)
        for _ in range(1000):
            env, att, rules, endorsement = self._random_setup(rng)
            v1, rp1 = make_contexts(rng, env, rules, [endorsement])
            d1 = run_passport_flow(att, env, v1, rp1, Transport(), clock=0)
            v2, rp2 = make_contexts(rng, env, rules, [endorsement])
            d2 = run_background_check_flow(att, env, rp2, v2, Transport(), clock=0)
            assert d1.granted == d2.granted
            assert d1.reasons == d2.reasons

    def test_replay_never_yields_two_grants(self, attester, env, rng):
        verifier, rp = make_contexts(rng, env)
        transport = Transport()
        assert run_passport_flow(attester, env, verifier, rp, transport, clock=0).granted
        ev = next(m.evidence for m in transport.log if isinstance(m, EvidenceMsg))
        grants = sum(
            run_passport_flow(
                attester, env, verifier, rp, Transport(), clock=0, evidence_override=ev
            ).granted
            for _ in range(5)
        )
        assert grants == 0

    def test_stale_evidence_never_compliant(self, attester, env, rng):
        # forced-clock: appraisal far beyond the freshness window
        verifier, rp = make_contexts(rng, env, freshness=2)
        nonce = verifier.issue_challenge(0)
        stale_ev = attester.generate_evidence(env, nonce, 0)
        decision = run_passport_flow(
            attester, env, verifier, rp, Transport(), clock=50, evidence_override=stale_ev
        )
        assert not decision.granted
