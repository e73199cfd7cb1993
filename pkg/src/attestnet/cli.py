"""Command-line front door: key generation, standalone appraisal, scenario
simulation, and ledger inspection.

Exit codes are a stable contract: 0 ok/compliant, 2 usage/parse error,
3 non-compliant, 4 unknown verdict, 5 integrity failure.
"""

from __future__ import annotations

import argparse
import random
import sys
from pathlib import Path

from . import consortium, scenario
from .model import (
    AttestationResult,
    Decoder,
    Encoder,
    Endorsement,
    EntityId,
    Evidence,
    EvidencePolicy,
    ModelError,
    Nonce,
    Role,
    SignerIdentity,
    SigningKey,
    Verdict,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NON_COMPLIANT = 3
EXIT_UNKNOWN = 4
EXIT_INTEGRITY = 5


# ---------------------------------------------------------------------------
# Identity files
# ---------------------------------------------------------------------------


def save_identity(identity: SignerIdentity, path: Path):
    enc = Encoder()
    enc.text(identity.entity.role.value)
    enc.text(identity.entity.name)
    enc.blob(identity.key.private_bytes)
    path.write_bytes(enc.getvalue())


def load_identity(path: Path) -> SignerIdentity:
    dec = Decoder(path.read_bytes())
    role = Role(dec.text())
    name = dec.text()
    key = SigningKey(dec.blob())
    dec.done()
    return SignerIdentity(EntityId(role, name, key.public_bytes), key)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_keygen(args) -> int:
    if not args.name:
        print("keygen: name must be non-empty", file=sys.stderr)
        return EXIT_USAGE
    try:
        role = Role(args.role)
    except ValueError:
        print(f"keygen: unknown role {args.role!r}", file=sys.stderr)
        return EXIT_USAGE
    rng = random.Random(args.seed)
    identity = SignerIdentity.create(role, args.name, rng)
    try:
        save_identity(identity, Path(args.out))
    except OSError as exc:
        print(f"keygen: cannot write {args.out}: {exc}", file=sys.stderr)
        return 1
    print(f"{role.value}:{args.name} {identity.entity.public_key.hex()}")
    return EXIT_OK


def cmd_appraise(args) -> int:
    from .verifier import appraise_evidence

    try:
        evidence = Evidence.from_bytes(Path(args.evidence).read_bytes())
        policy = EvidencePolicy.from_bytes(Path(args.policy).read_bytes())
        endorsements = [
            Endorsement.from_bytes(Path(p).read_bytes()) for p in args.endorsement
        ]
    except (OSError, ModelError, KeyError, ValueError) as exc:
        print(f"appraise: malformed input: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if args.nonce is not None:
        try:
            value = bytes.fromhex(args.nonce)
            expected = Nonce(value, evidence.nonce_echo.issued_at)
        except (ValueError, ModelError) as exc:
            print(f"appraise: bad nonce: {exc}", file=sys.stderr)
            return EXIT_USAGE
    else:
        expected = evidence.nonce_echo

    clock = args.clock if args.clock is not None else evidence.created_at
    verifier = SignerIdentity.create(Role.VERIFIER, "cli-verifier", random.Random(args.seed))
    result = appraise_evidence(evidence, endorsements, policy, expected, verifier, clock)

    if args.out:
        Path(args.out).write_bytes(result.to_bytes())
    print(f"verdict: {result.verdict.value}")
    for reason in result.reasons:
        print(reason)
    if result.verdict == Verdict.COMPLIANT:
        return EXIT_OK
    if result.verdict == Verdict.UNKNOWN:
        return EXIT_UNKNOWN
    return EXIT_NON_COMPLIANT


def cmd_simulate(args) -> int:
    try:
        cfg = scenario.load_scenario(args.scenario)
    except OSError as exc:
        print(f"simulate: cannot read scenario: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except scenario.ScenarioError as exc:
        print(f"simulate: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.seed is not None:
        cfg.seed = args.seed

    universe = scenario.build_universe(cfg)
    consortium.distribute_policies(universe)
    reports = [consortium.run_epoch(universe) for _ in range(cfg.epochs)]

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "epoch_reports.txt").write_text(
        "\n\n".join(r.render() for r in reports) + "\n", encoding="utf-8"
    )
    (out_dir / "ledger.hex").write_text(consortium.export_ledger(universe.ledger))
    (out_dir / "ledger.txt").write_text(
        "\n".join(consortium.render_block(b) for b in universe.ledger) + "\n"
    )
    tip = universe.ledger[-1].block_digest.hex() if universe.ledger else "(empty)"
    print(f"tip: {tip}")
    return EXIT_OK


def cmd_ledger(args) -> int:
    try:
        blocks = consortium.import_ledger(Path(args.ledger).read_text())
    except (OSError, ModelError, ValueError, KeyError) as exc:
        print(f"ledger: cannot decode export: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY if isinstance(exc, (ModelError, ValueError, KeyError)) else EXIT_USAGE
    if args.verify:
        fault = consortium.verify_chain(blocks)
        if fault is not None:
            print(f"ledger: integrity failure: {fault}", file=sys.stderr)
            return EXIT_INTEGRITY
        print(f"ledger ok: {len(blocks)} blocks")
        return EXIT_OK
    if args.height is not None:
        if not 0 <= args.height < len(blocks):
            print(f"ledger: height {args.height} beyond tip {len(blocks) - 1}", file=sys.stderr)
            return EXIT_USAGE
        print(consortium.render_block(blocks[args.height]))
        return EXIT_OK
    for block in blocks:
        print(consortium.render_block(block))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attestnet",
        description="Remote-attestation toolkit and attestation-gated consortium simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate and persist a role identity")
    p.add_argument("role", help="attester|verifier|relying_party|endorser|owner")
    p.add_argument("name")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("appraise", help="appraise an evidence file against a policy")
    p.add_argument("evidence")
    p.add_argument("policy")
    p.add_argument("--endorsement", action="append", default=[])
    p.add_argument("--nonce", help="expected nonce value, hex")
    p.add_argument("--clock", type=int, default=None)
    p.add_argument("--out", help="write the signed result here")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_appraise)

    p = sub.add_parser("simulate", help="run a scenario and export ledger + reports")
    p.add_argument("scenario")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ledger", help="inspect or verify a ledger export")
    p.add_argument("ledger")
    p.add_argument("--height", type=int, default=None)
    p.add_argument("--verify", action="store_true")
    p.set_defaults(func=cmd_ledger)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
