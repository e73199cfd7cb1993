"""Scenario configuration: a key-sorted JSON document describing products,
domains, nodes, faults, and consensus parameters, plus the builder that turns
one into a fully wired simulation universe.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Optional

from .attester import AttestingEnvironment, TargetEnvironment
from .consortium import ConsortiumConfig, Domain, FaultInjection, Node, SimError, Universe
from .conveyance import VerifierContext
from .model import (
    ClaimSet,
    ClaimValue,
    EvidencePolicy,
    GeoFence,
    GeoPoint,
    PolicyRule,
    Role,
    RuleKind,
    SignerIdentity,
    digest,
    make_endorsement,
)


class ScenarioError(ValueError):
    """Raised when a scenario document fails validation; message names the field."""


@dataclass
class ProductSpec:
    product_id: str
    fw_version: int
    sw_images: tuple[tuple[str, bytes], ...]


@dataclass
class NodeSpec:
    node_id: str
    domain_id: str
    product_id: str
    stake: int
    geo: GeoPoint


@dataclass
class DomainSpec:
    domain_id: str
    fw_min_version: Optional[int] = None  # differing value induces a policy conflict


@dataclass
class ScenarioConfig:
    seed: int
    epochs: int
    epoch_length: int
    fw_min_version: int
    majority_parameter: int
    raised_majority: int
    diversity_threshold: float
    geo_fence: Optional[GeoFence]
    products: list[ProductSpec]
    domains: list[DomainSpec]
    nodes: list[NodeSpec]
    faults: list[FaultInjection] = field(default_factory=list)
    permissionless: bool = False


def _require(doc: dict, key: str, where: str):
    if key not in doc:
        raise ScenarioError(f"{where}: missing required field {key!r}")
    return doc[key]


def parse_scenario(text: str) -> ScenarioConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario is not valid JSON: {exc}") from exc

    seed = _require(doc, "seed", "scenario")
    if not isinstance(seed, int):
        raise ScenarioError("scenario: seed must be an integer")

    fence = None
    if doc.get("geo_fence"):
        f = doc["geo_fence"]
        fence = GeoFence(
            _require(f, "lat_min", "geo_fence"), _require(f, "lat_max", "geo_fence"),
            _require(f, "lon_min", "geo_fence"), _require(f, "lon_max", "geo_fence"),
        )

    products = []
    image_names = set()
    for p in _require(doc, "products", "scenario"):
        pid = _require(p, "product_id", "product")
        images = []
        for name, content in sorted(_require(p, "sw_images", f"product {pid}").items()):
            if name in image_names:
                raise ScenarioError(f"product {pid}: sw image name {name!r} reused across products")
            image_names.add(name)
            images.append((name, content.encode("utf-8")))
        products.append(ProductSpec(pid, int(p.get("fw_version", 1)), tuple(images)))
    product_ids = {p.product_id for p in products}

    domains = []
    for d in _require(doc, "domains", "scenario"):
        domains.append(DomainSpec(_require(d, "domain_id", "domain"), d.get("fw_min_version")))
    domain_ids = {d.domain_id for d in domains}

    nodes = []
    for n in _require(doc, "nodes", "scenario"):
        nid = _require(n, "node_id", "node")
        did = _require(n, "domain_id", f"node {nid}")
        pid = _require(n, "product_id", f"node {nid}")
        if did not in domain_ids:
            raise ScenarioError(f"node {nid}: unknown domain {did!r}")
        if pid not in product_ids:
            raise ScenarioError(f"node {nid}: unknown product {pid!r}")
        geo = n.get("geo", [0.0, 0.0, 0.0])
        nodes.append(NodeSpec(nid, did, pid, int(n.get("stake", 1)), GeoPoint(*geo)))
    node_ids = {n.node_id for n in nodes}

    faults = []
    for f in doc.get("faults", []):
        nid = _require(f, "node_id", "fault")
        if nid not in node_ids:
            raise ScenarioError(f"fault: unknown node {nid!r}")
        mutation = _require(f, "mutation", f"fault on {nid}")
        if mutation not in ("flip_sw_byte", "change_fw", "move_geo", "clone_config"):
            raise ScenarioError(f"fault on {nid}: unknown mutation {mutation!r}")
        if mutation == "clone_config" and f.get("from_node") not in node_ids:
            raise ScenarioError(f"fault on {nid}: clone_config needs a known from_node")
        faults.append(
            FaultInjection(
                tick=int(_require(f, "tick", f"fault on {nid}")),
                node_id=nid,
                mutation=mutation,
                lat=float(f.get("lat", 0.0)),
                lon=float(f.get("lon", 0.0)),
                fw_version=int(f.get("fw_version", 0)),
                from_node=f.get("from_node", ""),
            )
        )

    return ScenarioConfig(
        seed=seed,
        epochs=int(_require(doc, "epochs", "scenario")),
        epoch_length=int(doc.get("epoch_length", 10)),
        fw_min_version=int(doc.get("fw_min_version", 1)),
        majority_parameter=int(doc.get("majority_parameter", 51)),
        raised_majority=int(doc.get("raised_majority", 70)),
        diversity_threshold=float(doc.get("diversity_threshold", 0.5)),
        geo_fence=fence,
        products=products,
        domains=domains,
        nodes=nodes,
        faults=faults,
        permissionless=bool(doc.get("permissionless", False)),
    )


def load_scenario(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


# ---------------------------------------------------------------------------
# Universe construction
# ---------------------------------------------------------------------------


def _policy_for(cfg: ScenarioConfig, policy_id: str, fw_min: int) -> EvidencePolicy:
    rules = [
        PolicyRule("fw.min", RuleKind.VERSION_AT_LEAST, "fw.version", fw_min),
    ]
    for product in cfg.products:
        for name, _ in product.sw_images:
            rules.append(
                PolicyRule(f"ref.sw.{name}", RuleKind.REFERENCE_MATCH, f"sw.{name}.digest")
            )
    if cfg.geo_fence is not None:
        rules.append(PolicyRule("geo.fence", RuleKind.GEO_FENCE, "geo", fence=cfg.geo_fence))
    return EvidencePolicy(
        policy_id, tuple(rules), cfg.epoch_length, required_claims=("config.digest",)
    )


def build_universe(cfg: ScenarioConfig) -> Universe:
    rng = random.Random(cfg.seed)

    endorser = SignerIdentity.create(Role.ENDORSER, "supply-chain", rng)
    endorsements = []
    for product in cfg.products:
        refs = {
            f"sw.{name}.digest": ClaimValue.of_digest(digest(image))
            for name, image in product.sw_images
        }
        endorsements.append(
            make_endorsement(endorser, product.product_id, ClaimSet(refs), issued_at=0)
        )

    consortium_policy = _policy_for(cfg, "consortium", cfg.fw_min_version)
    cv = VerifierContext(
        SignerIdentity.create(Role.VERIFIER, "consortium-verifier", rng),
        consortium_policy, list(endorsements), rng,
    )
    config = ConsortiumConfig(
        consortium_verifier=cv,
        consortium_policy=consortium_policy,
        majority_parameter=cfg.majority_parameter,
        diversity_threshold=cfg.diversity_threshold,
        raised_majority=cfg.raised_majority,
        geo_fence=cfg.geo_fence,
        epoch_length=cfg.epoch_length,
    )
    universe = Universe(config, cfg.seed, permissionless=cfg.permissionless)
    universe.faults = list(cfg.faults)

    products_by_id = {p.product_id: p for p in cfg.products}
    for dspec in cfg.domains:
        fw_min = dspec.fw_min_version if dspec.fw_min_version is not None else cfg.fw_min_version
        dv = VerifierContext(
            SignerIdentity.create(Role.VERIFIER, f"dv-{dspec.domain_id}", rng),
            _policy_for(cfg, f"domain-{dspec.domain_id}", fw_min), list(endorsements), rng,
        )
        owner = SignerIdentity.create(Role.OWNER, f"owner-{dspec.domain_id}", rng)
        universe.add_domain(Domain(dspec.domain_id, owner, dv))

    for nspec in cfg.nodes:
        product = products_by_id[nspec.product_id]
        env = TargetEnvironment(
            hw_model=product.product_id,
            fw_version=product.fw_version,
            sw_images=product.sw_images,
            geo=nspec.geo,
            stake=nspec.stake,
        )
        attesting = AttestingEnvironment.create(nspec.node_id, rng, [env.config_digest()])
        lv = VerifierContext(
            SignerIdentity.create(Role.VERIFIER, f"lv-{nspec.node_id}", rng),
            consortium_policy, list(endorsements), rng,
        )
        universe.add_node(Node(nspec.node_id, nspec.domain_id, attesting, env, lv))

    if not universe.nodes:
        raise SimError("scenario defines no nodes")
    return universe
