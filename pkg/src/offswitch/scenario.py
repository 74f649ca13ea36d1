"""JSON scenario files: validation, end-to-end runs and their output directory.

A scenario names one seed. Every random choice hangs off a named substream of
it, and each campaign gets its own freshly built fleet, so campaigns can run in
any order or in parallel and still produce the same reports.
"""

from __future__ import annotations

import json
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Tuple

from . import attacks, authorizer, crypto, fleet as fl, transport, variants
from .chip import EditModel, audit_bypass, dump_topology
from .types import BlockKind

TOP_KEYS = {"seed", "fleet", "policy", "authorizer", "channel", "simulation", "campaigns", "events"}
CAMPAIGN_TYPES = {"replay", "glitch", "edit", "edit_trials", "extraction", "forgery", "preshared_bruteforce",
                  "key_theft"}
EVENT_ACTIONS = {"destroy_keys", "restore_keys"}
PROBABILITY_KEYS = {"p_flip", "detector_p", "coverage", "p_success", "p_damage", "revealed_fraction", "loss"}


class ScenarioError(ValueError):
    """Invalid scenario; ``line`` points into the source text when known."""

    def __init__(self, message: str, line: Optional[int] = None, source: str = "<scenario>"):
        self.message = message
        self.line = line
        self.source = source
        where = f"{source}:{line}" if line else source
        super().__init__(f"{where}: {message}")


class InvariantViolation(RuntimeError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    fleet: fl.FleetSpec
    policy: authorizer.IssuancePolicy
    cadence: int = fl.DAY
    batches: int = 1
    quorum: Tuple[int, int] = (1, 1)
    shares: Optional[Tuple[str, ...]] = None
    backups: int = 1
    outages: Tuple[Tuple[float, float], ...] = ()
    loss: float = 0.0
    latency: float = 0.0
    days: float = 7.0
    tick: int = fl.HOUR
    campaigns: Tuple[dict, ...] = ()
    events: Tuple[dict, ...] = ()


# -- parsing ------------------------------------------------------------------


def _line_of(text: str, key: str) -> Optional[int]:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def parse_config(text: str, source: str = "<scenario>") -> ScenarioConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(exc.msg, exc.lineno, source) from None

    def fail(msg, key=None):
        raise ScenarioError(msg, _line_of(text, key) if key else None, source)

    if not isinstance(raw, dict):
        fail("top level must be an object")
    for k in raw:
        if k not in TOP_KEYS:
            fail(f"unknown section {k!r}", k)
    seed = raw.get("seed")
    if not isinstance(seed, int) or seed < 0:
        fail("seed must be a non-negative integer", "seed")

    f = raw.get("fleet", {})
    mix = f.get("mix", {"EcdsaTrng": 1.0})
    if not isinstance(mix, dict) or not mix:
        fail("fleet.mix must be a non-empty object of kind -> fraction", "mix")
    for name, frac in mix.items():
        try:
            BlockKind.parse(name)
        except ValueError:
            fail(f"unknown block kind {name!r}", "mix")
        if not isinstance(frac, (int, float)) or not 0.0 <= frac <= 1.0:
            fail(f"fraction for {name} must lie in [0, 1]", name)
    if not math.isclose(sum(mix.values()), 1.0, abs_tol=1e-9):
        fail(f"fleet.mix fractions sum to {sum(mix.values()):g}, not 1", "mix")
    schemes = tuple(f.get("schemes", ["EcdsaP256"]))
    for s in schemes:
        try:
            crypto.Scheme.parse(s)
        except crypto.UnsupportedScheme as exc:
            fail(str(exc), "schemes")
    try:
        spec = fl.FleetSpec(
            chips=int(f.get("chips", 2)), rows=int(f.get("rows", 3)), cols=int(f.get("cols", 3)),
            blocks_per_edge=int(f.get("blocks_per_edge", 2)), mix=tuple(mix.items()), schemes=schemes,
            batches=int(raw.get("authorizer", {}).get("batches", 1)),
            shared_symmetric_key=bool(f.get("shared_symmetric_key", False)),
            preshared_bits=int(f.get("preshared_bits", variants.DEFAULT_PRESHARED_BITS)),
            challenge_bits=int(f.get("challenge_bits", variants.DEFAULT_CHALLENGE_BITS)),
            antifuse_capacity=int(f.get("antifuse_capacity", variants.DEFAULT_ANTIFUSE_CAPACITY)),
            ungated_edges=tuple(tuple(e) for e in f.get("ungated_edges", ())))
    except (TypeError, ValueError) as exc:
        fail(f"fleet: {exc}", "fleet")
    if spec.chips < 1 or spec.rows < 1 or spec.cols < 1 or spec.blocks_per_edge < 0:
        fail("fleet dimensions must be positive", "fleet")

    p = raw.get("policy", {})
    try:
        policy = authorizer.IssuancePolicy(int(p.get("grant_ops", 72)), int(p.get("validity_seconds", 3 * fl.DAY)),
                                           int(p.get("licenses_per_period", 1)), bool(p.get("top_up", False)))
    except (TypeError, ValueError) as exc:
        fail(f"policy: {exc}", "policy")
    cadence = int(p.get("cadence_seconds", fl.DAY))
    if cadence <= 0:
        fail("policy.cadence_seconds must be > 0", "cadence_seconds")

    a = raw.get("authorizer", {})
    quorum = tuple(a.get("quorum", [1, 1]))
    if len(quorum) != 2 or not 1 <= quorum[0] <= quorum[1]:
        fail("authorizer.quorum must be [m, n] with 1 <= m <= n", "quorum")
    shares = tuple(a["shares"]) if "shares" in a else None

    c = raw.get("channel", {})
    outages = []
    for w in c.get("outages_days", []):
        if len(w) != 2 or w[1] < w[0]:
            fail(f"outage window {w} must be [start_day, end_day]", "outages_days")
        outages.append((w[0] * fl.DAY, w[1] * fl.DAY))

    sim = raw.get("simulation", {})
    campaigns = raw.get("campaigns", [])
    for camp in campaigns:
        if camp.get("type") not in CAMPAIGN_TYPES:
            fail(f"unknown campaign type {camp.get('type')!r}", "type")
    for section in [c] + list(campaigns):
        for k, v in section.items():
            if k in PROBABILITY_KEYS and not (isinstance(v, (int, float)) and 0.0 <= v <= 1.0):
                fail(f"{k} = {v!r} is not a probability in [0, 1]", k)
    events = raw.get("events", [])
    for ev in events:
        if ev.get("action") not in EVENT_ACTIONS:
            fail(f"unknown event action {ev.get('action')!r}", "action")

    return ScenarioConfig(
        seed=seed, fleet=spec, policy=policy, cadence=cadence, batches=spec.batches,
        quorum=(int(quorum[0]), int(quorum[1])), shares=shares, backups=int(a.get("backups", 1)),
        outages=tuple(outages), loss=float(c.get("loss", 0.0)), latency=float(c.get("latency", 0.0)),
        days=float(sim.get("days", 7)), tick=int(sim.get("tick_seconds", fl.HOUR)),
        campaigns=tuple(campaigns), events=tuple(events))


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read: {exc.strerror}", source=str(path)) from None
    return parse_config(text, str(path))


# -- building -------------------------------------------------------------------


def make_fleet(cfg: ScenarioConfig) -> fl.Fleet:
    keyring = authorizer.AuthorizerKeyring(cfg.quorum)
    shares = cfg.shares if cfg.shares is not None else keyring.holders[: cfg.quorum[0]]
    return fl.build_fleet(cfg.fleet, cfg.policy, cfg.seed, keyring, shares, cfg.backups)


def _event_hook(ev: dict):
    if ev["action"] == "destroy_keys":
        return lambda f: f.keyring.destroy_keys(ev.get("batches", [0]), bool(ev.get("backups_also", False)))
    return lambda f: [f.keyring.restore_from_backup(b) for b in ev.get("batches", [0])]


def simulate_scenario(cfg: ScenarioConfig, captured: Optional[list] = None):
    fleet = make_fleet(cfg)
    channel = transport.ChannelModel(cfg.outages, cfg.loss, cfg.latency, fl.substream(cfg.seed, "channel"))
    events = [(int(ev["day"] * fl.DAY), _event_hook(ev)) for ev in cfg.events]
    timeline = fl.simulate(fleet, cfg.days, channel, cfg.cadence, cfg.tick, events, captured)
    return fleet, timeline


# -- campaigns ----------------------------------------------------------------------


def run_campaign(cfg: ScenarioConfig, index: int, camp: dict) -> attacks.AttackReport:
    kind = camp["type"]
    seed = fl.substream(cfg.seed, f"campaign{index}/{kind}")
    fleet = make_fleet(cfg)
    chip = fleet.chips[0]
    if kind == "replay":
        captured: list = []
        for day in range(int(camp.get("capture_rounds", 2))):
            fl.license_round(fleet, day * cfg.cadence, captured=captured)
        clock = int(camp.get("capture_rounds", 2)) * cfg.cadence
        attacks._challenge_all(fleet.chips, fleet.entropy, clock)
        from . import planted

        apply = planted.apply_license_ignoring_nonce if camp.get("planted") else None
        report = attacks.replay_campaign(fleet.chips, captured, int(camp.get("trials", 10_000)), clock,
                                         bool(camp.get("cross_chip", False)), apply, seed)
    elif kind == "glitch":
        model = attacks.GlitchModel(float(camp.get("p_flip", 0.3)), float(camp.get("detector_p", 0.0)),
                                    bool(camp.get("timing_randomized", False)), float(camp.get("coverage", 0.5)))
        targets = camp.get("targets", "weakest_path")
        if targets == "weakest_path":
            path = audit_bypass(chip.topology).weakest_path
            targets = [b for e in zip(path, path[1:]) for b in chip.topology.gate_map.get(e, ())]
            report = attacks.glitch_campaign(model, targets, int(camp.get("trials", 10_000)), seed, chip)
        else:
            report = attacks.glitch_campaign(model, int(targets), int(camp.get("trials", 10_000)), seed)
    elif kind == "edit":
        model = EditModel(float(camp.get("p_success", 0.95)), float(camp.get("p_damage", 0.1)))
        report = attacks.edit_campaign(chip, model, camp.get("strategy", "weakest_path"), seed)
    elif kind == "edit_trials":
        model = EditModel(float(camp.get("p_success", 0.95)), float(camp.get("p_damage", 0.1)))
        report = attacks.edit_campaign_trials(int(camp["n_edits"]), model, int(camp.get("trials", 10_000)), seed)
    elif kind == "extraction":
        report = attacks.extraction_campaign(fleet.chips, int(camp.get("blocks_scanned_per_day", 1)),
                                             float(camp.get("days", 1)), seed, fleet.entropy)
    elif kind == "forgery":
        report = attacks.forgery_campaign(chip, camp.get("broken_scheme"), seed, fleet.entropy,
                                          preshared_revealed_fraction=float(camp.get("revealed_fraction", 0.5)),
                                          preshared_delay=float(camp.get("delay", 1.0)))
    elif kind == "preshared_bruteforce":
        report = attacks.preshared_forgery_campaign(int(camp["n"]), int(camp["k"]),
                                                    float(camp.get("revealed_fraction", 0.5)),
                                                    int(camp.get("trials", 1000)), seed,
                                                    float(camp.get("delay", 1.0)))
    else:
        report = attacks.key_theft_campaign(fleet, int(camp.get("batch", 0)), seed)
    if "name" in camp:
        report = replace(report, campaign=str(camp["name"]))
    return report


def _run_indexed(args):
    cfg, i, camp = args
    return i, run_campaign(cfg, i, camp)


def run_campaigns(cfg: ScenarioConfig, jobs: int = 1) -> List[attacks.AttackReport]:
    work = [(cfg, i, camp) for i, camp in enumerate(cfg.campaigns)]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            done = list(pool.map(_run_indexed, work))
    else:
        done = [_run_indexed(w) for w in work]
    return [r for _, r in sorted(done, key=lambda ir: (ir[1].campaign, ir[0]))]


# -- full run -------------------------------------------------------------------------


@dataclass
class RunResult:
    metrics: dict
    reports: List[attacks.AttackReport] = field(default_factory=list)


def _golden_bundles(cfg: ScenarioConfig):
    """Wire bytes of one pristine licensing exchange per chip."""
    fleet = make_fleet(cfg)
    out = []
    for chip in fleet.chips:
        nb, _ = transport.collector_gather(chip, fleet.entropy, 0)
        lb = fleet.keyring.issue_licenses(fleet.policy, nb, 0, fleet.shares, chip.batch_id)
        out.append((chip.chip_id, transport.encode_nonce_bundle(nb), transport.encode_license_bundle(lb)))
    return out


def run_scenario(cfg: ScenarioConfig, out_dir=None, jobs: int = 1) -> RunResult:
    captured: list = []
    fleet, timeline = simulate_scenario(cfg, captured)
    if timeline.ops_executed > timeline.ops_granted:
        raise InvariantViolation(f"executed {timeline.ops_executed} ops but only {timeline.ops_granted} granted")
    for c, idx, s in fleet.all_states():
        if s.allowance < 0:
            raise InvariantViolation(f"negative allowance on {s.id}")
    total_blocks = sum(len(c.states) for c in fleet.chips)
    licensed = {lic.block for lic in captured}
    kinds = {}
    for _, _, s in fleet.all_states():
        kinds[s.kind.label] = kinds.get(s.kind.label, 0) + 1
    reports = run_campaigns(cfg, jobs)
    lic = timeline.licensing
    metrics = {
        "seed": cfg.seed,
        "fleet": {"chips": len(fleet.chips), "blocks": total_blocks, "kinds": kinds},
        "licensing": {"nonces": lic.nonces, "issued": lic.issued, "accepted": lic.accepted,
                      "rejected": dict(sorted(lic.rejected.items())), "lost_messages": lic.lost,
                      "refused_rounds": lic.refused, "nonce_bytes": lic.nonce_bytes,
                      "license_bytes": lic.license_bytes},
        "blocks_licensed": len(licensed),
        "all_blocks_licensed": len(licensed) == total_blocks,
        "timeline": {"days": cfg.days,
                     "halted_at": {str(k): v for k, v in sorted(timeline.halted_at.items())},
                     "halted_fraction": timeline.halted_fraction,
                     "ops_executed": timeline.ops_executed, "ops_granted": timeline.ops_granted},
        "audit": {str(c.chip_id): _audit_summary(c) for c in fleet.chips},
        "campaigns": [r.to_dict() for r in reports],
        "attack_successes": sum(r.successes for r in reports),
    }
    if out_dir is not None:
        write_outputs(cfg, metrics, reports, Path(out_dir))
    return RunResult(metrics, reports)


def _audit_summary(chip) -> dict:
    rep = audit_bypass(chip.topology)
    return {"min_gates_on_any_path": rep.min_gates_on_any_path,
            "ungated_edges": [list(e) for e in rep.ungated_edges]}


def write_outputs(cfg: ScenarioConfig, metrics: dict, reports, out: Path):
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_text(json.dumps(metrics, sort_keys=True, indent=2) + "\n")
    (out / "campaigns.csv").write_text(attacks.reports_to_csv(reports))
    (out / "campaigns.jsonl").write_text("".join(r.to_json() + "\n" for r in reports))
    topo_dir = out / "topology"
    topo_dir.mkdir(exist_ok=True)
    fleet = make_fleet(cfg)
    for chip in fleet.chips:
        (topo_dir / f"chip{chip.chip_id}.txt").write_text(dump_topology(chip.topology))
    bundle_dir = out / "bundles"
    bundle_dir.mkdir(exist_ok=True)
    for chip_id, nonce_wire, license_wire in _golden_bundles(cfg):
        (bundle_dir / f"chip{chip_id}.nonce.hex").write_text(nonce_wire.hex() + "\n")
        (bundle_dir / f"chip{chip_id}.license.hex").write_text(license_wire.hex() + "\n")


def with_seed(cfg: ScenarioConfig, seed: int) -> ScenarioConfig:
    return replace(cfg, seed=seed)
