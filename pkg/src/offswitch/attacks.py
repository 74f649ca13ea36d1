"""Adversary campaigns against fleets, each producing an :class:`AttackReport`.

The attacker knows the design, topology and public keys. It does not know
private keys, symmetric secrets it has not scanned, or unrevealed pre-shared
bits. Every campaign is deterministic for a given seed.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np

from . import block_model as bm
from . import crypto, kernels, transport, variants
from .authorizer import forge_with_key
from .chip import (Chip, ChipTopology, Delivered, EditCampaignState, EditModel, Packet, attempt_circuit_edit,
                   audit_bypass, path_to_address, route_packet)
from .types import BlockId, BlockKind, License

CSV_FIELDS = ("campaign", "attempts", "successes", "blocks_defeated", "chip_functional", "wall_model_seconds",
              "seed", "notes")


@dataclass
class AttackReport:
    campaign: str
    attempts: int = 0
    successes: int = 0
    blocks_defeated: int = 0
    chip_functional: bool = False
    wall_model_seconds: float = 0.0
    seed: int = 0
    notes: str = ""
    extra: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.successes > self.attempts:
            raise ValueError("successes cannot exceed attempts")

    @property
    def success_rate(self) -> float:
        return self.successes / self.attempts if self.attempts else 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def merge_reports(reports: Iterable[AttackReport]) -> AttackReport:
    """Sum trial counts from independent shards of one campaign."""
    reports = list(reports)
    if not reports:
        raise ValueError("nothing to merge")
    names = {r.campaign for r in reports}
    if len(names) != 1:
        raise ValueError(f"cannot merge different campaigns: {sorted(names)}")
    return AttackReport(
        campaign=reports[0].campaign,
        attempts=sum(r.attempts for r in reports),
        successes=sum(r.successes for r in reports),
        blocks_defeated=sum(r.blocks_defeated for r in reports),
        chip_functional=any(r.chip_functional for r in reports),
        wall_model_seconds=sum(r.wall_model_seconds for r in reports),
        seed=min(r.seed for r in reports),
        notes="; ".join(sorted({r.notes for r in reports if r.notes})),
    )


def reports_to_csv(reports: Sequence[AttackReport]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in sorted(reports, key=lambda r: r.campaign):
        row = {k: getattr(r, k) for k in CSV_FIELDS}
        row["wall_model_seconds"] = f"{r.wall_model_seconds:.6g}"
        w.writerow(row)
    return buf.getvalue()


# -- helpers -------------------------------------------------------------------


def _challenge_all(chips: Sequence[Chip], entropy, clock: int = 0):
    for chip in chips:
        transport.collector_gather(chip, entropy, clock)


def path_unlocked(chip: Chip, usable: Callable[[bm.SecurityBlockState], bool]) -> Optional[tuple]:
    """Entry-to-exit path on which every gating block is ``usable``, or None."""
    topo = chip.topology
    masked = {e: tuple(b for b in gates if not usable(chip.states[b.index])) for e, gates in topo.gate_map.items()}
    report = audit_bypass(replace(topo, gate_map=masked))
    if report.min_gates_on_any_path == 0:
        return report.weakest_path
    return None


def workload_runs(chip: Chip, path: Sequence[str]) -> bool:
    packet = Packet(path_to_address(path), entry_row=int(path[0].split(":")[1]))
    _, result = route_packet(chip.topology, chip.states, packet, chip.damaged)
    return isinstance(result, Delivered) and not result.faulty


# -- license reuse -----------------------------------------------------------------


def replay_campaign(chips: Sequence[Chip], captured: Sequence[License], trials: int, clock: int = 0,
                    cross_chip: bool = False, apply=None, seed: int = 0) -> AttackReport:
    """Re-submit previously accepted licenses to blocks that now hold fresh nonces.

    ``apply`` swaps the block's license check (used with planted-bug fixtures).
    With ``cross_chip`` each license is aimed at the same block index on the
    next chip instead of its own block.
    """
    apply = apply or bm.apply_license
    if not captured:
        raise ValueError("no captured licenses")
    by_id = {c.chip_id: c for c in chips}
    ids = sorted(by_id)
    successes = 0
    defeated = set()
    for t in range(trials):
        lic = captured[t % len(captured)]
        chip_id = lic.block.chip_id
        if cross_chip:
            chip_id = ids[(ids.index(chip_id) + 1) % len(ids)]
        chip = by_id.get(chip_id)
        if chip is None or lic.block.index not in chip.states:
            continue
        state = chip.states[lic.block.index]
        try:
            new = apply(state, lic, clock)
        except bm.LicenseRejected:
            continue
        if new.allowance > state.allowance:
            successes += 1
            defeated.add((chip_id, lic.block.index))
        chip.states[lic.block.index] = new
    name = "license_reuse_cross_chip" if cross_chip else "license_reuse"
    return AttackReport(name, trials, successes, len(defeated), successes > 0, seed=seed)


# -- glitching ---------------------------------------------------------------------


@dataclass(frozen=True)
class GlitchModel:
    p_flip: float = 0.3
    detector_p: float = 0.0
    timing_randomized: bool = False
    # fraction of blocks one pulse lands on when check timing is randomized
    coverage: float = 0.5

    def __post_init__(self):
        for p in (self.p_flip, self.detector_p, self.coverage):
            if not 0.0 <= p <= 1.0:
                raise ValueError("glitch probabilities must lie in [0, 1]")


def glitch_campaign(model: GlitchModel, targets, trials: int, seed: int, chip: Optional[Chip] = None) -> AttackReport:
    """Each trial must flip the license check of every target in one window.

    ``targets`` is a block count or a list of BlockIds on ``chip``. With a
    chip, success also requires the targets to cover some entry-to-exit path.
    """
    if isinstance(targets, int):
        target_ids = None
        n = targets
    else:
        target_ids = set(targets)
        n = len(target_ids)
    coverage = model.coverage if model.timing_randomized else 1.0
    successes, trips, defeated = kernels.glitch_trials(seed & ((1 << 64) - 1), trials, n, model.p_flip,
                                                      model.detector_p, coverage)
    functional = successes > 0
    if chip is not None and target_ids is not None:
        functional = functional and path_unlocked(chip, lambda s: s.id in target_ids) is not None
    return AttackReport("glitching", trials, successes, defeated, functional, seed=seed,
                        extra={"detector_trips": trips, "targets": n})


# -- physical edits ------------------------------------------------------------------


def edit_targets(chip: Chip, strategy, rng: np.random.Generator) -> List[BlockId]:
    """Blocks chosen by an edit strategy.

    ``"weakest_path"`` takes every block on the least-gated path (a cut for that
    path); ``"random:K"`` takes K random blocks; a list is used as given.
    """
    topo = chip.topology
    if isinstance(strategy, (list, tuple)):
        return list(strategy)
    if strategy == "weakest_path":
        path = audit_bypass(topo).weakest_path
        return [b for e in zip(path, path[1:]) for b in topo.gate_map.get(e, ())]
    if isinstance(strategy, str) and strategy.startswith("random:"):
        k = int(strategy.split(":", 1)[1])
        ids = topo.block_ids
        return [ids[i] for i in sorted(rng.choice(len(ids), size=min(k, len(ids)), replace=False))]
    raise ValueError(f"unknown edit strategy {strategy!r}")


def edit_campaign(chip: Chip, edit_model: EditModel, strategy, seed: int) -> AttackReport:
    """FIB-edit the chosen blocks, then try to run a workload without any license."""
    rng = np.random.Generator(np.random.PCG64(seed))
    targets = edit_targets(chip, strategy, rng)
    campaign = EditCampaignState()
    for b in targets:
        chip.states, campaign = attempt_circuit_edit(chip.topology, chip.states, campaign, b, edit_model, rng)
    chip.damaged = chip.damaged | campaign.collateral_damage
    path = path_unlocked(chip, lambda s: s.disabled_by_edit)
    functional = path is not None and workload_runs(chip, path)
    return AttackReport("physical_tampering", max(1, len(targets)), int(functional), len(campaign.blocks_bypassed),
                        functional, seed=seed,
                        extra={"edits": campaign.edits_attempted, "damaged_nodes": len(campaign.collateral_damage)})


def edit_campaign_trials(n_edits: int, edit_model: EditModel, trials: int, seed: int) -> AttackReport:
    """Monte-Carlo over whole campaigns of ``n_edits`` independent edits."""
    undamaged, unlocked = kernels.edit_trials(seed & ((1 << 64) - 1), trials, n_edits, edit_model.p_success,
                                              edit_model.p_damage)
    return AttackReport("physical_tampering_mc", trials, unlocked, 0, unlocked > 0, seed=seed,
                        extra={"undamaged": undamaged, "edits_per_campaign": n_edits})


# -- secret extraction -------------------------------------------------------------------


def _forge_with_secret(state: bm.SecurityBlockState, secret, grant: int, expiry: int) -> Optional[License]:
    pending = state.pending_nonce
    if pending is None:
        return None
    cfg = state.config
    if cfg.kind is BlockKind.SYMMETRIC_MAC and isinstance(secret, crypto.SymmetricKey):
        lic = License(state.id, pending.value, grant, expiry, b"\x00", cfg.batch_id)
        return replace(lic, proof=crypto.mac_tag(secret, lic.payload()))
    if cfg.kind is BlockKind.PRESHARED_BITS and isinstance(secret, variants.PresharedSecret):
        bits = [secret.bit(p) for p in pending.positions]
        return License(state.id, pending.value, cfg.preshared_grant, expiry, variants.pack_payload(bits), cfg.batch_id)
    return None


def extraction_campaign(chips: Sequence[Chip], blocks_scanned_per_day: int, days: float, seed: int,
                        entropy=None, clock: int = 0) -> AttackReport:
    """Scan blocks one at a time, then try every stolen secret where it might fit.

    A symmetric key is tried on blocks carrying the same (public) key id; a
    pre-shared secret only on its own block. Signature blocks yield nothing.
    Forgeability is decided by the blocks themselves.
    """
    from .entropy import EntropySource

    rng = np.random.Generator(np.random.PCG64(seed))
    entropy = entropy or EntropySource(seed & ((1 << 63) - 1), label="extraction")
    everything = [(c, idx) for c in chips for idx in sorted(c.states)]
    budget = min(len(everything), int(blocks_scanned_per_day * days))
    order = rng.permutation(len(everything))[:budget]
    by_key_id: Dict[int, crypto.SymmetricKey] = {}
    own: Dict[BlockId, variants.PresharedSecret] = {}
    for i in order:
        chip, idx = everything[i]
        v = chip.states[idx].config.verifier
        if isinstance(v, crypto.SymmetricKey):
            by_key_id[v.key_id] = v
        elif isinstance(v, variants.PresharedSecret):
            own[chip.states[idx].id] = v
    _challenge_all(chips, entropy, clock)
    forgeable = 0
    unlocked = 0
    for chip in chips:
        for idx in sorted(chip.states):
            state = chip.states[idx]
            v = state.config.verifier
            secret = by_key_id.get(v.key_id) if isinstance(v, crypto.SymmetricKey) else own.get(state.id)
            if secret is None:
                continue
            lic = _forge_with_secret(state, secret, 1_000, clock + 86_400)
            try:
                chip.states[idx] = bm.apply_license(state, lic, clock)
                forgeable += 1
            except bm.LicenseRejected:
                pass
        if path_unlocked(chip, lambda s: s.allowance > 0) is not None:
            unlocked += 1
    return AttackReport("secret_extraction", max(1, len(chips)), unlocked, forgeable, unlocked > 0,
                        wall_model_seconds=days * 86_400, seed=seed,
                        extra={"scanned": budget, "forgeable": forgeable})


# -- cryptographic breaks -------------------------------------------------------------


def forgery_campaign(chip: Chip, broken_scheme=None, seed: int = 0, entropy=None, clock: int = 0,
                     preshared_revealed_fraction: float = 0.5, preshared_delay: float = 1.0) -> AttackReport:
    """Forge licenses for every block whose signature scheme is broken.

    A success is the chip running a workload afterwards; ``blocks_defeated``
    counts forged blocks. Pre-shared blocks are not forged outright; their cost comes from the
    brute-force model and is reported as attacker time.
    """
    from .entropy import EntropySource

    entropy = entropy or EntropySource(seed & ((1 << 63) - 1), label="forgery")
    _challenge_all([chip], entropy, clock)
    forged = 0
    attempts = 0
    schemes = [broken_scheme] if broken_scheme else []
    with crypto.broken_schemes(schemes):
        for idx in sorted(chip.states):
            state = chip.states[idx]
            cfg = state.config
            if cfg.kind not in (BlockKind.ECDSA_TRNG, BlockKind.COUNTER_NONCE) or state.pending_nonce is None:
                continue
            attempts += 1
            if not crypto.is_broken(cfg.verifier.scheme):
                continue
            lic = License(state.id, state.pending_nonce.value, 1_000, clock + 86_400, b"\x00", cfg.batch_id)
            lic = replace(lic, proof=crypto.forge_signature(cfg.verifier, lic.payload()))
            try:
                chip.states[idx] = bm.apply_license(state, lic, clock)
                forged += 1
            except bm.LicenseRejected:
                pass
    path = path_unlocked(chip, lambda s: s.allowance > 0)
    functional = path is not None and workload_runs(chip, path)
    wall = 0.0
    k = None
    for s in chip.states.values():
        if s.kind is BlockKind.PRESHARED_BITS:
            k = s.config.challenge_bits
            n = s.config.verifier.n
            wall = variants.preshared_bruteforce_estimate(n, k, preshared_revealed_fraction,
                                                          preshared_delay).expected_seconds
            break
    return AttackReport("crypto_vulnerabilities", 1, int(functional), forged, functional, wall_model_seconds=wall,
                        seed=seed,
                        notes=f"broken={crypto.Scheme.parse(broken_scheme).value}" if broken_scheme else "",
                        extra={"signature_blocks": attempts, "preshared_challenge_bits": k or 0})


def preshared_forgery_campaign(n: int, k: int, revealed_fraction: float, trials: int, seed: int,
                               delay: float = 1.0) -> AttackReport:
    """Empirical brute force against pre-shared-bits blocks (median attempts reported)."""
    attempts = variants.simulate_forgery(n, k, revealed_fraction, trials, seed)
    median = float(np.median(attempts))
    return AttackReport("preshared_bruteforce", int(attempts.sum()), trials, trials, True,
                        wall_model_seconds=median * delay, seed=seed,
                        extra={"median_attempts": median,
                               "analytic_guesses": variants.preshared_bruteforce_estimate(n, k, revealed_fraction)
                               .expected_guesses})


# -- authorization infrastructure --------------------------------------------------------


def key_theft_campaign(fleet, stolen_batch: int, seed: int = 0, clock: int = 0) -> AttackReport:
    """Mint licenses for every signature block in the fleet with one stolen batch key."""
    pair = fleet.keyring.steal_key(stolen_batch)
    stolen = {s: fleet.keyring.steal_key(stolen_batch, s) for s in crypto.Scheme
              if _has_scheme(fleet.keyring, stolen_batch, s)}
    _challenge_all(fleet.chips, fleet.entropy, clock)
    attempts = 0
    per_batch: Dict[int, List[int]] = {}
    for chip in fleet.chips:
        for idx in sorted(chip.states):
            state = chip.states[idx]
            if state.kind not in (BlockKind.ECDSA_TRNG, BlockKind.COUNTER_NONCE):
                continue
            attempts += 1
            key = stolen.get(state.config.verifier.scheme, pair)
            lic = forge_with_key(key, stolen_batch, state.id, state.pending_nonce.value, 1_000, clock + 86_400)
            ok = 0
            try:
                chip.states[idx] = bm.apply_license(state, lic, clock)
                ok = 1
            except bm.LicenseRejected:
                pass
            per_batch.setdefault(chip.batch_id, []).append(ok)
    successes = sum(sum(v) for v in per_batch.values())
    rates = {f"batch{b}_forgery_rate": sum(v) / len(v) for b, v in sorted(per_batch.items())}
    return AttackReport("key_theft", max(1, attempts), successes, successes, successes > 0, seed=seed, extra=rates)


def _has_scheme(keyring, batch_id, scheme) -> bool:
    try:
        keyring.steal_key(batch_id, scheme)
        return True
    except KeyError:
        return False
