"""``offswitch`` command line.

Exit codes: 0 ok, 1 audit found an ungated edge (or a golden vector failed),
2 bad config or arguments,
3 an internal invariant was violated during a run.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from typing import List, Optional

from . import attacks, entropy, goldens, variants
from .chip import audit_bypass, brute_force_min_gates
from .scenario import (InvariantViolation, ScenarioError, load_config, make_fleet, run_scenario,
                       simulate_scenario, with_seed)

EXIT_OK = 0
EXIT_AUDIT = 1
EXIT_CONFIG = 2
EXIT_INVARIANT = 3

# exhaustive path enumeration is only cheap on small grids
BRUTE_FORCE_MAX_CELLS = 25


def _load(args):
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = with_seed(cfg, args.seed)
    return cfg


def cmd_run(args) -> int:
    cfg = _load(args)
    result = run_scenario(cfg, args.out, jobs=args.jobs)
    m = result.metrics
    print(f"blocks licensed: {m['blocks_licensed']}/{m['fleet']['blocks']}")
    print(f"halted fraction: {m['timeline']['halted_fraction']:.3f}")
    for r in result.reports:
        print(f"{r.campaign}: {r.successes}/{r.attempts} successes, chip functional: {r.chip_functional}")
    if args.out:
        print(f"outputs written to {args.out}")
    return EXIT_OK


def cmd_audit(args) -> int:
    cfg = _load(args)
    fleet = make_fleet(cfg)
    status = EXIT_OK
    for chip in fleet.chips:
        rep = audit_bypass(chip.topology)
        line = f"chip {chip.chip_id}: min gates on any path = {rep.min_gates_on_any_path}"
        topo = chip.topology
        if topo.rows * topo.cols <= BRUTE_FORCE_MAX_CELLS:
            oracle = brute_force_min_gates(topo)
            line += f" (path enumeration: {oracle})"
            if oracle != rep.min_gates_on_any_path:
                print(line)
                print(f"chip {chip.chip_id}: audit disagrees with path enumeration", file=sys.stderr)
                return EXIT_INVARIANT
        print(line)
        for a, b in rep.ungated_edges:
            print(f"chip {chip.chip_id}: UNGATED {a} -> {b}")
            status = EXIT_AUDIT
    return status


def cmd_calc(args) -> int:
    if args.what == "licenses":
        n = entropy.prior_license_count(args.blocks, args.chips, args.per_day, args.years)
        print(f"licenses: {n:.6g}")
    elif args.what == "collision":
        est = entropy.collision_probability(args.n_prior, args.bits)
        print(f"p_collision_next: {est.linear:.6g}")
        print(f"p_any_collision: {est.birthday:.6g}")
    else:
        est = variants.preshared_bruteforce_estimate(args.n, args.k, args.revealed_fraction, args.delay)
        print(f"guesses: {est.expected_guesses:.6g} (2^{args.k * (1 - args.revealed_fraction):g})")
        print(f"seconds: {est.expected_seconds:.6g}")
        print(f"years: {est.years:.4g}")
    return EXIT_OK


def cmd_keys(args) -> int:
    cfg = _load(args)
    if args.action == "steal":
        fleet = make_fleet(cfg)
        report = attacks.key_theft_campaign(fleet, args.batch, seed=cfg.seed)
        print(report.to_json())
        return EXIT_OK
    events = [{"day": args.at_day, "action": "destroy_keys", "batches": [args.batch],
               "backups_also": args.action == "destroy" and args.backups_also}]
    if args.action == "restore":
        events.append({"day": args.at_day + args.restore_after, "action": "restore_keys", "batches": [args.batch]})
    fleet, timeline = simulate_scenario(replace(cfg, events=tuple(events)))
    print(json.dumps({"action": args.action, "batch": args.batch,
                      "halted_fraction": timeline.halted_fraction,
                      "halted_at": {str(k): v for k, v in sorted(timeline.halted_at.items())},
                      "can_issue": fleet.keyring.can_issue(args.batch)}, sort_keys=True))
    return EXIT_OK


def cmd_goldens(args) -> int:
    if args.action == "regenerate":
        for path in goldens.regenerate(args.dir):
            print(f"wrote {path}")
        return EXIT_OK
    problems = goldens.verify_goldens(args.dir)
    for where, what in problems:
        print(f"FAIL {where}: {what}")
    if not problems:
        print("goldens ok")
    return EXIT_AUDIT if problems else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="offswitch", description="Security-block licensing simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_args(sp):
        sp.add_argument("--config", required=True, help="scenario JSON file")
        sp.add_argument("--seed", type=int, help="override the scenario seed")

    run = sub.add_parser("run", help="simulate a scenario and its attack campaigns")
    scenario_args(run)
    run.add_argument("--out", help="output directory")
    run.add_argument("--jobs", type=int, default=1, help="worker processes for campaigns")
    run.set_defaults(func=cmd_run)

    audit = sub.add_parser("audit", help="check every chip for ungated paths")
    scenario_args(audit)
    audit.set_defaults(func=cmd_audit)

    calc = sub.add_parser("calc", help="closed-form estimates")
    csub = calc.add_subparsers(dest="what", required=True)
    lic = csub.add_parser("licenses", help="blocks x chips x licenses/day x days")
    lic.add_argument("blocks", type=float)
    lic.add_argument("chips", type=float)
    lic.add_argument("per_day", type=float)
    lic.add_argument("years", type=float)
    col = csub.add_parser("collision", help="nonce collision probability")
    col.add_argument("n_prior", type=float)
    col.add_argument("bits", type=int)
    pre = csub.add_parser("preshared", help="pre-shared-bits brute force cost")
    pre.add_argument("n", type=int)
    pre.add_argument("k", type=int)
    pre.add_argument("revealed_fraction", type=float)
    pre.add_argument("delay", type=float)
    calc.set_defaults(func=cmd_calc)

    keys = sub.add_parser("keys", help="key compromise scenarios")
    keys.add_argument("action", choices=["steal", "destroy", "restore"])
    scenario_args(keys)
    keys.add_argument("--batch", type=int, default=0)
    keys.add_argument("--at-day", type=float, default=1.5)
    keys.add_argument("--backups-also", action="store_true")
    keys.add_argument("--restore-after", type=float, default=1.0, help="days between deletion and restore")
    keys.set_defaults(func=cmd_keys)

    gold = sub.add_parser("goldens", help="check or rewrite the wire/signature vectors")
    gold.add_argument("action", choices=["verify", "regenerate"])
    gold.add_argument("--dir", help="vector directory (default: the bundled one)")
    gold.set_defaults(func=cmd_goldens)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
