"""Command-line entry point.

Exit codes: 0 success, 2 configuration or input error, 3 protocol error,
4 chain verification flagged at least one block.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import asdict
from pathlib import Path

from . import config as configmod
from .agents import reports_to_csv, reports_to_jsonl, run_campaign, scaled_requirement, summary
from .binning import delta_cap, required_samples_mode, required_samples_state
from .chain import Chain, config_digest, random_mutation, verify_chain
from .economics import (bounds, heterogeneous_k, mining_time, nash_check, perf_table, quoted_mining_time_check,
                        utilities)
from .errors import BosonPowError, ChainError, ConfigError, ProtocolError, ValidityError
from .linalg import gurvits_sample_count
from .plotting import energy_figure, speedup_figure

EXIT_OK, EXIT_CONFIG, EXIT_PROTOCOL, EXIT_FLAGGED = 0, 2, 3, 4


def _out_dir(args, cfg) -> Path:
    out = Path(args.out or cfg.doc.get("out") or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _load(args):
    if not args.config:
        raise ConfigError("--config is required for this command")
    return configmod.load(args.config, seed=args.seed, scale=args.scale)


def _require_campaign(cfg):
    if cfg.pm is None:
        raise ConfigError("config has no 'pm' section")
    if not cfg.profiles:
        raise ConfigError("config has no miner profiles")


def _run(args, blocks: int | None) -> int:
    cfg = _load(args)
    _require_campaign(cfg)
    blocks = cfg.blocks if blocks is None else blocks
    out = _out_dir(args, cfg)
    meta = {"config_hash": cfg.hash, "desk_scale_factor": cfg.scale}
    res = run_campaign(cfg.profiles, cfg.pm, cfg.U, cfg.econ, blocks, cfg.seed, cfg.campaign_settings(), meta)
    chain_path = out / "chain.jsonl"
    res.chain.save(chain_path)
    tag = {"config_hash": cfg.hash, "desk_scale_factor": cfg.scale}
    (out / "reports.csv").write_text(reports_to_csv(res.reports, tag))
    (out / "reports.jsonl").write_text(reports_to_jsonl(res.reports, tag))
    summ = {**summary(res), **tag, "seed": cfg.seed, "T_mine": cfg.pm.T_mine,
            "scaled_requirement": scaled_requirement(cfg.pm, cfg.scale)}
    _write_json(out / "summary.json", summ)
    print(json.dumps(summ, indent=2, sort_keys=True))
    print(f"wrote {chain_path} ({len(res.chain)} blocks)")
    return EXIT_OK


def cmd_round(args) -> int:
    return _run(args, 1)


def cmd_campaign(args) -> int:
    return _run(args, args.blocks)


def cmd_verify(args) -> int:
    chain = Chain.load(_existing(args.chain))
    report = verify_chain(chain, mode=args.mode, recompute=args.recompute, seed=args.seed or 0)
    doc = {**report.to_json(), "mode": args.mode, "recompute": args.recompute,
           "config_hash": chain.meta.get("config_hash")}
    print(json.dumps(doc, indent=2))
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        _write_json(Path(args.out), doc)
    return EXIT_OK if report.ok else EXIT_FLAGGED


def cmd_tamper(args) -> int:
    """Mutate random transaction bytes and check each mutation flags the right blocks."""
    chain = Chain.load(_existing(args.chain))
    base = args.seed or 0
    rows = []
    first = None
    for k in range(args.mutations):
        mutated, h = random_mutation(chain, base + k)
        flagged = verify_chain(mutated, recompute="exact").flagged
        expected = list(range(h, len(chain)))
        rows.append({"mutation": k, "block": h, "flagged": flagged, "cascade_ok": flagged == expected})
        if first is None:
            first = mutated
    detected = sum(r["cascade_ok"] for r in rows)
    doc = {"mutations": args.mutations, "detected": detected, "config_hash": chain.meta.get("config_hash"),
           "results": rows}
    print(json.dumps({k: v for k, v in doc.items() if k != "results"}, indent=2))
    for r in rows[:10]:
        print(f"mutation {r['mutation']}: block {r['block']} -> flagged {r['flagged']}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "tamper.json", doc)
        if first is not None:
            first.save(out / "tampered.jsonl")
            print(f"wrote {out / 'tampered.jsonl'}")
    return EXIT_OK if detected == args.mutations else EXIT_FLAGGED


PERF_FIELDS = ["N", "M", "R_q", "R_c", "speedup", "E_q", "E_c", "energy_ratio"]


def cmd_perf(args) -> int:
    doc = configmod.load_document(args.config) if args.config else {}
    hws = configmod.baselines(doc)
    chash = config_digest({k: v for k, v in doc.items() if k != "out"})
    lo, hi = doc.get("N_range", [2, 30])
    tables = [(hw, perf_table(hw, range(int(lo), int(hi) + 1))) for hw in hws]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["baseline"] + PERF_FIELDS + ["config_hash"])
    for hw, rows in tables:
        for r in rows:
            w.writerow([hw.name] + [f"{v:.6g}" if isinstance(v, float) else v for v in asdict(r).values()] + [chash])
    text = buf.getvalue()
    print(text, end="")
    out = Path(args.out or doc.get("out") or ".")
    out.mkdir(parents=True, exist_ok=True)
    (out / "perf.csv").write_text(text)
    speedup_figure(tables, out / "speedup.png", chash)
    energy_figure(tables, out / "energy.png", chash)
    print(f"wrote {out / 'perf.csv'}, {out / 'speedup.png'}, {out / 'energy.png'}", file=sys.stderr)
    return EXIT_OK


def cmd_econ(args) -> int:
    cfg = _load(args)
    if cfg.econ is None:
        raise ConfigError("config has no 'econ' section")
    econ = cfg.econ
    b = bounds(econ)
    verdict = nash_check(econ)
    doc = {"config_hash": cfg.hash, "econ": econ.to_json(),
           "bounds": {"R_range": b.R_range, "P_range": b.P_range, "feasible": b.feasible, "reasons": b.reasons},
           "nash": {"ok": verdict.ok, "reasons": verdict.reasons, "P_window": verdict.P_window},
           "utilities_per_sample": asdict(utilities(econ, 1.0))}
    costs = cfg.doc.get("costs")
    if costs:
        m = float(cfg.doc.get("percentile", 0))
        doc["heterogeneous_k"] = {"percentile": m, "k": heterogeneous_k(costs, m)}
    print(json.dumps(doc, indent=2, sort_keys=True))
    out = _out_dir(args, cfg)
    _write_json(out / "econ.json", doc)
    return EXIT_OK


def cmd_params(args) -> int:
    cfg = _load(args)
    if cfg.pm is None:
        raise ConfigError("config has no 'pm' section")
    pm, hw = cfg.pm, cfg.hw
    gamma = cfg.validation.accuracy.gamma if cfg.validation else 1e-4
    full = mining_time(pm.N, pm.M, pm.d_mb, pm.beta, pm.d_sb, pm.epsilon, hw, gamma)
    scaled = mining_time(pm.N, pm.M, pm.d_mb, pm.beta, pm.d_sb, pm.epsilon, hw, gamma, scale=cfg.scale)
    try:
        boot = required_samples_state(pm.d_sb, pm.epsilon, gamma, "bootstrap")
    except ValidityError as exc:
        boot = f"not applicable: {exc}"
    cap = delta_cap(pm.beta, pm.N, pm.d_mb)
    size = pm.M // pm.d_mb
    doc = {
        "config_hash": cfg.hash, "desk_scale_factor": cfg.scale,
        "state_count": pm.state_count,
        "N_mb_tot": required_samples_mode(pm.N, pm.d_mb, pm.beta),
        "N_sb_tot": required_samples_state(pm.d_sb, pm.epsilon, gamma),
        "N_sb_tot_bootstrap": boot,
        "R_q": full.R_q,
        "T_mine_full": full.seconds,
        "T_mine_scaled": scaled.seconds,
        "T_mine_configured": pm.T_mine,
        "delta_cap": cap,
        "gurvits_samples_per_point": gurvits_sample_count(cap, 0.99),
        "dft_grid_points": (pm.N + 1) ** pm.d_mb,
        "mode_bin_arrangements": math.factorial(pm.M) // math.factorial(size) ** pm.d_mb,
        "guess_bound": pm.beta ** (pm.d_mb - 1),
    }
    if args.check_quoted:
        mt = quoted_mining_time_check(hw)
        doc["reference_T_mine"] = {"computed": mt.seconds, "N_mb": mt.N_mb, "R_q": mt.R_q, "quoted": 81.6}
    print(json.dumps(doc, indent=2, sort_keys=True))
    out = _out_dir(args, cfg)
    _write_json(out / "params.json", doc)
    return EXIT_OK


def _existing(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"chain file not found: {p}")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="override the master seed")
    common.add_argument("--out", help="output directory (file for 'chain verify')")
    common.add_argument("--scale", type=float, help="desk-scale factor for sample requirements, in (0, 1]")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="bosonpow", description="Boson-sampling proof-of-work simulator")
    groups = p.add_subparsers(dest="group", required=True)

    rnd = groups.add_parser("round").add_subparsers(dest="verb", required=True)
    rnd.add_parser("run", parents=[common], help="mine a single block").set_defaults(func=cmd_round)

    camp = groups.add_parser("campaign").add_subparsers(dest="verb", required=True)
    c = camp.add_parser("run", parents=[common], help="mine the configured number of blocks")
    c.add_argument("--blocks", type=int)
    c.set_defaults(func=cmd_campaign)

    ch = groups.add_parser("chain").add_subparsers(dest="verb", required=True)
    v = ch.add_parser("verify", parents=[common], help="re-derive every block of a chain file")
    v.add_argument("chain")
    v.add_argument("--mode", choices=["classical", "quantum"], default="classical")
    v.add_argument("--recompute", choices=["exact", "estimated"], default="exact")
    v.set_defaults(func=cmd_verify)
    t = ch.add_parser("tamper-test", parents=[common], help="mutate transactions and check detection")
    t.add_argument("chain")
    t.add_argument("--mutations", type=int, default=100)
    t.set_defaults(func=cmd_tamper)

    perf = groups.add_parser("perf").add_subparsers(dest="verb", required=True)
    perf.add_parser("report", parents=[common], help="rate/energy tables and figures").set_defaults(func=cmd_perf)

    econ = groups.add_parser("econ").add_subparsers(dest="verb", required=True)
    econ.add_parser("report", parents=[common], help="bounds and Nash check").set_defaults(func=cmd_econ)

    par = groups.add_parser("params").add_subparsers(dest="verb", required=True)
    s = par.add_parser("suggest", parents=[common], help="sample counts, T_mine and accuracy caps")
    s.add_argument("--check-quoted", action="store_true", help="also recompute the N=25 reference mining time")
    s.set_defaults(func=cmd_params)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ChainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ProtocolError as exc:
        print(f"protocol error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except BosonPowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
