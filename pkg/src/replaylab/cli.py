"""Command-line entry point.

Subcommands: gen-graph, train, rsd-eval, run, sweep, report, verify.
Exit codes: 0 success, 2 configuration error, 3 protocol violation.
"""

from __future__ import annotations

import argparse
import csv
import glob
import json
import os
import sys

import numpy as np

from .baselines import method_config, run_method_suite, train_policy
from .config import RunConfig, load_config
from .deformation import DeformationSpec
from .errors import ConfigError, ProtocolError
from .graph_env import DiffusionGraph, EnvParams, generate_graph
from .harm_memory import FieldParams, HarmFields
from .metrics import discounted_return, episode_metrics
from .policies import Policy
from .rsd import RsdConfig, RsdEpisodeRecord, run_rsd_episode

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="replaylab")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-graph", help="generate a diffusion graph")
    g.add_argument("--nodes", type=int, required=True)
    g.add_argument("--branching", type=float, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--sens-frac", type=float, default=0.2)
    g.add_argument("--locality", type=float, default=0.0)
    g.add_argument("--out", required=True)

    t = sub.add_parser("train", help="train one method's policy")
    t.add_argument("--config", required=True)
    t.add_argument("--method", required=True)
    t.add_argument("--out", required=True)

    e = sub.add_parser("rsd-eval", help="run one three-phase episode")
    e.add_argument("--graph", required=True)
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--config", default="{}")
    e.add_argument("--z", type=int, default=1)
    e.add_argument("--episode-seed", type=int, default=0)
    e.add_argument("--rng-mode", choices=["independent", "paired"],
                   default="independent")
    e.add_argument("--replay-deformation", choices=["inherit", "off"],
                   default="inherit")
    e.add_argument("--deform-mode", choices=["full", "topk", "local", "off"],
                   default="full")
    e.add_argument("--out", required=True)

    r = sub.add_parser("run", help="full method suite")
    r.add_argument("--config", required=True)
    r.add_argument("--out-dir", required=True)

    s = sub.add_parser("sweep", help="grid over conductance and scar rates")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--w-h", type=float, nargs="+", required=True)
    s.add_argument("--eta", type=float, nargs="+", required=True)
    s.add_argument("--method", default="rapo")

    rp = sub.add_parser("report", help="recompute the report from records")
    rp.add_argument("--run-dir", required=True)
    rp.add_argument("--out", default="-")

    v = sub.add_parser("verify", help="run the theory checks")
    v.add_argument("--seed", type=int, default=0)
    return p


def _env_params_from(cfg: RunConfig) -> EnvParams:
    e = cfg.section("env")
    return EnvParams(k_seed=e["k_seed"], seed_pool=e["seed_pool"],
                     refire=e["refire"], reward=e["reward"],
                     action_costs=tuple(e["action_costs"]))


def _field_params_from(cfg: RunConfig) -> FieldParams:
    f = cfg.section("fields")
    return FieldParams(lam=f["lam"], alpha=f["alpha"], eta=f["eta"],
                       tau=f["tau"], delta=f["delta"], delay=f["delay"])


def cmd_gen_graph(args) -> int:
    graph = generate_graph(args.nodes, args.branching, args.seed,
                           sens_fraction=args.sens_frac,
                           locality=args.locality)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(graph.to_json())
    print(f"wrote graph ({graph.node_count} nodes, "
          f"{graph.edge_src.size} edges, "
          f"{graph.sensitive_nodes.size} sensitive) to {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    mcfg = method_config(args.method)
    g = cfg.section("graph")
    graph = generate_graph(g["nodes"], g["branching"], g["seeds"][0],
                           sens_fraction=g["sens_frac"],
                           locality=g["locality"])
    pol = train_policy(mcfg, graph, cfg)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(pol.to_json(training_config_hash=cfg.hash()))
    print(f"wrote checkpoint to {args.out}")
    return 0


def cmd_rsd_eval(args) -> int:
    cfg = load_config(args.config)
    with open(args.graph, "r", encoding="utf-8") as fh:
        graph = DiffusionGraph.from_json(fh.read())
    with open(args.checkpoint, "r", encoding="utf-8") as fh:
        policy = Policy.from_json(fh.read()).freeze()
    d = cfg.section("deformation")
    deform = DeformationSpec(w_G=d["w_g"], w_H=d["w_h"],
                             psi_min=d["psi_min"], mode=args.deform_mode,
                             k=d["topk_k"],
                             local_regions=frozenset(
                                 int(x) for x in graph.sensitive_nodes)
                             if args.deform_mode == "local" else frozenset())
    r = cfg.section("rsd")
    rsd_cfg = RsdConfig(t_exp=r["t_exp"], t_decay=r["t_decay"],
                        t_rep=r["t_rep"], z=args.z, rng_mode=args.rng_mode,
                        replay_deformation=args.replay_deformation,
                        truncate_buffer=r["truncate_buffer"],
                        gamma=cfg.section("training")["gamma"])
    fields = HarmFields.zeros(graph.node_count, _field_params_from(cfg))
    record = run_rsd_episode(rsd_cfg, policy, graph, fields, deform,
                             args.episode_seed, _env_params_from(cfg))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(record.to_dict()) + "\n")
    m = episode_metrics(record)
    print(f"rag={m['rag']:.4f} auc_r={m['auc_r']:.4f} sm_r={m['sm_r']:.4f} "
          f"asd={m['asd']:.4f}")
    return 0


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    manifest = run_method_suite(cfg, args.out_dir)
    print(f"run {manifest['run_id']} complete; "
          f"report at {manifest['outputs']['report']}")
    return 0


def cmd_sweep(args) -> int:
    base = load_config(args.config)
    rows = []
    for w_h in sorted(args.w_h):
        for eta in sorted(args.eta):
            raw = json.loads(json.dumps(base.raw))
            raw["deformation"]["w_h"] = w_h
            raw["fields"]["eta"] = eta
            raw["methods"] = [args.method]
            cfg = RunConfig(raw=raw)
            out_dir = os.path.join(
                os.path.dirname(args.out) or ".",
                f"sweep_wh{w_h}_eta{eta}")
            manifest = run_method_suite(cfg, out_dir)
            o = manifest["outcomes"][args.method]

            def mean_of(key, metrics=o.metrics):
                vals = [m[key] for m in metrics if key in m]
                return float(np.mean(vals)) if vals else float("nan")

            rows.append([w_h, eta, mean_of("rag"), mean_of("auc_r"),
                         mean_of("sm_r"), mean_of("replay_ret")])
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["w_h", "eta", "rag", "auc_r", "sm_r", "replay_ret"])
        w.writerows(rows)
    print(f"wrote sweep grid ({len(rows)} cells) to {args.out}")
    return 0


def cmd_report(args) -> int:
    from .baselines import MethodOutcome, _write_report_csv
    cfg_path = os.path.join(args.run_dir, "config.json")
    if not os.path.exists(cfg_path):
        raise ConfigError(f"no config.json under {args.run_dir}")
    cfg = load_config(cfg_path)
    root = os.path.join(args.run_dir, cfg["run_id"])
    if not os.path.isdir(root):
        raise ConfigError(f"no records under {root}")
    gamma = cfg.section("training")["gamma"]
    records: dict[str, list] = {}
    for path in sorted(glob.glob(os.path.join(root, "*", "*", "*.jsonl"))):
        method = os.path.relpath(path, root).split(os.sep)[0]
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                records.setdefault(method, []).append(
                    RsdEpisodeRecord.from_dict(json.loads(line)))
    by_seed: dict[int, list] = {}
    for rec in records.get("ge", []):
        by_seed.setdefault(rec.graph_seed, []).append(
            discounted_return(rec.phases["replay"].rewards, gamma))
    ge_ref = {s: float(np.mean(v)) for s, v in by_seed.items()}
    outcomes = {}
    for method, recs in records.items():
        o = MethodOutcome(method=method)
        for rec in recs:
            m = episode_metrics(rec, ge_reference=ge_ref.get(rec.graph_seed))
            m["graph_seed"] = rec.graph_seed
            o.metrics.append(m)
        outcomes[method] = o
    out = args.out
    tmp = out if out != "-" else os.path.join(args.run_dir, ".report_tmp.csv")
    _write_report_csv(tmp, cfg, sorted(records), outcomes)
    if out == "-":
        with open(tmp, "r", encoding="utf-8") as fh:
            sys.stdout.write(fh.read())
        os.remove(tmp)
    else:
        print(f"wrote report to {out}")
    return 0


def cmd_verify(args) -> int:
    from .verification import run_all_checks
    results = run_all_checks(seed=args.seed)
    print(json.dumps(results, indent=2, sort_keys=True))
    return 0


_COMMANDS = {
    "gen-graph": cmd_gen_graph,
    "train": cmd_train,
    "rsd-eval": cmd_rsd_eval,
    "run": cmd_run,
    "sweep": cmd_sweep,
    "report": cmd_report,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except ProtocolError as exc:
        print(f"protocol violation: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
