"""Method wiring: the baseline configurations, the Monte-Carlo shield, and
the suite runner that trains, freezes, evaluates and reports every method.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .config import RunConfig
from .deformation import DeformationSpec
from .errors import ConfigError, ProtocolError
from .graph_env import (Action, DiffusionGraph, EnvParams, env_step,
                        generate_graph, initial_state, stimulus_seed_set)
from .harm_memory import FieldParams, HarmFields
from .metrics import episode_metrics, welch_ttest
from .policies import Policy
from .rng import substream
from .rsd import RsdConfig, RsdEpisodeRecord, run_rsd_episode
from .training import (Batch, TrainerState, dual_update, ss_penalty_update,
                       train_epoch)

__all__ = [
    "MethodConfig", "method_config", "ShieldParams", "ShieldedPolicy",
    "shield_filter", "tune_shield_um", "run_method_suite", "MethodOutcome",
]


@dataclass(frozen=True)
class ShieldParams:
    theta: float = 10.0
    n_mc: int = 20
    horizon: int = 100

    @property
    def transitions_per_step(self) -> int:
        return self.n_mc * self.horizon * 3


@dataclass(frozen=True)
class MethodConfig:
    method: str
    train_deform_mode: str = "off"     # kernel used while training
    eval_deform_mode: str = "off"      # kernel during Exposure/Decay/Replay
    replay_deformation: str = "inherit"
    feature_mode: str = "obs"
    window: int = 1
    cost_wiring: str = "none"          # none | instant | delayed_trace | rapo
    shield: ShieldParams | None = None
    shares_checkpoint_with: str | None = None


_RAPO_BASE = MethodConfig(
    method="rapo", train_deform_mode="full", eval_deform_mode="full",
    replay_deformation="inherit", feature_mode="augmented",
    cost_wiring="rapo",
)


def method_config(method: str, shield: ShieldParams | None = None) -> MethodConfig:
    """Build the canonical configuration for a method id."""
    if method == "ge":
        return MethodConfig(method="ge")
    if method == "ss":
        return MethodConfig(method="ss", cost_wiring="instant")
    if method == "dr":
        return MethodConfig(method="dr", cost_wiring="delayed_trace")
    if method in ("shield", "shield_um"):
        return MethodConfig(method=method, cost_wiring="none",
                            shield=shield or ShieldParams())
    if method == "pm_st":
        # identical to RAPO except the deformation mode
        return replace(_RAPO_BASE, method="pm_st", train_deform_mode="off",
                       eval_deform_mode="off")
    if method == "pm_window":
        return MethodConfig(method="pm_window", window=50,
                            cost_wiring="delayed_trace")
    if method == "rapo":
        return _RAPO_BASE
    if method == "rapo_off_rep":
        return replace(_RAPO_BASE, method="rapo_off_rep",
                       replay_deformation="off",
                       shares_checkpoint_with="rapo")
    if method == "rapo_topk":
        return replace(_RAPO_BASE, method="rapo_topk",
                       train_deform_mode="topk", eval_deform_mode="topk")
    if method == "rapo_local":
        return replace(_RAPO_BASE, method="rapo_local",
                       train_deform_mode="local", eval_deform_mode="local")
    raise ConfigError(f"unknown method id {method!r}")


# ---------------------------------------------------------------------------
# Shield: Monte-Carlo reachability action filter


def shield_filter(state, graph: DiffusionGraph, theta: float, n_mc: int,
                  horizon: int, rng: np.random.Generator,
                  env_params: EnvParams, field_params: FieldParams):
    """Estimate expected cumulative sensitive mass per action under the
    nominal kernel and return (allowed actions, transitions simulated).

    Rollouts hold the candidate action fixed. If every action exceeds the
    threshold, Conservative is allowed as the fail-safe.
    """
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    off = DeformationSpec(mode="off")
    zero_fields = HarmFields.zeros(graph.node_count, field_params)
    allowed = []
    for action in range(3):
        total = 0.0
        for _ in range(n_mc):
            sim = state.copy()
            for _ in range(horizon):
                res = env_step(sim, Action(action), graph, zero_fields, off,
                               rng, env_params)
                sim = res.state
                total += float(graph.sensitive[sim.active].sum())
        if total / n_mc <= theta:
            allowed.append(action)
    if not allowed:
        allowed = [int(Action.CONSERVATIVE)]
    return allowed, n_mc * horizon * 3


class ShieldedPolicy:
    """Wraps a frozen policy with the Monte-Carlo action filter.

    Exposes the Policy evaluation interface; the RSD runner binds the
    current environment state before each step.
    """

    def __init__(self, base: Policy, graph: DiffusionGraph,
                 params: ShieldParams, env_params: EnvParams,
                 field_params: FieldParams, mc_seed: int):
        self.base = base
        self.graph = graph
        self.params = params
        self.env_params = env_params
        self.field_params = field_params
        self.mc_rng = substream(mc_seed, 14)
        self.transitions_simulated = 0
        self.steps_filtered = 0
        self._state = None
        self._allowed_actions = None

    # Policy interface -------------------------------------------------------
    @property
    def kind(self):
        return "shielded:" + self.base.kind

    @property
    def feature_mode(self):
        return self.base.feature_mode

    @property
    def window(self):
        return self.base.window

    @property
    def frozen(self):
        return self.base.frozen

    def bind_env_state(self, state, fields, deform):
        # one filter evaluation per environment step, reused by every
        # distribution query until the next bind
        self._state = state
        allowed, sims = shield_filter(
            state, self.graph, self.params.theta, self.params.n_mc,
            self.params.horizon, self.mc_rng, self.env_params,
            self.field_params)
        self._allowed_actions = allowed
        self.transitions_simulated += sims
        self.steps_filtered += 1

    def action_distribution(self, obs, field_summary=None):
        if self._state is None:
            raise ProtocolError("shield evaluated without a bound env state")
        dist = self.base.action_distribution(obs, field_summary)
        mask = np.zeros_like(dist)
        mask[self._allowed_actions] = 1.0
        gated = dist * mask
        if gated.sum() <= 0:
            gated = mask
        return gated / gated.sum()

    def sample_action(self, obs, field_summary, rng):
        dist = self.action_distribution(obs, field_summary)
        action = int(rng.choice(len(dist), p=dist))
        if self.base.window > 1:
            self.base._memory.append(np.asarray(obs, dtype=float).copy())
        return action

    def reset_memory(self):
        self.base.reset_memory()

    def weight_hash(self):
        return self.base.weight_hash()


def tune_shield_um(evaluate, target_replay_ret: float, tolerance: float = 0.05,
                   bracket=(0.0, 1e6), max_iter: int = 12):
    """Bisection on the shield threshold to match a target replay return.

    `evaluate(theta)` must return the mean ReplayRet on held-out episodes.
    Returns (theta, achieved, diagnostic) where diagnostic is "" on success
    or a boundary flag when the target is unattainable within the bracket.
    """
    lo, hi = bracket
    ret_hi = evaluate(hi)
    if ret_hi <= target_replay_ret - tolerance:
        return hi, ret_hi, "target above unshielded return: boundary theta"
    ret_lo = evaluate(lo)
    if ret_lo >= target_replay_ret + tolerance:
        return lo, ret_lo, "target below fully-shielded return: boundary theta"
    best = (hi, ret_hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        ret_mid = evaluate(mid)
        if abs(ret_mid - target_replay_ret) < abs(best[1] - target_replay_ret):
            best = (mid, ret_mid)
        if abs(ret_mid - target_replay_ret) <= tolerance:
            return mid, ret_mid, ""
        if ret_mid < target_replay_ret:
            lo = mid
        else:
            hi = mid
    theta, achieved = best
    diag = "" if abs(achieved - target_replay_ret) <= tolerance else \
        "tolerance not met after max iterations"
    return theta, achieved, diag


# ---------------------------------------------------------------------------
# Training


def _deform_for_mode(mode: str, cfg: RunConfig, graph: DiffusionGraph) -> DeformationSpec:
    d = cfg.section("deformation")
    kw = dict(w_G=d["w_g"], w_H=d["w_h"], psi_min=d["psi_min"])
    if mode == "topk":
        return DeformationSpec(mode="topk", k=d["topk_k"], **kw)
    if mode == "local":
        sens = np.flatnonzero(graph.sensitive)
        hood = set(int(s) for s in sens)
        for s in sens:
            hood.update(graph._und_adj[int(s)])
        return DeformationSpec(mode="local", local_regions=frozenset(hood), **kw)
    return DeformationSpec(mode=mode, **kw)


def _env_params(cfg: RunConfig) -> EnvParams:
    e = cfg.section("env")
    return EnvParams(k_seed=e["k_seed"], seed_pool=e["seed_pool"],
                     refire=e["refire"], reward=e["reward"],
                     action_costs=tuple(e["action_costs"]))


def _field_params(cfg: RunConfig) -> FieldParams:
    f = cfg.section("fields")
    return FieldParams(lam=f["lam"], alpha=f["alpha"], eta=f["eta"],
                       tau=f["tau"], delta=f["delta"], delay=f["delay"])


def train_policy(mcfg: MethodConfig, graph: DiffusionGraph, cfg: RunConfig) -> Policy:
    """Desk-scale PPO training for one method on one graph."""
    from .policies import field_features
    from .graph_env import observe
    from .harm_memory import attribute_harm, update_scar
    from .rsd import _frontier_regions

    tr_cfg = cfg.section("training")
    env_params = _env_params(cfg)
    field_params = _field_params(cfg)
    deform = _deform_for_mode(mcfg.train_deform_mode, cfg, graph)
    policy = Policy(kind="window" if mcfg.window > 1 else "softmax",
                    feature_mode=mcfg.feature_mode, window=mcfg.window,
                    seed=tr_cfg["seed"])
    trainer = TrainerState(policy=policy, lr=tr_cfg["lr"],
                           gamma=tr_cfg["gamma"], clip=tr_cfg["clip"],
                           gae_lambda=tr_cfg["gae_lambda"],
                           lr_dual=tr_cfg["lr_dual"])
    ep_len = tr_cfg["episode_len"]
    total_steps = tr_cfg["steps"]
    stimuli = cfg.section("rsd")["stimuli"]
    rng = substream(cfg["master_seed"], 20, graph.seed, tr_cfg["seed"])
    ss_penalty = 0.0
    steps_done = 0
    ep_index = 0
    while steps_done < total_steps:
        feats, acts, rews, gsums, hincs, logps, starts = [], [], [], [], [], [], []
        # one batch = a handful of episodes
        for _ in range(max(1, 2048 // ep_len)):
            z = stimuli[ep_index % len(stimuli)]
            ep_index += 1
            fields = HarmFields.zeros(graph.node_count, field_params)
            state = initial_state(graph, z, field_params.delay, stimulus_on=True)
            policy.reset_memory()
            first = True
            trace = 0.0
            pend = []
            for _ in range(ep_len):
                obs = observe(state, graph, ep_len, env_params)
                fs = None
                if policy.feature_mode == "augmented":
                    fr = _frontier_regions(state, graph, env_params.refire)
                    fs = field_features(fields, deform, fr)
                f = policy.features(obs, fs)
                dist = policy.action_distribution(obs, fs)
                a = policy.sample_action(obs, fs, rng)
                res = env_step(state, Action(a), graph, fields, deform, rng,
                               env_params)
                new_fields = attribute_harm(fields, res.harm, res.causal)
                new_fields = update_scar(new_fields)
                scar_inc = float(new_fields.H.sum() - fields.H.sum())
                fields = new_fields
                state = res.state
                reward = res.reward
                if mcfg.cost_wiring == "instant":
                    ss_penalty = ss_penalty_update(ss_penalty, res.harm,
                                                   trainer.lr_dual)
                    reward -= ss_penalty * res.harm
                elif mcfg.cost_wiring == "delayed_trace":
                    trace = 0.98 * trace + res.harm
                    reward -= 0.01 * trace
                feats.append(f)
                acts.append(a)
                rews.append(reward)
                gsums.append(float(fields.G.sum()))
                hincs.append(scar_inc)
                logps.append(float(np.log(max(dist[a], 1e-300))))
                starts.append(first)
                first = False
                steps_done += 1
            del pend
        batch = Batch(features=np.array(feats), actions=np.array(acts),
                      rewards=np.array(rews), g_sums=np.array(gsums),
                      h_increments=np.array(hincs),
                      old_logp=np.array(logps),
                      starts=np.array(starts, dtype=bool))
        use_duals = mcfg.cost_wiring == "rapo"
        if not use_duals:
            batch.g_sums = np.zeros(len(batch))
            batch.h_increments = np.zeros(len(batch))
        for _ in range(tr_cfg["epochs_per_batch"]):
            trainer = train_epoch(trainer, batch)
        if use_duals:
            trainer = dual_update(trainer, batch)
    return policy


# ---------------------------------------------------------------------------
# Suite runner


@dataclass
class MethodOutcome:
    method: str
    records: list = field(default_factory=list)
    metrics: list = field(default_factory=list)        # per-episode dicts
    checkpoint_json: str = ""
    transitions_per_step: int = 0


def _episode_seed(master: int, graph_seed: int, ep_index: int) -> int:
    return ((master * 1000003 + graph_seed) * 1000003 + ep_index) % (2 ** 62)


def _build_policy(mcfg: MethodConfig, graph: DiffusionGraph, cfg: RunConfig,
                  checkpoints: dict) -> Policy:
    tr = cfg.section("training")
    if mcfg.shares_checkpoint_with and mcfg.shares_checkpoint_with in checkpoints:
        return Policy.from_json(checkpoints[mcfg.shares_checkpoint_with]).freeze()
    if tr["enabled"]:
        key = mcfg.shares_checkpoint_with or mcfg.method
        if key in checkpoints:
            return Policy.from_json(checkpoints[key]).freeze()
        pol = train_policy(method_config(key) if key != mcfg.method else mcfg,
                           graph, cfg)
        checkpoints[key] = pol.to_json(training_config_hash=cfg.hash())
        return Policy.from_json(checkpoints[key]).freeze()
    action = {"moderate": Action.MODERATE, "aggressive": Action.AGGRESSIVE,
              "conservative": Action.CONSERVATIVE}[tr["scripted_fallback"]]
    pol = Policy(kind="scripted", feature_mode=mcfg.feature_mode,
                 scripted_action=int(action))
    key = mcfg.shares_checkpoint_with or mcfg.method
    checkpoints.setdefault(key, pol.to_json(training_config_hash=cfg.hash()))
    return Policy.from_json(checkpoints[key]).freeze() \
        if mcfg.shares_checkpoint_with else pol.freeze()


def _run_episode_task(args):
    (cfg_raw, mcfg, checkpoint_json, graph_json, ep_index, z) = args
    cfg = RunConfig(raw=cfg_raw)
    graph = DiffusionGraph.from_json(graph_json)
    env_params = _env_params(cfg)
    field_params = _field_params(cfg)
    policy = Policy.from_json(checkpoint_json).freeze()
    if mcfg.shield is not None:
        seed = _episode_seed(cfg["master_seed"], graph.seed, ep_index)
        policy = ShieldedPolicy(policy, graph, mcfg.shield, env_params,
                                field_params, seed)
    deform = _deform_for_mode(mcfg.eval_deform_mode, cfg, graph)
    rsd_raw = cfg.section("rsd")
    rsd_cfg = RsdConfig(
        t_exp=rsd_raw["t_exp"], t_decay=rsd_raw["t_decay"],
        t_rep=rsd_raw["t_rep"], z=z, rng_mode=rsd_raw["rng_mode"],
        replay_deformation=mcfg.replay_deformation,
        truncate_buffer=rsd_raw["truncate_buffer"],
        gamma=cfg.section("training")["gamma"],
    )
    fields = HarmFields.zeros(graph.node_count, field_params)
    seed = _episode_seed(cfg["master_seed"], graph.seed, ep_index)
    record = run_rsd_episode(rsd_cfg, policy, graph, fields, deform, seed,
                             env_params)
    sims = policy.transitions_simulated if isinstance(policy, ShieldedPolicy) else 0
    return ep_index, record, sims


def run_method_episodes(cfg: RunConfig, mcfg: MethodConfig,
                        checkpoint_json: str, graph: DiffusionGraph,
                        theta_override: float | None = None):
    """All episodes of one method on one graph, deterministic in seed order."""
    if theta_override is not None and mcfg.shield is not None:
        mcfg = replace(mcfg, shield=replace(mcfg.shield, theta=theta_override))
    stimuli = cfg.section("rsd")["stimuli"]
    tasks = []
    graph_json = graph.to_json()
    for ep in range(cfg["episodes"]):
        z = stimuli[ep % len(stimuli)]
        tasks.append((cfg.raw, mcfg, checkpoint_json, graph_json, ep, z))
    workers = cfg["workers"]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_episode_task, tasks))
    else:
        results = [_run_episode_task(t) for t in tasks]
    results.sort(key=lambda r: r[0])
    records = [r[1] for r in results]
    sims = sum(r[2] for r in results)
    return records, sims


def run_method_suite(cfg: RunConfig, out_dir: str) -> dict:
    """Train (where enabled), freeze, run RSD and report for every method.

    Returns a manifest dict; writes JSONL records, checkpoints, and the
    Table-1-shaped CSV under `out_dir`.
    """
    methods = list(cfg["methods"])
    # GE is the ReplayRet reference and is always evaluated
    eval_methods = methods if "ge" in methods else ["ge"] + methods
    shield_cfg = cfg.section("shield")
    shield_params = ShieldParams(theta=shield_cfg["theta"],
                                 n_mc=shield_cfg["n_mc"],
                                 horizon=shield_cfg["horizon"])
    graphs = [
        generate_graph(cfg.section("graph")["nodes"],
                       cfg.section("graph")["branching"], gseed,
                       sens_fraction=cfg.section("graph")["sens_frac"],
                       locality=cfg.section("graph")["locality"],
                       local_span=cfg.section("graph")["local_span"],
                       sens_style=cfg.section("graph")["sens_style"])
        for gseed in cfg.section("graph")["seeds"]
    ]
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.json"), "w", encoding="utf-8") as fh:
        fh.write(cfg.snapshot())

    checkpoints: dict[str, str] = {}
    outcomes: dict[str, MethodOutcome] = {}
    ge_reference: dict[int, float] = {}
    rapo_replay_ret: float | None = None

    ordered = sorted(set(eval_methods),
                     key=lambda m: (_METHOD_ORDER.index(m), m))
    for method in ordered:
        mcfg = method_config(method, shield=shield_params
                             if method in ("shield", "shield_um") else None)
        outcome = MethodOutcome(method=method)
        theta_override = None
        if method == "shield_um":
            if rapo_replay_ret is None:
                raise ProtocolError(
                    "shield_um requires a completed rapo run for its target")
            theta_override = _tune_um_threshold(cfg, mcfg, checkpoints,
                                                graphs, ge_reference,
                                                rapo_replay_ret,
                                                shield_cfg["um_tolerance"],
                                                outcome)
        for graph in graphs:
            policy = _build_policy(mcfg, graph, cfg, checkpoints)
            ckpt_key = mcfg.shares_checkpoint_with or method
            ckpt_json = checkpoints[ckpt_key]
            records, sims = run_method_episodes(cfg, mcfg, ckpt_json, graph,
                                                theta_override)
            if method == "ge":
                from .metrics import discounted_return
                gamma = cfg.section("training")["gamma"]
                rets = [discounted_return(r.phases["replay"].rewards, gamma)
                        for r in records]
                ge_reference[graph.seed] = float(np.mean(rets))
            ref = ge_reference.get(graph.seed)
            for rec in records:
                outcome.records.append(rec)
                m = episode_metrics(rec, ge_reference=ref)
                m["graph_seed"] = graph.seed
                outcome.metrics.append(m)
            if sims:
                steps = (cfg.section("rsd")["t_exp"]
                         + cfg.section("rsd")["t_decay"]
                         + cfg.section("rsd")["t_rep"]) * len(records)
                outcome.transitions_per_step = sims // steps
            _write_records(out_dir, cfg["run_id"], method, graph.seed, records)
        outcome.checkpoint_json = checkpoints.get(
            mcfg.shares_checkpoint_with or method, "")
        outcomes[method] = outcome
        if method == "rapo":
            vals = [m["replay_ret"] for m in outcome.metrics
                    if "replay_ret" in m]
            rapo_replay_ret = float(np.mean(vals)) if vals else None

    csv_path = os.path.join(out_dir, "report.csv")
    _write_report_csv(csv_path, cfg, eval_methods, outcomes)
    manifest = {
        "run_id": cfg["run_id"],
        "config_hash": cfg.hash(),
        "graph_seeds": [g.seed for g in graphs],
        "episodes_per_graph": cfg["episodes"],
        "methods": {m: "ok" for m in eval_methods},
        "outputs": {"report": csv_path,
                    "records_root": os.path.join(out_dir, cfg["run_id"])},
        "checkpoint_hashes": {
            m: _ckpt_hash(o.checkpoint_json) for m, o in outcomes.items()},
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    manifest["outcomes"] = outcomes
    return manifest


_METHOD_ORDER = ["ge", "ss", "dr", "shield", "pm_st", "pm_window",
                 "rapo", "rapo_off_rep", "rapo_topk", "rapo_local",
                 "shield_um"]


def _ckpt_hash(text: str) -> str:
    import hashlib
    return hashlib.sha256(text.encode()).hexdigest()


def _tune_um_threshold(cfg, mcfg, checkpoints, graphs, ge_reference,
                       target, tolerance, outcome) -> float:
    """Tune the shield threshold on held-out episodes to match RAPO's
    replay return."""
    from .metrics import discounted_return
    gamma = cfg.section("training")["gamma"]
    graph = graphs[0]
    held_cfg = RunConfig(raw={**cfg.raw,
                              "episodes": max(2, cfg["episodes"] // 2),
                              "master_seed": cfg["master_seed"] + 7919})
    policy = _build_policy(mcfg, graph, cfg, checkpoints)
    ckpt = checkpoints[mcfg.shares_checkpoint_with or mcfg.method]
    ref = ge_reference.get(graph.seed, 1.0)

    def evaluate(theta):
        records, _ = run_method_episodes(held_cfg, mcfg, ckpt, graph, theta)
        rets = [discounted_return(r.phases["replay"].rewards, gamma) / ref
                for r in records]
        return float(np.mean(rets))

    theta, achieved, diag = tune_shield_um(evaluate, target, tolerance)
    outcome_diag = {"theta": theta, "achieved": achieved,
                    "target": target, "diagnostic": diag}
    outcome.metrics_diag = outcome_diag
    return theta


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


REPORT_COLUMNS = [
    "method", "graph_seed", "episodes", "rag_mean", "rag_std",
    "auc_r_mean", "auc_r_std", "sm_r_mean", "sm_r_std", "replay_ret_mean",
    "asd_mean", "odds_ratio_mean", "rc_exp_mean", "rc_rep_mean",
    "welch_p_vs_pmst", "shield_transitions_per_step",
]


def _write_report_csv(path: str, cfg: RunConfig, methods, outcomes) -> None:
    pmst_rags = None
    if "pm_st" in outcomes:
        pmst_rags = [m["rag"] for m in outcomes["pm_st"].metrics]
    rows = []
    for method in methods:
        if method not in outcomes:
            continue
        o = outcomes[method]
        groups = {}
        for m in o.metrics:
            groups.setdefault(m["graph_seed"], []).append(m)
        if len(groups) > 1:
            for gseed in sorted(groups):
                rows.append(_report_row(method, gseed, groups[gseed], None, o))
        p_val = ""
        if pmst_rags is not None and method != "pm_st" and o.metrics:
            _, p = welch_ttest([m["rag"] for m in o.metrics], pmst_rags)
            p_val = p
        rows.append(_report_row(method, "all", o.metrics, p_val, o))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        writer.writerows(rows)


def _report_row(method, gseed, metrics, p_val, outcome):
    import math

    def col(key, reducer):
        vals = [m[key] for m in metrics
                if key in m and not (isinstance(m[key], float)
                                     and math.isnan(m[key]))]
        return _fmt(float(reducer(vals))) if vals else ""

    return [
        method, str(gseed), str(len(metrics)),
        col("rag", np.mean), col("rag", np.std),
        col("auc_r", np.mean), col("auc_r", np.std),
        col("sm_r", np.mean), col("sm_r", np.std),
        col("replay_ret", np.mean), col("asd", np.mean),
        col("odds_ratio_mean", np.mean),
        col("rc_exp", np.mean), col("rc_rep", np.mean),
        _fmt(p_val) if p_val != "" and p_val is not None else "",
        str(outcome.transitions_per_step),
    ]


def _write_records(out_dir, run_id, method, graph_seed, records) -> None:
    d = os.path.join(out_dir, run_id, method, str(graph_seed))
    os.makedirs(d, exist_ok=True)
    for rec in records:
        p = os.path.join(d, f"{rec.episode_seed}.jsonl")
        with open(p, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(rec.to_dict()) + "\n")
