"""The three-phase Exposure -> Decay -> Replay episode runner.

Phase resets restore the observable state (empty active set, phase clock
zero) and the agent memory, never the environment-side fields or the delay
buffer. Paired-RNG mode reuses the exposure random stream for the replay
phase so that the stationary-kernel no-go prediction becomes a bit-exact
trajectory equality.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .deformation import DeformationSpec
from .errors import ProtocolError
from .graph_env import (Action, DiffusionGraph, EnvParams, env_step,
                        initial_state, observe, phase_reset,
                        stimulus_seed_set)
from .harm_memory import HarmFields, attribute_harm, update_scar
from .policies import Policy, field_features
from .rng import substream

__all__ = ["RsdConfig", "PhaseSeries", "RsdEpisodeRecord", "run_rsd_episode",
           "scar_evolution"]

_EXP_STREAM, _DECAY_STREAM, _REP_STREAM = 10, 11, 12


@dataclass(frozen=True)
class RsdConfig:
    t_exp: int = 500
    t_decay: int = 200
    t_rep: int = 500
    z: int = 1
    rng_mode: str = "independent"          # "independent" | "paired"
    replay_deformation: str = "inherit"    # "inherit" | "off"
    field_reset: str = "persist"           # "persist" | "reset" (ablation)
    truncate_buffer: bool = False
    gamma: float = 0.99                    # discount used by ReplayRet

    def __post_init__(self):
        if min(self.t_exp, self.t_decay, self.t_rep) < 1:
            raise ValueError("all RSD horizons must be >= 1")
        if self.rng_mode not in ("independent", "paired"):
            raise ValueError("rng_mode must be 'independent' or 'paired'")
        if self.replay_deformation not in ("inherit", "off"):
            raise ValueError("replay_deformation must be 'inherit' or 'off'")
        if self.field_reset not in ("persist", "reset"):
            raise ValueError("field_reset must be 'persist' or 'reset'")

    def hash(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True)
                              .encode()).hexdigest()[:16]


@dataclass
class PhaseSeries:
    reach: list = field(default_factory=list)
    sens: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    action_dists: list = field(default_factory=list)
    odds: list = field(default_factory=list)      # (p, q, p0, q0) per step
    radius: list = field(default_factory=list)    # running containment radius
    g_sum: list = field(default_factory=list)     # total trace mass per step
    h_sum: list = field(default_factory=list)     # total scar mass per step
    scar_top: list = field(default_factory=list)  # top-10 [region, H] per step
    traj_hash: str = ""

    def to_dict(self) -> dict:
        return {
            "reach": self.reach, "sens": self.sens, "rewards": self.rewards,
            "actions": self.actions, "action_dists": self.action_dists,
            "odds": self.odds, "radius": self.radius,
            "g_sum": self.g_sum, "h_sum": self.h_sum,
            "scar_top": self.scar_top,
            "traj_hash": self.traj_hash,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PhaseSeries":
        return cls(reach=d["reach"], sens=d["sens"], rewards=d["rewards"],
                   actions=d["actions"], action_dists=d["action_dists"],
                   odds=[tuple(o) for o in d["odds"]], radius=d["radius"],
                   g_sum=d["g_sum"], h_sum=d["h_sum"],
                   scar_top=d["scar_top"],
                   traj_hash=d["traj_hash"])


@dataclass
class RsdEpisodeRecord:
    config: dict
    graph_seed: int
    episode_seed: int
    phases: dict                    # phase name -> PhaseSeries
    field_snapshots: dict           # boundary name -> fields summary
    policy_hash: str
    counterfactual: bool

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "graph_seed": self.graph_seed,
            "episode_seed": self.episode_seed,
            "phases": {k: v.to_dict() for k, v in self.phases.items()},
            "field_snapshots": self.field_snapshots,
            "policy_hash": self.policy_hash,
            "counterfactual": self.counterfactual,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RsdEpisodeRecord":
        return cls(
            config=d["config"], graph_seed=d["graph_seed"],
            episode_seed=d["episode_seed"],
            phases={k: PhaseSeries.from_dict(v) for k, v in d["phases"].items()},
            field_snapshots=d["field_snapshots"],
            policy_hash=d["policy_hash"], counterfactual=d["counterfactual"],
        )


def scar_evolution(record: "RsdEpisodeRecord") -> list[dict]:
    """Flatten per-step field snapshots into JSONL-ready rows.

    Rows carry a global step index across exposure/decay/replay, the total
    trace and scar mass, and the ten highest-scar regions at that step.
    """
    rows = []
    step = 0
    for phase in ("exposure", "decay", "replay"):
        series = record.phases[phase]
        for i in range(len(series.g_sum)):
            rows.append({
                "step": step, "phase": phase,
                "g_sum": series.g_sum[i], "h_sum": series.h_sum[i],
                "top_scar_regions": series.scar_top[i],
            })
            step += 1
    return rows


def _frontier_regions(state, graph, refire: bool) -> np.ndarray:
    src_mask = state.active if refire else state.newly
    idx = np.flatnonzero(src_mask[graph.edge_src] & ~state.active[graph.edge_dst])
    return np.unique(graph.edge_dst[idx])


def _run_phase(state, policy: Policy, graph: DiffusionGraph,
               fields: HarmFields, deform: DeformationSpec,
               rng: np.random.Generator, steps: int,
               env_params: EnvParams, hop_dist: np.ndarray):
    series = PhaseSeries()
    hasher = hashlib.sha256()
    radius = 0
    bind = getattr(policy, "bind_env_state", None)
    for _ in range(steps):
        if bind is not None:
            bind(state, fields, deform)
        obs = observe(state, graph, steps, env_params)
        if policy.feature_mode == "augmented":
            fr = _frontier_regions(state, graph, env_params.refire)
            fs = field_features(fields, deform, fr)
        else:
            fs = None
        dist = policy.action_distribution(obs, fs)
        action = policy.sample_action(obs, fs, rng)
        res = env_step(state, Action(action), graph, fields, deform, rng,
                       env_params)
        fields = attribute_harm(fields, res.harm, res.causal)
        fields = update_scar(fields)
        state = res.state
        new_hops = hop_dist[state.newly]
        new_hops = new_hops[new_hops >= 0]
        if new_hops.size:
            radius = max(radius, int(new_hops.max()))
        act_idx = np.flatnonzero(state.active)
        series.reach.append(int(act_idx.size))
        series.sens.append(int(graph.sensitive[act_idx].sum()))
        series.rewards.append(res.reward)
        series.actions.append(int(action))
        series.action_dists.append([float(x) for x in dist])
        series.odds.append(tuple(float(x) for x in res.odds))
        series.radius.append(radius)
        snap = fields.summary()
        series.g_sum.append(snap["g_sum"])
        series.h_sum.append(snap["h_sum"])
        series.scar_top.append(snap["top_scar_regions"])
        hasher.update(state.active.tobytes())
        hasher.update(bytes([action]))
    series.traj_hash = hasher.hexdigest()
    return state, fields, series


def run_rsd_episode(config: RsdConfig, policy: Policy, graph: DiffusionGraph,
                    fields: HarmFields, deform: DeformationSpec,
                    episode_seed: int,
                    env_params: EnvParams | None = None) -> RsdEpisodeRecord:
    """Run one Exposure -> Decay -> Replay episode with a frozen policy."""
    if not policy.frozen:
        raise ProtocolError("RSD requires a frozen policy")
    env_params = env_params or EnvParams()
    hash_before = policy.weight_hash()
    fields = fields.copy()
    seeds = stimulus_seed_set(config.z, graph, env_params.k_seed,
                              env_params.seed_pool)
    hop_dist = graph.hop_distance_from(seeds)
    snapshots = {"start": fields.summary()}
    phases: dict[str, PhaseSeries] = {}

    # Exposure: reset observable state and agent memory, stimulus on
    policy.reset_memory()
    state = initial_state(graph, config.z, fields.params.delay, stimulus_on=True)
    rng = substream(episode_seed, _EXP_STREAM)
    state, fields, phases["exposure"] = _run_phase(
        state, policy, graph, fields, deform, rng, config.t_exp,
        env_params, hop_dist)
    snapshots["after_exposure"] = fields.summary()

    # Decay: stimulus off, nothing reset
    state.stimulus_on = False
    rng = substream(episode_seed, _DECAY_STREAM)
    state, fields, phases["decay"] = _run_phase(
        state, policy, graph, fields, deform, rng, config.t_decay,
        env_params, hop_dist)
    snapshots["after_decay"] = fields.summary()

    # Replay: observable + agent memory reset, same stimulus, fields persist
    policy.reset_memory()
    state = phase_reset(state, graph, stimulus_on=True,
                        truncate_buffer=config.truncate_buffer)
    if config.field_reset == "reset":
        fields = HarmFields.zeros(fields.G.size, fields.params)
    rep_deform = deform.with_mode("off") if config.replay_deformation == "off" \
        else deform
    stream = _EXP_STREAM if config.rng_mode == "paired" else _REP_STREAM
    rng = substream(episode_seed, stream)
    state, fields, phases["replay"] = _run_phase(
        state, policy, graph, fields, rep_deform, rng, config.t_rep,
        env_params, hop_dist)
    snapshots["after_replay"] = fields.summary()

    if policy.weight_hash() != hash_before:
        raise ProtocolError("policy weights changed during RSD evaluation")

    cfg = asdict(config)
    cfg["config_hash"] = config.hash()
    cfg["env_params"] = {
        "k_seed": env_params.k_seed, "seed_pool": env_params.seed_pool,
        "refire": env_params.refire, "reward": env_params.reward,
        "action_costs": list(env_params.action_costs),
    }
    return RsdEpisodeRecord(
        config=cfg, graph_seed=graph.seed, episode_seed=episode_seed,
        phases=phases, field_snapshots=snapshots,
        policy_hash=hash_before,
        counterfactual=(config.replay_deformation == "off"),
    )
