"""Replay and mechanism metrics computed from episode records.

All functions are pure in (record, references); recomputing from persisted
JSONL reproduces the same report bit-exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import ProtocolError
from .rsd import RsdEpisodeRecord

__all__ = [
    "EPS", "replay_ratios", "replay_return", "discounted_return",
    "action_shift_distance", "odds_ratio_series", "containment_radius",
    "episode_metrics", "MetricsReport", "aggregate", "welch_ttest",
]

EPS = 1e-8


def replay_ratios(record: RsdEpisodeRecord):
    """(RAG, AUC-R, SM-R): replay/exposure ratios of peak reach, total
    reach mass, and total sensitive mass."""
    exp = record.phases["exposure"]
    rep = record.phases["replay"]
    rag = max(rep.reach) / (max(exp.reach) + EPS)
    auc_r = sum(rep.reach) / (sum(exp.reach) + EPS)
    sm_r = sum(rep.sens) / (sum(exp.sens) + EPS)
    return rag, auc_r, sm_r


def discounted_return(rewards, gamma: float) -> float:
    acc = 0.0
    for r in reversed(rewards):
        acc = r + gamma * acc
    return acc


def replay_return(record: RsdEpisodeRecord, ge_reference: float) -> float:
    """Replay-phase discounted return normalized by the GE reference."""
    if ge_reference is None or ge_reference <= 0:
        raise ProtocolError("replay_return requires a positive GE reference")
    gamma = record.config["gamma"]
    return discounted_return(record.phases["replay"].rewards, gamma) / ge_reference


def action_shift_distance(record: RsdEpisodeRecord) -> float:
    """Mean total-variation distance between the exposure- and replay-time
    action distributions, paired by phase-local step index."""
    exp = record.phases["exposure"].action_dists
    rep = record.phases["replay"].action_dists
    n = min(len(exp), len(rep))
    if n == 0:
        return 0.0
    tv = 0.0
    for i in range(n):
        a = np.asarray(exp[i])
        b = np.asarray(rep[i])
        tv += 0.5 * np.abs(a - b).sum()
    return tv / n


def odds_ratio_series(record: RsdEpisodeRecord, phase: str = "replay"):
    """Stepwise (p/q)/(p0/q0); steps with p0 = 0 are skipped and counted."""
    ratios = []
    skipped = 0
    for p, q, p0, q0 in record.phases[phase].odds:
        if p0 <= 0.0 or q0 <= 0.0 or q <= 0.0:
            skipped += 1
            continue
        ratios.append((p / q) / (p0 / q0))
    return ratios, skipped


def containment_radius(record: RsdEpisodeRecord, phase: str) -> int:
    """Maximum hop distance from the stimulus seeds reached in the phase."""
    radius = record.phases[phase].radius
    return max(radius) if radius else 0


def episode_metrics(record: RsdEpisodeRecord, ge_reference: float | None = None) -> dict:
    rag, auc_r, sm_r = replay_ratios(record)
    ratios, skipped = odds_ratio_series(record)
    out = {
        "rag": rag, "auc_r": auc_r, "sm_r": sm_r,
        "asd": action_shift_distance(record),
        "odds_ratio_mean": float(np.mean(ratios)) if ratios else float("nan"),
        "odds_steps_skipped": skipped,
        "rc_exp": containment_radius(record, "exposure"),
        "rc_rep": containment_radius(record, "replay"),
        "replay_return_raw": discounted_return(
            record.phases["replay"].rewards, record.config["gamma"]),
    }
    if ge_reference is not None:
        out["replay_ret"] = replay_return(record, ge_reference)
    return out


@dataclass
class MetricsReport:
    method: str
    graph_seed: int | str
    per_episode: list = field(default_factory=list)

    def _values(self, key):
        vals = [m[key] for m in self.per_episode if not math.isnan(_float(m.get(key)))]
        return vals

    def mean(self, key) -> float:
        vals = self._values(key)
        return float(np.mean(vals)) if vals else float("nan")

    def std(self, key) -> float:
        vals = self._values(key)
        return float(np.std(vals)) if vals else float("nan")


def _float(x):
    if x is None:
        return float("nan")
    return float(x)


def aggregate(method: str, graph_seed, metric_dicts: list) -> MetricsReport:
    return MetricsReport(method=method, graph_seed=graph_seed,
                         per_episode=list(metric_dicts))


def welch_ttest(sample_a, sample_b):
    """Two-sample Welch's t-test (unequal variance). Returns (t, p)."""
    res = stats.ttest_ind(np.asarray(sample_a, dtype=float),
                          np.asarray(sample_b, dtype=float), equal_var=False)
    return float(res.statistic), float(res.pvalue)
