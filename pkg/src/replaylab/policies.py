"""Policy representations with a frozen-evaluation contract.

Three kinds: a scripted constant-action policy, a softmax-linear policy over
observation features (optionally augmented with harm-field summaries), and a
window-history policy over the stacked last W observations. Memory (the
observation window) is distinct from weights: frozen policies still update
memory, and reset_memory restores the exact initial state.
"""

from __future__ import annotations

import hashlib
import json
from collections import deque

import numpy as np

from .deformation import DeformationSpec, conductance
from .errors import ProtocolError
from .harm_memory import HarmFields

__all__ = ["Policy", "N_ACTIONS", "OBS_DIM", "FIELD_FEATURE_DIM",
           "field_features", "softmax"]

N_ACTIONS = 3
OBS_DIM = 4
FIELD_FEATURE_DIM = 5


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


def field_features(fields: HarmFields, deform: DeformationSpec,
                   frontier_regions: np.ndarray) -> np.ndarray:
    """Summaries of the harm fields fed to augmented policies:
    (sum G, sum H, max G, max H, mean conductance over frontier regions)."""
    if frontier_regions.size:
        mean_psi = float(conductance(frontier_regions, fields, deform).mean())
    else:
        mean_psi = 1.0
    return np.array([
        float(fields.G.sum()), float(fields.H.sum()),
        float(fields.G.max()), float(fields.H.max()), mean_psi,
    ])


class Policy:
    """Action-distribution object with resettable internal memory."""

    def __init__(self, kind: str, feature_mode: str = "obs", window: int = 1,
                 weights: np.ndarray | None = None,
                 scripted_action: int | None = None, seed: int = 0):
        if kind not in ("scripted", "softmax", "window"):
            raise ValueError(f"unknown policy kind {kind!r}")
        if feature_mode not in ("obs", "augmented"):
            raise ValueError(f"unknown feature mode {feature_mode!r}")
        if kind == "scripted" and scripted_action is None:
            raise ValueError("scripted policy needs an action")
        self.kind = kind
        self.feature_mode = feature_mode
        self.window = window if kind == "window" else 1
        self.scripted_action = scripted_action
        self.frozen = False
        if kind == "scripted":
            self.weights = None
        elif weights is not None:
            self.weights = np.asarray(weights, dtype=float)
        else:
            rng = np.random.Generator(np.random.PCG64(seed))
            self.weights = 0.01 * rng.standard_normal((N_ACTIONS, self.feature_dim))
        self._memory: deque = deque(maxlen=max(self.window - 1, 0))

    # -- features ----------------------------------------------------------

    @property
    def obs_feature_dim(self) -> int:
        d = OBS_DIM * self.window
        if self.feature_mode == "augmented":
            d += FIELD_FEATURE_DIM
        return d

    @property
    def feature_dim(self) -> int:
        return self.obs_feature_dim + 1  # bias

    def features(self, obs: np.ndarray,
                 field_summary: np.ndarray | None = None) -> np.ndarray:
        """Assemble the linear feature vector for the current step."""
        if self.feature_mode == "augmented" and field_summary is None:
            raise ValueError("augmented policy requires field_summary")
        parts = [np.asarray(obs, dtype=float)]
        if self.window > 1:
            hist = list(self._memory)
            # most recent first, zero-padded up to window-1 past observations
            for i in range(self.window - 1):
                if i < len(hist):
                    parts.append(hist[-(i + 1)])
                else:
                    parts.append(np.zeros(OBS_DIM))
        if self.feature_mode == "augmented":
            parts.append(np.asarray(field_summary, dtype=float))
        parts.append(np.ones(1))
        return np.concatenate(parts)

    # -- evaluation --------------------------------------------------------

    def action_distribution(self, obs: np.ndarray,
                            field_summary: np.ndarray | None = None) -> np.ndarray:
        if self.kind == "scripted":
            dist = np.zeros(N_ACTIONS)
            dist[self.scripted_action] = 1.0
            return dist
        f = self.features(obs, field_summary)
        return softmax(self.weights @ f)

    def sample_action(self, obs: np.ndarray, field_summary: np.ndarray | None,
                      rng: np.random.Generator) -> int:
        """Sample an action and push obs into the history window.

        Frozen policies still update memory: memory is not weights.
        """
        dist = self.action_distribution(obs, field_summary)
        if self.kind == "scripted":
            action = self.scripted_action
            rng.random()  # keep draw count uniform across policy kinds
        else:
            action = int(rng.choice(N_ACTIONS, p=dist))
        if self.window > 1:
            self._memory.append(np.asarray(obs, dtype=float).copy())
        return action

    def reset_memory(self) -> None:
        self._memory.clear()

    # -- freezing / identity -----------------------------------------------

    def freeze(self) -> "Policy":
        self.frozen = True
        return self

    def set_weights(self, weights: np.ndarray) -> None:
        if self.frozen:
            raise ProtocolError("cannot mutate a frozen policy's weights")
        self.weights = np.asarray(weights, dtype=float)

    def weight_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.kind.encode())
        h.update(self.feature_mode.encode())
        h.update(str(self.window).encode())
        if self.weights is not None:
            h.update(np.ascontiguousarray(self.weights).tobytes())
        if self.scripted_action is not None:
            h.update(bytes([self.scripted_action]))
        return h.hexdigest()

    # -- checkpoints ---------------------------------------------------------

    def to_json(self, training_config_hash: str = "") -> str:
        obj = {
            "kind": self.kind,
            "feature_mode": self.feature_mode,
            "window": self.window,
            "scripted_action": self.scripted_action,
            "weights": None if self.weights is None else self.weights.tolist(),
            "training_config_hash": training_config_hash,
        }
        return json.dumps(obj)

    @classmethod
    def from_json(cls, text: str) -> "Policy":
        obj = json.loads(text)
        w = None if obj["weights"] is None else np.array(obj["weights"], dtype=float)
        return cls(kind=obj["kind"], feature_mode=obj["feature_mode"],
                   window=obj["window"], weights=w,
                   scripted_action=obj["scripted_action"])

    def clone(self) -> "Policy":
        p = Policy(kind=self.kind, feature_mode=self.feature_mode,
                   window=self.window,
                   weights=None if self.weights is None else self.weights.copy(),
                   scripted_action=self.scripted_action)
        return p
