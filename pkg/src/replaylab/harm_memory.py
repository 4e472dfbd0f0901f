"""Persistent environment-side harm memory.

Two region-indexed fields: a decaying harm trace G and a persistent scar H.
Delayed harm is attributed uniformly over the causal sensitive nodes; scars
grow where the trace exceeds a threshold and decay at rate delta (delta = 1
is the irreversible variant).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["FieldParams", "HarmFields", "attribute_harm", "update_scar"]


@dataclass(frozen=True)
class FieldParams:
    lam: float = 0.1        # trace decay rate, in (0,1)
    alpha: float = 0.5      # injection gain
    eta: float = 0.05       # scar growth rate
    tau: float = 0.3        # scar threshold on the trace
    delta: float = 1.0      # scar retention, 1.0 = irreversible
    delay: int = 50         # harm delay D in steps

    def __post_init__(self):
        if not (0.0 < self.lam < 1.0):
            raise ValueError("lam must lie in (0, 1)")
        if self.alpha <= 0 or self.eta <= 0 or self.tau <= 0:
            raise ValueError("alpha, eta, tau must be positive")
        if not (0.95 <= self.delta <= 1.0):
            raise ValueError("delta must lie in [0.95, 1]")
        if self.delay < 0:
            raise ValueError("delay must be nonnegative")


@dataclass
class HarmFields:
    G: np.ndarray
    H: np.ndarray
    params: FieldParams

    @classmethod
    def zeros(cls, regions: int, params: FieldParams | None = None) -> "HarmFields":
        params = params or FieldParams()
        return cls(G=np.zeros(regions), H=np.zeros(regions), params=params)

    def copy(self) -> "HarmFields":
        return HarmFields(G=self.G.copy(), H=self.H.copy(), params=self.params)

    def summary(self) -> dict:
        top = np.argsort(-self.H, kind="stable")[:10]
        return {
            "g_sum": float(self.G.sum()),
            "h_sum": float(self.H.sum()),
            "top_scar_regions": [[int(r), float(self.H[r])] for r in top if self.H[r] > 0],
        }


def attribute_harm(fields: HarmFields, harm: float, causal_regions) -> HarmFields:
    """Decay the trace and inject attributed harm.

    G'_r = (1 - lam) G_r + alpha * harm * w(r) with w uniform on the causal
    set; an empty causal set gives pure decay. Returns a new HarmFields.
    """
    if not (0.0 <= harm <= 1.0):
        raise ValueError("harm must lie in [0, 1]")
    p = fields.params
    causal = np.asarray(causal_regions, dtype=int)
    if harm > 0 and causal.size == 0:
        # the delayed-harm formula makes this combination impossible
        raise ValueError("positive harm requires a nonempty causal set")
    g = (1.0 - p.lam) * fields.G
    if harm > 0 and causal.size > 0:
        g[causal] += p.alpha * harm / causal.size
    return HarmFields(G=g, H=fields.H.copy(), params=p)


def update_scar(fields: HarmFields) -> HarmFields:
    """H'_r = delta * H_r + eta * max(0, G_r - tau). Returns a new HarmFields."""
    p = fields.params
    h = p.delta * fields.H + p.eta * np.maximum(0.0, fields.G - p.tau)
    return HarmFields(G=fields.G.copy(), H=h, params=p)
