"""Harm memory and conductance gating, step by step.

A burst of delayed harm is attributed to a few regions; the trace G decays
while the scar H ratchets up wherever G crossed the threshold. The scar
then throttles transition probabilities into those regions: a categorical
kernel is reweighted exactly (mass preserved), and per-edge cascade
probabilities are gated multiplicatively (never above nominal).
"""

import numpy as np

from replaylab import (DeformationSpec, FieldParams, HarmFields,
                       attribute_harm, conductance, gate_edge_prob,
                       reweight_categorical, update_scar)


def main():
    params = FieldParams(lam=0.1, alpha=2.0, eta=0.3, tau=0.3)
    fields = HarmFields.zeros(6, params)
    spec = DeformationSpec(w_G=1.0, w_H=2.0, psi_min=0.01)

    print("step |      G[2]      H[2]    psi[2]")
    for t in range(12):
        harm = 1.0 if t < 3 else 0.0      # three harmful steps, then quiet
        causal = np.array([2, 3]) if harm else np.empty(0, dtype=int)
        fields = update_scar(attribute_harm(fields, harm, causal))
        psi = conductance(np.array([2]), fields, spec)[0]
        print(f"{t:4d} | {fields.G[2]:9.4f} {fields.H[2]:9.4f} {psi:9.4f}")

    print("\nthe trace decays; the scar stays (delta=1 is irreversible)\n")

    nominal = np.array([0.4, 0.3, 0.2, 0.1])
    psi = conductance(np.arange(4), HarmFields(
        G=np.zeros(4), H=np.array([0.0, 0.0, 1.5, 0.0]), params=params), spec)
    deformed = reweight_categorical(nominal, psi)
    print(f"nominal kernel : {nominal}")
    print(f"conductance    : {np.round(psi, 4)}")
    print(f"deformed kernel: {np.round(deformed, 4)} "
          f"(sum={deformed.sum():.15f})")
    print(f"edge gate      : p=0.4, psi=0.25 -> {gate_edge_prob(0.4, 0.25)}")


if __name__ == "__main__":
    main()
