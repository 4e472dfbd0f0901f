"""One Exposure -> Decay -> Replay episode, with and without gating.

During Exposure the cascade crosses the sensitive arc and delayed harm
scars it. At Replay the observable state and the agent are reset but the
scar persists: with the deformation on, the replayed cascade stalls at the
scarred arc; with it switched off at replay only (the counterfactual), the
same checkpoint re-expresses the full cascade.
"""

from replaylab import (DeformationSpec, FieldParams, HarmFields, Policy,
                       RsdConfig, generate_graph, run_rsd_episode)
from replaylab.graph_env import EnvParams
from replaylab.metrics import episode_metrics


def run(replay_deformation):
    graph = generate_graph(50, 3.0, seed=1, locality=1.0,
                           sens_style="arc", sens_fraction=0.24)
    cfg = RsdConfig(t_exp=120, t_decay=40, t_rep=120,
                    replay_deformation=replay_deformation, gamma=0.8)
    rec = run_rsd_episode(
        cfg,
        Policy(kind="scripted", scripted_action=1).freeze(),
        graph,
        HarmFields.zeros(50, FieldParams(alpha=2.0, eta=0.3, delay=25)),
        DeformationSpec(psi_min=0.001),
        episode_seed=7,
        env_params=EnvParams(k_seed=6, seed_pool="core", refire=False,
                             reward="log"),
    )
    return rec


def main():
    for mode in ("inherit", "off"):
        rec = run(mode)
        m = episode_metrics(rec)
        exp = rec.phases["exposure"]
        rep = rec.phases["replay"]
        print(f"--- replay deformation: {mode}")
        print(f"exposure peak reach={max(exp.reach)}  "
              f"replay peak reach={max(rep.reach)}")
        print(f"RAG={m['rag']:.3f}  AUC-R={m['auc_r']:.3f}  "
              f"SM-R={m['sm_r']:.3f}  odds ratio="
              f"{m['odds_ratio_mean']:.4f}")
        print(f"scar mass after exposure: "
              f"{rec.field_snapshots['after_exposure']['h_sum']:.3f}")
        print()


if __name__ == "__main__":
    main()
