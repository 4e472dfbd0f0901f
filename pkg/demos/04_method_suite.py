"""The desk-scale method comparison.

Runs the always-on deformation (rapo), its monitoring-only twin that shares
everything except where the deformation is applied (pm_st), the
counterfactual that reuses rapo's exact checkpoint with the deformation
switched off at replay (rapo_off_rep), and the unconstrained reference
(ge). Prints the replay-suppression table.
"""

import tempfile

import numpy as np

from replaylab import desk_preset, load_config, run_method_suite


def main():
    cfg = load_config(desk_preset())
    with tempfile.TemporaryDirectory() as out:
        manifest = run_method_suite(cfg, out)
        print(f"{'method':14s} {'RAG':>7s} {'AUC-R':>7s} {'SM-R':>7s} "
              f"{'ReplayRet':>10s} {'OddsRatio':>10s}")
        for method in ("ge", "pm_st", "rapo", "rapo_off_rep"):
            o = manifest["outcomes"][method]

            def mean(key):
                vals = [m[key] for m in o.metrics
                        if key in m and not np.isnan(m[key])]
                return float(np.mean(vals))

            print(f"{method:14s} {mean('rag'):7.3f} {mean('auc_r'):7.3f} "
                  f"{mean('sm_r'):7.3f} {mean('replay_ret'):10.3f} "
                  f"{mean('odds_ratio_mean'):10.3f}")
        hashes = manifest["checkpoint_hashes"]
        print(f"\nrapo / rapo_off_rep checkpoints identical: "
              f"{hashes['rapo'] == hashes['rapo_off_rep']}")


if __name__ == "__main__":
    main()
