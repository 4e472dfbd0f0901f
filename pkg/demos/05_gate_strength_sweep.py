"""Dose-response of replay suppression in the scar weight w_H.

With a milder harm-attribution gain (so the scar does not saturate the
conductance floor for every weight), raising w_H monotonically deepens
replay suppression.
"""

import json
import os
import tempfile

from replaylab import desk_preset
from replaylab.cli import main as cli_main


def main():
    with tempfile.TemporaryDirectory() as tmp:
        cfg_path = os.path.join(tmp, "cfg.json")
        with open(cfg_path, "w") as fh:
            json.dump(desk_preset(graph={"seeds": [1, 2, 3]},
                                  fields={"alpha": 0.5, "delay": 25},
                                  methods=["rapo"], episodes=5), fh)
        out = os.path.join(tmp, "sweep.csv")
        cli_main(["sweep", "--config", cfg_path, "--out", out,
                  "--w-h", "0.5", "1.0", "2.0", "4.0", "--eta", "0.3"])
        with open(out) as fh:
            print(fh.read())


if __name__ == "__main__":
    main()
