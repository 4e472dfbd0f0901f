"""Run the executable theory checks and show their margins.

The no-go equivalence (a reset agent cannot behave differently under a
stationary kernel), the odds-contraction factor, the safe-mass floor, and
the multi-step compounding bound — each checked against explicit small
models, with negative controls that must fail.
"""

import json

from replaylab import run_all_checks


def main():
    print(json.dumps(run_all_checks(seed=0), indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
