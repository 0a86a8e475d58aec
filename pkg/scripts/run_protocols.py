"""Run every experiment config in configs/ through the CLI and summarise.

    python scripts/run_protocols.py [--out runs]

Tree clustering goes through ``cluster``. The SBM, karate, florentine and
consensus runs go through ``predict``, and the surrogate network through
``surrogate``. Output directories hold plot-ready CSV/JSON plus a manifest
for exact replay.
"""

import argparse
from pathlib import Path

from netsindy.cli import run

ROOT = Path(__file__).resolve().parents[1]

PLAN = [
    ("cluster", "tree_cluster"),
    ("predict", "sbm_sis"),
    ("predict", "karate_sis"),
    ("predict", "florentine_sis"),
    ("predict", "consensus_path"),
    ("surrogate", "surrogate_sbm"),
]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=str(ROOT / "runs"))
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args()
    out = Path(args.out)
    failed = []
    for command, name in PLAN:
        argv = [command, "--config", str(ROOT / "configs" / f"{name}.json"),
                "--out", str(out / name)]
        if args.seed is not None:
            argv += ["--seed", str(args.seed)]
        if run(argv) != 0:
            failed.append(name)
    run(["report", str(out)])
    if failed:
        raise SystemExit(f"failed runs: {', '.join(failed)}")


if __name__ == "__main__":
    main()
