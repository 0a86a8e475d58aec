"""Regenerate the embedded edge lists from the copies bundled with networkx.

Run once by hand; networkx is not a dependency of the package.

    python scripts/export_datasets.py [--check]
"""

import argparse
from pathlib import Path

import networkx as nx

DATA = Path(__file__).resolve().parents[1] / "src" / "netsindy" / "data"

HEADERS = {
    "karate": ["# Zachary's karate club (Zachary 1977), 34 members, 78 friendship ties.",
               "# Unweighted; ids are 0-based (original member k is id k-1)."],
    "florentine": ["# Florentine families marriage network (Breiger & Pattison 1986), "
                   "15 families, 20 ties.",
                   "# The isolated Pucci family is omitted, as in the common 15-node version.",
                   "# Unweighted; ids index florentine.labels (alphabetical)."],
}


def export(name):
    if name == "karate":
        g = nx.karate_club_graph()
        labels = [f"member_{i + 1}" for i in range(g.number_of_nodes())]
        index = {v: v for v in g.nodes}
    else:
        g = nx.florentine_families_graph()
        labels = sorted(g.nodes)
        index = {v: i for i, v in enumerate(labels)}
    edges = sorted(tuple(sorted((index[u], index[v]))) for u, v in g.edges)
    lines = HEADERS[name] + ["# directed: false"] + [f"{u} {v}" for u, v in edges]
    return "\n".join(lines) + "\n", "\n".join(labels) + "\n"


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--check", action="store_true",
                        help="compare with the checked-in files instead of writing")
    args = parser.parse_args()
    for name in HEADERS:
        edges, labels = export(name)
        for suffix, text in ((".edges", edges), (".labels", labels)):
            path = DATA / f"{name}{suffix}"
            if args.check:
                status = "same" if path.read_text() == text else "DIFFERENT"
                print(f"{path.name}: {status}")
            else:
                path.write_text(text)
                print(f"wrote {path}")


if __name__ == "__main__":
    main()
