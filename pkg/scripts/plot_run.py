"""Plot round-record tables written by the ``confhedge`` CLI.

Example::

    confhedge synthetic --out ch.csv --adahedge-out ada.csv
    python scripts/plot_run.py ch.csv ada.csv --labels ConfHedge-1 AdaHedge --out run.png

The top panel shows cumulative algorithm loss per run; the bottom panel
shows the weight trajectory of the first run.
"""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from confhedge.io import read_round_records  # noqa: E402


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("records", nargs="+", help="round-record CSV/JSONL files")
    parser.add_argument("--labels", nargs="+", help="legend label per file")
    parser.add_argument("--out", default="run.png")
    args = parser.parse_args(argv)
    labels = args.labels or args.records
    if len(labels) != len(args.records):
        parser.error("need one label per records file")

    fig, (top, bottom) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    first = None
    for path, label in zip(args.records, labels):
        rows = read_round_records(path)
        t = np.array([r["t"] for r in rows])
        top.plot(t, np.cumsum([r["h"] for r in rows]), label=label)
        if first is None:
            first = (t, np.array([r["w"] for r in rows]))
    top.set_ylabel("cumulative loss")
    top.legend()
    t, W = first
    for i in range(W.shape[1]):
        bottom.plot(t, W[:, i], label=f"expert {i + 1}")
    bottom.set_ylabel(f"weights ({labels[0]})")
    bottom.set_xlabel("round")
    bottom.legend(ncol=min(W.shape[1], 5), fontsize="small")
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)


if __name__ == "__main__":
    main()
