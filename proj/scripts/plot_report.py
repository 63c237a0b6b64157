"""Plot error CDFs and a confusion matrix from report files written by `unifi eval`."""

import argparse
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def read_cdf(path):
    with open(path) as f:
        rows = list(csv.reader(f, delimiter="\t"))[1:]
    return np.array([[float(a), float(b)] for a, b in rows]).reshape(-1, 2)


def read_confusion(path):
    with open(path) as f:
        rows = list(csv.reader(f, delimiter="\t"))
    labels = rows[0][1:]
    counts = np.array([[int(x) for x in r[1:]] for r in rows[1:]])
    return labels, counts


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("reports", nargs="+", help="report prefixes (the --out given to unifi)")
    p.add_argument("--out", default="report.png")
    args = p.parse_args()

    fig, (ax_cdf, ax_cm) = plt.subplots(1, 2, figsize=(11, 4.5))
    for prefix in args.reports:
        cdf = read_cdf(Path(prefix + ".cdf.tsv"))
        ax_cdf.plot(cdf[:, 0], cdf[:, 1], label=Path(prefix).name)
    ax_cdf.set_xlabel("localization error (m)")
    ax_cdf.set_ylabel("CDF")
    ax_cdf.grid(alpha=0.3)
    ax_cdf.legend()

    labels, counts = read_confusion(Path(args.reports[0] + ".confusion.tsv"))
    norm = counts / np.maximum(counts.sum(axis=1, keepdims=True), 1)
    ax_cm.imshow(norm, cmap="Blues", vmin=0, vmax=1)
    ax_cm.set_xticks(range(len(labels)), labels, rotation=30)
    ax_cm.set_yticks(range(len(labels)), labels)
    ax_cm.set_xlabel("predicted")
    ax_cm.set_ylabel("truth")
    for i in range(len(labels)):
        for j in range(len(labels)):
            ax_cm.text(j, i, f"{norm[i, j]:.2f}", ha="center", va="center", fontsize=8)
    ax_cm.set_title(Path(args.reports[0]).name)

    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
