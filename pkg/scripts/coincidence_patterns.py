"""Sample coincidence events and plot the four conditioned screen patterns.

D1 and D2 show fringes and anti-fringes; D3 and D4 show the clump. The
analytic densities are drawn over the histograms.

    python3 scripts/coincidence_patterns.py --n 100000 --out figures
"""

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from eraser_sim import DetectorId, default_geometry  # noqa: E402
from eraser_sim import detection  # noqa: E402


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--bins", type=int, default=50)
    ap.add_argument("--out", default="figures")
    args = ap.parse_args()

    g = default_geometry()
    events = detection.sample_events(g, args.n, args.seed)
    hists = detection.coincidence_histograms(events, g, args.bins)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True)
    for ax, det in zip(axes.ravel(), (DetectorId.D1, DetectorId.D2, DetectorId.D3, DetectorId.D4)):
        h = hists[det]
        expected = detection.expected_bin_probabilities(g, h.bin_edges, det) * h.total
        ax.bar(h.bin_centers, h.counts, width=np.diff(h.bin_edges), alpha=0.5, label="sampled")
        ax.plot(h.bin_centers, expected, "k-", lw=1, label="analytic")
        ax.set_title(f"{det.value}  visibility {detection.fringe_visibility(h):.2f}")
    axes[0, 0].legend()
    for ax in axes[1]:
        ax.set_xlabel("screen position y")
    fig.tight_layout()
    path = out / "coincidence_patterns.png"
    fig.savefig(path, dpi=120)
    print(path)
    print(detection.summary(hists))


if __name__ == "__main__":
    main()
