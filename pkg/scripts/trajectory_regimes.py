"""Plot pilot-wave trajectories for the three eraser timelines.

Eraser first: wiggly paths sorted into D1 and D2 fringes. Eraser after
landing: straight which-path rays. Mid-flight: straight until the switch,
then wiggly.

    python3 scripts/trajectory_regimes.py --n 40 --out figures
"""

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from eraser_sim import DetectorId, default_geometry  # noqa: E402
from eraser_sim import bohm, checks  # noqa: E402

COLORS = {DetectorId.D1: "tab:blue", DetectorId.D2: "tab:red",
          DetectorId.D3: "tab:gray", DetectorId.D4: "tab:gray", None: "k"}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=40)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="figures")
    args = ap.parse_args()

    g = default_geometry()
    timelines = checks.bohm_timelines(g)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    fig, axes = plt.subplots(1, len(timelines), figsize=(13, 4.5), sharey=True)
    for ax, (label, tl) in zip(axes, timelines.items()):
        ens = bohm.sample_ensemble(args.n, g, tl, args.seed, record_every=4)
        for tr in ens.trajectories:
            ax.plot(tr.positions[:, 0], tr.positions[:, 1], lw=0.6, color=COLORS[tr.idler_outcome])
        ax.set_title(label)
        ax.set_xlabel("x")
        ax.set_ylim(*g.screen_extent)
    axes[0].set_ylabel("y")
    fig.tight_layout()
    path = out / "trajectory_regimes.png"
    fig.savefig(path, dpi=120)
    print(path)


if __name__ == "__main__":
    main()
