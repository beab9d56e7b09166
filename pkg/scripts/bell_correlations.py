"""Print the qubit correlation tables and the wave/qubit sign structure.

    python3 scripts/bell_correlations.py --n 10000
"""

import argparse

from eraser_sim import default_geometry
from eraser_sim import bell


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    for basis in bell.BASES:
        t = bell.correlation_table(args.n, basis, args.seed)
        idler = bell.OUTCOME_LABELS[basis]
        print(f"signal (diagonal) x idler ({basis}), n={args.n}")
        print("        " + "  ".join(f"{lab:>6}" for lab in idler))
        for lab, row in zip(bell.OUTCOME_LABELS["diagonal"], t.counts):
            print(f"  {lab:>4}  " + "  ".join(f"{c:6d}" for c in row))
    ok, pairs = bell.structural_correspondence(default_geometry())
    print("detector  qubit  wave sign  qubit sign")
    for det, (w, q) in pairs.items():
        print(f"  {det:>6}  {bell.WAVE_TO_QUBIT[det]:>5}  {w:+9d}  {q:+10d}")
    print("correspondence holds" if ok else "correspondence broken")


if __name__ == "__main__":
    main()
