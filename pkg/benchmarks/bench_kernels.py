"""Compare the compiled and pure-Python similarity kernels.

Checks that both backends return bit-identical results on the same inputs,
then times each kernel on pool-sized workloads.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

from __future__ import annotations

import argparse
import timeit

from protoloop import _kernels_py
from protoloop.rng import SplitMix64
from protoloop.synthetic import TAG_UNIVERSE, TAGS_PER_MOLECULE

try:
    from protoloop import _kernels as _compiled
except ImportError:
    _compiled = None


def random_masks(n: int, seed: int) -> list[int]:
    rng = SplitMix64(seed)
    out = []
    for _ in range(n):
        m = 0
        for t in rng.sample(TAGS_PER_MOLECULE, TAG_UNIVERSE):
            m |= 1 << t
        out.append(m)
    return out


def workloads(pool: list[int], refs: list[int]):
    return {
        "mean_pairwise_jaccard(100)": lambda k: k.mean_pairwise_jaccard(pool),
        "novelties(100 x 40)": lambda k: k.novelties(pool, refs),
        "farthest_point_order(100, 5)": lambda k: k.farthest_point_order(pool, 5),
        "farthest_point_order(100, 50)": lambda k: k.farthest_point_order(pool, 50),
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=20)
    args = ap.parse_args()

    pool = random_masks(100, 1)
    refs = random_masks(40, 2)
    jobs = workloads(pool, refs)
    if _compiled is None:
        print("compiled kernels unavailable; timing the Python backend only")

    for name, fn in jobs.items():
        if _compiled is not None and fn(_compiled) != fn(_kernels_py):
            raise SystemExit(f"backend mismatch on {name}")
    if _compiled is not None:
        print("bit-identity: ok")

    print(f"{'kernel':<32}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, fn in jobs.items():
        t_py = min(timeit.repeat(lambda: fn(_kernels_py), number=args.number, repeat=args.repeat)) / args.number
        if _compiled is None:
            print(f"{name:<32}{t_py * 1e3:>12.3f}{'-':>12}{'-':>10}")
            continue
        t_c = min(timeit.repeat(lambda: fn(_compiled), number=args.number, repeat=args.repeat)) / args.number
        print(f"{name:<32}{t_py * 1e3:>12.3f}{t_c * 1e3:>12.3f}{t_py / t_c:>9.1f}x")


if __name__ == "__main__":
    main()
