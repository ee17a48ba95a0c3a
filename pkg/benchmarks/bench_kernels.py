"""Time the compiled scatter-add kernel against the numpy fallback.

Shapes follow the training workload: embedding-gradient accumulation for a
batch of spliced sequences, and GNN neighbour aggregation for a batch of graphs.

    python3 benchmarks/bench_kernels.py [--repeat 20]
"""
import argparse
import timeit

import numpy as np

from galla.tensor import _kernels_py, kernels

CASES = {
    # name: (rows in out, rows in src, width)
    "embedding grad (32 x 256 tokens -> 1024 vocab)": (1024, 32 * 256, 128),
    "gnn aggregate (32 graphs x 130 edges)": (32 * 35, 32 * 130, 128),
    "subtoken mean (32 graphs x 90 subtokens)": (32 * 35, 32 * 90, 64),
}


def bench(fn, out_rows, src_rows, width, dtype, repeat):
    rng = np.random.default_rng(0)
    index = rng.integers(0, out_rows, src_rows).astype(np.int64)
    src = rng.standard_normal((src_rows, width)).astype(dtype)
    out = np.zeros((out_rows, width), dtype)
    fn(out, index, src)  # warm-up
    return min(timeit.repeat(lambda: fn(out, index, src), number=5, repeat=repeat)) / 5


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    if kernels._compiled is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
    print(f"{'case':<50} {'dtype':<8} {'numpy ms':>9} {'cython ms':>10} {'speedup':>8}")
    for name, shape in CASES.items():
        for dtype in (np.float32, np.float64):
            t_py = bench(_kernels_py.scatter_add_rows, *shape, dtype, args.repeat)
            t_cy = bench(kernels._compiled.scatter_add_rows, *shape, dtype, args.repeat)
            print(f"{name:<50} {np.dtype(dtype).name:<8} {t_py * 1e3:>9.3f} {t_cy * 1e3:>10.3f} {t_py / t_cy:>7.1f}x")


if __name__ == "__main__":
    main()
