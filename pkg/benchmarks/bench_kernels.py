"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py --entities 40943 --blocks 100
"""
import argparse
import timeit

import numpy as np

from spherekg import kernels


def cases(args, rng):
    n, nb = args.batch, args.blocks
    rel = rng.integers(0, args.relations, n).astype(np.int64)
    for kind, k, P in ((kernels.ANGLE, 2, 1), (kernels.QUAT, 3, 4), (kernels.HOUSEHOLDER, 4, 8)):
        params = rng.normal(size=(args.relations, nb, P))
        if kind == kernels.HOUSEHOLDER:
            u = params.reshape(args.relations, nb, -1, k)
            u /= np.linalg.norm(u, axis=-1, keepdims=True)
        x = rng.normal(size=(n, nb, k))
        g = rng.normal(size=(n, nb, k))
        yield f"k={k}", kind, params, rel, x, g


def bench(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat)) * 1e3


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--batch", type=int, default=512 * 33, help="triples per call (positives + negatives)")
    parser.add_argument("--blocks", type=int, default=100)
    parser.add_argument("--relations", type=int, default=11)
    parser.add_argument("--entities", type=int, default=40943)
    parser.add_argument("--queries", type=int, default=128)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    backends = {"numpy": kernels.get_backend("numpy")}
    try:
        backends["cython"] = kernels.get_backend("cython")
    except ImportError:
        print("compiled kernels not built; numpy only")

    rng = np.random.default_rng(0)
    rows = []
    for label, kind, params, rel, x, g in cases(args, rng):
        rows.append((f"rotate {label}", {name: (lambda b=b: b.rotate(kind, params, rel, x, False))
                                         for name, b in backends.items()}))
        rows.append((f"rotate_vjp {label}", {name: (lambda b=b: b.rotate_vjp(kind, params, rel, x, g, False))
                                             for name, b in backends.items()}))
    d = 2 * args.blocks
    centers = rng.normal(size=(args.entities, d))
    queries = rng.normal(size=(args.queries, d))
    rows.append(("query_distances", {name: (lambda b=b: b.query_distances(queries, centers, args.threads))
                                     for name, b in backends.items()}))
    flat = rng.normal(size=args.entities * d)
    grad = rng.normal(size=flat.size)
    rows.append(("adam_update", {name: (lambda b=b: b.adam_update(flat.copy(), grad, np.zeros_like(flat),
                                                                  np.zeros_like(flat), 1e-3, 0.9, 0.999, 1e-8,
                                                                  0.1, 0.001))
                                 for name, b in backends.items()}))
    idx = rng.integers(0, args.entities, args.batch).astype(np.int64)
    src = rng.normal(size=(args.batch, d))
    rows.append(("scatter_add_rows", {name: (lambda b=b: b.scatter_add_rows(np.zeros((args.entities, d)), idx,
                                                                            src))
                                      for name, b in backends.items()}))

    names = list(backends)
    print(f"{'kernel':24s}" + "".join(f"{n + ' ms':>12s}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for label, fns in rows:
        times = [bench(fns[n], args.repeat) for n in names]
        line = f"{label:24s}" + "".join(f"{t:12.2f}" for t in times)
        if len(times) > 1:
            line += f"{times[0] / times[1]:11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
