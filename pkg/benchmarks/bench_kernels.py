"""Compare the compiled bit-packing kernels against the numpy fallback.

Run:  python benchmarks/bench_kernels.py [--sizes 100000,1000000] [--repeats 7]

Both backends expose pack_bits/unpack_bits; this times round trips at
several fragment widths and prints per-backend throughput plus speedup.
"""

import argparse
import importlib
import statistics
import time

import numpy as np

from prognet.kernels import BACKEND, fallback


def load_backends():
    backends = {"python": fallback}
    try:
        backends["cython"] = importlib.import_module(
            "prognet.kernels._bitpack")
    except ImportError:
        pass
    return backends


def time_call(fn, repeats):
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return statistics.median(samples)


def bench(size, width, repeats, backends):
    rng = np.random.default_rng(size * 31 + width)
    values = rng.integers(0, 1 << width, size=size).astype(np.uint32)
    rows = {}
    for name, mod in backends.items():
        packed = mod.pack_bits(values, width)
        t_pack = time_call(lambda m=mod: m.pack_bits(values, width), repeats)
        t_unpack = time_call(
            lambda m=mod, p=packed: m.unpack_bits(p, size, width), repeats)
        assert np.array_equal(mod.unpack_bits(packed, size, width), values)
        rows[name] = (t_pack, t_unpack)
    return rows


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--sizes", default="100000,1000000,4000000")
    parser.add_argument("--widths", default="1,2,5,8,13,16")
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args()

    sizes = [int(s) for s in args.sizes.split(",")]
    widths = [int(w) for w in args.widths.split(",")]
    backends = load_backends()
    print(f"active backend: {BACKEND}; timing {', '.join(backends)}")
    header = (f"{'size':>9} {'width':>5} | "
              + " | ".join(f"{n + ' pack':>15} {n + ' unpack':>17}"
                           for n in backends))
    if len(backends) > 1:
        header += " | speedup(pack/unpack)"
    print(header)
    print("-" * len(header))

    for size in sizes:
        for width in widths:
            rows = bench(size, width, args.repeats, backends)
            cells = []
            for name in backends:
                t_pack, t_unpack = rows[name]
                cells.append(f"{size / t_pack / 1e6:>10.1f} Mv/s "
                             f"{size / t_unpack / 1e6:>12.1f} Mv/s")
            line = f"{size:>9} {width:>5} | " + " | ".join(cells)
            if "cython" in rows and "python" in rows:
                sp = rows["python"][0] / rows["cython"][0]
                su = rows["python"][1] / rows["cython"][1]
                line += f" | {sp:>6.1f}x / {su:.1f}x"
            print(line)


if __name__ == "__main__":
    main()
