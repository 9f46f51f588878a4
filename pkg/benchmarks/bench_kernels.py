"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--size 16384] [--repeat 200] [--epochs 30]

Prints per-kernel timings at a typical hidden-layer batch size (128 units x
128 samples) and the wall-clock of one full training run on each backend.
"""
import argparse
import time
import timeit

import numpy as np

from segan import _pykernels, kernels
from segan.data import Dataset, inject_mcar
from segan.synthetic import correlated_gaussian
from segan.training import TrainConfig, train

try:
    from segan import _ckernels
except ImportError:
    _ckernels = None


def kernel_cases(n, rng):
    x, y, u = rng.normal(size=n), rng.normal(size=n), rng.random(n)
    mask = (rng.random(n) < 0.7).astype(float)
    p = rng.random(n)
    out = [np.empty(n) for _ in range(3)]
    drop = (u >= 0.5) * 2.0
    param, m1, m2 = x.copy(), np.zeros(n), np.zeros(n)
    return {
        "adam_update": lambda m: m.adam_update(param, y, m1, m2, 1e-3, 0.9, 0.999, 1e-8, 0.1,
                                               0.001),
        "masked_combine": lambda m: m.masked_combine(x, y, mask, out[0]),
        "masked_abs_error": lambda m: m.masked_abs_error(x, y, mask, out[0]),
        "bce": lambda m: m.bce(mask, p, out[0], 1e-7, 1 - 1e-7),
        "relu_dropout": lambda m: m.relu_dropout(x, u, 0.5, *out),
        "sigmoid": lambda m: m.sigmoid(x, out[0]),
        "relu_backward": lambda m: m.relu_backward(y, x, out[0]),
        "relu_dropout_backward": lambda m: m.relu_dropout_backward(y, x, drop, out[0]),
        "sigmoid_backward": lambda m: m.sigmoid_backward(y, p, out[0]),
    }


def bench_kernels(n, repeat):
    cases = kernel_cases(n, np.random.default_rng(0))
    print(f"per-call time, {n} elements (best of 5 x {repeat} calls)")
    print(f"{'kernel':<24}{'cython us':>12}{'numpy us':>12}{'speedup':>10}")
    for name, fn in cases.items():
        py = min(timeit.repeat(lambda: fn(_pykernels), number=repeat, repeat=5)) / repeat * 1e6
        if _ckernels is None:
            print(f"{name:<24}{'n/a':>12}{py:>12.1f}{'':>10}")
            continue
        c = min(timeit.repeat(lambda: fn(_ckernels), number=repeat, repeat=5)) / repeat * 1e6
        print(f"{name:<24}{c:>12.1f}{py:>12.1f}{py / c:>9.2f}x")


def bench_training(epochs):
    x, y = correlated_gaussian(n=2000, d=8, seed=0)
    v = ((x - x.min(0)) / (x.max(0) - x.min(0))).T.copy()
    ds = inject_mcar(Dataset(v, np.ones_like(v), y, 2), 0.3, np.random.default_rng(0))
    cfg = TrainConfig(epochs=epochs, seed=0)
    backends = ["python"] + (["cython"] if _ckernels is not None else [])
    times = {}
    previous = kernels.BACKEND
    try:
        for name in backends:
            kernels.use_backend(name)
            train(ds, TrainConfig(epochs=1))  # warm-up
            best = float("inf")
            for _ in range(3):
                t0 = time.perf_counter()
                train(ds, cfg)
                best = min(best, time.perf_counter() - t0)
            times[name] = best
    finally:
        kernels.use_backend(previous)
    print(f"\ntraining, n=2000 d=8, {epochs} epochs (best of 3)")
    for name, t in times.items():
        print(f"{name:<10}{t:8.3f} s")
    if len(times) == 2:
        print(f"speedup   {times['python'] / times['cython']:8.2f}x")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=128 * 128)
    parser.add_argument("--repeat", type=int, default=200)
    parser.add_argument("--epochs", type=int, default=30)
    args = parser.parse_args()
    print(f"default backend: {kernels.BACKEND}")
    bench_kernels(args.size, args.repeat)
    bench_training(args.epochs)


if __name__ == "__main__":
    main()
