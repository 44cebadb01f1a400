#!/usr/bin/env python3
"""Benchmark the numba kernel path against the pure-numpy fallback.

Times the pieces of a Q-network training step at production shapes
(batch 64, trunk 16->128->64, heads 64->32) plus a full end-to-end
train_step, and prints a side-by-side table.

Run:  python benchmarks/bench_kernels.py [--repeat 2000]
"""

import argparse
import time

import numpy as np

from trustsim import _kernels
from trustsim.agents.nn import Adam, AgentHyperparams, DuelingNetwork, ReplayBuffer, train_step


def time_call(fn, repeat):
    fn()  # warm-up / JIT compile
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def kernel_cases(impl, rng):
    x = rng.normal(size=(64, 16))
    w = rng.normal(size=(16, 128))
    b = rng.normal(size=128)
    h = rng.normal(size=(64, 128))
    w2 = rng.normal(size=(128, 64))
    dz = rng.normal(size=(64, 64))
    z = np.maximum(rng.normal(size=(64, 64)), 0.0)
    p = rng.normal(size=10_000)
    g = rng.normal(size=10_000)
    m = np.zeros(10_000)
    v = np.zeros(10_000)
    return {
        "dense_relu_forward 64x16->128": lambda: impl.dense_relu_forward(x, w, b),
        "grad_weights 128x64": lambda: impl.grad_weights(h, dz),
        "grad_input 64x128<-64": lambda: impl.grad_input(dz, w2),
        "relu_backward 64x64": lambda: impl.relu_backward(dz, z),
        "colsum 64x64": lambda: impl.colsum(dz),
        "adam_update 10k params": lambda: impl.adam_update(
            p, g, m, v, 5e-4, 0.9, 0.999, 1e-8, 0.9, 0.999
        ),
    }


def bench_train_step(repeat):
    """Full sampled double-Q regression step under the active backend."""
    hp = AgentHyperparams()
    rng = np.random.default_rng(0)
    net = DuelingNetwork(rng=rng)
    target = net.clone()
    opt = Adam(net.parameters(), lr=hp.learning_rate)
    buf = ReplayBuffer(hp.buffer_capacity, 16)
    for _ in range(256):
        buf.push(rng.normal(size=16), int(rng.integers(3)), float(rng.normal()), rng.normal(size=16), False)
    return time_call(lambda: train_step(net, target, buf, opt, hp, rng), repeat)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=2000)
    args = parser.parse_args()

    numpy_impl = _kernels.NUMPY
    numba_impl = _kernels.NUMBA if _kernels.NUMBA is not None else _kernels._numba_impl()

    rng = np.random.default_rng(0)
    print(f"active backend: {_kernels.backend_name()}   (set TRUSTSIM_BACKEND to override)\n")
    header = f"{'kernel':34s} {'numpy':>12s} {'numba':>12s} {'speedup':>9s}"
    print(header)
    print("-" * len(header))
    for name, np_fn in kernel_cases(numpy_impl, rng).items():
        t_np = time_call(np_fn, args.repeat)
        if numba_impl is not None:
            t_nb = time_call(kernel_cases(numba_impl, rng)[name], args.repeat)
            print(f"{name:34s} {t_np * 1e6:10.2f}us {t_nb * 1e6:10.2f}us {t_np / t_nb:8.2f}x")
        else:
            print(f"{name:34s} {t_np * 1e6:10.2f}us {'n/a':>12s} {'n/a':>9s}")

    t_step = bench_train_step(max(200, args.repeat // 10))
    print(f"\nfull train_step (batch 64), active backend: {t_step * 1e6:.1f}us")


if __name__ == "__main__":
    main()
