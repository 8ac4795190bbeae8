"""Time the compiled kernels against the NumPy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 20] [--rows 4096] [--dim 64]

Also times one training step of the default model under each backend.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from irp._kernels import load_backend


def kernel_cases(rows: int, dim: int, rng: np.random.Generator):
    x = rng.standard_normal((rows, dim))
    g = rng.standard_normal((rows, dim))
    gamma = rng.standard_normal(dim)
    beta = rng.standard_normal(dim)
    ids = rng.integers(0, 2000, size=rows).astype(np.int64)
    pool = rng.standard_normal((64, dim))
    query = rng.standard_normal(dim)

    def cases(k):
        y = k.softmax_fwd(x)
        _, xhat, rstd = k.layer_norm_fwd(x, gamma, beta, 1e-5)
        table = np.zeros((2000, dim))
        return {
            "layer_norm_fwd": lambda: k.layer_norm_fwd(x, gamma, beta, 1e-5),
            "layer_norm_bwd": lambda: k.layer_norm_bwd(g, xhat, rstd, gamma),
            "softmax_fwd": lambda: k.softmax_fwd(x),
            "softmax_bwd": lambda: k.softmax_bwd(y, g),
            "gelu_fwd": lambda: k.gelu_fwd(x),
            "gelu_bwd": lambda: k.gelu_bwd(x, g),
            "scatter_add_rows": lambda: k.scatter_add_rows(table, ids, g),
            "mmr_greedy(64x16)": lambda: k.mmr_greedy(pool, query, 0.7, 16),
        }

    return cases


def best_ms(fn, repeat: int) -> float:
    fn()
    return 1e3 * min(timeit.repeat(fn, number=1, repeat=repeat))


def train_step_ms(repeat: int) -> float:
    from irp import model, objectives
    from irp.autograd import Tape

    cfg = model.ModelConfig(vocab_size=2000)
    params = model.init_params(cfg, seed=0)
    rng = np.random.default_rng(0)
    ids = rng.integers(4, 2000, size=(32, 60))
    ids[:, 0] = 2
    lengths = np.full(32, 60)
    y = rng.integers(0, 2, size=32).astype(float)

    def step():
        with Tape() as tape:
            p = model.forward_ids(params, ids, lengths, train=True, rng=np.random.default_rng(1))
            loss = objectives.bce_loss(p, y)
        tape.backward(loss)

    return best_ms(step, max(3, repeat // 4))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--rows", type=int, default=4096)
    ap.add_argument("--dim", type=int, default=64)
    ap.add_argument("--train-step-backend", choices=("cython", "python"), help=argparse.SUPPRESS)
    args = ap.parse_args(argv)

    if args.train_step_backend:
        print(f"{train_step_ms(args.repeat):.3f}")
        return 0

    backends = {}
    for name in ("cython", "python"):
        try:
            backends[name] = load_backend(name)
        except ImportError:
            print(f"{name} backend unavailable (build with `python3 setup.py build_ext --inplace`)")
    rng = np.random.default_rng(0)
    make = kernel_cases(args.rows, args.dim, rng)
    timings = {name: {k: best_ms(fn, args.repeat) for k, fn in make(mod).items()} for name, mod in backends.items()}

    # a full step is timed in a subprocess so the backend choice applies at import
    for name in backends:
        env = dict(os.environ, IRP_PURE_PYTHON="1" if name == "python" else "0")
        out = subprocess.run(
            [sys.executable, __file__, "--repeat", str(args.repeat), "--train-step-backend", name],
            env=env, capture_output=True, text=True, check=True,
        )
        timings[name]["train step (B=32, L=60)"] = float(out.stdout)

    names = list(timings)
    rows = list(next(iter(timings.values())))
    print(f"rows={args.rows} dim={args.dim} best of {args.repeat}, milliseconds")
    print(f"{'kernel':<26}" + "".join(f"{n:>10}" for n in names) + ("   speedup" if len(names) == 2 else ""))
    for r in rows:
        line = f"{r:<26}" + "".join(f"{timings[n][r]:>10.3f}" for n in names)
        if len(names) == 2:
            line += f"{timings['python'][r] / timings['cython'][r]:>9.2f}x"
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
