#!/usr/bin/env python3
"""Compare the numba kernels with the pure-numpy fallback.

Kernel timings call both backend modules directly in this process. The
end-to-end timings run a fresh interpreter per backend, toggled through
ZIB_DISABLE_NUMBA, so import-time selection is exercised as users see it.

    python3 benchmarks/bench_kernels.py [--repeat 20]
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from zib import _kernels

END_TO_END = {
    "analytic fit (n=1564, s=433)":
        "from zib.analytic import fit_nocov; from zib.model import SufficientStats as S; "
        "fit_nocov(S(1564, 433))",
    "covariate MCMC (n=1500, 2 chains x 500)":
        "import numpy as np; from zib.model import *; from zib.mcmc import *; "
        "from zib.simulation import generate_zib_cov; "
        "d = generate_zib_cov(CoefVector([-0.5, -2, -3], [0.5, 2, 3]), 1500, np.random.default_rng(1)); "
        "fit_covariate(d, config=ChainConfig(n_chains=2, iterations=500, warmup=500))",
}


def _best(fn, repeat, number):
    fn()  # compile / warm caches
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def kernel_cases():
    rng = np.random.default_rng(0)
    n = 1500
    y = rng.integers(0, 2, n).astype(np.float64)
    # kernels take full design matrices, intercept column included
    X = np.column_stack([np.ones(n), rng.normal(size=(n, 2))])
    Z = np.column_stack([np.ones(n), rng.normal(size=(n, 2))])
    theta = np.array([-0.5, -2.0, -3.0])
    beta = np.array([0.5, 2.0, 3.0])
    xs = np.linspace(1e-4, 0.5, 2049)
    return {
        "zib_loglik n=1500": lambda k: k.zib_loglik(y, X, Z, theta, beta),
        "zib_loglik_grad n=1500": lambda k: k.zib_loglik_grad(y, X, Z, theta, beta),
        "log_beta_cdf_arr 2049 pts a=434 b=1132": lambda k: k.log_beta_cdf_arr(xs, 434.0, 1132.0),
        "log_beta_cdf scalar": lambda k: k.log_beta_cdf(0.3, 434.0, 1132.0),
    }


def end_to_end(snippet, disable, repeat):
    env = dict(os.environ, ZIB_DISABLE_NUMBA="1" if disable else "0")
    code = (f"import timeit\nsetup = {snippet!r}\nexec(setup)\n"
            f"print(min(timeit.repeat(lambda: exec(setup), repeat={repeat}, number=1)))")
    out = subprocess.run([sys.executable, "-c", code], env=env, check=True,
                         capture_output=True, text=True)
    return float(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--skip-end-to-end", action="store_true")
    args = ap.parse_args()

    numba = _kernels.numba_backend
    if numba is None:
        print("numba unavailable; nothing to compare")
        return 1
    print(f"{'case':45s} {'numpy':>12s} {'numba':>12s} {'speedup':>9s}")
    for name, call in kernel_cases().items():
        t_np = _best(lambda: call(_kernels.numpy_backend), args.repeat, 10)
        t_nb = _best(lambda: call(numba), args.repeat, 10)
        print(f"{name:45s} {t_np * 1e3:10.3f}ms {t_nb * 1e3:10.3f}ms {t_np / t_nb:8.1f}x")
    if not args.skip_end_to_end:
        reps = max(1, args.repeat // 10)
        for name, snippet in END_TO_END.items():
            t_np = end_to_end(snippet, True, reps)
            t_nb = end_to_end(snippet, False, reps)
            print(f"{name:45s} {t_np * 1e3:10.1f}ms {t_nb * 1e3:10.1f}ms {t_np / t_nb:8.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
