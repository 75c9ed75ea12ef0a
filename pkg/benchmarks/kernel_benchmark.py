"""Timing comparison of the compiled and pure-Python filter kernels.

Runs the forward filter and the backward sampling pass on simulated
data of several lengths and reports per-call wall time for whichever
backends are importable.  Usage:

    python benchmarks/kernel_benchmark.py [--n 500 2000 10000] [--repeat 20]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from gedsv import RngStream, StaticParams, simulate
from gedsv._kernels import available_backends
from gedsv.filtering import run_filter
from gedsv.model import DIFFUSE_INIT
from gedsv.smoothing import _filtered_log_moments


def time_backends(n: int, repeat: int, draws: int = 100) -> list[tuple[str, float, float]]:
    params = StaticParams(alpha=0.35, phi=0.95, sigma_eta2=0.05, r=1.5)
    series, _ = simulate(params, n, rng=RngStream(2024, 0))
    y = series.values
    out = run_filter(series, params)
    f, q = _filtered_log_moments(out)
    z = RngStream(2024, 1).standard_normal((draws, n))

    results = []
    for name, mod in available_backends().items():
        filt = (
            lambda mod=mod: mod.filter_pass(
                y,
                params.alpha,
                params.phi,
                params.sigma_eta2,
                params.r,
                DIFFUSE_INIT.shape,
                DIFFUSE_INIT.rate,
            )
        )
        back = lambda mod=mod: mod.backward_sample(
            f, q, params.alpha, params.phi, params.sigma_eta2, z
        )
        t_filter = min(timeit.repeat(filt, number=1, repeat=repeat))
        t_back = min(timeit.repeat(back, number=1, repeat=repeat))
        results.append((name, t_filter, t_back))
    return results


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, nargs="+", default=[500, 2000, 10000])
    parser.add_argument("--repeat", type=int, default=20)
    parser.add_argument("--draws", type=int, default=100)
    args = parser.parse_args()

    backends = available_backends()
    print(f"backends available: {', '.join(backends)}")
    header = f"{'n':>7}  {'backend':>9}  {'filter_pass':>12}  {'backward_sample':>16}"
    print(header)
    print("-" * len(header))
    baselines: dict[int, float] = {}
    for n in args.n:
        for name, t_filter, t_back in time_backends(n, args.repeat, args.draws):
            note = ""
            if name == "python":
                baselines[n] = t_filter
            elif n in baselines and t_filter > 0:
                note = f"  ({baselines[n] / t_filter:.1f}x filter speedup)"
            print(
                f"{n:>7}  {name:>9}  {t_filter * 1e3:>10.3f}ms  "
                f"{t_back * 1e3:>14.3f}ms{note}"
            )


if __name__ == "__main__":
    main()
