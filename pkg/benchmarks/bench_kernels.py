"""Compare the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 20]

Each kernel runs on desk-scale shapes; the script checks that both backends
agree before timing them.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from kdmeta import _kernels_py as py

try:
    from kdmeta import _ckernels as cy
except ImportError:  # pragma: no cover
    cy = None


def _cases(gen: np.random.Generator):
    def cn(*shape):
        return (gen.standard_normal(shape) + 1j * gen.standard_normal(shape)) / np.sqrt(2)

    w, w_hat = cn(256, 8, 8), cn(256, 8, 8)
    h = cn(512, 8, 2)
    gram = np.ascontiguousarray(h @ np.swapaxes(h.conj(), 1, 2))
    x = cn(16, 16)
    return {
        "sgcs_columns (256x8x8)": (lambda m: m.sgcs_columns(w, w_hat), lambda a, b: np.allclose(a, b, atol=1e-12)),
        "sgcs_grad (256x8x8)": (
            lambda m: m.sgcs_grad(w, w_hat),
            lambda a, b: np.allclose(a[0], b[0], atol=1e-12) and np.allclose(a[1], b[1], atol=1e-12),
        ),
        "principal_eigh (512x8x8)": (
            lambda m: m.principal_eigh(gram, 1e-12, 10_000),
            lambda a, b: np.allclose(a[1], b[1], rtol=1e-10),
        ),
        "mgs (16x16)": (lambda m: m.mgs(x), lambda a, b: np.allclose(a[0], b[0], atol=1e-10)),
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    if cy is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")
    cases = _cases(np.random.default_rng(0))
    print(f"{'kernel':28s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, (run, same) in cases.items():
        if not same(run(py), run(cy)):
            raise SystemExit(f"{name}: backends disagree")
        t_py = min(timeit.repeat(lambda: run(py), number=1, repeat=args.repeat)) * 1e3
        t_cy = min(timeit.repeat(lambda: run(cy), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:28s} {t_py:10.3f} {t_cy:10.3f} {t_py / t_cy:7.1f}x")


if __name__ == "__main__":
    main()
