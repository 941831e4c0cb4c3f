"""Time the numba kernels against the numpy fallback on pipeline-sized inputs.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``. Outputs are checked for
agreement before timing; numba compile time is excluded by a warm-up call.
"""
import argparse
import logging
import timeit

import numpy as np

from medevalkit import _kernels

logger = logging.getLogger("bench_kernels")


def cases(rng):
    hu = rng.uniform(-2000.0, 2000.0, (512, 512))
    img = rng.integers(0, 256, (512, 512, 3), dtype=np.uint8)
    slide = rng.integers(0, 256, (2000, 2000, 3), dtype=np.uint8)
    mask = rng.random((2000, 2000)) < 0.3
    a = rng.integers(0, 50, 400)
    b = rng.integers(0, 50, 400)
    return {
        "window_to_u8 512x512": lambda k: k.window_to_u8(hu, -135.0, 215.0),
        "resize_bilinear_u8 512->896": lambda k: k.resize_bilinear_u8(img, 896, 896),
        "hsv_tissue_candidates 2000x2000": lambda k: k.hsv_tissue_candidates(slide, 0.07, 0.05, 0.98),
        "cell_tissue_fraction 2000x2000/224": lambda k: k.cell_tissue_fraction(mask, 224.0, 9, 9),
        "lcs_length 400x400": lambda k: k.lcs_length(a, b),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    if not _kernels.HAS_NUMBA:
        logger.error("numba is not importable; nothing to compare")
        return 1
    backends = {"numpy": _kernels.numpy_backend, "numba": _kernels.numba_backend}
    print(f"{'kernel':38s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for name, fn in cases(np.random.default_rng(0)).items():
        outs = {k: fn(mod) for k, mod in backends.items()}
        if not np.array_equal(np.asarray(outs["numpy"]), np.asarray(outs["numba"])):
            # float accumulation order may differ in the last ulp
            if not np.allclose(outs["numpy"], outs["numba"], atol=1e-12):
                logger.error("%s: backends disagree", name)
                return 1
        best = {k: min(timeit.repeat(lambda m=mod: fn(m), number=1, repeat=args.repeat)) * 1e3
                for k, mod in backends.items()}
        print(f"{name:38s} {best['numpy']:10.2f} {best['numba']:10.2f} {best['numpy'] / best['numba']:7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
