"""Compare the compiled forest kernel against the pure-Python twin.

Times fit and predict on a fixed workload sized like one bootstrap
replicate of the benchmark studies, and verifies that both backends
produce bit-identical forests. Run with:

    python benchmarks/forest_backend_benchmark.py
"""

import argparse
import time

import numpy as np

from surrhet.learners import ForestParams
from surrhet.learners.forest import HAVE_COMPILED_KERNEL, fit_forest


def _workload(n, q, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 3, (n, q))
    y = np.sin(2 * x[:, 0]) + x @ rng.uniform(0.1, 0.5, q) + rng.standard_normal(n)
    xt = rng.uniform(0, 3, (200, q))
    return x, y, xt


def _time(fn, repeats):
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=900)
    parser.add_argument("--features", type=int, default=7)
    parser.add_argument("--trees", type=int, default=500)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    if not HAVE_COMPILED_KERNEL:
        print("compiled kernel not built; nothing to compare")
        return

    x, y, xt = _workload(args.rows, args.features, seed=7)
    params = ForestParams(num_trees=args.trees)

    t_fit_c, model_c = _time(lambda: fit_forest(x, y, params, seed=42, backend="compiled"), args.repeats)
    t_fit_p, model_p = _time(lambda: fit_forest(x, y, params, seed=42, backend="python"), 1)
    t_pred_c, pred_c = _time(lambda: model_c.predict(xt, backend="compiled"), args.repeats)
    t_pred_p, pred_p = _time(lambda: model_p.predict(xt, backend="python"), args.repeats)

    identical = all(
        np.array_equal(getattr(model_c, f), getattr(model_p, f))
        for f in ("feature", "threshold", "children_left", "children_right", "value", "tree_offsets")
    ) and np.array_equal(pred_c, pred_p)

    print(f"workload: {args.rows} rows x {args.features} features, {args.trees} trees")
    print(f"fit:     compiled {t_fit_c * 1e3:8.1f} ms   python {t_fit_p * 1e3:8.1f} ms   "
          f"speedup {t_fit_p / t_fit_c:5.1f}x")
    print(f"predict: compiled {t_pred_c * 1e3:8.1f} ms   python {t_pred_p * 1e3:8.1f} ms   "
          f"speedup {t_pred_p / t_pred_c:5.1f}x")
    print(f"outputs bit-identical: {identical}")
    if not identical:
        raise SystemExit("backend mismatch: the twins have drifted apart")


if __name__ == "__main__":
    main()
