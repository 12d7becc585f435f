"""Compare the numba and pure-numpy tree kernels on a synthetic training set.

    python3 benchmarks/bench_kernels.py [--template university1] [--repeat 3]

Both backends run the same grower, so each model pair must also be
identical; the script checks that and prints best-of-N training times.
"""

import argparse
import time

import numpy as np

from abacpip import datagen
from abacpip.core import Sampled
from abacpip.encoding import EncoderConfig, build_dataset, class_table, fit_encoder
from abacpip.inference import training_table
from abacpip.learners import LearnerKind, LearnerSpec, get_backend, predict_many, train


def dataset(name, seed, ratio):
    tpl = datagen.get_template(name, seed=seed)
    policy, log_ = datagen.synthesize(tpl)
    enc = fit_encoder(log_.catalog, EncoderConfig.from_strategy("arfe+avc", tpl.clusters))
    codes, outcomes = training_table(policy, Sampled(ratio, seed=seed))
    classes = class_table(outcomes)
    index = {o: k for k, o in enumerate(classes)}
    labels = np.array([index[o] for o in outcomes], dtype=np.int64)
    return build_dataset(enc, codes, labels, classes)


def best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--template", default="university1")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--neg-ratio", type=float, default=2.0)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--n-trees", type=int, default=20)
    args = ap.parse_args()

    data = dataset(args.template, args.seed, args.neg_ratio)
    print(f"{args.template}: {len(data)} rows x {data.X.shape[1]} features")
    nb, py = get_backend("numba"), get_backend("numpy")
    # warm-up compiles (or loads cached) numba code outside the timed region
    train(LearnerSpec(LearnerKind.DECISION_TREE), data, backend=nb)

    print(f"{'learner':8} {'numba s':>9} {'numpy s':>9} {'speedup':>8}  same")
    for kind in LearnerKind:
        spec = LearnerSpec(kind, n_trees=args.n_trees, n_stages=args.n_trees, seed=args.seed)
        t_nb, m_nb = best_of(lambda: train(spec, data, backend=nb), args.repeat)
        t_py, m_py = best_of(lambda: train(spec, data, backend=py), 1)
        same = m_nb.same_as(m_py) and np.array_equal(
            predict_many(m_nb, data.X, nb)[1], predict_many(m_py, data.X, py)[1])
        print(f"{kind.label:8} {t_nb:9.3f} {t_py:9.3f} {t_py / t_nb:8.1f}x  {same}")


if __name__ == "__main__":
    main()
