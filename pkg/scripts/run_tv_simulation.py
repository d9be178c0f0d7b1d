"""Time-varying hazard study: stacked logistic with a time interaction vs Cox.

Runs the default simulation over a range of seeds, with and without left
truncation of half the training subjects, and writes one CSV row per
(seed, truncation, model, metric).

    python scripts/run_tv_simulation.py --seeds 5 --out tv_results.csv
"""
import argparse
import csv
import time
import warnings

import numpy as np

from survstack.cox import fit_cox
from survstack.glm import fit_glm
from survstack.metrics import evaluate, resolve_horizon
from survstack.predict import survival_curves
from survstack.sim import TvHazardConfig, simulate_tv
from survstack.stacking import TimeEncoding, stack


def run_one(seed, truncate, degree):
    train, test = simulate_tv(TvHazardConfig(seed=seed, truncate_fraction=truncate))
    enc = (TimeEncoding("continuous", interactions=("x1",)) if degree == 1
           else TimeEncoding("polynomial", degree, interactions=("x1",)))
    models = {"stacked": fit_glm(stack(train, enc)), "cox": fit_cox(train)}
    h = resolve_horizon(test, "q0.75")
    rows = []
    for name, model in models.items():
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            reps = evaluate(survival_curves(model, test.covariates), test, h)
        rows += [(seed, truncate, name, r.metric, h, r.value) for r in reps]
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--degree", type=int, default=1, help="time polynomial degree for the stacked model")
    ap.add_argument("--out", default="tv_results.csv")
    args = ap.parse_args()

    t0 = time.perf_counter()
    rows = []
    for seed in range(args.seeds):
        for truncate in (0.0, 0.5):
            rows += run_one(seed, truncate, args.degree)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "truncate_fraction", "model", "metric", "horizon", "value"])
        w.writerows(rows)

    auc = {(s, tr, m): v for s, tr, m, met, _, v in rows if met == "auc_t"}
    wins = sum(auc[(s, 0.0, "stacked")] > auc[(s, 0.0, "cox")] for s in range(args.seeds))
    gap = max(abs(auc[(s, 0.5, "stacked")] - auc[(s, 0.0, "stacked")]) for s in range(args.seeds))
    for model in ("stacked", "cox"):
        vals = [auc[(s, 0.0, model)] for s in range(args.seeds)]
        print(f"{model:8s} AUC(q0.75): mean {np.mean(vals):.4f}  min {np.min(vals):.4f}  max {np.max(vals):.4f}")
    print(f"stacked beats cox on {wins}/{args.seeds} seeds; max truncation AUC shift {gap:.4f}")
    print(f"wrote {len(rows)} rows to {args.out} in {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
