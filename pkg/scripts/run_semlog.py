"""Semantic device-log analysis on generated year-long logs.

Cold start per class for a few (classifier, feature) pairs, clustering
accuracy for single classes against mixtures, and the cross-testbed matrix.
"""
import argparse

import numpy as np

from lumigroup import semlog as sl
from lumigroup.mlkit import Kind

PAIRS = ((Kind.NAIVE_BAYES, "contact_frequency_per_week-sum"), (Kind.NAIVE_BAYES, "combined"),
         (Kind.RANDOM_FOREST, "grouping_time_per_week-mean"), (Kind.GRADIENT_BOOSTING, "combined"))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--testbed", default="dense", choices=sorted(sl.TESTBEDS))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--stride", type=int, default=7)
    ap.add_argument("--all-features", action="store_true", help="scan all 43 feature sets for clustering (slow)")
    a = ap.parse_args()

    log = sl.generate_log(a.testbed, 365, rng=a.seed)
    series = sl._Series(log)
    print("classifier,feature,class,cold_start_day,f1,auc")
    for kind, feat in PAIRS:
        res = sl.classify_and_coldstart(log, kind, feat, stride=a.stride, series=series, seed=a.seed)
        for c, cs in res.per_class.items():
            print(f"{kind.value},{feat},{c},{cs.cold_start},{cs.report.f1:.3f},{cs.report.auc:.3f}", flush=True)

    feats = sl.FEATURE_SET_NAMES if a.all_features else (
        "contact_frequency_per_week-sum", "grouping_time_per_event-sum", "grouping_time_per_day-sum")
    days = tuple(range(14, 183, 28))
    for mixtures in (False, True):
        lg = sl.generate_log(a.testbed, 182, rng=a.seed, mixtures=mixtures)
        top = sl.clustering_study(lg, days, feats, top=3, rng=a.seed)
        label = "mixtures" if mixtures else "single"
        print(f"\nclustering {label}: mean top-3 accuracy {np.mean([c.mean() for c in top.values()]):.2f}")
        for f, c in top.items():
            print(f"  {f}: " + " ".join(f"{x:.2f}" for x in c))

    logs = {n: sl.generate_log(n, 91, rng=a.seed) for n in sl.TESTBEDS}
    m = sl.cross_testbed_matrix(logs, kinds=[Kind.NAIVE_BAYES, Kind.RANDOM_FOREST],
                                features=["contact_frequency_per_week-sum", "combined"], seed=a.seed)
    print("\ntrain,test,classifier,feature,score")
    for (tr, te), r in m.items():
        print(f"{tr},{te},{r.kind.value},{r.feature},{r.score:.3f}")


if __name__ == "__main__":
    main()
