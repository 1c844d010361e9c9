"""Dynamic device-to-area grouping: sweeps over grouping period and room count.

Scores are averaged over ``--seeds`` seeds for the Pearson raw-signal technique
unless ``--techniques`` names others (name/feature_type, comma separated).
"""
import argparse

import numpy as np

from lumigroup import simulator as sim


def overall(techniques, seeds, **kw):
    out = {}
    for s in range(seeds):
        rep = sim.run(sim.ScenarioConfig(mode="dynamic", seed=s, techniques=techniques, **kw))
        for k, r in rep.rows.items():
            out.setdefault(k, []).append(r.overall)
    return {k: float(np.mean(v)) for k, v in out.items()}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--users", type=int, default=10, choices=(3, 5, 10))
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--techniques", default="pearson/light_signal")
    a = ap.parse_args()
    techs = tuple(tuple(t.split("/", 1)) for t in a.techniques.split(","))
    print("sweep,value,technique,overall")
    for p in (10, 20, 30):
        for k, v in overall(techs, a.seeds, users=a.users, rooms=5, grouping_period_s=p).items():
            print(f"grouping_period_s,{p},{'/'.join(k)},{v:.4f}", flush=True)
    for n in range(1, 11):
        for k, v in overall(techs, a.seeds, users=a.users, rooms=n).items():
            print(f"rooms,{n},{'/'.join(k)},{v:.4f}", flush=True)


if __name__ == "__main__":
    main()
