"""Static device-to-device grouping: all techniques, users 2..10, 10 rounds each.

Prints the pooled overall result per technique and per pattern length.
"""
import argparse

from lumigroup import simulator as sim
from lumigroup.lightsig import ALLOWED_LENGTHS


def pooled(techniques, lengths, seed, rounds):
    reps = [sim.run(sim.ScenarioConfig(users=u, rounds=rounds, seed=seed, pattern_lengths=lengths,
                                       techniques=techniques)) for u in range(2, 11)]
    return {k: sim.pooled_report([r[k] for r in reps]) for k in reps[0].rows}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--rounds", type=int, default=10)
    ap.add_argument("--similarity-only", action="store_true", help="skip the ML and localization techniques")
    a = ap.parse_args()
    techs = sim.SIMILARITY_TECHNIQUES if a.similarity_only else sim.ALL_TECHNIQUES
    print("technique,feature_type,overall,accuracy,precision,recall,f1")
    for (name, ftype), r in sorted(pooled(techs, ALLOWED_LENGTHS, a.seed, a.rounds).items()):
        print(f"{name},{ftype},{r.overall:.4f},{r.accuracy:.4f},{r.precision:.4f},{r.recall:.4f},{r.f1:.4f}")
    print("\npattern_length,overall (pearson/light_signal)")
    for n in ALLOWED_LENGTHS:
        r = pooled((("pearson", "light_signal"),), (n,), a.seed, a.rounds)[("pearson", "light_signal")]
        print(f"{n},{r.overall:.4f}")


if __name__ == "__main__":
    main()
