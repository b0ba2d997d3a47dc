"""Information-gain oracle. Each case lists candidate subgraphs by entity
count and segment-support counts; the script enumerates the support
distribution directly and writes the expected per-subgraph and total IG."""

import json
import math
import os
import random


def entropy(counts):
    total = sum(counts)
    if total == 0:
        return 0.0
    # Expand the distribution explicitly: one outcome per supporting use.
    outcomes = []
    for k, c in enumerate(counts):
        outcomes += [k] * c
    h = 0.0
    for k in set(outcomes):
        p = outcomes.count(k) / len(outcomes)
        h -= p * math.log(p)
    return h


def size_penalty(n, total):
    frac = n / total
    return frac * math.log(total / n)


def case(name, total, lam, cands, sign=1):
    entries = []
    for size, support in cands:
        h = entropy(support)
        pen = size_penalty(size, total)
        entries.append({"size": size, "support": support, "conditional_entropy": h, "size_penalty": pen,
                        "ig": sign * h - lam * pen})
    return {"name": name, "total_entities": total, "lambda": lam, "entropy_sign": sign, "candidates": entries,
            "total": math.fsum(e["ig"] for e in entries)}


def main():
    rng = random.Random(31)
    cases = [
        case("two halves of eight", 8, 1.0, [(4, [2, 1]), (4, [1, 1, 1])]),
        case("three uneven", 12, 0.5, [(2, [3]), (5, [1, 2, 3]), (5, [4, 4])]),
        case("negated entropy", 10, 2.0, [(3, [1, 1]), (7, [5, 2, 1])], sign=-1),
    ]
    for k in range(2):
        n = rng.randint(4, 6)
        total = rng.randint(20, 60)
        cands = [(rng.randint(2, 6), [rng.randint(1, 5) for _ in range(rng.randint(1, 4))]) for _ in range(n)]
        cases.append(case(f"random {k}", total, round(rng.uniform(0.1, 2.0), 3), cands))
    out = os.path.join(os.path.dirname(__file__), "..", "fixtures", "ig_cases.json")
    with open(out, "w") as f:
        json.dump(cases, f, indent=1)
        f.write("\n")
    print(f"{len(cases)} IG cases")


if __name__ == "__main__":
    main()
