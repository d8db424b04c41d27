"""Classify randomly conjugated linear normal forms and report what comes back.

For every sign pattern of the nondegenerate Type 1 forms (and a few Type 2
matrices) the script hides the normal form behind a random integer change
of coordinates, classifies it, and confirms that the returned map recovers
the normal form exactly.

    python3 scripts/classification_demo.py --max-n 5
"""

import argparse
import random

from nambu import generators as gen
from nambu.nambu_core import classify_linear, singular_locus_check
from nambu.tensorcalc import pushforward


def describe(nf) -> str:
    if nf.variant == "type2":
        return f"type2 q={nf.q} n={nf.n} nondegenerate={nf.nondegenerate}"
    kind = "elliptic" if nf.elliptic else "hyperbolic" if nf.hyperbolic else "degenerate"
    return f"type1 q={nf.q} n={nf.n} r={nf.r} s={nf.s} signature={nf.signature} {kind}"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--max-n", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    ok = 0
    total = 0
    for q in range(2, args.max_n):
        for n in range(q + 1, args.max_n + 1):
            for signs in gen.sign_patterns(q):
                P, _ = gen.conjugated_type1(q, n, signs, (), 1, rng)
                nf, A = classify_linear(P)
                good = pushforward(A, P) == nf.tensor(1)
                locus_ok, basis = singular_locus_check(P)
                total += 1
                ok += good and locus_ok
                print(f"signs={signs!s:22s} -> {describe(nf)}; zero set dim {len(basis)}; recovered={good}")
            b = gen.random_type2_b(q, n, rng)
            P, _ = gen.conjugated_type2(q, n, b, 1, rng)
            nf, A = classify_linear(P)
            good = pushforward(A, P) == nf.tensor(1)
            total += 1
            ok += good
            print(f"b={b} -> {describe(nf)}; recovered={good}")
    print(f"{ok}/{total} recovered exactly")


if __name__ == "__main__":
    main()
