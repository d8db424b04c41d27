"""Time the formal linearizer over a grid of seeded instances.

Each instance is a Type 1 normal form pushed forward by a random
near-identity map.  The script prints one row per run and, with --json,
writes the rows together with the per-step term counts.

    python3 scripts/linearization_sweep.py --degree 8 --seeds 3
"""

import argparse
import json
import time
from dataclasses import asdict, dataclass, field

from nambu import generators as gen
from nambu.linearizer import linearize
from nambu.tensorcalc import pushforward


@dataclass
class SweepConfig:
    degree: int = 8
    seeds: int = 2
    perturb_degree: int = 3
    density: float = 0.2
    schedules: tuple = ("doubling", "stepwise")
    grid: tuple = (
        (2, 4, (1, 1, 1)),
        (2, 4, (1, 1, -1)),
        (2, 5, (1, 1, -1)),
        (3, 5, (1, 1, 1, 1)),
        (3, 5, (1, 1, 1, -1)),
        (3, 6, (1, 1, 1, -1)),
    )


@dataclass
class Row:
    q: int
    n: int
    signs: tuple
    schedule: str
    seed: int
    input_terms: int
    seconds: float
    linear: bool
    steps: list = field(default_factory=list)


def run(cfg: SweepConfig) -> list[Row]:
    rows = []
    for q, n, signs in cfg.grid:
        for seed in range(cfg.seeds):
            P, _ = gen.perturbed_type1(q, n, signs, cfg.degree, seed, cfg.perturb_degree, cfg.density)
            for schedule in cfg.schedules:
                t0 = time.perf_counter()
                Phi, trace = linearize(P, cfg.degree, schedule)
                dt = time.perf_counter() - t0
                linear = pushforward(Phi, P).graded(2, cfg.degree).is_zero()
                steps = [(list(s.window), s.terms_before, s.terms_after) for s in trace.steps]
                rows.append(Row(q, n, signs, schedule, seed, P.nterms(), dt, linear, steps))
                print(f"q={q} n={n} signs={signs} {schedule:9s} seed={seed} terms={P.nterms():5d} "
                      f"steps={len(steps)} linear={linear} {dt:7.2f}s", flush=True)
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--degree", type=int, default=8)
    ap.add_argument("--seeds", type=int, default=2)
    ap.add_argument("--density", type=float, default=0.2)
    ap.add_argument("--json", help="write rows to this path")
    args = ap.parse_args()
    cfg = SweepConfig(degree=args.degree, seeds=args.seeds, density=args.density)
    rows = run(cfg)
    worst = max(r.seconds for r in rows)
    print(f"{len(rows)} runs, all linear: {all(r.linear for r in rows)}, slowest {worst:.2f}s")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"config": asdict(cfg), "rows": [asdict(r) for r in rows]}, fh, indent=2)


if __name__ == "__main__":
    main()
