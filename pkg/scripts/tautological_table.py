"""Prolongation ranks and characters of Hom(wedge^k W, V) against the closed forms."""

import argparse
from dataclasses import dataclass
from math import comb

from relalg.tableau import cartan_characters, prolongation_rank, tautological_tableau


@dataclass
class Config:
    max_n: int = 4
    max_m: int = 3
    seed: int = 0


def run(cfg: Config) -> int:
    bad = 0
    print(f"{'n':>2} {'m':>2} {'k':>2} {'rank':>5} {'closed':>6}  characters")
    for n in range(1, cfg.max_n + 1):
        for m in range(1, cfg.max_m + 1):
            for k in (1, 2):
                t = tautological_tableau(n, m, k)
                rank = prolongation_rank(t, cfg.seed)
                closed = m * k * comb(n + 1, k + 1)
                s = cartan_characters(t, seed=cfg.seed).s
                expected = tuple(m * comb(i - 1, k - 1) for i in range(1, n + 1))
                flag = "" if (rank, s) == (closed, expected) else "  MISMATCH"
                bad += bool(flag)
                print(f"{n:>2} {m:>2} {k:>2} {rank:>5} {closed:>6}  {s}{flag}")
    return bad


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--max-n", type=int, default=Config.max_n)
    p.add_argument("--max-m", type=int, default=Config.max_m)
    p.add_argument("--seed", type=int, default=Config.seed)
    raise SystemExit(1 if run(Config(**vars(p.parse_args()))) else 0)
