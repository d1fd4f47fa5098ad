"""Closure residuals of the second-order obstruction on random 1-integrable algebroids.

Each sample also runs a negative control: the lift is doubled, which breaks
D~ o D = 0, and the residual should jump away from zero.
"""

import argparse
import dataclasses
import random
import sys
from dataclasses import dataclass
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from helpers import random_integrable  # noqa: E402
from relalg.prolong import curvature_closure_residual  # noqa: E402


@dataclass
class Config:
    samples: int = 20
    n: int = 3
    seed: int = 0
    points: int = 3


def run(cfg: Config):
    rng = random.Random(cfg.seed)
    for k in range(cfg.samples):
        a, step = random_integrable(rng, n=cfg.n)
        good = curvature_closure_residual(step, cfg.seed, cfg.points)
        doubled = dataclasses.replace(step.prolonged, dbase=a.dbase + tuple(2 * step.lift[y] for y in a.fiber))
        bad = curvature_closure_residual(dataclasses.replace(step, prolonged=doubled), cfg.seed, cfg.points)
        print(f"sample {k:2d}: base {a.base} fiber {a.fiber} new {len(step.new_vars)}  residual {good:.1e}  control {bad:.1e}")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    for f in dataclasses.fields(Config):
        p.add_argument(f"--{f.name}", type=int, default=f.default)
    run(Config(**vars(p.parse_args())))
