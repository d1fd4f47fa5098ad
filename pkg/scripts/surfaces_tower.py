"""Prolong the surfaces fixture and print each level's lift and certificates."""

import argparse
import time
from dataclasses import dataclass
from importlib.resources import files

from relalg import load_algebroid, prolongation_tower
from relalg.exterior import form_text


@dataclass
class Config:
    depth: int = 4
    seed: int = 0
    prefix: str = "c"


def run(cfg: Config):
    a = load_algebroid((files("relalg") / "fixtures" / "surfaces.alg").read_text())
    start = time.perf_counter()
    report = prolongation_tower(a, cfg.depth, cfg.seed, cfg.prefix)
    elapsed = time.perf_counter() - start
    for lv in report.levels:
        print(f"level {lv.level}: new {lv.step.new_vars}, characters {tuple(lv.characters['s'])}, {lv.certificates}")
        for y, f in lv.step.lift.items():
            print(f"  D {y} = {form_text(f, a.frame)}")
    print(f"certificates: {report.certificates}")
    print(f"{elapsed:.2f} s")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--depth", type=int, default=Config.depth)
    p.add_argument("--seed", type=int, default=Config.seed)
    run(Config(**vars(p.parse_args())))
