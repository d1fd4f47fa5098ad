"""Recompute the independent oracles and freeze them under tests/data/."""

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

from oracles import frozen_values  # noqa: E402


def main():
    out = ROOT / "tests" / "data" / "oracle_values.json"
    out.write_text(json.dumps(frozen_values(), indent=2, sort_keys=True) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
