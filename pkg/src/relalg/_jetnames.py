"""Jet coordinate names: ``u``, ``u_x``, ``u_xy`` (indices sorted by the
declared order of the independent variables)."""

from __future__ import annotations

from functools import lru_cache
from typing import Sequence


def jet_name(dep: str, multi: Sequence[int], indep: Sequence[str]) -> str:
    """``multi`` holds 0-based positions into ``indep``."""
    if not multi:
        return dep
    return dep + "_" + "".join(indep[i] for i in sorted(multi))


@lru_cache(maxsize=4096)
def _split(text: str, indep: tuple[str, ...]) -> tuple[int, ...] | None:
    if not text:
        return ()
    # longest names first keeps the split unambiguous for the usual cases
    for k, name in sorted(enumerate(indep), key=lambda p: -len(p[1])):
        if text.startswith(name):
            rest = _split(text[len(name) :], indep)
            if rest is not None:
                return (k,) + rest
    return None


def parse_jet_name(name: str, indep: Sequence[str]) -> tuple[str, tuple[int, ...]] | None:
    """Inverse of :func:`jet_name`; ``None`` when ``name`` is not a jet name."""
    indep = tuple(indep)
    if "_" in name:
        dep, _, tail = name.rpartition("_")
        if dep:
            multi = _split(tail, indep)
            if multi is not None and list(multi) == sorted(multi):
                return dep, multi
    return name, ()
