"""Relative algebroids: structure equations, tableaux, prolongation and jets."""

from .algebroid import RelativeAlgebroid, derive, dump_algebroid, load_algebroid
from .prolong import prolongation_tower, solve_prolongation
from .tableau import cartan_search, spencer_cohomology_dim, tableau_map

__all__ = [
    "RelativeAlgebroid",
    "derive",
    "dump_algebroid",
    "load_algebroid",
    "prolongation_tower",
    "solve_prolongation",
    "cartan_search",
    "spencer_cohomology_dim",
    "tableau_map",
]
