"""Saddle connection counting and Siegel-Veech averages on translation surfaces."""

from .counting import (CircleAverage, Decomposition, LocusTag, RegionParams, At_hA_point,
                       circle_average_sv, count_N, count_pairs_NA, count_pairs_Nstar,
                       decomposition_terms, eval_hA, in_DA, locus_membership,
                       near_degenerate_pair, sv_transform_pairs, virtual_area)
from .delaunay import delaunayize, flip, incircle, systole
from .enumeration import (HolonomyMultiset, SaddleConnection, enumerate_connections,
                          enumerate_origami, trace_separatrix)
from .sl2 import Mat2, act_on_holonomies, act_on_surface, make_matrix
from .surface import (TranslationSurface, catalog, load_surface, save_surface, stratum,
                      validate)

__version__ = "0.1.0"
