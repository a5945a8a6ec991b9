from ..model import ChoiceNode
from .consolidate import connection_strengths, consolidate, pairwise_f1
from .fbs import AttrSpec, fbs_compare, fbs_similarity, levenshtein, string_similarity
from .graph import BaseSimilarityMatrix, RelGraph, base_matrix
from .kernels import exp_kernel, path_sum_similarity, spectral_radius, von_neumann_kernel
from .resolve import (ChoiceResult, ResolutionResult, ResolveOptions, resolve_fbs,
                      resolve_references)
from .walk import random_walk_cs, walk_strengths

__all__ = [
    "AttrSpec", "BaseSimilarityMatrix", "ChoiceNode", "ChoiceResult", "RelGraph",
    "ResolutionResult", "ResolveOptions", "base_matrix", "connection_strengths",
    "consolidate", "exp_kernel", "fbs_compare", "fbs_similarity", "levenshtein",
    "pairwise_f1", "path_sum_similarity", "random_walk_cs", "resolve_fbs", "resolve_references",
    "spectral_radius", "string_similarity", "von_neumann_kernel", "walk_strengths",
]
