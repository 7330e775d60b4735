"""Constrained last-mile routing: ATSP local search with zone-order constraints.

The solver splits every stop into a (dummy, original) pair so that a
symmetric-tour engine can search an asymmetric instance, restricts itself to
segment-preserving 3-opt and 4-opt moves over alpha-nearness candidates, and
keeps a move only when it shortens the tour without raising the constraint
penalty.  The extraction package learns those constraints from historical
routes.
"""

from .constraints import Constraint, ConstraintSet, Kind
from .harness import BatchJob, MergePolicy, best_of_two, brute_force_optimum, run_batch
from .instance import RoutingInstance, Stop, TravelTimeTransform, apply_bigm, atsp_to_tsp
from .penalty import evaluate_pen, penalty_breakdown
from .search import SearchConfig, SolveResult, solve
from .tour import Tour
from .tsplib import parse_instance, read_instance, write_instance

__version__ = "0.1.0"

__all__ = [
    "BatchJob",
    "Constraint",
    "ConstraintSet",
    "Kind",
    "MergePolicy",
    "RoutingInstance",
    "SearchConfig",
    "SolveResult",
    "Stop",
    "Tour",
    "TravelTimeTransform",
    "apply_bigm",
    "atsp_to_tsp",
    "best_of_two",
    "brute_force_optimum",
    "evaluate_pen",
    "parse_instance",
    "penalty_breakdown",
    "read_instance",
    "run_batch",
    "solve",
    "write_instance",
]
