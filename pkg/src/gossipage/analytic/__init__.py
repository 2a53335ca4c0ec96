"""Exact recursions, closed forms and bounds."""
from .bounds import (BoundProfile, fc_profile, generalized_ring_profile, grid_profile, grid_upper_bound,
                     infinite_grid_edge_bound, min_incoming_edges, upper_bound_recursion)
from .closed_forms import (fc_bounds, fc_closed_form, fc_single_node_ages, harmonic, renewal_line_limit, ring_asymptote,
                           ring_closed_form, scheme_limits)
from .subset import SubsetAgeTable, UnreachableError, exact_subset_ages, subset_age_table

__all__ = [
    "BoundProfile", "fc_profile", "generalized_ring_profile", "grid_profile", "grid_upper_bound",
    "infinite_grid_edge_bound", "min_incoming_edges", "upper_bound_recursion", "fc_bounds", "fc_closed_form", "fc_single_node_ages",
    "harmonic", "renewal_line_limit", "ring_asymptote", "ring_closed_form", "scheme_limits", "SubsetAgeTable",
    "UnreachableError", "exact_subset_ages", "subset_age_table",
]
