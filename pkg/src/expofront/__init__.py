"""Utility/fairness Pareto fronts for repeated rankings under position-based exposure.

The attainable expected exposures of a query form the expohedron, the
permutahedron of the position weights.  This package walks the exact
utility/unfairness front across its faces, approximates it cheaply with
geodesics of the circumscribed sphere, and turns front points back into
distributions over rankings.
"""
from .controller import CtrlResult, CtrlState, ctrl_simulate
from .convex import (BirkhoffQP, BirkhoffResult, min_unfairness_at_utility, scalarized_birkhoff_qp,
                     start_point, utility_range)
from .core import (Permutation, QueryInstance, RankingDistribution, build_target_exposure,
                   dcg_exposure, group_exposure, unfairness_of, utility_of)
from .decomposition import (bvn_decompose, caratheodory_decompose, empirical_exposure,
                            expected_exposure, sample_deliveries)
from .errors import *  # noqa: F401,F403
from .expohedron import (FaceDescriptor, Membership, SphereFrame, face_of, is_feasible,
                         majorization_check, max_utility_vertex, project_sphere_to_boundary,
                         project_to_sphere, ray_boundary_intersection, sphere_frame)
from .pareto import (FrontGap, GeodesicArc, ParetoFront, ParetoPoint, birkhoff_qp_front,
                     front_gap, hypervolume, optimal_direction_on_face, pexpo_front,
                     qp_sweep_front, sphere_expo_front, utility_at_unfairness)

__version__ = "0.1.0"
