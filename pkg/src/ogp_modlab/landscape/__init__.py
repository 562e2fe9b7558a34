from .circulation import (
    Circulation,
    CycleDecomposition,
    balanced_max_descent,
    cycle_decompose,
    off_diagonal_mass,
    random_circulation,
    transfer_move,
)
from .polytope import (
    GridMax,
    SignaturePolytopeSpec,
    alignment_ok,
    closed_form_value,
    far_bound,
    g_frobenius,
    g_of_signature,
    g_pairwise,
    grid_balanced_curve,
    grid_max_g,
    h_curve,
    h_minimiser,
    max_g_closed_form,
    near_optimal_radius,
    optimizer_signature,
)
