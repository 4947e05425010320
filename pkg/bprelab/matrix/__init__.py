"""Positive matrices, the simplex, projective actions and normalized products."""

from bprelab.matrix.core import (
    NormalizedProduct,
    PosMatrix,
    SimplexPoint,
    act_left,
    act_right,
    column_spread,
    cond_bound,
    contraction_coeff,
    extend_product,
    hennion_distance,
    in_class_B,
    l1_norm,
    min_col_sum,
    product_chain,
    random_class_b_matrix,
    random_simplex_point,
    rank_one_direction,
    rho,
)
