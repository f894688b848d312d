"""Tail asymptotics of Levy processes with compound-Poisson jumps."""

from .convolution import ConvolutionTable, barrier_tail, barrier_tails, convolution_table, sk_tail
from .exact_engine import (
    InsufficientDepth,
    LevyModel,
    SeriesTruncation,
    TailValue,
    a_k_seq,
    compound_tail,
    d_u,
    exp_moments_normal,
    g_u,
    ik_value,
    jk_value,
    m_index,
    model_tail,
    normal_tail,
    q_u,
)
from .jump_laws import (
    DiscreteLaw,
    JumpLaw,
    LawKind,
    classify_tail,
    check_cond_h,
    check_lattice_cond,
    discrete_law,
    discretize,
    exponential_law,
    factorial_law,
    from_levy_measure,
    half_normal_law,
    hazard_law,
    lattice_factorial_law,
    plus_minus_law,
    point_law,
    uniform_law,
)
from .path_sim import count_events, estimate_events, ratio_curve, sample_path, simulate_batch, sym_identity_residual
