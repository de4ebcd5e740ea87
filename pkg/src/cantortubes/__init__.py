"""Random Cantor sets E(M_n, N_n): construction, natural measure, flat and tube geometry, and concentration experiments."""
from __future__ import annotations

from .construction import (
    COLUMN_LR,
    CUSTOM,
    DIAGONAL_LD,
    LEFT_COLUMN,
    UNIFORM_SUBSET,
    ConstructionParams,
    CubeAddress,
    InvalidParameters,
    Realization,
    SelectionRule,
    build_realization,
    dimension_value,
    register_rule,
    validate_params,
)
from .geometry import (
    Flat,
    InvalidFlat,
    Strip,
    boundary_measure,
    flat_cube_measure,
    gamma_membership,
    plane_angle,
    projection_metric,
    realization_flat_measure,
    strip_cube_count,
)
from .measure import NaturalMeasure, ahlfors_ratio_scan, measure_of_ball, measure_of_cube, projection_measure
from .net import Net, NetParams, build_net
from .reports import ExperimentReport
from .statistics import (
    ConcentrationParams,
    InadmissibleParameters,
    box_dimension_estimate,
    conditional_mgf_check,
    good_event_frequency,
    martingale_check,
    tail_probability_check,
    tube_sup_scan,
    y_statistic,
)

__version__ = "0.1.0"
