"""Exact multiresolution grids, orthonormal step systems, and the
truncated-integral machinery for recovering additive interval functions.

Everything geometric is rational arithmetic end to end: cells are
half-open products of branching intervals, measures and integrals are
fractions, and the packaged separating example is checked with zero
tolerance.
"""

from .errors import ConfigMismatch, DepthExhausted, ValueGuardError, WindowError
from .grid import (
    BranchSeq,
    Cell,
    GridConfig,
    PointCode,
    cell_from_json_dict,
    cell_of_point,
    decompose_box,
    full_cube,
    point_code,
    refine_cell,
    validate_partition,
)
from .stepfn import StepFunction, common_refinement, pointwise_max, zip_with
from .systems import (
    UnitValue,
    block_range,
    classical_from_flat,
    classical_haar_eval,
    classical_to_flat,
    gen_haar_eval,
    haar_decode,
    haar_encode,
    inner_product,
    price_digits,
    price_encode,
    price_eval,
    price_haar_matrix,
    tensor_haar_step,
    tensor_price_step,
)
from .series import (
    AdditiveFn,
    CoeffMap,
    coeffs_from_json_dict,
    coeffs_to_json_dict,
    haar_coeffs_from_price,
    partial_sum,
    price_coeffs_from_haar,
    series_majorant,
    stabilized_sum,
)
from .integration import (
    DEFAULT_ALPHAS,
    AhIntegralReport,
    FamilyCheckReport,
    HFamily,
    UpgradeResult,
    ah_integral,
    check_family,
    family_from_json_dict,
    family_to_json_dict,
    level_measure,
    tail_integral,
    tail_with_ties,
    truncate,
    upgrade_family,
)
from .recovery import (
    AdditiveRecoveryReport,
    CoeffRecoveryReport,
    LambdaConditionReport,
    TailConditionReport,
    gamma_path_reference,
    lambda_condition_check,
    recover_additive,
    recover_haar_coeff,
    recover_price_coeff,
    tail_condition_check,
)
from .counterexample import (
    EndToEndReport,
    ExampleSpec,
    end_to_end,
    example_family,
    example_series,
    failure_window,
    staircase_member,
    tail_bound,
    term_support,
    verify_ah_success,
    verify_lambda_failure,
)
from .parallel import parallel_map, resolve_threads, tree_sum
from .reports import SCHEMA_VERSION, canonical_json

__version__ = "0.1.0"

__all__ = [
    "AdditiveFn",
    "AdditiveRecoveryReport",
    "AhIntegralReport",
    "BranchSeq",
    "Cell",
    "CoeffMap",
    "CoeffRecoveryReport",
    "ConfigMismatch",
    "DEFAULT_ALPHAS",
    "DepthExhausted",
    "EndToEndReport",
    "ExampleSpec",
    "FamilyCheckReport",
    "GridConfig",
    "HFamily",
    "LambdaConditionReport",
    "PointCode",
    "SCHEMA_VERSION",
    "StepFunction",
    "TailConditionReport",
    "UnitValue",
    "UpgradeResult",
    "ValueGuardError",
    "WindowError",
    "ah_integral",
    "block_range",
    "canonical_json",
    "cell_from_json_dict",
    "cell_of_point",
    "check_family",
    "classical_from_flat",
    "classical_haar_eval",
    "classical_to_flat",
    "coeffs_from_json_dict",
    "coeffs_to_json_dict",
    "common_refinement",
    "decompose_box",
    "end_to_end",
    "example_family",
    "example_series",
    "failure_window",
    "family_from_json_dict",
    "family_to_json_dict",
    "full_cube",
    "gamma_path_reference",
    "gen_haar_eval",
    "haar_coeffs_from_price",
    "haar_decode",
    "haar_encode",
    "inner_product",
    "lambda_condition_check",
    "level_measure",
    "parallel_map",
    "partial_sum",
    "point_code",
    "pointwise_max",
    "price_coeffs_from_haar",
    "price_digits",
    "price_encode",
    "price_eval",
    "price_haar_matrix",
    "recover_additive",
    "recover_haar_coeff",
    "recover_price_coeff",
    "refine_cell",
    "resolve_threads",
    "series_majorant",
    "stabilized_sum",
    "staircase_member",
    "tail_bound",
    "tail_condition_check",
    "tail_integral",
    "tail_with_ties",
    "tensor_haar_step",
    "tensor_price_step",
    "term_support",
    "tree_sum",
    "truncate",
    "upgrade_family",
    "validate_partition",
    "verify_ah_success",
    "verify_lambda_failure",
    "zip_with",
]
