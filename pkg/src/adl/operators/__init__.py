# majorant・最大関数・スケール写像と作用素 P, S, T
from .experiment import ExperimentReport, RatioSummary, TrialResult, equivalence_experiment, image_sequence, summarize
from .majorant import (
    DominationReport,
    MajorantParams,
    indicator_sum,
    majorant,
    majorant_dominates,
    majorant_many,
    sample_points,
    unit_cube_sup,
)
from .maximal import (
    BallSampler,
    FeffermanSteinReport,
    MaximalBoundReport,
    fefferman_stein_check,
    maximal,
    maximal_bound_check,
    maximal_many,
)
from .scale_maps import (
    BracketReport,
    Mode,
    ScaleMap,
    ScaleMaps,
    build_scale_maps,
    lift_S,
    permute,
    pointwise_bracket,
    project_T,
    unpermute,
)

# 「このパッケージを import したときに表に出す名前」
__all__ = [
    "BallSampler",
    "BracketReport",
    "DominationReport",
    "ExperimentReport",
    "FeffermanSteinReport",
    "MajorantParams",
    "MaximalBoundReport",
    "Mode",
    "RatioSummary",
    "ScaleMap",
    "ScaleMaps",
    "TrialResult",
    "build_scale_maps",
    "equivalence_experiment",
    "fefferman_stein_check",
    "image_sequence",
    "indicator_sum",
    "lift_S",
    "majorant",
    "majorant_dominates",
    "majorant_many",
    "maximal",
    "maximal_bound_check",
    "maximal_many",
    "permute",
    "pointwise_bracket",
    "project_T",
    "sample_points",
    "summarize",
    "unit_cube_sup",
    "unpermute",
]
