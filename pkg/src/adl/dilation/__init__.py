# 拡大行列・準ノルム・拡大立方体
from .expansive import (
    CocycleProbe,
    DecayProfile,
    Dilation,
    EquivalenceReport,
    ProbeVerdict,
    Verdict,
    classify_equivalence,
    cocycle_probe,
    epsilon,
    floor_scale,
    inverse_power_decay,
    is_expansive,
    operator_norm,
    rigidity_oracle,
    validate_dilation,
)
from .quasinorm import (
    EnvelopeReport,
    LyapunovForm,
    StepQuasiNorm,
    ball_membership,
    ball_volume,
    envelope_check,
    quasi_triangle_estimate,
    rho,
    rho_index,
    rho_many,
    solve_lyapunov,
)
from .tiling import (
    Box,
    DilatedCube,
    cube_containing,
    cube_corner,
    cube_volume,
    cubes_in_box,
    scale_of_ball,
    scale_of_cube,
)

# 「このパッケージを import したときに表に出す名前」
__all__ = [
    "Box",
    "CocycleProbe",
    "DecayProfile",
    "DilatedCube",
    "Dilation",
    "EnvelopeReport",
    "EquivalenceReport",
    "LyapunovForm",
    "ProbeVerdict",
    "StepQuasiNorm",
    "Verdict",
    "ball_membership",
    "ball_volume",
    "classify_equivalence",
    "cocycle_probe",
    "cube_containing",
    "cube_corner",
    "cube_volume",
    "cubes_in_box",
    "envelope_check",
    "epsilon",
    "floor_scale",
    "inverse_power_decay",
    "is_expansive",
    "operator_norm",
    "quasi_triangle_estimate",
    "rho",
    "rho_index",
    "rho_many",
    "rigidity_oracle",
    "scale_of_ball",
    "scale_of_cube",
    "solve_lyapunov",
    "validate_dilation",
]
