# ḟ^α_{p,q}(A) 系列空間
from .coincidence import Coincidence, CoincidenceReport, sequence_space_coincidence
from .quadrature import QuadratureSpec, integration_tiles, quadrature_norm
from .sequences import (
    CoefficientField,
    EstimateMethod,
    NormEstimate,
    SparseSequence,
    TLParams,
    dump_sequence,
    integrand,
    load_sequence,
    parse_exponent,
    random_sequence,
)
from .tl_norm import seqnorm, seqnorm_exact_pq, single_entry_norm

# 「このパッケージを import したときに表に出す名前」
__all__ = [
    "CoefficientField",
    "Coincidence",
    "CoincidenceReport",
    "EstimateMethod",
    "NormEstimate",
    "QuadratureSpec",
    "SparseSequence",
    "TLParams",
    "dump_sequence",
    "integrand",
    "integration_tiles",
    "load_sequence",
    "parse_exponent",
    "quadrature_norm",
    "random_sequence",
    "seqnorm",
    "seqnorm_exact_pq",
    "sequence_space_coincidence",
    "single_entry_norm",
]
