# src/adl/sequence/tl_norm.py
from __future__ import annotations

import math
from typing import Optional

from adl.dilation.expansive import Dilation
from adl.errors import PreconditionViolation
from adl.sequence.quadrature import QuadratureSpec, quadrature_norm
from adl.sequence.sequences import EstimateMethod, NormEstimate, SparseSequence, TLParams
from adl.utils.logging_utils import get_logger

logger = get_logger(__name__)


def seqnorm_exact_pq(a: Dilation, params: TLParams, c: SparseSequence) -> NormEstimate:
    """
    p = q の閉形式。同一スケールの立方体は互いに素なので
        ‖c‖^p = Σ_{j,k} |det A|^{-jp(α+1/2)} |c_{j,k}|^p |det A|^{j}
    p = q = ∞ は sup_{j,k} |det A|^{-j(α+1/2)} |c_{j,k}|。
    """
    if params.p != params.q:
        msg = f"seqnorm_exact_pq: needs p = q, got p={params.p}, q={params.q}"
        logger.error(msg)
        raise PreconditionViolation(msg)
    if c.is_empty:
        return NormEstimate(value=0.0, abs_error=0.0, method=EstimateMethod.CLOSED_FORM)

    if params.p_is_inf:
        value = max(math.exp(params.weight_log(a, j) + math.log(v)) for (j, _), v in c)
        return NormEstimate(value=value, abs_error=0.0, method=EstimateMethod.CLOSED_FORM)

    p = params.p
    # 対数領域で項を作り、補償和で足す
    terms = [math.exp(p * (params.weight_log(a, j) + math.log(v)) + j * a.log_det) for (j, _), v in c]
    value = math.fsum(terms) ** (1.0 / p)
    return NormEstimate(value=value, abs_error=0.0, method=EstimateMethod.CLOSED_FORM)


def single_entry_norm(a: Dilation, params: TLParams, j: int, v: float) -> float:
    """1 項だけの系列: p < ∞ は |det A|^{-j(α+1/2−1/p)}|v|、p = ∞ は |det A|^{-j(α+1/2)}|v|。"""
    log_w = params.weight_log(a, j)
    if not params.p_is_inf:
        log_w += j * a.log_det / params.p
    return math.exp(log_w) * abs(v)


def seqnorm(
    a: Dilation,
    params: TLParams,
    c: SparseSequence,
    quad: Optional[QuadratureSpec] = None,
) -> NormEstimate:
    """
    ‖c‖_{ḟ^α_{p,q}(A)}。

    - p = q（∞ を含む）: 閉形式
    - 1 項だけ: 閉形式
    - それ以外: quadrature_norm（grid / mc / dyadic）
    """
    quad = quad or QuadratureSpec()
    if c.is_empty:
        return NormEstimate(value=0.0, abs_error=0.0, method=EstimateMethod.CLOSED_FORM)
    if params.p == params.q:
        return seqnorm_exact_pq(a, params, c)
    if len(c) == 1:
        ((j, _), v), = c.entries.items()
        return NormEstimate(value=single_entry_norm(a, params, j, v), abs_error=0.0, method=EstimateMethod.CLOSED_FORM)
    return quadrature_norm(a, params, c, quad)
