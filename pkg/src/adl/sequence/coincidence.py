# src/adl/sequence/coincidence.py
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from adl.dilation.expansive import CocycleProbe, Dilation, ProbeVerdict, cocycle_probe
from adl.sequence.sequences import TLParams
from adl.utils.logging_utils import get_logger

logger = get_logger(__name__)

DET_RULE_RTOL = 1e-9


class Coincidence(str, Enum):
    EQUAL = "Equal"
    NOT_EQUAL = "NotEqual"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class CoincidenceReport:
    verdict: Coincidence
    reason: str
    exponent: Optional[float] = None      # α + 1/2 − 1/p（p = q のとき）
    det_factor_a: Optional[float] = None  # |det A|^{α+1/2−1/p}
    det_factor_b: Optional[float] = None
    probe: Optional[CocycleProbe] = None


def sequence_space_coincidence(
    a: Dilation,
    b: Dilation,
    params: TLParams,
    J: int = 32,
    tau: float = 1e-6,
) -> CoincidenceReport:
    """
    ḟ^α_{p,q}(A) = ḟ^α_{p,q}(B) かを判定する。

    p = q: 重み |det A|^{j(1/p−α−1/2)} の重み付き ℓ^p なので、
           |det A|^{α+1/2−1/p} = |det B|^{α+1/2−1/p} のときに限り一致（厳密）。
    p ≠ q: {A^j B^{-j}} の有限性で決まる（cocycle_probe の判定をそのまま使う）。
    """
    if params.p == params.q:
        inv_p = 0.0 if params.p_is_inf else 1.0 / params.p
        e = params.alpha + 0.5 - inv_p
        fa = math.exp(e * a.log_det)
        fb = math.exp(e * b.log_det)
        equal = abs(e * (a.log_det - b.log_det)) <= DET_RULE_RTOL
        return CoincidenceReport(
            verdict=Coincidence.EQUAL if equal else Coincidence.NOT_EQUAL,
            reason="p=q determinant rule",
            exponent=e,
            det_factor_a=fa,
            det_factor_b=fb,
        )

    probe = cocycle_probe(a, b, J=J, tau=tau)
    verdict = {
        ProbeVerdict.FINITE: Coincidence.EQUAL,
        ProbeVerdict.INFINITE: Coincidence.NOT_EQUAL,
    }.get(probe.verdict, Coincidence.INCONCLUSIVE)
    if verdict is Coincidence.INCONCLUSIVE:
        logger.warning("sequence_space_coincidence: cocycle probe inconclusive at J=%d", J)
    return CoincidenceReport(verdict=verdict, reason="cocycle criterion", probe=probe)
