from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from adl.dilation.expansive import Dilation, validate_dilation
from adl.dilation.quasinorm import StepQuasiNorm

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "data"
CONFIGS = ROOT / "configs" / "runs"


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


# ==========================================================
# 行列
# ==========================================================
@pytest.fixture(scope="session")
def two_I() -> Dilation:
    return validate_dilation(2.0 * np.eye(2))


@pytest.fixture(scope="session")
def two_R1() -> Dilation:
    return validate_dilation(2.0 * rotation(1.0))


@pytest.fixture(scope="session")
def two_Rhalfpi() -> Dilation:
    return validate_dilation([[0.0, -2.0], [2.0, 0.0]])


@pytest.fixture(scope="session")
def diag_2_3() -> Dilation:
    return validate_dilation(np.diag([2.0, 3.0]))


@pytest.fixture(scope="session")
def diag_2_4() -> Dilation:
    return validate_dilation(np.diag([2.0, 4.0]))


@pytest.fixture(scope="session")
def diag_4_2() -> Dilation:
    return validate_dilation(np.diag([4.0, 2.0]))


@pytest.fixture(scope="session")
def eight_I() -> Dilation:
    return validate_dilation(8.0 * np.eye(2))


@pytest.fixture(scope="session")
def four_I() -> Dilation:
    return validate_dilation(4.0 * np.eye(2))


# ==========================================================
# 準ノルム
# ==========================================================
@pytest.fixture(scope="session")
def qn_two_I(two_I: Dilation) -> StepQuasiNorm:
    return StepQuasiNorm.build(two_I)


@pytest.fixture(scope="session")
def qn_diag_2_3(diag_2_3: Dilation) -> StepQuasiNorm:
    return StepQuasiNorm.build(diag_2_3)


@pytest.fixture(scope="session")
def qn_two_R1(two_R1: Dilation) -> StepQuasiNorm:
    return StepQuasiNorm.build(two_R1)


@pytest.fixture(autouse=True)
def _single_thread(monkeypatch: pytest.MonkeyPatch) -> None:
    # 既定は 1 スレッド（並列性は個別のテストで明示する）
    monkeypatch.setenv("ADL_THREADS", "1")
