# conftest.py
import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from core.fock import FockSpace, required_dim  # noqa: E402
from core.states import CodeParams  # noqa: E402


@pytest.fixture
def space40() -> FockSpace:
    return FockSpace(40)


@pytest.fixture
def space80() -> FockSpace:
    return FockSpace(80)


@pytest.fixture
def cat_code() -> CodeParams:
    """α² = 2, r = 0.2：大部分收斂測試共用的碼參數。"""
    return CodeParams.from_alpha_sq(2.0, 0.2)


@pytest.fixture
def cat_space(cat_code) -> FockSpace:
    return FockSpace(required_dim(cat_code.cutoff_photons, cat_code.r))
