import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))


@pytest.fixture(autouse=True)
def _quiet_low_dimension_warnings():
    # 1D/2D cases are exercised deliberately; the advisory warning is expected
    import warnings

    with warnings.catch_warnings():
        warnings.filterwarnings(
            "ignore", message=".*below three dimensions.*", category=UserWarning
        )
        warnings.filterwarnings(
            "ignore", message=".*only meaningful in dimension.*", category=UserWarning
        )
        warnings.filterwarnings(
            "ignore", message=".*only theorem-grade.*", category=UserWarning
        )
        yield
