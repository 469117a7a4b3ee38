"""Shared fixtures. Thread pinning must happen before numpy loads so the
BLAS reductions are deterministic run to run."""

import os

for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
            "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
    os.environ.setdefault(var, "1")

import numpy as np
import pytest

from asmg import build_grid, build_hierarchy
from asmg.coeff import CoefficientField, gen_random_field
from asmg.diag import ExperimentConfig, build_field


def random_field(n: int, q: int, seed: int) -> CoefficientField:
    """Positive random coefficient with contrast up to 10^q, no islands."""
    rng = np.random.Generator(np.random.PCG64(seed))
    alpha = 10.0 ** -(rng.uniform(0.0, q, size=n * n))
    alpha[rng.integers(0, n * n)] = 1.0  # pin the max so no rescale needed
    return CoefficientField(n, alpha, "random")


def benchmark_field(case: str, n: int, q: int, seed: int = 0):
    """The field the CLI studies build for a given case."""
    return build_field(ExperimentConfig(study="diag", case=case, n=n, q=q,
                                        seed=seed, levels=1))


@pytest.fixture(scope="session")
def hierarchy16():
    """Two-level default-covering hierarchy on the n=16 benchmark field."""
    field = benchmark_field("b", 16, 3)
    return build_hierarchy(build_grid(16), field, 1)
