"""Permeability fields for the benchmark cases.

Three kinds of coefficient are supported: binary island fields (case [a]),
islands against a randomized background (case [b]), and externally supplied
permeability rasters such as SPE10 slices (case [c]). Fields store
alpha_T = 1/K_T per cell, in cell-id (row-major, bottom row first) order.
"""

import os
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import CoefficientError, ConfigurationError, RasterError


@dataclass(frozen=True)
class IslandLayout:
    """Square inclusions on a lattice x lattice arrangement.

    Each lattice block spans n/lattice cells; the island inside it spans
    n/side_div cells, offset to the block centre (rounded to whole cells).
    """

    lattice: int = 4
    side_div: int = 8


@dataclass(frozen=True)
class CoefficientField:
    """Per-cell coefficient alpha_T = K_T^{-1}."""

    n: int
    alpha: np.ndarray  # shape (n*n,), cell-id order
    provenance: str = "binary"  # binary | random | raster

    def __post_init__(self):
        alpha = np.ascontiguousarray(np.asarray(self.alpha, dtype=float).ravel())
        if alpha.shape != (self.n * self.n,):
            raise CoefficientError(
                f"field for n={self.n} needs {self.n * self.n} cells, got {alpha.size}"
            )
        if not np.all(np.isfinite(alpha)) or np.any(alpha <= 0.0):
            raise CoefficientError("coefficient values must be positive and finite")
        object.__setattr__(self, "alpha", alpha)

    def as_grid(self):
        """alpha as an (n, n) array indexed [row j, column i]."""
        return self.alpha.reshape(self.n, self.n)


def island_mask(n: int, layout: IslandLayout = IslandLayout()) -> np.ndarray:
    """Boolean cell mask of the inclusion cells; empty below n = 2*side_div."""
    side = n // layout.side_div
    block = n // layout.lattice
    mask = np.zeros((n, n), dtype=bool)
    if side < 1:
        return mask.ravel()
    if side > block:
        raise ConfigurationError(
            f"island side {side} exceeds lattice block {block} at n={n}"
        )
    off = (block - side + 1) // 2
    for bj in range(layout.lattice):
        for bi in range(layout.lattice):
            i0 = bi * block + off
            j0 = bj * block + off
            mask[j0:j0 + side, i0:i0 + side] = True
    return mask.ravel()


def gen_binary_islands(n, q, layout: IslandLayout = IslandLayout()) -> CoefficientField:
    """Islands with alpha = 1 against a constant background alpha = 10^-q."""
    if q < 0:
        raise ConfigurationError(f"contrast exponent must be >= 0, got {q}")
    alpha = np.full(n * n, 10.0 ** (-q))
    alpha[island_mask(n, layout)] = 1.0
    return CoefficientField(n, alpha, "binary")


def gen_random_field(n, q, seed, layout: IslandLayout = IslandLayout()) -> CoefficientField:
    """Islands with alpha = 1; each background cell draws alpha = 10^-q_rand.

    q_rand is uniform on {0, ..., q} per cell, from a PCG64 stream seeded
    with `seed` (fixed, documented generator so fields are portable).
    """
    if q < 0:
        raise ConfigurationError(f"contrast exponent must be >= 0, got {q}")
    rng = np.random.Generator(np.random.PCG64(seed))
    exponents = rng.integers(0, q + 1, size=n * n)
    alpha = 10.0 ** (-exponents.astype(float))
    alpha[island_mask(n, layout)] = 1.0
    return CoefficientField(n, alpha, "random")


def load_raster(path) -> CoefficientField:
    """Read a permeability raster: "nx ny" header, then nx*ny positive values
    row-major from the bottom-left cell. Only square rasters with power-of-two
    side become fields directly; anything square loads and can be resampled.
    """
    try:
        with open(path, "r", encoding="ascii") as fh:
            tokens = fh.read().split()
    except OSError as exc:
        raise RasterError(f"cannot read raster {path!r}: {exc}") from exc
    if len(tokens) < 2:
        raise RasterError(f"raster {path!r}: missing 'nx ny' header")
    try:
        nx, ny = int(tokens[0]), int(tokens[1])
    except ValueError as exc:
        raise RasterError(f"raster {path!r}: malformed header {tokens[:2]}") from exc
    if nx <= 0 or ny <= 0:
        raise RasterError(f"raster {path!r}: non-positive dimensions {nx}x{ny}")
    if len(tokens) - 2 != nx * ny:
        raise RasterError(
            f"raster {path!r}: expected {nx * ny} values, found {len(tokens) - 2}"
        )
    try:
        perm = np.array(tokens[2:], dtype=float)
    except ValueError as exc:
        raise RasterError(f"raster {path!r}: non-numeric value: {exc}") from exc
    if not np.all(np.isfinite(perm)) or np.any(perm <= 0.0):
        raise RasterError(f"raster {path!r}: permeability values must be positive")
    if nx != ny:
        raise RasterError(
            f"raster {path!r}: only square rasters are supported, got {nx}x{ny}"
        )
    # arbitrary square size is fine here; resample to a power of two before
    # building grids
    return rescale(CoefficientField(nx, 1.0 / perm, "raster"))


def resample(field: CoefficientField, n: int) -> CoefficientField:
    """Nearest-neighbour resampling in cell-centre coordinates to n x n."""
    if n < 2 or (n & (n - 1)) != 0:
        raise ConfigurationError(f"resample target must be a power of two, got {n}")
    src = field.alpha.reshape(field.n, field.n)
    centers = (np.arange(n) + 0.5) / n
    idx = np.minimum((centers * field.n).astype(int), field.n - 1)
    out = src[np.ix_(idx, idx)]
    return CoefficientField(n, out.ravel(), field.provenance)


def contrast(field: CoefficientField) -> float:
    """kappa = max_T K_T / min_T K_T = max alpha / min alpha."""
    a = field.alpha
    return float(a.max() / a.min())


def rescale(field: CoefficientField) -> CoefficientField:
    """Normalize so min_T K_T = 1, i.e. max_T alpha_T = 1. Keeps kappa."""
    amax = field.alpha.max()
    if amax == 1.0:
        return field
    return CoefficientField(field.n, field.alpha / amax, field.provenance)


def write_raster(path, field: CoefficientField):
    """Emit the permeability raster (K = 1/alpha) in the load_raster format."""
    K = 1.0 / field.alpha.reshape(field.n, field.n)
    lines = [f"{field.n} {field.n}"]
    for row in K:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)
