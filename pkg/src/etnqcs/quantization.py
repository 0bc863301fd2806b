"""Zoom quantizers and saturation checks.

The base quantizer is a mid-tread uniform grid applied componentwise. For a
node of dimension ``d`` the grid step is ``2 * err_bound / sqrt(d)`` so the
Euclidean quantization error of the whole node never exceeds ``err_bound``.
Outputs are clamped to the grid level nearest to ``range``, which keeps the
saturation detection property (``|q(z)| > range - err_bound`` whenever
``|z| > range``) for every choice of ``range``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class QuantizerError(ValueError):
    """Raised on invalid quantizer or zoom parameters."""


@dataclass(frozen=True)
class QuantizerParams:
    range: float
    err_bound: float
    dead_zone: float | None = None

    def __post_init__(self):
        if not (self.range > self.err_bound > 0):
            raise QuantizerError(
                f"need range > err_bound > 0, got range={self.range}, err_bound={self.err_bound}"
            )
        if self.dead_zone is not None and not (0 < self.dead_zone <= self.err_bound):
            raise QuantizerError(f"dead_zone must lie in (0, err_bound], got {self.dead_zone}")

    @property
    def dead_zone_radius(self) -> float:
        return self.err_bound if self.dead_zone is None else self.dead_zone


def _grid(p: QuantizerParams, dim: int) -> tuple[float, float]:
    step = 2.0 * p.err_bound / math.sqrt(dim)
    top = math.floor(p.range / step + 0.5) * step
    return step, top


def base_quantize(p: QuantizerParams, z) -> np.ndarray:
    """Quantize one node's vector ``z`` on the unit-zoom grid.

    A 2-D ``z`` is treated as a batch of row vectors.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim == 0:
        z = z.reshape(1)
    step, top = _grid(p, z.shape[-1])
    q = np.clip(np.round(z / step) * step, -top, top)
    dead = np.linalg.norm(z, axis=-1, keepdims=True) <= p.dead_zone_radius
    return np.where(dead, 0.0, q)


def quantize(p: QuantizerParams, mu, z) -> np.ndarray:
    """Zoomed quantizer ``mu * base_quantize(z / mu)``."""
    mu_arr = np.asarray(mu, dtype=float)
    if not np.all(mu_arr > 0):
        raise QuantizerError(f"zoom parameter must be positive, got {mu}")
    z = np.asarray(z, dtype=float)
    if z.ndim == 2 and mu_arr.ndim == 1:
        mu_arr = mu_arr[:, None]
    return mu_arr * base_quantize(p, z / mu_arr)


def zoom_step(mu, omega) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0) or np.any(omega > 1):
        raise QuantizerError(f"zoom contraction must lie in (0, 1], got {omega}")
    return mu * omega


def saturation_check(params, mu, blocks) -> bool:
    """True iff every node satisfies ``|z_j| <= range_j * mu_j``.

    ``params``, ``mu`` and ``blocks`` are per-node sequences; a single
    ``QuantizerParams`` with scalar ``mu`` is accepted for one node.
    """
    if isinstance(params, QuantizerParams):
        params, mu, blocks = [params], [mu], [blocks]
    return all(
        np.linalg.norm(np.atleast_1d(z)) <= p.range * m
        for p, m, z in zip(params, np.atleast_1d(mu), blocks)
    )
