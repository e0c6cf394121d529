"""Central finite differences used as independent oracles.

Steps are ``h = eta * max(1, |z_i|)``.  With ``richardson=True`` one level of
Richardson extrapolation (h and h/2) is applied.
"""

from __future__ import annotations

import numpy as np

ETA_FIRST = 1e-5
ETA_SECOND = 1e-4


def _step(z: np.ndarray, axis: int, eta: float) -> np.ndarray:
    return eta * np.maximum(1.0, np.abs(z[..., axis]))


def _shift(z: np.ndarray, axis: int, delta: np.ndarray) -> np.ndarray:
    zs = np.array(z, dtype=float, copy=True)
    zs[..., axis] += delta
    return zs


def partial(f, z, axis: int, eta: float = ETA_FIRST, richardson: bool = False):
    """d f / d z_axis for a batched scalar function ``f(z)``."""
    z = np.asarray(z, dtype=float)
    h = _step(z, axis, eta)

    def central(h):
        return (f(_shift(z, axis, h)) - f(_shift(z, axis, -h))) / (2.0 * h)

    d = central(h)
    if richardson:
        d = (4.0 * central(h / 2.0) - d) / 3.0
    return d


def second_partial(f, z, axis: int, eta: float = ETA_SECOND, richardson: bool = False):
    z = np.asarray(z, dtype=float)
    h = _step(z, axis, eta)
    f0 = f(z)

    def central(h):
        return (f(_shift(z, axis, h)) - 2.0 * f0 + f(_shift(z, axis, -h))) / h**2

    d = central(h)
    if richardson:
        d = (4.0 * central(h / 2.0) - d) / 3.0
    return d


def gradient(f, z, eta: float = ETA_FIRST, richardson: bool = False) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    return np.stack(
        [partial(f, z, i, eta, richardson) for i in range(z.shape[-1])], axis=-1
    )


def block_laplacians(
    f, z, m: int, eta: float = ETA_SECOND, richardson: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Euclidean Laplacians of ``f`` in the first ``m`` and the remaining coordinates."""
    z = np.asarray(z, dtype=float)
    d2 = [second_partial(f, z, i, eta, richardson) for i in range(z.shape[-1])]
    return sum(d2[:m]), sum(d2[m:])
