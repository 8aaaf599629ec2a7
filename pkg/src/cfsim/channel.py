"""DFT beamspace supports and single-ring channel draws.

Channel covariances are exactly diagonal in the DFT basis: the channel of an
RU-UE pair is a white Gaussian combination of the DFT columns in its angular
support. Supports are stored both as index tuples and as an ``(L, K, M)``
boolean mask; the latter drives all vectorized work.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def dft_matrix(M: int) -> np.ndarray:
    """Unitary DFT with entries ``exp(-2j*pi*m*n/M)/sqrt(M)``."""
    m = np.arange(M)
    return np.exp(-2j * np.pi * np.outer(m, m) / M) / np.sqrt(M)


def spatial_frequencies(M: int) -> np.ndarray:
    """Normalized spatial frequency of each DFT bin, in [-1/2, 1/2)."""
    m = np.arange(M)
    return np.where(m < M / 2, m / M, (m - M) / M)


def _front_angle(theta):
    # ULA front/back ambiguity: mirror onto [-pi/2, pi/2]
    theta = (np.asarray(theta, dtype=float) + np.pi) % (2 * np.pi) - np.pi
    theta = np.where(theta > np.pi / 2, np.pi - theta, theta)
    return np.where(theta < -np.pi / 2, -np.pi - theta, theta)


def support_interval(theta, delta):
    """Image of ``[theta - delta/2, theta + delta/2]`` under ``sin(.)/2``."""
    phi = _front_angle(theta)
    lo = np.sin(np.maximum(phi - delta / 2, -np.pi / 2)) / 2
    hi = np.sin(np.minimum(phi + delta / 2, np.pi / 2)) / 2
    # an interval crossing endfire folds back; its image is still [min, max]
    return lo, hi


def support_masks(theta, delta: float, M: int) -> np.ndarray:
    """Boolean support masks for an array of bearings; shape ``theta.shape + (M,)``."""
    theta = np.asarray(theta, dtype=float)
    lo, hi = support_interval(theta, delta)
    lo, hi = lo[..., None], hi[..., None]
    xi = spatial_frequencies(M)
    eps = 1e-12
    # spatial frequency is 1-periodic: -1/2 and +1/2 are the same bin
    inside = (xi >= lo - eps) & (xi <= hi + eps)
    inside |= (xi + 1.0 >= lo - eps) & (xi + 1.0 <= hi + eps)
    empty = ~inside.any(axis=-1)
    if np.any(empty):
        centre = (lo + hi)[..., 0] / 2
        # circular distance to every bin
        gap = np.abs((xi - centre[..., None] + 0.5) % 1.0 - 0.5)
        nearest = np.argmin(gap, axis=-1)
        fallback = np.zeros_like(inside)
        np.put_along_axis(fallback, nearest[..., None], True, axis=-1)
        inside = np.where(empty[..., None], fallback, inside)
    return inside


def angular_support(theta: float, delta: float, M: int) -> tuple[int, ...]:
    """Sorted DFT indices whose spatial frequency falls in the support interval."""
    mask = support_masks(np.asarray(theta, dtype=float), delta, M)
    return tuple(int(i) for i in np.flatnonzero(mask))


def subspace_overlap(s1, s2) -> int:
    """``|S1 & S2|``, equal to ``||F_1 F_1^H F_2||_F^2`` for DFT column sets."""
    return len(set(s1) & set(s2))


def support_index_list(mask) -> list[list[tuple[int, ...]]]:
    L, K, _ = mask.shape
    return [[tuple(int(i) for i in np.flatnonzero(mask[l, k])) for k in range(K)] for l in range(L)]


@dataclass
class ChannelState:
    """Supports and one small-scale fading realization.

    ``h[l, k]`` is the length-M channel between RU ``l`` and UE ``k``.
    """

    supports: np.ndarray  # (L, K, M) bool
    h: np.ndarray  # (L, K, M) complex

    @property
    def support_sizes(self) -> np.ndarray:
        return self.supports.sum(axis=-1)

    def stacked(self) -> np.ndarray:
        """Full ``LM x K`` channel matrix."""
        L, K, M = self.h.shape
        return self.h.transpose(0, 2, 1).reshape(L * M, K)


def layout_supports(layout, delta: float, M: int) -> np.ndarray:
    return support_masks(layout.angle, delta, M)


def to_beamspace(x: np.ndarray) -> np.ndarray:
    """Coefficients ``F^H x`` along the last axis."""
    M = x.shape[-1]
    return np.fft.ifft(x, axis=-1) * np.sqrt(M)


def from_beamspace(c: np.ndarray) -> np.ndarray:
    """``F c`` along the last axis."""
    M = c.shape[-1]
    return np.fft.fft(c, axis=-1) / np.sqrt(M)


def draw_channel(lsfc: np.ndarray, supports: np.ndarray, stream) -> ChannelState:
    """Draw ``h = sqrt(beta*M/|S|) F_S nu`` for every RU-UE pair.

    Parameters
    ----------
    lsfc : ndarray, shape (L, K)
    supports : ndarray of bool, shape (L, K, M)
    stream : numpy Generator
    """
    L, K, M = supports.shape
    size = supports.sum(axis=-1)
    nu = (stream.standard_normal((L, K, M)) + 1j * stream.standard_normal((L, K, M))) / np.sqrt(2)
    nu *= supports
    scale = np.sqrt(np.asarray(lsfc, dtype=float) * M / size)
    h = from_beamspace(nu) * scale[..., None]
    return ChannelState(supports=supports, h=h)
