"""RU/UE geometry on a wrapped square and 3GPP UMi street-canyon LSFCs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cfsim.config import SimConfig

SPEED_OF_LIGHT = 299_792_458.0
SHADOW_STD_LOS_DB = 4.0
SHADOW_STD_NLOS_DB = 7.82


@dataclass
class Layout:
    """One geometry realization.

    Matrices are indexed ``[ru, ue]``.
    """

    ru_pos: np.ndarray  # (L, 2)
    ue_pos: np.ndarray  # (K, 2)
    lsfc: np.ndarray  # (L, K) linear power gain
    los: np.ndarray  # (L, K) bool
    angle: np.ndarray  # (L, K) bearing RU -> UE in [-pi, pi)

    @property
    def num_rus(self) -> int:
        return self.ru_pos.shape[0]

    @property
    def num_ues(self) -> int:
        return self.ue_pos.shape[0]


def wrapped_offset(p, q, side):
    """Shortest displacement from ``p`` to ``q`` on the torus, per axis in [-side/2, side/2)."""
    d = np.asarray(q, dtype=float) - np.asarray(p, dtype=float)
    return (d + side / 2.0) % side - side / 2.0


def torus_distance(p, q, side):
    """Euclidean distance with wrap-around on a square of side ``side``.

    Broadcasts over leading dimensions of ``p`` and ``q`` (last axis = x, y).
    """
    d = np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float)) % side
    d = np.minimum(d, side - d)
    out = np.sqrt(np.sum(d * d, axis=-1))
    return float(out) if out.ndim == 0 else out


def los_probability(distance2d):
    """UMi street-canyon LOS probability (TR 38.901 Table 7.4.2-1)."""
    d = np.asarray(distance2d, dtype=float)
    p = np.minimum(18.0 / np.maximum(d, 1e-12), 1.0) * (1.0 - np.exp(-d / 36.0)) + np.exp(-d / 36.0)
    p = np.where(d <= 18.0, 1.0, p)
    return float(p) if p.ndim == 0 else p


def los_draw(distance2d, stream):
    p = los_probability(distance2d)
    u = stream.random(np.shape(p))
    out = u < p
    return bool(out) if np.ndim(out) == 0 else out


def umi_pathloss_db(distance2d, los, config: SimConfig):
    """UMi street-canyon pathloss in dB (TR 38.901 Table 7.4.1-1).

    ``distance2d`` is clamped to ``config.min_distance``; the 3-D distance
    follows from the RU and UE heights.
    """
    fc = config.carrier_freq
    h_bs, h_ut = config.ru_height, config.ue_height
    d2 = np.maximum(np.asarray(distance2d, dtype=float), config.min_distance)
    d3 = np.sqrt(d2**2 + (h_bs - h_ut) ** 2)
    # effective environment height of 1 m
    d_bp = 4.0 * (h_bs - 1.0) * (h_ut - 1.0) * fc * 1e9 / SPEED_OF_LIGHT
    pl1 = 32.4 + 21.0 * np.log10(d3) + 20.0 * np.log10(fc)
    pl2 = (32.4 + 40.0 * np.log10(d3) + 20.0 * np.log10(fc)
           - 9.5 * np.log10(d_bp**2 + (h_bs - h_ut) ** 2))
    pl_los = np.where(d2 <= d_bp, pl1, pl2)
    pl_nlos = 35.3 * np.log10(d3) + 22.4 + 21.3 * np.log10(fc) - 0.3 * (h_ut - 1.5)
    pl = np.where(np.asarray(los, dtype=bool), pl_los, np.maximum(pl_los, pl_nlos))
    return float(pl) if pl.ndim == 0 else pl


def lsfc(distance2d, los, shadow_db, config: SimConfig):
    """Linear LSFC ``10^(-(PL + shadow)/10)``."""
    pl = umi_pathloss_db(distance2d, los, config)
    out = 10.0 ** (-(np.asarray(pl) + np.asarray(shadow_db, dtype=float)) / 10.0)
    return float(out) if np.ndim(out) == 0 else out


def shadow_draw(los, stream, config: SimConfig):
    los = np.asarray(los, dtype=bool)
    if not config.shadowing:
        return np.zeros(los.shape)
    std = np.where(los, SHADOW_STD_LOS_DB, SHADOW_STD_NLOS_DB)
    return std * stream.standard_normal(los.shape)


def layout_from_positions(ru_pos, ue_pos, config: SimConfig, stream) -> Layout:
    ru_pos = np.atleast_2d(np.asarray(ru_pos, dtype=float))
    ue_pos = np.atleast_2d(np.asarray(ue_pos, dtype=float))
    side = config.area_side
    offset = wrapped_offset(ru_pos[:, None, :], ue_pos[None, :, :], side)
    dist = np.sqrt(np.sum(offset**2, axis=-1))
    angle = np.arctan2(offset[..., 1], offset[..., 0])
    # arctan2 returns (-pi, pi]; fold pi onto -pi
    angle = np.where(angle >= np.pi, angle - 2 * np.pi, angle)
    if config.los_model:
        los = los_draw(dist, stream)
    else:
        los = np.zeros(dist.shape, dtype=bool)
    los = np.asarray(los, dtype=bool)
    shadow = shadow_draw(los, stream, config)
    beta = np.asarray(lsfc(dist, los, shadow, config), dtype=float)
    return Layout(ru_pos=ru_pos, ue_pos=ue_pos, lsfc=beta, los=los, angle=angle)


def generate_layout(config: SimConfig, stream) -> Layout:
    """Uniform RU/UE drop on the square followed by LOS, shadowing and LSFC draws."""
    side = config.area_side
    ru_pos = stream.uniform(0.0, side, size=(config.num_rus, 2))
    ue_pos = stream.uniform(0.0, side, size=(config.num_ues, 2))
    return layout_from_positions(ru_pos, ue_pos, config, stream)
