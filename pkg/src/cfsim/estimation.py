"""Pilot-matching and subspace-projected channel estimates.

Estimates are returned as ``(L, K, M)`` arrays that are zero outside the
edge set. The pilot-matching estimate is simulated in closed form: for
orthogonal pilots with energy ``tau_p * SNR`` the correlator output at RU l
on pilot t is the sum of the co-pilot channels plus ``CN(0, 1/(tau_p SNR))``
noise, shared by every UE on that pilot at that RU.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cfsim.assignment import OUTAGE
from cfsim.channel import dft_matrix, from_beamspace, to_beamspace
from cfsim.config import Estimator


@dataclass
class EstimateSet:
    hhat: np.ndarray  # (L, K, M), zero off the edge set
    kind: Estimator


def _pilot_onehot(pilot, num_pilots):
    pilot = np.asarray(pilot)
    onehot = np.zeros((pilot.size, num_pilots))
    active = pilot != OUTAGE
    onehot[np.flatnonzero(active), pilot[active]] = 1.0
    return onehot


def pilot_fields(h, pilot, num_pilots, snr, stream=None) -> np.ndarray:
    """Correlator outputs ``Y_l phi_t / (tau_p SNR)`` for every RU and pilot; shape (L, tau_p, M).

    UEs with pilot ``OUTAGE`` do not transmit. ``stream=None`` gives the
    noiseless field.
    """
    L, K, M = h.shape
    onehot = _pilot_onehot(pilot, num_pilots)
    field = np.einsum("lkm,kt->ltm", h, onehot)
    if stream is not None:
        std = np.sqrt(1.0 / (num_pilots * snr) / 2.0)
        shape = (L, num_pilots, M)
        field = field + std * (stream.standard_normal(shape) + 1j * stream.standard_normal(shape))
    return field


def pm_estimate(channel, assignment, snr, num_pilots, stream=None) -> EstimateSet:
    """Pilot-matching estimate for every edge (contaminated by all co-pilot UEs)."""
    field = pilot_fields(channel.h, assignment.pilot, num_pilots, snr, stream)
    served = assignment.served
    pilot = np.where(assignment.pilot == OUTAGE, 0, assignment.pilot)
    hhat = field[:, pilot, :] * served[..., None]
    return EstimateSet(hhat=hhat, kind=Estimator.PM)


def project(x, supports) -> np.ndarray:
    """Orthogonal projection ``F_S F_S^H x`` along the last axis."""
    return from_beamspace(to_beamspace(x) * supports)


def sp_estimate(pm: EstimateSet, supports) -> EstimateSet:
    if pm.kind is not Estimator.PM:
        raise ValueError(f"subspace projection needs a PM estimate, got {pm.kind.value}")
    return EstimateSet(hhat=project(pm.hhat, supports), kind=Estimator.SP)


def ideal_estimate(channel, assignment) -> EstimateSet:
    return EstimateSet(hhat=channel.h * assignment.served[..., None], kind=Estimator.IDEAL)


def estimate(kind, channel, assignment, snr, num_pilots, stream) -> EstimateSet:
    kind = Estimator.parse(kind)
    if kind is Estimator.IDEAL:
        return ideal_estimate(channel, assignment)
    pm = pm_estimate(channel, assignment, snr, num_pilots, stream)
    if kind is Estimator.PM:
        return pm
    return sp_estimate(pm, channel.supports)


def contamination_covariance(l, k, assignment, lsfc, supports) -> np.ndarray:
    """Covariance of the co-pilot term left in UE k's SP estimate at RU l."""
    M = supports.shape[-1]
    F = dft_matrix(M)
    Fk = F[:, supports[l, k]]
    Pk = Fk @ Fk.conj().T
    cov = np.zeros((M, M), dtype=complex)
    t = assignment.pilot[k]
    if t == OUTAGE:
        return cov
    for i in np.flatnonzero(assignment.pilot == t):
        if i == k:
            continue
        Fi = F[:, supports[l, i]]
        scale = lsfc[l, i] * M / Fi.shape[1]
        cov += scale * (Pk @ Fi @ Fi.conj().T @ Pk)
    return cov


def pilot_matrix(num_pilots, snr) -> np.ndarray:
    """Orthogonal pilots as columns, each with energy ``tau_p * SNR``."""
    t = np.arange(num_pilots)
    U = np.exp(-2j * np.pi * np.outer(t, t) / num_pilots) / np.sqrt(num_pilots)
    return U * np.sqrt(num_pilots * snr)


def pm_estimate_from_field(h, assignment, snr, num_pilots, stream):
    """Reference path: build the received pilot field and correlate.

    Returns ``(estimate, noise)`` where ``noise[l, t]`` is the projected noise
    ``Z_l phi_t / (tau_p SNR)`` that the closed form draws directly.
    """
    L, K, M = h.shape
    phi = pilot_matrix(num_pilots, snr)  # (tau_p, tau_p), column t is pilot t
    onehot = _pilot_onehot(assignment.pilot, num_pilots)
    sent = onehot @ phi.conj().T  # (K, tau_p) rows phi_{t_k}^H, zero for outage
    Z = (stream.standard_normal((L, M, num_pilots))
         + 1j * stream.standard_normal((L, M, num_pilots))) / np.sqrt(2)
    Y = np.einsum("lkm,kn->lmn", h, sent) + Z
    corr = np.einsum("lmn,nt->ltm", Y, phi) / (num_pilots * snr)
    noise = np.einsum("lmn,nt->ltm", Z, phi) / (num_pilots * snr)
    pilot = np.where(assignment.pilot == OUTAGE, 0, assignment.pilot)
    hhat = corr[:, pilot, :] * assignment.served[..., None]
    return EstimateSet(hhat=hhat, kind=Estimator.PM), noise
