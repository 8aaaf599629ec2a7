"""Local LMMSE filtering, cluster-level combining and uplink SINR.

Filters and combining weights are built from the channel estimates of the
served UEs; the SINR that feeds the rate is evaluated on the true channels.
UEs in outage do not transmit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

JITTER = 1e-12


class FactorizationError(np.linalg.LinAlgError):
    pass


def hermitian_solve(A, b, context=""):
    """Solve ``A x = b`` for Hermitian positive-definite ``A`` via Cholesky.

    Retries once with a relative diagonal jitter before giving up.
    """
    try:
        return scipy.linalg.cho_solve(scipy.linalg.cho_factor(A, lower=True, check_finite=False), b,
                                      check_finite=False)
    except np.linalg.LinAlgError:
        n = A.shape[0]
        bump = JITTER * max(float(np.real(np.trace(A))) / max(n, 1), np.finfo(float).tiny)
        try:
            c = scipy.linalg.cho_factor(A + bump * np.eye(n), lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            cond = np.linalg.cond(A)
            raise FactorizationError(f"{context}: matrix not positive definite (cond={cond:.3g})") from exc
        return scipy.linalg.cho_solve(c, b, check_finite=False)


def sigma_sq(lsfc, served, transmitting, snr) -> np.ndarray:
    """Per-RU noise-plus-external-interference level ``1 + SNR * sum_{j not in U_l} beta``."""
    outside = (~served) & np.asarray(transmitting, dtype=bool)[None, :]
    return 1.0 + snr * np.sum(lsfc * outside, axis=1)


def lmmse_vector(hhat_served, k_pos, sigma2, snr):
    """Local LMMSE filter for one UE.

    ``hhat_served`` is ``M x |U_l|`` (estimated channels of the UEs the RU
    serves) and ``k_pos`` the column of the target UE.
    """
    M = hhat_served.shape[0]
    A = sigma2 * np.eye(M) + snr * hhat_served @ hhat_served.conj().T
    return hermitian_solve(A, hhat_served[:, k_pos], "lmmse")


def lmmse_filters(hhat, served, sigma2, snr) -> np.ndarray:
    """All local filters as an ``(L, K, M)`` array, zero off the edge set."""
    L, K, M = hhat.shape
    V = np.zeros_like(hhat)
    eye = np.eye(M)
    for l in range(L):
        ues = np.flatnonzero(served[l])
        if ues.size == 0:
            continue
        Hs = hhat[l, ues].T
        A = sigma2[l] * eye + snr * Hs @ Hs.conj().T
        V[l, ues] = hermitian_solve(A, Hs, f"RU {l}").T
    return V


@dataclass
class CombiningSystem:
    """Per-UE quantities defining the estimated-channel SINR proxy."""

    rus: np.ndarray  # RUs in C_k with a nonzero filter
    a: np.ndarray  # g_{l,k,k}
    gamma: np.ndarray  # D_k + SNR G_k G_k^H
    snr: float

    def proxy_sinr(self, w) -> float:
        w = np.asarray(w)
        den = np.real(w.conj() @ self.gamma @ w)
        return float(self.snr * abs(w.conj() @ self.a) ** 2 / den) if den > 0 else 0.0


def combining_system(k, cluster, V, hhat, served, sigma2, snr) -> CombiningSystem:
    rus = np.array([l for l in cluster if np.any(V[l, k] != 0)], dtype=int)
    if rus.size == 0:
        return CombiningSystem(rus, np.zeros(0, complex), np.zeros((0, 0), complex), snr)
    vk = V[rus, k]  # (|C|, M)
    # g[l, j] = v_{l,k}^H hhat_{l,j}; hhat is zero for j not in U_l
    G = np.einsum("cm,cjm->cj", vk.conj(), hhat[rus])
    a = G[:, k].copy()
    G[:, k] = 0.0
    D = sigma2[rus] * np.sum(np.abs(vk) ** 2, axis=1)
    gamma = np.diag(D).astype(complex) + snr * G @ G.conj().T
    return CombiningSystem(rus, a, gamma, snr)


def combining_weights(system: CombiningSystem) -> np.ndarray:
    """SINR-maximizing cluster weights ``Gamma^{-1} a``."""
    if system.rus.size == 0:
        return np.zeros(0, complex)
    return hermitian_solve(system.gamma, system.a, "combining")


def sinr_ul(k, rus, w, V, h, snr, transmitting) -> float:
    """UL SINR for the unit-norm stacked receiver built from ``w`` and ``V`` blocks."""
    if len(rus) == 0:
        return 0.0
    z = w[:, None] * V[rus, k]  # blocks w_{l,k} v_{l,k}
    norm2 = float(np.sum(np.abs(z) ** 2))
    if norm2 == 0.0:
        return 0.0
    u = np.einsum("cm,cjm->j", z.conj(), h[rus])
    power = np.abs(u) ** 2 * np.asarray(transmitting, dtype=bool)
    signal = power[k]
    interference = float(np.sum(power)) - signal
    return float(signal / (norm2 / snr + interference))


def sinr_stacked(vfull, H, k, snr, transmitting) -> float:
    """Reference SINR on the full ``LM``-dimensional vectors."""
    n = np.linalg.norm(vfull)
    if n == 0:
        return 0.0
    v = vfull / n
    u = np.abs(v.conj() @ H) ** 2 * np.asarray(transmitting, dtype=bool)
    return float(u[k] / (1.0 / snr + u.sum() - u[k]))


def stacked_receiver(k, rus, w, V) -> np.ndarray:
    L, K, M = V.shape
    full = np.zeros((L, M), dtype=complex)
    full[rus] = w[:, None] * V[rus, k]
    return full.reshape(L * M)


def evaluate_fading(channel, estimates, assignment, lsfc, snr) -> np.ndarray:
    """Per-UE SINR for one fading draw (zero for outage UEs)."""
    L, K, M = channel.h.shape
    served = assignment.served
    transmitting = ~assignment.outage
    sigma2 = sigma_sq(lsfc, served, transmitting, snr)
    V = lmmse_filters(estimates.hhat, served, sigma2, snr)
    h = channel.h * transmitting[None, :, None]

    # per-RU Gram blocks g[l][a, b] = v_{l,a}^H hhat_{l,b} over served UEs
    members = [np.flatnonzero(served[l]) for l in range(L)]
    pos = np.full((L, K), -1)
    gram = []
    for l, ues in enumerate(members):
        pos[l, ues] = np.arange(ues.size)
        gram.append(V[l, ues].conj() @ estimates.hhat[l, ues].T)
    vnorm2 = np.sum(np.abs(V) ** 2, axis=-1)

    # pass 1: combining weights, scattered onto the edge grid
    W = np.zeros((L, K), dtype=complex)
    for k in np.flatnonzero(transmitting):
        rus = [l for l in assignment.clusters[k] if vnorm2[l, k] > 0]
        if not rus:
            continue
        G = np.zeros((len(rus), K), dtype=complex)
        for i, l in enumerate(rus):
            G[i, members[l]] = gram[l][pos[l, k]]
        a = G[:, k].copy()
        G[:, k] = 0.0
        gamma = snr * (G @ G.conj().T)
        gamma[np.diag_indices(len(rus))] += sigma2[rus] * vnorm2[rus, k]
        W[rus, k] = hermitian_solve(gamma, a, f"UE {k}")

    # pass 2: accumulate u[k, j] = v_k^H h_j one RU at a time
    u = np.zeros((K, K), dtype=complex)
    norm2 = np.zeros(K)
    for l, ues in enumerate(members):
        if ues.size == 0:
            continue
        Z = W[l, ues][:, None] * V[l, ues]  # blocks w_{l,k} v_{l,k}
        u[ues] += Z.conj() @ h[l].T
        norm2[ues] += np.sum(np.abs(Z) ** 2, axis=1)

    power = np.abs(u) ** 2
    signal = np.diagonal(power).copy()
    interference = power.sum(axis=1) - signal
    sinr = np.zeros(K)
    ok = norm2 > 0
    sinr[ok] = signal[ok] / (norm2[ok] / snr + interference[ok])
    return sinr


def rate_and_se(sinr_samples, pilot_dim, rb_dim, outage=None):
    """Ergodic rate (mean log2(1+SINR) over draws) and SE = (1 - tau_p/T) * rate.

    ``sinr_samples`` has shape (num_fadings, K).
    """
    sinr = np.atleast_2d(np.asarray(sinr_samples, dtype=float))
    rate = np.mean(np.log2(1.0 + sinr), axis=0)
    if outage is not None:
        rate = np.where(outage, 0.0, rate)
    se = max(0.0, 1.0 - pilot_dim / rb_dim) * rate
    return rate, se
