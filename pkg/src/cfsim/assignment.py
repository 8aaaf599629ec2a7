"""Leader selection, pilot assignment and cluster formation.

Four schemes are provided:

* non-overloaded: an RU never serves two UEs on the same pilot;
* SIA-OPA: an RU may reuse a pilot only among UEs with disjoint DFT supports;
* R-OPA random: LSFC-only clusters, uniformly random pilots;
* R-OPA WGF: LSFC-only clusters, pilots from a greedy Max k-Cut over a
  contamination-weighted UE graph.

Supports are passed as ``(L, K, M)`` boolean masks throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cfsim.config import Estimator, Scheme, SimConfig, WgfMetric

OUTAGE = -1


@dataclass
class Assignment:
    """RU-UE association graph plus pilots.

    ``leader[k]`` and ``pilot[k]`` are ``OUTAGE`` (-1) for UEs in outage.
    ``clusters[k]`` lists RU indices in decreasing LSFC order.
    """

    leader: np.ndarray
    pilot: np.ndarray
    clusters: list
    num_rus: int
    num_pilots: int

    @property
    def num_ues(self) -> int:
        return len(self.clusters)

    @property
    def outage(self) -> np.ndarray:
        return self.leader == OUTAGE

    @property
    def served(self) -> np.ndarray:
        """``(L, K)`` edge indicator."""
        mask = np.zeros((self.num_rus, self.num_ues), dtype=bool)
        for k, cluster in enumerate(self.clusters):
            mask[list(cluster), k] = True
        return mask

    @property
    def edges(self) -> set:
        return {(l, k) for k, cluster in enumerate(self.clusters) for l in cluster}

    @property
    def serve_sets(self) -> list:
        sets = [[] for _ in range(self.num_rus)]
        for k, cluster in enumerate(self.clusters):
            for l in cluster:
                sets[l].append(k)
        return sets

    @property
    def copilot_sets(self) -> list:
        sets = [[] for _ in range(self.num_pilots)]
        for k, t in enumerate(self.pilot):
            if t != OUTAGE:
                sets[t].append(k)
        return sets

    @property
    def cluster_sizes(self) -> np.ndarray:
        return np.array([len(c) for c in self.clusters], dtype=int)

    def mean_cluster_size(self) -> float:
        """Mean ``|C_k|`` over UEs not in outage (0 if every UE is in outage)."""
        sizes = self.cluster_sizes[~self.outage]
        return float(sizes.mean()) if sizes.size else 0.0

    def outage_fraction(self) -> float:
        return float(np.mean(self.outage))


def eligible(lsfc, config: SimConfig, strict: bool = False) -> np.ndarray:
    """RU-UE pairs passing the cluster-formation threshold ``beta >= eta/(M SNR)``."""
    thr = config.threshold_lsfc
    return lsfc > thr if strict else lsfc >= thr


def _by_decreasing_lsfc(values, mask):
    idx = np.flatnonzero(mask)
    return idx[np.argsort(-values[idx], kind="stable")]


def _admission_passes(order, two_phase):
    """Yield ``(k, choose_leader, build_cluster)`` steps for the two admission modes.

    In two-phase admission every UE first takes a leader and a pilot, then
    clusters are grown in the same order; otherwise each UE does both before
    the next one arrives.
    """
    order = [int(k) for k in order]
    if two_phase:
        for k in order:
            yield k, True, False
        for k in order:
            yield k, False, True
    else:
        for k in order:
            yield k, True, True


def assign_nonoverloaded(lsfc, config: SimConfig, order) -> Assignment:
    """Admission where each RU uses every pilot at most once."""
    L, K = lsfc.shape
    tau = config.pilot_dim
    Q = config.max_cluster_size
    ok = eligible(lsfc, config)
    used = np.zeros((L, tau), dtype=bool)
    # network-wide co-pilot LSFC sum seen at each RU, per pilot
    load = np.zeros((L, tau))
    leader = np.full(K, OUTAGE)
    pilot = np.full(K, OUTAGE)
    clusters = [[] for _ in range(K)]

    for k, pick_leader, grow in _admission_passes(order, config.admission == "two_phase"):
        if pick_leader:
            cand = ok[:, k] & ~used.all(axis=1)
            if not cand.any():
                continue
            l = int(np.argmax(np.where(cand, lsfc[:, k], -np.inf)))
            t = int(np.argmin(np.where(used[l], np.inf, load[l])))
            leader[k], pilot[k] = l, t
            clusters[k] = [l]
            used[l, t] = True
            load[:, t] += lsfc[:, k]
        if grow and leader[k] != OUTAGE:
            l, t = int(leader[k]), int(pilot[k])
            extra = _by_decreasing_lsfc(lsfc[:, k], ok[:, k] & ~used[:, t])[: Q - 1]
            clusters[k] = [l] + [int(x) for x in extra]
            used[extra, t] = True

    return Assignment(leader, pilot, clusters, L, tau)


def contamination_zeta(l, k, i, lsfc, supports, served, pilot) -> float:
    """Contamination on pilot ``i`` seen in UE ``k``'s subspace at RU ``l``.

    Sums ``||F_k F_k^H F_j||_F * beta[l, j]`` over UEs ``j != k`` that RU ``l``
    already serves on pilot ``i``. The Frobenius norm is not squared.
    """
    total = 0.0
    sk = supports[l, k]
    for j in np.flatnonzero(served[l] & (np.asarray(pilot) == i)):
        if j == k:
            continue
        overlap = int(np.count_nonzero(sk & supports[l, j]))
        total += np.sqrt(overlap) * lsfc[l, j]
    return float(total)


def assign_sia_opa(lsfc, supports, config: SimConfig, order) -> Assignment:
    """Admission allowing pilot reuse at an RU only among orthogonal subspaces."""
    L, K = lsfc.shape
    tau = config.pilot_dim
    Q = config.max_cluster_size
    ok = eligible(lsfc, config)
    M = supports.shape[-1]
    # occupancy[l, i, m]: how many UEs served by l on pilot i use DFT bin m
    occupancy = np.zeros((L, tau, M), dtype=np.int32)
    load = np.zeros((L, tau))
    leader = np.full(K, OUTAGE)
    pilot = np.full(K, OUTAGE)
    clusters = [[] for _ in range(K)]

    for k, pick_leader, grow in _admission_passes(order, config.admission == "two_phase"):
        if pick_leader:
            chosen = None
            for l in _by_decreasing_lsfc(lsfc[:, k], ok[:, k]):
                zero = ~(occupancy[l][:, supports[l, k]] > 0).any(axis=1)
                if zero.any():
                    chosen = (int(l), int(np.argmin(np.where(zero, load[l], np.inf))))
                    break
            if chosen is None:
                continue
            l, t = chosen
            leader[k], pilot[k] = l, t
            clusters[k] = [l]
            occupancy[l, t] += supports[l, k]
            load[:, t] += lsfc[:, k]
        if grow and leader[k] != OUTAGE:
            l, t = int(leader[k]), int(pilot[k])
            clash = ((occupancy[:, t, :] > 0) & supports[:, k, :]).any(axis=1)
            clash[l] = True
            extra = _by_decreasing_lsfc(lsfc[:, k], ok[:, k] & ~clash)[: Q - 1]
            clusters[k] = [l] + [int(x) for x in extra]
            occupancy[extra, t, :] += supports[extra, k, :]

    return Assignment(leader, pilot, clusters, L, tau)


def ropa_clusters(lsfc, config: SimConfig) -> Assignment:
    """Pilot-agnostic clusters: up to Q strongest RUs above the threshold."""
    L, K = lsfc.shape
    ok = eligible(lsfc, config, strict=True)
    leader = np.full(K, OUTAGE)
    clusters = []
    for k in range(K):
        members = _by_decreasing_lsfc(lsfc[:, k], ok[:, k])[: config.max_cluster_size]
        clusters.append([int(x) for x in members])
        if members.size:
            leader[k] = members[0]
    return Assignment(leader, np.full(K, OUTAGE), clusters, L, config.pilot_dim)


def ropa_random_pilots(clusters: Assignment, config: SimConfig, stream) -> Assignment:
    draws = stream.integers(0, config.pilot_dim, size=clusters.num_ues)
    pilot = np.where(clusters.outage, OUTAGE, draws)
    return Assignment(clusters.leader.copy(), pilot, [list(c) for c in clusters.clusters],
                      clusters.num_rus, config.pilot_dim)


def _directional_terms(lsfc, supports, served, metric: WgfMetric) -> np.ndarray:
    """``T[k, k']``: normalized interference of UE k' into cluster C_k."""
    L, K = lsfc.shape
    cl = served.astype(float)
    own = np.sum(cl * lsfc, axis=0)  # sum_{l in C_k} beta[l, k]
    if metric is WgfMetric.PLAIN:
        num = cl.T @ lsfc
    else:
        size = supports.sum(axis=-1).astype(float)
        sup = supports.astype(float)
        num = np.zeros((K, K))
        for l in range(L):
            overlap = sup[l] @ sup[l].T
            right = cl[l] * lsfc[l] if metric is WgfMetric.PARTIAL_SP else lsfc[l]
            num += (cl[l] / size[l])[:, None] * overlap * right[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(own[:, None] > 0, num / own[:, None], 0.0)
    return out


def wgf_weights(lsfc, supports, served, metric: WgfMetric) -> np.ndarray:
    """Symmetric ``K x K`` potential-contamination weights (zero diagonal)."""
    metric = WgfMetric.parse(metric)
    if metric is WgfMetric.AUTO:
        raise ValueError("resolve the WGF metric before computing weights")
    term = _directional_terms(lsfc, supports, served, metric) ** 2
    w = term + term.T
    np.fill_diagonal(w, 0.0)
    return w


def wgf_weight(k, k2, lsfc, supports, clusters, metric) -> float:
    """Weight between two UEs evaluated term by term over their clusters."""
    metric = WgfMetric.parse(metric)

    def direction(a, b):
        own = sum(lsfc[l, a] for l in clusters[a])
        if own <= 0:
            return 0.0
        if metric is WgfMetric.PLAIN:
            cross = sum(lsfc[l, b] for l in clusters[a])
        else:
            rus = [l for l in clusters[a] if metric is WgfMetric.FULL_SP or l in clusters[b]]
            cross = sum(
                np.count_nonzero(supports[l, a] & supports[l, b]) / np.count_nonzero(supports[l, a])
                * lsfc[l, b]
                for l in rus
            )
        return abs(cross / own) ** 2

    if k == k2:
        return 0.0
    return float(direction(k, k2) + direction(k2, k))


def wgf_partition(weights, num_pilots: int, order, trace=None) -> list:
    """Greedy Max k-Cut heuristic.

    The first ``num_pilots`` UEs of ``order`` seed one subset each; every
    following UE joins the subset with the smallest summed weight to it
    (lowest index on ties). If ``trace`` is a list, ``(ue, W_row, q)`` is
    appended for every non-seed UE.
    """
    order = [int(k) for k in order]
    subsets = [[] for _ in range(num_pilots)]
    acc = np.zeros((weights.shape[0], num_pilots))
    for pos, ue in enumerate(order):
        if pos < num_pilots:
            q = pos
        else:
            row = acc[ue]
            q = int(np.argmin(row))
            if trace is not None:
                trace.append((ue, row.copy(), q))
        subsets[q].append(ue)
        acc[:, q] += weights[:, ue]
    return subsets


def resolve_wgf_metric(config: SimConfig) -> WgfMetric:
    if config.wgf_metric is not WgfMetric.AUTO:
        return config.wgf_metric
    if config.estimator is Estimator.PM:
        return WgfMetric.PLAIN
    return WgfMetric.PARTIAL_SP


def assign_ropa_wgf(lsfc, supports, config: SimConfig, stream) -> Assignment:
    base = ropa_clusters(lsfc, config)
    weights = wgf_weights(lsfc, supports, base.served, resolve_wgf_metric(config))
    order = [int(k) for k in stream.permutation(base.num_ues) if not base.outage[k]]
    pilot = np.full(base.num_ues, OUTAGE)
    for q, members in enumerate(wgf_partition(weights, config.pilot_dim, order)):
        pilot[members] = q
    base.pilot = pilot
    return base


def assign(lsfc, supports, config: SimConfig, stream) -> Assignment:
    """Run the configured scheme; ``stream`` supplies the UE order or random pilots."""
    scheme = config.scheme
    if scheme is Scheme.NON_OVERLOADED:
        return assign_nonoverloaded(lsfc, config, stream.permutation(lsfc.shape[1]))
    if scheme is Scheme.SIA_OPA:
        return assign_sia_opa(lsfc, supports, config, stream.permutation(lsfc.shape[1]))
    if scheme is Scheme.ROPA_RANDOM:
        return ropa_random_pilots(ropa_clusters(lsfc, config), config, stream)
    if scheme is Scheme.ROPA_WGF:
        return assign_ropa_wgf(lsfc, supports, config, stream)
    raise ValueError(f"unknown scheme {scheme!r}")


def check_assignment(a: Assignment, lsfc, supports, config: SimConfig, scheme=None) -> list:
    """Return a list of human-readable invariant violations (empty if consistent)."""
    scheme = config.scheme if scheme is None else Scheme.parse(scheme)
    problems = []
    served = a.served
    sets = a.serve_sets
    thr = config.threshold_lsfc
    for k, cluster in enumerate(a.clusters):
        if len(set(cluster)) != len(cluster):
            problems.append(f"UE {k}: duplicate RU in cluster")
        if a.outage[k]:
            if cluster or a.pilot[k] != OUTAGE:
                problems.append(f"UE {k}: outage UE has cluster or pilot")
            continue
        if not 1 <= len(cluster) <= config.max_cluster_size:
            problems.append(f"UE {k}: cluster size {len(cluster)}")
        if a.leader[k] not in cluster:
            problems.append(f"UE {k}: leader {a.leader[k]} not in cluster")
        if not 0 <= a.pilot[k] < config.pilot_dim:
            problems.append(f"UE {k}: pilot {a.pilot[k]} out of range")
        for l in cluster:
            if lsfc[l, k] < thr:
                problems.append(f"edge ({l},{k}): LSFC below threshold")
            if k not in sets[l]:
                problems.append(f"edge ({l},{k}): missing from serve set")
    if int(served.sum()) != sum(len(s) for s in sets):
        problems.append("edge count mismatch between clusters and serve sets")
    if scheme is Scheme.NON_OVERLOADED:
        for l, ues in enumerate(sets):
            pilots = [int(a.pilot[k]) for k in ues]
            if len(pilots) != len(set(pilots)):
                problems.append(f"RU {l}: pilot reused")
    if scheme is Scheme.SIA_OPA:
        for l, k in a.edges:
            z = contamination_zeta(l, k, a.pilot[k], lsfc, supports, served, a.pilot)
            if z != 0.0:
                problems.append(f"edge ({l},{k}): zeta = {z:.3g}")
    return problems
