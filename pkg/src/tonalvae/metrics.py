"""PCA projection and key-cluster metrics for latent spaces.

Clusters are the 12 transpositions of one piece.  Davies-Bouldin and Dunn
measure how compact and separated they are; the circular Kendall's tau
measures whether the clusters sit around the centre in circle-of-fifths
order (either direction gives ``|tau| = 1``).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from itertools import combinations

import numpy as np

from .errors import CoincidentCentroids, DegenerateData, TiedAngles
from .score import KeyLabel

TIE_NUDGE = 1e-9


@dataclass(frozen=True)
class LatentPoint:
    piece_id: str
    segment_index: int
    key: KeyLabel
    mu: np.ndarray = field(compare=False)
    xy: tuple[float, float] | None = None


@dataclass
class LatentReport:
    piece_id: str
    davies_bouldin: float
    dunn: float
    tau: float
    centroid_angles: dict
    explained_variance: tuple[float, float]
    accuracy: float = float("nan")
    mse: float = float("nan")
    kl: float = float("nan")
    degenerate: bool = False


def camelot_order(mode: str = "major") -> list[KeyLabel]:
    """The 12 keys of one mode in Camelot order (1..12, ascending fifths).

    Major starts at B (1B); minor starts at G# minor (1A), the relative
    minor of B, as on the Camelot wheel.
    """
    start = 11 if mode == "major" else 8
    return [KeyLabel((start + 7 * i) % 12, mode) for i in range(12)]


def pca2(points: list[LatentPoint]) -> tuple[list[LatentPoint], tuple[float, float]]:
    """Project onto the top two principal axes of the centred cloud.

    Each axis is signed so that its first non-negligible loading is positive.
    Returns the points with ``xy`` filled and the variance along both axes.
    """
    if len(points) < 3:
        raise DegenerateData("PCA needs at least 3 points")
    X = np.stack([np.asarray(p.mu, dtype=float) for p in points])
    if not np.all(np.isfinite(X)):
        raise DegenerateData("non-finite latent vectors")
    centered = X - X.mean(axis=0)
    cov = centered.T @ centered / (len(points) - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    if evals[0] <= 1e-15 * max(1.0, float(np.abs(cov).max())):
        raise DegenerateData("latent points are all identical")
    axes = np.zeros((X.shape[1], 2))
    for j in range(min(2, X.shape[1])):
        v = evecs[:, j]
        nz = np.flatnonzero(np.abs(v) > 1e-12)
        axes[:, j] = -v if nz.size and v[nz[0]] < 0 else v
    proj = centered @ axes
    var = np.clip(evals[:2], 0.0, None) if X.shape[1] >= 2 else np.array([evals[0], 0.0])
    out = [replace(p, xy=(float(a), float(b))) for p, (a, b) in zip(points, proj)]
    return out, (float(var[0]), float(var[1]))


def group_by_key(points: list[LatentPoint]) -> dict:
    groups: dict = {}
    for p in points:
        if p.xy is None:
            raise ValueError("points need a 2-D projection; run pca2 first")
        groups.setdefault(p.key, []).append(p.xy)
    return {k: np.asarray(v, dtype=float) for k, v in groups.items()}


def _as_groups(groups) -> list[np.ndarray]:
    arrays = [np.atleast_2d(np.asarray(g, dtype=float)) for g in groups.values()]
    if len(arrays) < 2:
        raise ValueError("need at least two clusters")
    if any(a.shape[0] == 0 for a in arrays):
        raise ValueError("empty cluster")
    return arrays


def davies_bouldin(groups: dict) -> float:
    """Mean over clusters of the worst ``(s_i + s_j) / d(c_i, c_j)``.

    ``s_i`` is the mean distance of cluster i's points to its centroid.
    Coincident centroids give ``inf`` with a warning.
    """
    arrays = _as_groups(groups)
    cents = np.stack([a.mean(axis=0) for a in arrays])
    scatter = np.array([np.linalg.norm(a - c, axis=1).mean() for a, c in zip(arrays, cents)])
    dist = np.linalg.norm(cents[:, None, :] - cents[None, :, :], axis=-1)
    np.fill_diagonal(dist, np.nan)
    if np.any(dist[~np.isnan(dist)] == 0):
        warnings.warn("two cluster centroids coincide", CoincidentCentroids, stacklevel=2)
        return math.inf
    ratio = (scatter[:, None] + scatter[None, :]) / dist
    return float(np.mean(np.nanmax(ratio, axis=1)))


def _mean_pairwise(a: np.ndarray) -> float:
    n = a.shape[0]
    if n < 2:
        return 0.0
    d = np.linalg.norm(a[:, None, :] - a[None, :, :], axis=-1)
    return float(d.sum() / (n * (n - 1)))


def dunn_index(groups: dict) -> float:
    """Closest inter-cluster point pair over the largest mean intra-cluster distance."""
    arrays = _as_groups(groups)
    intra = max(_mean_pairwise(a) for a in arrays)
    inter = math.inf
    for a, b in combinations(arrays, 2):
        inter = min(inter, float(np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1).min()))
    if intra == 0:
        return math.inf if inter > 0 else 0.0
    return inter / intra


def centroid_angles(groups: dict) -> dict:
    """Angle in [0, 2*pi) of each key centroid around the mean of all centroids."""
    keys = list(groups)
    cents = np.stack([np.asarray(groups[k], dtype=float).reshape(-1, 2).mean(axis=0) for k in keys])
    rel = cents - cents.mean(axis=0)
    if np.allclose(rel, 0.0, atol=1e-15):
        raise DegenerateData("all key centroids coincide")
    ang = np.mod(np.arctan2(rel[:, 1], rel[:, 0]), 2 * np.pi)
    ang[ang >= 2 * np.pi] = 0.0  # mod of a tiny negative angle can round up to 2*pi
    return {k: float(a) for k, a in zip(keys, ang)}


def triple_orientation(a: float, b: float, c: float) -> int:
    """+1 if a, b, c are met counter-clockwise in that cyclic order, -1 if clockwise."""
    s = math.sin(b - a) + math.sin(c - b) + math.sin(a - c)
    return (s > 0) - (s < 0)


def _untie(reference, angles) -> list[float]:
    out: list[float] = []
    for k in reference:
        a = angles[k]
        for _ in range(1000):
            if all(abs(math.remainder(a - b, 2 * math.pi)) > TIE_NUDGE / 2 for b in out):
                break
            a += TIE_NUDGE
        else:
            raise TiedAngles(f"could not separate the angle of {k}")
        out.append(a)
    return out


def circular_kendall_tau(reference, angles: dict) -> float:
    """Circular rank correlation between a reference cycle and observed angles.

    Every triple of keys is oriented once in the reference cycle (indices
    ascend, so counter-clockwise) and once by its angles; tau is
    ``(concordant - discordant) / C(n, 3)``.
    """
    reference = list(reference)
    if len(reference) < 3:
        raise ValueError("need at least three keys")
    missing = [k for k in reference if k not in angles]
    if missing:
        raise ValueError(f"no angle for keys {missing}")
    theta = _untie(reference, angles)
    total = 0
    n_triples = 0
    for i, j, k in combinations(range(len(reference)), 3):
        o = triple_orientation(theta[i], theta[j], theta[k])
        if o == 0:
            raise TiedAngles(f"keys {reference[i]}, {reference[j]}, {reference[k]} are not separable")
        total += o
        n_triples += 1
    return total / n_triples


def latent_report(points: list[LatentPoint], piece_id: str = "") -> tuple[LatentReport, list[LatentPoint]]:
    """PCA plus all three metrics for one piece's 12 transpositions."""
    projected, var = pca2(points)
    groups = group_by_key(projected)
    mode = next(iter(groups)).mode
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", CoincidentCentroids)
        db = davies_bouldin(groups)
    degenerate = bool(caught) or not math.isfinite(db)
    dn = dunn_index(groups)
    angles = centroid_angles(groups)
    ref = [k for k in camelot_order(mode) if k in angles]
    tau = circular_kendall_tau(ref, angles)
    return LatentReport(piece_id, db, dn, tau, angles, var, degenerate=degenerate), projected
