"""Density-based grouping of confirmed per-channel modes into system modes.

Frequencies are clustered with DBSCAN under a relative neighborhood rule
(|p - q| <= eps_rel * min(p, q)); with min_pts=1 that reduces to connected
components of the neighborhood graph, which is exactly what the per-stride
mode grouping uses. Classification into local / inter-area is by a
configurable frequency boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import Mode, wrap_phase

EPS_REL_DEFAULT = 0.03
BOUNDARY_HZ_DEFAULT = 0.8


class Classification(str, Enum):
    LOCAL = "local"
    INTER_AREA = "inter_area"


@dataclass(frozen=True)
class SystemMode:
    """A cross-channel oscillation: representative frequency, member modes,
    classification, and the normalized amplitude/phase pattern."""

    frequency_hz: float
    members: dict[str, Mode]
    classification: Classification
    mode_shape: dict[str, tuple[float, float]]


# Boundary points (exactly eps apart) are neighbors; the guard keeps that
# true under float rounding, mirroring the frequency-match rule in core.
REL_EPS_GUARD = 1.0 + 1e-12


def _neighbor_matrix(points: np.ndarray, eps_rel: float) -> np.ndarray:
    diff = np.abs(points[:, None] - points[None, :])
    scale = np.minimum(points[:, None], points[None, :])
    return diff <= eps_rel * scale * REL_EPS_GUARD


def dbscan_labels(points, eps_rel: float, min_pts: int) -> np.ndarray:
    """Cluster labels (-1 for outliers), deterministic in the input order.

    Points are visited in ascending value order, so equal inputs always get
    equal labels regardless of how the caller arranged them.
    """
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    labels = np.full(n, -2)  # -2 = unvisited, -1 = outlier
    if n == 0:
        return labels
    neighbors = _neighbor_matrix(pts, eps_rel)
    counts = neighbors.sum(axis=1)
    order = np.lexsort((np.arange(n), pts))
    cluster = -1
    for start in order:
        if labels[start] != -2:
            continue
        if counts[start] < min_pts:
            labels[start] = -1
            continue
        cluster += 1
        labels[start] = cluster
        frontier = [int(start)]
        while frontier:
            point = frontier.pop()
            if counts[point] < min_pts:
                continue  # border point: joins but does not expand
            for neighbor in np.flatnonzero(neighbors[point]):
                neighbor = int(neighbor)
                if labels[neighbor] == -1:
                    labels[neighbor] = cluster
                elif labels[neighbor] == -2:
                    labels[neighbor] = cluster
                    frontier.append(neighbor)
    return labels


def dbscan_1d(
    points, eps_rel: float, min_pts: int
) -> tuple[list[list[float]], list[float]]:
    """Clusters (sorted by smallest member, members ascending) and outliers."""
    if not (eps_rel > 0):
        raise ValueError(f"eps_rel must be > 0, got {eps_rel}")
    if min_pts < 1:
        raise ValueError(f"min_pts must be >= 1, got {min_pts}")
    pts = [float(p) for p in points]
    labels = dbscan_labels(pts, eps_rel, min_pts)
    clusters: dict[int, list[float]] = {}
    outliers: list[float] = []
    for value, label in zip(pts, labels):
        if label < 0:
            outliers.append(value)
        else:
            clusters.setdefault(int(label), []).append(value)
    ordered = sorted((sorted(vals) for vals in clusters.values()), key=lambda c: c[0])
    return ordered, sorted(outliers)


def classify(frequency_hz: float, boundary_hz: float = BOUNDARY_HZ_DEFAULT) -> Classification:
    """Inter-area below the boundary, local at or above it."""
    if not (boundary_hz > 0):
        raise ValueError(f"boundary_hz must be > 0, got {boundary_hz}")
    if frequency_hz < boundary_hz:
        return Classification.INTER_AREA
    return Classification.LOCAL


def mode_shape(members: dict[str, Mode]) -> dict[str, tuple[float, float]]:
    """Normalized (amplitude, phase) per channel.

    Amplitudes are scaled so the largest is 1; phases are rotated so the
    largest-amplitude channel (ties broken by channel id) sits at 0.
    """
    if not members:
        raise ValueError("mode_shape of an empty member set")
    reference = min(members, key=lambda ch: (-members[ch].amplitude, ch))
    ref_phase = members[reference].phase
    max_amp = members[reference].amplitude
    shape = {}
    for channel in sorted(members):
        mode = members[channel]
        amp = mode.amplitude / max_amp if max_amp > 0 else 0.0
        shape[channel] = (amp, wrap_phase(mode.phase - ref_phase))
    return shape


def cluster_modes(
    confirmed: dict[str, list[Mode]],
    eps_rel: float = EPS_REL_DEFAULT,
    boundary_hz: float = BOUNDARY_HZ_DEFAULT,
) -> list[SystemMode]:
    """Group one stride's confirmed channel modes into system modes.

    A channel contributing several modes inside one cluster keeps only its
    largest-amplitude one. Output is sorted by representative frequency and
    is invariant to the channel iteration order.
    """
    flat: list[tuple[str, Mode]] = []
    for channel in sorted(confirmed):
        for mode in sorted(confirmed[channel], key=lambda m: m.angular_frequency):
            flat.append((channel, mode))
    if not flat:
        return []
    freqs = [mode.frequency_hz for _, mode in flat]
    labels = dbscan_labels(freqs, eps_rel, min_pts=1)

    grouped: dict[int, list[tuple[str, Mode]]] = {}
    for (channel, mode), label in zip(flat, labels):
        grouped.setdefault(int(label), []).append((channel, mode))

    system_modes = []
    for label in sorted(grouped):
        members: dict[str, Mode] = {}
        for channel, mode in grouped[label]:
            best = members.get(channel)
            if best is None or mode.amplitude > best.amplitude:
                members[channel] = mode
        rep = float(np.mean([m.frequency_hz for m in members.values()]))
        system_modes.append(
            SystemMode(
                frequency_hz=rep,
                members=members,
                classification=classify(rep, boundary_hz),
                mode_shape=mode_shape(members),
            )
        )
    system_modes.sort(key=lambda sm: sm.frequency_hz)
    return system_modes
