"""Frozen-coefficient spectral data: local Landau levels and their unions.

At a point with field invariants a_1 <= ... <= a_n and potential branches
V_mu, the local model spectrum consists of the levels

    Lambda(k, mu) = sum_j (2 k_j + 1) a_j + V_mu,   k in Z_+^n.

In 2D (n = 1) the single invariant is the field intensity b(x).  Over a
region the union of local levels forms per-branch intervals; their merged
union, its gaps, and the interface set of sites whose levels meet an energy
window are the ingredients of every spectral diagnostic downstream.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import (DegenerateInvariantsError, EmptyMaskError, EmptySetError,
                     InvalidSpecError, WindowError)
from .lattice import DistanceField, distance_to_set


def skew_invariants(mat, skew_tol=1e-12):
    """Positive invariants a_j of a real skew matrix (eigenvalues +-i a_j).

    Computed through the symmetric matrix M^T M, whose eigenvalues are the
    a_j^2 in pairs; backward-stable and free of complex arithmetic.
    """
    m = np.asarray(mat, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2 != 0:
        raise InvalidSpecError("skew matrix must be square of even dimension")
    scale = max(np.abs(m).max(), np.finfo(float).tiny)
    if np.abs(m + m.T).max() > skew_tol * scale:
        raise InvalidSpecError("matrix is not skew-symmetric within tolerance")
    w = np.linalg.eigvalsh(m.T @ m)
    w = np.sqrt(np.clip(w, 0.0, None))
    a = 0.5 * (w[0::2] + w[1::2])
    if a[0] < 1e-10 * max(a[-1], np.finfo(float).tiny):
        raise DegenerateInvariantsError(
            f"smallest invariant {a[0]:.3g} is numerically zero; the 2-form "
            f"degenerates")
    return a


@dataclass(frozen=True)
class LandauLevel:
    value: float
    k: tuple
    mu: int


@dataclass
class LandauSet:
    """All levels below ``cutoff`` at one point, ascending and complete."""

    entries: list
    cutoff: float

    @property
    def values(self):
        return np.array([e.value for e in self.entries])


def landau_levels(a, v, cutoff):
    """Enumerate every level (k, mu) with value <= cutoff.

    Walks Z_+^n with the per-coordinate bound k_j <= (cutoff - sum a - min v)
    / (2 a_j), which is finite because all a_j > 0.
    """
    a = np.asarray(a, dtype=float)
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if a.ndim != 1 or a.size < 1:
        raise InvalidSpecError("need at least one invariant a_j")
    if np.any(a <= 0):
        raise InvalidSpecError("all invariants a_j must be positive")
    cutoff = float(cutoff)
    base = float(a.sum())
    vmin = float(v.min())

    entries = []
    n = a.size

    def walk(j, kin_sum, k_prefix):
        if kin_sum + vmin > cutoff:
            return
        if j == n:
            for mu, vm in enumerate(v):
                val = kin_sum + vm
                if val <= cutoff:
                    entries.append(LandauLevel(value=val, k=tuple(k_prefix), mu=mu))
            return
        k_j = 0
        while kin_sum + 2 * k_j * a[j] + vmin <= cutoff:
            walk(j + 1, kin_sum + 2 * k_j * a[j], k_prefix + [k_j])
            k_j += 1

    walk(0, base, [])
    entries.sort(key=lambda e: (e.value, e.k, e.mu))
    return LandauSet(entries=entries, cutoff=cutoff)


@dataclass
class SigmaUnion:
    """Disjoint merged level intervals over a region, plus raw branches.

    ``intervals`` are merged closed [lo, hi] ascending with the contributing
    branch labels; ``branches`` keeps the unmerged per-(component, k, mu)
    intervals.  All endpoints are clipped at the cutoff.
    """

    intervals: list       # (lo, hi, labels) with labels a tuple of (k, mu)
    branches: list        # (k, mu, lo, hi)
    cutoff: float
    n_region_sites: int = 0

    @property
    def bounds(self):
        los = np.array([iv[0] for iv in self.intervals])
        his = np.array([iv[1] for iv in self.intervals])
        return los, his


def _region_components(lattice, mask):
    """Connected components of the masked sites under 4-adjacency."""
    idx = np.flatnonzero(mask)
    remap = -np.ones(lattice.n_sites, dtype=np.int64)
    remap[idx] = np.arange(idx.size)
    src, dst = lattice.edge_src, lattice.edge_dst
    keep = mask[src] & mask[dst]
    rows = remap[src[keep]]
    cols = remap[dst[keep]]
    graph = sp.coo_matrix((np.ones(rows.size), (rows, cols)),
                          shape=(idx.size, idx.size))
    n_comp, labels = connected_components(graph, directed=False)
    return [idx[labels == c] for c in range(n_comp)]


def _merge(branch_intervals, cutoff):
    pieces = sorted((lo, hi, (k, mu)) for (k, mu, lo, hi) in branch_intervals)
    merged = []
    for lo, hi, label in pieces:
        if merged and lo <= merged[-1][1]:
            mlo, mhi, labels = merged[-1]
            merged[-1] = (mlo, max(mhi, hi), labels + (label,))
        else:
            merged.append((lo, hi, (label,)))
    return merged


def sigma_region(b, potential, region=None, cutoff=None):
    """Union of local levels over a site region (2D, single invariant b).

    Per connected component and per branch (k, mu) the continuous image of a
    connected region is an interval, represented by the [min, max] of the
    sampled values; overlapping branches merge.
    """
    lattice = b.lattice
    if cutoff is None:
        raise InvalidSpecError("cutoff energy is required")
    if region is None:
        region = np.ones(lattice.n_sites, dtype=bool)
    region = np.asarray(region, dtype=bool)
    if not region.any():
        raise EmptyMaskError("sigma region is empty")
    bvals = b.site_values
    if np.any(bvals[region] <= 0):
        raise InvalidSpecError("field intensity must be positive on the region")

    veigs = potential.eigenvalues  # (n_sites, r)
    vmin_all = float(veigs[region].min())
    bmin_all = float(bvals[region].min())
    branches = []
    for comp in _region_components(lattice, region):
        bc = bvals[comp]
        vc = veigs[comp]
        k = 0
        while (2 * k + 1) * bmin_all + vmin_all <= cutoff:
            lam = (2 * k + 1) * bc[:, None] + vc
            lo = lam.min(axis=0)
            hi = lam.max(axis=0)
            for mu in range(vc.shape[1]):
                if lo[mu] <= cutoff:
                    branches.append((k, mu, float(lo[mu]),
                                     float(min(hi[mu], cutoff))))
            k += 1
    merged = _merge(branches, cutoff)
    return SigmaUnion(intervals=merged, branches=sorted(set(branches)),
                      cutoff=float(cutoff), n_region_sites=int(region.sum()))


@dataclass
class InterfaceSet:
    """Sites whose local levels meet the window, with distances and complement."""

    mask: np.ndarray
    omega: np.ndarray
    window: tuple
    distance: DistanceField
    lattice: object


def interface_set(lattice, b, potential, window, cutoff):
    """Sitewise test of whether some level (2k+1) b + V_mu lands in the window."""
    a_win, b_win = float(window[0]), float(window[1])
    if not (a_win < b_win):
        raise WindowError(f"window [{a_win}, {b_win}] is empty")
    if b_win > cutoff:
        raise WindowError(f"window top {b_win} exceeds the cutoff {cutoff}")
    bvals = b.site_values
    veigs = potential.eigenvalues
    mask = np.zeros(lattice.n_sites, dtype=bool)
    for mu in range(veigs.shape[1]):
        vm = veigs[:, mu]
        # smallest k with (2k+1) b + V >= a_win, clamped at 0
        k_lo = np.ceil((a_win - vm - bvals) / (2.0 * bvals))
        k_lo = np.maximum(k_lo, 0.0)
        mask |= (2.0 * k_lo + 1.0) * bvals + vm <= b_win
    omega = ~mask
    if mask.any():
        dist = distance_to_set(lattice, mask)
    else:
        dist = DistanceField(values=np.full(lattice.n_sites, np.inf),
                             target=mask, lattice=lattice)
    return InterfaceSet(mask=mask, omega=omega, window=(a_win, b_win),
                        distance=dist, lattice=lattice)


def omega_collar(lattice, interface, p):
    """Region {x : d(x, complement of the interface set) <= p^(-1/4)}.

    This is the chart-center collar on which the norm lower bound is actually
    proved; levels over it define the restricted spectral union.
    """
    if not interface.omega.any():
        raise EmptyMaskError("interface complement is empty")
    d_omega = distance_to_set(lattice, interface.omega)
    return d_omega.values <= float(p) ** -0.25


def dist_to_sigma(lam, sigma):
    """Distance from an energy to the merged interval union (0 if inside)."""
    return float(distances_to_sigma(np.array([lam]), sigma)[0])


def distances_to_sigma(lams, sigma):
    """Vectorized distance from energies to the union."""
    if not sigma.intervals:
        raise EmptySetError("spectral union is empty")
    lams = np.asarray(lams, dtype=float)
    los, his = sigma.bounds
    below = los[None, :] - lams[:, None]
    above = lams[:, None] - his[None, :]
    per_interval = np.maximum(np.maximum(below, above), 0.0)
    return per_interval.min(axis=1)


def find_gaps(sigma):
    """Maximal open intervals between consecutive merged intervals."""
    if not sigma.intervals:
        raise EmptySetError("spectral union is empty")
    gaps = []
    for (lo1, hi1, _), (lo2, hi2, _) in zip(sigma.intervals, sigma.intervals[1:]):
        if lo2 > hi1:
            gaps.append((hi1, lo2))
    return gaps
