"""Internal torus-grid machinery: cached symbol grids and resolvent sums.

Periodic trapezoidal sums over the d-torus are spectrally accurate for
integrands analytic in a strip around real momenta; the strip width is set by
the distance from the energy argument to the band.  Grids are midpoint-shifted
so that high-symmetry points never coincide with nodes, cached per
(symbol, n_points) up to a memory cap, and streamed in slabs beyond it.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from typing import Sequence

import numpy as np

from .model import BandWindow, DispersionSymbol

# per-entry cap ~134 MB of float64; larger grids are streamed, never stored
_CACHE_ENTRY_LIMIT = 1 << 24
_CACHE_TOTAL_LIMIT = 3 * _CACHE_ENTRY_LIMIT
_grid_cache: "OrderedDict[tuple, np.ndarray]" = OrderedDict()


def grid_axis(n_points: int, shift: float = 0.5) -> np.ndarray:
    return (np.arange(n_points) + shift) * (2.0 * np.pi / n_points)


def _is_separable(symbol: DispersionSymbol) -> bool:
    return all(sum(1 for c in n if c != 0) <= 1 for n, _ in symbol.hoppings)


def _axis_profiles(symbol: DispersionSymbol, n_points: int) -> list[np.ndarray]:
    """For separable symbols: real per-axis profiles whose broadcast sum is the grid."""
    axis = grid_axis(n_points)
    profiles = [np.zeros(n_points) for _ in range(symbol.dimension)]
    onsite = 0.0
    for n, amp in symbol.hoppings:
        nz = [j for j, c in enumerate(n) if c != 0]
        if not nz:
            onsite += amp.real
            continue
        j = nz[0]
        profiles[j] += (amp * np.exp(1j * axis * n[j])).real
    profiles[0] = profiles[0] + onsite
    return profiles


def _phase_vectors(symbol: DispersionSymbol, n_points: int) -> list[list[np.ndarray]]:
    """Per-hopping, per-dimension phase vectors exp(i * k_axis * n_j)."""
    axis = grid_axis(n_points)
    out = []
    for n, _ in symbol.hoppings:
        out.append([np.exp(1j * axis * nj) for nj in n])
    return out


def _evaluate_slab(symbol: DispersionSymbol, phases: list[list[np.ndarray]], rows: slice) -> np.ndarray:
    """Symbol values on grid rows along axis 0, full grid along remaining axes."""
    d = symbol.dimension
    n_points = phases[0][0].size
    if _is_separable(symbol):
        profiles = _axis_profiles(symbol, n_points)
        acc = profiles[0][rows].reshape((-1,) + (1,) * (d - 1)).copy()
        for j in range(1, d):
            acc = acc + profiles[j].reshape((1,) * j + (-1,) + (1,) * (d - 1 - j))
        return acc
    shape = (rows.stop - rows.start,) + (n_points,) * (d - 1)
    acc = np.zeros(shape, dtype=complex)
    for (_, amp), ph in zip(symbol.hoppings, phases):
        term = amp * ph[0][rows]
        term = term.reshape((-1,) + (1,) * (d - 1))
        for j in range(1, d):
            term = term * ph[j].reshape((1,) * j + (-1,) + (1,) * (d - 1 - j))
        acc += term
    return acc.real


def grid_values(symbol: DispersionSymbol, n_points: int) -> np.ndarray:
    """Real symbol values on the full midpoint-shifted product grid (cached)."""
    size = n_points**symbol.dimension
    if size > _CACHE_ENTRY_LIMIT:
        raise MemoryError(f"grid of {size} points exceeds the cache cap; use streamed sums")
    key = (symbol, n_points)
    if key in _grid_cache:
        _grid_cache.move_to_end(key)
        return _grid_cache[key]
    phases = _phase_vectors(symbol, n_points)
    values = _evaluate_slab(symbol, phases, slice(0, n_points))
    _grid_cache[key] = values
    total = sum(v.size for v in _grid_cache.values())
    while total > _CACHE_TOTAL_LIMIT and len(_grid_cache) > 1:
        _, dropped = _grid_cache.popitem(last=False)
        total -= dropped.size
    return values


def _diff_phase(diff: Sequence[int], n_points: int, shape_like: tuple[int, ...], row0: int = 0) -> np.ndarray:
    axis = grid_axis(n_points)
    d = len(diff)
    out = np.ones((1,) * d, dtype=complex)
    for j, dj in enumerate(diff):
        if dj == 0:
            continue
        vec = np.exp(1j * axis * dj)
        if j == 0 and row0 > 0:
            vec = vec
        out = out * vec.reshape((1,) * j + (-1,) + (1,) * (d - 1 - j))
    return out


def resolvent_sums(
    symbol: DispersionSymbol,
    z: complex,
    diffs: Sequence[tuple[int, ...]],
    n_points: int,
) -> dict[tuple[int, ...], complex]:
    """Trapezoidal sums of exp(i k.diff) / (z - Ee(k)) over the torus grid.

    Evaluates every requested lattice difference in one pass; streams over
    slabs of the first axis when the grid exceeds the cache cap.
    """
    d = symbol.dimension
    size = n_points**d
    diffs = [tuple(int(c) for c in dd) for dd in diffs]
    axis = grid_axis(n_points)
    zc = complex(z)
    real_path = zc.imag == 0.0

    if size <= _CACHE_ENTRY_LIMIT:
        ee = grid_values(symbol, n_points)
        weight = 1.0 / (zc.real - ee) if real_path else 1.0 / (zc - ee)
        out: dict[tuple[int, ...], complex] = {}
        for diff in diffs:
            if all(c == 0 for c in diff):
                out[diff] = complex(np.mean(weight))
                continue
            acc = weight
            for j, dj in enumerate(diff):
                if dj == 0:
                    continue
                vec = np.exp(1j * axis * dj)
                acc = acc * vec.reshape((1,) * j + (-1,) + (1,) * (d - 1 - j))
            out[diff] = complex(np.mean(acc))
        return out

    # streamed slabs along axis 0
    phases = _phase_vectors(symbol, n_points)
    row_vecs = {diff: np.exp(1j * axis * diff[0]) if diff[0] != 0 else None for diff in diffs}
    tail_phases: dict[tuple[int, ...], np.ndarray] = {}
    for diff in diffs:
        acc = np.ones((1,) * (d - 1), dtype=complex)
        nontrivial = False
        for j, dj in enumerate(diff[1:], start=1):
            if dj == 0:
                continue
            nontrivial = True
            vec = np.exp(1j * axis * dj)
            acc = acc * vec.reshape((1,) * (j - 1) + (-1,) + (1,) * (d - 1 - j))
        tail_phases[diff] = acc if nontrivial else np.ones((1,) * (d - 1), dtype=complex)

    chunk = max(1, _CACHE_ENTRY_LIMIT // (4 * n_points ** (d - 1)))
    totals = {diff: 0.0 + 0.0j for diff in diffs}
    for start in range(0, n_points, chunk):
        rows = slice(start, min(start + chunk, n_points))
        ee = _evaluate_slab(symbol, phases, rows)
        weight = 1.0 / (zc.real - ee) if real_path else 1.0 / (zc - ee)
        for diff in diffs:
            term = weight * tail_phases[diff]
            partial = term.reshape(term.shape[0], -1).sum(axis=1)
            rv = row_vecs[diff]
            if rv is not None:
                partial = partial * rv[rows]
            totals[diff] += complex(partial.sum())
    return {diff: val / size for diff, val in totals.items()}


def pairwise_diffs(sites: Sequence[tuple[int, ...]]) -> list[tuple[int, ...]]:
    seen: dict[tuple[int, ...], None] = {}
    for a in sites:
        for b in sites:
            seen[tuple(int(x) - int(y) for x, y in zip(a, b))] = None
    return list(seen)


def assemble_matrix(
    sums: dict[tuple[int, ...], complex], sites: Sequence[tuple[int, ...]]
) -> np.ndarray:
    m = len(sites)
    out = np.empty((m, m), dtype=complex)
    for i, a in enumerate(sites):
        for j, b in enumerate(sites):
            out[i, j] = sums[tuple(int(x) - int(y) for x, y in zip(a, b))]
    return out


def gradient_scale(symbol: DispersionSymbol) -> float:
    """Sum over dimensions of per-axis gradient bounds; governs in-band strips."""
    return sum(
        sum(abs(n[j]) * abs(a) for n, a in symbol.hoppings) for j in range(symbol.dimension)
    )


def analytic_margin(symbol: DispersionSymbol, window: BandWindow, z: complex) -> float:
    """Half-width of the strip around real momenta where 1/(z - Ee) stays analytic."""
    zc = complex(z)
    g1 = gradient_scale(symbol)
    if window.e_minus <= zc.real <= window.e_plus:
        return abs(zc.imag) / g1 if zc.imag != 0.0 else 0.0
    dist = math.hypot(
        max(window.e_minus - zc.real, zc.real - window.e_plus, 0.0), zc.imag
    )
    curved = 0.8 * math.sqrt(2.0 * dist / symbol.hessian_bound())
    return max(dist / g1, curved)


def round_points(n: int) -> int:
    """Round up to a multiple of 64 (power of two below 64)."""
    if n <= 64:
        return 1 << int(math.ceil(math.log2(max(n, 2))))
    return 64 * int(math.ceil(n / 64))


def points_for(
    symbol: DispersionSymbol,
    window: BandWindow,
    z: complex,
    qtol: float,
    n_base: int,
    n_max: int,
) -> int:
    margin = analytic_margin(symbol, window, z)
    if margin <= 0.0:
        return n_base
    need = math.log(1.0 / qtol) / margin
    return round_points(max(n_base, min(n_max, int(need) + 1)))
