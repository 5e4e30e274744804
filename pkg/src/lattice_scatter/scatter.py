"""Finite-cell scattering: T-matrix, on-shell S-matrix, winding, bound states.

The scattering data of a finite-rank perturbation are built from boundary
values of the restricted free resolvent on the perturbation cell.  The
on-shell S-matrix is assembled so that unitarity holds identically for any
Hermitian resolvent input; its total eigenphase winding across the band is
compared against the independently computed bound-state count.

Energies near a band edge are represented as (edge, distance) pairs rather
than plain floats, so threshold-scale structure far below the floating-point
resolution of the energy remains addressable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np
from scipy.linalg import eig as dense_eig
from scipy.optimize import brentq, linear_sum_assignment, minimize_scalar

from . import green as green_mod
from .green import QuadratureSpec, RestrictedResolvent, Side
from .model import BandWindow, DispersionSymbol, capacity, rescale_to_b, rescale_to_E

__all__ = [
    "Perturbation",
    "OnShellSMatrix",
    "LevinsonReport",
    "LatticeResolventProvider",
    "CellProblem",
    "EnergyNode",
    "t_matrix",
    "s_matrix",
    "eigenphases",
    "time_delay_trace",
    "time_delay_trace_energy",
    "winding",
    "WindingResult",
    "bound_states",
    "BoundState",
    "embedded_scan",
    "levinson_check",
]


class NearSingularError(RuntimeError):
    """1 - G V is numerically singular: a bound state or resonance sits at this energy."""

    def __init__(self, message: str, smallest_singular_value: float):
        super().__init__(message)
        self.smallest_singular_value = smallest_singular_value


class HerglotzViolationError(RuntimeError):
    """The spectral-weight matrix came out indefinite beyond clamping tolerance."""


class ThresholdCaseError(RuntimeError):
    """A root sits inside the threshold margin at a band edge; excluded from scope."""


class RefinementFailureError(RuntimeError):
    """Adaptive phase tracking could not reconcile its two winding estimators."""


@dataclass(frozen=True)
class Perturbation:
    """Hermitian perturbation supported on an ordered finite cell of sites."""

    sites: tuple[tuple[int, ...], ...]
    matrix: np.ndarray

    def __post_init__(self):
        sites = tuple(tuple(int(c) for c in s) for s in self.sites)
        object.__setattr__(self, "sites", sites)
        v = np.asarray(self.matrix, dtype=complex)
        if v.shape != (len(sites), len(sites)):
            raise ValueError("perturbation matrix shape must match the cell size")
        if np.max(np.abs(v - v.conj().T)) > 1e-12 * max(1.0, float(np.abs(v).max())):
            raise ValueError("perturbation matrix must be Hermitian")
        object.__setattr__(self, "matrix", (v + v.conj().T) / 2.0)

    @staticmethod
    def point(site: Sequence[int], strength: float) -> "Perturbation":
        return Perturbation((tuple(site),), np.array([[strength]], dtype=complex))

    @staticmethod
    def diagonal(sites: Sequence[Sequence[int]], values: Sequence[float]) -> "Perturbation":
        return Perturbation(tuple(tuple(s) for s in sites), np.diag(np.asarray(values, dtype=complex)))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    def is_weak_coupling(self, c0: float) -> bool:
        return self.norm < c0


# ---------------------------------------------------------------------------
# energy-path nodes and resolvent providers
# ---------------------------------------------------------------------------

Stage = Literal["below", "bottom_in", "interior", "top_in", "above"]
_STAGE_ORDER = {"below": 0, "bottom_in": 1, "interior": 2, "top_in": 3, "above": 4}


@dataclass(frozen=True)
class EnergyNode:
    """A point on the energy path, possibly expressed as an offset from a band edge."""

    stage: Stage
    coord: float  # energy for "interior"; ln(delta) for edge stages

    @property
    def is_edge_form(self) -> bool:
        return self.stage != "interior"

    def sort_key(self) -> tuple[int, float]:
        order = _STAGE_ORDER[self.stage]
        if self.stage == "interior":
            return order, self.coord
        # ascending energy means ascending delta below/at the bottom, descending at the top
        sign = 1.0 if self.stage in ("bottom_in", "above") else -1.0
        return order, sign * self.coord

    def energy(self, window: BandWindow) -> float:
        if self.stage == "interior":
            return self.coord
        delta = math.exp(self.coord)
        if self.stage == "below":
            return window.e_minus - delta
        if self.stage == "bottom_in":
            return window.e_minus + delta
        if self.stage == "top_in":
            return window.e_plus - delta
        return window.e_plus + delta

    @staticmethod
    def interior(energy: float) -> "EnergyNode":
        return EnergyNode("interior", float(energy))

    @staticmethod
    def edge_offset(edge: Literal["top", "bottom"], delta: float, inside: bool) -> "EnergyNode":
        if delta <= 0:
            raise ValueError("delta must be positive")
        if edge == "top":
            stage: Stage = "top_in" if inside else "above"
        else:
            stage = "bottom_in" if inside else "below"
        return EnergyNode(stage, math.log(delta))


def _node_midpoint(a: EnergyNode, b: EnergyNode, window: BandWindow, node_for) -> EnergyNode:
    if a.stage == b.stage:
        return EnergyNode(a.stage, 0.5 * (a.coord + b.coord))
    # mixed stages: bisect in energy and let the regime dispatch pick the form
    return node_for(0.5 * (a.energy(window) + b.energy(window)))


class LatticeResolventProvider:
    """Boundary values of the free resolvent on a cell, with node-aware dispatch.

    Near-edge nodes are served by the edge model so the provider stays
    accurate down to threshold-scale distances; interior nodes go through the
    epsilon ladder.  Values are cached per (node, side).
    """

    def __init__(
        self,
        symbol: DispersionSymbol,
        sites: Sequence[Sequence[int]],
        quadrature: QuadratureSpec | None = None,
    ):
        self.symbol = symbol
        self.sites = tuple(tuple(int(c) for c in s) for s in sites)
        self.quadrature = quadrature or QuadratureSpec()
        self.window = green_mod.window_for(symbol)
        self._cache: dict[tuple, np.ndarray] = {}

    def node_for(self, energy: float) -> EnergyNode:
        switch = green_mod.EDGE_SWITCH_FRAC * self.window.bandwidth
        d_top = energy - self.window.e_plus
        d_bot = self.window.e_minus - energy
        if abs(d_top) <= switch and abs(d_top) <= abs(d_bot):
            return EnergyNode.edge_offset("top", max(abs(d_top), 1e-300), d_top < 0)
        if abs(d_bot) <= switch:
            return EnergyNode.edge_offset("bottom", max(abs(d_bot), 1e-300), d_bot < 0)
        return EnergyNode.interior(energy)

    def matrix(self, node: EnergyNode, side: Side) -> np.ndarray:
        key = (node, side)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if node.stage == "interior":
            res = green_mod.boundary_values(
                green_mod.ResolventRequest(
                    symbol=self.symbol, sites=self.sites, energy=node.coord, side=side,
                    quadrature=self.quadrature,
                )
            )
            out = res.matrix
        else:
            edge = "top" if node.stage in ("top_in", "above") else "bottom"
            inside = node.stage in ("top_in", "bottom_in")
            res = green_mod.near_edge_resolvent(
                self.symbol, self.sites, edge, math.exp(node.coord), inside, side,
                self.quadrature,
            )
            out = res.matrix
        self._cache[key] = out
        return out

    def outside_band(self, node: EnergyNode) -> bool:
        return node.stage in ("below", "above")


@dataclass
class CellProblem:
    """A scattering problem: a resolvent provider plus a perturbation on its cell."""

    provider: LatticeResolventProvider
    perturbation: Perturbation

    def __post_init__(self):
        if getattr(self.provider, "sites", None) is not None:
            if tuple(self.provider.sites) != tuple(self.perturbation.sites):
                raise ValueError("perturbation cell must match the provider sites")

    @property
    def window(self) -> BandWindow:
        return self.provider.window

    @property
    def cell_size(self) -> int:
        return len(self.perturbation.sites)


# ---------------------------------------------------------------------------
# T-matrix and S-matrix
# ---------------------------------------------------------------------------


def t_matrix(
    pert: Perturbation,
    g: RestrictedResolvent | np.ndarray,
    cross_check_tol: float = 1e-10,
    singular_tol: float = 1e-12,
) -> np.ndarray:
    """T = V (1 - G V)^{-1}, validated against the transposed-order form."""
    gm = g.matrix if isinstance(g, RestrictedResolvent) else np.asarray(g, dtype=complex)
    v = pert.matrix
    eye = np.eye(len(v))
    a = eye - gm @ v
    svals = np.linalg.svd(a, compute_uv=False)
    scale = max(1.0, float(np.linalg.norm(gm @ v, 2)))
    if svals[-1] < singular_tol * scale:
        raise NearSingularError(
            f"1 - G V is singular to working precision (smallest singular value {svals[-1]:.3e}); "
            "a bound state or resonance sits at this energy",
            float(svals[-1]),
        )
    t = v @ np.linalg.inv(a)
    t_alt = np.linalg.solve(eye - v @ gm, v)
    scale = max(1.0, float(np.abs(t).max()))
    if np.max(np.abs(t - t_alt)) > cross_check_tol * scale:
        raise RuntimeError("the two T-matrix factorizations disagree beyond tolerance")
    return t


@dataclass(frozen=True)
class OnShellSMatrix:
    """Unitary on-shell scattering matrix on the cell at a fixed energy."""

    energy: float
    b: float | None
    matrix: np.ndarray
    unitarity_defect: float
    clamped_weight: float  # total negative spectral weight clamped to zero


def _s_from_g(gplus: np.ndarray, v: np.ndarray, herglotz_tol: float = 1e-8):
    """Assemble S = 1 - 2i Y (1 - V G_+)^{-1} V Y with Y the root of the spectral weight.

    The weight X = -(G_+ - G_+^dag)/2i is clamped at zero from below; the
    clamped weight feeds back into G_+ so unitarity holds by construction.
    """
    r = (gplus + gplus.conj().T) / 2.0
    x = -(gplus - gplus.conj().T) / 2j
    evals, vecs = np.linalg.eigh(x)
    scale = max(1.0, float(np.max(np.abs(evals))))
    if evals.min() < -herglotz_tol * scale:
        raise HerglotzViolationError(
            f"spectral weight has eigenvalue {evals.min():.3e}; "
            "raise the quadrature settings of the resolvent"
        )
    clamped = float(-np.sum(evals[evals < 0]))
    evals = np.clip(evals, 0.0, None)
    x_pos = (vecs * evals) @ vecs.conj().T
    y = (vecs * np.sqrt(evals)) @ vecs.conj().T
    g_cons = r - 1j * x_pos
    eye = np.eye(len(v))
    core = np.linalg.solve(eye - v @ g_cons, v)
    s = eye - 2j * (y @ core @ y)
    defect = float(np.linalg.norm(s.conj().T @ s - eye, 2))
    return s, defect, clamped


def s_matrix(problem: CellProblem, energy: float | EnergyNode) -> OnShellSMatrix:
    """On-shell S-matrix at an energy (or energy-path node).

    Off the band the spectral weight vanishes and S is exactly the identity.
    """
    node = energy if isinstance(energy, EnergyNode) else problem.provider.node_for(float(energy))
    gplus = problem.provider.matrix(node, "plus")
    s, defect, clamped = _s_from_g(gplus, problem.perturbation.matrix)
    e_val = node.energy(problem.window)
    b_val = None
    if problem.window.contains(e_val):
        b_val = rescale_to_b(problem.window, e_val)
    return OnShellSMatrix(energy=e_val, b=b_val, matrix=s, unitarity_defect=defect, clamped_weight=clamped)


def eigenphases(s: OnShellSMatrix, defect_tol: float = 1e-6) -> np.ndarray:
    """Sorted phases of the unitary eigenvalues, in (-pi, pi]."""
    if s.unitarity_defect > defect_tol:
        raise RuntimeError(
            f"unitarity defect {s.unitarity_defect:.2e} exceeds {defect_tol:.0e}; phases unreliable"
        )
    w = np.linalg.eigvals(s.matrix)
    ph = np.angle(w)
    ph[ph <= -np.pi + 1e-15] = np.pi
    return np.sort(ph)


# ---------------------------------------------------------------------------
# time delay
# ---------------------------------------------------------------------------


def _trace_log_derivative(problem: CellProblem, energies: Sequence[float], h: float) -> complex:
    """(1/i) Tr(S^dag dS) with a five-point stencil over the given equispaced arguments."""
    mats = [s_matrix(problem, e).matrix for e in energies]
    ds = (-mats[4] + 8 * mats[3] - 8 * mats[1] + mats[0]) / (12 * h)
    s0 = mats[2]
    return complex(np.trace(s0.conj().T @ ds) / 1j)


def time_delay_trace(
    problem: CellProblem, b: float, step: float | None = None, imag_tol: float = 1e-6
) -> float:
    """Trace of the time-delay operator at rescaled energy b, via central differences.

    The step adapts once to the local phase velocity; a residual imaginary
    part beyond tolerance signals a differentiation-step failure.
    """
    window = problem.window
    h = step if step is not None else 0.02
    for _ in range(2):
        bs = [b + k * h for k in (-2, -1, 0, 1, 2)]
        es = [rescale_to_E(window, bb) for bb in bs]
        val = _trace_log_derivative(problem, es, h)
        speed = abs(val)
        h_new = min(0.02, 0.2 / max(speed, 1.0))
        if step is not None or h_new >= 0.8 * h:
            break
        h = h_new
    if abs(val.imag) > imag_tol * max(1.0, abs(val.real)):
        raise RuntimeError(
            f"time-delay trace has imaginary residue {val.imag:.2e}; adjust the step"
        )
    return float(val.real)


def time_delay_trace_energy(
    problem: CellProblem, energy: float, step: float | None = None, imag_tol: float = 1e-6
) -> float:
    """Trace of S^dag dS/dE / i at fixed energy (the unrescaled parametrization)."""
    window = problem.window
    h = step if step is not None else 1e-3 * window.bandwidth
    es = [energy + k * h for k in (-2, -1, 0, 1, 2)]
    val = _trace_log_derivative(problem, es, h)
    if abs(val.imag) > imag_tol * max(1.0, abs(val.real)):
        raise RuntimeError(
            f"time-delay trace has imaginary residue {val.imag:.2e}; adjust the step"
        )
    return float(val.real)


# ---------------------------------------------------------------------------
# winding
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WindingResult:
    value: float              # phase-increment integral of arg det S over the band, / 2pi
    eigenphase_value: float   # branch-tracked per-channel increments, / 2pi
    n_nodes: int
    tail_bound: float         # ||S - 1|| at the deepest in-band nodes
    max_increment: float

    @property
    def estimator_gap(self) -> float:
        return abs(self.value - self.eigenphase_value)


def _initial_path(problem: CellProblem, n_interior: int, delta_deep: float) -> list[EnergyNode]:
    window = problem.window
    switch = green_mod.EDGE_SWITCH_FRAC * window.bandwidth
    lo = window.e_minus + switch
    hi = window.e_plus - switch
    nodes: list[EnergyNode] = []
    n_edge = 12
    for delta in np.geomspace(delta_deep, switch, n_edge):
        nodes.append(EnergyNode.edge_offset("bottom", float(delta), inside=True))
    nodes.extend(EnergyNode.interior(float(e)) for e in np.linspace(lo, hi, n_interior))
    for delta in np.geomspace(switch, delta_deep, n_edge):
        nodes.append(EnergyNode.edge_offset("top", float(delta), inside=True))
    return nodes


def winding(
    problem: CellProblem,
    tolerance: float = 1e-3,
    n_interior: int = 256,
    phase_step: float = 0.3,
    delta_deep: float | None = None,
    tail_tol: float = 0.05,
    max_nodes: int = 20000,
) -> WindingResult:
    """Winding of the on-shell scattering phases across the band.

    Two independent estimators are computed on one adaptively refined energy
    path: the increment sum of arg det S, and branch-tracked eigenphase
    increments with eigenvector-overlap assignment.  They must agree within
    ``tolerance``.  The path starts and ends at S = 1 outside the band; the
    in-band approach is deepened until ||S - 1|| drops below ``tail_tol``.
    """
    window = problem.window
    if delta_deep is None:
        delta_deep = 1e-9 * window.bandwidth

    sdata: dict[EnergyNode, tuple[np.ndarray, complex]] = {}

    def s_at(node: EnergyNode) -> tuple[np.ndarray, complex]:
        hit = sdata.get(node)
        if hit is None:
            m = s_matrix(problem, node).matrix
            hit = (m, complex(np.linalg.det(m)))
            sdata[node] = hit
        return hit

    # deepen the edge approach until the S = 1 tails are within tolerance
    tail = 0.0
    for edge in ("bottom", "top"):
        depth = delta_deep
        for _ in range(40):
            m, _ = s_at(EnergyNode.edge_offset(edge, depth, inside=True))
            t = float(np.linalg.norm(m - np.eye(len(m)), 2))
            if t <= tail_tol:
                tail = max(tail, t)
                break
            depth *= 1e-2
            if depth < 1e-290:
                raise ThresholdCaseError(
                    f"scattering matrix does not settle to 1 at the {edge} edge"
                )
        else:
            raise ThresholdCaseError(f"scattering matrix does not settle to 1 at the {edge} edge")
        if edge == "bottom":
            depth_bottom = depth
        else:
            depth_top = depth

    nodes = _initial_path(problem, n_interior, delta_deep)
    nodes = [n for n in nodes if not (n.stage == "bottom_in" and math.exp(n.coord) < depth_bottom)]
    nodes = [n for n in nodes if not (n.stage == "top_in" and math.exp(n.coord) < depth_top)]
    nodes.insert(0, EnergyNode.edge_offset("bottom", depth_bottom, inside=True))
    nodes.append(EnergyNode.edge_offset("top", depth_top, inside=True))
    nodes.sort(key=EnergyNode.sort_key)

    node_set = set(nodes)
    for _ in range(60):
        dets = [s_at(n)[1] for n in nodes]
        incs = np.angle(np.asarray(dets[1:]) / np.asarray(dets[:-1]))
        bad = np.abs(incs) > phase_step
        if not bad.any():
            break
        if len(nodes) > max_nodes:
            raise RefinementFailureError(
                f"phase refinement exceeded {max_nodes} nodes without settling"
            )
        new_nodes = list(nodes)
        inserted = 0
        for i in np.nonzero(bad)[0]:
            mid = _node_midpoint(nodes[i], nodes[i + 1], window, problem.provider.node_for)
            if mid not in node_set:
                new_nodes.insert(i + 1 + inserted, mid)
                node_set.add(mid)
                inserted += 1
        if inserted == 0:
            raise RefinementFailureError("phase refinement stalled: repeated midpoints")
        nodes = new_nodes
    else:
        raise RefinementFailureError("phase refinement did not settle in 60 passes")

    dets = np.asarray([s_at(n)[1] for n in nodes])
    incs = np.angle(dets[1:] / dets[:-1])
    # closing hops from and to exact identity outside the band
    total_det = float(np.angle(dets[0]) + incs.sum() + (-np.angle(dets[-1])))
    winding_det = total_det / (2 * np.pi)

    # eigenphase tracking with overlap assignment
    dim = problem.cell_size
    prev_vecs = None
    prev_w = None
    channel_total = 0.0
    first_phases = None
    for n in nodes:
        m, _ = s_at(n)
        w, vecs = dense_eig(m)
        if prev_vecs is not None:
            overlap = np.abs(prev_vecs.conj().T @ vecs)
            row, col = linear_sum_assignment(-overlap)
            w = w[col]
            vecs = vecs[:, col]
            channel_total += float(np.angle(w / prev_w).sum())
        else:
            first_phases = np.angle(w)
        prev_w, prev_vecs = w, vecs
    closing = float(first_phases.sum() - np.angle(prev_w).sum())
    winding_eig = (channel_total + closing) / (2 * np.pi)

    result = WindingResult(
        value=winding_det,
        eigenphase_value=winding_eig,
        n_nodes=len(nodes),
        tail_bound=tail,
        max_increment=float(np.max(np.abs(incs))) if incs.size else 0.0,
    )
    if result.estimator_gap > tolerance:
        raise RefinementFailureError(
            f"winding estimators disagree: {winding_det:.6f} vs {winding_eig:.6f}"
        )
    return result


# ---------------------------------------------------------------------------
# bound states
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundState:
    energy: float
    multiplicity: int
    edge: str | None = None      # which edge the root was resolved against, if any
    edge_distance: float | None = None  # distance from that edge (exact even when tiny)


def _det_at(problem: CellProblem, node: EnergyNode) -> float:
    g = problem.provider.matrix(node, "minus")
    d = np.linalg.det(np.eye(problem.cell_size) - g @ problem.perturbation.matrix)
    if abs(d.imag) > 1e-10 * max(1.0, abs(d)):
        raise RuntimeError(f"determinant off the band came out complex: {d!r}")
    return float(d.real)


def _sigma_min_at(problem: CellProblem, node: EnergyNode) -> float:
    g = problem.provider.matrix(node, "minus")
    a = np.eye(problem.cell_size) - g @ problem.perturbation.matrix
    return float(np.linalg.svd(a, compute_uv=False)[-1])


def _multiplicity_at(problem: CellProblem, node: EnergyNode, kernel_tol: float = 1e-8) -> int:
    g = problem.provider.matrix(node, "minus")
    a = np.eye(problem.cell_size) - g @ problem.perturbation.matrix
    svals = np.linalg.svd(a, compute_uv=False)
    return int(np.sum(svals < kernel_tol * max(1.0, svals[0])))


def _scan_roots_on_axis(
    problem: CellProblem,
    coords: np.ndarray,
    node_of: Callable[[float], EnergyNode],
    kernel_tol: float,
) -> list[tuple[EnergyNode, int]]:
    """Sign-change and minimum-dip scan of det(1 - G V) along a coordinate axis."""
    vals = np.array([_det_at(problem, node_of(c)) for c in coords])
    roots: list[tuple[EnergyNode, int]] = []
    taken: list[float] = []

    def record(c_root: float):
        if any(abs(c_root - t) < 1e-9 * max(1.0, abs(t)) for t in taken):
            return
        node = node_of(c_root)
        mult = _multiplicity_at(problem, node, kernel_tol)
        if mult == 0:
            # polish did not land exactly on the kernel; accept if the dip is deep
            if _sigma_min_at(problem, node) < 1e-6:
                mult = 1
            else:
                return
        taken.append(c_root)
        roots.append((node, mult))

    for i in range(len(coords) - 1):
        if vals[i] == 0.0:
            record(float(coords[i]))
        elif vals[i] * vals[i + 1] < 0:
            c_root = brentq(lambda c: _det_at(problem, node_of(c)), coords[i], coords[i + 1], xtol=1e-13)
            record(float(c_root))
    # even-multiplicity roots: dips of sigma_min without sign change
    sig = np.array([_sigma_min_at(problem, node_of(c)) for c in coords])
    for i in range(1, len(coords) - 1):
        if sig[i] < sig[i - 1] and sig[i] < sig[i + 1] and sig[i] < 1e-3:
            res = minimize_scalar(
                lambda c: _sigma_min_at(problem, node_of(c)),
                bounds=(float(coords[i - 1]), float(coords[i + 1])),
                method="bounded",
                options={"xatol": 1e-13},
            )
            if res.fun < 1e-7:
                record(float(res.x))
    return roots


def bound_states(
    problem: CellProblem,
    threshold_margin: float | None = None,
    delta_floor: float | None = None,
    reach: float | None = None,
    kernel_tol: float = 1e-8,
    n_scan: int = 64,
) -> list[BoundState]:
    """Eigenvalues of the perturbed operator outside the band.

    Roots of det(1 - G(E) V) are scanned linearly away from the band and
    logarithmically toward each edge, down to ``delta_floor``.  A root closer
    to an edge than ``threshold_margin`` is a threshold case and raises.
    """
    window = problem.window
    bw = window.bandwidth
    if threshold_margin is None:
        threshold_margin = 1e-6 * bw
    if delta_floor is None:
        delta_floor = threshold_margin
    if reach is None:
        # a bound state at distance r from the band needs ||V|| ||G|| >= 1 and
        # the resolvent norm decays like 1/r, so ||V|| bounds the search reach
        reach = problem.perturbation.norm + 0.25 * bw
    switch = green_mod.EDGE_SWITCH_FRAC * bw

    out: list[BoundState] = []
    for edge in ("bottom", "top"):
        # log-scan from the floor out to the edge-model switch
        n_log = max(40, int(10 * math.log10(switch / delta_floor)))
        log_coords = np.log(np.geomspace(delta_floor, switch, n_log))
        roots = _scan_roots_on_axis(
            problem,
            log_coords,
            lambda u, e=edge: EnergyNode.edge_offset(e, math.exp(u), inside=False),
            kernel_tol,
        )
        for node, mult in roots:
            delta = math.exp(node.coord)
            if delta <= 1.01 * delta_floor or delta < threshold_margin:
                raise ThresholdCaseError(
                    f"root at distance {delta:.3e} from the {edge} edge lies inside the "
                    f"threshold margin {threshold_margin:.3e}; excluded from scope"
                )
            sign = 1.0 if edge == "top" else -1.0
            e_edge = window.e_plus if edge == "top" else window.e_minus
            out.append(
                BoundState(
                    energy=float(e_edge + sign * delta),
                    multiplicity=mult,
                    edge=edge,
                    edge_distance=delta,
                )
            )
        # linear scan beyond the switch
        if edge == "top":
            coords = np.linspace(window.e_plus + switch, window.e_plus + reach, n_scan)
        else:
            coords = np.linspace(window.e_minus - reach, window.e_minus - switch, n_scan)
        roots = _scan_roots_on_axis(problem, coords, EnergyNode.interior, kernel_tol)
        for node, mult in roots:
            out.append(BoundState(energy=node.coord, multiplicity=mult))
    out.sort(key=lambda s: s.energy)
    return out


# ---------------------------------------------------------------------------
# embedded eigenvalues
# ---------------------------------------------------------------------------


def _kernel_basis(mat: np.ndarray, tol: float) -> np.ndarray:
    _, svals, vh = np.linalg.svd(mat)
    scale = max(1.0, float(svals[0])) if svals.size else 1.0
    dim = int(np.sum(svals < tol * scale))
    if mat.shape[0] < mat.shape[1]:
        extra = mat.shape[1] - mat.shape[0]
        dim += extra
    if dim == 0:
        return np.zeros((mat.shape[1], 0))
    return vh[-dim:].conj().T


def embedded_scan(
    problem: CellProblem,
    e_grid: Sequence[float] | None = None,
    kernel_tol: float = 1e-8,
    v_range_cutoff: float = 1e-10,
) -> list[dict]:
    """In-band eigenvalue candidates: joint kernels of the real-part condition and the weight.

    The perturbation is compressed to its numerically well-conditioned range
    (singular values above ``v_range_cutoff`` of the largest); the reported
    cutoff travels with each candidate.  Rank decisions within a factor 10 of
    the singular-value threshold are flagged indeterminate.
    """
    window = problem.window
    if e_grid is None:
        pad = 0.03 * window.bandwidth
        e_grid = np.linspace(window.e_minus + pad, window.e_plus - pad, 33)
    v = problem.perturbation.matrix
    u, svals, _ = np.linalg.svd(v)
    keep = svals > v_range_cutoff * max(svals[0], 1e-300)
    pi_v = u[:, keep].conj().T  # isometry onto the usable range of V
    v_inv_small = np.linalg.inv(pi_v @ v @ pi_v.conj().T)
    candidates = []
    for e in e_grid:
        node = problem.provider.node_for(float(e))
        g = problem.provider.matrix(node, "minus")
        re_g = (g + g.conj().T) / 2.0
        im_g = (g - g.conj().T) / 2j
        a = v_inv_small - pi_v @ re_g @ pi_v.conj().T
        ker_s = _kernel_basis(a, kernel_tol)
        ker_t = _kernel_basis(pi_v @ im_g @ pi_v.conj().T, kernel_tol)
        if ker_s.shape[1] == 0 or ker_t.shape[1] == 0:
            continue
        # intersection dimension via principal angles
        cos_angles = np.linalg.svd(ker_s.conj().T @ ker_t, compute_uv=False)
        dim = int(np.sum(cos_angles > 1 - 1e-8))
        indeterminate = bool(np.any((cos_angles > 1 - 1e-7) & (cos_angles <= 1 - 1e-8)))
        if dim > 0 or indeterminate:
            candidates.append(
                {
                    "energy": float(e),
                    "dimension": dim,
                    "indeterminate": indeterminate,
                    "v_range_cutoff": v_range_cutoff,
                }
            )
    return candidates


# ---------------------------------------------------------------------------
# the finite-cell counting identity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LevinsonReport:
    bound_states: tuple[BoundState, ...]
    embedded: tuple[dict, ...]
    winding: float
    winding_eigenphase: float
    residual: float
    metadata: dict

    @property
    def count(self) -> int:
        return sum(s.multiplicity for s in self.bound_states) + sum(
            c["dimension"] for c in self.embedded
        )

    def to_json(self) -> str:
        payload = {
            "bound_states": [
                {
                    "energy": s.energy,
                    "multiplicity": s.multiplicity,
                    "edge": s.edge,
                    "edge_distance": s.edge_distance,
                }
                for s in self.bound_states
            ],
            "embedded": list(self.embedded),
            "count": self.count,
            "winding": self.winding,
            "winding_eigenphase": self.winding_eigenphase,
            "residual": self.residual,
            "metadata": self.metadata,
        }
        return json.dumps(payload, indent=2)


def levinson_check(
    problem: CellProblem,
    winding_tolerance: float = 1e-3,
    threshold_margin: float | None = None,
    delta_floor: float | None = None,
    scan_embedded: bool = True,
    n_interior: int = 256,
) -> LevinsonReport:
    """Bound-state count against minus the scattering-phase winding.

    Both sides are computed independently: the count from resolvent-determinant
    roots (plus any in-band candidates), the winding from adaptive phase
    tracking of the on-shell scattering matrix.
    """
    symbol = getattr(problem.provider, "symbol", None)
    if symbol is not None and symbol.dimension < 3:
        import warnings

        warnings.warn("the counting identity is only theorem-grade in dimension >= 3", stacklevel=2)
    states = bound_states(
        problem, threshold_margin=threshold_margin, delta_floor=delta_floor
    )
    embedded = tuple(embedded_scan(problem)) if scan_embedded else ()
    # keep the phase path clear of the shallowest root on each side
    delta_deep = 1e-9 * problem.window.bandwidth
    shallowest = min(
        (s.edge_distance for s in states if s.edge_distance is not None), default=None
    )
    if shallowest is not None:
        delta_deep = min(delta_deep, shallowest * 1e-3)
    res = winding(
        problem, tolerance=winding_tolerance, delta_deep=delta_deep, n_interior=n_interior
    )
    count = sum(s.multiplicity for s in states) + sum(c["dimension"] for c in embedded)
    residual = abs(count + res.value)
    return LevinsonReport(
        bound_states=tuple(states),
        embedded=embedded,
        winding=res.value,
        winding_eigenphase=res.eigenphase_value,
        residual=residual,
        metadata={
            "winding_nodes": res.n_nodes,
            "winding_tail_bound": res.tail_bound,
            "winding_tolerance": winding_tolerance,
            "threshold_margin": threshold_margin,
            "cell": [list(s) for s in problem.perturbation.sites],
        },
    )
