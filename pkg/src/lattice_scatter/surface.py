"""Surface potentials: fibered solvers, supercell reduction, state densities.

A potential supported on the surface hyperplane decomposes the scattering
problem into transverse fibers over the surface momentum.  Constant
potentials fiber exactly; covariant random families are periodized with a
supercell so that each Bloch momentum of the reduced zone yields a finite
cell problem that the scattering machinery solves exactly.  The surface-state
density (bound-state count per surface site) is compared against the winding
density of the scattering phase, fiber by fiber and in ensemble average.

The trace per unit surface volume of a periodized operator is realized as the
Bloch-momentum average of the fiber trace divided by the period.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np
from scipy.sparse import identity as sparse_identity
from scipy.sparse import lil_matrix
from scipy.sparse.linalg import expm_multiply

from . import green as green_mod
from . import scatter as scatter_mod
from ._util import parallel_map
from .green import QuadratureSpec, Side
from .model import (
    BandWindow,
    DispersionSymbol,
    FiberSymbol,
    LatticeGeometry,
    fiber_symbol,
)
from .scatter import (
    CellProblem,
    EnergyNode,
    LatticeResolventProvider,
    Perturbation,
    ThresholdCaseError,
)

__all__ = [
    "CovariantPotential",
    "SupercellProblem",
    "SurfaceDensityReport",
    "FIBER_QUADRATURE",
    "constant_fiber_solve",
    "fibered_levinson",
    "supercell_resolvent",
    "supercell_levinson",
    "disorder_average",
    "time_probe",
    "TimeProbeCurve",
    "fiber_bound_state",
    "gaussian_packet",
]

# transverse fibers are low-dimensional, so a denser fixed grid is cheap; the
# sweep machinery guards itself by phase telescoping, not per-call error bounds
FIBER_QUADRATURE = QuadratureSpec(n_points=256, n_max=1024, qtol=1e-7, error_pass=False)


# ---------------------------------------------------------------------------
# covariant potential families
# ---------------------------------------------------------------------------


def _site_uniform(seed: int, n: int) -> float:
    """Deterministic uniform(0,1) at one site: a pure function of (seed, site)."""
    key = (int(seed) << 64) | (int(n) & 0xFFFFFFFFFFFFFFFF)
    gen = np.random.Generator(np.random.Philox(key=key))
    return float(gen.random())


@dataclass(frozen=True)
class CovariantPotential:
    """Shift-covariant family of diagonal surface potentials (one surface direction).

    ``offset`` realizes the shift action on the sample point: advancing the
    offset by m and sampling at n equals sampling the original at n + m,
    exactly, for every kind.
    """

    kind: Literal["constant", "periodic", "iid", "quasiperiodic"]
    amplitude: float = 1.0
    values: tuple[float, ...] = ()
    seed: int = 0
    frequency: float = (math.sqrt(5.0) - 1.0) / 2.0
    phase: float = 0.0
    offset: int = 0

    def __post_init__(self):
        if self.kind == "periodic" and not self.values:
            raise ValueError("periodic potential needs explicit period values")

    def sample(self, n1: Sequence[int] | np.ndarray) -> np.ndarray:
        sites = np.asarray(n1, dtype=int) + self.offset
        if self.kind == "constant":
            return np.full(sites.shape, float(self.amplitude))
        if self.kind == "periodic":
            vals = np.asarray(self.values, dtype=float)
            return vals[np.mod(sites, len(vals))]
        if self.kind == "iid":
            flat = [self.amplitude * (2.0 * _site_uniform(self.seed, int(n)) - 1.0) for n in sites.ravel()]
            return np.asarray(flat).reshape(sites.shape)
        # quasiperiodic rotation orbit
        return self.amplitude * np.cos(2.0 * np.pi * (self.frequency * sites + self.phase))

    def shifted(self, m: int) -> "CovariantPotential":
        return CovariantPotential(
            kind=self.kind,
            amplitude=self.amplitude,
            values=self.values,
            seed=self.seed,
            frequency=self.frequency,
            phase=self.phase,
            offset=self.offset + int(m),
        )

    @property
    def bound(self) -> float:
        if self.kind == "periodic":
            return float(np.max(np.abs(self.values))) if self.values else 0.0
        return abs(self.amplitude)

    def to_json_dict(self) -> dict:
        out = {"kind": self.kind, "amplitude": self.amplitude, "offset": self.offset}
        if self.kind == "periodic":
            out["values"] = list(self.values)
        if self.kind == "iid":
            out["seed"] = self.seed
            out["dist"] = "uniform"
        if self.kind == "quasiperiodic":
            out["frequency"] = self.frequency
            out["phase"] = self.phase
        return out

    @staticmethod
    def from_json_dict(data: dict) -> "CovariantPotential":
        return CovariantPotential(
            kind=data["kind"],
            amplitude=float(data.get("amplitude", 1.0)),
            values=tuple(data.get("values", ())),
            seed=int(data.get("seed", 0)),
            frequency=float(data.get("frequency", (math.sqrt(5.0) - 1.0) / 2.0)),
            phase=float(data.get("phase", 0.0)),
            offset=int(data.get("offset", 0)),
        )


# ---------------------------------------------------------------------------
# fiber providers and the supercell reduction
# ---------------------------------------------------------------------------

_fiber_provider_registry: dict[tuple, LatticeResolventProvider] = {}


def _fiber_provider(
    symbol: DispersionSymbol,
    geometry: LatticeGeometry,
    k1: tuple[float, ...],
    quadrature: QuadratureSpec,
) -> LatticeResolventProvider:
    key = (symbol, geometry, k1, quadrature)
    prov = _fiber_provider_registry.get(key)
    if prov is None:
        fib = fiber_symbol(symbol, geometry, k1)
        origin = ((0,) * geometry.d2,)
        prov = LatticeResolventProvider(fib.transverse, origin, quadrature=quadrature)
        _fiber_provider_registry[key] = prov
    return prov


@dataclass
class SupercellProblem:
    """Bloch-reduced surface problem at one reduced momentum theta.

    The period-L potential couples the L fibers of the theta coset; the
    restricted resolvent on the L surface sites of one period is the coset
    average of fiber resolvents with relative Bloch phases.
    """

    symbol: DispersionSymbol
    geometry: LatticeGeometry
    period: int
    theta: float
    quadrature: QuadratureSpec = field(default_factory=lambda: FIBER_QUADRATURE)

    def __post_init__(self):
        if self.geometry.d1 != 1:
            raise ValueError("supercell reduction supports one surface direction")
        if self.period < 1:
            raise ValueError("period must be at least 1")
        if not (0.0 <= self.theta < 2.0 * np.pi / self.period + 1e-12):
            raise ValueError("theta must lie in the reduced zone [0, 2 pi / L)")
        self.coset = tuple(
            (self.theta + 2.0 * np.pi * j / self.period,) for j in range(self.period)
        )
        self.fibers = [
            _fiber_provider(self.symbol, self.geometry, k1, self.quadrature) for k1 in self.coset
        ]
        e_lo = min(p.window.e_minus for p in self.fibers)
        e_hi = max(p.window.e_plus for p in self.fibers)
        self.window = BandWindow(e_lo, e_hi)
        self.sites = tuple((a,) for a in range(self.period))

    # -- node dispatch compatible with the scattering layer ----------------

    def node_for(self, energy: float) -> EnergyNode:
        switch = green_mod.EDGE_SWITCH_FRAC * self.window.bandwidth
        d_top = energy - self.window.e_plus
        d_bot = self.window.e_minus - energy
        if abs(d_top) <= switch and abs(d_top) <= abs(d_bot):
            return EnergyNode.edge_offset("top", max(abs(d_top), 1e-300), d_top < 0)
        if abs(d_bot) <= switch:
            return EnergyNode.edge_offset("bottom", max(abs(d_bot), 1e-300), d_bot < 0)
        return EnergyNode.interior(energy)

    def _fiber_value(self, j: int, node: EnergyNode, side: Side) -> complex:
        prov = self.fibers[j]
        fwin = prov.window
        if node.is_edge_form:
            edge = "top" if node.stage in ("top_in", "above") else "bottom"
            union_edge = self.window.e_plus if edge == "top" else self.window.e_minus
            own_edge = fwin.e_plus if edge == "top" else fwin.e_minus
            gap = abs(union_edge - own_edge)
            if gap < 1e-11 * self.window.bandwidth:
                # this fiber attains the union edge: keep the offset exact
                fnode = EnergyNode(node.stage, node.coord)
            else:
                fnode = prov.node_for(node.energy(self.window))
        else:
            fnode = prov.node_for(node.coord)
        return complex(prov.matrix(fnode, side)[0, 0])

    def matrix(self, node: EnergyNode, side: Side) -> np.ndarray:
        values = [self._fiber_value(j, node, side) for j in range(self.period)]
        a = np.arange(self.period)
        out = np.zeros((self.period, self.period), dtype=complex)
        for j, (k1,) in enumerate(self.coset):
            phase = np.exp(1j * (a[:, None] - a[None, :]) * k1)
            out += values[j] * phase
        return out / self.period

    def outside_band(self, node: EnergyNode) -> bool:
        return node.stage in ("below", "above")


def supercell_resolvent(
    symbol: DispersionSymbol,
    geometry: LatticeGeometry,
    period: int,
    theta: float,
    z: complex | None = None,
    energy: float | None = None,
    side: Side = "minus",
    quadrature: QuadratureSpec = FIBER_QUADRATURE,
) -> np.ndarray:
    """Restricted resolvent of the theta-reduced problem on one period of surface sites."""
    prob = SupercellProblem(symbol, geometry, period, theta, quadrature)
    if z is not None:
        values = [
            green_mod.fiber_green(
                fiber_symbol(symbol, geometry, k1), z=z, quadrature=quadrature
            ).matrix[0, 0]
            for k1 in prob.coset
        ]
        a = np.arange(period)
        out = np.zeros((period, period), dtype=complex)
        for j, (k1,) in enumerate(prob.coset):
            out += values[j] * np.exp(1j * (a[:, None] - a[None, :]) * k1)
        return out / period
    if energy is None:
        raise ValueError("specify z or energy")
    return prob.matrix(prob.node_for(float(energy)), side)


# ---------------------------------------------------------------------------
# density reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FiberRecord:
    parameter: float           # k1 for exact fibers, theta for supercells
    count: float
    winding: float
    residual: float
    excluded: bool = False
    reason: str = ""


@dataclass(frozen=True)
class SurfaceDensityReport:
    """Density of surface states against the winding density of the phase."""

    lhs: float
    rhs: float
    per_fiber: tuple[FiberRecord, ...]
    n_excluded: int
    mean_lhs: float | None = None
    mean_rhs: float | None = None
    stderr_lhs: float | None = None
    stderr_rhs: float | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)

    def to_json(self) -> str:
        payload = {
            "lhs_density_of_surface_states": self.lhs,
            "rhs_winding_density": self.rhs,
            "residual": self.residual,
            "n_excluded": self.n_excluded,
            "per_fiber": [
                {
                    "parameter": r.parameter,
                    "count": r.count,
                    "winding": r.winding,
                    "residual": r.residual,
                    "excluded": r.excluded,
                    "reason": r.reason,
                }
                for r in self.per_fiber
            ],
            "ensemble": {
                "mean_lhs": self.mean_lhs,
                "mean_rhs": self.mean_rhs,
                "stderr_lhs": self.stderr_lhs,
                "stderr_rhs": self.stderr_rhs,
            },
            "metadata": self.metadata,
        }
        return json.dumps(payload, indent=2)


# ---------------------------------------------------------------------------
# constant surface potential: exact fibering
# ---------------------------------------------------------------------------


def _fiber_problem(
    symbol: DispersionSymbol,
    geometry: LatticeGeometry,
    k1: Sequence[float],
    lam: float,
    quadrature: QuadratureSpec,
) -> CellProblem:
    prov = _fiber_provider(symbol, geometry, tuple(float(x) for x in k1), quadrature)
    pert = Perturbation(( (0,) * geometry.d2, ), np.array([[lam]], dtype=complex))
    return CellProblem(provider=prov, perturbation=pert)


def constant_fiber_solve(
    symbol: DispersionSymbol,
    geometry: LatticeGeometry,
    lam: float,
    k1: Sequence[float],
    quadrature: QuadratureSpec = FIBER_QUADRATURE,
    delta_floor: float = 1e-250,
) -> tuple[int, list[float], CellProblem]:
    """Bound states of one constant-potential fiber: count, energies, and the cell problem.

    The scalar condition 1 = lam * g(k1, E) is solved outside the fiber band;
    roots exponentially close to a fiber edge are resolved in the edge-offset
    coordinate.
    """
    if lam == 0.0:
        return 0, [], _fiber_problem(symbol, geometry, k1, 0.0, quadrature)
    problem = _fiber_problem(symbol, geometry, k1, lam, quadrature)
    states = scatter_mod.bound_states(
        problem, threshold_margin=delta_floor, delta_floor=delta_floor
    )
    return sum(s.multiplicity for s in states), [s.energy for s in states], problem


def fibered_levinson(
    symbol: DispersionSymbol,
    geometry: LatticeGeometry,
    lam: float,
    k1_grid: Sequence[Sequence[float]] | np.ndarray | int = 16,
    quadrature: QuadratureSpec = FIBER_QUADRATURE,
    fiber_tolerance: float = 1e-3,
    max_excluded_fraction: float = 0.01,
    threads: int = 1,
) -> SurfaceDensityReport:
    """Surface-state density of a constant potential against the winding density.

    The density side counts fiber bound states over the surface momentum
    grid; the winding side integrates the fiber scattering phases.  Each
    fiber symbol is checked for a single pair of band extrema; failures are
    excluded and counted, and more than ``max_excluded_fraction`` of
    exclusions fails the run.
    """
    if isinstance(k1_grid, (int, np.integer)):
        pts = (np.arange(int(k1_grid)) + 0.5) * (2.0 * np.pi / int(k1_grid))
        k1_grid = [(float(t),) * 1 for t in pts]
        if geometry.d1 != 1:
            raise ValueError("pass an explicit k1 grid when d1 > 1")

    def solve_one(k1) -> FiberRecord:
        param = float(k1[0]) if len(k1) == 1 else float(np.linalg.norm(k1))
        try:
            fib = fiber_symbol(symbol, geometry, k1)
            crit = green_mod.interior_critical_values(fib.transverse)
            count, _, problem = constant_fiber_solve(symbol, geometry, lam, k1, quadrature)
            w = scatter_mod.winding(problem, tolerance=fiber_tolerance, n_interior=96)
            return FiberRecord(
                parameter=param,
                count=count,
                winding=w.value,
                residual=abs(count + w.value),
            )
        except (ThresholdCaseError, scatter_mod.RefinementFailureError) as exc:
            return FiberRecord(param, math.nan, math.nan, math.nan, excluded=True, reason=str(exc))

    records = parallel_map(solve_one, list(k1_grid), threads)
    kept = [r for r in records if not r.excluded]
    n_exc = len(records) - len(kept)
    if n_exc > max_excluded_fraction * len(records):
        raise RuntimeError(
            f"{n_exc} of {len(records)} fibers failed; exceeding the exclusion budget"
        )
    lhs = float(np.mean([r.count for r in kept]))
    rhs = float(-np.mean([r.winding for r in kept]))
    return SurfaceDensityReport(
        lhs=lhs,
        rhs=rhs,
        per_fiber=tuple(records),
        n_excluded=n_exc,
        metadata={"lam": lam, "n_fibers": len(records), "fiber_tolerance": fiber_tolerance},
    )


# ---------------------------------------------------------------------------
# supercell reduction of covariant potentials
# ---------------------------------------------------------------------------


def supercell_levinson(
    symbol: DispersionSymbol,
    geometry: LatticeGeometry,
    sample_values: Sequence[float],
    theta_grid: int = 32,
    quadrature: QuadratureSpec = FIBER_QUADRATURE,
    fiber_tolerance: float = 1e-3,
    delta_floor: float = 1e-250,
    threads: int = 1,
) -> SurfaceDensityReport:
    """Surface-state and winding densities of one periodized potential sample.

    The sample (one period of the diagonal surface potential) is solved
    exactly at each reduced Bloch momentum; densities are per surface site,
    i.e. the theta-averaged fiber count and winding divided by the period.
    Any fiber residual above ``fiber_tolerance`` fails the run.
    """
    values = np.asarray(sample_values, dtype=float)
    period = len(values)
    thetas = (np.arange(theta_grid) + 0.5) * (2.0 * np.pi / period / theta_grid)

    def solve_theta(theta: float) -> FiberRecord:
        prob = SupercellProblem(symbol, geometry, period, float(theta), quadrature)
        pert = Perturbation.diagonal(prob.sites, values)
        cell = CellProblem(provider=prob, perturbation=pert)
        states = scatter_mod.bound_states(
            cell, threshold_margin=delta_floor, delta_floor=delta_floor
        )
        count = sum(s.multiplicity for s in states)
        shallowest = min(
            (s.edge_distance for s in states if s.edge_distance is not None), default=None
        )
        delta_deep = 1e-9 * prob.window.bandwidth
        if shallowest is not None:
            delta_deep = min(delta_deep, shallowest * 1e-3)
        w = scatter_mod.winding(
            cell, tolerance=fiber_tolerance, n_interior=96, delta_deep=delta_deep
        )
        residual = abs(count + w.value)
        if residual > fiber_tolerance:
            raise RuntimeError(
                f"fiber residual {residual:.3e} exceeds {fiber_tolerance:.0e} at theta={theta:.6f}"
            )
        return FiberRecord(parameter=float(theta), count=count, winding=w.value, residual=residual)

    records = parallel_map(solve_theta, [float(t) for t in thetas], threads)
    lhs = float(np.mean([r.count for r in records]) / period)
    rhs = float(-np.mean([r.winding for r in records]) / period)
    return SurfaceDensityReport(
        lhs=lhs,
        rhs=rhs,
        per_fiber=tuple(records),
        n_excluded=0,
        metadata={
            "period": period,
            "theta_grid": theta_grid,
            "sample": values.tolist(),
            "fiber_tolerance": fiber_tolerance,
        },
    )


def disorder_average(
    symbol: DispersionSymbol,
    geometry: LatticeGeometry,
    potential: CovariantPotential,
    period: int,
    n_samples: int,
    theta_grid: int = 32,
    master_seed: int = 0,
    quadrature: QuadratureSpec = FIBER_QUADRATURE,
    fiber_tolerance: float = 1e-3,
    threads: int = 1,
) -> SurfaceDensityReport:
    """Ensemble statistics of the supercell densities over potential samples.

    Sample seeds derive deterministically from the master seed.  The report
    carries per-sample densities in the metadata together with mean and
    standard error of both sides.
    """
    seeds = np.random.SeedSequence(master_seed).generate_state(n_samples)
    sample_rows: list[dict] = []
    all_records: list[FiberRecord] = []
    lhs_list, rhs_list = [], []
    for i in range(n_samples):
        if potential.kind == "iid":
            pot_i = CovariantPotential(kind="iid", amplitude=potential.amplitude, seed=int(seeds[i]))
        elif potential.kind == "quasiperiodic":
            pot_i = CovariantPotential(
                kind="quasiperiodic",
                amplitude=potential.amplitude,
                frequency=potential.frequency,
                phase=float(np.random.Generator(np.random.Philox(key=int(seeds[i]))).random()),
            )
        else:
            pot_i = potential
        values = pot_i.sample(np.arange(period))
        rep = supercell_levinson(
            symbol,
            geometry,
            values,
            theta_grid=theta_grid,
            quadrature=quadrature,
            fiber_tolerance=fiber_tolerance,
            threads=threads,
        )
        lhs_list.append(rep.lhs)
        rhs_list.append(rep.rhs)
        all_records.extend(rep.per_fiber)
        sample_rows.append(
            {"sample": i, "seed": int(seeds[i]), "lhs": rep.lhs, "rhs": rep.rhs,
             "max_fiber_residual": max(r.residual for r in rep.per_fiber),
             "values": list(map(float, values))}
        )
    lhs_arr, rhs_arr = np.asarray(lhs_list), np.asarray(rhs_list)

    def stderr(a: np.ndarray) -> float:
        return float(a.std(ddof=1) / math.sqrt(len(a))) if len(a) > 1 else 0.0

    return SurfaceDensityReport(
        lhs=float(lhs_arr.mean()),
        rhs=float(rhs_arr.mean()),
        per_fiber=tuple(all_records),
        n_excluded=0,
        mean_lhs=float(lhs_arr.mean()),
        mean_rhs=float(rhs_arr.mean()),
        stderr_lhs=stderr(lhs_arr),
        stderr_rhs=stderr(rhs_arr),
        metadata={
            "period": period,
            "n_samples": n_samples,
            "theta_grid": theta_grid,
            "master_seed": master_seed,
            "potential": potential.to_json_dict(),
            "samples": sample_rows,
        },
    )


# ---------------------------------------------------------------------------
# time-domain surface criterion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TimeProbeCurve:
    """Cumulative near-surface weight of an evolving state."""

    times: np.ndarray
    strip_weight: np.ndarray
    cumulative: np.ndarray
    horizon_truncated: bool

    def classify(self) -> str:
        """"surface-like" when the cumulative weight keeps growing linearly, else "bulk-like"."""
        c = self.cumulative
        n = len(c)
        early = c[n // 2] - c[n // 8]
        late = c[-1] - c[n // 2]
        if late > 0.5 * early * (self.times[-1] - self.times[n // 2]) / max(
            self.times[n // 2] - self.times[n // 8], 1e-30
        ):
            return "surface-like"
        return "bulk-like"


def _box_hamiltonian(
    symbol: DispersionSymbol,
    geometry: LatticeGeometry,
    surface_size: int,
    transverse_halfwidth: int,
    potential_values: np.ndarray | None,
):
    """Sparse box operator: periodic along the surface, open across it."""
    d1, d2 = geometry.d1, geometry.d2
    if d1 != 1:
        raise ValueError("the time probe supports one surface direction")
    nt = 2 * transverse_halfwidth + 1
    shape = (surface_size,) + (nt,) * d2
    size = int(np.prod(shape))

    def index(coords) -> int:
        return int(np.ravel_multi_index(coords, shape))

    h = lil_matrix((size, size), dtype=complex)
    grid = np.indices(shape).reshape(len(shape), -1).T
    for n, amp in symbol.hoppings:
        n1 = n[0]
        n2 = n[1:]
        for pt in grid:
            src = tuple(pt)
            dst1 = (pt[0] + n1) % surface_size
            dst2 = tuple(pt[1 + j] + n2[j] for j in range(d2))
            if any(c < 0 or c >= nt for c in dst2):
                continue
            h[index((dst1,) + dst2), index(src)] += amp
    if potential_values is not None:
        center = (transverse_halfwidth,) * d2
        for s in range(surface_size):
            i = index((s,) + center)
            h[i, i] += potential_values[s]
    return h.tocsr(), shape


def fiber_bound_state(
    symbol: DispersionSymbol,
    geometry: LatticeGeometry,
    lam: float,
    k1_index: int,
    surface_size: int,
    transverse_halfwidth: int,
) -> np.ndarray:
    """Extended surface state: a Bloch wave along the surface times a transverse bound state.

    The transverse factor is the top (lam > 0) or bottom (lam < 0) eigenvector
    of the open transverse box with the coupling at the origin; with periodic
    surface boundary conditions the product is an exact box eigenstate.
    """
    nt = 2 * transverse_halfwidth + 1
    k1 = 2.0 * np.pi * k1_index / surface_size
    fib = fiber_symbol(symbol, geometry, (k1,))
    tshape = (nt,) * geometry.d2
    tsize = int(np.prod(tshape))
    ht = np.zeros((tsize, tsize), dtype=complex)
    tgrid = np.indices(tshape).reshape(geometry.d2, -1).T
    for n2, amp in fib.transverse.hoppings:
        for pt in tgrid:
            dst = tuple(pt[j] + n2[j] for j in range(geometry.d2))
            if any(c < 0 or c >= nt for c in dst):
                continue
            ht[np.ravel_multi_index(dst, tshape), np.ravel_multi_index(tuple(pt), tshape)] += amp
    center = np.ravel_multi_index((transverse_halfwidth,) * geometry.d2, tshape)
    ht[center, center] += lam
    evals, evecs = np.linalg.eigh(ht)
    phi = evecs[:, -1] if lam > 0 else evecs[:, 0]
    bloch = np.exp(1j * k1 * np.arange(surface_size)) / math.sqrt(surface_size)
    return np.einsum("s,t->st", bloch, phi).reshape((surface_size,) + tshape).ravel()


def gaussian_packet(
    geometry: LatticeGeometry,
    surface_size: int,
    transverse_halfwidth: int,
    transverse_center: Sequence[int],
    width: float = 2.0,
    transverse_momentum: Sequence[float] | None = None,
) -> np.ndarray:
    """Normalized Gaussian wave packet centered off the surface."""
    nt = 2 * transverse_halfwidth + 1
    shape = (surface_size,) + (nt,) * geometry.d2
    coords = np.indices(shape).astype(float)
    coords[0] -= surface_size / 2.0
    psi = np.exp(-(coords[0] ** 2) / (2 * width**2)).astype(complex)
    k2 = transverse_momentum or (0.0,) * geometry.d2
    for j in range(geometry.d2):
        x = coords[1 + j] - (transverse_halfwidth + transverse_center[j])
        psi *= np.exp(-(x**2) / (2 * width**2) + 1j * k2[j] * x)
    psi = psi.ravel()
    return psi / np.linalg.norm(psi)


def time_probe(
    symbol: DispersionSymbol,
    geometry: LatticeGeometry,
    potential: CovariantPotential | None,
    surface_size: int,
    transverse_halfwidth: int,
    psi: np.ndarray,
    horizon: float,
    n_times: int = 48,
) -> TimeProbeCurve:
    """Cumulative weight of the evolving state on the width-1 strip around the surface.

    The state evolves on a box that is periodic along the surface and open
    across it.  When the ballistic cone from the initial support would reach
    the open boundary before ``horizon``, the horizon is truncated and the
    curve flagged.
    """
    values = potential.sample(np.arange(surface_size)) if potential is not None else None
    h, shape = _box_hamiltonian(symbol, geometry, surface_size, transverse_halfwidth, values)
    psi = np.asarray(psi, dtype=complex).ravel()
    if psi.size != int(np.prod(shape)):
        raise ValueError("state size does not match the box")
    psi = psi / np.linalg.norm(psi)

    # ballistic bound: transverse group speed <= 2 * per-axis gradient bound
    tcoords = np.indices(shape)[1:]
    dist = np.min(
        np.stack([np.minimum(c, 2 * transverse_halfwidth - c) for c in tcoords]), axis=0
    ).ravel()
    weight = np.abs(psi) ** 2
    support = dist[weight > 1e-6 * weight.max()]
    margin = float(support.min()) if support.size else transverse_halfwidth
    speed = 2.0 * symbol.gradient_bound()
    t_safe = margin / speed
    truncated = False
    if horizon > t_safe:
        truncated = True
        if t_safe > 0:
            warnings.warn(
                f"horizon {horizon:.2f} exceeds the reflection-safe bound {t_safe:.2f}; truncating",
                stacklevel=2,
            )
            horizon = t_safe
        else:
            warnings.warn(
                "initial state already touches the open boundary; curve may be contaminated",
                stacklevel=2,
            )

    times = np.linspace(0.0, horizon, n_times)
    states = expm_multiply(
        -1j * h, psi, start=0.0, stop=float(horizon), num=n_times, endpoint=True
    )
    # width-1 strip: all transverse coordinates within one site of the surface
    mask = (
        np.max(
            np.stack([np.abs(c - transverse_halfwidth) for c in np.indices(shape)[1:]]), axis=0
        )
        <= 1
    ).ravel()
    weights = np.array([float(np.sum(np.abs(s[mask]) ** 2)) for s in states])
    cumulative = np.concatenate([[0.0], np.cumsum((weights[1:] + weights[:-1]) / 2.0 * np.diff(times))])
    return TimeProbeCurve(times=times, strip_weight=weights, cumulative=cumulative, horizon_truncated=truncated)
