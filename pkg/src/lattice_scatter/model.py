"""Tight-binding dispersions, band geometry, energy rescaling, and the dilation flow.

A translation-invariant hopping operator on the d-dimensional lattice is
described by its finite set of hopping amplitudes.  Its Fourier symbol is a
real analytic function on the torus whose range is the single energy band
[E_-, E_+].  This module provides the band window, the logarithmic energy
rescaling that maps the open band to the real line, fiberings over a
transverse momentum, and the dilation vector field whose flow transports the
reference level surface through the band.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.integrate import solve_ivp

__all__ = [
    "DispersionSymbol",
    "LatticeGeometry",
    "BandWindow",
    "FiberSymbol",
    "laplacian",
    "eval_symbol",
    "eval_gradient",
    "band_edges",
    "critical_values",
    "rescale_to_b",
    "rescale_to_E",
    "capacity",
    "fiber_symbol",
    "dilation_vector_field",
    "flow_check",
    "symbol_to_json",
    "symbol_from_json",
]

_HERMITICITY_TOL = 1e-12


class SingularFieldError(RuntimeError):
    """Raised when the dilation field is evaluated too close to a critical point."""

    def __init__(self, message: str, gradient_norm: float):
        super().__init__(message)
        self.gradient_norm = gradient_norm


class RefinementError(RuntimeError):
    """Raised when Newton refinement of a band extremum fails to converge.

    Carries the grid-only bracket so callers can fall back to it.
    """

    def __init__(self, message: str, bracket: tuple[float, float], tolerance: float):
        super().__init__(message)
        self.bracket = bracket
        self.tolerance = tolerance


@dataclass(frozen=True)
class DispersionSymbol:
    """Finite-range hopping amplitudes defining a translation-invariant operator.

    ``hoppings`` maps lattice vectors n to complex amplitudes.  Hermiticity
    requires the amplitude at -n to be the conjugate of the one at n, which
    makes the Fourier symbol real on the torus.  The symbol must act in every
    coordinate direction.
    """

    dimension: int
    hoppings: tuple[tuple[tuple[int, ...], complex], ...]

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be a positive integer")
        hop = dict(self.hoppings)
        for n, amp in hop.items():
            if len(n) != self.dimension:
                raise ValueError(f"hopping vector {n} has wrong dimension")
            conj = tuple(-c for c in n)
            partner = hop.get(conj)
            if partner is None or abs(partner - np.conj(amp)) > _HERMITICITY_TOL * max(1.0, abs(amp)):
                raise ValueError(
                    f"non-Hermitian hoppings: amplitude at {conj} must be the conjugate of the one at {n}"
                )
        if abs(complex(hop.get((0,) * self.dimension, 0.0)).imag) > _HERMITICITY_TOL:
            raise ValueError("onsite amplitude must be real")
        for axis in range(self.dimension):
            if not any(n[axis] != 0 and abs(a) > 0 for n, a in hop.items()):
                raise ValueError(f"symbol is degenerate: no hopping acts along axis {axis}")

    @staticmethod
    def from_hoppings(dimension: int, hoppings: Mapping[Sequence[int], complex]) -> "DispersionSymbol":
        items = tuple(
            sorted(
                ((tuple(int(c) for c in n), complex(a)) for n, a in hoppings.items() if a != 0),
            )
        )
        return DispersionSymbol(dimension, items)

    @property
    def hopping_map(self) -> dict[tuple[int, ...], complex]:
        return dict(self.hoppings)

    @property
    def range_per_axis(self) -> tuple[int, ...]:
        return tuple(max(abs(n[j]) for n, _ in self.hoppings) for j in range(self.dimension))

    def gradient_bound(self) -> float:
        """Upper bound on any single partial derivative of the symbol."""
        return max(
            sum(abs(n[j]) * abs(a) for n, a in self.hoppings) for j in range(self.dimension)
        )

    def hessian_bound(self) -> float:
        """Upper bound on any second partial derivative of the symbol."""
        return max(
            sum(n[j] ** 2 * abs(a) for n, a in self.hoppings) for j in range(self.dimension)
        )


def laplacian(dimension: int, amplitude: float = 1.0) -> DispersionSymbol:
    """Nearest-neighbor symbol 2*amplitude*sum_j cos(k_j), band [-2ad, 2ad]."""
    hop: dict[tuple[int, ...], complex] = {}
    for j in range(dimension):
        for s in (+1, -1):
            n = tuple(s if i == j else 0 for i in range(dimension))
            hop[n] = complex(amplitude)
    return DispersionSymbol.from_hoppings(dimension, hop)


@dataclass(frozen=True)
class LatticeGeometry:
    """Split of the lattice into surface directions (d1) and transverse ones (d2)."""

    d: int
    d1: int

    def __post_init__(self):
        if self.d1 < 1 or self.d2 < 1:
            raise ValueError("both d1 and d2 must be positive")

    @property
    def d2(self) -> int:
        return self.d - self.d1

    @property
    def theorem_grade(self) -> bool:
        """Full-strength spectral statements need at least three dimensions."""
        return self.d >= 3


@dataclass(frozen=True)
class BandWindow:
    """Energy band [e_minus, e_plus] with midpoint and half-width."""

    e_minus: float
    e_plus: float

    def __post_init__(self):
        if not self.e_minus < self.e_plus:
            raise ValueError("band window requires e_minus < e_plus")

    @property
    def e_r(self) -> float:
        return 0.5 * (self.e_minus + self.e_plus)

    @property
    def delta(self) -> float:
        return 0.5 * (self.e_plus - self.e_minus)

    @property
    def bandwidth(self) -> float:
        return self.e_plus - self.e_minus

    def contains(self, energy: float, margin: float = 0.0) -> bool:
        return self.e_minus + margin < energy < self.e_plus - margin


def eval_symbol(symbol: DispersionSymbol, k: Sequence[float] | np.ndarray) -> float | np.ndarray:
    """Evaluate the symbol at momentum k (last axis indexes the d components).

    The imaginary residue of the complex sum must stay below 1e-13 relative
    to the hopping scale; it is checked and discarded.
    """
    karr = np.asarray(k, dtype=float)
    if karr.shape[-1] != symbol.dimension:
        raise ValueError("momentum has wrong number of components")
    total = np.zeros(karr.shape[:-1], dtype=complex)
    for n, amp in symbol.hoppings:
        total = total + amp * np.exp(1j * karr @ np.asarray(n, dtype=float))
    scale = max(1.0, sum(abs(a) for _, a in symbol.hoppings))
    if np.max(np.abs(total.imag)) > 1e-13 * scale:
        raise ValueError("symbol evaluated to a non-real value; hoppings are inconsistent")
    real = total.real
    return float(real) if real.ndim == 0 else real


def eval_gradient(symbol: DispersionSymbol, k: Sequence[float] | np.ndarray) -> np.ndarray:
    """Gradient of the symbol, evaluated analytically from the hopping sum."""
    karr = np.asarray(k, dtype=float)
    grad = np.zeros(karr.shape[:-1] + (symbol.dimension,), dtype=complex)
    for n, amp in symbol.hoppings:
        nv = np.asarray(n, dtype=float)
        grad = grad + (1j * amp) * np.exp(1j * karr @ nv)[..., None] * nv
    return grad.real


def _eval_hessian(symbol: DispersionSymbol, k: np.ndarray) -> np.ndarray:
    h = np.zeros((symbol.dimension, symbol.dimension), dtype=complex)
    for n, amp in symbol.hoppings:
        nv = np.asarray(n, dtype=float)
        h = h - amp * np.exp(1j * float(np.dot(k, nv))) * np.outer(nv, nv)
    return h.real


def _newton_polish(symbol: DispersionSymbol, k0: np.ndarray, max_iter: int = 60) -> np.ndarray | None:
    k = np.array(k0, dtype=float)
    for _ in range(max_iter):
        g = eval_gradient(symbol, k)
        gn = float(np.linalg.norm(g))
        if gn < 1e-13:
            return k
        h = _eval_hessian(symbol, k)
        try:
            step = np.linalg.solve(h, g)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(step)) or np.linalg.norm(step) > 1.0:
            return None
        k = k - step
    return None


def band_edges(symbol: DispersionSymbol, n_grid: int = 64) -> BandWindow:
    """Band window from a dense torus scan refined by Newton iteration.

    Raises :class:`RefinementError` with the grid-only bracket when Newton
    does not converge at either extremum.
    """
    from . import _torus

    values = _torus.grid_values(symbol, n_grid)
    k_axis = _torus.grid_axis(n_grid)
    lo_idx = np.unravel_index(int(np.argmin(values)), values.shape)
    hi_idx = np.unravel_index(int(np.argmax(values)), values.shape)
    edges = []
    for idx, kind in ((lo_idx, "min"), (hi_idx, "max")):
        k0 = np.array([k_axis[i] for i in idx])
        k_star = _newton_polish(symbol, k0)
        if k_star is None:
            grid_val = float(values[idx])
            tol = symbol.hessian_bound() * (2 * np.pi / n_grid) ** 2
            raise RefinementError(
                f"Newton refinement of the band {kind} did not converge",
                bracket=(grid_val - tol, grid_val + tol),
                tolerance=tol,
            )
        edges.append(eval_symbol(symbol, k_star))
    return BandWindow(e_minus=float(edges[0]), e_plus=float(edges[1]))


def critical_values(symbol: DispersionSymbol, n_grid: int = 48, cluster_tol: float = 1e-8) -> tuple[float, ...]:
    """Distinct critical values of the symbol, found by seeded Newton runs.

    Coarse grid points with small gradient norm seed Newton iterations on the
    gradient; converged critical energies are clustered.  Interior entries of
    the result mark where boundary-value regularity degrades.
    """
    from . import _torus

    k_axis = _torus.grid_axis(n_grid)
    mesh = np.stack(np.meshgrid(*([k_axis] * symbol.dimension), indexing="ij"), axis=-1)
    pts = mesh.reshape(-1, symbol.dimension)
    grads = eval_gradient(symbol, pts)
    norms = np.linalg.norm(grads, axis=-1)
    cut = np.quantile(norms, 0.05) + 1e-9
    seeds = pts[norms <= max(cut, 1e-3 * symbol.gradient_bound())]
    found: list[float] = []
    for k0 in seeds:
        k_star = _newton_polish(symbol, k0, max_iter=40)
        if k_star is None:
            continue
        val = float(eval_symbol(symbol, k_star))
        if not any(abs(val - v) < cluster_tol * max(1.0, abs(v)) for v in found):
            found.append(val)
    return tuple(sorted(found))


def rescale_to_b(window: BandWindow, energy: float) -> float:
    """Logarithmic rescaling 0.5*ln((E-E_-)/(E_+-E)); defined strictly inside the band."""
    if not window.contains(energy):
        raise ValueError(f"energy {energy} is not strictly inside ({window.e_minus}, {window.e_plus})")
    return 0.5 * math.log((energy - window.e_minus) / (window.e_plus - energy))


def rescale_to_E(window: BandWindow, b: float) -> float:
    """Inverse rescaling E_r + Delta*tanh(b)."""
    return window.e_r + window.delta * math.tanh(b)


def capacity(window: BandWindow, energy: float) -> float:
    """Band capacity 2*(E-E_-)*(E_+-E)/(E_+-E_-); the reciprocal derivative of the rescaling."""
    return 2.0 * (energy - window.e_minus) * (window.e_plus - energy) / window.bandwidth


@dataclass(frozen=True)
class FiberSymbol:
    """Transverse symbol at fixed surface momentum k1.

    The effective hoppings along the transverse directions acquire a
    k1-dependent phase sum; the result is again Hermitian as an operator on
    the transverse lattice, so it is stored as a transverse-dimensional
    :class:`DispersionSymbol`.
    """

    base: DispersionSymbol
    k1: tuple[float, ...]
    transverse: DispersionSymbol = field(compare=False)


def fiber_symbol(symbol: DispersionSymbol, geometry: LatticeGeometry, k1: Sequence[float]) -> FiberSymbol:
    """Reduce the symbol over the surface directions at fixed surface momentum."""
    if geometry.d != symbol.dimension:
        raise ValueError("geometry dimension does not match the symbol")
    k1t = tuple(float(x) for x in k1)
    if len(k1t) != geometry.d1:
        raise ValueError(f"k1 must have {geometry.d1} components")
    k1v = np.asarray(k1t)
    eff: dict[tuple[int, ...], complex] = {}
    for n, amp in symbol.hoppings:
        n1 = np.asarray(n[: geometry.d1], dtype=float)
        n2 = tuple(n[geometry.d1 :])
        eff[n2] = eff.get(n2, 0.0) + amp * np.exp(1j * float(k1v @ n1))
    # symmetrize away the rounding in the phase sums
    sym: dict[tuple[int, ...], complex] = {}
    for n2, a in eff.items():
        conj = tuple(-c for c in n2)
        sym[n2] = 0.5 * (a + np.conj(eff.get(conj, 0.0)))
    transverse = DispersionSymbol.from_hoppings(geometry.d2, sym)
    return FiberSymbol(base=symbol, k1=k1t, transverse=transverse)


def dilation_vector_field(
    symbol: DispersionSymbol,
    window: BandWindow,
    k: Sequence[float] | np.ndarray,
    singular_tol: float = 1e-8,
) -> np.ndarray:
    """Rescaled-gradient field F(Ee(k)) * grad Ee(k) / |grad Ee(k)|^2."""
    karr = np.asarray(k, dtype=float)
    g = eval_gradient(symbol, karr)
    gn = float(np.linalg.norm(g))
    if gn < singular_tol:
        raise SingularFieldError(
            f"dilation field is singular: |grad| = {gn:.3e} below {singular_tol:.1e}", gn
        )
    e = float(eval_symbol(symbol, karr))
    return capacity(window, e) * g / gn**2


def flow_check(
    symbol: DispersionSymbol,
    window: BandWindow,
    sigma: Sequence[float],
    b: float,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> tuple[np.ndarray, float]:
    """Integrate the dilation flow from the reference surface and report the energy error.

    The starting point must satisfy Ee(sigma) = E_r to 1e-10.  Returns the
    endpoint and |Ee(endpoint) - E(b)| where E(b) is the rescaled-energy
    inverse.  Trajectories drifting into the critical set abort.
    """
    sig = np.asarray(sigma, dtype=float)
    e0 = float(eval_symbol(symbol, sig))
    if abs(e0 - window.e_r) > 1e-10 * max(1.0, window.bandwidth):
        raise ValueError(f"starting point is not on the reference surface: Ee = {e0}, E_r = {window.e_r}")
    if b == 0.0:
        return sig.copy(), 0.0

    singular_tol = 1e-8

    def rhs(_t, k):
        return dilation_vector_field(symbol, window, k, singular_tol=singular_tol)

    def near_critical(_t, k):
        return float(np.linalg.norm(eval_gradient(symbol, k))) - 10 * singular_tol

    near_critical.terminal = True  # type: ignore[attr-defined]

    sol = solve_ivp(
        rhs,
        (0.0, b),
        sig,
        method="DOP853",
        rtol=rtol,
        atol=atol,
        events=near_critical,
        dense_output=False,
    )
    if sol.status == 1:
        raise SingularFieldError(
            f"flow trajectory approached the critical set at b = {sol.t[-1]:.6f}",
            gradient_norm=float(np.linalg.norm(eval_gradient(symbol, sol.y[:, -1]))),
        )
    if not sol.success:
        raise RuntimeError(f"flow integration failed: {sol.message}")
    endpoint = sol.y[:, -1]
    err = abs(float(eval_symbol(symbol, endpoint)) - rescale_to_E(window, b))
    return endpoint, err


def symbol_to_json(symbol: DispersionSymbol) -> str:
    """Serialize as {"d": int, "hoppings": [{"n": [...], "re": ..., "im": ...}]}."""
    payload = {
        "d": symbol.dimension,
        "hoppings": [
            {"n": list(n), "re": float(a.real), "im": float(a.imag)} for n, a in symbol.hoppings
        ],
    }
    return json.dumps(payload)


def symbol_from_json(text: str | Mapping) -> DispersionSymbol:
    data = json.loads(text) if isinstance(text, str) else text
    hop = {tuple(entry["n"]): complex(entry["re"], entry.get("im", 0.0)) for entry in data["hoppings"]}
    return DispersionSymbol.from_hoppings(int(data["d"]), hop)
