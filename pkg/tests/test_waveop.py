import numpy as np
import pytest

from lattice_scatter import green, model, scatter, waveop

import oracles

LAP3 = model.laplacian(3)
SWEEP = green.QuadratureSpec(n_points=96, n_max=256, qtol=1e-7, error_pass=False)
DENSE = green.QuadratureSpec(n_points=192, n_max=256, qtol=1e-8, richardson_order=5,
                             error_pass=False)


def problem(v, quad=SWEEP):
    prov = scatter.LatticeResolventProvider(LAP3, ((0, 0, 0),), quadrature=quad)
    return scatter.CellProblem(provider=prov, perturbation=scatter.Perturbation.point((0, 0, 0), v))


def test_bgrid_validation():
    with pytest.raises(ValueError):
        waveop.BGrid(4.0, 512)
    with pytest.raises(ValueError):
        waveop.BGrid(8.0, 500)
    g = waveop.BGrid(8.0, 256)
    assert g.spacing == pytest.approx(16.0 / 256)
    assert g.points[0] == -8.0


def test_multiplier_matches_pv_quadrature():
    grid = waveop.BGrid(12.0, 512)
    freqs = grid.frequencies()
    gauss = lambda b: np.exp(-((b - 0.5) ** 2) / 2.0)
    for sign in (+1, -1):
        mult = sign + np.tanh(0.5 * np.pi * freqs)
        mult[grid.n_points // 2] = sign
        applied = np.fft.ifft(mult * np.fft.fft(gauss(grid.points)))
        for b0 in (-1.0, 0.0, 1.5):
            ref = oracles.pv_sinh_transform(gauss, b0, sign)
            j = int(round((b0 + grid.half_width) / grid.spacing))
            assert abs(applied[j] - ref) < 1e-4 * max(1.0, abs(ref))


def test_wave_operator_zero_potential_is_identity():
    prob = problem(0.0)
    grid = waveop.BGrid(8.0, 256)
    w = waveop.build_wave_operator(prob, grid, sign=-1)
    assert np.allclose(w.matrix, np.eye(grid.n_points))
    assert w.isometry_defect < 1e-12
    p, tr = waveop.surface_projection(w)
    assert tr == pytest.approx(0.0, abs=1e-12)


def test_wave_operator_weak_coupling_isometry():
    prob = problem(1.0)
    grid = waveop.BGrid(8.0, 256)
    w = waveop.build_wave_operator(prob, grid, sign=-1)
    assert w.isometry_defect < 1e-2
    assert w.tail_norm < waveop.TAIL_TOL
    p, tr = waveop.surface_projection(w)
    assert abs(tr) < 0.05
    assert np.linalg.norm(p - p.conj().T, 2) < 1e-10


def test_grid_too_small_raises():
    prob = problem(1.0)
    with pytest.raises(ValueError):
        # half-width below the hard floor is rejected at construction
        waveop.BGrid(5.0, 256)
    # a legal grid whose ends still carry weight must be rejected at build time
    class Narrow(waveop.BGrid):
        pass
    g = waveop.BGrid(6.0, 256)
    with pytest.raises(waveop.GridTooSmallError):
        waveop.build_wave_operator(prob, g, sign=-1)


def test_smatrix_relation_between_signs():
    prob = problem(1.0)
    grid = waveop.BGrid(8.0, 256)
    wp = waveop.build_wave_operator(prob, grid, sign=+1)
    wm = waveop.build_wave_operator(prob, grid, sign=-1)
    blocks = waveop.smatrix_blocks(wp, wm)
    mid = slice(grid.n_points // 4, 3 * grid.n_points // 4)
    for j in list(range(*mid.indices(grid.n_points)))[::16]:
        e = model.rescale_to_E(prob.window, float(grid.points[j]))
        s_ref = scatter.s_matrix(prob, e).matrix
        assert np.max(np.abs(blocks[j] - s_ref)) < 2e-2


def test_time_delay_from_wave_blocks():
    prob = problem(1.0)
    grid = waveop.BGrid(8.0, 256)
    wp = waveop.build_wave_operator(prob, grid, sign=+1)
    wm = waveop.build_wave_operator(prob, grid, sign=-1)
    blocks = waveop.smatrix_blocks(wp, wm)
    h = grid.spacing
    for j in range(64, 192, 24):
        ds = (blocks[j + 1] - blocks[j - 1]) / (2 * h)
        td_blocks = float(np.trace(blocks[j].conj().T @ ds).imag * -1)
        td_blocks = float((np.trace(blocks[j].conj().T @ ds) / 1j).real)
        td_direct = scatter.time_delay_trace(prob, float(grid.points[j]))
        assert abs(td_blocks - td_direct) < 2e-2 * max(1.0, abs(td_direct))


def test_surface_projection_counts_bound_state():
    prob = problem(4.5, DENSE)
    grid = waveop.BGrid(8.0, 512)
    w = waveop.build_wave_operator(prob, grid, sign=-1)
    assert w.isometry_defect < 1e-2
    p, tr = waveop.surface_projection(w)
    assert abs(tr - 1.0) < 0.05
    ts, norms, decaying = waveop.boost_decay_check(p, grid, 1, "dilation")
    assert norms[-1] <= 0.2 * norms[0]
    ts2, norms2, dec2 = waveop.boost_decay_check(p, grid, 1, "rescaled_energy")
    assert dec2


def test_boost_zero_potential():
    prob = problem(0.0)
    grid = waveop.BGrid(8.0, 256)
    w = waveop.build_wave_operator(prob, grid, sign=-1)
    p, _ = waveop.surface_projection(w)
    ts, norms, _ = waveop.boost_decay_check(p, grid, 1, "dilation")
    assert np.max(norms) < 1e-10


@pytest.mark.slow
def test_boost_floor_drops_with_wider_grid():
    prob = problem(4.5, SWEEP)
    floors = []
    for b_half in (8.0, 16.0):
        grid = waveop.BGrid(b_half, 256 if b_half < 10 else 512)
        w = waveop.build_wave_operator(prob, grid, sign=-1)
        p, _ = waveop.surface_projection(w)
        _, norms, _ = waveop.boost_decay_check(p, grid, 1, "dilation",
                                               t_values=np.array([30.0]))
        floors.append(norms[0])
    assert floors[1] < floors[0]


def test_index_identity_check():
    rep = waveop.index_identity_check(problem(1.0), waveop.BGrid(8.0, 256))
    assert rep["residual"] < 0.05
    assert abs(rep["winding"]) < 1e-3
