import numpy as np
import pytest

from lattice_scatter import green, model

import oracles

LAP1 = model.laplacian(1)
LAP2 = model.laplacian(2)
LAP3 = model.laplacian(3)
ORIGIN1 = ((0,),)
ORIGIN2 = ((0, 0),)
ORIGIN3 = ((0, 0, 0),)
Q1 = green.QuadratureSpec(n_points=512, n_max=4096)
SWEEP = green.QuadratureSpec(n_points=96, n_max=256, qtol=1e-7)


def _bv(symbol, sites, energy, side="minus", quad=None):
    return green.boundary_values(
        green.ResolventRequest(
            symbol=symbol, sites=sites, energy=energy, side=side,
            quadrature=quad or green.QuadratureSpec(),
        )
    )


def test_chain_resolvent_closed_form():
    res = green.restricted_resolvent(
        green.ResolventRequest(symbol=LAP1, sites=ORIGIN1, z=3.0, quadrature=Q1)
    )
    assert abs(res.matrix[0, 0] - 5 ** -0.5) < 1e-10


def test_resolvent_imag_vanishes_off_band_limit():
    vals = []
    for eps in (1e-2, 1e-4, 1e-6):
        res = green.restricted_resolvent(
            green.ResolventRequest(symbol=LAP1, sites=ORIGIN1, z=3.0 + 1j * eps, quadrature=Q1)
        )
        vals.append(abs(res.matrix[0, 0].imag))
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] < 1e-5


def test_resolvent_conjugation_symmetry():
    rng = np.random.default_rng(7)
    sites = ((0, 0, 0), (1, 0, 0), (0, 1, 1))
    for _ in range(20):
        z = complex(rng.uniform(-8, 8), rng.uniform(0.2, 2.5) * rng.choice([-1, 1]))
        a = green.restricted_resolvent(green.ResolventRequest(symbol=LAP3, sites=sites, z=z, quadrature=SWEEP))
        b = green.restricted_resolvent(
            green.ResolventRequest(symbol=LAP3, sites=sites, z=np.conj(z), quadrature=SWEEP)
        )
        assert np.max(np.abs(b.matrix - a.matrix.conj().T)) < 5e-11


def test_resolvent_rejects_in_band_real_energy():
    with pytest.raises(ValueError):
        green.restricted_resolvent(green.ResolventRequest(symbol=LAP3, sites=ORIGIN3, z=1.0))


def test_quadrature_convergence_within_error_estimate():
    rng = np.random.default_rng(17)
    for _ in range(6):
        z = complex(rng.uniform(-7, 7), rng.uniform(0.3, 2.0))
        quad = green.QuadratureSpec(n_points=64, n_max=128)
        a = green.restricted_resolvent(green.ResolventRequest(symbol=LAP3, sites=ORIGIN3, z=z, quadrature=quad))
        quad2 = green.QuadratureSpec(n_points=128, n_max=256)
        b = green.restricted_resolvent(green.ResolventRequest(symbol=LAP3, sites=ORIGIN3, z=z, quadrature=quad2))
        assert np.max(np.abs(a.matrix - b.matrix)) <= max(a.error, 1e-13) * 1.5


def test_band_center_real_part_vanishes():
    res = _bv(LAP3, ORIGIN3, 0.0)
    assert abs(res.matrix[0, 0].real) < 1e-8


def test_watson_edge_value():
    res = _bv(LAP3, ORIGIN3, 6.0)
    assert abs(res.matrix[0, 0].real - oracles.WATSON_EDGE_VALUE) < 1e-5
    assert abs(res.matrix[0, 0].imag) < 1e-6
    assert "edge_model" in res.flags


def test_outside_band_value_real_positive_decreasing():
    r10 = _bv(LAP3, ORIGIN3, 10.0, quad=SWEEP)
    assert abs(r10.matrix[0, 0].imag) < 1e-10
    assert r10.matrix[0, 0].real > 0
    grid = np.linspace(6.7, 30.0, 12)  # increasing energy above the band
    vals = [_bv(LAP3, ORIGIN3, float(e), quad=SWEEP).matrix[0, 0].real for e in grid]
    assert all(a > b for a, b in zip(vals, vals[1:]))  # positive, decreasing
    neg = [_bv(LAP3, ORIGIN3, float(-e), quad=SWEEP).matrix[0, 0].real for e in grid]
    assert all(v < 0 for v in neg)
    # below the band the value decreases toward the edge, i.e. along increasing E
    assert all(a < b for a, b in zip(neg, neg[1:]))
    far = green.restricted_resolvent(green.ResolventRequest(symbol=LAP3, sites=ORIGIN3, z=1e6))
    assert abs(far.matrix[0, 0]) < 2e-6


def test_boundary_values_match_elliptic_oracle_in_band():
    for e in (3.0, 1.0, -2.5, 5.0):
        res = _bv(LAP3, ORIGIN3, e)
        ref = oracles.g3d(e - 1e-13j)
        assert abs(res.matrix[0, 0] - ref) < max(3e-3, res.error)


def test_edge_model_continuation_both_edges_and_sides():
    for e, side, ref_z in [
        (5.95, "minus", 5.95 - 1e-13j),
        (5.95, "plus", 5.95 + 1e-13j),
        (-5.95, "minus", -5.95 - 1e-13j),
        (-5.98, "plus", -5.98 + 1e-13j),
    ]:
        res = _bv(LAP3, ORIGIN3, e, side)
        assert abs(res.matrix[0, 0] - oracles.g3d(ref_z)) < 1e-6


def test_herglotz_positivity_random_offsets():
    rng = np.random.default_rng(23)
    sites = ((0, 0, 0), (1, 0, 0), (1, 1, 0))
    for _ in range(50):
        z = complex(rng.uniform(-6, 6), rng.uniform(1e-3, 1.5))
        res = green.restricted_resolvent(
            green.ResolventRequest(symbol=LAP3, sites=sites, z=z, quadrature=SWEEP)
        )
        evs = np.linalg.eigvalsh(-(res.matrix - res.matrix.conj().T) / 2j)
        assert evs.min() >= -1e-12


def test_boundary_minus_side_spectral_weight_positive():
    sites = ((0, 0, 0), (1, 0, 0), (0, 1, 0))
    for e in np.linspace(-5.4, 5.4, 9):
        res = _bv(LAP3, sites, float(e))
        evs = np.linalg.eigvalsh(res.imag_part)
        assert evs.min() >= -1e-10
    plus = _bv(LAP3, sites, 2.7, "plus")
    minus = _bv(LAP3, sites, 2.7, "minus")
    assert np.max(np.abs(plus.matrix - minus.matrix.conj().T)) < 1e-12


def test_spectral_weight_vanishes_outside():
    for e in (6.6, -7.5, 9.0):
        res = _bv(LAP3, ORIGIN3, e)
        assert np.max(np.abs(res.imag_part)) < 1e-10


def test_fiber_green_chain_fiber():
    geo = model.LatticeGeometry(2, 1)
    fib = model.fiber_symbol(LAP2, geo, (np.pi / 2,))  # transverse chain, onsite shift 0
    res = green.fiber_green(fib, z=3.0, quadrature=Q1)
    assert abs(res.matrix[0, 0] - 5 ** -0.5) < 1e-10
    # conjugation
    res2 = green.fiber_green(fib, z=3.0 - 0.7j, quadrature=Q1)
    res3 = green.fiber_green(fib, z=3.0 + 0.7j, quadrature=Q1)
    assert abs(res3.matrix[0, 0] - np.conj(res2.matrix[0, 0])) < 1e-11
    # documented sign flag
    flipped = green.fiber_green(fib, z=3.0, quadrature=Q1, convention="hamiltonian_first")
    assert abs(flipped.matrix[0, 0] + res.matrix[0, 0]) < 1e-14


def test_fiber_green_square_log_divergence():
    geo = model.LatticeGeometry(3, 1)
    fib = model.fiber_symbol(LAP3, geo, (np.pi / 2,))  # square-lattice fiber, band [-4, 4]
    deltas = np.geomspace(1e-6, 1e-3, 8)
    vals = np.array(
        [green.fiber_green(fib, energy=4.0 + d).matrix[0, 0].real for d in deltas]
    )
    slope = np.polyfit(np.log(deltas), vals, 1)[0]
    assert abs(slope - (-1 / (4 * np.pi))) < 0.1 * (1 / (4 * np.pi))


def test_sup_norm_scan_cubic_point():
    c0, e_at = green.sup_norm_scan(LAP3, ORIGIN3, quadrature=SWEEP)
    assert abs(c0 - 1.0 / oracles.WATSON_EDGE_VALUE) < 0.02
    assert abs(abs(e_at) - 6.0) < 0.2


def test_edge_exponent_cubic():
    slope = green.edge_exponent_fit(LAP3, ORIGIN3, "top", quadrature=SWEEP)
    assert abs(slope - 0.5) < 0.05


def test_edge_exponent_outside_band_errors():
    with pytest.raises(RuntimeError):
        green.edge_exponent_fit(LAP3, ORIGIN3, "top", rel_window=(1.05, 11.0), quadrature=SWEEP)


@pytest.mark.slow
def test_edge_exponent_four_dimensional():
    lap4 = model.laplacian(4)
    quad = green.QuadratureSpec(n_points=64, n_max=64, qtol=1e-6)
    slope = green.edge_exponent_fit(lap4, ((0, 0, 0, 0),), "top",
                                    rel_window=(0.02, 0.2), quadrature=quad)
    assert abs(slope - 1.0) < 0.1


def test_sigma_indicator_matches_interval_oracle():
    geo = model.LatticeGeometry(3, 1)
    k1 = np.linspace(0, 2 * np.pi, 17, endpoint=False).reshape(-1, 1)
    inside, _ = green.sigma_E1_indicator(LAP3, geo, 0.0, k1, quadrature=SWEEP)
    assert inside.all()  # every fiber band contains the band center
    marked, _ = green.sigma_E1_indicator(LAP3, geo, 5.9, k1, quadrature=SWEEP)
    expected = 2 * np.cos(k1[:, 0]) + 4.0 > 5.9
    assert np.array_equal(marked, expected)
    none, _ = green.sigma_E1_indicator(LAP3, geo, 7.0, k1, quadrature=SWEEP)
    assert not none.any()


def test_export_round_trip(tmp_path):
    res = _bv(LAP3, ((0, 0, 0), (1, 0, 0)), 3.0, quad=SWEEP)
    path = tmp_path / "res.csv"
    green.resolvent_to_csv(res, str(path))
    rows = path.read_text().strip().splitlines()
    assert rows[0] == "row,col,re,im"
    assert len(rows) == 5
    import json

    payload = json.loads(green.resolvent_to_json(res))
    back = np.array(payload["re"]) + 1j * np.array(payload["im"])
    assert np.allclose(back, res.matrix)
    assert payload["energy"] == 3.0
