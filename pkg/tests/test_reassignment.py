import numpy as np
import pytest

from engines.chirp import chirp_signal
from engines.fields import PhaseField
from engines.gabor import gabor_analysis, get_window, translate_phase
from engines.reassignment import (
    energy_rescale,
    erode_interpolated_separable,
    erode_modulus,
    erode_modulus_interpolated,
    erode_quadratic_separable,
    erode_sampled,
    erosion_reassign,
    reassign_signal,
    reconstruction_errors,
    upwind_reassign,
    upwind_reassign_detailed,
)
from models import ChirpParams, GaborParams, ReassignParams
from utils.errors import GaborFlowError, InputValidationError

from tests.conftest import NORMAL

COVARIANCE_TOL = 1e-8


def _wrapped_distance(n, h):
    i = np.arange(n)
    d = np.abs(i[:, None] - i[None, :])
    return np.minimum(d, n - d) * h


def _brute_erosion(A, kernel):
    """min over all cells y of A[y] + kernel(d1(x, y), d2(x, y))."""
    out = np.empty_like(A)
    rows, cols = A.shape
    for x1 in range(rows):
        for x2 in range(cols):
            out[x1, x2] = np.min(A + kernel[x1][:, :, x2])
    return out


def _kernel_table(shape, dp, dq, fn):
    d1 = _wrapped_distance(shape[0], dp)
    d2 = _wrapped_distance(shape[1], dq)
    # table[x1][y1, y2, x2]
    return [fn(d1[x1][:, None, None], d2.T[None, :, :]) for x1 in range(shape[0])]


def test_quadratic_erosion_matches_brute_force(rng):
    dp, dq = 0.07, 0.11
    for _ in range(100):
        A = rng.uniform(0.0, 1.0, size=(16, 16))
        t = float(rng.uniform(1e-3, 0.05))
        table = _kernel_table(A.shape, dp, dq, lambda a, b: (a ** 2 + b ** 2) / (4.0 * t))
        np.testing.assert_allclose(erode_sampled(A, t, 1.0, dp, dq), _brute_erosion(A, table), rtol=1e-12, atol=1e-14)


def test_disc_erosion_matches_brute_force(rng):
    dp, dq = 0.1, 0.13
    for _ in range(20):
        A = rng.uniform(0.0, 1.0, size=(16, 16))
        t = float(rng.uniform(0.05, 0.9))
        table = _kernel_table(A.shape, dp, dq, lambda a, b: np.where(a ** 2 + b ** 2 < t * t, 0.0, np.inf))
        np.testing.assert_array_equal(erode_sampled(A, t, 0.5, dp, dq), _brute_erosion(A, table))


def test_power_kernel_erosion_matches_brute_force(rng):
    dp, dq, eta = 0.1, 0.1, 0.75
    power = 2 * eta / (2 * eta - 1)
    for _ in range(10):
        A = rng.uniform(0.0, 1.0, size=(12, 12))
        t = float(rng.uniform(0.01, 0.2))
        coef = (2 * eta - 1) / (2 * eta) * t ** (-1 / (2 * eta - 1))
        table = _kernel_table(A.shape, dp, dq, lambda a, b: coef * np.hypot(a, b) ** power)
        np.testing.assert_allclose(erode_sampled(A, t, eta, dp, dq), _brute_erosion(A, table), rtol=1e-12, atol=1e-14)


def test_erosion_edge_cases(rng):
    A = rng.uniform(size=(8, 8))
    np.testing.assert_array_equal(erode_sampled(A, 0.0, 1.0, 0.1, 0.1), A)
    np.testing.assert_array_equal(erode_quadratic_separable(A, 0.0, ((0, 0.1),)), A)
    with pytest.raises(GaborFlowError) as exc:
        erode_sampled(A, 0.1, 0.4, 0.1, 0.1)
    assert exc.value.code == "eta-out-of-range"


def _dense_interpolant_erosion(u, h, t, samples=2001):
    n = u.size
    out = np.empty_like(u)
    for x in range(n):
        best = np.inf
        for d in range(-(n // 2), n - n // 2 - 1):
            s = np.linspace(d, d + 1, samples)
            u0, u1 = u[(x + d) % n], u[(x + d + 1) % n]
            best = min(best, np.min(u0 + (s - d) * (u1 - u0) + (s * h) ** 2 / (4.0 * t)))
        out[x] = best
    return out


def test_interpolated_erosion_matches_dense_search(rng):
    h = 0.1
    for _ in range(20):
        u = rng.uniform(0.0, 1.0, size=12)
        t = float(rng.uniform(1e-3, 0.05))
        out = erode_interpolated_separable(u[None, :], t, ((-1, h),))[0]
        np.testing.assert_allclose(out, _dense_interpolant_erosion(u, h, t), atol=1e-6)


def test_interpolated_erosion_lies_below_sampled_erosion(rng):
    dp, dq = 0.07, 0.11
    for _ in range(10):
        A = rng.uniform(0.0, 1.0, size=(16, 16))
        t = float(rng.uniform(1e-3, 0.05))
        fine = erode_interpolated_separable(A, t, ((-1, dq), (-2, dp)))
        assert np.all(fine <= erode_sampled(A, t, 1.0, dp, dq) + 1e-15)
        assert np.all(fine >= A.min() - 1e-15)


def test_erosion_small_time_is_identity(rng):
    A = rng.uniform(0.0, 1.0, size=(16, 16))
    np.testing.assert_allclose(erode_sampled(A, 1e-6, 1.0, 0.07, 0.11), A, atol=1e-6)
    np.testing.assert_allclose(erode_interpolated_separable(A, 1e-9, ((-1, 0.11), (-2, 0.07))), A, atol=1e-6)


def test_quadratic_erosion_semigroup(rng):
    # the intermediate infimum is taken on the grid, which costs at most half a
    # cell per axis against the exact composition
    dp, dq = 0.07, 0.11
    for _ in range(10):
        A = rng.uniform(0.0, 1.0, size=(16, 16))
        t, delta = (float(v) for v in rng.uniform(5e-3, 0.05, size=2))
        direct = erode_sampled(A, t + delta, 1.0, dp, dq)
        composed = erode_sampled(erode_sampled(A, t, 1.0, dp, dq), delta, 1.0, dp, dq)
        slack = ((dp / 2) ** 2 + (dq / 2) ** 2) * (1.0 / (4.0 * t) + 1.0 / (4.0 * delta))
        assert np.all(composed >= direct - 1e-12)
        assert np.all(composed - direct <= slack + 1e-12)


def test_disc_erosion_semigroup(rng):
    dp = dq = 0.1
    for _ in range(5):
        A = rng.uniform(0.0, 1.0, size=(16, 16))
        direct = erode_sampled(A, 0.45, 0.5, dp, dq)
        composed = erode_sampled(erode_sampled(A, 0.25, 0.5, dp, dq), 0.2, 0.5, dp, dq)
        # every two-step displacement lies in the open disc of radius 0.45
        assert np.all(composed >= direct)


@pytest.fixture
def chirp_field():
    f = chirp_signal(ChirpParams(), NORMAL.N)
    return gabor_analysis(f, get_window("gaussian", NORMAL), NORMAL)


def test_erosion_keeps_phase_and_lowers_modulus(chirp_field):
    out = erosion_reassign(chirp_field, ReassignParams(t_final=0.05, method="erosion"))
    assert np.all(out.modulus <= chirp_field.modulus + 1e-15)
    nonzero = out.modulus > 1e-12
    np.testing.assert_allclose(
        np.angle(out.data[nonzero] * np.conj(chirp_field.data[nonzero])), 0.0, atol=1e-10
    )


@pytest.mark.parametrize("method", ["erosion", "upwind"])
def test_reassignment_commutes_with_grid_shifts(chirp_field, rng, method):
    rp = ReassignParams(t_final=0.01, dt=1e-3, method=method)
    run = erosion_reassign if method == "erosion" else upwind_reassign
    base = run(chirp_field, rp).data
    scale = np.abs(base).max()
    for _ in range(3):
        l0, m0 = int(rng.integers(NORMAL.K)), int(rng.integers(NORMAL.M))
        shifted = chirp_field.with_data(translate_phase(chirp_field.data, l0, m0, NORMAL))
        np.testing.assert_allclose(
            run(shifted, rp).data, translate_phase(base, l0, m0, NORMAL), atol=COVARIANCE_TOL * scale
        )


def test_upwind_zero_time_is_identity(chirp_field):
    out = upwind_reassign(chirp_field, ReassignParams(t_final=0.0, method="upwind"))
    np.testing.assert_array_equal(out.data, chirp_field.data)
    assert out.data is not chirp_field.data


def test_upwind_rejects_modulus_mobility(chirp_field):
    with pytest.raises(InputValidationError):
        upwind_reassign(chirp_field, ReassignParams(method="upwind", mobility="modulus"))


def test_upwind_substeps_when_courant_exceeds_one():
    l = ((np.arange(NORMAL.K) + NORMAL.K // 2) % NORMAL.K) - NORMAL.K // 2
    data = np.exp(-2.0 * l[:, None] ** 2) * np.ones((1, NORMAL.M))
    G = PhaseField(data, NORMAL)
    rp = ReassignParams(t_final=2e-3, dt=1e-3, method="upwind", step_scale="literal")
    outcome = upwind_reassign_detailed(G, rp)
    assert outcome.substeps > 1
    assert outcome.courant > 1
    assert any("Courant" in w for w in outcome.warnings)
    assert np.all(np.isfinite(outcome.field.data))
    assert np.abs(outcome.field.data).max() <= np.abs(data).max() * (1 + 1e-12)


def test_frozen_cells_are_reported():
    data = np.ones((NORMAL.K, NORMAL.M), dtype=complex)
    data[3, 4] = 0.0
    outcome = upwind_reassign_detailed(PhaseField(data, NORMAL), ReassignParams(t_final=2e-3, method="upwind"))
    assert outcome.frozen_cells == 5
    assert outcome.warnings


def test_reconstruction_errors():
    f = np.array([1.0, 1j, -1.0, 0.5])
    assert reconstruction_errors(f, f) == (0.0, 0.0)
    eps1, eps2 = reconstruction_errors(f, -f)
    assert eps1 == pytest.approx(2.0)
    assert eps2 == pytest.approx(0.0)
    with pytest.raises(GaborFlowError) as exc:
        reconstruction_errors(np.zeros(4), f)
    assert exc.value.code == "zero-norm"
    np.testing.assert_allclose(np.linalg.norm(energy_rescale(0.1 * f, f)), np.linalg.norm(f))


def test_reassign_signal_at_zero_time_reconstructs(random_signal):
    p = GaborParams.extreme(64, 1 / 8)
    f = random_signal(p.N)
    result = reassign_signal(f, get_window("gaussian", p), ReassignParams(t_final=0.0), p)
    assert result["eps1"] <= 1e-10


@pytest.mark.parametrize("method", ["erosion", "upwind"])
def test_reassign_signal_error_bounds(method):
    p = GaborParams.extreme(64, 1 / 8)
    f = chirp_signal(ChirpParams(), p.N)
    result = reassign_signal(f, get_window("gaussian", p), ReassignParams(t_final=0.02, dt=1e-3, method=method), p)
    assert 0.0 < result["eps1"] < 2.0
    assert result["eps2"] <= result["eps1"] + 1e-12
    np.testing.assert_allclose(np.linalg.norm(result["signal"]), np.linalg.norm(f))


@pytest.fixture(scope="module")
def table_setup():
    p = GaborParams.preset("paper128")
    f = chirp_signal(ChirpParams(), p.N)
    return p, f, get_window("gaussian", p)


def test_sampled_erosion_cannot_move_below_one_cell(table_setup):
    p, f, w = table_setup
    modulus = gabor_analysis(f, w, p).modulus
    np.testing.assert_array_equal(erode_modulus(modulus, 0.1, p.a, 1.0, p), modulus)
    eroded = erode_modulus_interpolated(modulus, 0.1, p.a, p)
    assert np.abs(eroded - modulus).max() > 1e-3
    assert np.all(eroded <= modulus)


@pytest.mark.parametrize("sampling,t", [("interpolated", 0.1), ("grid", 2.0)])
def test_erosion_keeps_chirp_maximum(sampling, t):
    p = GaborParams.extreme(64, 1 / 8)
    G = gabor_analysis(chirp_signal(ChirpParams(), p.N), get_window("gaussian", p), p)
    out = erosion_reassign(G, ReassignParams(t_final=t, dt=1e-3, erosion_sampling=sampling))
    assert not np.allclose(out.modulus, G.modulus)
    assert np.unravel_index(np.argmax(out.modulus), out.modulus.shape) == (0, 0)
    assert np.unravel_index(np.argmax(G.modulus), G.modulus.shape) == (0, 0)


@pytest.mark.parametrize(
    "method,eps1,eps2",
    [
        ("erosion", 2.29e-3, 2.29e-3),
        ("upwind", 6.75e-2, 2.09e-2),
    ],
)
def test_table_configuration_errors(table_setup, method, eps1, eps2):
    p, f, w = table_setup
    result = reassign_signal(f, w, ReassignParams(method=method, t_final=0.1, dt=1e-3), p)
    assert result["eps1"] == pytest.approx(eps1, rel=0.2)
    assert result["eps2"] == pytest.approx(eps2, rel=0.2)
