import numpy as np
import pytest
from scipy.integrate import quad

from engines.calculus import phase_difference
from engines.chirp import chirp_signal
from engines.diffusion import (
    auxiliary_matrix,
    ced_evolve,
    ced_evolve_group,
    cfl_limit,
    conductivity,
    default_beta,
    evolve_window_isotropic,
    linear_smooth,
    metric_steps,
    smoothing_kernel,
    smoothing_normalization,
)
from engines.gabor import apply_s, apply_s_inverse, gabor_analysis, get_window, translate_phase
from models import ChirpParams, DiffusionParams, MetricParams, SmoothingParams
from utils.errors import GaborFlowError

from tests.conftest import NORMAL

INVARIANCE_TOL = 1e-10


@pytest.fixture
def field(random_signal):
    return gabor_analysis(random_signal(NORMAL.N), get_window("gaussian", NORMAL), NORMAL)


@pytest.fixture
def stable_params():
    dt = cfl_limit(default_beta(NORMAL), NORMAL)
    return DiffusionParams(dt=dt, t_final=3 * dt)


def test_default_metric_makes_square_cells():
    assert default_beta(NORMAL) == MetricParams.square_grid(NORMAL).beta
    h1, h2 = metric_steps(default_beta(NORMAL), NORMAL)
    assert h1 == pytest.approx(h2)
    assert cfl_limit(default_beta(NORMAL), NORMAL) == pytest.approx(0.25 * h2 ** 2)


def test_conductivity_is_symmetric_and_bounded(field):
    dp = DiffusionParams(eps=0.1)
    C = conductivity(auxiliary_matrix(field.modulus, dp, NORMAL), dp)
    np.testing.assert_allclose(C, np.swapaxes(C, -1, -2), atol=1e-15)
    values = np.linalg.eigvalsh(C)
    assert values.min() >= 0.1 - 1e-12
    assert values.max() <= 1.0 + 1e-12


def test_conductivity_ordering():
    A = np.diag([1.0, 3.0])[None, None]
    strong = 0.9 * np.exp(-1.0 / 4.0) + 0.1
    ascending = conductivity(A, DiffusionParams(eps=0.1, c=1.0))
    descending = conductivity(A, DiffusionParams(eps=0.1, c=1.0, ordering="descending"))
    np.testing.assert_allclose(ascending[0, 0], np.diag([0.1, strong]), atol=1e-14)
    np.testing.assert_allclose(descending[0, 0], np.diag([strong, 0.1]), atol=1e-14)


def test_degenerate_spectrum_gives_isotropic_conductivity():
    A = 2.0 * np.eye(2)[None, None]
    np.testing.assert_allclose(conductivity(A, DiffusionParams(eps=0.3))[0, 0], 0.3 * np.eye(2))


def test_ced_norm_never_increases(field, stable_params):
    single = stable_params.model_copy(update={"t_final": stable_params.dt})
    current = field
    norms = [np.linalg.norm(current.data)]
    for _ in range(5):
        current = ced_evolve(current, single)
        norms.append(np.linalg.norm(current.data))
    assert all(b <= a * (1 + 1e-12) for a, b in zip(norms, norms[1:]))


def test_ced_rejects_unstable_step(field):
    limit = cfl_limit(default_beta(NORMAL), NORMAL)
    with pytest.raises(GaborFlowError) as exc:
        ced_evolve(field, DiffusionParams(dt=2 * limit, t_final=4 * limit))
    assert exc.value.code == "cfl-violated"


def test_ced_on_group_restricts_to_phase_space(field, stable_params):
    through_group = apply_s(ced_evolve_group(apply_s_inverse(field), stable_params))
    direct = ced_evolve(field, stable_params)
    np.testing.assert_allclose(through_group.data, direct.data, atol=1e-12 * np.abs(direct.data).max())


@pytest.mark.parametrize("adaptivity", ["hessian", "structure-tensor"])
def test_ced_commutes_with_grid_shifts(field, stable_params, rng, adaptivity):
    dp = stable_params.model_copy(update={"adaptivity": adaptivity, "readapt": True})
    base = ced_evolve(field, dp).data
    for l0, m0 in zip(rng.integers(NORMAL.K, size=20), rng.integers(NORMAL.M, size=20)):
        shifted = ced_evolve(field.with_data(translate_phase(field.data, int(l0), int(m0), NORMAL)), dp).data
        expected = translate_phase(base, int(l0), int(m0), NORMAL)
        np.testing.assert_allclose(shifted, expected, atol=INVARIANCE_TOL * np.abs(base).max())


def test_isotropic_limit_matches_window_evolution(random_signal, stable_params):
    dp = stable_params.model_copy(update={"eps": 1.0})
    w = get_window("gaussian", NORMAL)
    f = random_signal(NORMAL.N)
    phase_side = ced_evolve(gabor_analysis(f, w, NORMAL), dp).data
    window_side = gabor_analysis(f, evolve_window_isotropic(w, dp, NORMAL), NORMAL).data
    np.testing.assert_allclose(window_side, phase_side, atol=1e-10 * np.abs(phase_side).max())


def test_linear_smoothing_commutes_with_grid_shifts(field, rng):
    sp = SmoothingParams(t=0.5, D11=0.02, D22=4.0)
    base = linear_smooth(field, sp).data
    assert np.abs(base).max() > 0
    for l0, m0 in zip(rng.integers(NORMAL.K, size=20), rng.integers(NORMAL.M, size=20)):
        shifted = linear_smooth(field.with_data(translate_phase(field.data, int(l0), int(m0), NORMAL)), sp).data
        expected = translate_phase(base, int(l0), int(m0), NORMAL)
        np.testing.assert_allclose(shifted, expected, atol=INVARIANCE_TOL * np.abs(base).max())


def _weighted_energy(W, C, beta, p):
    g1 = beta ** -2 * phase_difference(W, 1, "forward", p)
    g2 = phase_difference(W, 2, "forward", p)
    flux1 = C[..., 0, 0] * g1 + C[..., 0, 1] * g2
    flux2 = C[..., 1, 0] * g1 + C[..., 1, 1] * g2
    return float(np.real(np.vdot(g1, flux1) + np.vdot(g2, flux2)))


def test_ced_weighted_energy_decreases_on_noisy_chirp(rng, stable_params):
    f = chirp_signal(ChirpParams(), NORMAL.N) + 0.3 * (rng.standard_normal(NORMAL.N) + 1j * rng.standard_normal(NORMAL.N))
    field = gabor_analysis(f, get_window("gaussian", NORMAL), NORMAL)
    C = conductivity(auxiliary_matrix(field.modulus, stable_params, NORMAL), stable_params)
    beta = default_beta(NORMAL)
    energies = [_weighted_energy(field.data, C, beta, NORMAL)]
    for k in range(1, 6):
        dp = stable_params.model_copy(update={"t_final": k * stable_params.dt})
        energies.append(_weighted_energy(ced_evolve(field, dp).data, C, beta, NORMAL))
    assert energies[0] > 0
    assert all(b <= a * (1 + 1e-12) for a, b in zip(energies, energies[1:]))
    assert energies[-1] < energies[0]


def _rotation(theta):
    return np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])


def test_conductivity_is_rotation_equivariant(rng):
    X = rng.standard_normal((4, 5, 2, 2))
    A = X + np.swapaxes(X, -1, -2)
    dp = DiffusionParams(eps=0.2, c=0.5)
    C = conductivity(A, dp)
    for theta in rng.uniform(0, 2 * np.pi, size=5):
        R = _rotation(theta)
        rotated = conductivity(R @ A @ R.T, dp)
        np.testing.assert_allclose(rotated, R @ C @ R.T, atol=1e-12)


def test_structure_tensor_is_positive_semidefinite(field):
    A = auxiliary_matrix(field.modulus, DiffusionParams(adaptivity="structure-tensor"), NORMAL)
    values = np.linalg.eigvalsh(A)
    assert values.min() >= -1e-12 * values.max()


def test_smoothing_kernel_is_hermitian(rng):
    sp = SmoothingParams(t=0.5, D11=0.02, D22=4.0)
    p, q, p2, q2 = rng.uniform(-1, 1, size=(4, 50))
    np.testing.assert_allclose(smoothing_kernel(p, q, p2, q2, sp), np.conj(smoothing_kernel(p2, q2, p, q, sp)), atol=1e-15)
    norm = smoothing_normalization(sp)
    assert abs(smoothing_kernel(0.3, 0.7, 0.3, 0.7, sp) - norm) <= 1e-12 * norm


@pytest.mark.parametrize(
    "sp",
    [
        SmoothingParams(t=0.5, D11=0.02, D22=4.0),
        SmoothingParams(t=0.1),
        SmoothingParams(t=2.0, c_loc=3.0),
    ],
)
def test_smoothing_normalization_integrates_the_group_factor(sp):
    root = np.sqrt(sp.D11 * sp.D22)
    alpha = sp.c_loc / (4.0 * sp.t * root)
    character, _ = quad(lambda s: alpha * np.exp(-alpha * s), 0, np.inf, weight="cos", wvar=2 * np.pi)
    gaussian = sp.c_loc / (4.0 * np.pi * sp.t * root)
    assert smoothing_normalization(sp) == pytest.approx(gaussian * character, rel=1e-7)
    assert smoothing_normalization(sp, dim=2) == pytest.approx(gaussian ** 2 * character, rel=1e-7)
