import numpy as np
import pytest

from engines.calculus import cr_residual
from engines.chirp import chirp_signal, convergence_gap
from engines.fields import Window
from engines.gabor import (
    apply_s,
    apply_s_inverse,
    frame_eigenvalues,
    frame_operator,
    gabor_analysis,
    gabor_synthesis,
    get_window,
    inverse_zak,
    make_discrete_cr_window,
    synthesis_sum,
    time_frequency_shift,
    translate_phase,
    zak_transform,
)
from models import ChirpParams, GaborParams
from utils.errors import GaborFlowError, InputValidationError

from tests.conftest import NORMAL

RECONSTRUCTION_TOL = 1e-10
COVARIANCE_TOL = 1e-12


def _relative(x, y):
    return np.linalg.norm(x - y) / np.linalg.norm(y)


@pytest.mark.parametrize("kind", ["gaussian", "cr"])
def test_reconstruction_at_extreme_oversampling(kind, random_signal):
    p = GaborParams.extreme(128, 1 / 8)
    w = get_window(kind, p)
    f = random_signal(p.N)
    f_back = gabor_synthesis(gabor_analysis(f, w, p), w, p)
    assert _relative(f_back, f) <= RECONSTRUCTION_TOL


def test_reconstruction_on_coarse_lattice(random_signal):
    w = get_window("gaussian", NORMAL)
    f = random_signal(NORMAL.N)
    f_back = gabor_synthesis(gabor_analysis(f, w, NORMAL), w, NORMAL)
    assert _relative(f_back, f) <= RECONSTRUCTION_TOL


def test_frame_operator_matches_synthesis_of_analysis(random_signal):
    w = get_window("gaussian", NORMAL)
    f = random_signal(NORMAL.N)
    direct = synthesis_sum(gabor_analysis(f, w, NORMAL).data, w, NORMAL)
    np.testing.assert_allclose(frame_operator(f, w, NORMAL), direct, atol=1e-12 * np.abs(direct).max())


def test_zak_roundtrip(random_signal):
    f = random_signal(NORMAL.N)
    np.testing.assert_allclose(inverse_zak(zak_transform(f, NORMAL), NORMAL), f, atol=1e-13)


def test_zero_window_is_not_a_frame():
    w = Window(np.zeros(NORMAL.N, dtype=complex), "sampled-gaussian", NORMAL.a)
    with pytest.raises(GaborFlowError) as exc:
        frame_eigenvalues(w, NORMAL)
    assert exc.value.code == "window-not-frame"


def test_analysis_rejects_wrong_length():
    w = get_window("gaussian", NORMAL)
    with pytest.raises(InputValidationError) as exc:
        gabor_analysis(np.zeros(NORMAL.N - 1), w, NORMAL)
    assert exc.value.code == "shape-mismatch"


def test_grid_shift_covariance(rng, random_signal):
    w = get_window("gaussian", NORMAL)
    f = random_signal(NORMAL.N)
    G = gabor_analysis(f, w, NORMAL).data
    for _ in range(5):
        l0, m0 = int(rng.integers(NORMAL.K)), int(rng.integers(NORMAL.M))
        shifted = gabor_analysis(time_frequency_shift(f, l0, m0, NORMAL), w, NORMAL).data
        expected = translate_phase(G, l0, m0, NORMAL)
        np.testing.assert_allclose(shifted, expected, atol=COVARIANCE_TOL * np.abs(G).max())


def test_section_roundtrip(random_signal):
    w = get_window("gaussian", NORMAL)
    G = gabor_analysis(random_signal(NORMAL.N), w, NORMAL)
    np.testing.assert_allclose(apply_s(apply_s_inverse(G)).data, G.data, atol=1e-14)


def test_cr_window_satisfies_cauchy_riemann(random_signal):
    p = GaborParams.extreme(64, 1 / 8)
    w = make_discrete_cr_window(p)
    G = gabor_analysis(random_signal(p.N), w, p)
    assert cr_residual(G) <= RECONSTRUCTION_TOL
    assert np.isclose(np.linalg.norm(w.samples), 1.0)


def test_cr_window_picks_the_smooth_null_vector():
    p = GaborParams.extreme(64, 1 / 8)
    samples = make_discrete_cr_window(p).samples
    magnitude = np.abs(samples)
    assert int(np.argmax(magnitude)) == 0
    assert magnitude[p.N // 2] < 0.1 * magnitude[0]
    assert samples[0].real > 0 and abs(samples[0].imag) < 1e-12
    # the alternating companion has first-difference energy near 4
    assert np.linalg.norm(np.roll(samples, -1) - samples) ** 2 < 1.0


def test_cr_window_requires_extreme_oversampling():
    with pytest.raises(GaborFlowError) as exc:
        make_discrete_cr_window(NORMAL)
    assert exc.value.code == "cr-window-requires-extreme-oversampling"


def test_gaussian_cr_residual_shrinks_with_n():
    residuals = []
    for n in (64, 128):
        p = GaborParams.extreme(n, 1 / 8)
        f = chirp_signal(ChirpParams(), n)
        residuals.append(cr_residual(gabor_analysis(f, get_window("gaussian", p), p)))
    assert residuals[1] < residuals[0]


def test_discrete_transform_converges_to_periodic_continuous():
    chirp = ChirpParams()
    assert convergence_gap(chirp, 128) < convergence_gap(chirp, 64)


def test_window_cache_returns_same_instance():
    assert get_window("gaussian", NORMAL) is get_window("gaussian", NORMAL)
    with pytest.raises(ValueError):
        get_window("hann", NORMAL)
