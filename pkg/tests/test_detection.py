import math

import numpy as np
import pytest
from scipy.integrate import quad
from hypothesis import given, settings, strategies as st

from lgflat.detection import (
    DetectionModel,
    MaskFunction,
    MaskKind,
    Method,
    Preparation,
    coupling_amplitude,
    detection_probability,
    gaussian_mode,
    prepared_field,
)
from lgflat.modes import ModeIndex, SpatialState, enumerate_modes, lg_field

LG00 = SpatialState.single(ModeIndex(0, 0))
LG01 = SpatialState.single(ModeIndex(0, 1))


class TestModel:
    def test_if_rejects_small_beta(self):
        with pytest.raises(ValueError):
            DetectionModel.intensity_flattening(0.5)

    @pytest.mark.parametrize("method", ["pf", "pf-am"])
    def test_phase_methods_fix_beta(self, method):
        with pytest.raises(ValueError):
            DetectionModel(method, beta=2.0)

    def test_defaults(self):
        pf = DetectionModel.phase_flattening()
        assert pf.mask_kind is MaskKind.PHASE_ONLY
        assert pf.resolved_preparation is Preparation.PHASE_ONLY
        am = DetectionModel.phase_flattening_am()
        assert am.mask_kind is MaskKind.AMPLITUDE_AND_PHASE
        assert am.resolved_preparation is Preparation.EXACT
        assert DetectionModel.phase_flattening(preparation="exact").resolved_preparation is Preparation.EXACT

    def test_with_beta(self):
        m = DetectionModel.intensity_flattening(2.0).with_beta(3.5)
        assert m.beta == 3.5 and m.method is Method.INTENSITY_FLATTENING


class TestMask:
    def test_amplitude_mask_bounded(self):
        for mode in enumerate_modes(6):
            mask = MaskFunction(SpatialState.single(mode))
            r = np.linspace(0, 6, 801)[:, None]
            phi = np.linspace(0, 2 * np.pi, 65)[None, :]
            assert np.max(np.abs(mask(r, phi))) <= 1 + 1e-12

    def test_phase_mask_unit_modulus(self):
        mask = MaskFunction(SpatialState.single(ModeIndex(2, 3)), MaskKind.PHASE_ONLY)
        r = np.linspace(0.01, 5, 100)[:, None]
        phi = np.linspace(0, 6, 30)[None, :]
        assert np.allclose(np.abs(mask(r, phi)), 1.0)

    def test_amplitude_mask_is_scaled_conjugate(self):
        s = SpatialState.single(ModeIndex(-1, 2))
        mask = MaskFunction(s)
        v = lg_field(ModeIndex(-1, 2), 1.0, 0.9, 1.1)
        assert mask(0.9, 1.1) == pytest.approx(v.conjugate() / mask.peak)

    def test_gaussian_unit_norm(self):
        val, _ = quad(lambda r: gaussian_mode(1.5, r) ** 2 * 2 * np.pi * r, 0, np.inf)
        assert val == pytest.approx(1.0, abs=1e-12)

    def test_phase_only_preparation_shape(self):
        f = prepared_field(LG01, Preparation.PHASE_ONLY)
        # Gaussian envelope with a pi step at the ring zero r = 1/sqrt(2)
        assert complex(f(0.3, 0.0)) == pytest.approx(gaussian_mode(1.0, 0.3))
        assert complex(f(0.9, 0.0)) == pytest.approx(-gaussian_mode(1.0, 0.9))


class TestClosedForms:
    def test_intensity_flattening_beta_one_gaussian(self):
        # kernel G_1 * exp(-r^2) against sqrt(2/pi) exp(-r^2): c = 2/3
        c = coupling_amplitude(LG00, LG00, DetectionModel.intensity_flattening(1.0))
        assert c == pytest.approx(2 / 3, abs=1e-12)
        assert detection_probability(LG00, LG00, DetectionModel.intensity_flattening(1.0)) == pytest.approx(4 / 9, abs=1e-12)

    def test_phase_flattening_sign_flip(self):
        # Gaussian input against a mask that flips sign at r = 1/sqrt(2): c = 1 - 2/e
        p = detection_probability(LG00, LG01, DetectionModel.phase_flattening())
        assert p == pytest.approx((1 - 2 / math.e) ** 2, abs=1e-12)
        assert p == pytest.approx(0.0698233682606815, abs=1e-12)

    def test_large_beta_recovers_projection(self):
        # as beta grows the backward Gaussian flattens and c -> <psi|psi> / peak * G_W(0)
        model = DetectionModel.intensity_flattening(64.0)
        c = coupling_amplitude(LG01, LG01, model)
        peak = MaskFunction(LG01).peak
        flat = math.sqrt(2 / math.pi) / 64.0
        assert abs(c) == pytest.approx(flat / peak, rel=2e-3)


class TestSymmetries:
    @given(ell1=st.integers(-4, 4), ell2=st.integers(-4, 4), p1=st.integers(0, 3), p2=st.integers(0, 3),
           beta=st.floats(1.0, 8.0), method=st.sampled_from(["if", "pf", "pf-am"]))
    @settings(max_examples=30, deadline=None)
    def test_azimuthal_selection_rule(self, ell1, ell2, p1, p2, beta, method):
        if ell1 == ell2:
            return
        model = DetectionModel(method, beta if method == "if" else 1.0)
        a = SpatialState.single(ModeIndex(ell1, p1))
        b = SpatialState.single(ModeIndex(ell2, p2))
        assert detection_probability(a, b, model) < 1e-20

    @given(theta=st.floats(0, 2 * math.pi))
    @settings(max_examples=20, deadline=None)
    def test_global_phase_invariance(self, theta):
        modes = (ModeIndex(1, 0), ModeIndex(-1, 1))
        a = SpatialState.from_coeffs(modes, [0.6, 0.8j])
        b = SpatialState.from_coeffs(modes, np.array([0.6, 0.8j]) * np.exp(1j * theta))
        det = SpatialState.from_coeffs(modes, [1, 1])
        model = DetectionModel.intensity_flattening(2.0)
        assert detection_probability(a, det, model) == pytest.approx(detection_probability(b, det, model), rel=1e-10)

    def test_conjugate_pair_symmetry(self):
        # mirror image (l -> -l) leaves every probability unchanged
        model = DetectionModel.phase_flattening_am()
        for a, b in [((2, 1), (2, 0)), ((3, 0), (3, 2))]:
            p = detection_probability(SpatialState.single(ModeIndex(*a)), SpatialState.single(ModeIndex(*b)), model)
            q = detection_probability(SpatialState.single(ModeIndex(-a[0], a[1])), SpatialState.single(ModeIndex(-b[0], b[1])), model)
            assert p == pytest.approx(q, rel=1e-12)

    def test_waist_mismatch_rejected(self):
        with pytest.raises(ValueError):
            coupling_amplitude(LG00, SpatialState.single(ModeIndex(0, 0), waist=2.0), DetectionModel())

    def test_waist_scale_invariance(self):
        model = DetectionModel.intensity_flattening(3.0)
        a = detection_probability(LG01, LG00, model)
        b = detection_probability(SpatialState.single(ModeIndex(0, 1), 2.5), SpatialState.single(ModeIndex(0, 0), 2.5), model)
        assert a == pytest.approx(b, rel=1e-9)
