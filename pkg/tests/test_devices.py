"""Device models: frozen anchors, region behavior, analytic gradients."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dtlsim.devices import (MemristorParams, MosfetParams, SourceWaveform,
                            ZenerParams, memristance, memristor_state_rate,
                            mosfet_current, mosfet_defaults, mosfet_ids_grad,
                            window_factor, zener_current, zener_ig)
from dtlsim.errors import DomainError


# --- MOSFET -----------------------------------------------------------------

def _vth(p: MosfetParams, vsb: float) -> float:
    return p.vth0 + p.gamma * (math.sqrt(p.phi2 + vsb) - math.sqrt(p.phi2))


def test_mosfet_cutoff():
    p = mosfet_defaults("n")
    assert mosfet_current(p, 0.3, 2.0) == 0.0
    assert mosfet_current(p, 0.45, 2.0) == 0.0  # boundary inclusive


def test_mosfet_saturation_frozen():
    p = mosfet_defaults("n")
    # 0.5 * kp * wl * vov^2 * (1 + lam*vds), vov = 1.0 - 0.45
    expect = 0.5 * 170e-6 * 1.0 * 0.55 ** 2 * (1.0 + 0.05 * 2.0)
    assert mosfet_current(p, 1.0, 2.0) == pytest.approx(expect, rel=1e-12)


def test_mosfet_triode_frozen():
    p = mosfet_defaults("n")
    # kp * wl * (vov*vds - vds^2/2) * (1 + lam*vds)
    expect = 170e-6 * (1.55 * 0.1 - 0.5 * 0.1 ** 2) * (1.0 + 0.05 * 0.1)
    assert mosfet_current(p, 2.0, 0.1) == pytest.approx(expect, rel=1e-12)


def test_mosfet_body_effect():
    p = mosfet_defaults("n")
    vth1 = _vth(p, 1.0)
    assert vth1 > p.vth0
    assert mosfet_current(p, vth1 - 0.01, 2.0, vsb=1.0) == 0.0
    assert mosfet_current(p, vth1 + 0.10, 2.0, vsb=1.0) > 0.0


def test_mosfet_body_domain_error():
    p = mosfet_defaults("n")
    with pytest.raises(DomainError):
        mosfet_current(p, 1.0, 1.0, vsb=-0.8)


def test_pchannel_mirror():
    pn = mosfet_defaults("n")
    pp = MosfetParams(polarity="p", vth0=pn.vth0, kprime=pn.kprime,
                      w_over_l=pn.w_over_l, lam=pn.lam, gamma=pn.gamma,
                      phi2=pn.phi2)
    for vgs, vds, vsb in [(-1.0, -2.0, 0.0), (-2.0, -0.1, 0.0),
                          (-1.5, -1.0, -0.5), (1.0, 0.5, 0.0)]:
        assert mosfet_current(pp, vgs, vds, vsb) == pytest.approx(
            -mosfet_current(pn, -vgs, -vds, -vsb), rel=1e-12, abs=1e-30)


def test_reverse_vds_terminal_swap():
    # with source and drain exchanged the same device must conduct the
    # mirrored current: i(vgs, vds, vsb) == -i(vgs - vds, -vds, vsb + vds)
    p = mosfet_defaults("n")
    for vgs, vds, vsb in [(2.0, -1.0, 0.5), (1.0, -0.3, 0.0),
                          (2.0, -0.5, 0.2)]:
        assert mosfet_current(p, vgs, vds, vsb) == pytest.approx(
            -mosfet_current(p, vgs - vds, -vds, vsb + vds), rel=1e-12)


def test_mosfet_gradients_vs_finite_difference():
    rng = np.random.default_rng(20240817)
    p_n = mosfet_defaults("n")
    p_p = mosfet_defaults("p")
    h = 1e-6
    checked = 0
    while checked < 100:
        vgs = float(rng.uniform(-3.0, 3.0))
        vds = float(rng.uniform(-3.0, 3.0))
        vsb = float(rng.uniform(-0.5, 2.0))
        p = p_n if rng.uniform() < 0.5 else p_p
        # stay away from region boundaries where the model is only C0
        svgs, svds, svsb = (vgs, vds, vsb) if p.polarity == "n" \
            else (-vgs, -vds, -vsb)
        if svds < 0.0:
            svgs, svds, svsb = svgs - svds, -svds, svsb + svds
        if svsb + p.phi2 < 0.05:
            continue
        vov = svgs - _vth(p, svsb)
        if min(abs(vov), abs(svds), abs(vov - svds)) < 1e-3:
            continue
        i, gg, gd, gb = mosfet_ids_grad(p, vgs, vds, vsb)
        fd_g = (mosfet_current(p, vgs + h, vds, vsb)
                - mosfet_current(p, vgs - h, vds, vsb)) / (2 * h)
        fd_d = (mosfet_current(p, vgs, vds + h, vsb)
                - mosfet_current(p, vgs, vds - h, vsb)) / (2 * h)
        fd_b = (mosfet_current(p, vgs, vds, vsb + h)
                - mosfet_current(p, vgs, vds, vsb - h)) / (2 * h)
        for a, b in ((gg, fd_g), (gd, fd_d), (gb, fd_b)):
            assert a == pytest.approx(b, rel=1e-5, abs=1e-10)
        checked += 1


# --- zener ------------------------------------------------------------------

def test_zener_anchor_zero_bias():
    p = ZenerParams()
    assert abs(zener_current(p, 0.0)) < 1e-60


def test_zener_anchor_forward():
    p = ZenerParams()
    nvt = 1.2 * 0.02585
    expect = 1e-14 * (math.exp(0.7 / nvt) - 1.0) \
        - 1e-3 * math.exp(-(0.7 + 4.2) / nvt)
    assert zener_current(p, 0.7) == pytest.approx(expect, rel=1e-12)


def test_zener_anchor_breakdown():
    p = ZenerParams()
    assert zener_current(p, -4.2) == pytest.approx(-1e-3, rel=1e-9)
    # an extra volt of overdrive multiplies the branch enormously
    assert zener_current(p, -5.2) < -1e9 * 1e-3


@given(st.floats(min_value=-10.0, max_value=25.0),
       st.floats(min_value=-10.0, max_value=25.0))
def test_zener_monotone_nondecreasing(v1, v2):
    p = ZenerParams()
    lo, hi = sorted((v1, v2))
    assert zener_current(p, lo) <= zener_current(p, hi)


def test_zener_large_forward_stays_finite():
    p = ZenerParams()
    # the exponential is linearized past its cap instead of overflowing
    i1, i2 = zener_current(p, 50.0), zener_current(p, 100.0)
    assert math.isfinite(i1) and math.isfinite(i2) and i2 > i1 > 0.0


def test_zener_gradient_vs_finite_difference():
    p = ZenerParams()
    rng = np.random.default_rng(7)
    h = 1e-7
    for v in rng.uniform(-6.0, 1.2, size=100):
        _, g = zener_ig(p, float(v))
        fd = (zener_current(p, v + h) - zener_current(p, v - h)) / (2 * h)
        assert g == pytest.approx(fd, rel=1e-5, abs=1e-18)


# --- memristor ---------------------------------------------------------------

def test_memristance_endpoints():
    p = MemristorParams()
    assert memristance(p, 0.0) == 100e3
    assert memristance(p, 1.0) == 1e3
    assert memristance(p, 0.5) == 50.5e3


def test_memristance_domain():
    p = MemristorParams()
    with pytest.raises(DomainError):
        memristance(p, -0.1)
    with pytest.raises(DomainError):
        memristance(p, 1.1)


def test_window_boundaries():
    p = MemristorParams()
    assert window_factor(p, 0.0) == 0.0
    assert window_factor(p, 1.0) == 0.0
    assert window_factor(p, 0.5) == 1.0


@given(st.floats(min_value=0.0, max_value=1.0))
def test_window_symmetric_and_bounded(w):
    p = MemristorParams()
    f = window_factor(p, w)
    assert 0.0 <= f <= 1.0
    assert f == pytest.approx(window_factor(p, 1.0 - w), rel=1e-12, abs=1e-12)


def test_state_rate_stalls_at_boundaries():
    p = MemristorParams()
    assert memristor_state_rate(p, 0.0, 1e-3) == 0.0
    assert memristor_state_rate(p, 1.0, -1e-3) == 0.0
    assert memristor_state_rate(p, 0.5, 1e-3) > 0.0
    assert memristor_state_rate(p, 0.5, -1e-3) < 0.0


def test_window_gradient_vs_finite_difference():
    from dtlsim.devices import _window_grad
    p = MemristorParams()
    rng = np.random.default_rng(11)
    h = 1e-7
    for w in rng.uniform(0.02, 0.98, size=50):
        fd = (window_factor(p, w + h) - window_factor(p, w - h)) / (2 * h)
        assert _window_grad(p, float(w)) == pytest.approx(fd, rel=1e-5,
                                                          abs=1e-9)


# --- waveforms ----------------------------------------------------------------

def test_dc_waveform():
    w = SourceWaveform("dc", (3.3,))
    assert w.value(0.0) == 3.3
    assert w.value(1e9) == 3.3


def test_pulse_waveform_shape():
    w = SourceWaveform("pulse", (0.0, 5.0, 1e-3, 1e-6, 1e-6, 4e-3, 10e-3))
    assert w.value(0.0) == 0.0
    assert w.value(0.999e-3) == 0.0
    assert w.value(1e-3 + 0.5e-6) == pytest.approx(2.5)
    assert w.value(1e-3 + 1e-6) == pytest.approx(5.0)
    assert w.value(3e-3) == 5.0
    assert w.value(1e-3 + 1e-6 + 4e-3 + 0.5e-6) == pytest.approx(2.5)
    assert w.value(8e-3) == 0.0
    # periodic repeat
    assert w.value(13e-3) == w.value(3e-3)


def test_pwl_waveform_shape():
    w = SourceWaveform("pwl", (0.0, 0.0, 1e-3, 5.0, 2e-3, 1.0))
    assert w.value(-1.0) == 0.0
    assert w.value(0.5e-3) == pytest.approx(2.5)
    assert w.value(1e-3) == 5.0
    assert w.value(1.5e-3) == pytest.approx(3.0)
    assert w.value(10.0) == 1.0


def test_param_validation():
    with pytest.raises(DomainError):
        MemristorParams(r_on=2e5, r_off=1e3)
    with pytest.raises(DomainError):
        MosfetParams(polarity="x")
    with pytest.raises(DomainError):
        ZenerParams(i_sat=-1.0)
