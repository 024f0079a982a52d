"""Device models and their Newton stamps.

Conventions used throughout:

* Two-terminal currents are positive flowing from the first node to the
  second through the element.
* MOSFET terminal order is (drain, gate, source, bulk) and the reported
  current is the physical drain current. Voltage arguments are always the
  n-sense differences vgs = vg - vs, vds = vd - vs, vsb = vs - vb; p-channel
  devices mirror them internally. vds of either sign is accepted (the
  channel is symmetric, terminals swap roles).
* The square-law is the level-1 model: body effect through
  vth = vth0 + gamma*(sqrt(phi2 + vsb) - sqrt(phi2)) and channel-length
  modulation through (1 + lambda*vds).
* The breakdown diode is a two-exponential curve, strictly increasing in v:
  i(v) = i_sat*(exp(v/(n*vt)) - 1) - i_bv*exp(-(v + vz)/(n*vt)).
* The memristor is linear ion drift with a Joglekar window:
  R(w) = r_on*w + r_off*(1 - w), dw/dt = k_drift*i*(1 - (2w - 1)**(2p)).
  State is frozen in DC and integrated alongside the node equations in
  transient runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DomainError

# exp() overflows just above 709; past this point continue linearly so the
# curve stays finite, monotone and C1 while Newton is still far from home.
_EXP_CAP = 700.0


def _safe_exp(x: float) -> tuple[float, float]:
    """Return (exp(x), d/dx exp(x)) with a linear tail above the cap."""
    if x <= _EXP_CAP:
        e = math.exp(x)
        return e, e
    cap = math.exp(_EXP_CAP)
    return cap * (1.0 + (x - _EXP_CAP)), cap


@dataclass(frozen=True)
class ResistorParams:
    resistance: float

    def __post_init__(self):
        if not self.resistance > 0.0:
            raise DomainError(f"resistance must be positive, got {self.resistance}")


@dataclass(frozen=True)
class CapacitorParams:
    capacitance: float

    def __post_init__(self):
        if not self.capacitance > 0.0:
            raise DomainError(f"capacitance must be positive, got {self.capacitance}")


@dataclass(frozen=True)
class SourceWaveform:
    """Independent voltage source shape.

    kind "dc":    params = (level,)
    kind "pulse": params = (v1, v2, delay, rise, fall, width, period)
    kind "pwl":   params = (t0, v0, t1, v1, ...), times non-decreasing
    """

    kind: str
    params: tuple[float, ...]

    def __post_init__(self):
        if self.kind == "dc":
            if len(self.params) != 1:
                raise DomainError("dc source takes one level")
        elif self.kind == "pulse":
            if len(self.params) != 7:
                raise DomainError("pulse takes (v1 v2 delay rise fall width period)")
            _, _, delay, rise, fall, width, period = self.params
            if delay < 0 or rise < 0 or fall < 0 or width < 0 or period <= 0:
                raise DomainError("pulse timing values must be non-negative, period positive")
            if rise + width + fall > period:
                raise DomainError("pulse rise + width + fall exceeds period")
        elif self.kind == "pwl":
            if len(self.params) < 4 or len(self.params) % 2:
                raise DomainError("pwl takes at least two (time, value) pairs")
            times = self.params[0::2]
            if any(t1 < t0 for t0, t1 in zip(times, times[1:])):
                raise DomainError("pwl times must be non-decreasing")
        else:
            raise DomainError(f"unknown source kind {self.kind!r}")

    def value(self, t: float = 0.0) -> float:
        if self.kind == "dc":
            return self.params[0]
        if self.kind == "pulse":
            v1, v2, delay, rise, fall, width, period = self.params
            if t < delay:
                return v1
            tt = math.fmod(t - delay, period)
            if tt < rise:
                return v2 if rise == 0.0 else v1 + (v2 - v1) * tt / rise
            tt -= rise
            if tt < width:
                return v2
            tt -= width
            if tt < fall:
                return v2 + (v1 - v2) * tt / fall
            return v1
        times = self.params[0::2]
        vals = self.params[1::2]
        if t <= times[0]:
            return vals[0]
        for (t0, v0), (t1, v1) in zip(zip(times, vals), zip(times[1:], vals[1:])):
            if t <= t1:
                if t1 == t0:
                    return v1
                return v0 + (v1 - v0) * (t - t0) / (t1 - t0)
        return vals[-1]


@dataclass(frozen=True)
class MosfetParams:
    polarity: str = "n"
    vth0: float = 0.45
    kprime: float = 170e-6
    w_over_l: float = 1.0
    lam: float = 0.05
    gamma: float = 0.4
    phi2: float = 0.7

    def __post_init__(self):
        if self.polarity not in ("n", "p"):
            raise DomainError(f"polarity must be 'n' or 'p', got {self.polarity!r}")
        if self.kprime <= 0 or self.w_over_l <= 0 or self.phi2 <= 0:
            raise DomainError("kprime, w_over_l and phi2 must be positive")
        if self.lam < 0 or self.gamma < 0:
            raise DomainError("lambda and gamma must be non-negative")


def mosfet_defaults(polarity: str) -> MosfetParams:
    """0.18u-class square-law defaults; p-channel differs only in kprime."""
    kprime = 170e-6 if polarity == "n" else 60e-6
    return MosfetParams(polarity=polarity, kprime=kprime)


@dataclass(frozen=True)
class ZenerParams:
    i_sat: float = 1e-14
    n: float = 1.2
    v_thermal: float = 0.02585
    vz: float = 4.2
    i_bv: float = 1e-3

    def __post_init__(self):
        if self.i_sat <= 0 or self.n <= 0 or self.v_thermal <= 0 or self.vz <= 0 or self.i_bv <= 0:
            raise DomainError("zener parameters must all be positive")


@dataclass(frozen=True)
class MemristorParams:
    r_on: float = 1e3
    r_off: float = 100e3
    w0: float = 0.5
    k_drift: float = 1e4
    p_window: int = 2

    def __post_init__(self):
        if not 0 < self.r_on <= self.r_off:
            raise DomainError("need 0 < r_on <= r_off")
        if not 0.0 <= self.w0 <= 1.0:
            raise DomainError(f"w0 must lie in [0, 1], got {self.w0}")
        if self.k_drift <= 0:
            raise DomainError("k_drift must be positive")
        if int(self.p_window) != self.p_window or self.p_window < 1:
            raise DomainError("p_window must be a positive integer")


# ---------------------------------------------------------------------------
# device equations


def _square_law(p: MosfetParams, vgs: float, vds: float, vsb: float,
                clamp_body: bool) -> tuple[float, float, float, float]:
    """n-sense level-1 current and partials, vds >= 0 assumed.

    Returns (ids, di/dvgs, di/dvds, di/dvsb).
    """
    body = p.phi2 + vsb
    if body < 0.0:
        if not clamp_body:
            raise DomainError(
                f"phi2 + vsb = {body:.6g} < 0: source-bulk junction forward biased")
        body = 0.0
    if p.gamma and body > 0.0:
        root = math.sqrt(body)
        vth = p.vth0 + p.gamma * (root - math.sqrt(p.phi2))
        dvth = p.gamma / (2.0 * root)
    else:
        vth = p.vth0 + (p.gamma * (0.0 - math.sqrt(p.phi2)) if p.gamma else 0.0)
        dvth = 0.0
    vov = vgs - vth
    if vov <= 0.0:
        return 0.0, 0.0, 0.0, 0.0
    k = p.kprime * p.w_over_l
    cm = 1.0 + p.lam * vds
    if vds < vov:
        i = k * (vov * vds - 0.5 * vds * vds) * cm
        di_dvgs = k * vds * cm
        di_dvds = k * ((vov - vds) * cm + (vov * vds - 0.5 * vds * vds) * p.lam)
        di_dvth = -k * vds * cm
    else:
        i = 0.5 * k * vov * vov * cm
        di_dvgs = k * vov * cm
        di_dvds = 0.5 * k * vov * vov * p.lam
        di_dvth = -k * vov * cm
    return i, di_dvgs, di_dvds, di_dvth * dvth


def mosfet_ids_grad(p: MosfetParams, vgs: float, vds: float, vsb: float,
                    clamp_body: bool = False) -> tuple[float, float, float, float]:
    """Drain current and its partials w.r.t. (vgs, vds, vsb), physical sign.

    Handles p-channel mirroring and drain/source role reversal for vds of
    the "wrong" sign, so the result is differentiable except at the usual
    region boundaries.
    """
    if p.polarity == "p":
        i, gg, gd, gb = mosfet_ids_grad(
            MosfetParams(polarity="n", vth0=p.vth0, kprime=p.kprime,
                         w_over_l=p.w_over_l, lam=p.lam, gamma=p.gamma, phi2=p.phi2),
            -vgs, -vds, -vsb, clamp_body)
        return -i, gg, gd, gb
    if vds >= 0.0:
        return _square_law(p, vgs, vds, vsb, clamp_body)
    # swapped operation: the drain terminal acts as source
    i, gg, gd, gb = _square_law(p, vgs - vds, -vds, vsb + vds, clamp_body)
    return -i, -gg, gg + gd - gb, -gb


def mosfet_current(p: MosfetParams, vgs: float, vds: float, vsb: float = 0.0) -> float:
    """Physical drain current of the level-1 model (see module docstring)."""
    return mosfet_ids_grad(p, vgs, vds, vsb)[0]


def zener_ig(p: ZenerParams, v: float) -> tuple[float, float]:
    """Current and small-signal conductance of the breakdown diode at v."""
    nvt = p.n * p.v_thermal
    ef, def_ = _safe_exp(v / nvt)
    er, der = _safe_exp(-(v + p.vz) / nvt)
    i = p.i_sat * (ef - 1.0) - p.i_bv * er
    g = (p.i_sat * def_ + p.i_bv * der) / nvt
    return i, g


def zener_current(p: ZenerParams, v: float) -> float:
    return zener_ig(p, v)[0]


def memristance(p: MemristorParams, w: float) -> float:
    if not 0.0 <= w <= 1.0:
        raise DomainError(f"state w must lie in [0, 1], got {w}")
    return p.r_on * w + p.r_off * (1.0 - w)


def window_factor(p: MemristorParams, w: float) -> float:
    """Joglekar boundary window, zero at w = 0 and w = 1."""
    return 1.0 - (2.0 * w - 1.0) ** (2 * p.p_window)


def memristor_state_rate(p: MemristorParams, w: float, i: float) -> float:
    """dw/dt for device current i (first node to second)."""
    return p.k_drift * i * window_factor(p, w)


def _window_grad(p: MemristorParams, w: float) -> float:
    return -4.0 * p.p_window * (2.0 * w - 1.0) ** (2 * p.p_window - 1)


# ---------------------------------------------------------------------------
# stamps

GROUND = "0"


def vkey(node: str) -> tuple[str, str]:
    return ("v", node)


@dataclass
class StampContext:
    """Everything a stamp may need beyond the current iterate."""

    mode: str = "dc"                  # "dc" or "tran"
    time: float = 0.0                 # evaluation time (t_{n+1} in transient)
    dt: float = 0.0
    method: str = "backward-euler"    # or "trapezoidal"
    srcscale: float = 1.0             # source-stepping homotopy scale
    gmin: float = 0.0
    overrides: dict = field(default_factory=dict)   # source name -> forced level
    prev_step: dict = field(default_factory=dict)   # unknown key -> value at t_n
    prev_iter: dict = field(default_factory=dict)   # unknown key -> last Newton iterate
    hist: dict = field(default_factory=dict)        # element name -> companion memory


class StampAccumulator:
    """Collects Jacobian and residual contributions keyed by unknown.

    Residual rows also accumulate the sum of contribution magnitudes,
    which the solver uses as the local convergence scale.
    """

    def __init__(self):
        self.jac: dict[tuple, float] = {}
        self.res: dict[tuple, float] = {}
        self.scale: dict[tuple, float] = {}

    def add_j(self, row, col, val):
        if val == 0.0:
            return
        key = (row, col)
        self.jac[key] = self.jac.get(key, 0.0) + val

    def add_f(self, row, val):
        self.res[row] = self.res.get(row, 0.0) + val
        self.scale[row] = self.scale.get(row, 0.0) + abs(val)


def _get(x: dict, key) -> float:
    if key[0] == "v" and key[1] == GROUND:
        return 0.0
    return x[key]


def _stamp_two_terminal(out: StampAccumulator, a, b, i: float, g: float):
    out.add_f(a, i)
    out.add_f(b, -i)
    out.add_j(a, a, g)
    out.add_j(a, b, -g)
    out.add_j(b, a, -g)
    out.add_j(b, b, g)


def _stamp_resistor(elem, x, ctx, out):
    a, b = vkey(elem.nodes[0]), vkey(elem.nodes[1])
    g = 1.0 / elem.params.resistance
    _stamp_two_terminal(out, a, b, (_get(x, a) - _get(x, b)) * g, g)


def _stamp_capacitor(elem, x, ctx, out):
    if ctx.mode == "dc":
        return  # open circuit
    a, b = vkey(elem.nodes[0]), vkey(elem.nodes[1])
    v = _get(x, a) - _get(x, b)
    vp = _get(ctx.prev_step, a) - _get(ctx.prev_step, b)
    c = elem.params.capacitance
    if ctx.method == "trapezoidal":
        g = 2.0 * c / ctx.dt
        i = g * (v - vp) - ctx.hist.get(elem.name, 0.0)
    else:
        g = c / ctx.dt
        i = g * (v - vp)
    _stamp_two_terminal(out, a, b, i, g)


def _stamp_vsource(elem, x, ctx, out):
    a, b = vkey(elem.nodes[0]), vkey(elem.nodes[1])
    ik = ("i", elem.name)
    if elem.name in ctx.overrides:
        level = ctx.overrides[elem.name]
    else:
        level = elem.params.value(ctx.time if ctx.mode == "tran" else 0.0)
    level *= ctx.srcscale
    i = x[ik]
    out.add_f(a, i)
    out.add_f(b, -i)
    out.add_j(a, ik, 1.0)
    out.add_j(b, ik, -1.0)
    out.add_f(ik, _get(x, a))
    out.add_f(ik, -_get(x, b))
    out.add_f(ik, -level)
    out.add_j(ik, a, 1.0)
    out.add_j(ik, b, -1.0)


def _pnjlim(vnew: float, vold: float, nvt: float, vcrit: float) -> float:
    """Classic junction-voltage limiting for one exponential branch."""
    if vnew <= vcrit or abs(vnew - vold) <= 2.0 * nvt:
        return vnew
    if vold > 0.0:
        arg = 1.0 + (vnew - vold) / nvt
        return vold + nvt * math.log(arg) if arg > 0.0 else vcrit
    return nvt * math.log(max(vnew / nvt, 1.0 + 1e-12))


def _zener_limited_v(p: ZenerParams, v: float, vprev: float) -> float:
    nvt = p.n * p.v_thermal
    vcrit_f = nvt * math.log(nvt / (math.sqrt(2.0) * p.i_sat))
    v = _pnjlim(v, vprev, nvt, vcrit_f)
    # breakdown branch, mirrored: overdrive u = -(v + vz)
    vcrit_r = nvt * math.log(nvt / (math.sqrt(2.0) * p.i_bv))
    u = _pnjlim(-(v + p.vz), -(vprev + p.vz), nvt, vcrit_r)
    return -u - p.vz


def _stamp_zener(elem, x, ctx, out):
    a, b = vkey(elem.nodes[0]), vkey(elem.nodes[1])
    p = elem.params
    v = _get(x, a) - _get(x, b)
    if ctx.prev_iter:
        vlim = _zener_limited_v(p, v, _get(ctx.prev_iter, a) - _get(ctx.prev_iter, b))
    else:
        vlim = v
    i0, g = zener_ig(p, vlim)
    # tangent extrapolation back to the unlimited voltage; exact once
    # the iterates stop moving
    i = i0 + g * (v - vlim)
    _stamp_two_terminal(out, a, b, i, g)


def _stamp_mosfet(elem, x, ctx, out):
    d, g_, s, b = (vkey(n) for n in elem.nodes)
    vd, vg, vs, vb = (_get(x, k) for k in (d, g_, s, b))
    i, di_dvgs, di_dvds, di_dvsb = mosfet_ids_grad(
        elem.params, vg - vs, vd - vs, vs - vb, clamp_body=True)
    out.add_f(d, i)
    out.add_f(s, -i)
    dd = di_dvds
    dg = di_dvgs
    db = -di_dvsb
    ds = -di_dvgs - di_dvds + di_dvsb
    for col, val in ((d, dd), (g_, dg), (s, ds), (b, db)):
        out.add_j(d, col, val)
        out.add_j(s, col, -val)


def _stamp_memristor(elem, x, ctx, out):
    a, b = vkey(elem.nodes[0]), vkey(elem.nodes[1])
    p = elem.params
    va, vb = _get(x, a), _get(x, b)
    if ctx.mode == "dc":
        g = 1.0 / memristance(p, p.w0)
        _stamp_two_terminal(out, a, b, (va - vb) * g, g)
        return
    wk = ("w", elem.name)
    w = min(max(x[wk], 0.0), 1.0)
    r = memristance(p, w)
    g = 1.0 / r
    i = (va - vb) * g
    _stamp_two_terminal(out, a, b, i, g)
    di_dw = -(va - vb) * (p.r_on - p.r_off) / (r * r)
    out.add_j(a, wk, di_dw)
    out.add_j(b, wk, -di_dw)
    # implicit state equation, same integration rule as the node system
    fw = window_factor(p, w)
    dfw = _window_grad(p, w)
    rate = p.k_drift * i * fw
    drate_dw = p.k_drift * (di_dw * fw + i * dfw)
    drate_dv = p.k_drift * fw * g
    wprev = ctx.prev_step.get(wk, p.w0)
    if ctx.method == "trapezoidal":
        dte = 0.5 * ctx.dt
        out.add_f(wk, w - wprev)
        out.add_f(wk, -dte * (rate + ctx.hist.get(elem.name, 0.0)))
    else:
        dte = ctx.dt
        out.add_f(wk, w - wprev)
        out.add_f(wk, -dte * rate)
    out.add_j(wk, wk, 1.0 - dte * drate_dw)
    out.add_j(wk, a, -dte * drate_dv)
    out.add_j(wk, b, dte * drate_dv)


_STAMPS = {
    "r": _stamp_resistor,
    "c": _stamp_capacitor,
    "v": _stamp_vsource,
    "d": _stamp_zener,
    "m": _stamp_mosfet,
    "xmr": _stamp_memristor,
}


def stamp(elem, x: dict, ctx: StampContext, out: StampAccumulator) -> None:
    """Add elem's Jacobian and residual contributions at iterate x."""
    _STAMPS[elem.kind](elem, x, ctx, out)


def element_current(elem, x: dict, ctx: StampContext) -> float:
    """Branch current at a solved point (first node to second)."""
    if elem.kind == "r":
        a, b = vkey(elem.nodes[0]), vkey(elem.nodes[1])
        return (_get(x, a) - _get(x, b)) / elem.params.resistance
    if elem.kind == "xmr":
        a, b = vkey(elem.nodes[0]), vkey(elem.nodes[1])
        if ctx.mode == "dc":
            w = elem.params.w0
        else:
            w = min(max(x[("w", elem.name)], 0.0), 1.0)
        return (_get(x, a) - _get(x, b)) / memristance(elem.params, w)
    if elem.kind == "d":
        a, b = vkey(elem.nodes[0]), vkey(elem.nodes[1])
        return zener_current(elem.params, _get(x, a) - _get(x, b))
    if elem.kind == "v":
        return x[("i", elem.name)]
    raise ValueError(f"no branch current defined for kind {elem.kind!r}")


def initial_history(elements, x0: dict) -> dict:
    """Companion memory at t = 0: capacitors carry no current at the DC
    point, memristor drift rates follow from the DC currents."""
    hist = {}
    ctx = StampContext(mode="dc")
    for elem in elements:
        if elem.kind == "c":
            hist[elem.name] = 0.0
        elif elem.kind == "xmr":
            i = element_current(elem, x0, ctx)
            hist[elem.name] = memristor_state_rate(elem.params, elem.params.w0, i)
    return hist


def post_step_history(elements, x: dict, ctx: StampContext) -> dict:
    """Companion memory after an accepted step at iterate x."""
    hist = {}
    for elem in elements:
        if elem.kind == "c":
            a, b = vkey(elem.nodes[0]), vkey(elem.nodes[1])
            v = _get(x, a) - _get(x, b)
            vp = _get(ctx.prev_step, a) - _get(ctx.prev_step, b)
            c = elem.params.capacitance
            if ctx.method == "trapezoidal":
                hist[elem.name] = 2.0 * c / ctx.dt * (v - vp) - ctx.hist.get(elem.name, 0.0)
            else:
                hist[elem.name] = c / ctx.dt * (v - vp)
        elif elem.kind == "xmr":
            wk = ("w", elem.name)
            w = min(max(x[wk], 0.0), 1.0)
            i = (_get(x, vkey(elem.nodes[0])) - _get(x, vkey(elem.nodes[1]))) \
                / memristance(elem.params, w)
            hist[elem.name] = memristor_state_rate(elem.params, w, i)
    return hist
