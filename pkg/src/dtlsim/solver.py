"""Modified nodal analysis with damped Newton iteration.

Unknowns are ordered: node voltages (sorted names, ground ``0`` excluded),
then voltage-source branch currents (element order), then memristor states
(transient only). The residual form is used throughout: F(x) collects KCL
sums per node, source voltage equations and implicit state equations, and
Newton solves J dx = -F.

Robustness ladder for operating points: a structural no-DC-path-to-ground
check first (names the offending node), then plain Newton with zero gmin so
linear circuits are exact, then a geometric gmin ladder, then source
stepping. Update damping clamps per-component steps at
``options.damping_limit`` but only for unknowns that nonlinear device
stamps touch; purely linear circuits therefore converge in exactly one
Newton iteration.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import devices
from .devices import StampAccumulator, StampContext, vkey
from .errors import NoConvergence, SingularMatrix

_W_ABSTOL = 1e-12


@dataclass
class SolverOptions:
    reltol: float = 1e-3
    abstol_v: float = 1e-6
    abstol_i: float = 1e-9
    max_newton_iters: int = 100
    damping_limit: float = 0.5
    gmin_start: float = 1e-3
    gmin_final: float = 1e-12
    source_steps: int = 10


class OpPoint(dict):
    """Node name -> voltage mapping with solve metadata attached."""

    def __init__(self, voltages: dict[str, float], raw: dict, iterations: int,
                 strategy: str):
        super().__init__(voltages)
        self.raw = raw
        self.iterations = iterations
        self.strategy = strategy


@dataclass
class SweepResult:
    source: str
    inputs: np.ndarray
    voltages: dict[str, np.ndarray]
    iterations: list[int] = field(default_factory=list)
    strategies: list[str] = field(default_factory=list)

    def column(self, node: str) -> np.ndarray:
        return self.voltages[node]


@dataclass
class TransientResult:
    times: np.ndarray
    voltages: dict[str, np.ndarray]
    states: dict[str, np.ndarray]
    iterations: list[int] = field(default_factory=list)

    def column(self, node: str) -> np.ndarray:
        return self.voltages[node]


class _System:
    """Frozen unknown indexing for one circuit and analysis mode."""

    def __init__(self, circuit, transient: bool):
        self.circuit = circuit
        self.transient = transient
        keys: list[tuple] = [vkey(n) for n in circuit.nodes if n != devices.GROUND]
        keys += [("i", e.name) for e in circuit.elements if e.kind == "v"]
        if transient:
            keys += [("w", e.name) for e in circuit.elements if e.kind == "xmr"]
        self.keys = keys
        self.index = {k: i for i, k in enumerate(keys)}
        self.n = len(keys)
        nl: set[tuple] = set()
        for e in circuit.elements:
            if e.kind == "d" or e.kind == "m":
                nl.update(vkey(n) for n in e.nodes)
            elif e.kind == "xmr" and transient:
                nl.update(vkey(n) for n in e.nodes)
                nl.add(("w", e.name))
        self.nonlinear = nl

    def zeros(self) -> dict:
        return {k: 0.0 for k in self.keys}

    def assemble(self, x: dict, ctx: StampContext):
        acc = StampAccumulator()
        for e in self.circuit.elements:
            devices.stamp(e, x, ctx, acc)
        jac = np.zeros((self.n, self.n))
        res = np.zeros(self.n)
        scale = np.zeros(self.n)
        idx = self.index
        for (r, c), val in acc.jac.items():
            ri = idx.get(r)
            ci = idx.get(c)
            if ri is not None and ci is not None:
                jac[ri, ci] += val
        for r, val in acc.res.items():
            ri = idx.get(r)
            if ri is not None:
                res[ri] += val
        for r, val in acc.scale.items():
            ri = idx.get(r)
            if ri is not None:
                scale[ri] += val
        if ctx.gmin:
            for k in self.keys:
                if k[0] == "v":
                    i = idx[k]
                    jac[i, i] += ctx.gmin
                    leak = ctx.gmin * x[k]
                    res[i] += leak
                    scale[i] += abs(leak)
        return jac, res, scale

    def row_tol(self, options: SolverOptions, scale: np.ndarray) -> np.ndarray:
        tol = np.empty(self.n)
        for i, k in enumerate(self.keys):
            if k[0] == "v":
                base = options.abstol_i
            elif k[0] == "i":
                base = options.abstol_v
            else:
                base = _W_ABSTOL
            tol[i] = base + options.reltol * scale[i]
        return tol


def _check_dc_paths(circuit, transient: bool) -> None:
    """Every node needs a potential conductive path to ground."""
    nodes = set(circuit.nodes)
    if devices.GROUND not in nodes:
        raise SingularMatrix(
            f"no ground node '0'; node {min(nodes)!r} has no DC path to ground",
            node=min(nodes))
    adj: dict[str, set[str]] = {n: set() for n in nodes}
    for e in circuit.elements:
        if e.kind in ("r", "v", "d", "xmr"):
            pairs = [(e.nodes[0], e.nodes[1])]
        elif e.kind == "m":
            pairs = [(e.nodes[0], e.nodes[2])]   # channel
        elif e.kind == "c" and transient:
            pairs = [(e.nodes[0], e.nodes[1])]
        else:
            continue
        for a, b in pairs:
            adj[a].add(b)
            adj[b].add(a)
    seen = {devices.GROUND}
    stack = [devices.GROUND]
    while stack:
        for nxt in adj[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    floating = nodes - seen
    if floating:
        bad = min(floating)
        raise SingularMatrix(f"node {bad!r} has no DC path to ground", node=bad)


def _lu_solve(jac: np.ndarray, rhs: np.ndarray, keys: list[tuple]) -> np.ndarray:
    with warnings.catch_warnings():
        # the diagonal check below reports singularity as SingularMatrix
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(jac, check_finite=False)
    diag = np.abs(np.diag(lu))
    ref = diag.max() if diag.size else 0.0
    bad = np.where(diag <= ref * 1e-14)[0]
    if ref == 0.0 or bad.size:
        k = keys[int(bad[0])] if bad.size else keys[0]
        name = k[1]
        raise SingularMatrix(f"singular system at unknown {k!r}", node=name)
    return scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)


def _newton(sys: _System, x0: dict, ctx: StampContext,
            options: SolverOptions) -> tuple[dict, int]:
    x = dict(x0)
    ctx.prev_iter = dict(x)
    iters = 0
    last_res = math.inf
    while True:
        jac, res, scale = sys.assemble(x, ctx)
        tol = sys.row_tol(options, scale)
        absres = np.abs(res)
        if np.all(absres <= tol):
            return x, iters
        last_res = float(absres.max())
        if iters >= options.max_newton_iters:
            raise NoConvergence(
                f"no convergence after {iters} Newton iterations "
                f"(max residual {last_res:.3e})", residual=last_res)
        dx = _lu_solve(jac, -res, sys.keys)
        ctx.prev_iter = dict(x)
        lim = options.damping_limit
        for i, k in enumerate(sys.keys):
            step = dx[i]
            if k in sys.nonlinear and abs(step) > lim:
                step = math.copysign(lim, step)
            xi = x[k] + step
            if k[0] == "w":
                xi = min(max(xi, 0.0), 1.0)
            x[k] = xi
        iters += 1


def _gmin_ladder(options: SolverOptions) -> list[float]:
    out = []
    g = options.gmin_start
    while g > options.gmin_final:
        out.append(g)
        g /= 10.0
    out.append(options.gmin_final)
    return out


def _solve_point(sys: _System, x0: dict, ctx: StampContext,
                 options: SolverOptions) -> tuple[dict, int, str]:
    """Newton with homotopy fallbacks; ctx.gmin/srcscale are scratch."""
    try:
        ctx.gmin = 0.0
        ctx.srcscale = 1.0
        x, iters = _newton(sys, x0, ctx, options)
        return x, iters, "newton"
    except (NoConvergence, SingularMatrix):
        pass
    total = 0
    x = dict(x0)
    try:
        for g in _gmin_ladder(options):
            ctx.gmin = g
            x, iters = _newton(sys, x, ctx, options)
            total += iters
        try:
            ctx.gmin = 0.0
            x, iters = _newton(sys, x, ctx, options)
            total += iters
        except (NoConvergence, SingularMatrix):
            pass  # keep the gmin_final solution; the leak is 1e-12 S
        return x, total, "gmin-stepping"
    except (NoConvergence, SingularMatrix):
        pass
    x = sys.zeros()
    x.update((k, v) for k, v in x0.items() if k[0] == "w")
    total = 0
    last: Exception | None = None
    try:
        for k in range(1, options.source_steps + 1):
            ctx.gmin = options.gmin_final
            ctx.srcscale = k / options.source_steps
            x, iters = _newton(sys, x, ctx, options)
            total += iters
        ctx.srcscale = 1.0
        ctx.gmin = 0.0
        try:
            x, iters = _newton(sys, x, ctx, options)
            total += iters
        except (NoConvergence, SingularMatrix):
            pass
        return x, total, "source-stepping"
    except (NoConvergence, SingularMatrix) as exc:
        last = exc
    ctx.srcscale = 1.0
    raise NoConvergence(
        f"operating point did not converge (newton, gmin stepping and "
        f"source stepping all failed: {last})",
        residual=getattr(last, "residual", None))


def _voltages(sys: _System, x: dict) -> dict[str, float]:
    return {k[1]: x[k] for k in sys.keys if k[0] == "v"}


def dc_operating_point(circuit, options: SolverOptions | None = None, *,
                       overrides: dict[str, float] | None = None,
                       x0: dict | None = None) -> OpPoint:
    """Solve the DC operating point; memristor states stay frozen at w0.

    Returns an OpPoint mapping node name -> voltage (ground excluded), with
    ``raw`` (all unknowns), ``iterations`` and ``strategy`` attached.
    """
    options = options or SolverOptions()
    circuit.validate()
    _check_dc_paths(circuit, transient=False)
    sys = _System(circuit, transient=False)
    ctx = StampContext(mode="dc", overrides=dict(overrides or {}))
    start = dict(x0) if x0 is not None else sys.zeros()
    for k in sys.keys:
        start.setdefault(k, 0.0)
    x, iters, strategy = _solve_point(sys, start, ctx, options)
    return OpPoint(_voltages(sys, x), x, iters, strategy)


def sweep_points(start: float, stop: float, step: float) -> np.ndarray:
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(n)


def dc_sweep(circuit, source: str, start: float, stop: float, step: float,
             options: SolverOptions | None = None) -> SweepResult:
    """Swept operating points with continuation (each solution seeds the next)."""
    if not stop > start:
        raise ValueError(f"sweep needs stop > start, got {start} .. {stop}")
    if not step > 0.0:
        raise ValueError(f"sweep needs step > 0, got {step}")
    options = options or SolverOptions()
    circuit.validate()
    source = source.lower()
    elem = circuit.element(source)
    if elem.kind != "v" or elem.params.kind != "dc":
        raise ValueError(f"{source!r} is not a DC voltage source")
    _check_dc_paths(circuit, transient=False)
    sys = _System(circuit, transient=False)
    values = sweep_points(start, stop, step)
    nodes = [k[1] for k in sys.keys if k[0] == "v"]
    columns = {n: np.empty(values.size) for n in nodes}
    iterations: list[int] = []
    strategies: list[str] = []
    x = sys.zeros()
    for i, val in enumerate(values):
        ctx = StampContext(mode="dc", overrides={source: float(val)})
        try:
            x, iters, strategy = _solve_point(sys, x, ctx, options)
        except NoConvergence as exc:
            raise NoConvergence(
                f"sweep failed at {source}={val:.6g}: {exc}",
                residual=exc.residual, at=float(val)) from exc
        for n in nodes:
            columns[n][i] = x[vkey(n)]
        iterations.append(iters)
        strategies.append(strategy)
    return SweepResult(source, values, columns, iterations, strategies)


def transient(circuit, tstop: float, dt: float,
              method: str = "backward-euler",
              options: SolverOptions | None = None) -> TransientResult:
    """Fixed-step transient integration.

    The t=0 row is the DC operating point with sources evaluated at t=0;
    memristor states start at w0, advance by the chosen implicit rule and
    are clamped to [0, 1] after every accepted step.
    """
    if method not in ("backward-euler", "trapezoidal"):
        raise ValueError(f"unknown method {method!r}")
    if not tstop > 0.0 or not dt > 0.0 or dt > tstop:
        raise ValueError("transient needs tstop > 0 and 0 < dt <= tstop")
    options = options or SolverOptions()
    circuit.validate()
    _check_dc_paths(circuit, transient=True)

    op = dc_operating_point(circuit, options)
    sys = _System(circuit, transient=True)
    x = dict(op.raw)
    for e in circuit.elements:
        if e.kind == "xmr":
            x[("w", e.name)] = e.params.w0
    hist = devices.initial_history(circuit.elements, op.raw)

    nsteps = int(math.floor(tstop / dt + 1e-9))
    times = dt * np.arange(nsteps + 1)
    nodes = [k[1] for k in sys.keys if k[0] == "v"]
    wkeys = [k for k in sys.keys if k[0] == "w"]
    columns = {n: np.empty(nsteps + 1) for n in nodes}
    states = {k[1]: np.empty(nsteps + 1) for k in wkeys}
    iterations = [op.iterations]
    for n in nodes:
        columns[n][0] = x[vkey(n)]
    for k in wkeys:
        states[k[1]][0] = x[k]

    for step_no in range(1, nsteps + 1):
        t = float(times[step_no])
        ctx = StampContext(mode="tran", time=t, dt=dt, method=method,
                           prev_step=dict(x), hist=hist)
        try:
            x, iters, _ = _solve_point(sys, x, ctx, options)
        except NoConvergence as exc:
            raise NoConvergence(f"transient failed at t={t:.6g}s: {exc}",
                                residual=exc.residual, at=t) from exc
        for k in wkeys:
            x[k] = min(max(x[k], 0.0), 1.0)
        hist = devices.post_step_history(circuit.elements, x, ctx)
        for n in nodes:
            columns[n][step_no] = x[vkey(n)]
        for k in wkeys:
            states[k[1]][step_no] = x[k]
        iterations.append(iters)
    return TransientResult(times, columns, states, iterations)


def residual_report(circuit, op: OpPoint,
                    options: SolverOptions | None = None, *,
                    overrides: dict[str, float] | None = None) -> dict:
    """Re-assemble the KCL residual at a solved point (zero gmin).

    Returns {unknown key: (|residual|, tolerance)}; useful for verifying
    the convergence contract independently of the Newton loop. Pass the
    same ``overrides`` the point was solved with.
    """
    options = options or SolverOptions()
    sys = _System(circuit, transient=False)
    ctx = StampContext(mode="dc", overrides=dict(overrides or {}))
    _, res, scale = sys.assemble(op.raw, ctx)
    tol = sys.row_tol(options, scale)
    return {k: (abs(float(res[i])), float(tol[i])) for i, k in enumerate(sys.keys)}
