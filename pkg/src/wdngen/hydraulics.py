"""Demand-driven hydraulic solver, extended-period simulation and scenario rules.

The steady-state problem is solved by Newton iteration on the coupled system
of link energy equations and junction continuity equations (the global
gradient formulation), vectorized over a batch of independent snapshots.
Tanks are integrated explicitly between steps.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import spsolve

from .inp_io import NetworkModel, Pipe, Pump
from .parameters import apply_inputs, baseline_values, resolve_pattern

log = logging.getLogger(__name__)

G = 9.81
RHO = 1000.0
NU = 1.0e-6  # kinematic viscosity of water, m2/s
HW_COEF = 10.667
CM_COEF = 10.29

DAMPING = 0.6
STEP_FLOOR = 0.5  # smallest line-search step
MAX_ITER = 200
HEAD_TOL = 1e-8
FLOW_TOL = 1e-10
MAX_STATUS_TRIALS = 10
DENSE_LIMIT = 400
G_MIN = 1e-7  # floor on d(loss)/dq; keeps the Jacobian regular at zero flow

# link kinds
PIPE, HEAD_PUMP, POWER_PUMP, PRV, PSV, FCV, TCV, OTHER_VALVE = range(8)
# link modes
CLOSED, OPEN, ACTIVE = 0, 1, 2

OUTPUTS = ("pressure", "demand", "head", "flowrate", "velocity", "headloss", "friction_factor")
NODE_OUTPUTS = ("pressure", "demand", "head")
LINK_OUTPUTS = ("flowrate", "velocity", "headloss", "friction_factor")


class NoFixedHead(ValueError):
    pass


class NonConvergence(RuntimeError):
    pass


# --------------------------------------------------------------------------- head loss


def swamee_jain(re, rel_rough):
    return 0.25 / np.log10(rel_rough / 3.7 + 5.74 / re**0.9) ** 2


def darcy_friction(q, diameter, roughness_mm):
    """Darcy friction factor: laminar below Re 2000, Swamee-Jain above 4000,
    linear in Re between."""
    q = np.abs(np.asarray(q, dtype=float))
    d = np.asarray(diameter, dtype=float)
    eps = np.asarray(roughness_mm, dtype=float) / 1000.0 / d
    re = 4.0 * q / (math.pi * d * NU)
    re_safe = np.maximum(re, 1e-12)
    lam = 64.0 / re_safe
    turb = swamee_jain(np.maximum(re, 4000.0), eps)
    f4000 = swamee_jain(4000.0, eps)
    trans = 64.0 / 2000.0 + (f4000 - 64.0 / 2000.0) * (re - 2000.0) / 2000.0
    return np.where(re < 2000.0, lam, np.where(re < 4000.0, trans, turb))


def _friction_loss(q, length, diameter, roughness, formula):
    """Signed friction head loss and its derivative for arrays of pipes."""
    aq = np.abs(q)
    if formula == "H-W":
        r = HW_COEF * roughness**-1.852 * diameter**-4.871 * length
        h = r * aq**1.852
        dh = 1.852 * r * aq**0.852
    elif formula == "C-M":
        r = CM_COEF * roughness**2 * length / diameter**5.33
        h = r * aq**2
        dh = 2.0 * r * aq
    else:
        k = 8.0 * length / (G * math.pi**2 * diameter**5)
        h = darcy_friction(aq, diameter, roughness) * k * aq**2
        step = np.maximum(aq * 1e-6, 1e-12)
        hp = darcy_friction(aq + step, diameter, roughness) * k * (aq + step) ** 2
        hm_q = np.maximum(aq - step, 0.0)
        hm = darcy_friction(hm_q, diameter, roughness) * k * hm_q**2
        dh = (hp - hm) / (aq + step - hm_q)
    return np.sign(q) * h, dh


def minor_coefficient(k, diameter):
    return 8.0 * k / (G * math.pi**2 * diameter**4)


def headloss(flow: float, pipe: Pipe, formula: str = "H-W") -> tuple[float, float]:
    """Head loss (m) over *pipe* at *flow* (m3/s) and the Darcy friction factor.

    For Hazen-Williams and Chezy-Manning the friction factor is the Darcy
    value that gives the same friction loss.
    """
    q = np.array([float(flow)])
    hf, _ = _friction_loss(q, pipe.length, pipe.diameter, pipe.roughness, formula)
    hm = minor_coefficient(pipe.minor_loss, pipe.diameter) * q * np.abs(q)
    return float(hf[0] + hm[0]), float(_friction_factor(q, hf, pipe.length, pipe.diameter)[0])


def _friction_factor(q, hf, length, diameter):
    area = math.pi * np.asarray(diameter) ** 2 / 4.0
    v = np.abs(q) / area
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.abs(hf) * 2.0 * G * diameter / (length * v**2)
    return np.where(v > 0, f, 0.0)


def fit_pump_curve(points) -> tuple[float, float, float]:
    """Coefficients ``(a, b, c)`` of ``h = a - b q^c`` through a pump curve.

    A single design point uses the synthetic three point rule (shutoff
    1.33 h, maximum flow 2 q).  Two points fix ``c = 2``.
    """
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) == 1:
        q1, h1 = pts[0]
        pts = [(0.0, 1.33334 * h1), (q1, h1), (2.0 * q1, 0.0)]
    if len(pts) == 2:
        (qa, ha), (qb, hb) = pts
        b = (ha - hb) / (qb**2 - qa**2)
        return ha + b * qa**2, b, 2.0
    q = np.array([p[0] for p in pts])
    h = np.array([p[1] for p in pts])
    if len(pts) == 3 and q[0] == 0.0:
        a = h[0]
        h1, h2 = a - h[1], a - h[2]
        if h1 > 0 and h2 > 0 and q[1] > 0 and q[2] > q[1]:
            c = math.log(h2 / h1) / math.log(q[2] / q[1])
            return a, h1 / q[1] ** c, c

    def resid(p):
        a, b, c = p
        return a - b * q**c - h

    sol = least_squares(resid, x0=[h.max() * 1.1, max(h.max() / max(q.max(), 1e-6) ** 2, 1e-6), 2.0],
                        bounds=([0.0, 0.0, 1.0], [np.inf, np.inf, 3.0]))
    return tuple(float(v) for v in sol.x)


# --------------------------------------------------------------------------- results


@dataclass
class HydraulicState:
    """One snapshot.  Node arrays follow ``node_names``, link arrays ``link_names``."""

    node_names: list[str]
    link_names: list[str]
    head: np.ndarray
    pressure: np.ndarray
    demand: np.ndarray
    flowrate: np.ndarray
    velocity: np.ndarray
    headloss: np.ndarray
    friction_factor: np.ndarray
    status: np.ndarray
    converged: bool = True
    iterations: int = 0

    @property
    def flow(self) -> np.ndarray:
        return self.flowrate

    def node_value(self, what: str, name: str) -> float:
        return float(getattr(self, what)[self.node_names.index(name)])

    def link_value(self, what: str, name: str) -> float:
        return float(getattr(self, what)[self.link_names.index(name)])


@dataclass
class ScenarioResult:
    """Inputs and stacked ``(num_steps, n)`` output arrays of one scenario."""

    inputs: dict
    node_names: list[str]
    link_names: list[str]
    junction_mask: np.ndarray
    outputs: dict[str, np.ndarray]
    status: np.ndarray
    converged: np.ndarray
    tank_volume: np.ndarray | None = None
    flags: list[str] = field(default_factory=list)
    valid: bool | None = None
    failure_reason: str | None = None
    expected_steps: int | None = None

    @property
    def num_steps(self) -> int:
        return self.outputs["head"].shape[0]

    def snapshot(self, t: int) -> HydraulicState:
        o = self.outputs
        return HydraulicState(
            self.node_names,
            self.link_names,
            o["head"][t],
            o["pressure"][t],
            o["demand"][t],
            o["flowrate"][t],
            o["velocity"][t],
            o["headloss"][t],
            o["friction_factor"][t],
            self.status[t],
            bool(self.converged[t]),
        )

    @property
    def snapshots(self) -> list[HydraulicState]:
        return [self.snapshot(t) for t in range(self.num_steps)]


# --------------------------------------------------------------------------- compilation


class _Topology:
    """Index structure shared by every scenario of one network."""

    def __init__(self, model: NetworkModel):
        self.node_names = model.node_names
        self.link_names = model.link_names
        self.junctions = [j.name for j in model.junctions]
        self.fixed = [n.name for n in (*model.reservoirs, *model.tanks)]
        self.nJ, self.nF, self.L = len(self.junctions), len(self.fixed), len(model.links)
        jidx = {n: i for i, n in enumerate(self.junctions)}
        fidx = {n: i for i, n in enumerate(self.fixed)}
        self.start_j = np.array([jidx.get(k.start, -1) for k in model.links], dtype=int)
        self.end_j = np.array([jidx.get(k.end, -1) for k in model.links], dtype=int)
        self.start_f = np.array([fidx.get(k.start, -1) for k in model.links], dtype=int)
        self.end_f = np.array([fidx.get(k.end, -1) for k in model.links], dtype=int)
        kinds = []
        for k in model.links:
            if isinstance(k, Pipe):
                kinds.append(PIPE)
            elif isinstance(k, Pump):
                kinds.append(HEAD_PUMP if k.kind == "head" else POWER_PUMP)
            else:
                kinds.append({"PRV": PRV, "PSV": PSV, "FCV": FCV, "TCV": TCV}.get(k.kind, OTHER_VALVE))
        self.kind = np.array(kinds, dtype=int)
        self.formula = model.headloss_formula
        self.n_res = len(model.reservoirs)
        self.n = self.L + self.nJ
        # Jacobian sparsity: link diagonal, link-head couplings, continuity rows, junction diagonal
        L = self.L
        links = np.arange(L)
        rows = [links]
        cols = [links]
        s_ok, e_ok = self.start_j >= 0, self.end_j >= 0
        rows += [links[s_ok], links[e_ok]]
        cols += [L + self.start_j[s_ok], L + self.end_j[e_ok]]
        rows += [L + self.end_j[e_ok], L + self.start_j[s_ok]]
        cols += [links[e_ok], links[s_ok]]
        rows.append(L + np.arange(self.nJ))
        cols.append(L + np.arange(self.nJ))
        self.rows = np.concatenate(rows)
        self.cols = np.concatenate(cols)
        n_s, n_e = int(s_ok.sum()), int(e_ok.sum())
        o = L
        self.sl_diag = slice(0, L)
        self.sl_hs = slice(o, o + n_s)
        o += n_s
        self.sl_he = slice(o, o + n_e)
        o += n_e
        self.sl_in = slice(o, o + n_e)
        o += n_e
        self.sl_out = slice(o, o + n_s)
        o += n_s
        self.sl_jdiag = slice(o, o + self.nJ)
        self.s_ok, self.e_ok = s_ok, e_ok
        # incidence (junction x link): +1 where the link ends, -1 where it starts
        inc = np.zeros((self.nJ, L))
        inc[self.end_j[e_ok], links[e_ok]] += 1.0
        inc[self.start_j[s_ok], links[s_ok]] -= 1.0
        self.incidence = inc
        finc = np.zeros((self.nF, L))
        finc[self.end_f[self.end_f >= 0], links[self.end_f >= 0]] += 1.0
        finc[self.start_f[self.start_f >= 0], links[self.start_f >= 0]] -= 1.0
        self.fixed_incidence = finc
        # sparse products accumulate in a fixed order, so each row's result
        # does not depend on the batch size (dense BLAS kernels may)
        self.inc_sparse = csr_matrix(inc)
        self.finc_sparse = csr_matrix(finc)

    def net_inflow(self, q: np.ndarray) -> np.ndarray:
        return np.asarray((self.inc_sparse @ q.T).T)

    def fixed_inflow(self, q: np.ndarray) -> np.ndarray:
        return np.asarray((self.finc_sparse @ q.T).T)


@dataclass
class _Coefs:
    """Per-scenario link coefficients, arrays of shape (B, L)."""

    length: np.ndarray
    diameter: np.ndarray
    roughness: np.ndarray
    minor: np.ndarray  # minor loss coefficient already in head/flow^2 units
    pa: np.ndarray  # pump curve a, b, c (head pumps) or power kW (power pumps)
    pb: np.ndarray
    pc: np.ndarray
    power: np.ndarray
    setting: np.ndarray  # head (PRV/PSV, absolute) or flow (FCV)
    fixed_status: np.ndarray  # bool: status not subject to control logic
    init_mode: np.ndarray
    cv: np.ndarray  # check-valve pipes
    junction_elev: np.ndarray  # (B, nJ)
    fixed_elev: np.ndarray  # (B, nF)

    def take(self, idx):
        return _Coefs(*(getattr(self, f)[idx] for f in self.__dataclass_fields__))


def _compile(topo: _Topology, models: list[NetworkModel]) -> _Coefs:
    B, L = len(models), topo.L
    arr = {k: np.zeros((B, L)) for k in ("length", "diameter", "roughness", "minor", "pa", "pb", "pc", "power", "setting")}
    fixed_status = np.zeros((B, L), dtype=bool)
    init_mode = np.full((B, L), OPEN, dtype=int)
    cv = np.zeros((B, L), dtype=bool)
    jel = np.zeros((B, topo.nJ))
    fel = np.zeros((B, topo.nF))
    for b, m in enumerate(models):
        elev = {n.name: n.elevation for n in m.junctions}
        elev.update({t.name: t.elevation for t in m.tanks})
        elev.update({r.name: r.base_head for r in m.reservoirs})
        jel[b] = [elev[n] for n in topo.junctions]
        fel[b] = [elev[n] for n in topo.fixed]
        for i, k in enumerate(m.links):
            if isinstance(k, Pipe):
                arr["length"][b, i] = k.length
                arr["diameter"][b, i] = k.diameter
                arr["roughness"][b, i] = k.roughness
                arr["minor"][b, i] = minor_coefficient(k.minor_loss, k.diameter)
                cv[b, i] = k.initial_status == "CV"
                fixed_status[b, i] = not cv[b, i]
                init_mode[b, i] = CLOSED if k.initial_status == "Closed" else OPEN
            elif isinstance(k, Pump):
                if k.kind == "head":
                    a, bb, c = fit_pump_curve(m.curves[k.head_curve])
                    arr["pa"][b, i], arr["pb"][b, i], arr["pc"][b, i] = a, bb, c
                else:
                    arr["power"][b, i] = k.power
                init_mode[b, i] = CLOSED if k.initial_status == "Closed" else OPEN
                fixed_status[b, i] = k.initial_status == "Closed"
            else:
                arr["diameter"][b, i] = k.diameter
                kind = topo.kind[i]
                if kind == TCV:
                    arr["minor"][b, i] = minor_coefficient(k.initial_setting, k.diameter)
                else:
                    arr["minor"][b, i] = minor_coefficient(k.minor_loss, k.diameter)
                if kind == PRV:
                    arr["setting"][b, i] = elev[k.end] + k.initial_setting
                elif kind == PSV:
                    arr["setting"][b, i] = elev[k.start] + k.initial_setting
                elif kind == FCV:
                    arr["setting"][b, i] = k.initial_setting
                if k.initial_status is not None or kind in (TCV, OTHER_VALVE):
                    fixed_status[b, i] = True
                    init_mode[b, i] = CLOSED if k.initial_status == "Closed" else OPEN
                else:
                    init_mode[b, i] = ACTIVE
    return _Coefs(**arr, fixed_status=fixed_status, init_mode=init_mode, cv=cv, junction_elev=jel, fixed_elev=fel)


# --------------------------------------------------------------------------- Newton core


def _link_loss(topo: _Topology, c: _Coefs, q: np.ndarray, speed: np.ndarray):
    """Head loss (start minus end) of every link in open mode and d/dq."""
    kind = topo.kind
    loss = np.zeros_like(q)
    dloss = np.zeros_like(q)
    pipe = kind == PIPE
    if pipe.any():
        hf, dhf = _friction_loss(q[:, pipe], c.length[:, pipe], c.diameter[:, pipe], c.roughness[:, pipe], topo.formula)
        loss[:, pipe] = hf
        dloss[:, pipe] = dhf
    valve = kind >= PRV
    any_minor = pipe | valve
    loss[:, any_minor] += c.minor[:, any_minor] * q[:, any_minor] * np.abs(q[:, any_minor])
    dloss[:, any_minor] += 2.0 * c.minor[:, any_minor] * np.abs(q[:, any_minor])
    hp = kind == HEAD_PUMP
    if hp.any():
        w = speed[:, hp]
        a, b, cc = c.pa[:, hp], c.pb[:, hp], c.pc[:, hp]
        aq = np.abs(q[:, hp])
        coef = b * w ** (2.0 - cc)
        loss[:, hp] = -(w**2 * a - coef * np.sign(q[:, hp]) * aq**cc)
        dloss[:, hp] = coef * cc * aq ** (cc - 1.0)
    pp = kind == POWER_PUMP
    if pp.any():
        qmin = 1e-4
        qq = np.maximum(q[:, pp], qmin)
        pw = c.power[:, pp] * 1000.0 * speed[:, pp] ** 3 / (RHO * G)
        loss[:, pp] = -pw / qq
        dloss[:, pp] = np.where(q[:, pp] > qmin, pw / qq**2, pw / qmin**2)
    return loss, dloss


def _isolated(topo: _Topology, mode: np.ndarray) -> np.ndarray:
    """Junctions with no path of non-closed links to a fixed-head node, (B, nJ)."""
    out = np.zeros((mode.shape[0], topo.nJ), dtype=bool)
    if topo.nJ == 0:
        return out
    start = np.where(topo.start_j >= 0, topo.start_j, topo.nJ + topo.start_f)
    end = np.where(topo.end_j >= 0, topo.end_j, topo.nJ + topo.end_f)
    nn = topo.nJ + topo.nF
    cache: dict[bytes, np.ndarray] = {}
    for b in range(mode.shape[0]):
        key = mode[b].tobytes()
        if key not in cache:
            on = mode[b] != CLOSED
            adj = coo_matrix((np.ones(on.sum()), (start[on], end[on])), shape=(nn, nn))
            _, labels = connected_components(adj, directed=False)
            fed = set(labels[topo.nJ :].tolist())
            # an active PRV/PSV pins a head, so it feeds its side too
            act = (mode[b] == ACTIVE) & np.isin(topo.kind, (PRV, PSV))
            for i in np.flatnonzero(act):
                pinned = end[i] if topo.kind[i] == PRV else start[i]
                fed.add(labels[pinned])
            cache[key] = ~np.isin(labels[: topo.nJ], list(fed))
        out[b] = cache[key]
    return out


def _newton(topo: _Topology, c: _Coefs, mode, demand, hfix, speed, q0, h0):
    """Solve the batch with fixed link modes.  Returns q, h, converged, iterations.

    Rows are iterated independently: a converged row is frozen, so each
    row's result does not depend on what else is in the batch.
    """
    B, L, nJ = demand.shape[0], topo.L, topo.nJ
    kind = topo.kind
    iso = _isolated(topo, mode)
    q, h = q0.copy(), h0.copy()
    h[iso] = 0.0
    converged = np.zeros(B, dtype=bool)
    iters = np.zeros(B, dtype=int)
    s_ok, e_ok = topo.s_ok, topo.e_ok

    def residual(cc, md, iso_, dem, hf, sp, q, h):
        loss, dloss = _link_loss(topo, cc, q, sp)
        hs = np.where(topo.start_j >= 0, h[:, np.maximum(topo.start_j, 0)], hf[:, np.maximum(topo.start_f, 0)])
        he = np.where(topo.end_j >= 0, h[:, np.maximum(topo.end_j, 0)], hf[:, np.maximum(topo.end_f, 0)])
        r_link = hs - he - loss
        r_link = np.where(md == CLOSED, q, r_link)
        act = md == ACTIVE
        r_link = np.where(act & (kind == PRV), he - cc.setting, r_link)
        r_link = np.where(act & (kind == PSV), hs - cc.setting, r_link)
        r_link = np.where(act & (kind == FCV), q - cc.setting, r_link)
        r_node = topo.net_inflow(q) - dem
        r_node = np.where(iso_, h, r_node)
        return np.concatenate([r_link, r_node], axis=1), dloss

    r, dloss = residual(c, mode, iso, demand, hfix, speed, q, h)
    for _ in range(MAX_ITER):
        idx = np.flatnonzero(~converged)
        if idx.size == 0:
            break
        iters[idx] += 1
        cc = c.take(idx)
        md, iso_, dem, hf, sp = mode[idx], iso[idx], demand[idx], hfix[idx], speed[idx]
        qa, ha, ra, dla = q[idx], h[idx], r[idx], dloss[idx]
        act = md == ACTIVE
        closed = md == CLOSED
        normal = ~closed & ~act
        vals = np.zeros((idx.size, topo.rows.size))
        diag = np.where(normal, -np.maximum(dla, G_MIN), 0.0)
        diag = np.where(closed | (act & (kind == FCV)), 1.0, diag)
        vals[:, topo.sl_diag] = diag
        hs_coef = np.where(normal, 1.0, 0.0) + np.where(act & (kind == PSV), 1.0, 0.0)
        he_coef = np.where(normal, -1.0, 0.0) + np.where(act & (kind == PRV), 1.0, 0.0)
        vals[:, topo.sl_hs] = hs_coef[:, s_ok]
        vals[:, topo.sl_he] = he_coef[:, e_ok]
        # continuity rows; isolated junctions get an identity row instead
        vals[:, topo.sl_in] = np.where(iso_[:, topo.end_j[e_ok]], 0.0, 1.0)
        vals[:, topo.sl_out] = np.where(iso_[:, topo.start_j[s_ok]], 0.0, -1.0)
        vals[:, topo.sl_jdiag] = np.where(iso_, 1.0, 0.0)
        dx = _linear_solve(topo, vals, -ra)
        # backtracking: shrink the step of rows whose residual grows
        step = np.ones(idx.size)
        base = np.linalg.norm(ra, axis=1)
        for _ in range(12):
            q_new = qa + step[:, None] * dx[:, :L]
            h_new = ha + step[:, None] * dx[:, L:]
            r_new, dl_new = residual(cc, md, iso_, dem, hf, sp, q_new, h_new)
            worse = ~(np.linalg.norm(r_new, axis=1) <= base * (1.0 - 1e-4 * step) + 1e-12) & (step > STEP_FLOOR)
            if not worse.any():
                break
            step = np.where(worse, step * DAMPING, step)
        dh = np.abs(step[:, None] * dx[:, L:]).max(axis=1) if nJ else np.zeros(idx.size)
        dq = np.abs(step[:, None] * dx[:, :L]).max(axis=1) if L else np.zeros(idx.size)
        q[idx], h[idx], r[idx], dloss[idx] = q_new, h_new, r_new, dl_new
        converged[idx] = (dh < HEAD_TOL) & (dq < FLOW_TOL) & np.isfinite(r_new).all(axis=1)
    h = np.where(iso, np.nan, h)
    return q, h, converged, iters


def _linear_solve(topo: _Topology, vals: np.ndarray, rhs: np.ndarray):
    B, n = rhs.shape
    if n <= DENSE_LIMIT:
        J = np.zeros((B, n, n))
        J[:, topo.rows, topo.cols] = vals
        try:
            return np.linalg.solve(J, rhs[..., None])[..., 0]
        except np.linalg.LinAlgError:
            out = np.full((B, n), np.nan)
            for b in range(B):
                try:
                    out[b] = np.linalg.solve(J[b], rhs[b])
                except np.linalg.LinAlgError:
                    out[b] = np.linalg.lstsq(J[b], rhs[b], rcond=None)[0]
            return out
    out = np.empty((B, n))
    for b in range(B):
        J = csr_matrix((vals[b], (topo.rows, topo.cols)), shape=(n, n))
        out[b] = spsolve(J, rhs[b])
    return out


def _update_modes(topo: _Topology, c: _Coefs, mode, q, h, hfix, speed):
    """Valve, pump and check-valve status changes.  Returns new modes."""
    tol_h, tol_q = 1e-4, 1e-7
    kind = topo.kind
    hs = np.where(topo.start_j >= 0, h[:, np.maximum(topo.start_j, 0)], hfix[:, np.maximum(topo.start_f, 0)])
    he = np.where(topo.end_j >= 0, h[:, np.maximum(topo.end_j, 0)], hfix[:, np.maximum(topo.end_f, 0)])
    new = mode.copy()
    free = ~c.fixed_status
    # check valves and pumps cannot carry reverse flow
    one_way = free & (c.cv | (kind == HEAD_PUMP) | (kind == POWER_PUMP))
    new = np.where(one_way & (mode == OPEN) & (q < -tol_q), CLOSED, new)
    reopen_cv = one_way & c.cv & (mode == CLOSED) & (hs > he + tol_h)
    shutoff = np.where(kind == HEAD_PUMP, speed**2 * c.pa, np.inf)
    reopen_pump = one_way & ~c.cv & (mode == CLOSED) & (he - hs < shutoff - tol_h)
    new = np.where(reopen_cv | reopen_pump, OPEN, new)

    s = c.setting
    prv = free & (kind == PRV)
    new = np.where(prv & (mode == ACTIVE) & (q < -tol_q), CLOSED, new)
    new = np.where(prv & (mode == ACTIVE) & (q >= -tol_q) & (hs < s - tol_h), OPEN, new)
    new = np.where(prv & (mode == OPEN) & (q < -tol_q), CLOSED, new)
    new = np.where(prv & (mode == OPEN) & (q >= -tol_q) & (he > s + tol_h), ACTIVE, new)
    new = np.where(prv & (mode == CLOSED) & (hs > s + tol_h) & (he < s - tol_h), ACTIVE, new)
    new = np.where(prv & (mode == CLOSED) & (hs > he + tol_h) & (hs <= s + tol_h), OPEN, new)

    psv = free & (kind == PSV)
    new = np.where(psv & (mode == ACTIVE) & (q < -tol_q), CLOSED, new)
    new = np.where(psv & (mode == ACTIVE) & (q >= -tol_q) & (he > s + tol_h), OPEN, new)
    new = np.where(psv & (mode == OPEN) & (q < -tol_q), CLOSED, new)
    new = np.where(psv & (mode == OPEN) & (q >= -tol_q) & (hs < s - tol_h), ACTIVE, new)
    new = np.where(psv & (mode == CLOSED) & (hs > s + tol_h) & (hs > he + tol_h), OPEN, new)

    fcv = free & (kind == FCV)
    new = np.where(fcv & (mode == ACTIVE) & (hs < he - tol_h), OPEN, new)
    new = np.where(fcv & (mode == OPEN) & (q > s + tol_q), ACTIVE, new)
    return new


def _solve_batch(topo, c, demand, hfix, speed, mode0=None, q0=None, h0=None):
    B = demand.shape[0]
    mode = c.init_mode.copy() if mode0 is None else mode0.copy()
    if q0 is None:
        area = np.where(c.diameter > 0, math.pi * c.diameter**2 / 4.0, 0.0785)
        q0 = np.where(mode == ACTIVE, np.where(topo.kind == FCV, c.setting, 0.0), area * 0.3)
        q0 = np.where(mode == CLOSED, 0.0, q0)
    if h0 is None:
        top = hfix.max(axis=1, keepdims=True) if topo.nF else np.zeros((B, 1))
        h0 = np.broadcast_to(top, (B, topo.nJ)).copy()
    h0 = np.where(np.isfinite(h0), h0, hfix.max(axis=1, keepdims=True) if topo.nF else 0.0)
    q, h, conv, total_it = _newton(topo, c, mode, demand, hfix, speed, q0, h0)
    settled = np.zeros(B, dtype=bool)
    for _ in range(MAX_STATUS_TRIALS):
        new = _update_modes(topo, c, mode, q, np.nan_to_num(h), hfix, speed)
        changed = (new != mode).any(axis=1)
        settled |= ~changed
        idx = np.flatnonzero(changed)
        if idx.size == 0:
            break
        # only rows whose link status changed are solved again
        mode[idx] = new[idx]
        q_i, h_i, conv_i, it_i = _newton(topo, c.take(idx), mode[idx], demand[idx], hfix[idx], speed[idx],
                                         q[idx], np.nan_to_num(h[idx], nan=0.0))
        q[idx], h[idx], conv[idx] = q_i, h_i, conv_i
        total_it[idx] += it_i
    conv &= settled
    return q, h, mode, conv, total_it


# --------------------------------------------------------------------------- public solver API


def _state_arrays(topo, c, q, h, hfix, demand, speed, mode):
    """Seven output measurements (node and link arrays) for a batch."""
    node_head = np.concatenate([h, hfix], axis=1)
    elev = np.concatenate([c.junction_elev, c.fixed_elev], axis=1)
    pressure = node_head - elev
    if topo.nF:
        pressure[:, topo.nJ : topo.nJ + topo.n_res] = 0.0
    fixed_dem = topo.fixed_inflow(q)
    node_dem = np.concatenate([demand, fixed_dem], axis=1)
    loss, _ = _link_loss(topo, c, q, speed)
    hs = np.where(topo.start_j >= 0, h[:, np.maximum(topo.start_j, 0)], hfix[:, np.maximum(topo.start_f, 0)])
    he = np.where(topo.end_j >= 0, h[:, np.maximum(topo.end_j, 0)], hfix[:, np.maximum(topo.end_f, 0)])
    hl = hs - he
    area = math.pi * c.diameter**2 / 4.0
    with np.errstate(divide="ignore", invalid="ignore"):
        vel = np.where(area > 0, np.abs(q) / area, 0.0)
    ff = np.zeros_like(q)
    pipe = topo.kind == PIPE
    if pipe.any():
        hf, _ = _friction_loss(q[:, pipe], c.length[:, pipe], c.diameter[:, pipe], c.roughness[:, pipe], topo.formula)
        ff[:, pipe] = _friction_factor(q[:, pipe], hf, c.length[:, pipe], c.diameter[:, pipe])
    pumps = (topo.kind == HEAD_PUMP) | (topo.kind == POWER_PUMP)
    vel[:, pumps] = 0.0
    flow = np.where(mode == CLOSED, 0.0, q)
    return {
        "head": node_head,
        "pressure": pressure,
        "demand": node_dem,
        "flowrate": flow,
        "velocity": np.where(mode == CLOSED, 0.0, vel),
        "headloss": hl,
        "friction_factor": np.where(mode == CLOSED, 0.0, ff),
    }


def solve_steady_state(model: NetworkModel, nodal_demands=None, fixed_heads=None) -> HydraulicState:
    """Single steady-state solve of an SI model.

    ``nodal_demands`` maps junction name to demand (m3/s); missing junctions
    use their base demand.  ``fixed_heads`` overrides reservoir/tank heads,
    which default to the reservoir base head and tank initial level.
    Raises :class:`NonConvergence` when Newton iteration fails.
    """
    topo = _Topology(model)
    if topo.nF == 0:
        raise NoFixedHead(f"{model.name}: no reservoir or tank")
    c = _compile(topo, [model])
    d = {j.name: j.base_demand * model.demand_multiplier for j in model.junctions}
    if nodal_demands:
        d.update(nodal_demands)
    demand = np.array([[d[n] for n in topo.junctions]])
    hf = {r.name: r.base_head for r in model.reservoirs}
    hf.update({t.name: t.elevation + t.init_level for t in model.tanks})
    if fixed_heads:
        hf.update(fixed_heads)
    hfix = np.array([[hf[n] for n in topo.fixed]])
    speed = np.array([[k.base_speed if isinstance(k, Pump) else 1.0 for k in model.links]])
    q, h, mode, conv, it = _solve_batch(topo, c, demand, hfix, speed)
    if not conv[0]:
        raise NonConvergence(f"{model.name}: no convergence after {MAX_ITER} iterations")
    arrays = _state_arrays(topo, c, q, h, hfix, demand, speed, mode)
    return HydraulicState(
        topo.node_names,
        topo.link_names,
        *(arrays[k][0] for k in ("head", "pressure", "demand", "flowrate", "velocity", "headloss", "friction_factor")),
        status=mode[0],
        converged=True,
        iterations=int(it[0]),
    )


# --------------------------------------------------------------------------- extended period


def _check_supported(model: NetworkModel) -> list[str]:
    flags = []
    for v in model.valves:
        if v.kind in ("PBV", "GPV"):
            flags.append(f"unsupported-valve:{v.name}")
    return flags


def simulate_batch(model: NetworkModel, inputs_list: list[dict], num_steps: int | None = None,
                   rules: "RuleSet | None" = None, chunk: int = 512) -> list[ScenarioResult]:
    """Simulate several scenarios of one network together.

    Each element of *inputs_list* maps parameter ids to sampled values (see
    :mod:`wdngen.parameters`); parameters not given keep their baseline.
    """
    if not model.si:
        raise ValueError("simulate_batch expects an SI model")
    topo = _Topology(model)
    if topo.nF == 0:
        raise NoFixedHead(f"{model.name}: no reservoir or tank")
    T = num_steps or model.times.num_steps
    dt_s = model.times.time_step * 3600.0
    S = len(inputs_list)
    models = [apply_inputs(model, inp) for inp in inputs_list]
    coefs = _compile(topo, models)
    base_dem = baseline_values(model, "junction_demand", T)
    demand = np.empty((S, T, topo.nJ))
    res_mult = np.ones((S, T, topo.n_res))
    speed = np.ones((S, T, topo.L))
    base_res = baseline_values(model, "reservoir_head_pattern", T)
    for s, (m, inp) in enumerate(zip(models, inputs_list)):
        dem = inp.get("junction_demand")
        demand[s] = base_dem if dem is None else np.asarray(dem, dtype=float)[:T]
        pat = inp.get("reservoir_head_pattern")
        if pat is not None:
            res_mult[s] = np.asarray(pat, dtype=float)[:T]
        elif base_res is not None:
            res_mult[s] = base_res
        for i, k in enumerate(m.links):
            if isinstance(k, Pump):
                speed[s, :, i] = k.base_speed * resolve_pattern(
                    m.patterns.get(k.speed_pattern), T, m.times.time_step, m.times.pattern_step)
    res_head = np.array([[r.base_head for r in m.reservoirs] for m in models]).reshape(S, topo.n_res)
    tanks = [list(m.tanks) for m in models]
    nT = len(model.tanks)

    out = {k: np.empty((S, T, topo.nJ + topo.nF if k in NODE_OUTPUTS else topo.L)) for k in OUTPUTS}
    status = np.empty((S, T, topo.L), dtype=np.int8)
    conv = np.empty((S, T), dtype=bool)
    volume = np.empty((S, T, nT)) if nT else None
    flags = [_check_supported(m) for m in models]

    if nT == 0:
        # steps are independent: solve every (scenario, step) pair as one batch
        hfix_all = res_head[:, None, :] * res_mult
        flat = S * T
        sc_idx = np.repeat(np.arange(S), T)
        for lo in range(0, flat, chunk):
            idx = np.arange(lo, min(lo + chunk, flat))
            si, ti = sc_idx[idx], idx % T
            c = coefs.take(si)
            d = demand[si, ti]
            hf = hfix_all[si, ti]
            sp = speed[si, ti]
            q, h, mode, cv_, _ = _solve_batch(topo, c, d, hf, sp)
            arrays = _state_arrays(topo, c, q, h, hf, d, sp, mode)
            for k in OUTPUTS:
                out[k][si, ti] = arrays[k]
            status[si, ti] = mode
            conv[si, ti] = cv_
    else:
        area = np.array([[t.area for t in ts] for ts in tanks])
        level = np.array([[t.init_level for t in ts] for ts in tanks])
        lo_lvl = np.array([[t.min_level for t in ts] for ts in tanks])
        hi_lvl = np.array([[t.max_level for t in ts] for ts in tanks])
        t_elev = np.array([[t.elevation for t in ts] for ts in tanks])
        mode = q = h = None
        for t in range(T):
            hf = np.concatenate([res_head * res_mult[:, t], t_elev + level], axis=1)
            q, h, mode, cv_, _ = _solve_batch(topo, coefs, demand[:, t], hf, speed[:, t], mode, q, h)
            arrays = _state_arrays(topo, coefs, q, h, hf, demand[:, t], speed[:, t], mode)
            for k in OUTPUTS:
                out[k][:, t] = arrays[k]
            status[:, t] = mode
            conv[:, t] = cv_
            volume[:, t] = area * level
            inflow = arrays["demand"][:, topo.nJ + topo.n_res :]  # net inflow into each tank
            new_level = level + inflow * dt_s / area
            for s in range(S):
                for i, tk in enumerate(tanks[s]):
                    if new_level[s, i] > hi_lvl[s, i] + 1e-9:
                        flags[s].append(f"tank-overflow:{tk.name}@{t}")
                    elif new_level[s, i] < lo_lvl[s, i] - 1e-9:
                        flags[s].append(f"tank-underflow:{tk.name}@{t}")
            level = np.clip(new_level, lo_lvl, hi_lvl)

    jmask = np.zeros(topo.nJ + topo.nF, dtype=bool)
    jmask[: topo.nJ] = True
    results = []
    for s in range(S):
        r = ScenarioResult(
            inputs=inputs_list[s],
            node_names=topo.node_names,
            link_names=topo.link_names,
            junction_mask=jmask,
            outputs={k: out[k][s] for k in OUTPUTS},
            status=status[s],
            converged=conv[s],
            tank_volume=None if volume is None else volume[s],
            flags=flags[s],
            expected_steps=T,
        )
        if rules is not None:
            validate_scenario(r, rules)
        results.append(r)
    return results


def simulate_scenario(model: NetworkModel, scenario_inputs: dict | None = None, rng=None,
                      rules: "RuleSet | None" = None, num_steps: int | None = None) -> ScenarioResult:
    """Extended-period simulation of one scenario, validated against *rules*.

    *rng* is accepted for interface symmetry; the simulation itself is
    deterministic.
    """
    rules = default_rules() if rules is None else rules
    return simulate_batch(model, [scenario_inputs or {}], num_steps=num_steps, rules=rules)[0]


# --------------------------------------------------------------------------- rules


@dataclass(frozen=True)
class PressureInRange:
    low: float = 0.0
    high: float = 151.0
    skip_names: tuple[str, ...] = ()
    id: str = "PressureInRange"

    def __call__(self, result: ScenarioResult) -> bool:
        p = result.outputs["pressure"][:, result.junction_mask]
        if self.skip_names:
            names = np.array(result.node_names)[result.junction_mask]
            p = p[:, ~np.isin(names, self.skip_names)]
        return bool(np.all((p > self.low) & (p <= self.high)))


@dataclass(frozen=True)
class NoSolverDivergence:
    id: str = "NoSolverDivergence"

    def __call__(self, result: ScenarioResult) -> bool:
        return bool(np.all(result.converged))


@dataclass(frozen=True)
class TimeConsistency:
    id: str = "TimeConsistency"

    def __call__(self, result: ScenarioResult) -> bool:
        T = result.num_steps
        if result.expected_steps is not None and T != result.expected_steps:
            return False
        if any(v.shape[0] != T for v in result.outputs.values()):
            return False
        for pid in ("junction_demand", "reservoir_head_pattern"):
            series = result.inputs.get(pid)
            if series is not None and np.asarray(series).shape[0] != T:
                return False
        return True


@dataclass(frozen=True)
class TankLevelsInRange:
    id: str = "TankLevelsInRange"

    def __call__(self, result: ScenarioResult) -> bool:
        return not any(f.startswith(("tank-overflow", "tank-underflow")) for f in result.flags)


@dataclass
class RuleSet:
    rules: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.rules)

    def __len__(self):
        return len(self.rules)


def default_rules(pressure_range=(0.0, 151.0), skip_names=(), time_consistency=True) -> RuleSet:
    rules = [NoSolverDivergence(), PressureInRange(pressure_range[0], pressure_range[1], tuple(skip_names))]
    if time_consistency:
        rules.append(TimeConsistency())
    return RuleSet(rules)


def validate_scenario(result: ScenarioResult, rules: RuleSet) -> bool:
    """True iff every rule holds; the first failing rule id is recorded."""
    for rule in rules:
        if not rule(result):
            result.valid = False
            result.failure_reason = rule.id
            return False
    result.valid = True
    result.failure_reason = None
    return True
