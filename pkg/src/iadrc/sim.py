"""Fixed-step closed-loop simulation, traces and metrics.

The full state stacks the plant, the exosystem and every active observer:

    [x_1..x_n | w | v | p | xi | zeta | psi1_hat]

(the last four blocks only for IADRC, the last two only for unknown S).
Everything except the plant nonlinearity, the disturbance offset and the
bilinear adaptation terms is linear, so the right-hand side is a block
matrix product plus those few terms. The v-loop block is shared verbatim by
all modes, which keeps BADRC and IADRC-without-feedforward bit-identical.
"""

from dataclasses import dataclass, field
import hashlib
import json
import re
from pathlib import Path

import numpy as np

from .controllers import badrc_control, iadrc_control
from .errors import DegenerateTrace, NumericalBlowup
from .observers import (
    HatChain,
    adaptive_update_derivatives,
    d2_estimate,
    eso_step_derivative,
    xi_filter_derivative,
)
from .linalg import char_poly
from .plant import plant_derivative

__all__ = [
    "SimScenario",
    "SimTrace",
    "MetricReport",
    "ClosedLoop",
    "run_scenario",
    "compute_metrics",
    "estimate_lag",
    "fit_decay_rate",
    "BLOWUP_LIMIT",
]

BLOWUP_LIMIT = 1e9


@dataclass
class SimScenario:
    """A complete, deterministic simulation setup.

    Observer initial states live on the observer objects of ``controller``;
    the exosystem starts at ``exosystem.w0``.
    """

    plant: object
    exosystem: object
    controller: object
    horizon: float
    dt: float = 1e-3
    x0: np.ndarray = None
    decimation: int = 10
    name: str = "scenario"
    config: dict = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.horizon < 100 * self.dt * (1 - 1e-12):
            raise ValueError("horizon must cover at least 100 steps")
        if int(self.decimation) < 1:
            raise ValueError("decimation must be a positive integer")
        n = self.plant.order
        self.x0 = np.zeros(n) if self.x0 is None else np.asarray(self.x0, dtype=float)
        if self.x0.shape != (n,):
            raise ValueError("x0 must have one entry per plant state")
        if self.controller.n != n:
            raise ValueError("controller order does not match plant order")
        if self.controller.b_n != self.plant.b_n:
            raise ValueError("controller and plant disagree on b_n")

    @property
    def steps(self):
        return int(round(self.horizon / self.dt))


@dataclass
class SimTrace:
    """Recorded signals on a shared time grid.

    ``data`` holds one column per entry of ``names``; vector signals are
    split into numbered components (``x1``, ``x2``, ...).
    """

    t: np.ndarray
    names: list
    data: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self._index = {name: i for i, name in enumerate(self.names)}

    def __getitem__(self, name):
        return self.data[:, self._index[name]]

    def __contains__(self, name):
        return name in self._index

    def block(self, prefix, count):
        return np.column_stack([self[f"{prefix}{i + 1}"] for i in range(count)])

    def window(self, fraction=0.25):
        """Boolean mask of the final ``fraction`` of the horizon."""
        t0, t1 = self.t[0], self.t[-1]
        return self.t >= t1 - fraction * (t1 - t0) - 1e-12

    def digest(self):
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.t).tobytes())
        h.update(np.ascontiguousarray(self.data).tobytes())
        h.update(",".join(self.names).encode())
        return h.hexdigest()

    def to_csv(self, path):
        path = Path(path)
        header = ",".join(["t", *self.names])
        np.savetxt(path, np.column_stack([self.t, self.data]), delimiter=",",
                   header=header, comments="", fmt="%.17g")
        return path

    @classmethod
    def read_csv(cls, path, metadata=None):
        path = Path(path)
        with open(path) as fh:
            names = fh.readline().strip().split(",")
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(t=table[:, 0], names=names[1:], data=table[:, 1:], metadata=metadata or {})


class ClosedLoop:
    """Right-hand side of the coupled plant, exosystem and observers."""

    def __init__(self, scenario):
        self.scenario = scenario
        plant, exo, ctrl = scenario.plant, scenario.exosystem, scenario.controller
        self.plant, self.exo, self.ctrl = plant, exo, ctrl
        n, b_n = plant.order, plant.b_n
        self.n, self.b_n = n, b_n
        self.mode = ctrl.mode
        self.iadrc = ctrl.mode != "BADRC"
        self.adaptive = ctrl.mode == "IADRC_unknownS"

        sizes = [("x", n), ("w", exo.dim), ("v", n + 1)]
        if self.iadrc:
            s = ctrl.imo.F.shape[0]
            sizes += [("p", n + 1), ("xi", s)]
            if self.adaptive:
                sizes += [("zeta", s), ("psi1_hat", s)]
        self.slices = {}
        start = 0
        for name, size in sizes:
            self.slices[name] = slice(start, start + size)
            start += size
        self.size = start
        self.core_size = self.slices["v"].stop
        sx, sw, sv = self.slices["x"], self.slices["w"], self.slices["v"]
        self.last = n - 1

        A_l = ctrl.eso.error_matrix
        _, b, _ = ctrl.eso.matrices
        k = ctrl.k
        core = np.zeros((self.core_size, self.core_size))
        core[: n - 1, 1:n] = np.eye(n - 1)
        core[self.last, sw] = b_n * exo.h
        core[self.last, sv] = -b_n * k
        core[sw, sw] = exo.S
        core[sv, sv] = A_l - np.outer(b, k)
        core[sv, 0] = ctrl.l
        self.core = core

        if self.iadrc:
            sp, sxi = self.slices["p"], self.slices["xi"]
            imo = ctrl.imo
            dob = np.zeros((self.size - self.core_size, self.size))
            off = self.core_size
            rows = lambda sl: slice(sl.start - off, sl.stop - off)
            dob[rows(sp), sp] = A_l
            dob[rows(sp), 0] = ctrl.l
            dob[rows(sp), sv] = -np.outer(b, k)
            dob[rows(sxi), sxi] = imo.F
            dob[rows(sxi), 0] = imo.g
            dob[rows(sxi), sp.start] = -imo.g
            if self.adaptive:
                sz = self.slices["zeta"]
                dob[rows(sz), sz] = imo.F
            self.dob = dob
            self._p_input_row = sp.start - off + self.last
            # rows of aux @ z: [psi_u^T xi, g^T P1 (xi - zeta), Gain xi]
            aux_rows = 1
            if self.adaptive:
                est = ctrl.adaptive
                s = imo.F.shape[0]
                aux_rows += 1 + s
            self.aux = np.zeros((aux_rows, self.size))
            if self.adaptive:
                self.aux[1, sxi] = est.output_row
                self.aux[1, self.slices["zeta"]] = -est.output_row
                self.aux[2:, sxi] = est.gain
            self.chain = HatChain(imo.F, imo.g, ctrl.l, b_n) if self.adaptive else None
            self.set_psi_u(imo.psi_u)
        self._bind_fast_paths()

    def set_psi_u(self, psi_u):
        """Install the feedforward vector used for ``u_d = -psi_u^T xi``."""
        if self.ctrl.force_zero_psi_u:
            psi_u = np.zeros_like(psi_u)
        self.psi_u = np.array(psi_u, dtype=float)
        sxi = self.slices["xi"]
        self.dob[self._p_input_row, sxi] = -self.b_n * self.psi_u
        self.aux[0, sxi] = self.psi_u

    def initial_state(self):
        z = np.zeros(self.size)
        z[self.slices["x"]] = self.scenario.x0
        z[self.slices["w"]] = self.exo.w0
        z[self.slices["v"]] = self.ctrl.eso.p0
        if self.iadrc:
            z[self.slices["p"]] = self.ctrl.dob_eso.p0
            z[self.slices["xi"]] = self.ctrl.imo.xi0
            if self.adaptive:
                z[self.slices["zeta"]] = self.ctrl.adaptive.zeta0
                z[self.slices["psi1_hat"]] = self.ctrl.adaptive.psi1_hat0
        return z

    def prepare_step(self, z):
        """Per-step update of the estimated psi-chain (unknown S only)."""
        if self.adaptive:
            _, _, psi_u = self.chain.update(z[self._psi[0] : self._psi[1]])
            self.set_psi_u(psi_u)

    def remainder(self, t, x):
        plant = self.plant
        return plant.nonlinearity(x, plant.omega1(t), t) + self.b_n * plant.offset_at(t)

    def _bind_fast_paths(self):
        # plain integer bounds for the per-evaluation hot path
        if self.iadrc:
            self._xi = (self.slices["xi"].start, self.slices["xi"].stop)
        if self.adaptive:
            self._zeta_last = self.slices["zeta"].stop - 1
            self._psi = (self.slices["psi1_hat"].start, self.slices["psi1_hat"].stop)

    def rhs(self, t, z):
        out = np.empty(self.size)
        mc = self.core_size
        np.dot(self.core, z[:mc], out=out[:mc])
        if self.iadrc:
            np.dot(self.dob, z, out=out[mc:])
            aux = np.dot(self.aux, z)
            out[self.last] += self.b_n * -aux[0]
            if self.adaptive:
                p0, p1 = self._psi
                out[self._zeta_last] += np.dot(z[p0:p1], z[self._xi[0] : self._xi[1]])
                out[p0:p1] = aux[2:] * aux[1]
        out[self.last] += self.remainder(t, z[: self.n])
        return out

    def modular_rhs(self, t, z):
        """Same right-hand side composed from the per-module operations.

        Slower; kept as an independent route for verification.
        """
        ctrl = self.ctrl
        x = z[self.slices["x"]]
        w = z[self.slices["w"]]
        v = z[self.slices["v"]]
        y = x[0]
        d2 = float(self.exo.h @ w)
        parts = {"w": self.exo.S @ w}
        if not self.iadrc:
            u = badrc_control(v, ctrl.k)
            parts["x"] = plant_derivative(self.plant, x, u, t, d2=d2)
            parts["v"] = eso_step_derivative(ctrl.eso, v, y, u)
        else:
            p = z[self.slices["p"]]
            xi = z[self.slices["xi"]]
            out = iadrc_control(v, ctrl.k, d2_estimate(self.psi_u, xi))
            parts["x"] = plant_derivative(self.plant, x, out.u, t, d2=d2)
            parts["v"] = eso_step_derivative(ctrl.eso, v, y, out.u_c)
            parts["p"] = eso_step_derivative(ctrl.dob_eso, p, y, out.u)
            parts["xi"] = xi_filter_derivative(ctrl.imo, xi, y, p[0])
            if self.adaptive:
                parts["zeta"], parts["psi1_hat"] = adaptive_update_derivatives(
                    ctrl.adaptive, xi, z[self.slices["zeta"]], z[self.slices["psi1_hat"]]
                )
        dz = np.empty(self.size)
        for name, sl in self.slices.items():
            dz[sl] = parts[name]
        return dz

    # recording

    def signal_names(self):
        n = self.n
        names = [f"x{i + 1}" for i in range(n + 1)]
        names += [f"w{i + 1}" for i in range(self.exo.dim)]
        names += [f"v{i + 1}" for i in range(n + 1)]
        if self.iadrc:
            s = self.ctrl.imo.F.shape[0]
            names += [f"p{i + 1}" for i in range(n + 1)]
            names += [f"xi{i + 1}" for i in range(s)]
            if self.adaptive:
                names += [f"zeta{i + 1}" for i in range(s)]
                names += [f"psi1_hat{i + 1}" for i in range(s)]
                names += [f"psi1_hat_dot{i + 1}" for i in range(s)]
        names += ["d1", "d2", "d", "eso_disturbance"]
        if self.iadrc:
            names.append("d2_hat")
        names += ["u", "u_c", "u_d"]
        return names

    def signals(self, t, z):
        n, b_n = self.n, self.b_n
        x = z[self.slices["x"]]
        w = z[self.slices["w"]]
        v = z[self.slices["v"]]
        ext = self.remainder(t, x)
        d1 = ext / b_n
        d2 = float(self.exo.h @ w)
        row = [x, [ext], w, v]
        if self.iadrc:
            xi = z[self.slices["xi"]]
            ctl = iadrc_control(v, self.ctrl.k, d2_estimate(self.psi_u, xi))
            row += [z[self.slices["p"]], xi]
            if self.adaptive:
                zeta = z[self.slices["zeta"]]
                psi = z[self.slices["psi1_hat"]]
                _, dpsi = adaptive_update_derivatives(self.ctrl.adaptive, xi, zeta, psi)
                row += [zeta, psi, dpsi]
            tail = [ctl.d2_hat, ctl.u, ctl.u_c, ctl.u_d]
        else:
            u = badrc_control(v, self.ctrl.k)
            tail = [u, u, 0.0]
        row += [[d1, d2, d1 + d2, v[n] / b_n], tail]
        return np.concatenate([np.atleast_1d(np.asarray(r, dtype=float)) for r in row])


def _true_psi1(scenario):
    ctrl = scenario.controller
    if ctrl.imo is None or scenario.exosystem.dim != ctrl.imo.F.shape[0]:
        return None
    return char_poly(ctrl.imo.F) - char_poly(scenario.exosystem.S)


def _disturbance_period(exo):
    freq = np.max(np.abs(np.linalg.eigvals(exo.S).imag))
    return float(2 * np.pi / freq) if freq > 0 else None


def run_scenario(scenario, blowup_limit=BLOWUP_LIMIT):
    """Integrate a scenario with classical fixed-step RK4.

    Deterministic: the same scenario always produces a bit-identical trace.

    Raises
    ------
    NumericalBlowup
        If any state magnitude exceeds ``blowup_limit`` or becomes
        non-finite; the exception carries the partial trace.
    """
    # overflow is reported through NumericalBlowup, not as warnings
    with np.errstate(over="ignore", invalid="ignore"):
        return _integrate(scenario, blowup_limit)


def _integrate(scenario, blowup_limit):
    loop = ClosedLoop(scenario)
    dt = scenario.dt
    steps = scenario.steps
    dec = int(scenario.decimation)
    names = loop.signal_names()
    n_rec = steps // dec + 1 + (1 if steps % dec else 0)
    t_rec = np.empty(n_rec)
    data = np.empty((n_rec, len(names)))

    z = loop.initial_state()
    rhs = loop.rhs
    half = 0.5 * dt
    sixth = dt / 6.0
    rec = 0

    def metadata():
        meta = {
            "scenario": scenario.name,
            "mode": loop.mode,
            "integrator": "rk4",
            "dt": dt,
            "horizon": scenario.horizon,
            "decimation": dec,
            "k": loop.ctrl.k.tolist(),
            "l": loop.ctrl.l.tolist(),
            "disturbance_period": _disturbance_period(loop.exo),
        }
        psi1 = _true_psi1(scenario)
        if psi1 is not None:
            meta["psi1_true"] = psi1.tolist()
        if loop.iadrc:
            meta["psi_u"] = loop.psi_u.tolist()
        if loop.adaptive:
            meta["singular_fo_count"] = loop.chain.singular_count
            meta["P1"] = loop.ctrl.adaptive.P1.tolist()
        if scenario.config is not None:
            meta["config"] = scenario.config
            meta["scenario_hash"] = hashlib.sha256(
                json.dumps(scenario.config, sort_keys=True).encode()
            ).hexdigest()
        return meta

    def partial_trace():
        return SimTrace(t=t_rec[:rec].copy(), names=names, data=data[:rec].copy(), metadata=metadata())

    # The magnitude guard runs on recorded steps only: a state that crosses
    # the limit in between keeps growing or turns non-finite, and
    # either way fails the next check.
    for i in range(steps + 1):
        t = i * dt
        if i % dec == 0 or i == steps:
            peak = np.max(np.abs(z))
            if not peak <= blowup_limit:
                what = f"magnitude {peak:.3e} exceeded {blowup_limit:.1e}" if np.isfinite(peak) else "became non-finite"
                raise NumericalBlowup(f"state {what} at t={t:.6g}", trace=partial_trace(), time=t)
            loop.prepare_step(z)
            t_rec[rec] = t
            data[rec] = loop.signals(t, z)
            rec += 1
            if i == steps:
                break
        else:
            loop.prepare_step(z)
        k1 = rhs(t, z)
        k2 = rhs(t + half, z + half * k1)
        k3 = rhs(t + half, z + half * k2)
        k4 = rhs(t + dt, z + dt * k3)
        z = z + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    if loop.adaptive:
        loop.chain.report()
    trace = SimTrace(t=t_rec, names=names, data=data, metadata=metadata())
    trace.metadata["trace_hash"] = trace.digest()
    return trace


def estimate_lag(t, reference, signal, max_lag):
    """Delay of ``signal`` behind ``reference`` maximising their correlation.

    Both series are de-meaned; each candidate shift is scored by the Pearson
    correlation over the overlapping samples. Positive results mean
    ``signal`` lags. The resolution is one sample.
    """
    dt = t[1] - t[0]
    a = np.asarray(reference, dtype=float) - np.mean(reference)
    b = np.asarray(signal, dtype=float) - np.mean(signal)
    J = min(int(round(max_lag / dt)), a.size - 2)
    best, best_lag = -np.inf, 0
    for j in range(-J, J + 1):
        if j >= 0:
            ra, rb = a[: a.size - j], b[j:]
        else:
            ra, rb = a[-j:], b[: b.size + j]
        denom = np.sqrt(np.dot(ra, ra) * np.dot(rb, rb))
        score = np.dot(ra, rb) / denom if denom > 0 else -np.inf
        if score > best:
            best, best_lag = score, j
    return best_lag * dt


def fit_decay_rate(t, err, floor_rel=1e-10, floor_abs=1e-14):
    """Exponential decay rate of ``|err|`` by log-linear least squares.

    The fit runs on the non-increasing envelope (running maximum taken from
    the end), from its peak until it first drops below
    ``max(floor_abs, floor_rel * peak)``.

    Returns
    -------
    float
        Positive for a decaying error; NaN if fewer than three samples qualify.
    """
    env = np.maximum.accumulate(np.abs(np.asarray(err, dtype=float))[::-1])[::-1]
    start = int(np.argmax(env))
    floor = max(floor_abs, floor_rel * env[start])
    below = np.nonzero(env[start:] < floor)[0]
    stop = start + (below[0] if below.size else env.size - start)
    if stop - start < 3:
        return float("nan")
    slope = np.polyfit(t[start:stop], np.log(env[start:stop]), 1)[0]
    return float(-slope)


@dataclass
class MetricReport:
    """Summary numbers of one trace.

    ``psi1_terminal_error`` is relative to ``|psi1|``; ``psi1_ball_radius``
    is the absolute largest deviation of psi1_hat from psi1 over the
    steady-state window. Fields that do not apply to the trace's mode are None.
    """

    steady_rms: dict
    steady_amplitude: dict
    d2_error_sup: float = None
    d2_error_decay_rate: float = None
    phase_lag: float = None
    phase_lag_fraction: float = None
    psi1_terminal_error: float = None
    psi1_ball_radius: float = None
    psi1_rate_peak: float = None
    psi1_rate_final_mean: float = None

    def as_dict(self):
        return {k: v for k, v in self.__dict__.items()}


def compute_metrics(trace, steady_fraction=0.25):
    """Summarise a trace.

    Steady-state quantities use the final ``steady_fraction`` of the horizon.

    Raises DegenerateTrace if that window holds fewer than two samples.
    """
    mask = trace.window(steady_fraction)
    if np.count_nonzero(mask) < 2:
        raise DegenerateTrace("steady-state window is empty")
    states = [name for name in trace.names if re.fullmatch(r"x\d+", name)]
    n = len(states) - 1
    rms, amp = {}, {}
    for name in states[:n]:
        seg = trace[name][mask]
        rms[name] = float(np.sqrt(np.mean(seg**2)))
        amp[name] = float(0.5 * (np.max(seg) - np.min(seg)))
    report = MetricReport(steady_rms=rms, steady_amplitude=amp)

    if "d2_hat" in trace:
        err = trace["d2_hat"] - trace["d2"]
        report.d2_error_sup = float(np.max(np.abs(err[mask])))
        report.d2_error_decay_rate = fit_decay_rate(trace.t, err)

    # the ESO carries the whole disturbance only in BADRC; under IADRC it sees
    # d1 plus the d2 estimation error, so a lag against d means nothing there
    period = trace.metadata.get("disturbance_period")
    if period and trace.metadata.get("mode") == "BADRC":
        lag = estimate_lag(trace.t[mask], trace["d"][mask], trace["eso_disturbance"][mask], period / 2)
        report.phase_lag = float(lag)
        report.phase_lag_fraction = float(lag / period)

    psi_true = trace.metadata.get("psi1_true")
    if "psi1_hat1" in trace and psi_true is not None:
        psi_true = np.asarray(psi_true)
        s = psi_true.size
        psi = trace.block("psi1_hat", s)
        dev = np.linalg.norm(psi - psi_true, axis=1)
        report.psi1_terminal_error = float(dev[-1] / np.linalg.norm(psi_true))
        report.psi1_ball_radius = float(np.max(dev[mask]))
        rate = np.linalg.norm(trace.block("psi1_hat_dot", s), axis=1)
        report.psi1_rate_peak = float(np.max(rate))
        report.psi1_rate_final_mean = float(np.mean(rate[mask]))
    return report
