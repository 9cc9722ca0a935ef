"""Forward evolution, exact adjoint evolution, and terminal certification.

The forward system per Fourier mode n is the 3-dimensional ODE

    y'' = -n^2 y - M z + f_n(t),      z' = -n^2 y,     z(0) = 0,

whose homogeneous flow is diagonalized exactly by the characteristic-cubic
roots (the mode ODE shares its characteristic polynomial with the spectrum).
The integrator advances the exact flow and quadratures only the forcing
(Simpson per step), so all discretization error sits in the source term.
A classical RK4 path is kept for cross-validation.

The adjoint systems are evolved with no time-stepping error at all: the
moving-frame adjoint is a closed-form eigenvector expansion, and the fixed
frame is reached from it by the change of variables x -> x + ct.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass
from typing import IO

import numpy as np

from .model import (
    FourierField,
    InvalidParameterError,
    ModelParams,
    StateTriple,
    sobolev_norm,
)
from .moment_control import ControlField, FrameError
from .spectrum import mu1_array, shifted_spectrum_arrays, spectrum_modes

__all__ = [
    "Trajectory",
    "BasisDegeneracyError",
    "simulate_forward",
    "simulate_adjoint_exact",
    "adjoint_physical_frame",
    "duality_residual",
    "terminal_report",
    "z_consistency_residual",
    "write_trajectory_csv",
]


class BasisDegeneracyError(RuntimeError):
    """A per-mode eigenvector system is numerically singular."""


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    """Stored evolution of per-mode coefficient triples.

    `states[i, :, k]` is the (first, second, third) coefficient triple of the
    mode `modes[i]` at time `times[k]`; the roles are (y, y_t, z) for forward
    runs and (phi, phi_t, psi) for adjoint runs.
    """

    params: ModelParams
    modes: np.ndarray
    times: np.ndarray
    states: np.ndarray

    def __post_init__(self) -> None:
        for arr in (self.modes, self.times, self.states):
            arr.setflags(write=False)

    @property
    def N(self) -> int:
        return int(self.modes.max())

    def state_at(self, k: int) -> StateTriple:
        N = self.N
        comps = []
        for c in range(3):
            vals = np.zeros(2 * N + 1, dtype=complex)
            for i, n in enumerate(self.modes):
                vals[int(n) + N] = self.states[i, c, k]
            comps.append(FourierField(N, vals))
        return StateTriple(*comps)

    @property
    def terminal(self) -> StateTriple:
        return self.state_at(len(self.times) - 1)

    @property
    def snapshots(self) -> list[StateTriple]:
        return [self.state_at(k) for k in range(len(self.times))]


# ---------------------------------------------------------------------------
# forward integrator
# ---------------------------------------------------------------------------

def _mode_eigensystem(params: ModelParams, modes: np.ndarray):
    """Eigenvalues and eigenvector frames of the per-mode forward generators."""
    absn = np.abs(modes)
    mu1 = mu1_array(absn, params.M)
    beta = np.sqrt(3.0 * (mu1 / 2.0) ** 2 + absn.astype(float) ** 2)
    mu = np.stack([mu1.astype(complex), -mu1 / 2 + 1j * beta, -mu1 / 2 - 1j * beta], axis=1)
    m = len(modes)
    V = np.empty((m, 3, 3), dtype=complex)
    V[:, 0, :] = 1.0
    V[:, 1, :] = mu
    V[:, 2, :] = -(absn.astype(float) ** 2)[:, None] / mu
    Vinv = np.linalg.inv(V)
    return mu, V, Vinv


def _forcing_samples(
    u: ControlField | None,
    params: ModelParams,
    modes: np.ndarray,
    tgrid: np.ndarray,
    path: str,
) -> np.ndarray:
    """Mode projections of the indicator-masked control on the sample grid."""
    F = np.zeros((len(modes), len(tgrid)), dtype=complex)
    if u is None:
        return F
    if u.frame != "physical":
        raise FrameError("simulate_forward drives the fixed frame; pass a "
                         "physical-frame control (see to_physical_frame)")
    if path == "closed_form":
        for i, n in enumerate(modes):
            F[i] = u.mode_projection(int(n), tgrid)
        return F
    if path != "grid":
        raise InvalidParameterError(f"unknown forcing path {path!r}")
    K = params.grid_size
    x = 2.0 * np.pi * np.arange(K) / K
    for k, t in enumerate(tgrid):
        spec = np.fft.fft(u.evaluate(np.full(K, t), x)) / K
        for i, n in enumerate(modes):
            F[i, k] = spec[int(n) % K]
    return F


def simulate_forward(
    params: ModelParams,
    y0: FourierField,
    y1: FourierField,
    u: ControlField | None,
    n_steps: int,
    store_stride: int | None = None,
    method: str = "exponential",
    forcing_path: str = "closed_form",
) -> Trajectory:
    """Evolve (y, y_t, z) from (y0, y1, 0) under the physical-frame control.

    The homogeneous flow per mode is the exact 3x3 exponential built from the
    characteristic-cubic eigensystem; the source enters through per-step
    Simpson quadrature in the eigencoordinates.  `method="rk4"` switches to a
    classical fourth-order step on the same forcing samples.
    """
    N = params.N
    if y0.N != N or y1.N != N:
        raise InvalidParameterError("data truncation must match params.N")
    if n_steps < 1:
        raise InvalidParameterError("n_steps must be positive")
    if n_steps < 10.0 * params.T * N:
        warnings.warn(
            f"n_steps = {n_steps} is below the resolution rule 10*T*N = "
            f"{10.0 * params.T * N:.0f}; source quadrature may dominate",
            stacklevel=2)
    stride = store_stride if store_stride is not None else max(1, math.ceil(n_steps / 200))
    modes = spectrum_modes(N)
    h = params.T / n_steps
    tgrid = 0.5 * h * np.arange(2 * n_steps + 1)
    F = _forcing_samples(u, params, modes, tgrid, forcing_path)

    idx = modes + N
    state0 = np.stack(
        [y0.values[idx], y1.values[idx], np.zeros(len(modes), dtype=complex)], axis=1)

    stored_ks = list(range(0, n_steps + 1, stride))
    if stored_ks[-1] != n_steps:
        stored_ks.append(n_steps)
    times = np.array([k * h for k in stored_ks])
    states = np.empty((len(modes), 3, len(stored_ks)), dtype=complex)

    if method == "exponential":
        mu, V, Vinv = _mode_eigensystem(params, modes)
        E_full = np.exp(mu * h)
        E_half = np.exp(mu * h / 2.0)
        g = Vinv[:, :, 1]  # source enters the second component
        w = np.einsum("mij,mj->mi", Vinv, state0)
        pos = 0
        if stored_ks[0] == 0:
            states[:, :, 0] = state0
            pos = 1
        for k in range(n_steps):
            f0 = F[:, 2 * k][:, None]
            fh = F[:, 2 * k + 1][:, None]
            f1 = F[:, 2 * k + 2][:, None]
            quad = (h / 6.0) * (E_full * f0 + 4.0 * E_half * fh + f1)
            w = E_full * w + g * quad
            if pos < len(stored_ks) and stored_ks[pos] == k + 1:
                states[:, :, pos] = np.einsum("mij,mj->mi", V, w)
                pos += 1
    elif method == "rk4":
        n2 = (np.abs(modes).astype(float) ** 2)[:, None]
        M = params.M

        def rhs(s: np.ndarray, f: np.ndarray) -> np.ndarray:
            out = np.empty_like(s)
            out[:, 0] = s[:, 1]
            out[:, 1] = -n2[:, 0] * s[:, 0] - M * s[:, 2] + f
            out[:, 2] = -n2[:, 0] * s[:, 0]
            return out

        s = state0.copy()
        pos = 0
        if stored_ks[0] == 0:
            states[:, :, 0] = s
            pos = 1
        for k in range(n_steps):
            f0, fh, f1 = F[:, 2 * k], F[:, 2 * k + 1], F[:, 2 * k + 2]
            k1 = rhs(s, f0)
            k2 = rhs(s + 0.5 * h * k1, fh)
            k3 = rhs(s + 0.5 * h * k2, fh)
            k4 = rhs(s + h * k3, f1)
            s = s + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            if pos < len(stored_ks) and stored_ks[pos] == k + 1:
                states[:, :, pos] = s
                pos += 1
    else:
        raise InvalidParameterError(f"unknown method {method!r}")

    return Trajectory(params=params, modes=modes, times=times, states=states)


# ---------------------------------------------------------------------------
# adjoint evolutions (closed form)
# ---------------------------------------------------------------------------

def _psi_basis(params: ModelParams, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-mode eigenvector matrices of the moving-frame generator.

    Returns (lam, P) with lam[i, j-1] the branch-j eigenvalue at mode i and
    P[i] the 3x3 matrix whose columns are (1, -lambda, 1/(lambda - icn)).
    """
    modes = spectrum_modes(N)
    arrays = shifted_spectrum_arrays(params, N)
    lam = np.stack([arrays[j] for j in (1, 2, 3)], axis=1)
    icn = 1j * params.c * modes.astype(float)
    P = np.empty((len(modes), 3, 3), dtype=complex)
    P[:, 0, :] = 1.0
    P[:, 1, :] = -lam
    P[:, 2, :] = 1.0 / (lam - icn[:, None])
    return lam, P


def simulate_adjoint_exact(
    params: ModelParams, terminal: StateTriple, times: np.ndarray
) -> Trajectory:
    """Moving-frame adjoint evolved backward from its terminal triple.

    The terminal data are expanded in the per-mode eigenvector frames and the
    trajectory is the exact exponential combination; no stepping error.
    """
    N = terminal.N
    modes = spectrum_modes(N)
    lam, P = _psi_basis(params, N)
    idx = modes + N
    term = np.stack([terminal.first.values[idx],
                     terminal.second.values[idx],
                     terminal.third.values[idx]], axis=1)
    conds = np.array([np.linalg.cond(P[i]) for i in range(len(modes))])
    if np.any(~np.isfinite(conds)) or conds.max() > 1e13:
        raise BasisDegeneracyError(
            "eigenvector frame numerically singular; split the resonant "
            "eigenvalue before expanding terminal data")
    b = np.linalg.solve(P, term[:, :, None])[:, :, 0]
    times = np.asarray(times, dtype=float)
    decay = np.exp(lam[:, :, None] * (params.T - times)[None, None, :])
    states = np.einsum("mij,mjk->mik", P, b[:, :, None] * decay)
    return Trajectory(params=params, modes=modes, times=times, states=states)


def expand_in_eigenbasis(params: ModelParams, triple: StateTriple) -> np.ndarray:
    """Coefficients b[i, j] of the triple over the per-mode eigenvector frames."""
    N = triple.N
    modes = spectrum_modes(N)
    _, P = _psi_basis(params, N)
    idx = modes + N
    term = np.stack([triple.first.values[idx],
                     triple.second.values[idx],
                     triple.third.values[idx]], axis=1)
    return np.linalg.solve(P, term[:, :, None])[:, :, 0]


def adjoint_physical_frame(
    params: ModelParams, terminal: StateTriple, times: np.ndarray
) -> Trajectory:
    """Fixed-frame adjoint (p, p_t, q) via the moving-frame expansion.

    Terminal data map through x -> x + cT, the moving-frame solution is
    evaluated exactly, and the states map back with the phase e^{inct}
    (p_t picks up the transport term c p_x.)
    """
    N = terminal.N
    modes = spectrum_modes(N).astype(float)
    idx = spectrum_modes(N) + N
    phase_T = np.exp(-1j * modes * params.c * params.T)
    icn = 1j * params.c * modes
    phi0 = terminal.first.values[idx] * phase_T
    phit0 = terminal.second.values[idx] * phase_T - icn * phi0
    psi0 = terminal.third.values[idx] * phase_T

    N_ = N
    vals = np.zeros((3, 2 * N_ + 1), dtype=complex)
    vals[0, idx] = phi0
    vals[1, idx] = phit0
    vals[2, idx] = psi0
    moving_terminal = StateTriple(
        FourierField(N_, vals[0]), FourierField(N_, vals[1]), FourierField(N_, vals[2]))
    traj = simulate_adjoint_exact(params, moving_terminal, times)

    phase_t = np.exp(icn[:, None] * np.asarray(times)[None, :])
    states = np.empty_like(traj.states)
    states[:, 0, :] = traj.states[:, 0, :] * phase_t
    states[:, 1, :] = (traj.states[:, 1, :] + icn[:, None] * traj.states[:, 0, :]) * phase_t
    states[:, 2, :] = traj.states[:, 2, :] * phase_t
    return Trajectory(params=params, modes=traj.modes, times=traj.times, states=states)


# ---------------------------------------------------------------------------
# the duality identity
# ---------------------------------------------------------------------------

def duality_residual(
    params: ModelParams,
    y0: FourierField,
    y1: FourierField,
    u: ControlField | None,
    adjoint_terminal: StateTriple,
    n_steps: int,
    method: str = "exponential",
) -> dict:
    """Relative mismatch of the five-term integration-by-parts identity.

    Left side: int_0^T int u conj(p); right side: the terminal/initial duality
    pairings plus the memory term -M * 2pi sum_n z_n(T) conj(q0_n).  Forward
    states come from the integrator at n_steps; the adjoint is exact; the
    time integral on the left is composite Simpson on the same grid.

    With the exponential integrator the per-step source quadrature pairs off
    against the left-side quadrature exactly (same kernel, same nodes), so
    the residual sits at roundoff for any n_steps; the rk4 path exposes the
    expected fourth-order decay instead.
    """
    N = params.N
    traj = simulate_forward(params, y0, y1, u, n_steps, store_stride=n_steps,
                            method=method)
    h = params.T / n_steps
    tgrid = 0.5 * h * np.arange(2 * n_steps + 1)
    adj = adjoint_physical_frame(params, adjoint_terminal, tgrid)

    modes = spectrum_modes(N)
    F = _forcing_samples(u, params, modes, tgrid, "closed_form")
    integrand = 2.0 * np.pi * np.sum(F * np.conj(adj.states[:, 0, :]), axis=0)
    wts = np.ones(len(tgrid))
    wts[1::2] = 4.0
    wts[2:-1:2] = 2.0
    lhs = complex((h / 6.0) * np.sum(wts * integrand))

    idx = modes + N
    yT = traj.states[:, 0, -1]
    ytT = traj.states[:, 1, -1]
    zT = traj.states[:, 2, -1]
    p0 = adjoint_terminal.first.values[idx]
    p1 = adjoint_terminal.second.values[idx]
    q0 = adjoint_terminal.third.values[idx]
    p_at0 = adj.states[:, 0, 0]
    pt_at0 = adj.states[:, 1, 0]
    terms = {
        "yt_T_vs_p0": 2.0 * np.pi * np.sum(ytT * np.conj(p0)),
        "y_T_vs_p1": -2.0 * np.pi * np.sum(yT * np.conj(p1)),
        "y1_vs_p(0)": -2.0 * np.pi * np.sum(y1.values[idx] * np.conj(p_at0)),
        "y0_vs_pt(0)": 2.0 * np.pi * np.sum(y0.values[idx] * np.conj(pt_at0)),
        "memory_vs_q0": -params.M * 2.0 * np.pi * np.sum(zT * np.conj(q0)),
    }
    rhs = complex(sum(terms.values()))
    scale = max(abs(lhs), abs(rhs), max(abs(v) for v in terms.values()), 1e-300)
    return {
        "lhs": lhs,
        "rhs": rhs,
        "terms": terms,
        "residual": abs(lhs - rhs) / scale,
    }


# ---------------------------------------------------------------------------
# certification
# ---------------------------------------------------------------------------

def terminal_report(traj: Trajectory, y0: FourierField, y1: FourierField) -> dict:
    """Terminal norms ||y(T)||_{H^1}, ||y_t(T)||_{L^2}, ||z(T)||_{L^2}.

    The third component accumulates the memory integral, so its terminal
    smallness certifies that the history was shut down, not just the state.
    Relative values are taken against the initial data size.
    """
    term = traj.terminal
    h1 = sobolev_norm(term.first, 1.0)
    l2t = sobolev_norm(term.second, 0.0)
    l2z = sobolev_norm(term.third, 0.0)
    initial = sobolev_norm(y0, 1.0) + sobolev_norm(y1, 0.0)
    rel = (h1 + l2t + l2z) / initial if initial > 0.0 else math.inf if (h1 + l2t + l2z) else 0.0
    return {
        "h1_y": h1,
        "l2_yt": l2t,
        "l2_z": l2z,
        "initial_size": initial,
        "relative_total": rel,
    }


def z_consistency_residual(traj: Trajectory) -> float:
    """Deviation of z(t) from the running integral -n^2 int_0^t y.

    Requires densely stored snapshots (uniform grid); composite Simpson
    accumulates the integral on the stored times.  The deviation is relative
    to the trajectory scale max(1, max |z|, max n^2 |y|) since the free
    dynamics grow exponentially.
    """
    times = traj.times
    if len(times) < 3:
        raise InvalidParameterError("need at least three stored snapshots")
    h = times[1] - times[0]
    if not np.allclose(np.diff(times), h):
        raise InvalidParameterError("z-consistency check needs a uniform stored grid")
    y = traj.states[:, 0, :]
    n2 = (np.abs(traj.modes).astype(float) ** 2)[:, None]
    scale = max(1.0, float(np.abs(traj.states[:, 2, :]).max()),
                float((n2 * np.abs(y)).max()))
    worst = 0.0
    # composite Simpson over even snapshot counts from the start
    for k in range(2, len(times), 2):
        wts = np.ones(k + 1)
        wts[1:k:2] = 4.0
        wts[2:k:2] = 2.0
        integral = (h / 3.0) * (y[:, : k + 1] @ wts)
        dev = np.abs(traj.states[:, 2, k] + n2[:, 0] * integral)
        worst = max(worst, float(dev.max()))
    return worst / scale


def write_trajectory_csv(stream: IO[str], traj: Trajectory) -> None:
    writer = csv.writer(stream)
    writer.writerow(["t", "mode", "re_first", "im_first", "re_second",
                     "im_second", "re_third", "im_third"])
    for k, t in enumerate(traj.times):
        for i, n in enumerate(traj.modes):
            row = [f"{t:.12g}", int(n)]
            for c in range(3):
                v = traj.states[i, c, k]
                row += [f"{v.real:.17g}", f"{v.imag:.17g}"]
            writer.writerow(row)


def terminal_report_json(report: dict) -> str:
    return json.dumps({k: float(v) for k, v in report.items()}, sort_keys=True)
