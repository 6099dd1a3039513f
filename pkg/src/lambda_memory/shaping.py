"""Control-field synthesis in the resonant adiabatic limit.

With the polarization adiabatically eliminated, retrieval becomes independent
of the control once time is reparametrized by the accumulated control energy
u(t) = int |Omega|^2 dt'.  In that clock the fields obey the control-free
system (Etilde = E / Omega)

    dEtilde/dz = -d Etilde - sqrt(d) S        Etilde(0, u) = 0
    dS/du      = -S - sqrt(d) Etilde

whose output q(u) = Etilde(1, u) depends only on the spin wave and the depth.
Any physical retrieval then reads  E(1, t) = Omega(t) q(u(t)),  so a control
that realizes a target intensity profile is found by solving the clock ODE

    dh/dt = eps_tgt(t) / q(h)^2,      Omega(t) = sqrt(dh/dt)

with the target intensity eps_tgt rescaled to the retrievable energy.  The
adiabatic elimination is used only here, for synthesis; every synthesized
control is meant to be validated with the full solver.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    Envelope,
    MediumParams,
    SpaceGrid,
    SpinWave,
    TimeGrid,
    cumulative_trapezoid,
    trapezoid,
)
from .errors import ClockRangeError, InfeasibleTargetError, InvalidParameterError

__all__ = [
    "UniversalMode",
    "ClockSolution",
    "universal_retrieval_mode",
    "solve_clock",
    "retrieval_control",
    "writing_control",
    "time_reverse",
    "retrieval_eigenmode",
]

#: fraction of the retrievable energy allowed to remain beyond u_max
TAIL_TOLERANCE = 1e-3

#: target intensity below this fraction of the peak counts as "off"
SUPPORT_FLOOR = 1e-6

#: clamping is reported only when the clamped samples carry more than this
#: fraction of the target energy; clamping deep tails is silent
CAP_REPORT_FLOOR = 1e-3

#: control spikes whose samples jointly carry less target energy than this
#: fraction are flattened to the highest materially needed level
SPIKE_CLAMP_ENERGY = 1e-6


def _real_mode(spin: SpinWave) -> np.ndarray:
    """Strip the global phase of a spin wave and return real samples.

    The shaping theory is formulated for spin waves that are real up to a
    global phase (which every stored mode in this protocol is); a genuinely
    complex profile is rejected rather than silently projected.
    """
    s = spin.samples
    anchor = s[int(np.argmax(np.abs(s)))]
    if abs(anchor) == 0:
        raise InvalidParameterError("spin wave is identically zero")
    rotated = s * np.conj(anchor) / abs(anchor)
    norm2 = float(np.sum(np.abs(rotated) ** 2))
    imag2 = float(np.sum(rotated.imag**2))
    if imag2 > 1e-4 * norm2:
        raise InvalidParameterError(
            "spin wave is not real up to a global phase "
            f"(imaginary fraction {imag2 / norm2:.2e})"
        )
    return rotated.real


def _field_step_coeffs(d: float, dz: float) -> tuple[float, float, float]:
    w = d * dz
    alpha = np.exp(-w)
    if w > 1e-8:
        i0 = (1.0 - alpha) / d
        i1 = (1.0 - (1.0 - alpha) / w) / d
    else:
        i0 = dz * (1.0 - 0.5 * w)
        i1 = 0.5 * dz * (1.0 - w / 3.0)
    return alpha, i0 - i1, i1


def adiabatic_field(boundary, source: np.ndarray, d: float, dz: float) -> np.ndarray:
    """Solve dE/dz = -d E + source for E(0) = boundary on a uniform z grid.

    Exact for piecewise-linear sources (exponential integrator), so the slab
    attenuation stays accurate even when d * dz is not small.  ``source`` may
    be (n_z,) or (n_z, m); ``boundary`` broadcasts over the trailing axis.
    """
    alpha, b0, b1 = _field_step_coeffs(d, dz)
    n_z = source.shape[0]
    contrib = b0 * source[:-1] + b1 * source[1:]
    # E_k = alpha^k E_0 + sum_j alpha^(k-1-j) contrib_j, evaluated as a scaled
    # cumulative sum; chunked so alpha^(-j) cannot overflow at large depth.
    out = np.empty_like(source, dtype=complex)
    out[0] = boundary
    max_span = max(1, int(600.0 / max(d * dz, 1e-12)))
    start = 0
    e_start = out[0]
    while start < n_z - 1:
        stop = min(n_z - 1, start + max_span)
        k = stop - start
        powers = alpha ** np.arange(k + 1)
        inv = (1.0 / alpha) ** np.arange(k)
        block = contrib[start:stop]
        # E_{start+m} = alpha^m e_start + sum_{j<m} alpha^(m-1-j) c_j
        if block.ndim == 1:
            vals = powers[1:] * e_start + (alpha ** np.arange(1, k + 1)) / alpha * (
                np.cumsum(inv * block)
            )
        else:
            cs = np.cumsum(inv[:, None] * block, axis=0)
            vals = powers[1:, None] * e_start + (
                (alpha ** np.arange(1, k + 1)) / alpha
            )[:, None] * cs
        out[start + 1 : stop + 1] = vals
        e_start = out[stop]
        start = stop
    return out


@dataclass(frozen=True)
class UniversalMode:
    """Control-independent retrieval profile of one spin wave.

    ``q`` holds the real boundary output on the uniform clock grid
    ``u_grid``; ``eta_r`` is the energy captured up to u_max, and
    ``tail_energy`` the estimated remainder beyond it.
    """

    u_grid: np.ndarray
    q: np.ndarray
    eta_r: float
    source_mode: SpinWave
    d: float
    tail_energy: float

    @property
    def u_max(self) -> float:
        return float(self.u_grid[-1])

    @property
    def du(self) -> float:
        return float(self.u_grid[1] - self.u_grid[0])

    def cumulative(self) -> np.ndarray:
        """Running integral of q^2 over the clock."""
        return cumulative_trapezoid(self.q**2, self.du)


def universal_retrieval_mode(
    medium: MediumParams,
    spin: SpinWave,
    u_max: Optional[float] = None,
    u_steps: Optional[int] = None,
    tail_tol: float = TAIL_TOLERANCE,
) -> UniversalMode:
    """Integrate the control-free retrieval system from ``spin``.

    With ``u_max`` unset the clock horizon grows automatically until the
    estimated tail energy drops below ``tail_tol`` of the captured energy;
    an explicit ``u_max`` that truncates too early raises
    :class:`ClockRangeError`.
    """
    if medium.d <= 0:
        mode = spin.normalized()
        grid = np.linspace(0.0, 1.0, 11)
        return UniversalMode(grid, np.zeros(11), 0.0, mode, 0.0, 0.0)
    mode = spin.normalized()
    s_real = _real_mode(mode)
    dz = mode.grid.dz
    d = medium.d

    auto = u_max is None
    horizon = (2.0 * d + 20.0) if auto else float(u_max)
    for _ in range(12):
        if u_steps is not None and not auto:
            n_steps = int(u_steps)
        else:
            du_target = min(0.05, 0.5 * max(d * dz, 1e-3))
            n_steps = max(200, int(np.ceil(horizon / du_target)))
        du = horizon / n_steps
        q, tail = _march_q(s_real, d, dz, du, n_steps)
        u_grid = du * np.arange(n_steps + 1)
        eta_r = float(trapezoid(q**2, du))
        if eta_r <= 0:
            tail_energy = 0.0
            break
        tail_energy = tail
        if tail_energy <= tail_tol * eta_r:
            break
        if not auto:
            raise ClockRangeError(
                f"tail energy {tail_energy:.3e} exceeds {tail_tol:.1e} x eta_r "
                f"({eta_r:.4f}) at u_max = {horizon}; increase u_max"
            )
        horizon *= 1.6
    else:
        raise ClockRangeError("could not reach the requested tail tolerance")
    return UniversalMode(u_grid, q, eta_r, mode, d, tail_energy)


def _march_q(
    s_real: np.ndarray, d: float, dz: float, du: float, n_steps: int
) -> tuple[np.ndarray, float]:
    """RK4 march of the control-free system for one real mode; returns the
    boundary output q(u) and an exponential-extrapolation tail estimate."""
    sqrt_d = np.sqrt(d)

    def rhs(S):
        E = adiabatic_field(0.0, -sqrt_d * S, d, dz).real
        return -S - sqrt_d * E, E[-1]

    S = s_real.astype(float).copy()
    q = np.empty(n_steps + 1)
    _, q[0] = rhs(S)
    for k in range(n_steps):
        k1, _ = rhs(S)
        k2, _ = rhs(S + 0.5 * du * k1)
        k3, _ = rhs(S + 0.5 * du * k2)
        k4, _ = rhs(S + du * k3)
        S = S + (du / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _, q[k + 1] = rhs(S)

    # Tail estimate: fit the decay rate of q^2 over the last stretch.
    q2 = q**2
    m = max(5, n_steps // 5)
    recent = q2[-m:]
    if np.all(recent > 0):
        rate = (np.log(recent[0]) - np.log(recent[-1])) / (du * (m - 1))
        tail = float(recent[-1] / rate) if rate > 1e-6 else float("inf")
    else:
        tail = 0.0
    return q, tail


@dataclass(frozen=True)
class ClockSolution:
    """Monotone clock h(t) and the control that realizes it.

    ``h`` integrates |Omega|^2 exactly on the grid (trapezoid rule), so the
    stored control and clock never drift apart.  ``predicted_output`` is the
    adiabatic-limit output Omega(t) q(h(t)); when the cap was hit it is the
    achievable output under the capped control.
    """

    h: np.ndarray
    omega: Envelope
    cap_saturated: bool
    predicted_output: Envelope
    achieved_eta: float

    @property
    def grid(self) -> TimeGrid:
        return self.omega.grid


def _flatten_spikes(omega_mag: np.ndarray, eps: np.ndarray, dt: float) -> np.ndarray:
    """Cap control excursions that deliver a negligible share of the target.

    Near the support edges the demanded intensity and the remaining retrieval
    profile both vanish, and their ratio can ask for an arbitrarily strong
    control that moves almost no energy.  Clamping every sample above the
    highest level that still matters (jointly carrying more than
    ``SPIKE_CLAMP_ENERGY`` of the target) removes those spikes without
    touching genuinely demanding targets.
    """
    total = float(trapezoid(eps, dt))
    if total <= 0 or omega_mag.size == 0:
        return omega_mag
    order = np.argsort(omega_mag)[::-1]
    cell = np.full(omega_mag.size, dt)
    cell[0] = cell[-1] = 0.5 * dt
    carried = np.cumsum((eps * cell)[order])
    k = int(np.searchsorted(carried, SPIKE_CLAMP_ENERGY * total))
    if k <= 0 or k >= omega_mag.size:
        return omega_mag
    level = float(omega_mag[order[k]])
    return np.minimum(omega_mag, level)


def solve_clock(
    mode: UniversalMode,
    target: Envelope,
    omega_max: float,
) -> ClockSolution:
    """Find the clock (and control) that shapes retrieval into ``target``.

    The target is used as a normalized intensity profile; its overall scale
    is irrelevant.  Where the target is off the control is off and the clock
    holds.  A control demand above ``omega_max`` is clamped: the solution is
    flagged ``cap_saturated`` and ``predicted_output`` shows what the capped
    control actually achieves.
    """
    if omega_max <= 0:
        raise InvalidParameterError("omega_max must be positive")
    grid = target.grid
    dt = grid.dt
    eps = np.abs(target.samples) ** 2
    peak = float(np.max(eps))
    if peak <= 0:
        raise InvalidParameterError("target envelope has zero energy")
    mask = eps > SUPPORT_FLOOR * peak
    eps = np.where(mask, eps, 0.0)
    total = float(trapezoid(eps, dt))
    eps = eps * (mode.eta_r / total)

    cum_target = cumulative_trapezoid(eps, dt)
    q2 = mode.q**2
    cum_q = cumulative_trapezoid(q2, mode.du)
    # Clamp the demand into the attainable range; G is strictly increasing on
    # the support of q^2 so interpolation inverts it.
    demand = np.minimum(cum_target, cum_q[-1])
    h = np.interp(demand, cum_q, mode.u_grid)

    q2_at_h = np.interp(h, mode.u_grid, q2)
    bad = mask & (q2_at_h < 1e-14 * float(np.max(q2)))
    if np.any(bad):
        t_bad = grid.times()[bad][0]
        raise InfeasibleTargetError(
            f"target demands output at t = {t_bad:.4g} where the retrieval "
            "profile vanishes"
        )
    rate = np.zeros_like(h)
    rate[mask] = eps[mask] / q2_at_h[mask]

    omega_mag = np.sqrt(rate)
    omega_mag = _flatten_spikes(omega_mag, eps, dt)
    over = omega_mag > omega_max * (1 + 1e-12)
    cap_saturated = False
    if np.any(over):
        # Demanding a deep target tail while the retrieval profile is still
        # negligible always asks for a huge control; clamping there changes
        # nothing measurable.  Only clamping that touches real target energy
        # is reported.
        clamped_energy = float(trapezoid(np.where(over, eps, 0.0), dt))
        cap_saturated = clamped_energy > CAP_REPORT_FLOOR * mode.eta_r
        omega_mag = np.minimum(omega_mag, omega_max)

    # Imprint the target's phase on the control; the retrieved field inherits
    # the control phase, so this is what makes complex targets reachable.
    phase = np.ones(grid.n_points, dtype=complex)
    phase[mask] = target.samples[mask] / np.abs(target.samples[mask])
    omega_samples = omega_mag * phase

    h_exact = cumulative_trapezoid(omega_mag**2, dt)
    h_exact = np.minimum(h_exact, mode.u_max)
    out = omega_samples * np.interp(h_exact, mode.u_grid, mode.q)
    predicted = Envelope(grid, out, kind="signal")
    omega_env = Envelope(grid, omega_samples, kind="control", cap=omega_max)
    return ClockSolution(
        h=h_exact,
        omega=omega_env,
        cap_saturated=cap_saturated,
        predicted_output=predicted,
        achieved_eta=predicted.energy(),
    )


def time_reverse(envelope: Envelope, pivot: float) -> Envelope:
    """Reflect an envelope about ``pivot``: samples reversed on the mirrored
    grid.  Applying it twice with the same pivot is the identity."""
    g = envelope.grid
    new_grid = TimeGrid(2.0 * pivot - g.t_end, 2.0 * pivot - g.t_start, g.n_steps)
    return Envelope(new_grid, envelope.samples[::-1].copy(), envelope.kind, envelope.cap)


def retrieval_eigenmode(
    medium: MediumParams,
    n_z: int = 200,
    iterations: int = 6,
    u_max: Optional[float] = None,
) -> tuple[SpinWave, float]:
    """Spin wave maximizing the single-stage forward-retrieval efficiency.

    Power iteration of the retrieval Gram operator: apply the control-free
    march (the map from spin wave to boundary output) and then its adjoint,
    which is the same march run on flipped profiles with the output fed back
    as a source.  Returns the mode and its retrieval efficiency, which tends
    to 1 from below as the depth grows.
    """
    if medium.d <= 0:
        raise InvalidParameterError("retrieval eigenmode requires d > 0")
    d = medium.d
    dz = 1.0 / (n_z - 1)
    z = np.linspace(0.0, 1.0, n_z)
    horizon = (2.0 * d + 40.0) if u_max is None else float(u_max)
    du = min(0.05, 0.5 * max(d * dz, 1e-3))
    n_u = int(np.ceil(horizon / du))
    sqrt_d = np.sqrt(d)
    # boundary functional: q = b . S with b_k the trapezoid-weighted kernel
    weights = np.full(n_z, dz)
    weights[0] = weights[-1] = 0.5 * dz
    b = -sqrt_d * np.exp(-d * (1.0 - z)) * weights

    def march_forward(s: np.ndarray) -> np.ndarray:
        def rhs(S):
            E = adiabatic_field(0.0, -sqrt_d * S, d, dz).real
            return -S - sqrt_d * E, E[-1]

        S = s.copy()
        q = np.empty(n_u + 1)
        _, q[0] = rhs(S)
        for k in range(n_u):
            k1, _ = rhs(S)
            k2, _ = rhs(S + 0.5 * du * k1)
            k3, _ = rhs(S + 0.5 * du * k2)
            k4, _ = rhs(S + du * k3)
            S = S + (du / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            _, q[k + 1] = rhs(S)
        return q

    def march_adjoint(q: np.ndarray) -> np.ndarray:
        # transpose of the slab convolution acts on flipped profiles
        def rhs(W, y):
            E = adiabatic_field(0.0, -sqrt_d * W[::-1], d, dz).real[::-1]
            return -W - sqrt_d * E + y * (b / weights)

        W = np.zeros(n_z)
        for k in range(n_u, 0, -1):
            y0, yh, y1 = q[k], 0.5 * (q[k] + q[k - 1]), q[k - 1]
            k1 = rhs(W, y0)
            k2 = rhs(W + 0.5 * du * k1, yh)
            k3 = rhs(W + 0.5 * du * k2, yh)
            k4 = rhs(W + du * k3, y1)
            W = W + (du / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return W

    s = np.sin(np.pi * z)
    s /= np.sqrt(np.sum(weights * s**2))
    eta = 0.0
    for _ in range(iterations):
        q = march_forward(s)
        eta = float(trapezoid(q**2, du))
        s_new = march_adjoint(q)
        s = s_new / np.sqrt(np.sum(weights * s_new**2))
    grid = SpaceGrid(n_z)
    return SpinWave(grid, s.astype(complex)), eta


def retrieval_control(
    medium: MediumParams,
    spin: SpinWave,
    target: Envelope,
    omega_max: float,
    mode: Optional[UniversalMode] = None,
) -> tuple[Envelope, UniversalMode, ClockSolution]:
    """Control that retrieves ``spin`` into the shape of ``target``.

    Returns the control together with the retrieval profile and the clock
    solution (for reporting).  Pass a precomputed ``mode`` to reuse the
    profile across several targets of the same spin wave.
    """
    if mode is None:
        mode = universal_retrieval_mode(medium, spin)
    clock = solve_clock(mode, target, omega_max)
    return clock.omega, mode, clock


def writing_control(
    medium: MediumParams,
    input_signal: Envelope,
    spin_target: SpinWave,
    omega_max: float,
    mode: Optional[UniversalMode] = None,
) -> tuple[Envelope, UniversalMode, ClockSolution]:
    """Control that maps ``input_signal`` onto ``spin_target`` during writing.

    Constructed by time reversal: the writing control is the time-reversed
    copy of the control that would retrieve ``spin_target`` itself into the
    time-reversed input.  Storage then lands on ``spin_target`` for any input
    shape (the input only re-parametrizes the clock), which is what makes a
    common intermediary mode possible.
    """
    if input_signal.energy() <= 0:
        raise InvalidParameterError("input signal has zero energy")
    pivot = input_signal.grid.t_end
    reversed_input = time_reverse(input_signal, pivot)
    if mode is None:
        mode = universal_retrieval_mode(medium, spin_target)
    clock = solve_clock(mode, reversed_input, omega_max)
    control = time_reverse(clock.omega, pivot)
    return control, mode, clock
