"""Domain types, grids, and pulse constructors.

Unit conventions (used everywhere in this package):

* time is measured in units of 1/gamma, where gamma is the optical
  polarization decay rate;
* position is measured in units of the medium length L, so z runs over [0, 1];
* Rabi frequencies are measured in units of gamma;
* the coupling depth is d = alphaL / 2, so that a resonant CW beam with the
  control off is attenuated in intensity by exp(-alphaL) = exp(-2d).

Conversion to physical units happens only at the I/O boundary (see the CLI),
never inside the numerics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidParameterError

__all__ = [
    "MediumParams",
    "TimeGrid",
    "SpaceGrid",
    "Envelope",
    "SpinWave",
    "PulseSpec",
    "make_gaussian",
    "make_ramp",
    "make_time_bin",
    "make_envelope",
    "trapezoid",
    "cumulative_trapezoid",
]


def trapezoid(y: np.ndarray, dx: float) -> float | complex:
    """Trapezoid-rule integral of uniformly sampled values."""
    return np.trapezoid(y, dx=dx)


def cumulative_trapezoid(y: np.ndarray, dx: float) -> np.ndarray:
    """Running trapezoid integral with the same length as ``y`` (starts at 0)."""
    out = np.empty_like(np.asarray(y, dtype=np.result_type(y, float)))
    out[0] = 0.0
    np.cumsum(0.5 * dx * (y[1:] + y[:-1]), out=out[1:])
    return out


@dataclass(frozen=True)
class MediumParams:
    """Optical depth and decay rates of the storage medium.

    ``gamma`` is the physical polarization decay rate in rad/s and sets the
    time unit; with the default ``gamma = 1`` the ``gamma_s`` and ``delta``
    fields are already dimensionless.
    """

    alphaL: float
    gamma: float = 1.0
    gamma_s: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        if self.alphaL < 0:
            raise InvalidParameterError(f"alphaL must be >= 0, got {self.alphaL}")
        if self.gamma <= 0:
            raise InvalidParameterError(f"gamma must be > 0, got {self.gamma}")
        if self.gamma_s < 0:
            raise InvalidParameterError(f"gamma_s must be >= 0, got {self.gamma_s}")

    @property
    def d(self) -> float:
        """Coupling depth alphaL / 2."""
        return 0.5 * self.alphaL

    @property
    def gamma_s_tilde(self) -> float:
        """Spin decay rate in units of gamma."""
        return self.gamma_s / self.gamma


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid with ``n_steps + 1`` sample points."""

    t_start: float
    t_end: float
    n_steps: int

    def __post_init__(self):
        if self.t_end <= self.t_start:
            raise InvalidParameterError(
                f"t_end ({self.t_end}) must exceed t_start ({self.t_start})"
            )
        if self.n_steps < 1:
            raise InvalidParameterError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / self.n_steps

    @property
    def n_points(self) -> int:
        return self.n_steps + 1

    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_points)

    @property
    def span(self) -> float:
        return self.t_end - self.t_start

    @staticmethod
    def from_span(t_start: float, t_end: float, dt: float) -> "TimeGrid":
        """Grid covering [t_start, t_end] with spacing at most ``dt``."""
        n = max(1, int(np.ceil((t_end - t_start) / dt - 1e-12)))
        return TimeGrid(t_start, t_end, n)


@dataclass(frozen=True)
class SpaceGrid:
    """Uniform grid of ``n_z`` points on z in [0, 1]."""

    n_z: int

    def __post_init__(self):
        if self.n_z < 2:
            raise InvalidParameterError(f"n_z must be >= 2, got {self.n_z}")

    @property
    def dz(self) -> float:
        return 1.0 / (self.n_z - 1)

    def points(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_z)


@dataclass(frozen=True)
class Envelope:
    """Complex sampled amplitude on a time grid.

    ``kind`` is "signal" for the weak field and "control" for the Rabi
    frequency of the strong field.  A control envelope may carry a magnitude
    cap, which is validated at construction.
    """

    grid: TimeGrid
    samples: np.ndarray
    kind: str = "signal"
    cap: Optional[float] = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex)
        if samples.ndim != 1 or samples.shape[0] != self.grid.n_points:
            raise InvalidParameterError(
                f"samples length {samples.shape} does not match grid "
                f"({self.grid.n_points} points)"
            )
        if not np.all(np.isfinite(samples.view(float))):
            raise InvalidParameterError("envelope samples must be finite")
        if self.kind not in ("signal", "control"):
            raise InvalidParameterError(f"unknown envelope kind {self.kind!r}")
        if self.kind == "control" and self.cap is not None:
            peak = float(np.max(np.abs(samples)))
            if peak > self.cap * (1 + 1e-9):
                raise InvalidParameterError(
                    f"control magnitude {peak:.4g} exceeds cap {self.cap:.4g}"
                )
        object.__setattr__(self, "samples", samples)

    def energy(self) -> float:
        return float(trapezoid(np.abs(self.samples) ** 2, self.grid.dt))

    def normalized(self) -> "Envelope":
        e = self.energy()
        if e <= 0:
            raise InvalidParameterError("cannot normalize a zero-energy envelope")
        return Envelope(self.grid, self.samples / np.sqrt(e), self.kind, self.cap)

    def translated(self, shift: float) -> "Envelope":
        """Same samples on a grid moved by ``shift`` (energy is unchanged)."""
        g = TimeGrid(self.grid.t_start + shift, self.grid.t_end + shift, self.grid.n_steps)
        return Envelope(g, self.samples, self.kind, self.cap)

    def centroid(self) -> float:
        """Energy-weighted mean arrival time."""
        t = self.grid.times()
        w = np.abs(self.samples) ** 2
        total = trapezoid(w, self.grid.dt)
        if total <= 0:
            raise InvalidParameterError("centroid of a zero-energy envelope")
        return float(trapezoid(t * w, self.grid.dt) / total)


@dataclass(frozen=True)
class SpinWave:
    """Complex ground-state coherence profile sampled on z in [0, 1]."""

    grid: SpaceGrid
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex)
        if samples.ndim != 1 or samples.shape[0] != self.grid.n_z:
            raise InvalidParameterError("spin-wave samples do not match the grid")
        object.__setattr__(self, "samples", samples)

    def norm_squared(self) -> float:
        return float(trapezoid(np.abs(self.samples) ** 2, self.grid.dz))

    def normalized(self) -> "SpinWave":
        n2 = self.norm_squared()
        if n2 <= 0:
            raise InvalidParameterError("cannot normalize a zero spin wave")
        return SpinWave(self.grid, self.samples / np.sqrt(n2))

    def flipped(self) -> "SpinWave":
        """Spatial mirror z -> 1 - z."""
        return SpinWave(self.grid, self.samples[::-1].copy())

    def resampled(self, grid: SpaceGrid) -> "SpinWave":
        z_old = self.grid.points()
        z_new = grid.points()
        re = np.interp(z_new, z_old, self.samples.real)
        im = np.interp(z_new, z_old, self.samples.imag)
        return SpinWave(grid, re + 1j * im)


# ---------------------------------------------------------------------------
# Pulse constructors
# ---------------------------------------------------------------------------

def make_gaussian(center: float, sigma: float, grid: TimeGrid) -> Envelope:
    """Unit-energy Gaussian amplitude exp(-(t - center)^2 / (2 sigma^2))."""
    if sigma <= 0:
        raise InvalidParameterError(f"sigma must be > 0, got {sigma}")
    if not (grid.t_start <= center <= grid.t_end):
        raise InvalidParameterError(
            f"center {center} lies outside the grid [{grid.t_start}, {grid.t_end}]"
        )
    t = grid.times()
    amp = np.exp(-((t - center) ** 2) / (2.0 * sigma**2))
    return Envelope(grid, amp.astype(complex)).normalized()


def make_ramp(
    sign: str,
    duration: float,
    grid: TimeGrid,
    rise: Optional[float] = None,
) -> Envelope:
    """Unit-energy linear ramp, centered in the grid span.

    ``sign`` is "positive" (amplitude rising over the support) or "negative"
    (falling).  The discontinuous edge is smoothed linearly over ``rise``
    (default duration / 20) to keep the envelope resolvable on the grid.
    """
    if sign not in ("positive", "negative"):
        raise InvalidParameterError(f"ramp sign must be positive|negative, got {sign!r}")
    if duration <= 0:
        raise InvalidParameterError(f"duration must be > 0, got {duration}")
    if rise is None:
        rise = duration / 20.0
    if rise < 0 or rise >= duration:
        raise InvalidParameterError("rise must satisfy 0 <= rise < duration")
    footprint = duration + rise
    if footprint > grid.span * (1 + 1e-12):
        raise InvalidParameterError(
            f"ramp support {footprint:.4g} exceeds grid span {grid.span:.4g}"
        )
    t = grid.times()
    mid = 0.5 * (grid.t_start + grid.t_end)
    lo = mid - 0.5 * footprint
    hi = mid + 0.5 * footprint
    ramp = np.zeros_like(t)
    if sign == "positive":
        # linear rise over [lo, hi - rise], smoothed fall over [hi - rise, hi]
        edge = hi - rise
        m = (t >= lo) & (t <= edge)
        ramp[m] = (t[m] - lo) / duration
        if rise > 0:
            m = (t > edge) & (t <= hi)
            ramp[m] = (hi - t[m]) / rise
    else:
        # smoothed rise over [lo, lo + rise], linear fall over [lo + rise, hi]
        edge = lo + rise
        if rise > 0:
            m = (t >= lo) & (t < edge)
            ramp[m] = (t[m] - lo) / rise
        m = (t >= edge) & (t <= hi)
        ramp[m] = (hi - t[m]) / duration
    return Envelope(grid, ramp.astype(complex)).normalized()


def make_time_bin(
    theta: float,
    phi: float,
    sigma_bin: float,
    separation: float,
    grid: TimeGrid,
) -> Envelope:
    """Two resolved Gaussian bins, cos(theta) g1 + exp(i phi) sin(theta) g2.

    Both bins are unit-energy Gaussians of width ``sigma_bin``, centered
    symmetrically about the middle of the grid and ``separation`` apart.
    """
    if sigma_bin <= 0:
        raise InvalidParameterError(f"sigma_bin must be > 0, got {sigma_bin}")
    if separation < 4.0 * sigma_bin:
        raise InvalidParameterError(
            f"bins overlap: separation {separation} < 4 sigma_bin {4 * sigma_bin}"
        )
    mid = 0.5 * (grid.t_start + grid.t_end)
    c1 = mid - 0.5 * separation
    c2 = mid + 0.5 * separation
    margin = 2.0 * sigma_bin
    if c1 - margin < grid.t_start or c2 + margin > grid.t_end:
        raise InvalidParameterError("time bins do not fit inside the grid")
    g1 = make_gaussian(c1, sigma_bin, grid).samples
    g2 = make_gaussian(c2, sigma_bin, grid).samples
    samples = np.cos(theta) * g1 + np.exp(1j * phi) * np.sin(theta) * g2
    return Envelope(grid, samples).normalized()


@dataclass(frozen=True)
class PulseSpec:
    """Declarative pulse descriptor used in scenario files.

    ``shape`` is one of gaussian | ramp_pos | ramp_neg | time_bin | custom.
    Times are relative to the window the pulse is built on: ``center`` for a
    Gaussian defaults to the window middle; ramps are centered; time-bin
    parameters are ``theta``, ``phi``, ``sigma_bin``, ``separation``.  A
    custom pulse supplies ``times``/``values_re``/``values_im`` and is
    interpolated onto the grid.
    """

    shape: str
    sigma: float = 6.0
    center: Optional[float] = None
    duration: float = 40.0
    rise: Optional[float] = None
    theta: float = np.pi / 4
    phi: float = 0.0
    sigma_bin: float = 3.0
    separation: float = 18.0
    times: Optional[tuple] = None
    values_re: Optional[tuple] = None
    values_im: Optional[tuple] = None

    _SHAPES = ("gaussian", "ramp_pos", "ramp_neg", "time_bin", "custom")

    def __post_init__(self):
        if self.shape not in self._SHAPES:
            raise InvalidParameterError(
                f"unknown pulse shape {self.shape!r}; expected one of {self._SHAPES}"
            )
        if self.shape == "custom":
            if self.times is None or self.values_re is None:
                raise InvalidParameterError("custom pulse needs times and values_re")

    def build(self, grid: TimeGrid) -> Envelope:
        if self.shape == "gaussian":
            center = self.center
            if center is None:
                center = 0.5 * (grid.t_start + grid.t_end)
            return make_gaussian(center, self.sigma, grid)
        if self.shape in ("ramp_pos", "ramp_neg"):
            sign = "positive" if self.shape == "ramp_pos" else "negative"
            return make_ramp(sign, self.duration, grid, rise=self.rise)
        if self.shape == "time_bin":
            return make_time_bin(self.theta, self.phi, self.sigma_bin, self.separation, grid)
        t = np.asarray(self.times, dtype=float)
        re = np.asarray(self.values_re, dtype=float)
        im = (
            np.asarray(self.values_im, dtype=float)
            if self.values_im is not None
            else np.zeros_like(re)
        )
        if t.shape != re.shape or t.shape != im.shape:
            raise InvalidParameterError("custom pulse arrays must have equal length")
        tg = grid.times()
        samples = np.interp(tg, t, re, left=0.0, right=0.0) + 1j * np.interp(
            tg, t, im, left=0.0, right=0.0
        )
        return Envelope(grid, samples).normalized()


def make_envelope(spec: PulseSpec, grid: TimeGrid) -> Envelope:
    """Build the envelope described by ``spec`` on ``grid``."""
    return spec.build(grid)
