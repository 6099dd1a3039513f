"""Pulse-fidelity metrics: efficiency, overlap, fidelity, and bin analysis.

The overlap uses the conjugated inner product so it is a genuine mode overlap
for complex envelopes; for real envelopes it reduces to the intensity-record
form.  Integration windows are those of the envelopes passed in; callers are
responsible for handing over the windows fixed by the scenario.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Envelope, trapezoid
from .errors import InvalidParameterError

__all__ = [
    "MetricsReport",
    "BinMetrics",
    "efficiency",
    "overlap",
    "hom_and_fidelity",
    "bin_analysis",
]


@dataclass(frozen=True)
class BinMetrics:
    """Per-bin diagnostics of a two-bin output."""

    energy_first: float
    energy_second: float
    energy_ratio: float
    bin_overlap: float


@dataclass(frozen=True)
class MetricsReport:
    """Bundle of the scalar figures of merit for one storage experiment."""

    eta: float
    J2: float
    fidelity_F: float
    hom_coincidence: float
    bin_metrics: Optional[BinMetrics] = None

    def as_dict(self) -> dict:
        out = {
            "eta": self.eta,
            "J2": self.J2,
            "fidelity_F": self.fidelity_F,
            "hom_coincidence": self.hom_coincidence,
        }
        if self.bin_metrics is not None:
            out["bin_metrics"] = {
                "energy_first": self.bin_metrics.energy_first,
                "energy_second": self.bin_metrics.energy_second,
                "energy_ratio": self.bin_metrics.energy_ratio,
                "bin_overlap": self.bin_metrics.bin_overlap,
            }
        return out


def efficiency(e_in: Envelope, e_out: Envelope) -> float:
    """Energy of the retrieved pulse divided by the energy of the input."""
    energy_in = e_in.energy()
    if energy_in <= 0:
        raise InvalidParameterError("input envelope has zero energy")
    return e_out.energy() / energy_in


def _resample_onto(reference: Envelope, other: Envelope) -> np.ndarray:
    t_ref = reference.grid.times()
    t_other = other.grid.times()
    re = np.interp(t_ref, t_other, other.samples.real, left=0.0, right=0.0)
    im = np.interp(t_ref, t_other, other.samples.imag, left=0.0, right=0.0)
    return re + 1j * im


def overlap(e_a: Envelope, e_b: Envelope) -> float:
    """Normalized squared inner product |<a, b>|^2 / (<a, a> <b, b>).

    Scale-invariant in both arguments and symmetric.  If the grids differ,
    ``e_b`` is linearly interpolated onto the grid of ``e_a`` (zero outside
    its own window).
    """
    ea = e_a.energy()
    eb = e_b.energy()
    if ea <= 0 or eb <= 0:
        raise InvalidParameterError("overlap of a zero-energy envelope is undefined")
    a = e_a.samples
    if (
        e_b.grid.n_points == e_a.grid.n_points
        and abs(e_b.grid.t_start - e_a.grid.t_start) < 1e-12 * max(1.0, abs(e_a.grid.t_start))
        and abs(e_b.grid.dt - e_a.grid.dt) < 1e-12
    ):
        b = e_b.samples
        eb_eff = eb
    else:
        b = _resample_onto(e_a, e_b)
        eb_eff = float(trapezoid(np.abs(b) ** 2, e_a.grid.dt))
        if eb_eff <= 0:
            return 0.0
    inner = trapezoid(np.conj(a) * b, e_a.grid.dt)
    return float(abs(inner) ** 2 / (ea * eb_eff))


def hom_and_fidelity(eta: float, J2: float) -> tuple[float, float]:
    """Density-matrix fidelity eta * J2 and two-photon coincidence (1 - J2) / 2."""
    if not (0.0 <= eta <= 1.0 + 1e-9) or not (0.0 <= J2 <= 1.0 + 1e-9):
        raise InvalidParameterError("eta and J2 must lie in [0, 1]")
    return eta * J2, (1.0 - J2) / 2.0


def _window_slice(env: Envelope, window: tuple[float, float]) -> slice:
    t0, t1 = window
    g = env.grid
    if t1 <= t0:
        raise InvalidParameterError("bin window must have positive length")
    if t0 < g.t_start - 1e-9 or t1 > g.t_end + 1e-9:
        raise InvalidParameterError(
            f"bin window [{t0}, {t1}] lies outside the envelope grid"
        )
    i0 = int(np.floor((t0 - g.t_start) / g.dt + 1e-9))
    i1 = int(np.ceil((t1 - g.t_start) / g.dt - 1e-9)) + 1
    return slice(max(i0, 0), min(i1, g.n_points))


def bin_analysis(
    e_out: Envelope,
    bin_windows: tuple[tuple[float, float], tuple[float, float]],
) -> BinMetrics:
    """Energies and mutual overlap of the two bins of a time-bin output.

    The two windows must be disjoint and inside the envelope grid.  The bin
    envelopes are re-centered on their energy centroids (to the nearest
    sample) before the overlap is computed, so a pure delay does not count
    as mismatch.
    """
    (w1, w2) = bin_windows
    if not (w1[1] <= w2[0] or w2[1] <= w1[0]):
        raise InvalidParameterError("bin windows overlap")
    s1 = _window_slice(e_out, w1)
    s2 = _window_slice(e_out, w2)
    dt = e_out.grid.dt
    seg1 = e_out.samples[s1]
    seg2 = e_out.samples[s2]
    energy1 = float(trapezoid(np.abs(seg1) ** 2, dt))
    energy2 = float(trapezoid(np.abs(seg2) ** 2, dt))
    ratio = energy2 / energy1 if energy1 > 0 else np.inf
    # a bin carrying a negligible share of the total is "empty": there is no
    # meaningful envelope to overlap with
    floor = 1e-9 * (energy1 + energy2)
    if energy1 <= floor or energy2 <= floor:
        return BinMetrics(energy1, energy2, ratio, 0.0)

    # Align the two bins on a common relative axis by shifting each segment so
    # its centroid sits at the segment middle; integer-sample alignment is
    # enough since dt is much smaller than a bin width.
    n = min(seg1.size, seg2.size)

    def centered(seg: np.ndarray) -> np.ndarray:
        w = np.abs(seg) ** 2
        c = int(round(float(np.sum(w * np.arange(seg.size)) / np.sum(w))))
        idx = (c - n // 2) + np.arange(n)
        out = np.zeros(n, dtype=complex)
        valid = (idx >= 0) & (idx < seg.size)
        out[valid] = seg[idx[valid]]
        return out

    a = centered(seg1)
    b = centered(seg2)
    na = float(trapezoid(np.abs(a) ** 2, dt))
    nb = float(trapezoid(np.abs(b) ** 2, dt))
    inner = trapezoid(np.conj(a) * b, dt)
    j2 = float(abs(inner) ** 2 / (na * nb)) if na > 0 and nb > 0 else 0.0
    return BinMetrics(energy1, energy2, ratio, j2)
