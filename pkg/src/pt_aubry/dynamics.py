"""Propagation of field amplitudes along the waveguide array.

Solves ``i dc/dz = H(z) c`` with a fixed-step classical Runge-Kutta scheme and
records the total intensity ``I = sum |c_n|^2``, the mean site and the width
of the normalised occupation ``|c_n|^2 / I``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Optional, Union

import numpy as np

from .lattice import LatticeParams, build_profile, drive_factor, hopping_matrix

OVERFLOW_INTENSITY = 1e12
BALLISTIC_SLOPE = 0.05
BALLISTIC_R2 = 0.9
# fraction of the intensity on the two boundary sites that ends the spreading window
EDGE_FRACTION = 1e-3
MIN_CLASSIFY_Z = 50.0


class StepSizeError(ValueError):
    pass


class IntensityOverflowError(RuntimeError):
    """Intensity passed ``OVERFLOW_INTENSITY``; ``trajectory`` holds the samples so far."""

    def __init__(self, z: float, intensity: float, trajectory: "Trajectory"):
        super().__init__(
            f"intensity {intensity:.3e} exceeded {OVERFLOW_INTENSITY:.0e} at z={z:.6g}; "
            f"integration aborted after {len(trajectory)} samples"
        )
        self.z = z
        self.intensity = intensity
        self.trajectory = trajectory


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    z: float = 0.0

    def __post_init__(self) -> None:
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.ndim != 1:
            raise ValueError("amplitudes must be a 1-d vector")
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    def __len__(self) -> int:
        return len(self.amplitudes)

    @classmethod
    def single_site(cls, n_sites: int, site: int) -> "StateVector":
        """Unit excitation of ``site`` (1-based)."""
        if not 1 <= site <= n_sites:
            raise ValueError(f"site must be in 1..{n_sites}, got {site}")
        amps = np.zeros(n_sites, dtype=complex)
        amps[site - 1] = 1.0
        return cls(amps)


class Verdict(str, Enum):
    LOCALIZED = "localized"
    BALLISTIC = "ballistic"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class LocalizationVerdict:
    kind: Verdict
    slope: float
    slope_r2: float
    sigma_max: float
    fit_window: tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class Trajectory:
    """Sampled run: row ``k`` of every array belongs to ``z[k]``."""

    z: np.ndarray
    states: np.ndarray
    intensity: np.ndarray
    sigma: np.ndarray
    nbar: np.ndarray
    step_size: float
    params: LatticeParams

    def __len__(self) -> int:
        return len(self.z)

    def state(self, k: int) -> StateVector:
        return StateVector(self.states[k], float(self.z[k]))

    def samples(self) -> Iterator[tuple[float, StateVector, float, float, float]]:
        for k in range(len(self)):
            yield (
                float(self.z[k]),
                self.state(k),
                float(self.intensity[k]),
                float(self.sigma[k]),
                float(self.nbar[k]),
            )


def _amplitudes(state: Union[StateVector, np.ndarray]) -> np.ndarray:
    if isinstance(state, StateVector):
        return state.amplitudes
    return np.asarray(state, dtype=complex)


def intensity(state: Union[StateVector, np.ndarray]) -> float:
    c = _amplitudes(state)
    return float(np.sum(c.real**2 + c.imag**2))


def variance(state: Union[StateVector, np.ndarray]) -> tuple[float, float]:
    """Width and mean of the site distribution ``|c_n|^2 / I`` (1-based sites).

    Returns ``(sigma, nbar)``.
    """
    c = _amplitudes(state)
    p = c.real**2 + c.imag**2
    total = float(p.sum())
    if not total > 0:
        raise ValueError("variance is undefined for a zero-intensity state")
    n = np.arange(1, len(c) + 1)
    nbar = float(n @ p) / total
    sigma = math.sqrt(max(float(((n - nbar) ** 2) @ p) / total, 0.0))
    return sigma, nbar


def _observables(states: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    p = states.real**2 + states.imag**2
    total = p.sum(axis=1)
    n = np.arange(1, states.shape[1] + 1)
    nbar = (p @ n) / total
    spread = (p * (n[None, :] - nbar[:, None]) ** 2).sum(axis=1) / total
    return total, np.sqrt(np.maximum(spread, 0.0)), nbar


def default_step(params: LatticeParams) -> float:
    omega = params.drive_freq
    return 1e-3 * min(1.0, 1.0 / omega) if omega > 0 else 1e-3


def max_step(params: LatticeParams) -> float:
    return 1.0 / (100.0 * max(params.drive_freq, 1.0))


def propagate(
    params: LatticeParams,
    initial: Union[StateVector, np.ndarray],
    z_end: float,
    dz: Optional[float] = None,
    sample_every: int = 1,
) -> Trajectory:
    """Integrate ``dc/dz = -i H(z) c`` from ``initial.z`` over a length ``z_end``.

    ``dz`` is shrunk slightly if needed so that an integer number of steps
    lands exactly on ``z_end``.  Samples are taken at the start, every
    ``sample_every`` steps, and at the final point.

    Raises :class:`IntensityOverflowError` (carrying the partial trajectory) if
    the intensity exceeds ``OVERFLOW_INTENSITY``.
    """
    if dz is None:
        dz = default_step(params)
    if not dz > 0:
        raise StepSizeError(f"dz must be > 0, got {dz}")
    limit = max_step(params)
    if dz > limit * (1 + 1e-12):
        raise StepSizeError(
            f"dz={dz} is too coarse; need dz <= 1/(100*max(omega,1)) = {limit:.6g}"
        )
    if not z_end > 0:
        raise ValueError(f"z_end must be > 0, got {z_end}")
    if sample_every < 1:
        raise ValueError(f"sample_every must be >= 1, got {sample_every}")

    c = _amplitudes(initial).copy()
    if c.shape != (params.n_sites,):
        raise ValueError(f"initial state has {c.size} entries, lattice has {params.n_sites}")
    z0 = initial.z if isinstance(initial, StateVector) else 0.0

    n_steps = max(1, math.ceil(z_end / dz - 1e-9))
    h = z_end / n_steps

    static = hopping_matrix(params.n_sites, params.hopping)
    profile = build_profile(params)
    static[np.diag_indices(params.n_sites)] = profile.potential
    minus_i_static = -1j * static
    gain = profile.gain.astype(float)
    driven = params.drive_freq > 0

    def rhs(z: float, y: np.ndarray) -> np.ndarray:
        # -i (H0 + i f(z) diag(gain)) y
        return minus_i_static @ y + (drive_factor(params, z) * gain) * y

    if not driven:
        # autonomous linear system: one RK4 step is a fixed polynomial in -iH h
        a = minus_i_static + np.diag(gain)
        a2 = a @ a
        step = (
            np.eye(params.n_sites)
            + h * a
            + (h**2 / 2) * a2
            + (h**3 / 6) * (a2 @ a)
            + (h**4 / 24) * (a2 @ a2)
        )

    zs = [z0]
    snaps = [c.copy()]
    for k in range(1, n_steps + 1):
        z = z0 + (k - 1) * h
        if driven:
            k1 = rhs(z, c)
            k2 = rhs(z + h / 2, c + (h / 2) * k1)
            k3 = rhs(z + h / 2, c + (h / 2) * k2)
            k4 = rhs(z + h, c + h * k3)
            c = c + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        else:
            c = step @ c
        total = float(np.vdot(c, c).real)
        if k % sample_every == 0 or k == n_steps or not total <= OVERFLOW_INTENSITY:
            zs.append(z0 + k * h)
            snaps.append(c.copy())
        if not total <= OVERFLOW_INTENSITY:
            traj = _make_trajectory(zs, snaps, h, params)
            raise IntensityOverflowError(zs[-1], total, traj)

    return _make_trajectory(zs, snaps, h, params)


def _make_trajectory(zs, snaps, h, params) -> Trajectory:
    states = np.array(snaps)
    total, sigma, nbar = _observables(states)
    return Trajectory(
        z=np.array(zs),
        states=states,
        intensity=total,
        sigma=sigma,
        nbar=nbar,
        step_size=h,
        params=params,
    )


def intensity_rhs(params: LatticeParams, state: Union[StateVector, np.ndarray], z: float) -> float:
    """Instantaneous ``dI/dz = 2 sum_n Im(d_n(z)) |c_n|^2``."""
    c = _amplitudes(state)
    gain = build_profile(params).gain * drive_factor(params, z)
    return 2.0 * float(gain @ (c.real**2 + c.imag**2))


def intensity_law_residual(traj: Trajectory) -> float:
    """Worst mismatch between the centred-difference dI/dz and the gain/loss law."""
    if len(traj) < 3:
        raise ValueError("need at least 3 samples")
    spacing = np.diff(traj.z)
    step = spacing[0]
    if np.max(np.abs(spacing - step)) > 1e-9 * max(1.0, abs(step)):
        raise ValueError("intensity law check needs uniformly spaced samples")
    fd = (traj.intensity[2:] - traj.intensity[:-2]) / (2 * step)
    profile_gain = build_profile(traj.params).gain
    occ = traj.states.real**2 + traj.states.imag**2
    factors = np.array([drive_factor(traj.params, z) for z in traj.z[1:-1]])
    law = 2.0 * factors * (occ[1:-1] @ profile_gain)
    return float(np.max(np.abs(fd - law)))


def _linear_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    slope, intercept = np.polyfit(x, y, 1)
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), min(max(r2, 0.0), 1.0)


def edge_arrival(traj: Trajectory, threshold: float = EDGE_FRACTION) -> Optional[float]:
    """First sampled z at which the boundary sites hold more than ``threshold``
    of the intensity, or None if never."""
    p = traj.states.real**2 + traj.states.imag**2
    frac = (p[:, 0] + p[:, -1]) / traj.intensity
    hits = np.flatnonzero(frac > threshold)
    return float(traj.z[hits[0]]) if hits.size else None


def classify(traj: Trajectory, z_fit_fraction: float = 0.5) -> LocalizationVerdict:
    """Localized / ballistic verdict from the growth of sigma(z).

    The line fit uses the last ``z_fit_fraction`` of the run, where the run is
    cut off once the packet reaches the open boundary (sigma saturates there).
    """
    if not 0 < z_fit_fraction <= 1:
        raise ValueError(f"z_fit_fraction must lie in (0, 1], got {z_fit_fraction}")
    z0, z1 = float(traj.z[0]), float(traj.z[-1])
    if z1 - z0 < MIN_CLASSIFY_Z / traj.params.hopping:
        raise ValueError(
            f"trajectory covers z={z1 - z0:.6g}; classification needs >= "
            f"{MIN_CLASSIFY_Z / traj.params.hopping:.6g}"
        )

    z_stop = edge_arrival(traj)
    if z_stop is None:
        z_stop = z1
    start = z_stop - z_fit_fraction * (z_stop - z0)
    window = (traj.z >= start) & (traj.z <= z_stop)
    sigma_max = float(traj.sigma.max())
    if np.count_nonzero(window) < 3:
        return LocalizationVerdict(Verdict.INDETERMINATE, math.nan, 0.0, sigma_max, (start, z_stop))

    slope, r2 = _linear_fit(traj.z[window], traj.sigma[window])
    n_sites = traj.params.n_sites
    if slope > BALLISTIC_SLOPE and r2 > BALLISTIC_R2:
        kind = Verdict.BALLISTIC
    elif sigma_max < n_sites / 4 and slope <= BALLISTIC_SLOPE:
        kind = Verdict.LOCALIZED
    else:
        kind = Verdict.INDETERMINATE
    return LocalizationVerdict(kind, slope, r2, sigma_max, (start, z_stop))


def growth_rate(traj: Trajectory, fit_fraction: float = 0.25) -> float:
    """Slope of log I(z) over the last ``fit_fraction`` of the samples."""
    k = len(traj)
    if k < 3:
        raise ValueError("need at least 3 samples")
    first = min(int(k * (1 - fit_fraction)), k - 3)
    z = traj.z[first:]
    log_i = np.log(traj.intensity[first:])
    return float(np.polyfit(z, log_i, 1)[0])
