"""Model construction for the PT-symmetric Aubry-Andre chain.

The chain has ``N`` sites with open boundaries, uniform hopping ``J`` and a
complex on-site term

    d_n = V cos(2 pi beta n + phi_N) + i gamma_0 sin(2 pi beta n + phi_N),
    phi_N = -pi beta (N + 1) + phi_0,

with 1-based site index ``n``.  ``d_n`` is stored directly as the diagonal of
the Hamiltonian ``H = -J (shift + shift^T) + diag(d)`` so that the amplitudes
obey ``i dc/dz = H c``.  The imaginary part of ``d_n`` is the local gain
(positive) or loss (negative) rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Union

import numpy as np

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

Beta = Union[Fraction, float]

_PHI0_TOL = 1e-12
_PT_TOL = 1e-12


@dataclass(frozen=True)
class LatticeParams:
    """All constants of one experiment.

    ``beta`` may be a :class:`fractions.Fraction` (exact rational modulation)
    or a float.  ``phi0`` must be an integer multiple of pi.
    """

    n_sites: int = 50
    hopping: float = 1.0
    potential_amp: float = 0.0
    gain_amp: float = 1.0
    beta: Beta = GOLDEN
    phi0: float = 0.0
    drive_freq: float = 0.0

    def __post_init__(self) -> None:
        if isinstance(self.n_sites, bool) or int(self.n_sites) != self.n_sites:
            raise ValueError(f"n_sites must be an integer, got {self.n_sites!r}")
        object.__setattr__(self, "n_sites", int(self.n_sites))
        if self.n_sites < 2:
            raise ValueError(f"n_sites must be >= 2, got {self.n_sites}")
        for name in ("hopping", "potential_amp", "gain_amp", "phi0", "drive_freq"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.hopping <= 0:
            raise ValueError(f"hopping must be > 0, got {self.hopping}")
        if self.potential_amp < 0:
            raise ValueError(f"potential_amp must be >= 0, got {self.potential_amp}")
        if self.drive_freq < 0:
            raise ValueError(f"drive_freq must be >= 0, got {self.drive_freq}")

        if isinstance(self.beta, Fraction):
            beta_val = float(self.beta)
        else:
            beta_val = float(self.beta)
            if not math.isfinite(beta_val):
                raise ValueError(f"beta must be finite, got {self.beta}")
            object.__setattr__(self, "beta", beta_val)
        if not 0.0 <= beta_val <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")

        k = self.phi0 / math.pi
        if abs(k - round(k)) > _PHI0_TOL:
            raise ValueError(
                f"phi0 must be an integer multiple of pi, got {self.phi0} "
                "(gain and loss are unbalanced otherwise)"
            )

    @property
    def beta_float(self) -> float:
        return float(self.beta)

    @property
    def phi0_multiple(self) -> int:
        """Integer ``k`` with ``phi0 = k pi``."""
        return int(round(self.phi0 / math.pi))

    def with_(self, **changes) -> "LatticeParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class OnSiteProfile:
    """Length-N complex on-site terms plus the balancing phase offset."""

    values: np.ndarray
    phase_offset: float
    # |V| + |gamma_0|; sets the scale of symmetry tolerances
    amplitude_scale: float = field(default=float("nan"))

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=complex)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if math.isnan(self.amplitude_scale):
            scale = float(np.max(np.abs(values))) if values.size else 0.0
            object.__setattr__(self, "amplitude_scale", scale)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def gain(self) -> np.ndarray:
        """Gain/loss rates ``Im(d_n)``."""
        return self.values.imag

    @property
    def potential(self) -> np.ndarray:
        return self.values.real


@dataclass(frozen=True)
class Hamiltonian:
    matrix: np.ndarray
    params: LatticeParams
    z_phase: float = 1.0

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=complex)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def phase_offset(params: LatticeParams) -> float:
    """Phase ``phi_N = -pi beta (N+1) + phi_0`` that balances gain and loss."""
    return -math.pi * params.beta_float * (params.n_sites + 1) + params.phi0


def _site_angles(params: LatticeParams) -> np.ndarray:
    """Angles ``2 pi beta n + phi_N - phi_0`` for n = 1..N.

    Written as ``pi beta (2n - N - 1)`` so the parity partner of every angle is
    its exact floating-point negative.  For Fraction beta the multiplier of pi
    is reduced modulo 2 exactly before conversion.
    """
    n = params.n_sites
    offsets = [2 * k - n - 1 for k in range(1, n + 1)]
    if isinstance(params.beta, Fraction):
        reduced = []
        for m in offsets:
            t = (params.beta * m) % 2
            if t > 1:
                t -= 2
            reduced.append(float(t))
        return math.pi * np.array(reduced)
    return math.pi * params.beta_float * np.array(offsets, dtype=float)


def build_profile(params: LatticeParams) -> OnSiteProfile:
    angles = _site_angles(params)
    # phi0 = k pi flips both cos and sin by (-1)^k
    sign = -1.0 if params.phi0_multiple % 2 else 1.0
    values = sign * (
        params.potential_amp * np.cos(angles) + 1j * params.gain_amp * np.sin(angles)
    )
    return OnSiteProfile(
        values=values,
        phase_offset=phase_offset(params),
        amplitude_scale=abs(params.potential_amp) + abs(params.gain_amp),
    )


def drive_factor(params: LatticeParams, z: float) -> float:
    """Multiplier ``cos(2 pi omega z)`` on the gain/loss part (1 if static)."""
    if params.drive_freq == 0.0:
        return 1.0
    return math.cos(2.0 * math.pi * params.drive_freq * z)


def hopping_matrix(n_sites: int, hopping: float) -> np.ndarray:
    h = np.zeros((n_sites, n_sites), dtype=complex)
    idx = np.arange(n_sites - 1)
    h[idx, idx + 1] = -hopping
    h[idx + 1, idx] = -hopping
    return h


def build_hamiltonian(params: LatticeParams, z: float = 0.0) -> Hamiltonian:
    if z < 0:
        raise ValueError(f"z must be >= 0, got {z}")
    profile = build_profile(params)
    z_phase = drive_factor(params, z)
    h = hopping_matrix(params.n_sites, params.hopping)
    diag = profile.values.real + 1j * z_phase * profile.values.imag
    h[np.diag_indices(params.n_sites)] = diag
    return Hamiltonian(matrix=h, params=params, z_phase=z_phase)


def check_pt_symmetry(profile: OnSiteProfile) -> tuple[bool, float]:
    """Test ``d_{N+1-n} == conj(d_n)`` for all sites.

    Returns the verdict and the largest violation.
    """
    d = profile.values
    if d.size == 0:
        return True, 0.0
    violation = float(np.max(np.abs(d[::-1] - np.conj(d))))
    tol = _PT_TOL * (profile.amplitude_scale + 1.0)
    return violation <= tol, violation


def balance_violation(profile: OnSiteProfile) -> float:
    """``|sum_n Im(d_n)|``; zero for balanced gain and loss."""
    return float(abs(np.sum(profile.gain)))
