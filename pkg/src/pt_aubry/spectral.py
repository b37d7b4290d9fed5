"""Complex spectra of the PT-symmetric chain.

Dense eigendecomposition is delegated to LAPACK through :mod:`scipy.linalg`
(``zgeev`` for the non-Hermitian case, ``zheevd`` when the matrix is exactly
Hermitian).  Everything else here (analytics, beta sweeps, the PT-breaking
threshold search) builds on :func:`eig`.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, TypeVar, Union

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from .lattice import Hamiltonian, LatticeParams, build_hamiltonian

log = logging.getLogger(__name__)

REALITY_RTOL = 1e-8
GAP_FACTOR = 10.0
MAX_BISECTION_EVALS = 60
MONOTONICITY_POINTS = 10
THREADS_ENV = "PT_AUBRY_THREADS"

T = TypeVar("T")
R = TypeVar("R")


class EigensolverError(RuntimeError):
    """LAPACK failed to converge or received a non-finite matrix."""


class SweepError(RuntimeError):
    def __init__(self, beta: float, cause: Exception):
        super().__init__(f"eigensolver failed at beta={beta!r}: {cause}")
        self.beta = beta
        self.cause = cause


class ThresholdSearchError(RuntimeError):
    pass


@dataclass(frozen=True)
class ComplexSpectrum:
    """Eigenvalues sorted lexicographically by (real, imag).

    ``eigenvectors`` (columns, same order) are present only when requested.
    """

    eigenvalues: np.ndarray
    source_params: Optional[LatticeParams] = None
    eigenvectors: Optional[np.ndarray] = None
    matrix_norm: float = float("nan")

    def __len__(self) -> int:
        return len(self.eigenvalues)

    @property
    def spectral_radius(self) -> float:
        if len(self.eigenvalues) == 0:
            return 0.0
        return float(np.max(np.abs(self.eigenvalues)))

    @property
    def max_imag(self) -> float:
        if len(self.eigenvalues) == 0:
            return 0.0
        return float(np.max(np.abs(self.eigenvalues.imag)))


@dataclass(frozen=True)
class SpectrumAnalytics:
    max_imag: float
    real_width: float
    is_real: bool
    band_gaps: list[tuple[float, float]] = field(default_factory=list)

    @property
    def n_bands(self) -> int:
        return len(self.band_gaps) + 1

    def as_dict(self) -> dict:
        return {
            "max_imag": self.max_imag,
            "real_width": self.real_width,
            "is_real": self.is_real,
            "n_bands": self.n_bands,
            "band_gaps": [list(g) for g in self.band_gaps],
        }


@dataclass(frozen=True)
class ButterflyDataset:
    records: list[tuple[float, np.ndarray]]
    grid_spec: tuple[float, float, int]

    def __len__(self) -> int:
        return len(self.records)

    @property
    def betas(self) -> np.ndarray:
        return np.array([b for b, _ in self.records])


@dataclass(frozen=True)
class ThresholdResult:
    """Outcome of the PT-breaking threshold search.

    When ``exhausted`` is true the spectrum stayed real up to ``gamma_max`` and
    ``gamma_pt`` is only a lower bound (``bracket = (gamma_max, inf)``).
    """

    gamma_pt: float
    bracket: tuple[float, float]
    tolerance: float
    evaluations: int
    exhausted: bool = False
    warnings: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "gamma_pt": self.gamma_pt,
            "bracket": list(self.bracket),
            "tolerance": self.tolerance,
            "evaluations": self.evaluations,
            "exhausted": self.exhausted,
            "warnings": list(self.warnings),
        }


def sort_spectrum(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=complex)
    order = np.lexsort((values.imag, values.real))
    return values[order]


def eig(h: Union[Hamiltonian, np.ndarray], vectors: bool = False) -> ComplexSpectrum:
    """Eigenvalues (and optionally right eigenvectors) of ``h``."""
    if isinstance(h, Hamiltonian):
        matrix, params = h.matrix, h.params
    else:
        matrix, params = np.asarray(h, dtype=complex), None
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        bad = int(np.count_nonzero(~np.isfinite(matrix)))
        raise EigensolverError(f"matrix has {bad} non-finite entries")

    norm = float(np.linalg.norm(matrix, 2)) if matrix.size else 0.0
    hermitian = np.array_equal(matrix, matrix.conj().T)
    try:
        if hermitian:
            if vectors:
                w, v = scipy.linalg.eigh(matrix, check_finite=False)
            else:
                w, v = scipy.linalg.eigh(matrix, eigvals_only=True, check_finite=False), None
            w = w.astype(complex)
        elif vectors:
            w, v = scipy.linalg.eig(matrix, right=True, check_finite=False)
        else:
            w, v = scipy.linalg.eig(matrix, right=False, check_finite=False), None
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverError(
            f"{'zheevd' if hermitian else 'zgeev'} failed for a "
            f"{matrix.shape[0]}x{matrix.shape[0]} matrix (2-norm {norm:.3e}): {exc}"
        ) from exc

    order = np.lexsort((w.imag, w.real))
    w = w[order]
    if v is not None:
        v = v[:, order]
    return ComplexSpectrum(eigenvalues=w, source_params=params, eigenvectors=v, matrix_norm=norm)


def eigen_residuals(h: Union[Hamiltonian, np.ndarray], spec: ComplexSpectrum) -> np.ndarray:
    """``||H v_k - E_k v_k||`` for each stored eigenpair (unit-norm vectors)."""
    if spec.eigenvectors is None:
        raise ValueError("spectrum was computed without eigenvectors")
    matrix = h.matrix if isinstance(h, Hamiltonian) else np.asarray(h)
    v = spec.eigenvectors / np.linalg.norm(spec.eigenvectors, axis=0)
    return np.linalg.norm(matrix @ v - v * spec.eigenvalues, axis=0)


def reality_threshold(spec: ComplexSpectrum) -> float:
    return REALITY_RTOL * max(1.0, spec.spectral_radius)


def multiset_distance(a: Sequence[complex], b: Sequence[complex]) -> float:
    """Largest pairwise gap under the optimal one-to-one matching of two multisets."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ValueError(f"multisets differ in size: {a.size} vs {b.size}")
    if a.size == 0:
        return 0.0
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


def conjugation_defect(spec: ComplexSpectrum) -> float:
    """Distance between the spectrum and its complex conjugate as multisets."""
    return multiset_distance(spec.eigenvalues, np.conj(spec.eigenvalues))


def band_gaps(real_parts: Iterable[float], factor: float = GAP_FACTOR) -> list[tuple[float, float]]:
    """Open intervals between consecutive sorted values that exceed
    ``factor`` times the median spacing."""
    r = np.sort(np.asarray(list(real_parts), dtype=float))
    if r.size < 3:
        return []
    spacing = np.diff(r)
    median = float(np.median(spacing))
    threshold = factor * median
    return [(float(r[i]), float(r[i + 1])) for i in np.flatnonzero(spacing > threshold)]


def analyze(spec: ComplexSpectrum) -> SpectrumAnalytics:
    w = spec.eigenvalues
    max_imag = spec.max_imag
    width = float(w.real.max() - w.real.min()) if len(w) else 0.0
    return SpectrumAnalytics(
        max_imag=max_imag,
        real_width=width,
        is_real=max_imag <= reality_threshold(spec),
        band_gaps=band_gaps(w.real),
    )


def default_workers() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
        if n < 1:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
        return n
    return os.cpu_count() or 1


def _ordered_map(fn: Callable[[T], R], items: Sequence[T], workers: Optional[int]) -> list[R]:
    # LAPACK releases the GIL, so threads give real parallelism; map keeps input order
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def spectrum_at(params: LatticeParams) -> ComplexSpectrum:
    return eig(build_hamiltonian(params))


def butterfly_sweep(
    params_template: LatticeParams,
    beta_grid: Sequence[float],
    workers: Optional[int] = None,
) -> ButterflyDataset:
    """One spectrum per beta, all other parameters held fixed."""
    betas = list(beta_grid)
    for b in betas:
        if not 0.0 <= float(b) <= 1.0:
            raise ValueError(f"beta values must lie in [0, 1], got {b}")

    def one(beta):
        try:
            return spectrum_at(params_template.with_(beta=beta)).eigenvalues
        except EigensolverError as exc:
            raise SweepError(float(beta), exc) from exc

    spectra = _ordered_map(one, betas, workers)
    records = sorted(zip((float(b) for b in betas), spectra), key=lambda r: r[0])
    grid = (
        (float(min(betas)), float(max(betas)), len(betas)) if betas else (0.0, 0.0, 0)
    )
    return ButterflyDataset(records=records, grid_spec=grid)


def default_beta_grid(steps: int = 400) -> np.ndarray:
    """``steps`` uniform points strictly inside (0, 1)."""
    return np.linspace(0.0, 1.0, steps + 2)[1:-1]


def is_broken(params: LatticeParams) -> bool:
    spec = spectrum_at(params)
    return spec.max_imag > reality_threshold(spec)


def find_gamma_pt(
    params_template: LatticeParams,
    gamma_max: Optional[float] = None,
    tol: float = 1e-6,
    workers: Optional[int] = None,
) -> ThresholdResult:
    """Bisect for the gain/loss amplitude where the spectrum turns complex.

    The indicator is ``max|Im E| > reality_threshold``.  Bisection assumes it
    switches once on ``[0, gamma_max]``; a 10-point scan checks that and
    attaches a warning otherwise.
    """
    if gamma_max is None:
        gamma_max = 4.0 * params_template.hopping
    if gamma_max <= 0:
        raise ValueError(f"gamma_max must be > 0, got {gamma_max}")
    if tol <= 0:
        raise ValueError(f"tol must be > 0, got {tol}")

    def broken(g: float) -> bool:
        return is_broken(params_template.with_(gain_amp=g))

    evaluations = 2
    if broken(0.0):
        raise ThresholdSearchError("spectrum is already complex at gamma_0 = 0")
    if not broken(gamma_max):
        return ThresholdResult(
            gamma_pt=gamma_max,
            bracket=(gamma_max, math.inf),
            tolerance=tol,
            evaluations=evaluations,
            exhausted=True,
        )

    lo, hi = 0.0, float(gamma_max)
    while hi - lo > tol:
        if evaluations >= MAX_BISECTION_EVALS:
            raise ThresholdSearchError(
                f"bracket [{lo}, {hi}] still wider than tol={tol} "
                f"after {evaluations} evaluations"
            )
        mid = 0.5 * (lo + hi)
        evaluations += 1
        if broken(mid):
            hi = mid
        else:
            lo = mid

    scan = np.linspace(0.0, gamma_max, MONOTONICITY_POINTS)
    flags = _ordered_map(broken, list(scan), workers)
    warnings: list[str] = []
    first = next((i for i, f in enumerate(flags) if f), None)
    if first is not None and not all(flags[first:]):
        msg = (
            "PT-breaking indicator is not monotone on the scan grid "
            f"{[round(float(g), 6) for g in scan]}: {flags}"
        )
        log.warning(msg)
        warnings.append(msg)
    elif first is not None and scan[first] < lo:
        msg = f"scan found broken phase at gamma={scan[first]:.6g} below bisection result"
        log.warning(msg)
        warnings.append(msg)

    return ThresholdResult(
        gamma_pt=0.5 * (lo + hi),
        bracket=(lo, hi),
        tolerance=tol,
        evaluations=evaluations,
        warnings=tuple(warnings),
    )
