"""PT-symmetric Aubry-Andre chain: spectra, PT thresholds and wave-packet dynamics."""

from .dynamics import (
    IntensityOverflowError,
    LocalizationVerdict,
    StateVector,
    Trajectory,
    Verdict,
    classify,
    growth_rate,
    intensity,
    intensity_law_residual,
    propagate,
    variance,
)
from .lattice import (
    GOLDEN,
    Hamiltonian,
    LatticeParams,
    OnSiteProfile,
    build_hamiltonian,
    build_profile,
    check_pt_symmetry,
    phase_offset,
)
from .spectral import (
    ButterflyDataset,
    ComplexSpectrum,
    EigensolverError,
    SpectrumAnalytics,
    ThresholdResult,
    analyze,
    butterfly_sweep,
    eig,
    find_gamma_pt,
    reality_threshold,
)

__version__ = "0.1.0"
