"""microrheo: simulation and inference for diffusion in viscoelastic fluids."""

from .exactsim import (
    CovSeq,
    cholesky_factor,
    cholesky_sim,
    cme_embed,
    cme_sim,
    fgle_increment_covariance,
    fgn_covariance,
)
from .inference import (
    EstimateReport,
    local_whittle,
    msd_loglog_fit,
    periodogram,
    test_diffusive,
)
from .kernels import (
    DiracKernel,
    GleParams,
    MemoryKernel,
    ModulusCurve,
    PowerLawKernel,
    PronyKernel,
    classify_diffusivity,
    gser_modulus,
    kernel_eval,
    kernel_fourier,
    kernel_laplace,
)
from .markovsim import (
    langevin_path,
    ou_msd,
    ou_velocity_acf,
    simulate_langevin,
    simulate_prony_gle,
    simulate_prony_states,
)
from .spectral import (
    FgleParams,
    SpectralDensity,
    fgle_filter_ghat,
    fgle_params_from_physical,
    fgle_velocity_density,
    gle_velocity_spectrum,
    increment_spectrum,
    ou_velocity_density,
    resolvent_fourier,
    verify_msd_bounds,
)
from .trackio import (
    AcfCurve,
    MsdCurve,
    Track,
    detrend,
    ensemble_msd,
    increments,
    load_tracks,
    pathwise_msd,
    sample_acf,
    save_tracks,
)
from .util import NumericalError, ValidationError
from .waveletsim import (
    FilterBank,
    build_filter_bank,
    discretization_filter,
    ou_exact_ratio,
    refine,
    simulate_fgle_wavelet,
)

__version__ = "0.1.0"
