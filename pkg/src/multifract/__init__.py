"""MF-DFA multifractality analysis with IAAFT surrogate hypothesis tests."""

__version__ = "0.1.0"

from .ingest import PriceSeries, ReturnSeries, display_transform, load_price_csv, log_returns
from .mfdfa import (
    AnalysisConfig,
    FluctuationSurface,
    MultifractalSpectrum,
    Profile,
    analyze_profile,
    analyze_returns,
    default_q_grid,
    default_scale_grid,
    detrend_segment,
    fluctuation_surface,
    hurst_spectrum,
    local_fluctuation,
    make_profile,
    mass_exponents,
    overall_fluctuation,
    partition_segments,
    singularity_spectrum,
)
from .mftest import (
    EnsembleStats,
    QuadFit,
    ShapeFlags,
    TestReport,
    ensemble_statistics,
    format_report,
    quadratic_tau_fit,
    shape_diagnostics,
    spectrum_difference_test,
    verdict,
    width_test,
)
from .surrogate import IaaftConfig, IaaftResult, SurrogateEnsemble, ensemble, iaaft, save_ensemble
from .synth import (
    CascadeSpec,
    FbmSpec,
    binomial_cascade,
    cascade_analytic_hq,
    fbm,
    fgn,
    gaussian_white_noise,
)
