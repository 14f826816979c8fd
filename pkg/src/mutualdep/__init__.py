"""mutualdep: dependence measurement via band-limited ML density estimation.

Computes the mutual dependence (the Bhattacharyya distance between a joint
density and the product of its marginals) directly from paired data, and
benchmarks it against Pearson's and distance correlation on a family of
generating models.
"""

from .blml import BlmlFit, bin_samples, bin_width, gram_matrix, pdf_eval, pdf_integral, quick_fit, solve_blml
from .harness import (
    BenchResult,
    FcRule,
    SweepConfig,
    SweepRecord,
    bench_complexity,
    imse,
    imse_table,
    imse_trapezoid,
    read_sweep_csv,
    run_sweep,
    write_summary_jsonl,
    write_sweep_csv,
)
from .measures import (
    Flavor,
    MeasureKind,
    MeasureValue,
    UndefinedMeasureError,
    bhattacharyya,
    distance_correlation,
    gaussian_bhattacharyya,
    gaussian_mdep,
    mutual_dependence,
    pearson,
)
from .models import (
    DcorrOracle,
    DensityModel,
    Family,
    GenModel,
    Nonlinearity,
    SampleSet,
    bandlimited_half_width,
    bandlimited_normalizer,
    bandlimited_pdf,
    joint_density,
    sample_model,
    theoretical_dcorr_oracle,
    theoretical_mdep,
    theoretical_mi,
    theoretical_pearson,
)
from .numerics import (
    NonConvergenceError,
    QuadratureError,
    QuadratureSpec,
    RandomStream,
    RNG_ALGORITHM,
    integrate_1d,
    integrate_2d,
    sinc2d,
    sinc_fc,
    solve_newton,
)

__version__ = "0.1.0"
