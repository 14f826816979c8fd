"""Generative models: band-limited and normal sources pushed through a
nonlinearity, plus theoretical values of every dependence measure.

The generating pair is

    X = V,    Y = rho * g(X) + sqrt(1 - rho^2) * U,

with V, U i.i.d. from the family pdf and g one of {x, x^2, x^3, sin x}.
The band-limited family is the normalized two-bump sinc^4 shape; its
normalizer is computed once by quadrature (the raw shape does not integrate
to one) and pinned as a regression constant in the tests.

Theoretical mutual information uses the additive-noise identity
I(X; Y) = h(Y) - h(U) - ln s, which is exact for this model class and needs
only 1-D integrals.  The marginal density of Y has no closed form for
nonlinear g; it is tabulated on an asinh-warped grid (the cubic map of the
heavy-tailed band-limited family spreads Y over ~1e8 half-widths) by
quadrature over X -- pdf-weighted nodes for the normal family, quantile
nodes for the band-limited one, where node density following the mass is
what keeps the 1/x^4 tails tractable -- then interpolated with a cubic
spline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import ndtr, ndtri

from .numerics import (
    QuadratureError,
    QuadratureSpec,
    RandomStream,
    integrate_1d,
    integrate_2d,
    simpson_nodes,
)


class Family(str, Enum):
    BAND_LIMITED = "bandlimited"
    NORMAL = "normal"


class Nonlinearity(str, Enum):
    LINEAR = "linear"
    QUADRATIC = "quadratic"
    CUBIC = "cubic"
    SINE = "sine"


_G_FUNCS = {
    Nonlinearity.LINEAR: lambda x: x,
    Nonlinearity.QUADRATIC: lambda x: np.square(x),
    Nonlinearity.CUBIC: lambda x: x ** 3,
    Nonlinearity.SINE: np.sin,
}


@dataclass(frozen=True)
class GenModel:
    """A generating configuration (family, nonlinearity g, spread rho).

    mu/sigma parameterize the normal family only; the band-limited family
    has a fixed shape.  rho = 1 is excluded because it collapses the noise
    term sqrt(1 - rho^2) * U.
    """

    family: Family
    nonlinearity: Nonlinearity
    rho: float
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "nonlinearity", Nonlinearity(self.nonlinearity))
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    @property
    def noise_scale(self):
        """sqrt(1 - rho^2), the weight of the independent noise term."""
        return math.sqrt(1.0 - self.rho ** 2)

    def g(self, x):
        return _G_FUNCS[self.nonlinearity](x)


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Paired observations (x_i, y_i) with provenance."""

    xs: np.ndarray
    ys: np.ndarray
    seed: int
    stream_id: int = 0
    model: Optional[GenModel] = None

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 1:
            raise ValueError("xs and ys must be equal-length 1-D arrays with n >= 1")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
            raise ValueError("sample values must be finite")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @property
    def n(self):
        return self.xs.size

    def swapped(self):
        return SampleSet(self.ys, self.xs, self.seed, self.stream_id, self.model)


# ---------------------------------------------------------------------------
# band-limited family internals

_BL_GRID_SPACING = 1.0 / 51.2  # fine relative to the 1/0.2 kernel scale
_BL_TAIL_MASS = 1e-8


def bandlimited_raw(x):
    """Unnormalized two-bump shape sinc^4(0.2x - 0.1) + sinc^4(0.2x + 0.1)."""
    x = np.asarray(x, dtype=float)
    out = np.sinc(0.2 * x - 0.1) ** 4 + np.sinc(0.2 * x + 0.1) ** 4
    return float(out) if out.ndim == 0 else out


def _bl_tail_bound(half_width):
    # mass of the C/x^4 envelope beyond +-half_width (both sides), using the
    # analytic normalizer 20/3 for the bound only
    z0 = 20.0 / 3.0
    edge = 0.2 * half_width - 0.1
    per_side = 2.0 / (z0 * math.pi ** 4 * 0.2 * 3.0 * edge ** 3)
    return 2.0 * per_side


def bandlimited_half_width():
    """Smallest scanned half-width with envelope tail mass below 1e-8."""
    L = 50.0
    while _bl_tail_bound(L) > _BL_TAIL_MASS:
        L += 5.0
    return L


_BL_TABLES = None


def _bl_tables():
    """(xgrid, cdf, Z, half_width), built once.

    The CDF table backs both the inverse-CDF sampler and the quantile nodes
    of the marginalization quadrature.
    """
    global _BL_TABLES
    if _BL_TABLES is None:
        L = bandlimited_half_width()
        spec = QuadratureSpec(domain=(-L, L), abs_tol=1e-10, rel_tol=1e-12,
                              max_refinements=8, initial_panels=2 ** 14)
        z = integrate_1d(bandlimited_raw, spec)
        npts = int(round(2 * L / _BL_GRID_SPACING)) + 1
        xgrid = np.linspace(-L, L, npts)
        pdf = bandlimited_raw(xgrid)
        cdf = np.concatenate([[0.0], np.cumsum((pdf[1:] + pdf[:-1]) * 0.5 * np.diff(xgrid))])
        cdf /= cdf[-1]
        _BL_TABLES = (xgrid, cdf, z, L)
    return _BL_TABLES


def bandlimited_normalizer():
    """Normalizer Z making the band-limited shape integrate to one."""
    return _bl_tables()[2]


def bandlimited_pdf(x):
    """Normalized band-limited generating density (even in x)."""
    return bandlimited_raw(x) / bandlimited_normalizer()


# ---------------------------------------------------------------------------
# family-level helpers

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_NORMAL_PMIN = float(ndtr(-8.0))  # mass beyond the +-8 sigma box, per side


def family_pdf(model) -> Callable[[np.ndarray], np.ndarray]:
    if model.family is Family.BAND_LIMITED:
        return bandlimited_pdf
    mu, sigma = model.mu, model.sigma

    def pdf(x):
        x = np.asarray(x, dtype=float)
        return np.exp(-0.5 * ((x - mu) / sigma) ** 2) / (sigma * _SQRT_2PI)

    return pdf


def family_box(model):
    """Truncation interval holding all but <= 1e-8 of the family mass."""
    if model.family is Family.BAND_LIMITED:
        L = _bl_tables()[3]
        return (-L, L)
    return (model.mu - 8.0 * model.sigma, model.mu + 8.0 * model.sigma)


def family_quantile(model) -> Callable[[np.ndarray], np.ndarray]:
    if model.family is Family.BAND_LIMITED:
        xgrid, cdf, _, _ = _bl_tables()
        return lambda p: np.interp(p, cdf, xgrid)
    mu, sigma = model.mu, model.sigma
    return lambda p: mu + sigma * ndtri(np.clip(p, _NORMAL_PMIN, 1.0 - _NORMAL_PMIN))


def family_entropy(model):
    """Differential entropy of the family pdf."""
    if model.family is Family.NORMAL:
        return 0.5 * math.log(2.0 * math.pi * math.e * model.sigma ** 2)
    lo, hi = family_box(model)
    x, w = simpson_nodes(lo, hi, 2 ** 16)
    f = bandlimited_pdf(x)
    return -float(np.dot(w, f * np.log(np.maximum(f, 1e-300))))


def sample_model(model, n, stream):
    """Draw n paired observations from the generating model.

    V then U are drawn in that order from the family pdf (band-limited via
    inverse-CDF lookup on the dense table, normal via the generator's
    normal method); ys = rho*g(v) + sqrt(1-rho^2)*u.  Deterministic given
    (model, n, stream).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = stream.generator()
    if model.family is Family.BAND_LIMITED:
        xgrid, cdf, _, _ = _bl_tables()
        v = np.interp(rng.random(n), cdf, xgrid)
        u = np.interp(rng.random(n), cdf, xgrid)
    else:
        v = rng.normal(model.mu, model.sigma, n)
        u = rng.normal(model.mu, model.sigma, n)
    ys = model.rho * model.g(v) + model.noise_scale * u
    return SampleSet(xs=v, ys=ys, seed=stream.master_seed,
                     stream_id=stream.stream_id, model=model)


# ---------------------------------------------------------------------------
# joint density and the tabulated marginal of Y

@dataclass(frozen=True, eq=False)
class DensityModel:
    """Joint and marginal densities of a generating model.

    f_x and f_xy are closed-form; f_y is a normalized spline over an
    asinh-warped grid (heavy-tailed Y ranges stay representable).  All three
    integrate to one within tolerance, checked at construction.
    """

    f_x: Callable
    f_y: Callable
    f_xy: Callable
    x_box: tuple
    y_box: tuple
    model: GenModel
    # marginal cache internals (used by the entropy and Bhattacharyya paths)
    t_grid: np.ndarray
    y_grid: np.ndarray
    fy_values: np.ndarray
    warp_center: float
    warp_scale: float
    fy_panels: int
    fy_last_change: float
    fy_norm_residual: float


# marginalization schedules per family: (start panels, cap, stop on max
# relative change).  The band-limited quantile nodes have steep spots (pdf
# zeros and polynomial tails), so convergence is first-order there and the
# cap does the work; the normal x-nodes converge at Simpson order.
_FY_SCHEDULE = {
    Family.NORMAL: (1024, 8192, 1e-7),
    Family.BAND_LIMITED: (2048, 8192, 6e-4),
}
_FY_POINTS = 4097


def _x_nodes(model, panels):
    """Quadrature nodes and X-density-absorbed weights for integrals of the
    form integral h(x) f_V(x) dx.

    Normal family: uniform Simpson nodes on the +-8 sigma box with the pdf
    folded into the weights (the integrand decays like f_V at the ends, so
    there is no boundary layer).  Band-limited family: uniform nodes in the
    quantile variable p, where the pdf is the Jacobian -- node density
    follows the mass, which keeps the 1/x^4 tails and the huge truncation
    box tractable.
    """
    if model.family is Family.NORMAL:
        lo, hi = family_box(model)
        x, w = simpson_nodes(lo, hi, panels)
        return x, w * family_pdf(model)(x)
    p, w = simpson_nodes(0.0, 1.0, panels)
    return family_quantile(model)(p), w


def _fy_on_grid(model, y_grid, panels):
    s = model.noise_scale
    f_u = family_pdf(model)
    nodes, w = _x_nodes(model, panels)
    gq = model.rho * model.g(nodes)
    vals = np.empty(y_grid.size)
    chunk = max(1, int(6_000_000 / (panels + 1)))
    for i0 in range(0, y_grid.size, chunk):
        block = f_u((y_grid[i0:i0 + chunk, None] - gq[None, :]) / s)
        vals[i0:i0 + chunk] = (block @ w) / s
    return vals


def joint_density(model, fy_points=_FY_POINTS):
    """Build the DensityModel for a generating configuration (rho < 1)."""
    s = model.noise_scale
    if s <= 0:
        raise ValueError("joint_density requires rho < 1")
    f_v = family_pdf(model)
    x_box = family_box(model)
    u_box = x_box

    def f_xy(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return f_v(x) * f_v((y - model.rho * model.g(x)) / s) / s

    # y support from the generator map over the truncated boxes
    xs = np.linspace(x_box[0], x_box[1], 40001)
    gx = model.rho * model.g(xs)
    y_box = (float(gx.min() + s * u_box[0]), float(gx.max() + s * u_box[1]))

    center = float(model.rho * model.g(np.asarray(model.mu)) + s * model.mu)
    scale = model.sigma if model.family is Family.NORMAL else 1.0
    t_lo = math.asinh((y_box[0] - center) / scale)
    t_hi = math.asinh((y_box[1] - center) / scale)
    t_grid = np.linspace(t_lo, t_hi, fy_points)
    y_grid = center + scale * np.sinh(t_grid)

    start, cap, stop = _FY_SCHEDULE[model.family]
    panels = start
    vals = _fy_on_grid(model, y_grid, panels)
    change = math.inf
    while panels < cap:
        panels *= 2
        nxt = _fy_on_grid(model, y_grid, panels)
        change = float(np.max(np.abs(nxt - vals)) / max(nxt.max(), 1e-300))
        vals = nxt
        if change <= stop:
            break

    # normalize the cache; the raw quadrature must already be close to one
    dydt = scale * np.cosh(t_grid)
    w_t = simpson_nodes(t_lo, t_hi, fy_points - 1)[1]
    raw_mass = float(np.dot(w_t, vals * dydt))
    if abs(raw_mass - 1.0) > 2e-3:
        raise QuadratureError(
            f"marginal f_y mass {raw_mass:.6f} too far from 1; marginalization "
            "did not converge", raw_mass, abs(raw_mass - 1.0))
    vals = vals / raw_mass
    spline = CubicSpline(t_grid, vals)

    def f_y(y):
        y = np.asarray(y, dtype=float)
        t = np.arcsinh((y - center) / scale)
        out = spline(np.clip(t, t_lo, t_hi))
        out = np.maximum(out, 0.0)
        out = np.where((t < t_lo) | (t > t_hi), 0.0, out)
        return float(out) if out.ndim == 0 else out

    dm = DensityModel(f_x=f_v, f_y=f_y, f_xy=f_xy, x_box=x_box, y_box=y_box,
                      model=model, t_grid=t_grid, y_grid=y_grid, fy_values=vals,
                      warp_center=center, warp_scale=scale, fy_panels=panels,
                      fy_last_change=change, fy_norm_residual=abs(raw_mass - 1.0))
    _check_density_normalization(dm)
    return dm


def _check_density_normalization(dm):
    spec = QuadratureSpec(domain=dm.x_box, abs_tol=1e-9, rel_tol=1e-9,
                          max_refinements=10,
                          initial_panels=_marginal_panels(dm.model))
    mass_x = integrate_1d(dm.f_x, spec)
    if abs(mass_x - 1.0) > 1e-6:
        raise QuadratureError(f"f_x mass {mass_x} not within 1e-6 of 1",
                              mass_x, abs(mass_x - 1.0))
    dydt = dm.warp_scale * np.cosh(dm.t_grid)
    w_t = simpson_nodes(dm.t_grid[0], dm.t_grid[-1], dm.t_grid.size - 1)[1]
    mass_y = float(np.dot(w_t, dm.fy_values * dydt))
    if abs(mass_y - 1.0) > 1e-6:
        raise QuadratureError(f"f_y mass {mass_y} not within 1e-6 of 1",
                              mass_y, abs(mass_y - 1.0))


def _marginal_panels(model):
    # enough initial panels to resolve the family's finest scale
    return 8192 if model.family is Family.BAND_LIMITED else 256


_DENSITY_CACHE: dict = {}


def density_for(model):
    """Memoized joint_density at default settings."""
    dm = _DENSITY_CACHE.get(model)
    if dm is None:
        dm = joint_density(model)
        if len(_DENSITY_CACHE) > 128:
            _DENSITY_CACHE.clear()
        _DENSITY_CACHE[model] = dm
    return dm


# ---------------------------------------------------------------------------
# theoretical measure values

def theoretical_mi(model, spec=None, method="entropy", density=None):
    """Mutual information of (X, Y) under the model.

    method "entropy" (default) uses the additive-noise identity
    I = h(Y) - h(U) - ln s, exact for Y = rho g(X) + s U; the only numerics
    are 1-D entropy integrals.  method "direct" integrates the log-ratio
    against f_xy over the (x, y) box with the 2-D Simpson rule and exists as
    an independent cross-check (pass a QuadratureSpec to control it).
    """
    dm = density if density is not None else density_for(model)
    if method == "entropy":
        dydt = dm.warp_scale * np.cosh(dm.t_grid)
        w_t = simpson_nodes(dm.t_grid[0], dm.t_grid[-1], dm.t_grid.size - 1)[1]
        fy = dm.fy_values
        h_y = -float(np.dot(w_t, np.where(fy > 0, fy * np.log(np.maximum(fy, 1e-300)), 0.0) * dydt))
        return h_y - family_entropy(model) - math.log(model.noise_scale)
    if method == "direct":
        if spec is None:
            spec = QuadratureSpec(domain=(dm.x_box, dm.y_box), abs_tol=1e-7,
                                  rel_tol=1e-7, max_refinements=8,
                                  initial_panels=_marginal_panels(model))

        def integrand(x, y):
            joint = dm.f_xy(x, y)
            prod = dm.f_x(x) * dm.f_y(y)
            ratio = np.where((joint > 0) & (prod > 0), joint / np.maximum(prod, 1e-300), 1.0)
            return np.where(joint > 0, joint * np.log(ratio), 0.0)

        return integrate_2d(integrand, spec)
    raise ValueError(f"unknown method {method!r}")


def theoretical_pearson(model, spec=None):
    """Population Pearson correlation via 1-D moment quadratures.

    All cross-moments reduce to family moments because U is independent of
    X: E[Y] = rho E[g] + s E[U], E[XY] = rho E[Xg(X)] + s E[X]E[U], and
    E[Y^2] = rho^2 E[g^2] + 2 rho s E[g]E[U] + s^2 E[U^2].
    """
    from .measures import UndefinedMeasureError

    if spec is None:
        spec = QuadratureSpec(domain=family_box(model), abs_tol=1e-10,
                              rel_tol=1e-10, max_refinements=8,
                              initial_panels=_marginal_panels(model))
    f = family_pdf(model)
    g = model.g

    def mom(fn):
        return integrate_1d(lambda x: fn(x) * f(x), spec)

    m1 = mom(lambda x: x)
    m2 = mom(np.square)
    mg1 = mom(g)
    mg2 = mom(lambda x: g(x) ** 2)
    mxg = mom(lambda x: x * g(x))

    rho, s = model.rho, model.noise_scale
    e_y = rho * mg1 + s * m1
    e_xy = rho * mxg + s * m1 * m1
    e_y2 = rho ** 2 * mg2 + 2.0 * rho * s * mg1 * m1 + s ** 2 * m2
    var_x = m2 - m1 ** 2
    var_y = e_y2 - e_y ** 2
    if var_x <= 0 or var_y <= 0:
        raise UndefinedMeasureError("zero variance: Pearson correlation undefined")
    return (e_xy - m1 * e_y) / math.sqrt(var_x * var_y)


# (start x-side panels, start u-panels, cap refinements, stop on abs change)
_MDEP_SCHEDULE = {
    Family.NORMAL: (1024, 1024, 2, 1e-7),
    Family.BAND_LIMITED: (2048, 4096, 1, 2e-5),
}


def theoretical_mdep(model, spec=None, density=None):
    """Mutual dependence d(X, Y): the Bhattacharyya distance between the
    joint density and the product of marginals.

    The overlap integral is taken in generator coordinates (x-node of X,
    noise value u), where the integrand is bounded by the family densities;
    this keeps heavy-tailed Y marginals integrable on family-sized boxes.
    Returns sqrt(1 - BC) with the radicand clamped to [0, 1].
    """
    dm = density if density is not None else density_for(model)
    s = model.noise_scale
    f_u = family_pdf(model)
    u_lo, u_hi = family_box(model)
    x_panels, u_panels, cap, stop = _MDEP_SCHEDULE[model.family]
    if spec is not None:
        stop = spec.abs_tol
        cap = spec.max_refinements

    prev = None
    change = math.inf
    for _ in range(cap + 1):
        nodes, wx = _x_nodes(model, x_panels)
        gq = model.rho * model.g(nodes)
        u, wu = simpson_nodes(u_lo, u_hi, u_panels)
        su_w = np.sqrt(s * f_u(u)) * wu
        total = 0.0
        chunk = max(1, int(6_000_000 / (u_panels + 1)))
        for i0 in range(0, x_panels + 1, chunk):
            y = gq[i0:i0 + chunk, None] + s * u[None, :]
            total += float(wx[i0:i0 + chunk] @ (np.sqrt(dm.f_y(y)) @ su_w))
        if prev is not None:
            change = abs(total - prev)
            if change <= stop:
                prev = total
                break
        prev = total
        x_panels *= 2
        u_panels *= 2
    if change > 1e-3 and not math.isinf(change):
        raise QuadratureError(
            f"mutual-dependence overlap integral unstable (change {change:.2g})",
            prev, change)
    bc = min(max(prev, 0.0), 1.0)
    return math.sqrt(1.0 - bc)


class DcorrOracle(NamedTuple):
    value: float
    std_error: float
    reps: int
    n_oracle: int


_DCORR_ORACLE_SEED = 0x5EED0DC0


def theoretical_dcorr_oracle(model, n_oracle=100_000, reps=20,
                             streams: Optional[Sequence[RandomStream]] = None):
    """Large-sample stand-in for the population distance correlation.

    Averages the empirical estimator over `reps` independent samples of
    size n_oracle and reports the standard error of that mean.  The
    characteristic-function integral is numerically hostile, so the
    sampled oracle is the supported route to "theoretical" values.
    """
    from .measures import distance_correlation

    if streams is None:
        streams = [RandomStream(_DCORR_ORACLE_SEED, k) for k in range(reps)]
    if len(streams) < reps:
        raise ValueError("need one stream per repetition")
    vals = np.empty(reps)
    for k in range(reps):
        sample = sample_model(model, n_oracle, streams[k])
        vals[k] = distance_correlation(sample)
    se = float(vals.std(ddof=1) / math.sqrt(reps)) if reps > 1 else math.nan
    return DcorrOracle(value=float(vals.mean()), std_error=se,
                       reps=reps, n_oracle=n_oracle)
