"""Shared numerical primitives: sinc kernels, Simpson quadrature, a damped
Newton solver, and the deterministic random-stream contract.

Everything here is a pure function of its inputs.  Integrand callables are
expected to accept numpy arrays and evaluate elementwise (vectorized).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class QuadratureError(RuntimeError):
    """Quadrature failed to reach the requested tolerance.

    Carries the last estimate and the last Richardson error bound so callers
    can decide whether the partial result is usable.
    """

    def __init__(self, message, estimate, error_bound):
        super().__init__(message)
        self.estimate = estimate
        self.error_bound = error_bound


class NonConvergenceError(RuntimeError):
    """Newton iteration hit its cap (or stalled) above tolerance."""

    def __init__(self, message, x, residual_norm):
        super().__init__(message)
        self.x = x
        self.residual_norm = residual_norm


@dataclass(frozen=True)
class QuadratureSpec:
    """Controls for the adaptive composite-Simpson integrators.

    domain is (lo, hi) for 1-D or ((xlo, xhi), (ylo, yhi)) for 2-D; bounds
    must be finite with lo < hi.  Refinement doubles the panel count and
    stops once the Richardson estimate |S_2h - S_h|/15 drops below
    max(abs_tol, rel_tol*|S_h|).
    """

    domain: tuple
    abs_tol: float = 1e-9
    rel_tol: float = 1e-9
    max_refinements: int = 12
    initial_panels: int = 16

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_refinements < 1:
            raise ValueError("max_refinements must be >= 1")
        if self.initial_panels < 2 or self.initial_panels % 2:
            raise ValueError("initial_panels must be an even count >= 2")
        for lo, hi in self._axes():
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValueError(f"domain bounds must be finite with lo < hi, got ({lo}, {hi})")

    def _axes(self):
        d = self.domain
        if len(d) == 2 and np.isscalar(d[0]):
            return [(float(d[0]), float(d[1]))]
        return [(float(lo), float(hi)) for lo, hi in d]

    @property
    def ndim(self):
        return len(self._axes())


@dataclass(frozen=True)
class RandomStream:
    """One reproducible stream of random variates.

    Realized as numpy's counter-based Philox4x64 bit generator keyed by
    (master_seed, stream_id).  Identical keys give bit-identical variate
    sequences regardless of execution order or thread schedule; the
    algorithm identifier is pinned in RNG_ALGORITHM.  A stream is
    single-owner: use one per Monte Carlo trial, never shared.
    """

    master_seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        key = np.array([self.master_seed % 2**64, self.stream_id % 2**64],
                       dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


RNG_ALGORITHM = f"philox4x64/numpy-{np.__version__}"


def sinc_fc(x, fc):
    """Band-limited interpolation kernel sin(pi*fc*x)/(pi*x).

    The removable singularity at x=0 evaluates to the limit fc.  Accepts
    scalars or arrays; scalars come back as floats.
    """
    if fc <= 0 or not np.isfinite(fc):
        raise ValueError(f"fc must be a positive finite frequency, got {fc}")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("sinc_fc requires finite input")
    out = fc * np.sinc(fc * x)
    return float(out) if out.ndim == 0 else out


def sinc2d(dx, dy, fc):
    """Coordinate-product kernel sinc_fc(dx) * sinc_fc(dy)."""
    out = sinc_fc(dx, fc) * sinc_fc(dy, fc)
    return float(out) if np.ndim(out) == 0 else out


def _simpson_weights(panels):
    w = np.ones(panels + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / 3.0


def simpson_nodes(lo, hi, panels):
    """Uniform Simpson nodes and weights on [lo, hi] with an even panel count."""
    x = np.linspace(lo, hi, panels + 1)
    w = _simpson_weights(panels) * ((hi - lo) / panels)
    return x, w


def integrate_1d(f, spec):
    """Integrate a vectorized callable over spec.domain = (lo, hi).

    Composite Simpson with dyadic refinement; the Richardson estimate of
    the error must fall below max(abs_tol, rel_tol*|value|) or a
    QuadratureError is raised carrying the last estimate.
    """
    (lo, hi), = spec._axes()
    panels = spec.initial_panels
    x, w = simpson_nodes(lo, hi, panels)
    prev = float(np.dot(w, f(x)))
    err = np.inf
    for _ in range(spec.max_refinements):
        panels *= 2
        x, w = simpson_nodes(lo, hi, panels)
        cur = float(np.dot(w, f(x)))
        err = abs(cur - prev) / 15.0
        if err <= max(spec.abs_tol, spec.rel_tol * abs(cur)):
            return cur
        prev = cur
    raise QuadratureError(
        f"1-D quadrature did not converge after {spec.max_refinements} refinements "
        f"(estimate {prev:.9g}, error bound {err:.3g})", prev, err)


def integrate_2d(f, spec, chunk_elements=4_000_000):
    """Integrate f(x, y) over a rectangle by tensorized composite Simpson.

    f must broadcast over array arguments.  Evaluation is chunked along x
    to bound memory; the refinement rule matches integrate_1d.
    """
    axes = spec._axes()
    if len(axes) != 2:
        raise ValueError("integrate_2d needs a 2-D domain")
    (xlo, xhi), (ylo, yhi) = axes

    def tensor_value(panels):
        x, wx = simpson_nodes(xlo, xhi, panels)
        y, wy = simpson_nodes(ylo, yhi, panels)
        total = 0.0
        chunk = max(1, int(chunk_elements / (panels + 1)))
        for i0 in range(0, panels + 1, chunk):
            block = f(x[i0:i0 + chunk, None], y[None, :])
            total += float(wx[i0:i0 + chunk] @ (block @ wy))
        return total

    panels = spec.initial_panels
    prev = tensor_value(panels)
    err = np.inf
    for _ in range(spec.max_refinements):
        panels *= 2
        cur = tensor_value(panels)
        err = abs(cur - prev) / 15.0
        if err <= max(spec.abs_tol, spec.rel_tol * abs(cur)):
            return cur
        prev = cur
    raise QuadratureError(
        f"2-D quadrature did not converge after {spec.max_refinements} refinements "
        f"(estimate {prev:.9g}, error bound {err:.3g})", prev, err)


def solve_newton(residual, jacobian, x0, tol=1e-9, max_iter=200):
    """Damped Newton iteration for residual(x) = 0.

    Steps are halved (up to 30 times) until the trial iterate both stays in
    the positive orthant -- whenever the start point x0 is strictly
    positive -- and strictly decreases the residual sup-norm.  Returns x
    with ||residual(x)||_inf <= tol; raises NonConvergenceError with the
    final residual norm when the cap is hit or no acceptable step exists.

    Deterministic: identical inputs give identical outputs bit-for-bit.
    """
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    keep_positive = bool(np.all(x > 0))
    r = np.atleast_1d(residual(x))
    rnorm = float(np.max(np.abs(r)))
    for _ in range(max_iter):
        if rnorm <= tol:
            return x
        step = np.linalg.solve(np.atleast_2d(jacobian(x)), -r)
        alpha = 1.0
        accepted = False
        for _ in range(31):
            xn = x + alpha * step
            if not keep_positive or np.all(xn > 0):
                rn = np.atleast_1d(residual(xn))
                rn_norm = float(np.max(np.abs(rn)))
                if rn_norm < rnorm:
                    accepted = True
                    break
            alpha *= 0.5
        if not accepted:
            raise NonConvergenceError(
                f"Newton stalled at residual norm {rnorm:.3g} (tol {tol:.3g})", x, rnorm)
        x, r, rnorm = xn, rn, rn_norm
    if rnorm <= tol:
        return x
    raise NonConvergenceError(
        f"Newton hit iteration cap {max_iter} at residual norm {rnorm:.3g}", x, rnorm)
