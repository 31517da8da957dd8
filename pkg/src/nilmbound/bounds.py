"""Cramer-Rao type lower bounds on the weighted schedule-estimation error.

All bounds are built from a correlation matrix ``R`` (discrete or continuous),
positive weights ``pi`` (the diagonal of ``Pi``) and the scalar noise Fisher
information ``iw``:

* unbiased estimators: ``trace(Pi R^-1) / iw``
* any estimator with mean ``mu(tau)``:
  ``trace(Pi J R^-1 J^T) / iw + ||Pi^1/2 mu||^2`` with ``J = dmu/dtau``
* the eigenvalue relaxation of the previous bound:
  ``c1 trace(Pi R^-1) / iw + c2``
* the large-sample version, ``trace(Pi R_c^-1) / iw`` on the continuous matrix.

A rank-deficient ``R`` means some schedule direction cannot be identified from
the measurements; the bound is then reported as ``+inf`` with ``singular=True``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Protocol

import numpy as np
import scipy.linalg as la

from .correlation import (
    CorrelationMatrix,
    Flavor,
    QuadratureSpec,
    SamplingGrid,
    as_schedule,
    r_continuous,
    r_continuous_partials,
    r_discrete,
    r_discrete_partials,
)
from .errors import GradientUnavailableError, ValidationError

__all__ = [
    "Theorem",
    "BiasTerm",
    "BoundResult",
    "AffineBias",
    "EmpiricalBias",
    "as_weights",
    "bound_unbiased",
    "bound_biased",
    "bound_biased_simplified",
    "bound_asymptotic",
    "bound_gradient",
    "trace_objective",
]

SINGULAR_RTOL = 1e-12
GRADIENT_MAX_CONDITION = 1e12


class Theorem(str, Enum):
    THM1 = "thm1"
    THM2 = "thm2"
    COR1 = "cor1"
    COR2 = "cor2"


class BiasTerm(str, Enum):
    AS_STATED = "as_stated"  # ||Pi^1/2 mu||^2
    CENTERED = "centered"  # ||Pi^1/2 (mu - tau)||^2


@dataclass(frozen=True)
class BoundResult:
    value: float
    theorem: Theorem
    fisher_scalar: float
    smallest_eigenvalue: float
    condition_estimate: float
    singular: bool = field(init=False)
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "theorem", Theorem(self.theorem))
        value = float(self.value)
        if math.isnan(value) or value < 0:
            raise ValidationError(f"bound value must be non-negative, got {value!r}")
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "singular", math.isinf(value))

    def to_record(self) -> dict:
        rec = {
            "theorem": self.theorem.value,
            "value": _encode(self.value),
            "iw": self.fisher_scalar,
            "smallest_eigenvalue": self.smallest_eigenvalue,
            "condition_estimate": _encode(self.condition_estimate),
            "singular": self.singular,
        }
        if self.details:
            rec["details"] = {k: _encode_any(v) for k, v in self.details.items()}
        return rec

    @classmethod
    def from_record(cls, rec) -> BoundResult:
        return cls(
            value=_decode(rec["value"]),
            theorem=rec["theorem"],
            fisher_scalar=float(rec["iw"]),
            smallest_eigenvalue=float(rec["smallest_eigenvalue"]),
            condition_estimate=_decode(rec["condition_estimate"]),
            details={k: _decode_any(v) for k, v in rec.get("details", {}).items()},
        )


def _encode(x):
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _decode(x):
    return float(x)  # float("inf") parses the sentinel


def _encode_any(v):
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_encode_any(x) for x in np.asarray(v).tolist()]
    if isinstance(v, (float, np.floating)):
        return _encode(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _decode_any(v):
    if isinstance(v, list):
        return [_decode_any(x) for x in v]
    if v in ("inf", "-inf"):
        return float(v)
    return v


def as_weights(weights, n) -> np.ndarray:
    if weights is None:
        return np.ones(n)
    w = np.asarray(weights, dtype=float).ravel()
    if w.size != n:
        raise ValidationError(f"expected {n} weights, got {w.size}")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise ValidationError("weights must be finite and positive")
    return w


def _as_correlation(r, flavor=Flavor.DISCRETE) -> CorrelationMatrix:
    if not isinstance(r, CorrelationMatrix):
        r = CorrelationMatrix(np.atleast_2d(np.asarray(r, dtype=float)), flavor)
    if not r.is_symmetric():
        raise ValidationError("correlation matrix is not symmetric")
    if not r.is_psd():
        raise ValidationError(
            f"correlation matrix is indefinite (smallest eigenvalue {r.smallest_eigenvalue:.3g})"
        )
    return r


def _check_fisher(iw):
    if not (math.isfinite(iw) and iw > 0):
        raise ValidationError(f"Fisher information must be finite and positive, got {iw!r}")
    return float(iw)


def is_singular(r: CorrelationMatrix) -> bool:
    return r.largest_eigenvalue <= 0 or r.smallest_eigenvalue <= SINGULAR_RTOL * r.norm


def _inverse(r: CorrelationMatrix):
    """Inverse via Cholesky, or ``None`` when ``r`` is numerically singular."""
    if is_singular(r):
        return None
    try:
        factor = la.cho_factor(r.matrix, lower=True)
    except la.LinAlgError:
        return None
    return la.cho_solve(factor, np.eye(r.n))


def _result(value, theorem, iw, r, **details):
    return BoundResult(
        value=value,
        theorem=theorem,
        fisher_scalar=iw,
        smallest_eigenvalue=r.smallest_eigenvalue,
        condition_estimate=r.condition_estimate,
        details=details,
    )


def bound_unbiased(r, weights=None, iw=1.0) -> BoundResult:
    """``trace(Pi R^-1) / iw``, or ``+inf`` if ``R`` is singular."""
    r = _as_correlation(r)
    iw = _check_fisher(iw)
    w = as_weights(weights, r.n)
    inv = _inverse(r)
    if inv is None:
        return _result(math.inf, Theorem.THM1, iw, r)
    return _result(float(w @ np.diag(inv)) / iw, Theorem.THM1, iw, r)


def bound_asymptotic(rc, weights=None, iw=1.0, spacing=None) -> BoundResult:
    """``trace(Pi R_c^-1) / iw`` on the continuous matrix.

    With ``spacing`` given, the value is multiplied by it so it can be compared
    directly with :func:`bound_unbiased` on a uniform grid of that spacing
    (``spacing * R_d`` is a Riemann sum for ``R_c``).
    """
    if isinstance(rc, CorrelationMatrix) and rc.flavor is not Flavor.CONTINUOUS:
        raise ValidationError("asymptotic bound needs the continuous correlation matrix")
    rc = _as_correlation(rc, Flavor.CONTINUOUS)
    iw = _check_fisher(iw)
    w = as_weights(weights, rc.n)
    scale = 1.0 if spacing is None else float(spacing)
    details = {} if spacing is None else {"spacing": scale}
    inv = _inverse(rc)
    if inv is None:
        return _result(math.inf, Theorem.COR2, iw, rc, **details)
    return _result(scale * float(w @ np.diag(inv)) / iw, Theorem.COR2, iw, rc, **details)


class BiasModel(Protocol):
    def mean(self, tau) -> np.ndarray: ...

    def jacobian(self, tau) -> np.ndarray: ...


@dataclass(frozen=True)
class AffineBias:
    """Estimator mean ``mu(tau) = A tau + b``."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        if a.shape[0] != a.shape[1] or b.size != a.shape[0]:
            raise ValidationError(f"affine bias needs square A and matching b, got {a.shape}, {b.shape}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValidationError("affine bias parameters must be finite")
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n), np.zeros(n))

    def mean(self, tau):
        return self.A @ np.asarray(tau, dtype=float) + self.b

    def jacobian(self, tau):
        return self.A

    def standard_error(self, tau):
        return None


@dataclass
class EmpiricalBias:
    """Estimator mean measured by Monte Carlo.

    ``mean_fn(tau, trials, seed)`` returns ``(mean, standard_error)``.  The
    Jacobian uses central differences with step ``step`` and the same seed on
    both sides (common random numbers), which keeps the difference quotient
    from being swamped by sampling noise.
    """

    mean_fn: Callable
    step: float
    trials: int = 200
    seed: int = 0
    _cache: dict = field(default_factory=dict, repr=False)

    def _eval(self, tau):
        key = tuple(np.round(np.asarray(tau, dtype=float), 12))
        if key not in self._cache:
            m, se = self.mean_fn(np.asarray(tau, dtype=float), self.trials, self.seed)
            self._cache[key] = (np.asarray(m, dtype=float), np.asarray(se, dtype=float))
        return self._cache[key]

    def mean(self, tau):
        return self._eval(tau)[0]

    def standard_error(self, tau):
        return self._eval(tau)[1]

    def jacobian(self, tau):
        tau = np.asarray(tau, dtype=float)
        n = tau.size
        jac = np.empty((n, n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = self.step
            jac[:, j] = (self.mean(tau + e) - self.mean(tau - e)) / (2 * self.step)
        return jac


def _bias_terms(bias, tau, n, bias_term):
    tau = as_schedule(tau, n)
    jac = np.atleast_2d(np.asarray(bias.jacobian(tau), dtype=float))
    mu = np.asarray(bias.mean(tau), dtype=float).ravel()
    if jac.shape != (n, n) or mu.size != n:
        raise ValidationError("bias model dimensions do not match the correlation matrix")
    offset = mu - tau if BiasTerm(bias_term) is BiasTerm.CENTERED else mu
    details = {"bias_term": BiasTerm(bias_term).value}
    se = getattr(bias, "standard_error", lambda _: None)(tau)
    if se is not None:
        details["mu_standard_error"] = np.asarray(se, dtype=float).tolist()
    return jac, offset, details


def bound_biased(r, weights, iw, bias, tau, bias_term=BiasTerm.AS_STATED) -> BoundResult:
    """``trace(Pi J R^-1 J^T) / iw + ||Pi^1/2 mu||^2`` for a biased estimator.

    If ``R`` is singular but ``J`` annihilates its null space, the first term
    is finite and evaluated on the range of ``R`` with the pseudo-inverse;
    ``details["range_space"]`` is set in that case.
    """
    r = _as_correlation(r)
    iw = _check_fisher(iw)
    w = as_weights(weights, r.n)
    jac, offset, details = _bias_terms(bias, tau, r.n, bias_term)
    second = float(w @ offset**2)
    inv = _inverse(r)
    if inv is None:
        evals, evecs = np.linalg.eigh(r.matrix)
        null = evals <= SINGULAR_RTOL * max(r.norm, 0.0)
        leak = np.linalg.norm(jac @ evecs[:, null])
        if leak > 1e-9 * max(1.0, np.linalg.norm(jac)):
            return _result(math.inf, Theorem.THM2, iw, r, **details)
        rng = ~null
        inv = (evecs[:, rng] / evals[rng]) @ evecs[:, rng].T
        details["range_space"] = True
    first = float(np.trace((w[:, None] * jac) @ inv @ jac.T)) / iw
    return _result(max(first, 0.0) + second, Theorem.THM2, iw, r, **details)


def bound_biased_simplified(r, weights, iw, bias, tau, bias_term=BiasTerm.AS_STATED):
    """Weaker biased bound ``c1 trace(Pi R^-1) / iw + c2``.

    Returns ``(result, c1, c2)`` with
    ``c1 = lambda_min(Pi^-1/2 J^T Pi J Pi^-1/2)`` and ``c2 = ||Pi^1/2 mu||^2``.
    A rank-deficient ``J`` gives ``c1 = 0`` and the first term drops out.
    """
    r = _as_correlation(r)
    iw = _check_fisher(iw)
    w = as_weights(weights, r.n)
    jac, offset, details = _bias_terms(bias, tau, r.n, bias_term)
    s = 1.0 / np.sqrt(w)
    gram = (s[:, None] * (jac.T @ (w[:, None] * jac))) * s[None, :]
    evals = np.linalg.eigvalsh(0.5 * (gram + gram.T))
    c1 = float(evals[0])
    if c1 <= 1e-12 * max(1.0, float(evals[-1])):
        c1 = 0.0
    c2 = float(w @ offset**2)
    details.update(c1=c1, c2=c2)
    if c1 == 0.0:
        value = c2
    else:
        inv = _inverse(r)
        value = math.inf if inv is None else c1 * float(w @ np.diag(inv)) / iw + c2
    return _result(value, Theorem.COR1, iw, r, **details), c1, c2


def _matrix_and_partials(catalog, tau, flavor, grid, quadrature):
    flavor = Flavor(flavor)
    if flavor is Flavor.DISCRETE:
        if grid is None:
            raise ValidationError("discrete flavor needs a sampling grid")
        return r_discrete(catalog, tau, grid), lambda: r_discrete_partials(catalog, tau, grid)
    return r_continuous(catalog, tau, quadrature), lambda: r_continuous_partials(catalog, tau, quadrature)


def trace_objective(catalog, tau, weights=None, grid=None, flavor=Flavor.DISCRETE, quadrature=None) -> float:
    """``trace(Pi R^-1)`` (``+inf`` at singular schedules)."""
    r, _ = _matrix_and_partials(catalog, tau, flavor, grid, quadrature)
    inv = _inverse(r)
    if inv is None:
        return math.inf
    return float(as_weights(weights, r.n) @ np.diag(inv))


def bound_gradient(
    catalog,
    tau,
    grid: SamplingGrid | None,
    weights=None,
    flavor=Flavor.DISCRETE,
    quadrature: QuadratureSpec | None = None,
    iw: float = 1.0,
) -> np.ndarray:
    """Gradient of ``trace(Pi R(tau)^-1) / iw`` with respect to the schedule.

    Uses ``d trace(Pi R^-1) / dtau_i = -trace(R^-1 Pi R^-1 dR/dtau_i)`` with one
    Cholesky factorization shared by all components.  With the default
    ``iw=1`` this is the gradient of the scheduling objective itself.
    """
    iw = _check_fisher(iw)
    r, partials = _matrix_and_partials(catalog, tau, flavor, grid, quadrature)
    w = as_weights(weights, r.n)
    if r.condition_estimate > GRADIENT_MAX_CONDITION:
        raise GradientUnavailableError(
            f"correlation matrix too ill-conditioned for a gradient "
            f"(condition {r.condition_estimate:.3g})",
            r.condition_estimate,
        )
    inv = _inverse(r)
    if inv is None:
        raise GradientUnavailableError("correlation matrix is singular")
    x = inv @ (w[:, None] * inv)
    dr = partials()
    return -np.einsum("ab,iab->i", x, dr) / iw


def with_details(result: BoundResult, **extra) -> BoundResult:
    return replace(result, details={**result.details, **extra})
