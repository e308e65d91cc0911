"""Analytic odd nonlinearities and their rescaled projections.

A model is an odd series ``f(u) = sum_m c[2m+1] u^(2m+1)`` starting at the
cubic term (``f'(0) = 0`` and ``f'''(0) = 6 c3 != 0``).  The rescaled
quantities divide out the amplitude scaling:

* ``scaled_eval(y, eps)  = f(eps y) / eps^3``
* ``scaled_deriv(y, eps) = f'(eps y) / eps^2``
* ``scaled_antideriv(y, eps) = F(eps y) / eps^4`` with ``F' = f``, ``F(0)=0``

each computed directly from the series in powers of ``(eps y)^2``, which is
finite and smooth down to ``eps = 0`` (no catastrophic cancellation at any
epsilon).  The projected forcings of the slow/fast system are

* ``tilde_f(v, w, eps) = -(1/omega^2) P[ scaled_eval(v sin x + w, eps) ]``
* ``tilde_g(v, w, eps) = -(1/omega^2) Q[ scaled_eval(v sin x + w, eps) ]``

with ``omega^2 = 1 + eps^2`` and P/Q the sin-x projection pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np
from numpy.typing import NDArray

from .fourier import SpatialField, project_P, project_Q, x_grid

Array = NDArray[np.float64]

__all__ = ["Nonlinearity", "TrustRadiusError", "tilde_f", "tilde_g", "tilde_fg"]


class TrustRadiusError(ValueError):
    """Argument outside the region where the series truncation is certified."""


@dataclass(frozen=True)
class Nonlinearity:
    """Odd analytic nonlinearity given by its Taylor coefficients.

    Parameters
    ----------
    name : str
        Identifier used in configs and reports.
    odd_coeffs : tuple of float
        Coefficients (c3, c5, c7, ...) of u^3, u^5, u^7, ...
    trust_radius : float
        Largest |u| at which the truncation error is certified below 1e-12.
    """

    name: str
    odd_coeffs: tuple[float, ...]
    trust_radius: float

    def __post_init__(self):
        if len(self.odd_coeffs) == 0 or self.odd_coeffs[0] == 0.0:
            raise ValueError("the cubic coefficient c3 must be nonzero")
        if not self.trust_radius > 0:
            raise ValueError("trust_radius must be positive")

    # -- constructors -------------------------------------------------------
    @classmethod
    def phi4(cls) -> "Nonlinearity":
        """f(u) = u^3."""
        return cls("phi4", (1.0,), trust_radius=10.0)

    @classmethod
    def sine_gordon(cls, n_terms: int = 12) -> "Nonlinearity":
        """f(u) = u - sin(u); truncation error below 1e-12 for |u| <= 3."""
        coeffs = tuple((-1.0) ** (m + 1) / factorial(2 * m + 1)
                       for m in range(1, n_terms + 1))
        return cls("sine-gordon", coeffs, trust_radius=3.0)

    @classmethod
    def from_spec(cls, spec: dict) -> "Nonlinearity":
        """Build a model from a config mapping.

        Accepted forms: {"model": "sine-gordon"}, {"model": "phi4"},
        {"model": "custom", "odd_coeffs": [c3, c5, ...], "trust_radius": r}.
        """
        kind = spec.get("model")
        allowed = {"model", "odd_coeffs", "trust_radius"} if kind == "custom" \
            else {"model"}
        unknown = sorted(set(spec) - allowed)
        if unknown:
            raise ValueError(f"unknown model spec fields: {', '.join(unknown)}")
        if kind == "sine-gordon":
            return cls.sine_gordon()
        if kind == "phi4":
            return cls.phi4()
        if kind == "custom":
            coeffs = tuple(float(c) for c in spec.get("odd_coeffs", ()))
            radius = float(spec.get("trust_radius", 1.0))
            return cls("custom", coeffs, trust_radius=radius)
        raise ValueError(f"unknown model spec: {spec!r}")

    # -- basic evaluation ----------------------------------------------------
    @property
    def f3(self) -> float:
        """Third derivative at the origin, 6 * c3."""
        return 6.0 * self.odd_coeffs[0]

    def _check_domain(self, u: Array | float) -> None:
        m = np.max(np.abs(u)) if np.ndim(u) else abs(u)
        if m > self.trust_radius:
            raise TrustRadiusError(
                f"|u| = {m:.3g} exceeds trust radius {self.trust_radius:.3g}"
                f" of model {self.name}")

    def eval(self, u: Array | float):
        """f(u) by Horner evaluation of the odd series."""
        self._check_domain(u)
        u = np.asarray(u, dtype=float)
        u2 = u * u
        acc = np.zeros_like(u)
        for c in reversed(self.odd_coeffs):
            acc = acc * u2 + c
        out = acc * u2 * u
        return float(out) if out.ndim == 0 else out

    def deriv(self, u: Array | float, order: int = 1):
        """Derivative of f at u, order in {1, 2, 3}."""
        if order not in (1, 2, 3):
            raise ValueError("order must be 1, 2, or 3")
        self._check_domain(u)
        u = np.asarray(u, dtype=float)
        u2 = u * u
        acc = np.zeros_like(u)
        for m in range(len(self.odd_coeffs), 0, -1):
            n = 2 * m + 1
            if order == 1:
                c = n * self.odd_coeffs[m - 1]
            elif order == 2:
                c = n * (n - 1) * self.odd_coeffs[m - 1]
            else:
                c = n * (n - 1) * (n - 2) * self.odd_coeffs[m - 1]
            acc = acc * u2 + c
        # remaining power of u after pulling out u^2 per series step
        tail = u2 if order == 1 else (u if order == 2 else np.ones_like(u))
        out = acc * tail
        return float(out) if out.ndim == 0 else out

    # -- rescaled forms (finite at eps = 0) ----------------------------------
    def scaled_eval(self, y: Array | float, eps: float):
        """f(eps*y)/eps^3 = y^3 * sum_m c_{2m+1} (eps*y)^(2m-2)."""
        self._check_domain(eps * np.asarray(y, dtype=float))
        y = np.asarray(y, dtype=float)
        z = (eps * y) ** 2
        acc = np.zeros_like(y)
        for c in reversed(self.odd_coeffs):
            acc = acc * z + c
        out = acc * y**3
        return float(out) if out.ndim == 0 else out

    def scaled_deriv(self, y: Array | float, eps: float):
        """f'(eps*y)/eps^2 = y^2 * sum_m (2m+1) c_{2m+1} (eps*y)^(2m-2)."""
        self._check_domain(eps * np.asarray(y, dtype=float))
        y = np.asarray(y, dtype=float)
        z = (eps * y) ** 2
        acc = np.zeros_like(y)
        for m in range(len(self.odd_coeffs), 0, -1):
            acc = acc * z + (2 * m + 1) * self.odd_coeffs[m - 1]
        out = acc * y**2
        return float(out) if out.ndim == 0 else out

    def scaled_antideriv(self, y: Array | float, eps: float):
        """F(eps*y)/eps^4 with F' = f: y^4 * sum_m c_{2m+1} (eps*y)^(2m-2)/(2m+2)."""
        self._check_domain(eps * np.asarray(y, dtype=float))
        y = np.asarray(y, dtype=float)
        z = (eps * y) ** 2
        acc = np.zeros_like(y)
        for m in range(len(self.odd_coeffs), 0, -1):
            acc = acc * z + self.odd_coeffs[m - 1] / (2 * m + 2)
        out = acc * y**4
        return float(out) if out.ndim == 0 else out

    def to_spec(self) -> dict:
        if self.name in ("sine-gordon", "phi4"):
            return {"model": self.name}
        return {"model": "custom", "odd_coeffs": list(self.odd_coeffs),
                "trust_radius": self.trust_radius}


# ---------------------------------------------------------------------------
# projected rescaled forcings
# ---------------------------------------------------------------------------

def _grid_size(band: int) -> int:
    return max(4 * band, 32)


def tilde_fg(v: float, w: SpatialField | None, eps: float,
             model: Nonlinearity, N_out: int | None = None,
             M: int | None = None) -> tuple[float, SpatialField]:
    """P and Q components of the rescaled forcing at one tau-slice.

    Returns ``(-(1/omega^2) P[scaled_eval(xi)], -(1/omega^2) Q[scaled_eval(xi)])``
    with ``xi = v sin x + w``.  ``N_out`` sets the spatial band of the Q part
    (defaults to the band of ``w`` or 8 for w = 0); ``M`` overrides the
    collocation size.
    """
    band_in = w.band if w is not None else 1
    N_out = N_out if N_out is not None else max(band_in, 8)
    M = M if M is not None else _grid_size(max(3 * band_in, N_out, 8))
    x = x_grid(M)
    xi = v * np.sin(x)
    if w is not None:
        xi = xi + w.values(x)
    vals = model.scaled_eval(xi, eps)
    scale = -1.0 / (1.0 + eps**2)
    p_part = scale * project_P(vals)
    q_part = scale * project_Q(vals, N_out)
    return p_part, q_part


def tilde_f(v: float, w: SpatialField | None, eps: float,
            model: Nonlinearity, M: int | None = None) -> float:
    """Slow-equation forcing: -(1/omega^2) P[f(eps(v sin x + w))/eps^3]."""
    return tilde_fg(v, w, eps, model, M=M)[0]


def tilde_g(v: float, w: SpatialField | None, eps: float,
            model: Nonlinearity, N_out: int | None = None,
            M: int | None = None) -> SpatialField:
    """Fast-equation forcing: -(1/omega^2) Q[f(eps(v sin x + w))/eps^3]."""
    return tilde_fg(v, w, eps, model, N_out=N_out, M=M)[1]
