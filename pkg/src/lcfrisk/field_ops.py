"""Scalar fields at surface integration points.

Von Mises stress, elastic-plastic strain amplitude and the normalized
gradients chi (stress) and chi_T (temperature).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .mesh_io import MeshModel, SurfaceQuadrature, gradient, interpolate

log = logging.getLogger(__name__)

SIGMA_FLOOR = 1e-6  # MPa
_RTOL = 4.0 * np.finfo(float).eps  # tightest relative tolerance brentq accepts


def von_mises(stress) -> np.ndarray | float:
    """Von Mises equivalent of stress tensors given as (xx, yy, zz, xy, yz, zx)."""
    s = np.asarray(stress, dtype=float)
    xx, yy, zz, xy, yz, zx = np.moveaxis(s, -1, 0)
    j = 0.5 * ((xx - yy) ** 2 + (yy - zz) ** 2 + (zz - xx) ** 2) + 3.0 * (xy**2 + yz**2 + zx**2)
    out = np.sqrt(np.maximum(j, 0.0))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PlasticityRule:
    """Elastic-plastic conversion of an elastic equivalent stress.

    ``rule`` is ``"elastic"`` or ``"neuber"``; the latter needs the cyclic
    Ramberg-Osgood coefficient ``K_prime`` (MPa) and exponent ``n_prime``.
    """

    rule: str = "elastic"
    K_prime: float | None = None
    n_prime: float | None = None

    def __post_init__(self):
        if self.rule not in ("elastic", "neuber"):
            raise ValueError(f"unknown plasticity rule {self.rule!r}")
        if self.rule == "neuber":
            if self.K_prime is None or not self.K_prime > 0:
                raise ValueError("neuber rule needs K_prime > 0")
            if self.n_prime is None or not 0 < self.n_prime <= 1:
                raise ValueError("neuber rule needs n_prime in (0, 1]")


ELASTIC = PlasticityRule()


def ramberg_osgood_strain(sigma, E, K_prime, n_prime):
    return sigma / E + (sigma / K_prime) ** (1.0 / n_prime)


def strain_amplitude(sigma_e: float, E: float, plasticity: PlasticityRule = ELASTIC) -> float:
    """Strain amplitude for an elastic equivalent stress ``sigma_e``.

    With the Neuber rule the local stress solves
    ``sigma * eps_RO(sigma) = sigma_e**2 / E`` on the bracket [0, sigma_e].
    """
    if sigma_e < 0 or not E > 0:
        raise ValueError(f"need sigma_e >= 0 and E > 0, got {sigma_e}, {E}")
    if plasticity.rule == "elastic" or sigma_e == 0.0:
        return sigma_e / E
    K, n = plasticity.K_prime, plasticity.n_prime
    target = sigma_e * sigma_e / E

    def residual(s):
        return s * ramberg_osgood_strain(s, E, K, n) - target

    if residual(sigma_e) <= 0.0:
        # plastic term below rounding: the elastic end of the bracket is the root
        sigma = sigma_e
    else:
        try:
            sigma = brentq(residual, 0.0, sigma_e, xtol=1e-300, rtol=_RTOL, maxiter=200)
        except RuntimeError as exc:
            raise ArithmeticError(f"Neuber solve failed for sigma_e={sigma_e}, E={E}, K'={K}, n'={n}: {exc}") from exc
    return ramberg_osgood_strain(sigma, E, K, n)


def nominal_stress(eps: float, E: float, plasticity: PlasticityRule) -> float:
    """Inverse of the Ramberg-Osgood curve (stress for a given strain)."""
    if plasticity.rule == "elastic" or eps == 0.0:
        return eps * E
    K, n = plasticity.K_prime, plasticity.n_prime

    def residual(s):
        return ramberg_osgood_strain(s, E, K, n) - eps

    if residual(eps * E) <= 0.0:
        return eps * E
    return brentq(residual, 0.0, eps * E, xtol=1e-300, rtol=_RTOL, maxiter=200)


def nodal_von_mises(mesh: MeshModel) -> np.ndarray:
    return von_mises(mesh.stress)


@dataclass
class GradientDiagnostics:
    floored_points: int = 0


def _normalized_gradient(mesh, quad, nodal, mode, floor, diag):
    if mode not in ("normal", "magnitude"):
        raise ValueError(f"chi_mode must be 'normal' or 'magnitude', got {mode!r}")
    out = np.zeros(len(quad))
    for i in range(len(quad)):
        e, loc = quad.elem[i], quad.local[i]
        value = interpolate(mesh, e, loc, nodal)
        if value <= floor:
            diag.floored_points += 1
            continue
        g = gradient(mesh, e, loc, nodal)
        if mode == "normal":
            out[i] = max(-(g @ quad.normal[i]) / value, 0.0)
        else:
            out[i] = float(np.linalg.norm(g)) / value
    return out


def chi_field(mesh: MeshModel, quad: SurfaceQuadrature, sigma_e_nodal=None, *,
              mode: str = "normal", floor: float = SIGMA_FLOOR,
              diagnostics: GradientDiagnostics | None = None) -> np.ndarray:
    """Normalized von Mises stress gradient at every surface point (1/mm).

    In ``normal`` mode this is the decay rate into the depth,
    ``-(grad sigma_e . n_inward) / sigma_e``, clamped at zero.
    Points with ``sigma_e <= floor`` get 0 and are counted in ``diagnostics``.
    """
    if sigma_e_nodal is None:
        sigma_e_nodal = nodal_von_mises(mesh)
    diag = diagnostics if diagnostics is not None else GradientDiagnostics()
    return _normalized_gradient(mesh, quad, sigma_e_nodal, mode, floor, diag)


def chi_T_field(mesh: MeshModel, quad: SurfaceQuadrature, temperature=None, *,
                mode: str = "normal", floor: float = SIGMA_FLOOR,
                diagnostics: GradientDiagnostics | None = None) -> np.ndarray:
    """Normalized temperature gradient; exported for diagnostics only."""
    if temperature is None:
        temperature = mesh.temperature
    diag = diagnostics if diagnostics is not None else GradientDiagnostics()
    return _normalized_gradient(mesh, quad, temperature, mode, floor, diag)


def surface_values(mesh: MeshModel, quad: SurfaceQuadrature, nodal) -> np.ndarray:
    """Interpolate a nodal field to every surface integration point."""
    return np.array([interpolate(mesh, quad.elem[i], quad.local[i], nodal) for i in range(len(quad))])
