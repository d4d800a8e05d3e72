"""Component-level Weibull life from a surface life field.

Every surface integration point q carries a deterministic life N_q and a
quadrature weight w_q (mm^2). The component scale parameter is

    eta = (sum_q w_q * N_q**-m) ** (-1/m)

and F(n) = 1 - exp(-(n/eta)**m). Sums run in (face, point) order through
``math.fsum`` so results do not depend on how the field was assembled.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from . import field_ops
from .mesh_io import MeshModel, SurfaceQuadrature
from .strain_life import CAPPED, N_CAP, MaterialParams, solve_cmb, solve_cmb_array

REPORT_QUANTILES = (0.01, 0.05, 0.5, 0.95, 0.99)


@dataclass(frozen=True)
class LifeField:
    """Per-integration-point life data (all arrays share the point order)."""

    N_det: np.ndarray
    weight: np.ndarray
    eps_a: np.ndarray
    temperature: np.ndarray
    chi: np.ndarray
    capped: np.ndarray
    chi_T: np.ndarray | None = None
    position: np.ndarray | None = None
    elem: np.ndarray | None = None
    face: np.ndarray | None = None
    qpoint: np.ndarray | None = None
    notch_support: bool = False

    def __len__(self) -> int:
        return len(self.N_det)

    def hazard_density(self, m: float) -> np.ndarray:
        return self.N_det ** (-m)

    def subset(self, mask) -> "LifeField":
        mask = np.asarray(mask)

        def pick(a):
            return None if a is None else a[mask]

        return LifeField(self.N_det[mask], self.weight[mask], self.eps_a[mask], self.temperature[mask],
                         self.chi[mask], self.capped[mask], pick(self.chi_T), pick(self.position),
                         pick(self.elem), pick(self.face), pick(self.qpoint), self.notch_support)

    def scaled_weights(self, s: float) -> "LifeField":
        return LifeField(self.N_det, self.weight * s, self.eps_a, self.temperature, self.chi, self.capped,
                         self.chi_T, self.position, self.elem, self.face, self.qpoint, self.notch_support)

    @classmethod
    def from_arrays(cls, N_det, weight, **kw) -> "LifeField":
        N_det = np.asarray(N_det, dtype=float)
        n = len(N_det)
        defaults = dict(eps_a=np.full(n, np.nan), temperature=np.full(n, np.nan), chi=np.zeros(n),
                        capped=np.zeros(n, dtype=bool))
        defaults.update(kw)
        return cls(N_det, np.asarray(weight, dtype=float), **defaults)


@dataclass(frozen=True)
class WeibullLife:
    m: float
    eta: float
    notch_support: bool = False
    subset: str = "all"

    def __post_init__(self):
        if not (self.m > 0 and self.eta > 0):
            raise ValueError(f"Weibull parameters must be positive, got m={self.m}, eta={self.eta}")

    def cdf(self, n):
        return weibull_cdf(n, self)

    def quantile(self, p):
        return quantile(p, self)

    @property
    def median(self) -> float:
        return self.eta * math.log(2.0) ** (1.0 / self.m)


def hazard_sum(life: LifeField, m: float) -> float:
    """Surface integral of the hazard density, sum_q w_q N_q^-m."""
    if len(life) == 0:
        raise ValueError("empty surface: no integration points")
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        terms = life.weight * life.N_det ** (-m)
    bad = np.flatnonzero(~np.isfinite(terms))
    if bad.size:
        i = int(bad[0])
        raise ArithmeticError(f"non-finite hazard term at point {i}: N_det={life.N_det[i]}, w={life.weight[i]}")
    return math.fsum(terms.tolist())


def scaled_eta(N, weight, m: float) -> float:
    """(sum w N^-m)^(-1/m) with the shortest life factored out.

    Equal to the direct formula but free of underflow for large m.
    """
    N = np.asarray(N, dtype=float)
    ref = float(N.min())
    total = math.fsum((np.asarray(weight, dtype=float) * (N / ref) ** (-m)).tolist())
    return ref * total ** (-1.0 / m)


def eta_surface(life: LifeField, m: float) -> float:
    total = hazard_sum(life, m)  # validates every term
    if total > 0 and math.isfinite(total ** (-1.0 / m)):
        return total ** (-1.0 / m)
    return scaled_eta(life.N_det, life.weight, m)


def weibull_cdf(n, life: WeibullLife):
    return -np.expm1(-cumulative_hazard(n, life))


def cumulative_hazard(n, life: WeibullLife):
    n = np.asarray(n, dtype=float)
    if np.any(n < 0):
        raise ValueError("cycle count must be non-negative")
    return (n / life.eta) ** life.m


def hazard_rate(n, life: WeibullLife):
    n = np.asarray(n, dtype=float)
    return life.m / life.eta * (n / life.eta) ** (life.m - 1.0)


def quantile(p, life: WeibullLife):
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0) | (p >= 1)):
        raise ValueError("probability must lie strictly between 0 and 1")
    out = life.eta * (-np.log1p(-p)) ** (1.0 / life.m)
    return float(out) if out.ndim == 0 else out


def distribution(life: LifeField, m: float, subset: str = "all") -> WeibullLife:
    return WeibullLife(m, eta_surface(life, m), life.notch_support, subset)


def subset_distribution(life: LifeField, selection, m: float, name: str = "subset") -> WeibullLife:
    """Weibull life from a selection (boolean mask or index array) of points."""
    sel = np.asarray(selection)
    if sel.dtype == bool:
        if sel.shape != (len(life),):
            raise ValueError("boolean selection must match the number of points")
        idx = np.flatnonzero(sel)
    else:
        idx = np.unique(sel.astype(np.int64))
    if idx.size == 0:
        raise ValueError("empty point selection")
    return distribution(life.subset(idx), m, subset=name)


def specimen_life(eps_a: float, material: MaterialParams, T: float, n_cap: float = N_CAP) -> float:
    sol = solve_cmb(eps_a, material, T, n_cap=n_cap)
    if sol.status != 0:
        raise ValueError(f"specimen life at eps_a={eps_a} is not a regular solution (status {int(sol.status)})")
    return float(sol.N)


def size_effect_factor(component: WeibullLife, specimen_N: float) -> float:
    """Component median life over the deterministic smooth-specimen life."""
    if not specimen_N > 0 or not math.isfinite(specimen_N):
        raise ValueError(f"invalid specimen life {specimen_N}")
    return component.median / specimen_N


def specimen_reference(life: LifeField, material: MaterialParams, n_cap: float = N_CAP) -> float:
    """Smooth-specimen life at the field's maximum strain and its temperature."""
    i = int(np.argmax(life.eps_a))
    return specimen_life(float(life.eps_a[i]), material, float(life.temperature[i]), n_cap)


# --------------------------------------------------------------------------
# pipeline


@dataclass
class FieldOptions:
    notch_support: bool = True
    chi_mode: str = "normal"
    n_cap: float = N_CAP
    sigma_floor: float = field_ops.SIGMA_FLOOR


@dataclass
class SurfaceFields:
    """Mesh-derived point data that does not depend on notch support."""

    temperature: np.ndarray
    sigma_e: np.ndarray
    eps_a: np.ndarray
    chi: np.ndarray
    chi_T: np.ndarray
    floored_points: int = 0


def surface_fields(mesh: MeshModel, quad: SurfaceQuadrature, material: MaterialParams,
                   chi_mode: str = "normal", sigma_floor: float = field_ops.SIGMA_FLOOR) -> SurfaceFields:
    vm_nodal = field_ops.nodal_von_mises(mesh)
    T = field_ops.surface_values(mesh, quad, mesh.temperature)
    sigma_e = np.maximum(field_ops.surface_values(mesh, quad, vm_nodal), 0.0)
    diag = field_ops.GradientDiagnostics()
    chi = field_ops.chi_field(mesh, quad, vm_nodal, mode=chi_mode, floor=sigma_floor, diagnostics=diag)
    chi_T = field_ops.chi_T_field(mesh, quad, mode=chi_mode, floor=sigma_floor)
    eps = np.array([
        field_ops.strain_amplitude(s, material.at(t).E, material.plasticity_at(t)) for s, t in zip(sigma_e, T)
    ])
    return SurfaceFields(T, sigma_e, eps, chi, chi_T, diag.floored_points)


def life_field(quad: SurfaceQuadrature, fields: SurfaceFields, material: MaterialParams,
               notch_support: bool = True, n_cap: float = N_CAP) -> LifeField:
    """Solve the (optionally notch-supported) strain-life curve at every point.

    Points with zero strain get the life cap.
    """
    curves = [material.at(t) for t in fields.temperature]
    cols = {k: np.array([getattr(cp, k) for cp in curves]) for k in ("sigma_f", "b", "eps_f", "c", "E")}
    eff = fields.eps_a.copy()
    if notch_support:
        eff = eff / (1.0 + material.A * fields.chi**material.k)
    N = np.full(len(eff), n_cap)
    status = np.full(len(eff), CAPPED, dtype=np.int8)
    live = eff > 0
    if live.any():
        sol = solve_cmb_array(eff[live], cols["sigma_f"][live], cols["b"][live], cols["eps_f"][live],
                              cols["c"][live], cols["E"][live], n_cap=n_cap)
        N[live], status[live] = sol.N, sol.status
    return LifeField(
        N_det=N, weight=quad.weight, eps_a=fields.eps_a, temperature=fields.temperature, chi=fields.chi,
        capped=status == CAPPED, chi_T=fields.chi_T, position=quad.position, elem=quad.elem,
        face=quad.face, qpoint=quad.qpoint, notch_support=notch_support,
    )


def distribution_report(life: LifeField, m: float, specimen_N: float | None) -> dict:
    dist = distribution(life, m)
    out = {
        "m": dist.m,
        "eta": dist.eta,
        "median": dist.median,
        "quantiles": {f"{round(100 * p):d}": quantile(p, dist) for p in REPORT_QUANTILES},
        "size_effect_factor": None if specimen_N is None else size_effect_factor(dist, specimen_N),
        "size_effect_kind": "combined" if life.notch_support else "plain",
        "notch_support": life.notch_support,
        "capped_points": int(np.count_nonzero(life.capped)),
        "points": len(life),
        "area": math.fsum(life.weight.tolist()),
    }
    return out


HAZARD_COLUMNS = ("x", "y", "z", "elem", "face", "q", "eps_a", "T", "chi", "N_det", "capped",
                  "hazard_density", "weight")


def hazard_csv(life: LifeField, m: float) -> str:
    """Per-integration-point export of the hazard density field."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HAZARD_COLUMNS)
    d = life.hazard_density(m)
    for i in range(len(life)):
        x, y, z = life.position[i]
        w.writerow([repr(float(x)), repr(float(y)), repr(float(z)), int(life.elem[i]), int(life.face[i]),
                    int(life.qpoint[i]), repr(float(life.eps_a[i])), repr(float(life.temperature[i])),
                    repr(float(life.chi[i])), repr(float(life.N_det[i])), int(life.capped[i]),
                    repr(float(d[i])), repr(float(life.weight[i]))])
    return buf.getvalue()
