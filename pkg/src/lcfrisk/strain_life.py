"""Coffin-Manson-Basquin strain-life curves with gradient notch support.

The strain-life relation is

    eps_a = sigma_f / E * (2N)**b + eps_f * (2N)**c

and the notch-supported variant divides the local strain amplitude by
``n_chi = 1 + A * chi**k`` before inverting the curve.
"""
from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .field_ops import PlasticityRule

log = logging.getLogger(__name__)

N_CAP = 1e12
LOG2_LO = -20.0  # lower bracket end for log2(2N)

CURVE_KEYS = ("sigma_f", "b", "eps_f", "c", "E", "K_prime", "n_prime")

# solver status flags
OK, CAPPED, BELOW_RANGE = 0, 1, 2


@dataclass(frozen=True)
class CurveParams:
    """Strain-life constants at a single temperature."""

    sigma_f: float
    b: float
    eps_f: float
    c: float
    E: float
    K_prime: float | None = None
    n_prime: float | None = None


@dataclass(frozen=True)
class MaterialParams:
    """The fitted parameter set plus cyclic modulus.

    Curve constants may be tabulated over temperature (``temperatures`` not
    None, each curve field a tuple of equal length); ``A``, ``k`` and ``m``
    are global. ``A`` carries units mm**k since chi is in 1/mm.
    """

    sigma_f: float | tuple
    b: float | tuple
    eps_f: float | tuple
    c: float | tuple
    E: float | tuple
    A: float = 0.0
    k: float = 1.0
    m: float = 1.0
    K_prime: float | tuple | None = None
    n_prime: float | tuple | None = None
    temperatures: tuple | None = None
    plasticity_rule: str = "elastic"

    def __post_init__(self):
        if self.temperatures is not None:
            n = len(self.temperatures)
            if n == 0 or list(self.temperatures) != sorted(set(self.temperatures)):
                raise ValueError("temperature table must be non-empty and strictly increasing")
            for key in CURVE_KEYS:
                v = getattr(self, key)
                if v is not None and len(v) != n:
                    raise ValueError(f"table column {key!r} has {len(v)} entries, expected {n}")
        if self.A < 0:
            raise ValueError(f"A must be >= 0, got {self.A}")
        if not 0 < self.k <= 2:
            raise ValueError(f"k must lie in (0, 2], got {self.k}")
        if not self.m > 0:
            raise ValueError(f"m must be > 0, got {self.m}")
        for cp in self._all_curves():
            if not cp.E > 0:
                raise ValueError(f"E must be > 0, got {cp.E}")
            if cp.eps_f < 0 or cp.sigma_f < 0:
                raise ValueError("sigma_f and eps_f must be >= 0")
            if not (cp.b < 0 and cp.c < 0):
                raise ValueError(f"b and c must be negative, got b={cp.b}, c={cp.c}")
            if cp.c > cp.b:
                warnings.warn(f"ductility exponent c={cp.c} is shallower than strength exponent b={cp.b}",
                              stacklevel=3)

    def _all_curves(self):
        if self.temperatures is None:
            yield self.at(None)
        else:
            for T in self.temperatures:
                yield self.at(T)

    def plasticity_at(self, T) -> PlasticityRule:
        if self.plasticity_rule == "elastic":
            return PlasticityRule("elastic")
        cp = self.at(T)
        return PlasticityRule("neuber", cp.K_prime, cp.n_prime)

    def at(self, T) -> CurveParams:
        """Curve constants at temperature ``T`` (linear interpolation, clamped)."""
        if self.temperatures is None:
            return CurveParams(*(getattr(self, k) for k in CURVE_KEYS))
        temps = self.temperatures
        if T is None:
            raise ValueError("temperature required for a tabulated material")
        if T < temps[0] or T > temps[-1]:
            log.warning("temperature %.6g C outside material table [%g, %g]; clamping", T, temps[0], temps[-1])
            T = min(max(T, temps[0]), temps[-1])
        j = int(np.searchsorted(temps, T))
        if j < len(temps) and temps[j] == T:
            vals = [None if getattr(self, k) is None else getattr(self, k)[j] for k in CURVE_KEYS]
            return CurveParams(*vals)
        t0, t1 = temps[j - 1], temps[j]
        w = (T - t0) / (t1 - t0)
        vals = []
        for key in CURVE_KEYS:
            col = getattr(self, key)
            vals.append(None if col is None else col[j - 1] + w * (col[j] - col[j - 1]))
        return CurveParams(*vals)

    @property
    def theta(self) -> tuple:
        """(sigma_f, b, eps_f, c, A, k, m) for an untabulated material."""
        if self.temperatures is not None:
            raise ValueError("theta is only defined for a single-temperature material")
        return (self.sigma_f, self.b, self.eps_f, self.c, self.A, self.k, self.m)

    def with_theta(self, theta) -> "MaterialParams":
        sf, b, ef, c, A, k, m = (float(v) for v in theta)
        return replace(self, sigma_f=sf, b=b, eps_f=ef, c=c, A=A, k=k, m=m)


def _curve(params, T) -> CurveParams:
    return params if isinstance(params, CurveParams) else params.at(T)


def cmb_strain(N, params, T=None):
    """Strain amplitude on the CMB curve at ``N`` cycles."""
    cp = _curve(params, T)
    two_n = 2.0 * np.asarray(N, dtype=float)
    out = cp.sigma_f / cp.E * two_n**cp.b + cp.eps_f * two_n**cp.c
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LifeSolution:
    N: np.ndarray
    status: np.ndarray  # OK / CAPPED / BELOW_RANGE per entry

    @property
    def capped(self) -> np.ndarray:
        return self.status == CAPPED


def _log_strain(y, s, b, e, c):
    """ln of the CMB right-hand side at log2(2N) = y, and its y-derivative."""
    ln2 = math.log(2.0)
    with np.errstate(divide="ignore"):
        la = np.log(s) + b * ln2 * y
        lb = np.log(e) + c * ln2 * y
    hi = np.maximum(la, lb)
    ea, eb = np.exp(la - hi), np.exp(lb - hi)
    tot = ea + eb
    return hi + np.log(tot), ln2 * (b * ea + c * eb) / tot


def solve_cmb_array(eps_a, sigma_f, b, eps_f, c, E, n_cap: float = N_CAP, rtol: float = 1e-13) -> LifeSolution:
    """Vectorized inversion of the CMB curve.

    Works on ``y = log2(2N)`` and ``ln eps``, where the curve is a
    decreasing convex log-sum-exp. Newton steps from the lower bracket end
    approach the root monotonically from the left; any step leaving the
    current bracket falls back to bisection.
    """
    eps = np.asarray(eps_a, dtype=float)
    shape = eps.shape
    eps = eps.ravel()
    s = np.broadcast_to(np.asarray(sigma_f, float) / np.asarray(E, float), shape).ravel()
    bb = np.broadcast_to(np.asarray(b, float), shape).ravel()
    e = np.broadcast_to(np.asarray(eps_f, float), shape).ravel()
    cc = np.broadcast_to(np.asarray(c, float), shape).ravel()
    if np.any(~(eps > 0)):
        raise ValueError("strain amplitude must be positive")
    target = np.log(eps)
    y_hi_cap = math.log2(2.0 * n_cap)
    lo = np.full(eps.shape, LOG2_LO)
    hi = np.full(eps.shape, y_hi_cap)
    f_lo, _ = _log_strain(lo, s, bb, e, cc)
    f_hi, _ = _log_strain(hi, s, bb, e, cc)
    status = np.zeros(eps.shape, dtype=np.int8)
    status[target < f_hi] = CAPPED
    status[target > f_lo] = BELOW_RANGE
    y = lo.copy()
    active = status == OK
    tol = rtol / math.log(2.0)
    for _ in range(200):
        if not active.any():
            break
        ya = y[active]
        f, df = _log_strain(ya, s[active], bb[active], e[active], cc[active])
        g = f - target[active]
        la, ha = lo[active], hi[active]
        la = np.where(g > 0, ya, la)
        ha = np.where(g <= 0, ya, ha)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = -g / df
        y_new = ya + step
        bad = ~np.isfinite(y_new) | (y_new <= la) | (y_new >= ha)
        y_new = np.where(bad, 0.5 * (la + ha), y_new)
        done = (np.abs(y_new - ya) <= tol) | (ha - la <= tol)
        y[active] = y_new
        lo[active], hi[active] = la, ha
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    else:
        raise ArithmeticError("CMB inversion did not converge in 200 iterations")
    N = 0.5 * np.exp2(y)
    N[status == CAPPED] = n_cap
    N[status == BELOW_RANGE] = 0.5 * 2.0**LOG2_LO
    return LifeSolution(N.reshape(shape), status.reshape(shape))


def solve_cmb(eps_a, params, T=None, n_cap: float = N_CAP) -> LifeSolution:
    """Deterministic cycles to crack initiation for a strain amplitude.

    Strains below the curve at ``n_cap`` return ``n_cap`` flagged CAPPED;
    strains above the curve at the lower bracket end return that bound
    flagged BELOW_RANGE.
    """
    cp = _curve(params, T)
    return solve_cmb_array(eps_a, cp.sigma_f, cp.b, cp.eps_f, cp.c, cp.E, n_cap=n_cap)


def notch_factor(chi, params) -> np.ndarray | float:
    """Gradient support factor ``1 + A * chi**k``.

    This is the strain counterpart of the classical support number
    (observed over expected fatigue strength) expressed through the
    normalized stress gradient; it equals 1 for homogeneous fields.
    """
    A, k = (params.A, params.k) if not isinstance(params, tuple) else params
    chi = np.asarray(chi, dtype=float)
    if np.any(chi < 0):
        raise ValueError("chi must be non-negative")
    out = 1.0 + A * chi**k
    return float(out) if out.ndim == 0 else out


def solve_cmb_notched(eps_a, chi, params: MaterialParams, T=None, n_cap: float = N_CAP) -> LifeSolution:
    eff = np.asarray(eps_a, dtype=float) / notch_factor(chi, params)
    return solve_cmb(eff, params, T, n_cap=n_cap)


# --------------------------------------------------------------------------
# material file


def material_from_dict(d: dict) -> MaterialParams:
    d = dict(d)
    allowed = {"sigma_f", "b", "eps_f", "c", "E", "A", "k", "m", "temperatures", "plasticity"}
    unknown = set(d) - allowed
    if unknown:
        raise ValueError(f"unknown material keys: {sorted(unknown)}")
    for key in ("sigma_f", "b", "eps_f", "c", "E", "m"):
        if key not in d:
            raise ValueError(f"material is missing {key!r}")
    plast = d.pop("plasticity", None) or {"rule": "elastic"}
    rule = plast.get("rule", "elastic")
    K, n = plast.get("K_prime"), plast.get("n_prime")
    temps = d.pop("temperatures", None)
    kw = {}
    for key in ("sigma_f", "b", "eps_f", "c", "E"):
        v = d[key]
        kw[key] = tuple(float(x) for x in v) if temps is not None else float(v)
    if temps is not None:
        temps = tuple(float(t) for t in temps)
        if K is not None:
            K = tuple(float(x) for x in K) if isinstance(K, list) else (float(K),) * len(temps)
        if n is not None:
            n = tuple(float(x) for x in n) if isinstance(n, list) else (float(n),) * len(temps)
    mat = MaterialParams(**kw, A=float(d.get("A", 0.0)), k=float(d.get("k", 1.0)), m=float(d["m"]),
                         K_prime=K, n_prime=n, temperatures=temps, plasticity_rule=rule)
    if rule == "neuber":
        for cp in mat._all_curves():
            PlasticityRule("neuber", cp.K_prime, cp.n_prime)
    elif rule != "elastic":
        raise ValueError(f"unknown plasticity rule {rule!r}")
    return mat


def material_to_dict(mat: MaterialParams) -> dict:
    def col(v):
        return list(v) if isinstance(v, tuple) else v

    out = {key: col(getattr(mat, key)) for key in ("sigma_f", "b", "eps_f", "c", "E")}
    out.update(A=mat.A, k=mat.k, m=mat.m)
    if mat.temperatures is not None:
        out["temperatures"] = list(mat.temperatures)
    if mat.plasticity_rule != "elastic" or mat.K_prime is not None:
        out["plasticity"] = {"rule": mat.plasticity_rule, "K_prime": col(mat.K_prime), "n_prime": col(mat.n_prime)}
    return out


def load_material(path) -> MaterialParams:
    data = json.loads(Path(path).read_text())
    return material_from_dict(data)
