"""Maximum-likelihood calibration on specimen LCF data and parametric bootstrap.

A record's life is Weibull with shape m and scale eta_r given by the
specimen surface integral of N_det**-m over its profile table, so smooth
and notched specimens enter one likelihood. Fits run Nelder-Mead in the
coordinates (ln sigma_f, b, ln eps_f, c, ln A, ln k, ln m).
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .field_ops import PlasticityRule, nominal_stress, strain_amplitude
from .reliability import scaled_eta
from .strain_life import N_CAP, MaterialParams, solve_cmb_notched

log = logging.getLogger(__name__)

THETA_NAMES = ("sigma_f", "b", "eps_f", "c", "A", "k", "m")
_LOG_COORDS = (0, 2, 4, 5, 6)


class CalibrationError(RuntimeError):
    def __init__(self, msg, result=None):
        super().__init__(msg)
        self.result = result


class IdentifiabilityWarning(UserWarning):
    pass


# --------------------------------------------------------------------------
# data


@dataclass(frozen=True)
class SpecimenProfile:
    """Surface-integral table of one specimen geometry.

    Rows are (dA mm^2, kappa, chi 1/mm): local strain is kappa times the
    nominal strain amplitude. A uniform gauge section is the single row
    (area, 1, 0).
    """

    id: str
    kind: str
    rows: tuple

    def __post_init__(self):
        if self.kind not in ("uniform", "tabulated"):
            raise ValueError(f"profile {self.id!r}: unknown kind {self.kind!r}")
        if not self.rows:
            raise ValueError(f"profile {self.id!r} has no rows")
        for dA, kappa, chi in self.rows:
            if not (dA > 0 and kappa > 0 and chi >= 0):
                raise ValueError(f"profile {self.id!r}: invalid row {(dA, kappa, chi)}")

    @classmethod
    def uniform(cls, id: str, area: float) -> "SpecimenProfile":
        return cls(id, "uniform", ((float(area), 1.0, 0.0),))

    @classmethod
    def tabulated(cls, id: str, rows) -> "SpecimenProfile":
        return cls(id, "tabulated", tuple(tuple(float(v) for v in r) for r in rows))

    @property
    def table(self) -> np.ndarray:
        return np.array(self.rows, dtype=float)

    @property
    def area(self) -> float:
        return math.fsum(r[0] for r in self.rows)

    @property
    def has_gradient(self) -> bool:
        return any(r[2] > 0 for r in self.rows)

    def to_dict(self) -> dict:
        if self.kind == "uniform":
            return {"id": self.id, "kind": "uniform", "area": self.rows[0][0]}
        return {"id": self.id, "kind": "tabulated", "rows": [list(r) for r in self.rows]}

    @classmethod
    def from_dict(cls, d: dict) -> "SpecimenProfile":
        kind = d.get("kind", "tabulated" if "rows" in d else "uniform")
        if kind == "uniform":
            return cls.uniform(str(d["id"]), float(d["area"]))
        return cls.tabulated(str(d["id"]), d["rows"])


@dataclass(frozen=True)
class FatigueDataset:
    profile_id: tuple
    eps_a: np.ndarray
    temperature: np.ndarray
    n_obs: np.ndarray
    censored: np.ndarray

    def __post_init__(self):
        if not (len(self.profile_id) == len(self.eps_a) == len(self.temperature) == len(self.n_obs)
                == len(self.censored)):
            raise ValueError("dataset columns differ in length")
        if np.any(~(self.n_obs > 0)):
            raise ValueError("observed lives must be positive")
        if np.any(~(self.eps_a > 0)):
            raise ValueError("strain amplitudes must be positive")

    def __len__(self) -> int:
        return len(self.n_obs)

    @classmethod
    def from_records(cls, records) -> "FatigueDataset":
        records = list(records)
        return cls(
            tuple(str(r[0]) for r in records),
            np.array([r[1] for r in records], float),
            np.array([r[2] for r in records], float),
            np.array([r[3] for r in records], float),
            np.array([bool(r[4]) for r in records]),
        )

    def with_lives(self, n_obs, censored=None) -> "FatigueDataset":
        return FatigueDataset(self.profile_id, self.eps_a, self.temperature, np.asarray(n_obs, float),
                              self.censored if censored is None else np.asarray(censored, bool))

    def check_profiles(self, profiles: dict) -> None:
        missing = sorted(set(self.profile_id) - set(profiles))
        if missing:
            raise KeyError(f"dataset references unknown profile id(s): {', '.join(missing)}")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["profile_id", "eps_a", "temp_C", "n_obs", "censored"])
        for p, e, t, n, c in zip(self.profile_id, self.eps_a, self.temperature, self.n_obs, self.censored):
            w.writerow([p, repr(float(e)), repr(float(t)), repr(float(n)), int(c)])
        return buf.getvalue()


def read_dataset(path) -> FatigueDataset:
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["profile_id", "eps_a", "temp_C", "n_obs", "censored"]
        if reader.fieldnames != expected:
            raise ValueError(f"{path}: header must be {','.join(expected)}, got {reader.fieldnames}")
        for line, row in enumerate(reader, start=2):
            try:
                cens = int(row["censored"])
                if cens not in (0, 1):
                    raise ValueError("censored must be 0 or 1")
                records.append((row["profile_id"], float(row["eps_a"]), float(row["temp_C"]),
                                float(row["n_obs"]), cens))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{line}: {exc}") from exc
    if not records:
        raise ValueError(f"{path}: no records")
    return FatigueDataset.from_records(records)


def read_profiles(path) -> dict[str, SpecimenProfile]:
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = data.get("profiles", [data])
    out = {}
    for d in data:
        p = SpecimenProfile.from_dict(d)
        if p.id in out:
            raise ValueError(f"duplicate profile id {p.id!r}")
        out[p.id] = p
    return out


def profiles_to_json(profiles: dict) -> str:
    return json.dumps([p.to_dict() for p in profiles.values()], indent=2)


# --------------------------------------------------------------------------
# specimen life


def local_strain(eps_nominal, kappa, E: float, plasticity: PlasticityRule | None = None):
    """Local strain amplitude for a nominal amplitude and concentration kappa.

    Without plasticity the strain scales linearly. With the Neuber rule the
    local state satisfies sigma * eps = kappa**2 * S * e, where (S, e) is the
    nominal point on the cyclic curve; kappa = 1 returns the nominal strain.
    """
    eps_nominal = np.asarray(eps_nominal, float)
    kappa = np.asarray(kappa, float)
    if plasticity is None or plasticity.rule == "elastic":
        return kappa * eps_nominal
    en, ka = np.broadcast_arrays(eps_nominal, kappa)
    out = np.empty(en.shape)
    for i, (e, k) in enumerate(zip(en.ravel(), ka.ravel())):
        s_nom = nominal_stress(float(e), E, plasticity)
        # elastic-equivalent stress whose Neuber product matches kappa^2 S e
        out.flat[i] = strain_amplitude(k * math.sqrt(E * s_nom * float(e)), E, plasticity)
    return out


def specimen_eta(profile: SpecimenProfile, eps_a_nominal: float, T, material: MaterialParams,
                 plasticity: PlasticityRule | None = None, n_cap: float = N_CAP) -> float:
    """Weibull scale of one specimen at a nominal strain amplitude."""
    if not eps_a_nominal > 0:
        raise ValueError("nominal strain amplitude must be positive")
    tab = profile.table
    cp = material.at(T)
    eps = local_strain(eps_a_nominal, tab[:, 1], cp.E, plasticity)
    sol = solve_cmb_notched(eps, tab[:, 2], material, T, n_cap=n_cap)
    if np.all(sol.capped):
        warnings.warn(f"profile {profile.id!r}: every row capped at eps_a={eps_a_nominal}", stacklevel=2)
    return scaled_eta(sol.N, tab[:, 0], material.m)


def en_curve(material: MaterialParams, profile: SpecimenProfile, p: float, strains, T=None,
             plasticity: PlasticityRule | None = None, n_cap: float = N_CAP) -> np.ndarray:
    """Quantile-p life of a specimen over a grid of nominal strain amplitudes."""
    if not 0 < p < 1:
        raise ValueError("quantile must lie in (0, 1)")
    factor = (-math.log1p(-p)) ** (1.0 / material.m)
    return np.array([specimen_eta(profile, float(e), T, material, plasticity, n_cap) * factor for e in strains])


# --------------------------------------------------------------------------
# likelihood


class Likelihood:
    """Negative log-likelihood of a dataset over the seven-parameter vector.

    Local strains and profile rows are flattened once; each evaluation then
    solves the strain-life curve for every (record, row) pair.
    """

    def __init__(self, dataset: FatigueDataset, profiles: dict, material: MaterialParams,
                 plasticity: PlasticityRule | None = None, n_cap: float = N_CAP):
        dataset.check_profiles(profiles)
        temps = np.unique(dataset.temperature)
        if len(temps) != 1:
            raise ValueError(f"dataset mixes test temperatures {temps.tolist()}; fit one temperature at a time")
        self.T = float(temps[0])
        cp = material.at(self.T)
        self.E = cp.E
        if plasticity is None:
            plasticity = material.plasticity_at(self.T)
        self.plasticity = plasticity
        self.dataset = dataset
        self.profiles = profiles
        self.n_cap = n_cap
        eps, chi, dA, starts = [], [], [], [0]
        for pid, e in zip(dataset.profile_id, dataset.eps_a):
            tab = profiles[pid].table
            eps.append(local_strain(e, tab[:, 1], self.E, plasticity))
            chi.append(tab[:, 2])
            dA.append(tab[:, 0])
            starts.append(starts[-1] + len(tab))
        self.eps_loc = np.concatenate(eps)
        self.chi = np.concatenate(chi)
        self.ln_dA = np.log(np.concatenate(dA))
        self.starts = np.array(starts, dtype=np.int64)
        self.y_cap = math.log2(2.0 * n_cap)
        self.set_lives(dataset.n_obs, dataset.censored)

    def set_lives(self, n_obs, censored) -> None:
        self.ln_n = np.log(np.asarray(n_obs, float))
        self.censored = np.asarray(censored, dtype=np.bool_)

    @property
    def identifiable_notch(self) -> bool:
        return bool(np.any(self.chi > 0))

    def __call__(self, theta) -> float:
        sf, b, ef, c, A, k, m = (float(v) for v in theta)
        if not (b < 0 and c < 0 and sf >= 0 and ef >= 0 and A >= 0 and 0 < k <= 2 and m > 0):
            return math.inf
        if sf == 0 and ef == 0:
            return math.inf
        val = _kernels.neg_log_likelihood(sf, b, ef, c, A, k, m, self.E, self.eps_loc, self.chi, self.ln_dA,
                                          self.starts, self.ln_n, self.censored, self.y_cap)
        if not math.isfinite(val):
            log.debug("non-finite likelihood at theta=%s", theta)
            return math.inf
        return val

    def record_eta(self, theta) -> np.ndarray:
        sf, b, ef, c, A, k, m = (float(v) for v in theta)
        out = np.empty(len(self.starts) - 1)
        _kernels.log_hazard(sf, b, ef, c, A, k, m, self.E, self.eps_loc, self.chi, self.ln_dA, self.starts,
                            self.y_cap, out)
        return np.exp(-out / m)


def neg_log_likelihood(theta, dataset: FatigueDataset, profiles: dict, material: MaterialParams,
                       plasticity: PlasticityRule | None = None) -> float:
    return Likelihood(dataset, profiles, material, plasticity)(theta)


# --------------------------------------------------------------------------
# Nelder-Mead


@dataclass
class SimplexOptions:
    initial_scale: float = 0.05
    xatol: float = 1e-9   # simplex diameter, relative to the best vertex
    fatol: float = 1e-10  # spread of objective values
    max_iter: int = 5000


@dataclass
class SimplexResult:
    x: np.ndarray
    fun: float
    converged: bool
    iterations: int
    evaluations: int
    initial_values: np.ndarray = field(repr=False, default=None)


def nelder_mead(f, x0, options: SimplexOptions | None = None) -> SimplexResult:
    """Minimize ``f`` with the Nelder-Mead simplex method.

    Coefficients: reflection 1, expansion 2, contraction 0.5, shrink 0.5.
    The initial simplex offsets each coordinate by ``initial_scale`` of its
    value (0.00025 for zero coordinates).
    """
    opt = options or SimplexOptions()
    x0 = np.asarray(x0, dtype=float)
    n = len(x0)
    f0 = f(x0)
    if not math.isfinite(f0):
        raise ValueError(f"objective is not finite at the starting point ({f0})")
    simplex = np.empty((n + 1, n))
    simplex[0] = x0
    for i in range(n):
        v = x0.copy()
        v[i] = v[i] * (1.0 + opt.initial_scale) if v[i] != 0 else 0.00025
        simplex[i + 1] = v
    fvals = np.empty(n + 1)
    fvals[0] = f0
    for i in range(1, n + 1):
        fvals[i] = f(simplex[i])
    initial = fvals.copy()
    nfev = n + 1
    it = 0
    converged = False
    while it < opt.max_iter:
        order = np.argsort(fvals, kind="stable")
        simplex, fvals = simplex[order], fvals[order]
        diam = np.max(np.abs(simplex[1:] - simplex[0]))
        if (diam <= opt.xatol * max(1.0, np.max(np.abs(simplex[0])))
                and fvals[-1] - fvals[0] <= opt.fatol):
            converged = True
            break
        it += 1
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + (centroid - worst)
        fr = f(xr)
        nfev += 1
        if fr < fvals[0]:
            xe = centroid + 2.0 * (centroid - worst)
            fe = f(xe)
            nfev += 1
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-1]:
            xc = centroid + 0.5 * (xr - centroid)
            fc = f(xc)
            nfev += 1
            if fc <= fr:
                simplex[-1], fvals[-1] = xc, fc
                continue
        else:
            xc = centroid + 0.5 * (worst - centroid)
            fc = f(xc)
            nfev += 1
            if fc < fvals[-1]:
                simplex[-1], fvals[-1] = xc, fc
                continue
        for i in range(1, n + 1):
            simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0])
            fvals[i] = f(simplex[i])
        nfev += n
    order = np.argsort(fvals, kind="stable")
    return SimplexResult(simplex[order[0]].copy(), float(fvals[order[0]]), converged, it, nfev, initial)


# --------------------------------------------------------------------------
# fitting


def to_internal(theta, free) -> np.ndarray:
    z = []
    for i in free:
        v = float(theta[i])
        z.append(math.log(v) if i in _LOG_COORDS else v)
    return np.array(z)


def from_internal(z, theta_fixed, free) -> np.ndarray:
    theta = np.array(theta_fixed, dtype=float)
    for zi, i in zip(z, free):
        theta[i] = math.exp(zi) if i in _LOG_COORDS else zi
    return theta


@dataclass
class FitResult:
    theta: np.ndarray
    converged: bool
    nll: float
    iterations: int
    evaluations: int
    free: tuple
    starts: int = 1
    warnings: list = field(default_factory=list)
    bands: "BootstrapBands | None" = None

    @property
    def params(self) -> dict:
        return dict(zip(THETA_NAMES, map(float, self.theta)))

    def material(self, base: MaterialParams) -> MaterialParams:
        return base.with_theta(self.theta)


def _check_theta0(theta0):
    sf, b, ef, c, A, k, m = theta0
    if not (sf > 0 and ef > 0 and b < 0 and c < 0 and A > 0 and 0 < k <= 2 and m > 0):
        raise ValueError("theta0 must satisfy sigma_f, eps_f, A, m > 0, b, c < 0, 0 < k <= 2")


def fit(dataset: FatigueDataset, profiles: dict, theta0, material: MaterialParams, *,
        starts: int = 5, seed: int = 0, jitter: float = 0.1, options: SimplexOptions | None = None,
        plasticity: PlasticityRule | None = None, likelihood: Likelihood | None = None) -> FitResult:
    """Maximum-likelihood estimate of (sigma_f, b, eps_f, c, A, k, m).

    ``material`` supplies E (and the cyclic curve for Neuber); its own theta
    entries are ignored. The first start is ``theta0`` itself, the others
    are jittered copies in the transformed coordinates.
    """
    theta0 = np.asarray(theta0, dtype=float)
    _check_theta0(theta0)
    if not np.any(~dataset.censored):
        raise ValueError("need at least one uncensored record")
    lik = likelihood or Likelihood(dataset, profiles, material, plasticity)
    notes = []
    free = tuple(range(7))
    if not lik.identifiable_notch:
        free = (0, 1, 2, 3, 6)
        msg = "no profile with chi > 0: notch support parameters A, k are not identifiable and stay fixed"
        warnings.warn(msg, IdentifiabilityWarning, stacklevel=2)
        notes.append(msg)

    def objective(z):
        return lik(from_internal(z, theta0, free))

    z0 = to_internal(theta0, free)
    rng = np.random.default_rng(seed)
    best = None
    n_conv = 0
    for s in range(starts):
        z = z0 if s == 0 else z0 + jitter * rng.standard_normal(len(z0)) * np.maximum(np.abs(z0), 0.1)
        if not math.isfinite(objective(z)):
            z = z0
        res = nelder_mead(objective, z, options)
        n_conv += res.converged
        if best is None or res.fun < best.fun:
            best = res
    theta = from_internal(best.x, theta0, free)
    result = FitResult(theta, best.converged, best.fun, best.iterations, best.evaluations, free, starts, notes)
    if n_conv == 0:
        raise CalibrationError("no Nelder-Mead start converged", result)
    return result


# --------------------------------------------------------------------------
# bootstrap


@dataclass
class BootstrapBands:
    grids: dict            # profile id -> strain grid
    median: dict           # profile id -> median-life curve of the fitted model
    lower: dict
    upper: dict
    center: dict           # percentile-50 of the bootstrap curves
    curves: dict           # profile id -> (n_export, grid) exported replicate curves
    theta: np.ndarray      # (n_ok, 7) refitted parameters
    ci_level: float
    replicates: int
    failures: int
    seed: int
    warnings: list = field(default_factory=list)

    def parameter_percentiles(self) -> dict:
        lo, hi = 50.0 * (1 - self.ci_level), 50.0 * (1 + self.ci_level)
        return {name: {"lower": float(np.percentile(self.theta[:, i], lo)),
                       "median": float(np.percentile(self.theta[:, i], 50.0)),
                       "upper": float(np.percentile(self.theta[:, i], hi))}
                for i, name in enumerate(THETA_NAMES)}

    def band_csv(self, pid: str) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eps_a", "median_fit", "lower", "center", "upper"])
        for row in zip(self.grids[pid], self.median[pid], self.lower[pid], self.center[pid], self.upper[pid]):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    def curves_csv(self, pid: str) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["replicate"] + [repr(float(e)) for e in self.grids[pid]])
        for i, row in enumerate(self.curves[pid]):
            w.writerow([i] + [repr(float(v)) for v in row])
        return buf.getvalue()


def default_grids(dataset: FatigueDataset, n: int = 25) -> dict:
    grids = {}
    for pid in sorted(set(dataset.profile_id)):
        e = dataset.eps_a[np.array([p == pid for p in dataset.profile_id])]
        grids[pid] = np.geomspace(e.min(), e.max(), n)
    return grids


class CurveEvaluator:
    """Quantile curves of several profiles on fixed strain grids.

    Same quantity as :func:`en_curve`, evaluated through the compiled
    likelihood kernel so bootstrap replicates stay cheap.
    """

    def __init__(self, profiles: dict, grids: dict, material: MaterialParams, T,
                 plasticity: PlasticityRule | None = None, n_cap: float = N_CAP):
        self.E = material.at(T).E
        self.order = list(grids)
        self.sizes = [len(grids[pid]) for pid in self.order]
        eps, chi, dA, starts = [], [], [], [0]
        for pid in self.order:
            tab = profiles[pid].table
            for e in grids[pid]:
                eps.append(local_strain(e, tab[:, 1], self.E, plasticity))
                chi.append(tab[:, 2])
                dA.append(tab[:, 0])
                starts.append(starts[-1] + len(tab))
        self.eps_loc = np.concatenate(eps)
        self.chi = np.concatenate(chi)
        self.ln_dA = np.log(np.concatenate(dA))
        self.starts = np.array(starts, dtype=np.int64)
        self.y_cap = math.log2(2.0 * n_cap)

    def __call__(self, theta, p: float = 0.5) -> dict:
        sf, b, ef, c, A, k, m = (float(v) for v in theta)
        lnH = np.empty(len(self.starts) - 1)
        _kernels.log_hazard(sf, b, ef, c, A, k, m, self.E, self.eps_loc, self.chi, self.ln_dA, self.starts,
                            self.y_cap, lnH)
        n = np.exp(-lnH / m) * (-math.log1p(-p)) ** (1.0 / m)
        out, i = {}, 0
        for pid, size in zip(self.order, self.sizes):
            out[pid] = n[i:i + size]
            i += size
        return out


def median_curves(theta, material: MaterialParams, profiles: dict, grids: dict, T,
                  plasticity: PlasticityRule | None = None) -> dict:
    return CurveEvaluator(profiles, grids, material, T, plasticity)(theta)


def simulate_lives(rng, eta, m, censor_at=None):
    """Weibull lives; with ``censor_at`` (nan = uncensored) runouts are clipped."""
    n = eta * rng.weibull(m, size=len(eta))
    cens = np.zeros(len(eta), dtype=bool)
    if censor_at is not None:
        limit = np.asarray(censor_at, float)
        hit = np.isfinite(limit) & (n >= limit)
        n = np.where(hit, limit, n)
        cens = hit
    return n, cens


def _replicate(args):
    r, seed, lik, theta_hat, options, eta, censor_at, material, curves = args
    rng = np.random.default_rng([seed, r])
    n_star, c_star = simulate_lives(rng, eta, theta_hat[6], censor_at)
    lik.set_lives(n_star, c_star)
    if not np.any(~c_star):
        return r, None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IdentifiabilityWarning)
        try:
            res = fit(lik.dataset, lik.profiles, theta_hat, material, starts=1, options=options,
                      likelihood=lik)
        except (CalibrationError, ValueError, ArithmeticError):
            return r, None
    return r, (res.theta, curves(res.theta))


def bootstrap(dataset: FatigueDataset, profiles: dict, fit_result: FitResult, material: MaterialParams, *,
              B: int = 2000, ci_level: float = 0.925, seed: int = 0, grids: dict | None = None,
              export: int = 200, options: SimplexOptions | None = None,
              plasticity: PlasticityRule | None = None, n_jobs: int = 1) -> BootstrapBands:
    """Parametric bootstrap of the median E-N curve of every profile.

    Replicate r draws new lives from the fitted model with its own stream
    ``default_rng([seed, r])`` (runout records stay censored at their
    runout count), refits from the estimate and evaluates the median
    curves. Bands are per-grid-point percentile intervals at ``ci_level``.
    """
    if B < 100:
        raise ValueError("bootstrap needs B >= 100")
    if not 0 <= ci_level < 1:
        raise ValueError("ci_level must lie in [0, 1)")
    theta_hat = np.asarray(fit_result.theta, float)
    lik = Likelihood(dataset, profiles, material, plasticity)
    eta = lik.record_eta(theta_hat)
    censor_at = np.where(dataset.censored, dataset.n_obs, np.nan)
    grids = grids or default_grids(dataset)
    evaluator = CurveEvaluator(profiles, grids, material, lik.T, lik.plasticity)
    jobs = [(r, seed, lik, theta_hat, options, eta, censor_at, material, evaluator) for r in range(B)]
    if n_jobs > 1:
        with ProcessPoolExecutor(n_jobs) as ex:
            results = list(ex.map(_replicate, jobs, chunksize=max(1, B // (4 * n_jobs))))
    else:
        results = [_replicate(j) for j in jobs]
    results.sort(key=lambda t: t[0])
    ok = [res for _, res in results if res is not None]
    failures = B - len(ok)
    notes = []
    if failures > 0.1 * B:
        msg = f"{failures} of {B} bootstrap refits failed"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        notes.append(msg)
    if not ok:
        raise CalibrationError("every bootstrap replicate failed")
    lo_q, hi_q = 50.0 * (1 - ci_level), 50.0 * (1 + ci_level)
    fitted = evaluator(theta_hat)
    lower, upper, center, curves = {}, {}, {}, {}
    for pid in grids:
        stack = np.array([c[pid] for _, c in ok])
        lower[pid] = np.percentile(stack, lo_q, axis=0)
        upper[pid] = np.percentile(stack, hi_q, axis=0)
        center[pid] = np.percentile(stack, 50.0, axis=0)
        curves[pid] = stack[:export]
    return BootstrapBands(grids, fitted, lower, upper, center, curves, np.array([t for t, _ in ok]),
                          ci_level, B, failures, seed, notes)


# --------------------------------------------------------------------------
# synthetic data


def synthetic_dataset(material: MaterialParams, profiles: dict, design, seed: int, T: float = 850.0,
                      censor_at: float | None = None) -> FatigueDataset:
    """Draw one life per (profile id, nominal strain) from the model itself."""
    rng = np.random.default_rng(seed)
    pids = [p for p, _ in design]
    eps = np.array([e for _, e in design], float)
    eta = np.array([specimen_eta(profiles[p], e, T, material) for p, e in design])
    limit = None if censor_at is None else np.full(len(eta), censor_at)
    n, cens = simulate_lives(rng, eta, material.m, limit)
    return FatigueDataset(tuple(pids), eps, np.full(len(eps), T), n, cens)
