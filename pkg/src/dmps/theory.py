"""Closed-form predictions and fits for noisy-circuit entanglement scaling.

The model: a noisy chaotic circuit's output is approximately a global
depolarization of the ideal state with fidelity alpha = exp(-b0*p*n*t), and
the ideal state's von Neumann entropy grows ballistically as
b1*L1*min(b2*t, L2).  The operator entanglement entropy then rises with the
entanglement front and is cut down by a logistic (Fermi-Dirac-like) damping
factor centered at t = ln2/(2*b0*p); its peak value follows a volume law
2*b1*L1*L2 for systems shorter than the transition size
L_tran = ln2*b2/(2*b0*p) and an area law ln2*b1*b2*L1/(b0*p) beyond it.

Constants: b0 is the per-(gate-layer x qubit x rate) fidelity decay, b1 the
entropy areal density (bits per site), b2 the front speed (columns per
layer).  Defaults are supplied by callers, never hard-coded here.
"""

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import expit
from scipy.stats import t as student_t

__all__ = [
    "TheoryParams",
    "TheoryPrediction",
    "PowerLawFit",
    "RenyiFit",
    "predicted_fidelity",
    "predicted_operator_ee",
    "predicted_s_max_and_t_peak",
    "predicted_second_renyi",
    "fit_power_law",
    "fit_b0_from_renyi",
]

LN2 = float(np.log(2.0))


@dataclass(frozen=True)
class TheoryParams:
    """Model constants (b0, b1, b2), all positive."""

    b0: float
    b1: float
    b2: float

    def __post_init__(self):
        for name in ("b0", "b1", "b2"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")


@dataclass(frozen=True)
class TheoryPrediction:
    """Peak operator EE, its depth, and the scaling branch for one system."""

    s_max: float
    t_peak: float
    l_tran: float
    branch: str  # "volume-law" iff L2 <= l_tran else "area-law"


def predicted_fidelity(t: float, n: int, p: float, b0: float) -> float:
    """Circuit fidelity estimate alpha = exp(-b0 * p * n * t)."""
    if min(t, n, p, b0) < 0:
        raise ValueError("t, n, p, b0 must all be >= 0")
    return float(np.exp(-b0 * p * n * t))


def predicted_operator_ee(t, L1: int, L2: int, p: float, params: TheoryParams):
    """Operator EE estimate: logistic damping times ballistic growth.

        S(t) = 2*b1*L1*min(b2*t, L2) / (1 + exp(2*b0*p*n*t - n*ln2)),

    with n = L1*L2.  At p = 0 the damping factor is taken as exactly 1
    (pure growth law).  Accepts scalar or array ``t``.
    """
    if L1 > L2:
        raise ValueError(f"convention requires L1 <= L2, got {L1} > {L2}")
    t = np.asarray(t, dtype=float)
    n = L1 * L2
    growth = 2.0 * params.b1 * L1 * np.minimum(params.b2 * t, float(L2))
    if p == 0.0:
        out = growth
    else:
        # exponent written as 2*b0*p*n*t - n*ln2 so p -> 0 stays finite
        out = growth * expit(-(2.0 * params.b0 * p * n * t - n * LN2))
    return float(out) if out.ndim == 0 else out


def predicted_s_max_and_t_peak(L1: int, L2: int, p: float,
                               params: TheoryParams) -> TheoryPrediction:
    """Peak operator EE and peak depth in the step-function approximation.

    Volume-law branch (L2 <= l_tran): S_max = 2*b1*L1*L2 at t_peak = L2/b2.
    Area-law branch  (L2 >  l_tran): S_max = ln2*b1*b2*L1/(b0*p) at
    t_peak = ln2/(2*b0*p).  The branches agree exactly at L2 = l_tran.
    """
    if L1 > L2:
        raise ValueError(f"convention requires L1 <= L2, got {L1} > {L2}")
    if p <= 0.0:
        raise ValueError(f"noise rate must be > 0, got {p}")
    l_tran = LN2 * params.b2 / (2.0 * params.b0 * p)
    if L2 <= l_tran:
        return TheoryPrediction(
            s_max=2.0 * params.b1 * L1 * L2,
            t_peak=L2 / params.b2,
            l_tran=l_tran,
            branch="volume-law",
        )
    return TheoryPrediction(
        s_max=LN2 * params.b1 * params.b2 * L1 / (params.b0 * p),
        t_peak=LN2 / (2.0 * params.b0 * p),
        l_tran=l_tran,
        branch="area-law",
    )


def predicted_second_renyi(t, n: int, p: float, b0: float):
    """Mean second Renyi entropy of the damped-output model:

        S2(t) = -log2(exp(-2*b0*p*n*t) + (1 - exp(-2*b0*p*n*t)) / 2^n).

    Runs from 0 at t = 0 to n as t -> infinity.  Accepts scalar or array t.
    """
    t = np.asarray(t, dtype=float)
    a2 = np.exp(-2.0 * b0 * p * n * t)
    out = -np.log2(a2 + (1.0 - a2) * 2.0**-n) + 0.0  # + 0.0 normalizes -0.0
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PowerLawFit:
    """Least-squares fit of s = c * p^a on log-log coordinates."""

    c: float
    a: float
    ci95_a: tuple
    residual_rms: float
    r_squared: float
    n_points: int
    input_digest: str

    def to_json_dict(self) -> dict:
        return {
            "c": self.c,
            "a": self.a,
            "ci95_a": list(self.ci95_a),
            "residual_rms": self.residual_rms,
            "r_squared": self.r_squared,
            "n_points": self.n_points,
            "input_digest": self.input_digest,
        }


def _digest_points(points) -> str:
    text = ";".join(f"{repr(float(x))},{repr(float(y))}" for x, y in points)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def fit_power_law(points) -> PowerLawFit:
    """Fit s_max(p) = c * p^a by least squares of log s on log p.

    The 95% confidence interval on the exponent comes from the classical
    slope standard error with Student-t quantiles at N-2 degrees of freedom.
    Needs >= 3 points with distinct p; all p and s_max must be positive.
    """
    points = [(float(p), float(s)) for p, s in points]
    if len(points) < 3:
        raise ValueError(f"need >= 3 points, got {len(points)}")
    if any(p <= 0 or s <= 0 for p, s in points):
        raise ValueError("all p and s_max values must be > 0")
    lx = np.log([p for p, _ in points])
    ly = np.log([s for _, s in points])
    sxx = float(np.sum((lx - lx.mean()) ** 2))
    if sxx == 0.0:
        raise ValueError("degenerate design: all p equal")
    slope = float(np.sum((lx - lx.mean()) * (ly - ly.mean())) / sxx)
    intercept = float(ly.mean() - slope * lx.mean())
    resid = ly - (intercept + slope * lx)
    rss = float(np.sum(resid**2))
    tss = float(np.sum((ly - ly.mean()) ** 2))
    dof = len(points) - 2
    se_slope = float(np.sqrt((rss / dof) / sxx)) if dof > 0 else 0.0
    tcrit = float(student_t.ppf(0.975, dof)) if dof > 0 else 0.0
    return PowerLawFit(
        c=float(np.exp(intercept)),
        a=slope,
        ci95_a=(slope - tcrit * se_slope, slope + tcrit * se_slope),
        residual_rms=float(np.sqrt(rss / len(points))),
        r_squared=1.0 - rss / tss if tss > 0 else 1.0,
        n_points=len(points),
        input_digest=_digest_points(points),
    )


@dataclass(frozen=True)
class RenyiFit:
    """Fidelity-decay constant fitted to second-Renyi growth curves."""

    b0: float
    residual_rms: float
    n_samples: int


def fit_b0_from_renyi(samples, p: float, b0_bounds=(1e-6, 20.0)) -> RenyiFit:
    """Least-squares b0 from (t, n, S2) samples at noise rate p.

    Only pre-saturation samples (S2 < n - 0.1) inform the fit; an
    all-saturated input is an error.
    """
    data = [(float(t), int(n), float(s2)) for t, n, s2 in samples]
    data = [d for d in data if d[2] < d[1] - 0.1]
    if not data:
        raise ValueError("all samples saturated (S2 >= n - 0.1); nothing to fit")

    ts = np.array([d[0] for d in data])
    ns = np.array([d[1] for d in data])
    s2s = np.array([d[2] for d in data])

    def objective(b0):
        pred = -np.log2(
            np.exp(-2.0 * b0 * p * ns * ts) + (1.0 - np.exp(-2.0 * b0 * p * ns * ts)) * 2.0**-ns
        )
        return float(np.sum((s2s - pred) ** 2))

    # The objective is flat wherever every sample is saturated, so a plain
    # bracketing search can stall on the plateau; scan a log grid first and
    # polish the best bracket.
    grid = np.geomspace(b0_bounds[0], b0_bounds[1], 200)
    values = [objective(b) for b in grid]
    best = int(np.argmin(values))
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, len(grid) - 1)]
    try:
        res = minimize_scalar(objective, bracket=(lo, grid[best], hi),
                              method="brent", options={"xtol": 1e-12})
    except ValueError:  # no downhill triple (minimum at a grid edge)
        res = minimize_scalar(objective, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-14})
    return RenyiFit(
        b0=float(res.x),
        residual_rms=float(np.sqrt(max(res.fun, 0.0) / len(data))),
        n_samples=len(data),
    )
