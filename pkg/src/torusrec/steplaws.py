"""Infinitely divisible step laws on the torus.

A step law is the increment distribution D_t = beta_t * delta + (1 - beta_t)
* gamma_t, built from an optional Brownian part (drift + per-coordinate
diffusion) and an optional compound-Poisson part whose jump density is a
finite mixture of wrapped normals.  A Brownian part destroys the atom
(beta_t = 0); a pure jump law has beta_t = exp(-rate * t).

Fourier convention: g_hat(k) = integral of g(x) exp(-i k.x) dx over the
torus, so D_hat_t(k) = exp(t * psi(k)) with psi the Levy exponent.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from itertools import product as iproduct

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad

from .torus import TWO_PI, wrap

__all__ = [
    "MixtureComponent",
    "BrownianPart",
    "JumpPart",
    "StepLaw",
    "BranchCutWarning",
    "DistinctnessReport",
    "beta",
    "d_hat",
    "gamma_hat",
    "gamma_hat_scaled",
    "quadrature_gamma_hat",
    "sample_increment",
    "sample_increments",
    "distinctness_report",
    "default_gap",
    "slowest_decay_rate",
    "index_box",
    "index_cone",
]


class BranchCutWarning(UserWarning):
    """Raised when a complex power in the scaling identity sits near the cut."""


def _as_vec(value, dim, name):
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.shape == (1,) and dim > 1:
        arr = np.repeat(arr, dim)
    if arr.shape != (dim,):
        raise ValueError(f"{name} must have {dim} components")
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class MixtureComponent:
    weight: float
    mean: tuple
    var: tuple

    def __post_init__(self):
        if self.weight <= 0:
            raise ValueError("mixture weight must be positive")
        if any(v <= 0 for v in self.var):
            raise ValueError("mixture variance must be positive")


@dataclass(frozen=True)
class BrownianPart:
    drift: tuple
    sigma2: tuple

    def __post_init__(self):
        if any(s <= 0 for s in self.sigma2):
            raise ValueError("diffusion coefficients must be positive")


@dataclass(frozen=True)
class JumpPart:
    rate: float
    mixture: tuple

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("jump rate must be positive")
        if not self.mixture:
            raise ValueError("jump part needs at least one mixture component")
        total = sum(c.weight for c in self.mixture)
        if abs(total - 1.0) > 1e-12:
            raise ValueError("mixture weights must sum to 1")


@dataclass(frozen=True)
class StepLaw:
    """Step distribution spec; see module docstring for the decomposition."""

    dim: int
    brownian: BrownianPart | None = None
    jump: JumpPart | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.brownian is None and self.jump is None:
            raise ValueError("step law needs a Brownian part, a jump part, or both")

    @property
    def atom_rate(self):
        """Decay constant c with beta_t = exp(-c t); inf means no atom."""
        if self.brownian is not None:
            return math.inf
        return self.jump.rate

    # -- constructors --------------------------------------------------------

    @classmethod
    def brownian_law(cls, drift, sigma2, dim=None):
        drift = np.atleast_1d(np.asarray(drift, dtype=float))
        dim = dim or drift.size
        return cls(dim, brownian=BrownianPart(_as_vec(drift, dim, "drift"),
                                              _as_vec(sigma2, dim, "sigma2")))

    @classmethod
    def jump_law(cls, rate, mixture, dim=1):
        comps = tuple(
            MixtureComponent(w, _as_vec(m, dim, "mean"), _as_vec(v, dim, "var"))
            for w, m, v in mixture
        )
        return cls(dim, jump=JumpPart(float(rate), comps))

    # -- serialization -------------------------------------------------------

    def to_dict(self):
        out = {"dim": self.dim, "brownian": None, "jump": None}
        if self.brownian is not None:
            out["brownian"] = {"drift": list(self.brownian.drift),
                               "sigma2": list(self.brownian.sigma2)}
        if self.jump is not None:
            out["jump"] = {
                "rate": self.jump.rate,
                "mixture": [
                    {"w": c.weight,
                     "mean": list(c.mean) if self.dim > 1 else c.mean[0],
                     "var": list(c.var) if self.dim > 1 else c.var[0]}
                    for c in self.jump.mixture
                ],
            }
        return out

    @classmethod
    def from_dict(cls, data):
        dim = int(data["dim"])
        brownian = None
        if data.get("brownian"):
            b = data["brownian"]
            brownian = BrownianPart(_as_vec(b["drift"], dim, "drift"),
                                    _as_vec(b["sigma2"], dim, "sigma2"))
        jump = None
        if data.get("jump"):
            j = data["jump"]
            comps = tuple(
                MixtureComponent(float(c["w"]), _as_vec(c["mean"], dim, "mean"),
                                 _as_vec(c["var"], dim, "var"))
                for c in j["mixture"]
            )
            jump = JumpPart(float(j["rate"]), comps)
        return cls(dim, brownian=brownian, jump=jump)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# Fourier side
# ---------------------------------------------------------------------------

def _check_time(t):
    if not (t > 0):
        raise ValueError("time must be positive")


def beta(law: StepLaw, t):
    """Atom weight beta_t = exp(-c t); identically 0 with a Brownian part."""
    _check_time(t)
    c = law.atom_rate
    return 0.0 if math.isinf(c) else math.exp(-c * t)


def jump_char(law: StepLaw, k):
    """Fourier coefficient h_hat(k) of the single-jump density."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    total = 0.0 + 0.0j
    for comp in law.jump.mixture:
        mean = np.asarray(comp.mean)
        var = np.asarray(comp.var)
        total += comp.weight * np.exp(-1j * np.dot(k, mean) - 0.5 * np.dot(var, k * k))
    return complex(total)


def levy_exponent(law: StepLaw, k):
    """psi(k) with D_hat_t(k) = exp(t psi(k))."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    if k.shape != (law.dim,):
        raise ValueError("index dimension mismatch")
    psi = 0.0 + 0.0j
    if law.brownian is not None:
        v = np.asarray(law.brownian.drift)
        s2 = np.asarray(law.brownian.sigma2)
        psi += -1j * np.dot(v, k) - 0.5 * np.dot(s2, k * k)
    if law.jump is not None:
        psi += law.jump.rate * (jump_char(law, k) - 1.0)
    return complex(psi)


def d_hat(law: StepLaw, t, k):
    """Fourier coefficient of the full increment law D_t."""
    _check_time(t)
    return complex(np.exp(t * levy_exponent(law, k)))


def gamma_hat(law: StepLaw, t, k):
    """Fourier coefficient of the continuous part gamma_t."""
    _check_time(t)
    b = beta(law, t)
    if b >= 1.0:
        raise ValueError("law has no continuous part at this time (beta_t = 1)")
    if b == 0.0:
        return d_hat(law, t, k)
    return (d_hat(law, t, k) - b) / (1.0 - b)


def gamma_hat_scaled(law: StepLaw, t0, alpha, k):
    """gamma_hat at time alpha*t0 via the scaling identity.

    Evaluates ((beta + (1-beta) gamma_hat_t0)^alpha - beta^alpha) /
    (1 - beta^alpha) on the principal branch.  A BranchCutWarning is emitted
    when the base sits within 0.1 pi of the negative real axis, where the
    principal power may disagree with the semigroup continuation.
    """
    _check_time(t0)
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    base = d_hat(law, t0, k)  # equals beta + (1 - beta) * gamma_hat
    if abs(np.angle(base)) > 0.9 * math.pi:
        warnings.warn("complex power base near the branch cut; principal branch used",
                      BranchCutWarning, stacklevel=2)
    b = beta(law, t0)
    powered = complex(base) ** alpha
    if b == 0.0:
        return powered
    return (powered - b ** alpha) / (1.0 - b ** alpha)


# ---------------------------------------------------------------------------
# Real-space density of gamma_t (wrapped Gaussian mixture) and its quadrature
# ---------------------------------------------------------------------------

def continuous_components(law: StepLaw, t, tail_tol=1e-16, max_jumps=200):
    """Unwrapped Gaussian mixture (weight, mean, var) whose wrap is gamma_t.

    Conditioning the Poisson jump count on >= 1 when there is no Brownian
    part; sums of mixture jumps are expanded multinomially over component
    counts and negligible weights are pruned (dropped mass < tail_tol).
    """
    _check_time(t)
    dim = law.dim
    base_mean = np.zeros(dim)
    base_var = np.zeros(dim)
    if law.brownian is not None:
        base_mean = np.asarray(law.brownian.drift) * t
        base_var = np.asarray(law.brownian.sigma2) * t
    if law.jump is None:
        return [(1.0, base_mean, base_var)]

    lam_t = law.jump.rate * t
    comps = law.jump.mixture
    n_min = 0 if law.brownian is not None else 1
    norm = 1.0 if law.brownian is not None else 1.0 - math.exp(-lam_t)
    out = []
    log_pn = -lam_t  # log Poisson pmf at n = 0
    pn = math.exp(log_pn)
    cum = 0.0
    for n in range(0, max_jumps + 1):
        if n > 0:
            pn = pn * lam_t / n
        if n >= n_min:
            cum += pn
            weight_n = pn / norm
            if weight_n > tail_tol:
                for counts in _compositions(n, len(comps)):
                    w = weight_n * _multinomial(n, counts)
                    for c, comp in zip(counts, comps):
                        w *= comp.weight ** c
                    if w <= tail_tol:
                        continue
                    mean = base_mean + sum(
                        c * np.asarray(comp.mean) for c, comp in zip(counts, comps)
                    )
                    var = base_var + sum(
                        c * np.asarray(comp.var) for c, comp in zip(counts, comps)
                    )
                    out.append((w, np.asarray(mean, dtype=float), np.asarray(var, dtype=float)))
        if n >= max(n_min, lam_t) and pn / norm < tail_tol * 1e-2:
            break
    if not out:
        raise ValueError("no mixture components above the tail tolerance")
    return out


def _compositions(n, parts):
    if parts == 1:
        yield (n,)
        return
    for head in range(n + 1):
        for rest in _compositions(n - head, parts - 1):
            yield (head,) + rest


def _multinomial(n, counts):
    out = math.factorial(n)
    for c in counts:
        out //= math.factorial(c)
    return out


def wrapped_mixture_pdf(components, y):
    """Density of the wrapped mixture at points y (shape (..., d))."""
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None] if len(components[0][1]) == 1 else y[None, :]
    dens = np.zeros(y.shape[:-1])
    for w, mean, var in components:
        per_axis = np.ones(y.shape[:-1])
        for axis in range(y.shape[-1]):
            per_axis = per_axis * _wrapped_normal_1d(y[..., axis], mean[axis], var[axis])
        dens += w * per_axis
    return dens


def _wrapped_normal_1d(y, mean, var):
    sigma = math.sqrt(var)
    delta = np.mod(y - mean + math.pi, TWO_PI) - math.pi  # in [-pi, pi)
    n_wraps = int(math.ceil((8.6 * sigma + math.pi) / TWO_PI))
    total = np.zeros_like(delta)
    for m in range(-n_wraps, n_wraps + 1):
        z = delta + TWO_PI * m
        total += np.exp(-0.5 * z * z / var)
    return total / math.sqrt(2.0 * math.pi * var)


def quadrature_gamma_hat(law: StepLaw, t, k, tol=1e-12):
    """Independent oracle: integrate exp(-i k.y) gamma_t(y) over the torus.

    The density is evaluated in real space as a wrapped Gaussian mixture
    (wrap sum truncated far below tol); the integral uses adaptive quadrature
    for d = 1 and refined composite Gauss-Legendre for d in {2, 3}.
    """
    _check_time(t)
    if law.dim > 3:
        raise ValueError("quadrature oracle restricted to d <= 3")
    k = np.atleast_1d(np.asarray(k, dtype=float))
    comps = continuous_components(law, t, tail_tol=min(tol * 1e-4, 1e-16))
    if law.dim == 1:
        def integrand_re(y):
            return wrapped_mixture_pdf(comps, np.array([[y]]))[0] * math.cos(k[0] * y)

        def integrand_im(y):
            return -wrapped_mixture_pdf(comps, np.array([[y]]))[0] * math.sin(k[0] * y)

        re, _ = quad(integrand_re, 0.0, TWO_PI, epsabs=tol / 4, epsrel=1e-13, limit=400)
        im, _ = quad(integrand_im, 0.0, TWO_PI, epsabs=tol / 4, epsrel=1e-13, limit=400)
        return complex(re, im)
    return _quadrature_nd(comps, k, law.dim, tol)


def _quadrature_nd(comps, k, dim, tol):
    prev = None
    for panels in (12, 24, 48):
        nodes, weights = _composite_gl(panels, order=10)
        grids = np.meshgrid(*([nodes] * dim), indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=-1)
        wts = np.ones(pts.shape[0])
        for axis in range(dim):
            w_axis = np.tile(
                np.repeat(weights, int(len(nodes) ** (dim - axis - 1))),
                int(len(nodes) ** axis),
            )
            wts *= w_axis
        dens = wrapped_mixture_pdf(comps, pts)
        phase = np.exp(-1j * pts @ k)
        val = complex(np.sum(wts * dens * phase))
        if prev is not None and abs(val - prev) < tol / 2:
            return val
        prev = val
    return prev


def _composite_gl(panels, order=10):
    x, w = leggauss(order)
    h = TWO_PI / panels
    nodes = []
    weights = []
    for p in range(panels):
        a = p * h
        nodes.append(a + (x + 1) * (h / 2))
        weights.append(w * (h / 2))
    return np.concatenate(nodes), np.concatenate(weights)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def sample_increments(law: StepLaw, durations, rng):
    """Draw increments for an array of durations; returns shape (..., d)."""
    durations = np.asarray(durations, dtype=float)
    if np.any(durations <= 0):
        raise ValueError("durations must be positive")
    flat = durations.reshape(-1)
    n = flat.size
    out = np.zeros((n, law.dim))
    if law.brownian is not None:
        v = np.asarray(law.brownian.drift)
        s2 = np.asarray(law.brownian.sigma2)
        out += v[None, :] * flat[:, None]
        out += rng.standard_normal((n, law.dim)) * np.sqrt(s2[None, :] * flat[:, None])
    if law.jump is not None:
        counts = rng.poisson(law.jump.rate * flat)
        total = int(counts.sum())
        if total > 0:
            owner = np.repeat(np.arange(n), counts)
            weights = np.array([c.weight for c in law.jump.mixture])
            means = np.array([c.mean for c in law.jump.mixture])
            vars_ = np.array([c.var for c in law.jump.mixture])
            comp_idx = rng.choice(len(weights), size=total, p=weights)
            draws = means[comp_idx] + rng.standard_normal((total, law.dim)) * np.sqrt(vars_[comp_idx])
            np.add.at(out, owner, draws)
    return wrap(out).reshape(durations.shape + (law.dim,))


def sample_increment(law: StepLaw, t, rng):
    """Single increment over time t as a wrapped point (shape (d,))."""
    return sample_increments(law, np.asarray([t]), rng)[0]


# ---------------------------------------------------------------------------
# Distinctness diagnostics
# ---------------------------------------------------------------------------

def index_box(K, ndim):
    """All integer tuples in {-K..K}^ndim."""
    return list(iproduct(range(-K, K + 1), repeat=ndim))


def index_cone(K, ndim):
    """Representatives of {-K..K}^ndim under k ~ -k: first nonzero entry > 0."""
    out = []
    for k in iproduct(range(-K, K + 1), repeat=ndim):
        nz = next((v for v in k if v != 0), 0)
        if nz >= 0:
            out.append(k)
    return out


def is_symmetric(law: StepLaw):
    """True iff gamma_t(-y) = gamma_t(y): zero drift and a +/- paired mixture."""
    if law.brownian is not None and any(v != 0.0 for v in law.brownian.drift):
        return False
    if law.jump is not None:
        comps = list(law.jump.mixture)
        used = [False] * len(comps)
        for i, c in enumerate(comps):
            if used[i]:
                continue
            neg_mean = tuple(wrap(-m) for m in c.mean)
            match = None
            for j in range(i, len(comps)):
                if used[j] and j != i:
                    continue
                cand = comps[j]
                if (np.allclose(neg_mean, [wrap(m) for m in cand.mean], atol=1e-12)
                        and np.allclose(c.var, cand.var)
                        and abs(c.weight - cand.weight) < 1e-12):
                    match = j
                    break
            if match is None:
                return False
            used[i] = used[match] = True
    return True


@dataclass(frozen=True)
class DistinctnessReport:
    passed: bool
    min_modulus: float
    min_pairwise: float
    margin: float
    mode: str
    t: float
    cutoff: int
    worst_pair: tuple

    def to_dict(self):
        return {
            "passed": self.passed,
            "min_modulus": self.min_modulus,
            "min_pairwise": self.min_pairwise,
            "margin": self.margin,
            "mode": self.mode,
            "t": self.t,
            "cutoff": self.cutoff,
            "worst_pair": [list(k) for k in self.worst_pair],
        }


def distinctness_report(law: StepLaw, t, K, margin, restrict_to_cone=None):
    """Enumerate gamma_hat_t over the index box and check the margins needed
    by the downstream Vandermonde solve: min |coefficient| and min pairwise
    distance, both >= margin.

    ``restrict_to_cone`` defaults to the symmetry of the law (symmetric laws
    are checked on the non-negative cone, where the reflection collision is
    quotiented out).
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if restrict_to_cone is None:
        restrict_to_cone = is_symmetric(law)
    keys = index_cone(K, law.dim) if restrict_to_cone else index_box(K, law.dim)
    coeffs = np.array([gamma_hat(law, t, k) for k in keys])
    min_mod = float(np.min(np.abs(coeffs)))
    diff = np.abs(coeffs[:, None] - coeffs[None, :])
    np.fill_diagonal(diff, np.inf)
    idx = np.unravel_index(np.argmin(diff), diff.shape)
    min_pair = float(diff[idx])
    return DistinctnessReport(
        passed=bool(min_mod >= margin and min_pair >= margin),
        min_modulus=min_mod,
        min_pairwise=min_pair,
        margin=float(margin),
        mode="cone" if restrict_to_cone else "full",
        t=float(t),
        cutoff=int(K),
        worst_pair=(keys[idx[0]], keys[idx[1]]),
    )


def slowest_decay_rate(law: StepLaw, kmax=8):
    """min over k != 0 of the mode decay rate r(k) = -Re psi(k)."""
    best = math.inf
    for k in index_box(kmax, law.dim):
        if all(v == 0 for v in k):
            continue
        best = min(best, -levy_exponent(law, k).real)
    return best


def default_gap(law: StepLaw, kmax=8):
    """Sampling gap making residual block correlation <= exp(-2)."""
    return 2.0 / slowest_decay_rate(law, kmax)
