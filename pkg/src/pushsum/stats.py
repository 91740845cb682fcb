"""Hypothesis families, observation sampling, and KL-divergence objectives.

Continuous likelihoods are truncated normals; all density work is done in
log space (differences of log-densities, never ratios of densities).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import ndtr, ndtri

from .errors import OutOfSupportError, QuadratureFailureError, SupportMismatchError

DEFAULT_BETA = 1e-8

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class Categorical:
    """Finite-support distribution; values paired with probabilities."""

    values: tuple
    probs: tuple

    def __post_init__(self):
        if len(self.values) != len(self.probs):
            raise ValueError("values and probs must have equal length")
        if any(p < 0 for p in self.probs):
            raise ValueError("negative probability")
        total = sum(self.probs)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {total}, not 1")

    def log_density(self, x) -> float:
        try:
            idx = self.values.index(x)
        except ValueError:
            return -math.inf
        p = self.probs[idx]
        return math.log(p) if p > 0 else -math.inf

    def sample(self, rng: np.random.Generator):
        u = rng.random()
        acc = 0.0
        for v, p in zip(self.values, self.probs):
            acc += p
            if u < acc:
                return v
        return self.values[-1]


@dataclass(frozen=True)
class TruncatedNormal:
    """Normal(mean, var) restricted to [a, b] and renormalized."""

    mean: float
    var: float
    a: float
    b: float

    def __post_init__(self):
        if self.var <= 0:
            raise ValueError("variance must be positive")
        if not self.a < self.b:
            raise ValueError("need a < b")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.var)

    @property
    def log_z(self) -> float:
        """Log of the normalization constant over [a, b]."""
        s = self.sigma
        lo = ndtr((self.a - self.mean) / s)
        hi = ndtr((self.b - self.mean) / s)
        return math.log(hi - lo)

    def log_density(self, x: float) -> float:
        if not (self.a <= x <= self.b):
            return -math.inf
        z = (x - self.mean) / self.sigma
        return -0.5 * z * z - _LOG_SQRT_2PI - math.log(self.sigma) - self.log_z

    def sample(self, rng: np.random.Generator) -> float:
        # Inverse-CDF on the truncated interval: deterministic per stream.
        s = self.sigma
        lo = ndtr((self.a - self.mean) / s)
        hi = ndtr((self.b - self.mean) / s)
        u = rng.random()
        return self.mean + s * float(ndtri(lo + u * (hi - lo)))

    def sample_many(self, rng: np.random.Generator, size: int) -> np.ndarray:
        s = self.sigma
        lo = ndtr((self.a - self.mean) / s)
        hi = ndtr((self.b - self.mean) / s)
        u = rng.random(size)
        return self.mean + s * ndtri(lo + u * (hi - lo))


Distribution = Categorical | TruncatedNormal


def kl_divergence(p: Distribution, q: Distribution) -> float:
    """D_KL(p || q) in nats.

    Categorical pairs are summed exactly; continuous pairs use adaptive
    quadrature over the support of p (absolute tolerance 1e-8).
    """
    if isinstance(p, Categorical) and isinstance(q, Categorical):
        if set(p.values) != set(q.values):
            raise SupportMismatchError("categorical supports differ")
        total = 0.0
        for v, pv in zip(p.values, p.probs):
            if pv == 0:
                continue
            qv = q.probs[q.values.index(v)]
            if qv == 0:
                raise SupportMismatchError(f"q has zero mass at {v!r} where p > 0")
            total += pv * (math.log(pv) - math.log(qv))
        return max(total, 0.0)
    if isinstance(p, TruncatedNormal) and isinstance(q, TruncatedNormal):
        if p.a < q.a - 1e-12 or p.b > q.b + 1e-12:
            raise SupportMismatchError("support of p not contained in support of q")

        def integrand(x: float) -> float:
            lp = p.log_density(x)
            lq = q.log_density(x)
            return math.exp(lp) * (lp - lq)

        value, err = quad(integrand, p.a, p.b, epsabs=1e-10, limit=200)
        if err > 1e-8:
            raise QuadratureFailureError(f"quadrature error estimate {err}")
        return max(value, 0.0)
    raise SupportMismatchError("cannot compare distributions of different kinds")


@dataclass(frozen=True)
class HypothesisModel:
    """Per-agent likelihood families over a shared hypothesis set.

    likelihoods[i][theta] is agent i's model under hypothesis theta;
    truths[i] is the (in practice unknown) distribution generating agent
    i's observations. beta is the uniform positive density floor.
    """

    likelihoods: tuple[tuple[Distribution, ...], ...]
    truths: tuple[Distribution, ...]
    beta: float = DEFAULT_BETA

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if len(self.likelihoods) != len(self.truths):
            raise ValueError("likelihoods and truths disagree on agent count")
        counts = {len(fam) for fam in self.likelihoods}
        if len(counts) != 1:
            raise ValueError("all agents must share the same hypothesis count")
        for i, (fam, truth) in enumerate(zip(self.likelihoods, self.truths)):
            for theta, dist in enumerate(fam):
                if not _supports(dist, truth):
                    raise ValueError(
                        f"hypothesis {theta} of agent {i} does not cover "
                        f"the support of the true distribution"
                    )

    @property
    def n(self) -> int:
        return len(self.truths)

    @property
    def m(self) -> int:
        return len(self.likelihoods[0])


def _supports(dist: Distribution, truth: Distribution) -> bool:
    """Absolute continuity of truth w.r.t. dist (dist covers truth's support)."""
    if isinstance(dist, Categorical) and isinstance(truth, Categorical):
        covered = {v for v, p in zip(dist.values, dist.probs) if p > 0}
        return all(v in covered for v, p in zip(truth.values, truth.probs) if p > 0)
    if isinstance(dist, TruncatedNormal) and isinstance(truth, TruncatedNormal):
        return dist.a <= truth.a and truth.b <= dist.b
    return False


def log_likelihood(model: HypothesisModel, agent: int, theta: int, x) -> float:
    """Floored log-density log(max(P_theta^i(x), beta)); always finite."""
    fam = model.likelihoods[agent]
    log_densities = [d.log_density(x) for d in fam]
    if all(ld == -math.inf for ld in log_densities):
        raise OutOfSupportError(f"observation {x!r} outside every hypothesis support")
    return max(log_densities[theta], math.log(model.beta))


def log_likelihood_vector(model: HypothesisModel, agent: int, x) -> list[float]:
    """Floored log-densities for every hypothesis at observation x."""
    fam = model.likelihoods[agent]
    log_densities = [d.log_density(x) for d in fam]
    if all(ld == -math.inf for ld in log_densities):
        raise OutOfSupportError(f"observation {x!r} outside every hypothesis support")
    floor = math.log(model.beta)
    return [max(ld, floor) for ld in log_densities]


@dataclass(frozen=True)
class ObjectiveResult:
    f_values: tuple[float, ...]
    theta_star: tuple[int, ...]
    gap: float | None  # min over theta outside the optimal set of F - F*


def objective(model: HypothesisModel, tie_tol: float = 1e-9) -> ObjectiveResult:
    """Global objective F(theta) = sum_i D_KL(truth_i || likelihood_{i,theta})."""
    f_values = []
    for theta in range(model.m):
        f = sum(
            kl_divergence(model.truths[i], model.likelihoods[i][theta])
            for i in range(model.n)
        )
        f_values.append(f)
    f_min = min(f_values)
    theta_star = tuple(t for t, f in enumerate(f_values) if f <= f_min + tie_tol)
    outside = [f for t, f in enumerate(f_values) if t not in theta_star]
    gap = min(outside) - f_min if outside else None
    return ObjectiveResult(tuple(f_values), theta_star, gap)


def sample(model: HypothesisModel, agent: int, rng: np.random.Generator):
    """Draw one observation from agent's true distribution."""
    return model.truths[agent].sample(rng)
