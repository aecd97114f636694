"""(mu/mu_w, lambda)-CMA-ES with a separable variant for large dimensions.

Default strategy parameters (d = dimension):

==============  ===============================================================
lambda          4 + floor(3 ln d)
mu              floor(lambda / 2)
weights         ln((lambda+1)/2) - ln(i), i = 1..mu, normalized to sum 1
c_sigma         (mu_eff + 2) / (d + mu_eff + 5)
d_sigma         1 + 2 max(0, sqrt((mu_eff-1)/(d+1)) - 1) + c_sigma
c_c             (4 + mu_eff/d) / (d + 4 + 2 mu_eff/d)
c_1             2 / ((d+1.3)^2 + mu_eff)
c_mu            min(1 - c_1, 2 (mu_eff - 2 + 1/mu_eff) / ((d+2)^2 + mu_eff))
separable       c_1 and c_mu multiplied by (d+2)/3 (diagonal covariance)
==============  ===============================================================

The separable (diagonal-covariance) variant is used automatically above
``SEPARABLE_THRESHOLD`` dimensions. Sampling uses numpy's PCG64 generator
seeded with the configured 64-bit seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DivergenceError, DomainError

SEPARABLE_THRESHOLD = 500
SIGMA_COLLAPSE = 1e-14
MAX_INFINITE_GENERATIONS = 10


@dataclass
class CmaConfig:
    sigma0: float = 0.5
    max_evals: int = 10_000
    target_cost: float = -math.inf
    seed: int = 0
    popsize: Optional[int] = None
    mu: Optional[int] = None
    separable: Optional[bool] = None  # None: decided by dimension
    penalty_weight: float = 1e3

    def resolve(self, dim: int) -> tuple[int, int, bool]:
        lam = self.popsize if self.popsize is not None else 4 + int(3 * math.log(dim))
        mu = self.mu if self.mu is not None else lam // 2
        if not (1 <= mu <= lam):
            raise DomainError(f"need 1 <= mu <= lambda, got mu={mu}, lambda={lam}")
        if self.sigma0 <= 0:
            raise DomainError("sigma0 must be positive")
        if self.max_evals < lam:
            raise DomainError(f"max_evals={self.max_evals} below one generation ({lam})")
        sep = self.separable if self.separable is not None else dim > SEPARABLE_THRESHOLD
        return lam, mu, sep


@dataclass
class OptResult:
    best_point: np.ndarray
    best_cost: float
    evals_used: int
    history: list = field(default_factory=list)
    sigmas: list = field(default_factory=list)
    evals: list = field(default_factory=list)
    stop_reason: str = ""

    def history_rows(self):
        """(generation, evals, best_cost, sigma) per generation."""
        return [(k, e, c, s) for k, (e, c, s) in enumerate(zip(self.evals, self.history, self.sigmas))]


class CMAES:
    """Ask/tell state of one CMA-ES run."""

    def __init__(self, x0, cfg: CmaConfig):
        x0 = np.asarray(x0, dtype=float).ravel()
        d = x0.size
        if d < 1:
            raise DomainError("dimension must be >= 1")
        self.dim = d
        self.lam, self.mu, self.separable = cfg.resolve(d)
        self.rng = np.random.Generator(np.random.PCG64(cfg.seed & 0xFFFFFFFFFFFFFFFF))

        w = math.log((self.lam + 1) / 2.0) - np.log(np.arange(1, self.mu + 1))
        self.weights = w / w.sum()
        self.mueff = 1.0 / float(np.sum(self.weights ** 2))
        mueff = self.mueff

        self.cs = (mueff + 2) / (d + mueff + 5)
        self.ds = 1 + 2 * max(0.0, math.sqrt((mueff - 1) / (d + 1)) - 1) + self.cs
        self.cc = (4 + mueff / d) / (d + 4 + 2 * mueff / d)
        c1 = 2 / ((d + 1.3) ** 2 + mueff)
        cmu = min(1 - c1, 2 * (mueff - 2 + 1 / mueff) / ((d + 2) ** 2 + mueff))
        if self.separable:
            c1 *= (d + 2) / 3.0
            cmu = min(1 - c1, cmu * (d + 2) / 3.0)
        self.c1, self.cmu = c1, cmu
        self.chin = math.sqrt(d) * (1 - 1 / (4 * d) + 1 / (21 * d * d))

        self.mean = x0.copy()
        self.sigma = float(cfg.sigma0)
        self.ps = np.zeros(d)
        self.pc = np.zeros(d)
        if self.separable:
            self.cdiag = np.ones(d)
        else:
            self.C = np.eye(d)
            self.B = np.eye(d)
        self.D = np.ones(d)
        self.generation = 0
        self._eigen_gen = 0
        self._eigen_gap = max(1, int(1.0 / (10 * d * (c1 + cmu))))
        self._y = None

    def ask(self) -> np.ndarray:
        z = self.rng.standard_normal((self.lam, self.dim))
        y = z * self.D
        if not self.separable:
            y = y @ self.B.T
        self._y = y
        return self.mean + self.sigma * y

    def tell(self, fitness) -> None:
        f = np.asarray(fitness, dtype=float)
        order = np.argsort(f, kind="stable")[: self.mu]
        ysel = self._y[order]
        yw = self.weights @ ysel
        self.mean = self.mean + self.sigma * yw

        if self.separable:
            cinv_yw = yw / self.D
        else:
            cinv_yw = self.B @ ((self.B.T @ yw) / self.D)
        cs, cc, d = self.cs, self.cc, self.dim
        self.ps = (1 - cs) * self.ps + math.sqrt(cs * (2 - cs) * self.mueff) * cinv_yw
        ps_norm = float(np.linalg.norm(self.ps))
        self.generation += 1
        hsig = ps_norm / math.sqrt(1 - (1 - cs) ** (2 * self.generation)) < (1.4 + 2 / (d + 1)) * self.chin
        self.pc = (1 - cc) * self.pc + hsig * math.sqrt(cc * (2 - cc) * self.mueff) * yw

        c1, cmu = self.c1, self.cmu
        decay = 1 - c1 - cmu + (1 - hsig) * c1 * cc * (2 - cc)
        if self.separable:
            self.cdiag = decay * self.cdiag + c1 * self.pc ** 2 + cmu * (self.weights @ ysel ** 2)
            self.D = np.sqrt(np.maximum(self.cdiag, 1e-300))
        else:
            rank_mu = (ysel.T * self.weights) @ ysel
            self.C = decay * self.C + c1 * np.outer(self.pc, self.pc) + cmu * rank_mu
            if self.generation - self._eigen_gen >= self._eigen_gap:
                self._decompose()

        self.sigma *= math.exp((cs / self.ds) * (ps_norm / self.chin - 1))

    def _decompose(self):
        self._eigen_gen = self.generation
        self.C = np.triu(self.C) + np.triu(self.C, 1).T
        evals, self.B = np.linalg.eigh(self.C)
        self.D = np.sqrt(np.maximum(evals, 1e-300))


def cmaes_minimize(f: Callable, x0, cfg: CmaConfig, bounds=None,
                   vectorized: bool = False, callback: Callable | None = None) -> OptResult:
    """Minimize ``f`` from ``x0``.

    Parameters
    ----------
    f
        Objective. With ``vectorized=True`` it maps an ``(n, d)`` array to
        ``n`` costs; otherwise a single point to a scalar.
    bounds
        Optional ``(lower, upper)`` arrays (use +-inf for free coordinates).
        Candidates are clamped before evaluation and the ranking cost gets
        ``penalty_weight * ||x - clamp(x)||^2`` added.
    callback
        Called as ``callback(generation, candidates, costs)`` after every
        generation; used for diagnostics and invariance tests.

    Stops on ``cost <= target_cost``, on the evaluation budget (a
    generation never overruns ``max_evals``), or when sigma collapses.
    Non-finite costs are treated as +inf; ten consecutive all-infinite
    generations raise ``DivergenceError``.
    """
    es = CMAES(x0, cfg)
    if bounds is not None:
        lo = np.broadcast_to(np.asarray(bounds[0], float), (es.dim,))
        hi = np.broadcast_to(np.asarray(bounds[1], float), (es.dim,))
    else:
        lo = hi = None

    def evaluate(X):
        Xc = X if lo is None else np.clip(X, lo, hi)
        if vectorized:
            raw = np.asarray(f(Xc), dtype=float).reshape(len(X))
        else:
            raw = np.array([float(f(x)) for x in Xc])
        raw = np.where(np.isfinite(raw), raw, np.inf)
        ranked = raw if lo is None else raw + cfg.penalty_weight * np.sum((X - Xc) ** 2, axis=1)
        return Xc, raw, ranked

    x_start, c0, _ = evaluate(es.mean[None, :])
    best_x, best = x_start[0].copy(), float(c0[0])
    res = OptResult(best_x, best, 1, [best], [es.sigma], [1])
    infinite_run = 0

    while True:
        if best <= cfg.target_cost:
            res.stop_reason = "target"
            break
        if res.evals_used + es.lam > cfg.max_evals:
            res.stop_reason = "max_evals"
            break
        if es.sigma < SIGMA_COLLAPSE:
            res.stop_reason = "sigma"
            break
        X = es.ask()
        Xc, raw, ranked = evaluate(X)
        res.evals_used += es.lam
        if callback is not None:
            callback(es.generation, X, raw)
        es.tell(ranked)

        if np.all(np.isinf(raw)):
            infinite_run += 1
            if infinite_run >= MAX_INFINITE_GENERATIONS:
                raise DivergenceError(f"{infinite_run} consecutive generations without a finite cost")
        else:
            infinite_run = 0
        k = int(np.argmin(raw))
        gen_best = float(raw[k])
        if gen_best < best:
            best, best_x = gen_best, Xc[k].copy()
        res.history.append(gen_best)
        res.sigmas.append(es.sigma)
        res.evals.append(res.evals_used)

    res.best_point, res.best_cost = best_x, best
    return res
