"""Per-batch OLS fits, the Gram-weighted combined estimator, and its variance
estimators (known noise scale or residual-based).

Scaling convention: the stored per-arm variance matrix is
``batch_size * (sum of contributing Grams)^{-1} * noise_variance``, i.e. the
covariance of the combined estimate multiplied by the batch size.  Use
:meth:`IvwEstimate.beta_cov` wherever the covariance of the estimate itself
is needed (confidence intervals, posterior draws).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np

from .errors import ContractError, EstimatorUnavailable
from .linalg import inverse_spd, is_invertible_gram, solve_spd
from .model import ContextSpec, TrueModel, sample_batch_contexts
from .policies import PolicyState


@dataclass(frozen=True)
class KnownSigma:
    sigma: float


@dataclass(frozen=True)
class ResidualSigma:
    pass


SigmaMode = Union[KnownSigma, ResidualSigma]


@dataclass
class ArmFit:
    """One arm's OLS output in one batch; `beta` is None when the Gram is singular."""

    beta: Optional[np.ndarray]
    gram: np.ndarray
    count: int
    rss: Optional[float]


@dataclass
class BatchOlsFit:
    batch_index: int
    arm0: ArmFit
    arm1: ArmFit

    def arm(self, a: int) -> ArmFit:
        return self.arm1 if a == 1 else self.arm0


@dataclass
class BatchData:
    """Raw per-unit data for one batch (needed for residual-based variance)."""

    contexts: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray


@dataclass
class IvwEstimate:
    """Gram-weighted combination of the per-batch OLS estimates."""

    beta0: np.ndarray
    beta1: np.ndarray
    var0: np.ndarray  # batch-size-scaled variance matrix, see module docstring
    var1: np.ndarray
    batches_used: int
    batch_size: int
    sigma_mode: SigmaMode

    def beta(self, arm: int) -> np.ndarray:
        return self.beta1 if arm == 1 else self.beta0

    def var(self, arm: int) -> np.ndarray:
        return self.var1 if arm == 1 else self.var0

    def beta_cov(self, arm: int) -> np.ndarray:
        """Covariance matrix of the combined estimate for one arm."""
        return self.var(arm) / self.batch_size


@dataclass
class SufficientStats:
    """Ordered per-batch (beta1, gram1, beta0, gram0) tuples; enough to replay
    policy decisions and Gram-based stopping statistics."""

    entries: List[tuple]

    def __len__(self) -> int:
        return len(self.entries)


def fit_batch_ols(
    contexts: np.ndarray,
    actions: np.ndarray,
    rewards: np.ndarray,
    batch_index: int = 0,
) -> BatchOlsFit:
    """Per-arm OLS on one batch.

    Solves the normal equations by Cholesky factorization; an arm whose Gram
    matrix is singular gets beta=None (the Gram and count are still reported).
    """
    contexts = np.asarray(contexts, dtype=float)
    actions = np.asarray(actions)
    rewards = np.asarray(rewards, dtype=float)
    n = contexts.shape[0]
    if contexts.ndim != 2:
        raise ContractError("contexts must be a 2-d matrix")
    if actions.shape != (n,) or rewards.shape != (n,):
        raise ContractError("actions/rewards must align with contexts")

    arms = []
    for a in (0, 1):
        mask = actions == a
        xa = contexts[mask]
        ya = rewards[mask]
        gram = xa.T @ xa
        if is_invertible_gram(gram):
            beta = solve_spd(gram, xa.T @ ya)
            resid = ya - xa @ beta
            arms.append(ArmFit(beta=beta, gram=gram, count=int(mask.sum()), rss=float(resid @ resid)))
        else:
            arms.append(ArmFit(beta=None, gram=gram, count=int(mask.sum()), rss=None))
    return BatchOlsFit(batch_index=batch_index, arm0=arms[0], arm1=arms[1])


def _contributing(fits: Sequence[BatchOlsFit], arm: int) -> List[ArmFit]:
    # Batches with a singular arm-Gram contribute neither Gram nor estimate.
    return [f.arm(arm) for f in fits if f.arm(arm).beta is not None]


def _combined_gram(fits: Sequence[BatchOlsFit], arm: int) -> np.ndarray:
    parts = _contributing(fits, arm)
    if not parts:
        raise EstimatorUnavailable(f"no batch with a usable arm-{arm} fit")
    total = parts[0].gram.copy()
    for p in parts[1:]:
        total = total + p.gram
    if not is_invertible_gram(total):
        raise EstimatorUnavailable(f"combined arm-{arm} Gram matrix is singular")
    return total


def _combine_arm(fits: Sequence[BatchOlsFit], arm: int) -> np.ndarray:
    parts = _contributing(fits, arm)
    if not parts:
        raise EstimatorUnavailable(f"no batch with a usable arm-{arm} fit")
    if len(parts) == 1:
        return parts[0].beta.copy()
    total = _combined_gram(fits, arm)
    weighted = np.zeros_like(parts[0].beta)
    for p in parts:
        weighted = weighted + p.gram @ p.beta
    return solve_spd(total, weighted)


def variance_known_sigma(
    fits: Sequence[BatchOlsFit], sigma: float, batch_size: int
) -> tuple[np.ndarray, np.ndarray]:
    """Per-arm scaled variance matrices batch_size * (sum Gram)^{-1} * sigma^2."""
    out = []
    for a in (0, 1):
        total = _combined_gram(fits, a)
        out.append(batch_size * inverse_spd(total) * sigma**2)
    return out[0], out[1]


def variance_residual(
    fits: Sequence[BatchOlsFit],
    batch_data: Sequence[BatchData],
    beta0: np.ndarray,
    beta1: np.ndarray,
    batch_size: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Residual-based scaled variance: the known-sigma formula with sigma^2
    replaced by the mean squared residual of that arm against its combined
    estimate."""
    factors = residual_noise_factors(batch_data, beta0, beta1)
    out = []
    for a, factor in zip((0, 1), factors):
        total = _combined_gram(fits, a)
        out.append(batch_size * inverse_spd(total) * factor)
    return out[0], out[1]


def residual_noise_factors(
    batch_data: Sequence[BatchData], beta0: np.ndarray, beta1: np.ndarray
) -> tuple[float, float]:
    """Per-arm mean squared residuals over all units, against the supplied estimates."""
    dim = np.asarray(beta0).size
    factors = []
    for a, beta in ((0, np.asarray(beta0, float)), (1, np.asarray(beta1, float))):
        sq_sum = 0.0
        count = 0
        for batch in batch_data:
            mask = batch.actions == a
            if not np.any(mask):
                continue
            resid = batch.rewards[mask] - batch.contexts[mask] @ beta
            sq_sum += float(resid @ resid)
            count += int(mask.sum())
        if count < dim + 1:
            raise EstimatorUnavailable(
                f"arm {a} has {count} observations; need at least dim + 1 for residuals"
            )
        factors.append(sq_sum / count)
    return factors[0], factors[1]


def ivw_combine(
    fits: Sequence[BatchOlsFit],
    sigma_mode: SigmaMode,
    batch_size: int,
    batch_data: Optional[Sequence[BatchData]] = None,
) -> IvwEstimate:
    """Combine per-batch fits into the Gram-weighted estimate with its variance."""
    if not fits:
        raise EstimatorUnavailable("no batch fits supplied")
    beta0 = _combine_arm(fits, 0)
    beta1 = _combine_arm(fits, 1)
    if isinstance(sigma_mode, KnownSigma):
        var0, var1 = variance_known_sigma(fits, sigma_mode.sigma, batch_size)
    else:
        if batch_data is None:
            raise ContractError("residual variance mode needs the raw batch data")
        var0, var1 = variance_residual(fits, batch_data, beta0, beta1, batch_size)
    return IvwEstimate(
        beta0=beta0,
        beta1=beta1,
        var0=var0,
        var1=var1,
        batches_used=len(fits),
        batch_size=batch_size,
        sigma_mode=sigma_mode,
    )


def sufficient_statistics(fits: Sequence[BatchOlsFit]) -> SufficientStats:
    """Project fits onto the per-batch (beta1, gram1, beta0, gram0) list."""
    entries = [
        (
            None if f.arm1.beta is None else f.arm1.beta.copy(),
            f.arm1.gram.copy(),
            None if f.arm0.beta is None else f.arm0.beta.copy(),
            f.arm0.gram.copy(),
        )
        for f in fits
    ]
    return SufficientStats(entries=entries)


def state_from_sufficient_stats(stats: SufficientStats, dim: int) -> PolicyState:
    """Rebuild a policy state from stored statistics (for decision replay).

    Moment vectors are reconstructed as gram @ beta per batch, which recovers
    the raw moments exactly in exact arithmetic; batches with a missing arm
    estimate cannot contribute that arm's moment.
    """
    state = PolicyState.empty(dim)
    for beta1, gram1, beta0, gram0 in stats.entries:
        state.gram1 = state.gram1 + gram1
        state.gram0 = state.gram0 + gram0
        if beta1 is not None:
            state.moment1 = state.moment1 + gram1 @ beta1
        if beta0 is not None:
            state.moment0 = state.moment0 + gram0 @ beta0
        state.t += 1
    return state


def limit_arm_second_moment(
    spec: ContextSpec,
    model: TrueModel,
    clip_floor: float,
    arm: int,
    mc_samples: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Monte Carlo estimate of the asymptotic per-unit design second moment
    E[w(x) x x'] under the limiting clipped policy, where w(x) is 1-p on the
    region where the arm is truly better, p where it is worse, and 1/2 on the
    boundary."""
    x = sample_batch_contexts(spec, mc_samples, rng)
    gap = x @ model.arm_difference()
    favors_arm = gap > 0 if arm == 1 else gap < 0
    against = gap < 0 if arm == 1 else gap > 0
    w = np.where(favors_arm, 1.0 - clip_floor, np.where(against, clip_floor, 0.5))
    return (x * w[:, None]).T @ x / mc_samples
