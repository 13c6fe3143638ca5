"""Bayesian nonparametric clustering of solutions (MLP-B).

A CRP prior over cluster assignments combined with per-cluster multinomial
feature distributions under a symmetric Dirichlet prior, inferred by Gibbs
sampling. The posterior summary drives likelihood-weighted grading and
per-expression error localization.

The multinomial coefficient is deliberately omitted from the likelihood: it
is constant in the cluster index for a fixed solution, so assignment
posteriors are unchanged, and omitting it on both the occupied-cluster and
new-cluster sides keeps their odds consistent.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import digamma, gammaln
from sklearn.cluster import KMeans

ALPHA_CAP = 1e3
BETA_CAP = 1e6
_PHI_FLOOR = 1e-300


class CountMismatch(ValueError):
    pass


class EmptyTrace(ValueError):
    pass


class MissingGrades(KeyError):
    pass


class NonMixing(Warning):
    pass


class CapHit(Warning):
    pass


@dataclass(frozen=True)
class ModelHyperparams:
    """Gamma hyperprior on the CRP concentration, Dirichlet concentration,
    and the sampling protocol. Defaults follow the non-informative setup."""

    alpha_shape: float = 1.0
    alpha_rate: float = 1.0
    beta: float = 1.0
    iterations: int = 10_000
    burn_in: int = 2_000
    seed: int = 0

    def __post_init__(self):
        if self.alpha_shape <= 0 or self.alpha_rate <= 0 or self.beta <= 0:
            raise ValueError("hyperparameters must be positive")
        if not 0 < self.burn_in < self.iterations:
            raise ValueError("need 0 < burn_in < iterations")


@dataclass
class SampleTrace:
    """Post-burn-in Gibbs samples."""

    z: list = field(default_factory=list)  # each: (N,) labels
    phi: list = field(default_factory=list)  # each: (V, K) column-stochastic
    K: list = field(default_factory=list)
    alpha: list = field(default_factory=list)
    beta: list = field(default_factory=list)
    loglik: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.z)


@dataclass(frozen=True)
class PosteriorSummary:
    K_hat: int
    Phi_hat: np.ndarray  # V x K_hat, columns sum to 1
    z_hat: np.ndarray  # per-solution posterior-mode labels
    l_max: int  # index (within retained iterations) of the max-likelihood one
    retained: int  # number of K == K_hat iterations averaged


def multinomial_likelihood(y: np.ndarray, phi: np.ndarray) -> float:
    """log prod_i phi_i^{y_i}, without the multinomial coefficient."""
    y = np.asarray(y, dtype=float)
    if not np.any(y):
        raise ValueError("feature vector must be nonzero")
    return float(y @ np.log(np.maximum(phi, _PHI_FLOOR)))


def crp_conditional(sizes: np.ndarray, N: int, alpha: float) -> tuple[np.ndarray, float]:
    """Prior masses over occupied clusters plus the new-cluster mass."""
    sizes = np.asarray(sizes, dtype=float)
    if sizes.sum() != N - 1:
        raise CountMismatch(f"cluster sizes sum to {sizes.sum()}, expected N-1={N - 1}")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    denom = N - 1 + alpha
    return sizes / denom, alpha / denom


def new_cluster_marginal(y: np.ndarray, beta: float) -> float:
    """log p(y | beta) with the multinomial parameter integrated out."""
    y = np.asarray(y, dtype=float)
    V = len(y)
    return float(
        gammaln(V * beta)
        - gammaln(y.sum() + V * beta)
        + np.sum(gammaln(y + beta) - gammaln(beta))
    )


def sample_alpha(
    K: int, N: int, alpha_old: float, shape: float, rate: float, rng: np.random.Generator
) -> float:
    """Auxiliary-variable update of the CRP concentration.

    Draws eta ~ Beta(alpha+1, N), then alpha from a two-component Gamma
    mixture with odds (shape+K-1) : N*(rate - log eta).
    """
    eta = rng.beta(alpha_old + 1.0, N)
    rate_new = rate - np.log(eta)
    odds = (shape + K - 1.0) / (N * rate_new)
    pi = odds / (1.0 + odds)
    if rng.random() < pi:
        alpha = rng.gamma(shape + K, 1.0 / rate_new)
    else:
        alpha = rng.gamma(shape + K - 1.0, 1.0 / rate_new)
    if alpha > ALPHA_CAP:
        warnings.warn("alpha hit its cap", CapHit)
        alpha = ALPHA_CAP
    return float(max(alpha, np.finfo(float).tiny))


def update_beta(counts: np.ndarray, beta_old: float, tol: float = 1e-8, max_iter: int = 100) -> float:
    """Fixed-point update of the symmetric Dirichlet concentration.

    ``counts`` is the V x K per-cluster feature count matrix. Iterates the
    digamma ratio to relative change < tol; degenerate (all-zero) counts
    leave beta unchanged. Uniform data pushes beta upward, capped and flagged.
    """
    counts = np.asarray(counts, dtype=float)
    if counts.ndim != 2:
        raise ValueError("counts must be V x K")
    totals = counts.sum(axis=0)
    live = totals > 0
    if not np.any(live):
        return beta_old
    counts = counts[:, live]
    totals = totals[live]
    V = counts.shape[0]

    # if the update still grows at the cap, the optimum lies beyond it
    # (e.g. perfectly uniform counts push beta to infinity)
    num_cap = np.sum(digamma(counts + BETA_CAP) - digamma(BETA_CAP))
    den_cap = V * np.sum(digamma(totals + V * BETA_CAP) - digamma(V * BETA_CAP))
    if den_cap > 0 and num_cap / den_cap > 1.0:
        warnings.warn("beta hit its cap", CapHit)
        return BETA_CAP

    beta = beta_old
    for _ in range(max_iter):
        num = np.sum(digamma(counts + beta) - digamma(beta))
        den = V * np.sum(digamma(totals + V * beta) - digamma(V * beta))
        if den <= 0 or num <= 0:
            break
        beta_new = beta * num / den
        if beta_new > BETA_CAP:
            warnings.warn("beta hit its cap", CapHit)
            return BETA_CAP
        if abs(beta_new - beta) / beta <= tol:
            return float(beta_new)
        beta = beta_new
    return float(beta)


def _dirichlet_draw(params: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    g = rng.gamma(np.maximum(params, 1e-12))
    g = np.maximum(g, _PHI_FLOOR)
    return g / g.sum()


def _corpus_loglik(Y: np.ndarray, z: np.ndarray, log_phi: np.ndarray) -> float:
    return float(np.sum(Y * log_phi[:, z]))


def gibbs_run(Y: np.ndarray, hp: ModelHyperparams) -> SampleTrace:
    """Run the Gibbs sampler and return the post-burn-in trace.

    Initialization is seeded k-means++ on the binary columns with
    ceil(N/10) clusters; each sweep resamples assignments (with the
    marginal likelihood for newborn clusters), the cluster parameter
    columns, the CRP concentration, and the Dirichlet concentration.
    """
    Y = np.asarray(Y, dtype=np.int64)
    V, N = Y.shape
    if N < 2:
        raise ValueError("need at least two solutions")

    rng = np.random.default_rng(hp.seed)
    K0 = min(N, max(1, int(np.ceil(N / 10))))
    if K0 == 1:
        z = np.zeros(N, dtype=np.int64)
    else:
        km = KMeans(n_clusters=K0, init="k-means++", n_init=1, random_state=hp.seed)
        z = km.fit_predict(Y.T.astype(float)).astype(np.int64)
        # reindex to drop any empty initial clusters
        _, z = np.unique(z, return_inverse=True)

    K = int(z.max()) + 1
    counts = np.zeros((V, K), dtype=np.int64)  # n_{i,k}
    sizes = np.zeros(K, dtype=np.int64)  # n_k
    for j in range(N):
        counts[:, z[j]] += Y[:, j]
        sizes[z[j]] += 1

    beta = hp.beta
    alpha = rng.gamma(hp.alpha_shape, 1.0 / hp.alpha_rate)
    alpha = float(max(alpha, 1e-3))

    # init phi from smoothed empirical frequencies
    phi = (counts + beta) / (counts + beta).sum(axis=0, keepdims=True)
    log_phi = np.log(np.maximum(phi, _PHI_FLOOR))

    trace = SampleTrace()
    for it in range(hp.iterations):
        for j in range(N):
            k_old = z[j]
            sizes[k_old] -= 1
            counts[:, k_old] -= Y[:, j]
            if sizes[k_old] == 0:
                # delete the emptied cluster and its parameter column
                keep = np.arange(K) != k_old
                counts = counts[:, keep]
                sizes = sizes[keep]
                phi = phi[:, keep]
                log_phi = log_phi[:, keep]
                z[z > k_old] -= 1
                K -= 1

            y = Y[:, j]
            logp = np.empty(K + 1)
            logp[:K] = np.log(sizes) + y @ log_phi
            logp[K] = np.log(alpha) + new_cluster_marginal(y, beta)
            logp -= logp.max()
            p = np.exp(logp)
            p /= p.sum()
            k_new = int(rng.choice(K + 1, p=p))

            if k_new == K:
                new_phi = _dirichlet_draw(y + beta, rng)
                phi = np.column_stack([phi, new_phi])
                log_phi = np.column_stack([log_phi, np.log(np.maximum(new_phi, _PHI_FLOOR))])
                counts = np.column_stack([counts, np.zeros(V, dtype=np.int64)])
                sizes = np.append(sizes, 0)
                K += 1
            z[j] = k_new
            sizes[k_new] += 1
            counts[:, k_new] += y

        for k in range(K):
            phi[:, k] = _dirichlet_draw(counts[:, k] + beta, rng)
        log_phi = np.log(np.maximum(phi, _PHI_FLOOR))

        alpha = sample_alpha(K, N, alpha, hp.alpha_shape, hp.alpha_rate, rng)
        beta = update_beta(counts, beta)

        if it >= hp.burn_in:
            trace.z.append(z.copy())
            trace.phi.append(phi.copy())
            trace.K.append(K)
            trace.alpha.append(alpha)
            trace.beta.append(beta)
            trace.loglik.append(_corpus_loglik(Y, z, log_phi))

    if len(set(trace.K)) == 1 and trace.K[0] == N:
        warnings.warn("K stuck at N for the whole retained trace", NonMixing)
    return trace


def _align_columns(phi: np.ndarray, phi_ref: np.ndarray) -> np.ndarray:
    """Permutation p with phi[:, p] best matching phi_ref, by L1 matching."""
    K = phi.shape[1]
    cost = np.abs(phi[:, :, None] - phi_ref[:, None, :]).sum(axis=0)  # K x K
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(K, dtype=np.int64)
    perm[cols] = rows
    return perm


def summarize_posterior(trace: SampleTrace) -> PosteriorSummary:
    """Mode-K posterior summary with label-switching alignment.

    Restricts to iterations whose K equals the posterior mode (ties toward
    smaller K), aligns each to the max-likelihood iteration by minimum-cost
    matching on parameter columns, then averages parameters and takes
    per-solution label modes.
    """
    if len(trace) == 0:
        raise EmptyTrace("no retained iterations")

    ks = np.asarray(trace.K)
    uniq, cnt = np.unique(ks, return_counts=True)
    K_hat = int(uniq[cnt == cnt.max()].min())
    idx = np.flatnonzero(ks == K_hat)

    lls = np.asarray(trace.loglik)[idx]
    l_max = int(idx[np.argmax(lls)])
    phi_ref = trace.phi[l_max]

    phi_sum = np.zeros_like(phi_ref)
    N = len(trace.z[0])
    label_votes = np.zeros((N, K_hat), dtype=np.int64)
    for i in idx:
        perm = _align_columns(trace.phi[i], phi_ref)
        # perm maps reference column -> source column
        phi_sum += trace.phi[i][:, perm]
        inv = np.empty(K_hat, dtype=np.int64)
        inv[perm] = np.arange(K_hat)
        aligned_z = inv[trace.z[i]]
        label_votes[np.arange(N), aligned_z] += 1

    Phi_hat = phi_sum / len(idx)
    Phi_hat /= Phi_hat.sum(axis=0, keepdims=True)
    z_hat = label_votes.argmax(axis=1)  # argmax ties toward lower cluster id
    return PosteriorSummary(
        K_hat=K_hat, Phi_hat=Phi_hat, z_hat=z_hat, l_max=l_max, retained=len(idx)
    )


def _log_weights(y: np.ndarray, Phi_hat: np.ndarray) -> np.ndarray:
    return np.asarray(y, dtype=float) @ np.log(np.maximum(Phi_hat, _PHI_FLOOR))


def select_representatives_b(Phi_hat: np.ndarray, Y: np.ndarray):
    """One most-likely solution per cluster; ties toward the lowest index.

    A solution that maximizes two clusters represents both (graded once),
    so the distinct index set can be smaller than K.
    """
    from .mlp_s import RepresentativeSet

    Y = np.asarray(Y, dtype=float)
    LL = Y.T @ np.log(np.maximum(Phi_hat, _PHI_FLOOR))  # N x K
    per_cluster = tuple(int(np.argmax(LL[:, k])) for k in range(Phi_hat.shape[1]))
    return RepresentativeSet(indices=per_cluster, method="B")


def grade_b(y: np.ndarray, Phi_hat: np.ndarray, grades: dict) -> float:
    """Likelihood-weighted average of the instructor grades, in log-space."""
    K = Phi_hat.shape[1]
    missing = [k for k in range(K) if k not in grades]
    if missing:
        raise MissingGrades(f"no grade for clusters {missing}")
    lw = _log_weights(y, Phi_hat)
    w = np.exp(lw - lw.max())
    w /= w.sum()
    g = np.array([grades[k] for k in range(K)], dtype=float)
    return float(w @ g)


def round_grade(g: float) -> int:
    """Round half away from zero, for integer MAE reporting."""
    return int(np.floor(abs(g) + 0.5) * np.sign(g)) if g != 0 else 0


@dataclass(frozen=True)
class FeedbackStep:
    v: int
    expected_grade: float
    prob_incorrect: float
    alert: bool


@dataclass(frozen=True)
class FeedbackTrace:
    steps: tuple
    first_alert: int | None  # 1-based expression index, None if no alert


def feedback_trace(
    solution,
    fm,
    Phi_hat: np.ndarray,
    grades: dict,
    g_max: float,
    epsilon: float = 0.5,
) -> FeedbackTrace:
    """Stepwise expected grade and probability-incorrect over solution prefixes.

    An alert fires at the first prefix whose expected grade drops below
    ``g_max - epsilon``; the probability-incorrect is the posterior mass of
    clusters graded below full credit.
    """
    from .features import prefix_vector

    K = Phi_hat.shape[1]
    missing = [k for k in range(K) if k not in grades]
    if missing:
        raise MissingGrades(f"no grade for clusters {missing}")
    g = np.array([grades[k] for k in range(K)], dtype=float)
    below_full = g < g_max

    steps = []
    first_alert = None
    for v in range(1, solution.num_expressions + 1):
        y = prefix_vector(fm, solution, v)
        lw = _log_weights(y, Phi_hat)
        w = np.exp(lw - lw.max())
        w /= w.sum()
        expected = float(w @ g)
        p_inc = float(w[below_full].sum())
        alert = expected < g_max - epsilon
        if alert and first_alert is None:
            first_alert = v
        steps.append(FeedbackStep(v=v, expected_grade=expected, prob_incorrect=p_inc, alert=alert))
    return FeedbackTrace(steps=tuple(steps), first_alert=first_alert)
