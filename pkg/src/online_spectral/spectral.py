"""Tensor power method, parameter recovery and the online spectral learner.

One prediction runs the whole pipeline on the current reservoir:
second moment -> whitening -> whitened third moment -> power method with
deflation -> (omega, U).  The new observation is inserted into the
reservoir only after the prediction has been made.
"""

from dataclasses import dataclass, field

import numpy as np

from .linalg import RankDeficiencyError, build_whitener
from .model import TopicParams, normalize_columns
from .moments import Reservoir, empirical_m2, empirical_whitened_t3, make_rng
from .tensor_core import as_triples


class DegenerateDecompositionError(ArithmeticError):
    """The power method produced a non-positive eigenvalue.

    ``partial`` holds the factors extracted before the failure.
    """

    def __init__(self, message, partial):
        super().__init__(message)
        self.partial = partial


class DegenerateRecoveryError(ArithmeticError):
    """A recovered word distribution had no positive mass left after clamping."""

    def __init__(self, message, bad_topics):
        super().__init__(message)
        self.bad_topics = bad_topics


@dataclass(frozen=True)
class PowerConfig:
    restarts: int = 50
    iterations: int = 100
    tol: float = 1e-10

    def __post_init__(self):
        if self.restarts < 1 or self.iterations < 1 or self.tol <= 0:
            raise ValueError(f"invalid power-method settings {self}")


@dataclass(frozen=True)
class SpectralFactors:
    lambdas: np.ndarray
    vs: np.ndarray  # K x K, one eigenvector per column

    @property
    def K(self):
        return self.lambdas.shape[0]

    def tensor(self):
        return np.einsum("c,ic,jc,kc->ijk", self.lambdas, self.vs, self.vs, self.vs)


def _apply(T2, V):
    """T(I, v, v) for every column v of V; T2 is T reshaped to (K, K*K)."""
    K, L = V.shape
    return T2 @ (V[:, None, :] * V[None, :, :]).reshape(K * K, L)


def _iterate(T2, V, iterations, tol):
    for _ in range(iterations):
        W = _apply(T2, V)
        norms = np.linalg.norm(W, axis=0)
        norms[norms == 0] = 1.0
        W = W / norms
        done = np.max(np.linalg.norm(W - V, axis=0)) < tol
        V = W
        if done:
            break
    return V


def _cubic_form(T2, V):
    return np.einsum("il,il->l", V, _apply(T2, V))


def tensor_power_method(T, K, cfg=PowerConfig(), rng=None):
    """Extract K robust eigenpairs of a symmetric K x K x K tensor.

    Each extraction runs ``cfg.restarts`` random unit starts for up to
    ``cfg.iterations`` steps of v <- T(I,v,v)/|T(I,v,v)|, keeps the start
    with the largest T(v,v,v) (lowest index on ties), polishes it for
    another ``cfg.iterations`` steps and deflates T by lambda v^(x)3.
    """
    T = np.array(T, dtype=float)
    dim = T.shape[0]
    if T.shape != (dim, dim, dim) or K < 1 or K > dim:
        raise ValueError(f"cannot extract {K} factors from a tensor of shape {T.shape}")
    rng = make_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    lambdas, vs = [], []
    for _ in range(K):
        T2 = T.reshape(dim, dim * dim)
        V = rng.standard_normal((dim, cfg.restarts))
        V /= np.linalg.norm(V, axis=0)
        V = _iterate(T2, V, cfg.iterations, cfg.tol)
        best = int(np.argmax(_cubic_form(T2, V)))
        v = _iterate(T2, V[:, best : best + 1], cfg.iterations, cfg.tol)
        lam = float(_cubic_form(T2, v)[0])
        v = v[:, 0]
        if not lam > 0:
            partial = SpectralFactors(np.array(lambdas), np.array(vs).reshape(-1, dim).T)
            raise DegenerateDecompositionError(
                f"non-positive eigenvalue {lam:.3e} at factor {len(lambdas) + 1} of {K}", partial
            )
        lambdas.append(lam)
        vs.append(v)
        T = T - lam * np.einsum("i,j,k->ijk", v, v, v)
    lambdas = np.array(lambdas)
    vs = np.array(vs).T
    order = np.argsort(-lambdas, kind="stable")
    return SpectralFactors(lambdas[order], vs[:, order])


def raw_recovery(f, wh):
    """omega_i = 1/lambda_i^2 and u_i = lambda_i (W^T)^+ v_i, before any clean-up."""
    if f.vs.shape[0] != wh.K:
        raise ValueError(f"factors live in R^{f.vs.shape[0]}, whitener in R^{wh.K}")
    omega = 1.0 / f.lambdas**2
    U = wh.pinv_transpose() @ (f.vs * f.lambdas)
    return omega, U


def recover_params(f, wh):
    """Recover TopicParams from power-method factors.

    Negative entries are clamped to zero and every vector is rescaled
    back onto its simplex; topics come out sorted by descending omega.
    """
    omega, U = raw_recovery(f, wh)
    U = np.clip(U, 0.0, None)
    sums = U.sum(axis=0)
    bad = np.flatnonzero(sums <= 0)
    if bad.size:
        raise DegenerateRecoveryError(f"topics {bad.tolist()} vanish after clamping", bad)
    return TopicParams(omega / omega.sum(), U / sums).sorted()


@dataclass
class StepDiagnostics:
    t: int
    fallback: str = ""
    rank: int = 0
    lambdas: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _pad(omega, U, d, K):
    """Pad K' < K recovered topics with uniform ones holding the leftover mass."""
    k = omega.shape[0]
    if k < K:
        leftover = max(0.0, 1.0 - float(omega.sum()))
        omega = np.concatenate([omega, np.full(K - k, leftover / (K - k))])
        U = np.hstack([U, np.full((d, K - k), 1.0 / d)])
    if omega.sum() <= 0:
        omega = np.full(K, 1.0 / K)
    return TopicParams(omega / omega.sum(), U).sorted()


def decompose(samples, d, K, cfg=PowerConfig(), rng=None, m2=None, strict=True):
    """Spectral estimate of (omega, U) from a set of word triples.

    With ``strict`` the rank, decomposition and recovery errors propagate.
    Otherwise the estimate degrades gracefully: only the usable rank
    K' <= K is decomposed, topics with non-positive eigenvalues or
    vanishing word mass are dropped, and the result is padded with
    uniform topics.  Returns ``(params, diagnostics)``; params is
    ``None`` when nothing could be recovered.
    """
    samples = as_triples(samples, d)
    diag = StepDiagnostics(t=len(samples) + 1)
    if m2 is None:
        m2 = empirical_m2(samples, d)
    try:
        wh = build_whitener(m2, K)
    except RankDeficiencyError as e:
        if strict or e.rank == 0:
            if strict:
                raise
            diag.fallback = "rank:0"
            return None, diag
        wh = build_whitener(m2, e.rank)
        diag.fallback = f"rank:{e.rank}"
    diag.rank = wh.K
    T = empirical_whitened_t3(samples, wh)
    try:
        factors = tensor_power_method(T, wh.K, cfg, rng)
    except DegenerateDecompositionError as e:
        if strict:
            raise
        factors = e.partial
        diag.fallback = f"degenerate:{factors.K}"
        if factors.K == 0:
            return None, diag
    diag.lambdas = factors.lambdas
    if factors.K == K:
        try:
            return recover_params(factors, wh), diag
        except DegenerateRecoveryError:
            if strict:
                raise
    omega, U = raw_recovery(factors, wh)
    U = np.clip(U, 0.0, None)
    keep = U.sum(axis=0) > 0
    if not keep.all():
        diag.fallback = f"vanished:{int((~keep).sum())}"
    if not keep.any():
        return None, diag
    return _pad(omega[keep], normalize_columns(U[:, keep]), d, K), diag


def offline_recover(samples, d, K, cfg=PowerConfig(), seed=0):
    """One-shot spectral recovery over a whole dataset; errors propagate."""
    params, _ = decompose(samples, d, K, cfg, make_rng(seed), strict=True)
    return params


class SpectralLearner:
    """Online spectral learner over a reservoir of past triples.

    ``step(x)`` returns the model estimated from the triples seen before
    ``x`` and then offers ``x`` to the reservoir.  Degenerate estimates
    never raise; the fallback taken is reported in the diagnostics.
    """

    def __init__(self, d, K, reservoir_size, pm=PowerConfig(), seed=0, rule="uniform",
                 incremental_m2=False):
        if K < 1 or d < 1:
            raise ValueError("d and K must be >= 1")
        reservoir_seed, pm_seed = np.random.SeedSequence(seed).spawn(2)
        self.d = d
        self.K = K
        self.pm = pm
        self.reservoir = Reservoir(
            reservoir_size, make_rng(reservoir_seed), rule, d if incremental_m2 else None
        )
        self.rng = make_rng(pm_seed)
        self.incremental_m2 = incremental_m2
        self.last_params = None
        self.t = 0

    def predict(self):
        t = self.t + 1
        samples = self.reservoir.view()
        if len(samples) < self.K:
            params, diag = TopicParams.uniform(self.d, self.K), StepDiagnostics(t, "warmup")
        else:
            m2 = self.reservoir.m2() if self.incremental_m2 else None
            params, diag = decompose(samples, self.d, self.K, self.pm, self.rng, m2=m2, strict=False)
            diag.t = t
            if params is None:
                if self.last_params is not None:
                    params, diag.fallback = self.last_params, diag.fallback + ";previous"
                else:
                    params, diag.fallback = TopicParams.uniform(self.d, self.K), diag.fallback + ";uniform"
        return params, diag

    def step(self, x):
        params, diag = self.predict()
        self.last_params = params
        self.reservoir.update(x)
        self.t += 1
        return params, diag


class OracleSpectralLearner:
    """Noise-free variant: decomposes the exact average of past distributions.

    At step t the whitener and whitened tensor are built from the exact
    topic prior averaged over steps 1..t-1, so the predicted tensor equals
    that average up to power-method accuracy.
    """

    def __init__(self, model, pm=PowerConfig(), seed=0):
        self.model = model
        self.d = model.params.d
        self.K = model.params.K
        self.pm = pm
        self.rng = make_rng(seed)
        self.t = 0
        self.last_params = None
        self._prior_sum = np.zeros(self.K)

    def predict(self):
        t = self.t + 1
        if t == 1:
            return TopicParams.uniform(self.d, self.K), StepDiagnostics(t, "warmup")
        omega = self._prior_sum / (t - 1)
        U = self.model.params.U
        diag = StepDiagnostics(t)
        live = omega > 0
        m2 = (U[:, live] * omega[live]) @ U[:, live].T
        try:
            wh = build_whitener(0.5 * (m2 + m2.T), int(live.sum()))
        except RankDeficiencyError as e:
            wh = build_whitener(m2, e.rank)
            diag.fallback = f"rank:{e.rank}"
        diag.rank = wh.K
        Y = wh.W.T @ U[:, live]
        T = np.einsum("c,ic,jc,kc->ijk", omega[live], Y, Y, Y)
        try:
            factors = tensor_power_method(T, wh.K, self.pm, self.rng)
        except DegenerateDecompositionError as e:
            factors = e.partial
            diag.fallback = f"degenerate:{factors.K}"
        diag.lambdas = factors.lambdas
        if factors.K == 0:
            return self.last_params or TopicParams.uniform(self.d, self.K), diag
        om, Ur = raw_recovery(factors, wh)
        Ur = normalize_columns(Ur)
        if Ur is None:
            diag.fallback = "vanished"
            return self.last_params or TopicParams.uniform(self.d, self.K), diag
        # topics with zero average mass are padded back with zero weight
        return _pad(om, Ur, self.d, self.K), diag

    def step(self, x=None):
        params, diag = self.predict()
        self.last_params = params
        self.t += 1
        self._prior_sum += self.model.prior(self.t)
        return params, diag
