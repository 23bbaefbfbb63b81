"""Adaptive random-walk Metropolis sampler with convergence diagnostics.

The sampler updates parameter blocks one at a time with Gaussian random-walk
proposals. Proposal scales are tuned by Robbins-Monro adaptation during
warmup only and frozen afterwards, so the retained chain leaves the target
invariant. Chains run on independent Philox streams (see :mod:`poskit.rng`),
which makes every draw a deterministic function of (seed, config, target).

The target callable must be vectorized: it receives an array of shape
``(chains, dim)`` and returns one log-density value per row. Parameters with
bounded support (heterogeneity sds, probabilities) are expected to arrive
log- or logit-transformed, with the Jacobian folded into the log density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import DomainError, InitializationError, StuckChainError
from .rng import stream

DEFAULT_TARGET_ACCEPT_SCALAR = 0.44
DEFAULT_TARGET_ACCEPT_VECTOR = 0.35


@dataclass(frozen=True)
class McmcConfig:
    """Sampler run configuration.

    ``target_accept`` of ``None`` selects the standard optimal-scaling rates
    (0.44 for scalar blocks, 0.35 for multivariate blocks).
    """

    chains: int = 4
    warmup: int = 5000
    keep: int = 10000
    thin: int = 1
    seed: int = 0
    target_accept: float | None = None
    adapt_window: int = 250

    def __post_init__(self):
        if self.chains < 2:
            raise DomainError("need at least 2 chains")
        if self.warmup < 0 or self.keep <= 0:
            raise DomainError("warmup must be >= 0 and keep > 0")
        if self.thin < 1:
            raise DomainError("thin must be >= 1")
        if self.target_accept is not None and not 0.0 < self.target_accept < 1.0:
            raise DomainError("target_accept must lie in (0, 1)")
        if self.adapt_window < 1:
            raise DomainError("adapt_window must be >= 1")

    @property
    def retained_per_chain(self) -> int:
        return self.keep // self.thin

    @property
    def total_retained(self) -> int:
        return self.chains * self.retained_per_chain


class SplitRhatResult(NamedTuple):
    value: float
    degenerate: bool


@dataclass(frozen=True)
class ChainDiagnostics:
    param_names: tuple[str, ...]
    split_rhat: np.ndarray          # per parameter
    ess_bulk: np.ndarray            # per parameter
    accept_rate: np.ndarray         # per block, pooled over chains post-warmup
    degenerate: np.ndarray          # per parameter: zero within-chain variance

    def rhat_table(self) -> dict[str, float]:
        return {n: float(r) for n, r in zip(self.param_names, self.split_rhat)}

    def max_rhat(self) -> float:
        return float(np.max(self.split_rhat))

    def min_ess(self) -> float:
        return float(np.min(self.ess_bulk))


@dataclass(frozen=True)
class McmcResult:
    """Retained draws plus diagnostics. ``by_chain`` has shape (C, N, D)."""

    by_chain: np.ndarray
    diagnostics: ChainDiagnostics
    param_names: tuple[str, ...] = field(default=())

    @property
    def draws(self) -> np.ndarray:
        """Pooled draws, chain-major, shape (C*N, D)."""
        c, n, d = self.by_chain.shape
        return self.by_chain.reshape(c * n, d)

    def dump_csv(self, path) -> None:
        """One row per retained draw: chain, iteration, then parameters."""
        c, n, d = self.by_chain.shape
        names = self.param_names or tuple(f"p{i}" for i in range(d))
        with open(path, "w") as fh:
            fh.write("chain,iteration," + ",".join(names) + "\n")
            for ci in range(c):
                for it in range(n):
                    row = ",".join(repr(float(v)) for v in self.by_chain[ci, it])
                    fh.write(f"{ci},{it},{row}\n")


def _as_blocks(blocks: Sequence[Sequence[int]] | None, dim: int) -> list[np.ndarray]:
    if blocks is None:
        return [np.array([i]) for i in range(dim)]
    out = []
    seen: set[int] = set()
    for b in blocks:
        idx = np.asarray(list(b), dtype=int)
        if idx.size == 0:
            raise DomainError("empty parameter block")
        if np.any(idx < 0) or np.any(idx >= dim):
            raise DomainError("block index out of range")
        if seen.intersection(idx.tolist()):
            raise DomainError("parameter blocks must be disjoint")
        seen.update(idx.tolist())
        out.append(idx)
    if len(seen) != dim:
        raise DomainError("blocks must cover every parameter")
    return out


def _safe_logp(log_density: Callable, x: np.ndarray) -> np.ndarray:
    lp = np.asarray(log_density(x), dtype=float)
    if lp.shape != (x.shape[0],):
        raise DomainError(
            f"log_density must map (chains, dim) to (chains,); got shape {lp.shape}"
        )
    return np.where(np.isnan(lp), -np.inf, lp)


def sample(
    log_density: Callable[[np.ndarray], np.ndarray],
    init: Sequence[float],
    cfg: McmcConfig,
    blocks: Sequence[Sequence[int]] | None = None,
    param_names: Sequence[str] | None = None,
    init_jitter: float = 0.5,
) -> McmcResult:
    """Run the blockwise adaptive RWM sampler.

    Each chain starts from ``init`` plus a chain-specific Gaussian jitter
    (halved until the density is finite). Raises
    :class:`~poskit.errors.InitializationError` if the density is not finite
    at ``init`` itself, and :class:`~poskit.errors.StuckChainError` if a block
    accepts nothing over a full adaptation window during warmup.
    """
    init = np.asarray(init, dtype=float)
    dim = init.size
    block_list = _as_blocks(blocks, dim)
    n_blocks = len(block_list)
    names = tuple(param_names) if param_names is not None else tuple(f"p{i}" for i in range(dim))
    if len(names) != dim:
        raise DomainError("param_names length must match init length")

    lp0 = _safe_logp(log_density, init[None, :])
    if not np.isfinite(lp0[0]):
        raise InitializationError("log density is not finite at the initial point")

    gens = [stream(cfg.seed, c) for c in range(cfg.chains)]
    iters = cfg.warmup + cfg.keep

    # Innovations and uniforms are pre-drawn per chain so stream ownership is
    # explicit while the update loop stays vectorized across chains.
    innov = np.stack([g.standard_normal((iters, dim)) for g in gens], axis=1)
    unif = np.stack([g.random((iters, n_blocks)) for g in gens], axis=1)
    jitter_draws = np.stack([g.standard_normal(dim) for g in gens], axis=0)

    x = np.repeat(init[None, :], cfg.chains, axis=0)
    scale0 = np.array([2.38 / math.sqrt(len(b)) for b in block_list])
    jitter = init_jitter * np.min(scale0)
    for c in range(cfg.chains):
        step = jitter
        for _ in range(30):
            cand = init + step * jitter_draws[c]
            if np.isfinite(_safe_logp(log_density, cand[None, :])[0]):
                x[c] = cand
                break
            step *= 0.5
        # falls back to the exact init, already known finite

    logp = _safe_logp(log_density, x)
    log_scales = np.log(np.repeat(scale0[None, :], cfg.chains, axis=0))

    target = np.array(
        [
            cfg.target_accept
            if cfg.target_accept is not None
            else (DEFAULT_TARGET_ACCEPT_SCALAR if len(b) == 1 else DEFAULT_TARGET_ACCEPT_VECTOR)
            for b in block_list
        ]
    )

    retained = np.empty((cfg.chains, cfg.retained_per_chain, dim))
    kept = 0
    window_accepts = np.zeros((cfg.chains, n_blocks), dtype=int)
    post_accepts = np.zeros(n_blocks, dtype=float)

    for it in range(iters):
        warm = it < cfg.warmup
        for bi, idx in enumerate(block_list):
            prop = x.copy()
            prop[:, idx] += np.exp(log_scales[:, bi])[:, None] * innov[it][:, idx]
            lp_prop = _safe_logp(log_density, prop)
            accept = np.log(unif[it][:, bi]) < (lp_prop - logp)
            x[accept] = prop[accept]
            logp[accept] = lp_prop[accept]
            if warm:
                t = it + 1
                gamma = t ** -0.6
                log_scales[:, bi] += gamma * (accept.astype(float) - target[bi])
                window_accepts[:, bi] += accept
            else:
                post_accepts[bi] += accept.mean()
        if warm and (it + 1) % cfg.adapt_window == 0:
            if np.any(window_accepts == 0):
                c, bi = np.argwhere(window_accepts == 0)[0]
                raise StuckChainError(
                    f"chain {c}, block {bi}: no acceptances over a full "
                    f"adaptation window of {cfg.adapt_window} iterations"
                )
            window_accepts[:] = 0
        if not warm:
            k = it - cfg.warmup
            if k % cfg.thin == 0 and kept < cfg.retained_per_chain:
                retained[:, kept, :] = x
                kept += 1

    rhat = np.empty(dim)
    ess = np.empty(dim)
    degen = np.zeros(dim, dtype=bool)
    for d in range(dim):
        res = split_rhat(retained[:, :, d])
        rhat[d] = res.value
        degen[d] = res.degenerate
        ess[d] = ess_bulk(retained[:, :, d])

    diagnostics = ChainDiagnostics(
        param_names=names,
        split_rhat=rhat,
        ess_bulk=ess,
        accept_rate=post_accepts / cfg.keep,
        degenerate=degen,
    )
    return McmcResult(by_chain=retained, diagnostics=diagnostics, param_names=names)


def split_rhat(chains: np.ndarray) -> SplitRhatResult:
    """Split-R-hat (between/within variance ratio) for one parameter.

    ``chains`` has shape (C, N) with C >= 2 and N >= 4. Chains are split in
    half before comparing, so single-chain drift is also detected. Returns
    1.0 with the degenerate flag when every split half has zero variance.
    """
    chains = np.asarray(chains, dtype=float)
    if chains.ndim != 2 or chains.shape[0] < 2 or chains.shape[1] < 4:
        raise DomainError("split_rhat needs at least 2 chains of at least 4 draws")
    halves = _split_halves(chains)
    n = halves.shape[1]
    w = halves.var(axis=1, ddof=1).mean()
    if w == 0.0:
        return SplitRhatResult(1.0, True)
    b = n * halves.mean(axis=1).var(ddof=1)
    var_plus = (n - 1) / n * w + b / n
    return SplitRhatResult(float(np.sqrt(var_plus / w)), False)


def ess_bulk(chains: np.ndarray) -> float:
    """Effective sample size from pooled split-chain autocorrelations.

    Uses the initial-positive-sequence truncation of the paired
    autocorrelation sums; degenerate (zero-variance) input returns the total
    draw count.
    """
    chains = np.asarray(chains, dtype=float)
    if chains.ndim != 2 or chains.shape[0] < 2 or chains.shape[1] < 4:
        raise DomainError("ess_bulk needs at least 2 chains of at least 4 draws")
    halves = _split_halves(chains)
    m, n = halves.shape
    w = halves.var(axis=1, ddof=1).mean()
    if w == 0.0:
        return float(m * n)
    b = n * halves.mean(axis=1).var(ddof=1)
    var_plus = (n - 1) / n * w + b / n

    acov = np.empty((m, n))
    for i in range(m):
        acov[i] = _autocov(halves[i])
    rho = 1.0 - (w - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0

    # Geyer pairing: accumulate while successive (even, odd) sums stay positive.
    tau = 1.0
    t = 1
    while t + 1 < n:
        pair = rho[t] + rho[t + 1]
        if pair <= 0.0:
            break
        tau += 2.0 * pair
        t += 2
    return float(min(m * n, m * n / tau))


def _split_halves(chains: np.ndarray) -> np.ndarray:
    c, n = chains.shape
    half = n // 2
    return np.concatenate([chains[:, :half], chains[:, half : 2 * half]], axis=0)


def _autocov(x: np.ndarray) -> np.ndarray:
    n = x.size
    xc = x - x.mean()
    size = 1
    while size < 2 * n:
        size <<= 1
    f = np.fft.rfft(xc, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n].real / n
    return acov
