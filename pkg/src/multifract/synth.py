"""Synthetic generators with known multifractal properties, used as
oracles in validation: binomial cascades, fractional Brownian motion,
and Gaussian white noise."""

from dataclasses import dataclass

import numpy as np

from .errors import EmbeddingFailure


@dataclass(frozen=True)
class CascadeSpec:
    levels: int
    p: float
    seed: int = None  # when set, the (p, 1-p) pair is shuffled per split

    def __post_init__(self):
        if not 0 < self.p <= 0.5:
            raise ValueError("p must lie in (0, 0.5]")
        if self.levels < 1:
            raise ValueError("levels must be >= 1")


@dataclass(frozen=True)
class FbmSpec:
    n: int
    hurst: float
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.hurst < 1:
            raise ValueError("hurst must lie in (0, 1)")
        if self.n < 2 or self.n & (self.n - 1):
            raise ValueError("n must be a power of two")


def binomial_cascade(spec):
    """Cell masses of a binomial multiplicative cascade over 2^levels cells.

    The deterministic variant always sends weight p left; with a seed the
    left/right assignment is randomized independently per split. Total
    mass is conserved at every level.
    """
    rng = None if spec.seed is None else np.random.default_rng(spec.seed)
    masses = np.array([1.0])
    weights = np.array([spec.p, 1.0 - spec.p])
    for _ in range(spec.levels):
        split = masses[:, None] * weights[None, :]
        if rng is not None:
            flip = rng.integers(0, 2, size=len(masses)).astype(bool)
            split[flip] = split[flip, ::-1]
        masses = split.ravel()
    return masses


def cascade_analytic_hq(p, q):
    """Closed-form generalized Hurst exponent of the binomial cascade:
    H(q) = 1/q - log2(p^q + (1-p)^q)/q, continuous at q=0 by L'Hopital."""
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    q = np.asarray(q, dtype=float)
    scalar = q.ndim == 0
    q = np.atleast_1d(q)
    out = np.empty_like(q)
    nonzero = q != 0
    qs = q[nonzero]
    out[nonzero] = (1.0 - np.log2(p ** qs + (1.0 - p) ** qs)) / qs
    out[~nonzero] = -(np.log(p) + np.log(1.0 - p)) / (2.0 * np.log(2.0))
    return float(out[0]) if scalar else out


def _fgn_autocovariance(lags, hurst):
    k = np.asarray(lags, dtype=float)
    h2 = 2.0 * hurst
    return 0.5 * (np.abs(k + 1) ** h2 - 2.0 * np.abs(k) ** h2 + np.abs(k - 1) ** h2)


def fgn(n, hurst, seed):
    """Fractional Gaussian noise with exact autocovariance via circulant
    embedding. The embedding is doubled on (rare) negative eigenvalues."""
    rng = np.random.default_rng(np.random.PCG64(seed))
    m = 1
    while m < n:
        m <<= 1
    for _ in range(5):
        gamma = _fgn_autocovariance(np.arange(m + 1), hurst)
        circ = np.concatenate([gamma, gamma[-2:0:-1]])
        eig = np.fft.fft(circ).real
        if eig.min() >= -1e-10 * eig.max():
            eig = np.clip(eig, 0.0, None)
            break
        m <<= 1
    else:
        raise EmbeddingFailure(f"no nonnegative embedding for H={hurst}")

    m2 = 2 * m
    coeff = np.zeros(m2, dtype=complex)
    coeff[0] = np.sqrt(eig[0]) * rng.standard_normal()
    coeff[m] = np.sqrt(eig[m]) * rng.standard_normal()
    real = rng.standard_normal(m - 1)
    imag = rng.standard_normal(m - 1)
    half = np.sqrt(eig[1:m] / 2.0) * (real + 1j * imag)
    coeff[1:m] = half
    coeff[m + 1:] = np.conj(half[::-1])
    path = np.fft.fft(coeff).real / np.sqrt(m2)
    return path[:n]


def fbm(spec):
    """Fractional Brownian motion path; increments are fGn."""
    return np.cumsum(fgn(spec.n, spec.hurst, spec.seed))


def gaussian_white_noise(n, seed):
    """i.i.d. standard normal draws, seeded."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(np.random.PCG64(seed))
    return rng.standard_normal(n)
