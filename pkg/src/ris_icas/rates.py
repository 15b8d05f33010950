"""Data-transmission rate and key-generation rates.

Every rate is a function of three link statistics with the noise variance
normalized to one:

* ``z_a`` -- power of the Bob->Alice equivalent channel,
* ``z_e`` -- power of the Bob->Eve equivalent channel,
* ``c``   -- cross-correlation ``E[h_A conj(h_E)]``.

The public rate functions accept either ``(model, v)`` or a precomputed
:class:`LinkStats` in place of ``model`` (with ``v`` omitted).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .correlation import AUTO_A, AUTO_E, CROSS_AE, CorrelationModel, correlation_value

MI_CONSISTENT = "mi_consistent"
AS_PRINTED = "as_printed"
_REGION_TOL = 1e-9


@dataclass(frozen=True)
class RateConfig:
    bandwidth_B: float = 1.0
    probe_time_Ts: float = 1.0
    leak_formula: str = MI_CONSISTENT

    def __post_init__(self):
        if self.bandwidth_B <= 0:
            raise ValueError("bandwidth_B must be positive")
        if self.probe_time_Ts <= 0:
            raise ValueError("probe_time_Ts must be positive")
        if self.leak_formula not in (MI_CONSISTENT, AS_PRINTED):
            raise ValueError(f"unknown leak_formula {self.leak_formula!r}")


DEFAULT_RATES = RateConfig()


class LinkStats(NamedTuple):
    z_a: float
    z_e: float
    c: complex

    @property
    def c_sq(self) -> float:
        return abs(self.c) ** 2


def link_stats(model: CorrelationModel, v) -> LinkStats:
    return LinkStats(
        correlation_value(model, v, AUTO_A),
        correlation_value(model, v, AUTO_E),
        correlation_value(model, v, CROSS_AE),
    )


def _stats(model, v) -> LinkStats:
    if isinstance(model, LinkStats):
        return model
    if v is None:
        raise TypeError("a phase vector is required with a CorrelationModel")
    return link_stats(model, v)


def _check_region(s: LinkStats):
    if s.z_a < 0 or s.z_e < 0:
        raise ValueError("channel powers must be nonnegative")
    if s.c_sq > s.z_a * s.z_e * (1 + _REGION_TOL) + _REGION_TOL:
        raise ValueError(
            f"|c|^2={s.c_sq:.6g} exceeds z_A*z_E={s.z_a * s.z_e:.6g}; "
            "inconsistent correlation model"
        )


def key_rate_sleep(model, v=None, cfg: RateConfig = DEFAULT_RATES) -> float:
    """Key rate I(h_ARB; h_BRA) / T_s while Eve sleeps."""
    z = _stats(model, v).z_a
    if z < 0:
        raise ValueError("z_A must be nonnegative")
    return float(np.log2((z + 1.0) ** 2 / (2.0 * z + 1.0)) / cfg.probe_time_Ts)


def eavesdrop_determinants(s: LinkStats):
    """Determinants (d_AE, d_E, d_ABE) of the estimate covariances, sigma^2 = 1."""
    c2 = s.c_sq
    d_ae = (s.z_a + 1.0) * (s.z_e + 1.0) - c2
    d_e = s.z_e + 1.0
    d_abe = (2.0 * s.z_a + 1.0) * (s.z_e + 1.0) - 2.0 * c2
    return d_ae, d_e, d_abe


def key_rate_eavesdrop(model, v=None, cfg: RateConfig = DEFAULT_RATES) -> float:
    """Key rate conditioned on Eve's estimate, I(h_ARB; h_BRA | h_ARE) / T_s."""
    s = _stats(model, v)
    _check_region(s)
    d_ae, d_e, d_abe = eavesdrop_determinants(s)
    bits = 2.0 * np.log2(d_ae) - np.log2(d_e) - np.log2(d_abe)
    return float(max(bits, 0.0) / cfg.probe_time_Ts)


def leak_rate_eve(model, v=None, cfg: RateConfig = DEFAULT_RATES) -> float:
    """Key information leaked to Eve.

    ``mi_consistent`` gives I(h_ARB; h_ARE) / T_s. ``as_printed`` squares the
    denominator and can go negative.
    """
    s = _stats(model, v)
    _check_region(s)
    joint = (s.z_a + 1.0) * (s.z_e + 1.0)
    d_ae = joint - s.c_sq
    if cfg.leak_formula == AS_PRINTED:
        return float(np.log2(joint / d_ae**2) / cfg.probe_time_Ts)
    return float(max(np.log2(joint / d_ae), 0.0) / cfg.probe_time_Ts)


def key_rate_unified(model, v=None, kappa: int = 0,
                     cfg: RateConfig = DEFAULT_RATES) -> float:
    if kappa == 0:
        return key_rate_sleep(model, v, cfg)
    if kappa == 1:
        return key_rate_eavesdrop(model, v, cfg)
    raise ValueError(f"kappa must be 0 or 1, got {kappa!r}")


def data_rate(model, v=None, cfg: RateConfig = DEFAULT_RATES) -> float:
    """Ergodic-rate upper bound B * log2(1 + z_A)."""
    z = _stats(model, v).z_a
    return float(cfg.bandwidth_B * np.log2(1.0 + z))


def f_of_z(z, w_d: float, w_k: float, cfg: RateConfig = DEFAULT_RATES):
    """Alice's sleeping-Eve utility as a function of her channel power."""
    if abs(w_d + w_k - 1.0) > 1e-12:
        raise ValueError("w_d + w_k must equal 1")
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ValueError("z must be nonnegative")
    out = (w_d * cfg.bandwidth_B * np.log2(1.0 + z)
           + w_k / cfg.probe_time_Ts * np.log2((1.0 + z) ** 2 / (1.0 + 2.0 * z)))
    return float(out) if out.ndim == 0 else out


def estimate_covariance(s: LinkStats) -> np.ndarray:
    """Covariance of (h_ARB_hat, h_BRA_hat, h_ARE_hat) with unit noise."""
    za, ze, c = s.z_a, s.z_e, complex(s.c)
    return np.array([
        [za + 1.0, za, c],
        [za, za + 1.0, c],
        [np.conj(c), np.conj(c), ze + 1.0],
    ], dtype=complex)


def mi_oracle_mc(model, v=None, n_samples: int = 1_000_000,
                 rng: np.random.Generator | None = None,
                 cfg: RateConfig = DEFAULT_RATES):
    """Monte-Carlo estimate of (conditional key rate, leak rate).

    Draws the three estimates from the underlying channel and independent
    noises, forms the sample covariance and plugs its sub-determinants into
    the Gaussian mutual-information formulas.
    """
    if n_samples < 10_000:
        raise ValueError("n_samples must be >= 1e4")
    rng = np.random.default_rng() if rng is None else rng
    s = _stats(model, v)
    _check_region(s)
    # channel pair (h_A, h_E) with covariance [[z_a, c], [c*, z_e]]
    cov_h = np.array([[s.z_a, s.c], [np.conj(s.c), s.z_e]], dtype=complex)
    w, U = np.linalg.eigh(cov_h)
    w = np.clip(w, 0.0, None)
    root = U * np.sqrt(w)
    g = (rng.standard_normal((2, n_samples))
         + 1j * rng.standard_normal((2, n_samples))) / np.sqrt(2.0)
    h = root @ g
    noise = (rng.standard_normal((3, n_samples))
             + 1j * rng.standard_normal((3, n_samples))) / np.sqrt(2.0)
    est = np.vstack([h[0], h[0], h[1]]) + noise
    K = est @ est.conj().T / n_samples
    det = lambda idx: np.linalg.det(K[np.ix_(idx, idx)]).real  # noqa: E731
    d_ae, d_be, d_e, d_abe = det([0, 2]), det([1, 2]), det([2]), det([0, 1, 2])
    if min(d_ae, d_be, d_e, d_abe) <= 0:
        raise ValueError("degenerate sample covariance")
    key = np.log2(d_ae * d_be / (d_e * d_abe)) / cfg.probe_time_Ts
    leak = np.log2(K[0, 0].real * K[2, 2].real / d_ae) / cfg.probe_time_Ts
    return float(key), float(leak)
