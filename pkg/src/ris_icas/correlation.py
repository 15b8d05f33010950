"""Correlation matrices of the RIS-cascaded and direct links.

For a transmitter t and receivers r1, r2 the cascaded gains are
``v^T a`` and ``v^T e`` with ``a = h_Rr1 * h_tR`` and ``e = h_Rr2 * h_tR``
(element-wise). Correlations are stored as

    R_r1      = E[conj(a) a^T]
    R_r1,r2   = E[conj(e) a^T]
    R^D_r1,r2 = E[h_tr1 conj(h_tr2)]

so that ``v^H R_r1,r2 v + R^D_r1,r2 = E[h_tRr1 conj(h_tRr2)]``.
Here the transmitter is Bob, r1 is Alice and r2 is Eve.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .channel import ChannelSet, as_coefficients

_HERMITIAN_TOL = 1e-9
_PSD_TOL = 1e-9

AUTO_A = "auto_A"
AUTO_E = "auto_E"
CROSS_AE = "cross_AE"


@dataclass(frozen=True)
class CorrelationModel:
    R_A: np.ndarray
    R_E: np.ndarray
    R_AE: np.ndarray
    Rd_A: float
    Rd_E: float
    Rd_AE: complex
    noise_variance: float = 1.0

    def __post_init__(self):
        R_A = np.array(self.R_A, dtype=complex)
        R_E = np.array(self.R_E, dtype=complex)
        R_AE = np.array(self.R_AE, dtype=complex)
        n = R_A.shape[0]
        for name, mat in (("R_A", R_A), ("R_E", R_E), ("R_AE", R_AE)):
            if mat.shape != (n, n):
                raise ValueError(f"{name} must be {n}x{n}, got {mat.shape}")
        for name, mat in (("R_A", R_A), ("R_E", R_E)):
            scale = max(1.0, float(np.max(np.abs(mat))))
            if np.max(np.abs(mat - mat.conj().T)) > _HERMITIAN_TOL * scale:
                raise ValueError(f"{name} is not Hermitian")
            if np.linalg.eigvalsh(mat).min() < -_PSD_TOL * scale:
                raise ValueError(f"{name} is not positive semi-definite")
        if self.Rd_A < 0 or self.Rd_E < 0:
            raise ValueError("direct-link auto-correlations must be >= 0")
        if abs(self.Rd_AE) ** 2 > self.Rd_A * self.Rd_E * (1 + 1e-9) + 1e-12:
            raise ValueError("|Rd_AE|^2 exceeds Rd_A * Rd_E")
        if self.noise_variance <= 0:
            raise ValueError("noise_variance must be positive")
        for name, mat in (("R_A", R_A), ("R_E", R_E), ("R_AE", R_AE)):
            mat.setflags(write=False)
            object.__setattr__(self, name, mat)
        object.__setattr__(self, "Rd_A", float(self.Rd_A))
        object.__setattr__(self, "Rd_E", float(self.Rd_E))
        object.__setattr__(self, "Rd_AE", complex(self.Rd_AE))

    @property
    def n_elements(self) -> int:
        return self.R_A.shape[0]

    def to_dict(self) -> dict:
        """Plain-data form with complex entries as ``[re, im]`` pairs."""
        def pairs(mat):
            return [[[float(z.real), float(z.imag)] for z in row] for row in mat]

        return {
            "R_A": pairs(self.R_A),
            "R_E": pairs(self.R_E),
            "R_AE": pairs(self.R_AE),
            "Rd_A": self.Rd_A,
            "Rd_E": self.Rd_E,
            "Rd_AE": [self.Rd_AE.real, self.Rd_AE.imag],
            "noise_variance": self.noise_variance,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CorrelationModel":
        def mat(rows):
            return np.array([[complex(re, im) for re, im in row] for row in rows])

        re, im = data["Rd_AE"]
        return cls(
            R_A=mat(data["R_A"]), R_E=mat(data["R_E"]), R_AE=mat(data["R_AE"]),
            Rd_A=data["Rd_A"], Rd_E=data["Rd_E"], Rd_AE=complex(re, im),
            noise_variance=data.get("noise_variance", 1.0),
        )


def analytic_correlation_model(n_elements: int, eve_spatial_rho: float = 0.5,
                               noise_variance: float = 1.0) -> CorrelationModel:
    """Closed-form correlations of the i.i.d. CN(0,1) channel model."""
    if n_elements < 1:
        raise ValueError("n_elements must be >= 1")
    if not 0.0 <= eve_spatial_rho <= 1.0:
        raise ValueError("eve_spatial_rho must lie in [0, 1]")
    eye = np.eye(n_elements, dtype=complex)
    rho = np.conj(complex(eve_spatial_rho))
    return CorrelationModel(
        R_A=eye, R_E=eye.copy(), R_AE=rho * eye,
        Rd_A=1.0, Rd_E=1.0, Rd_AE=rho,
        noise_variance=noise_variance,
    )


def mc_estimate_correlations(sampler: Callable[[int], ChannelSet],
                             n_samples: int,
                             chunk: int = 100_000) -> CorrelationModel:
    """Sample-average estimate of every correlation quantity.

    ``sampler(k)`` must return a batched :class:`ChannelSet` holding ``k``
    independent realizations.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    acc_a = acc_e = acc_ae = 0
    acc_da = acc_de = acc_dae = 0
    noise_variance = None
    done = 0
    while done < n_samples:
        k = min(chunk, n_samples - done)
        ch = sampler(k)
        h_br = np.atleast_2d(ch.h_br)
        a = np.atleast_2d(ch.h_ra) * h_br
        e = np.atleast_2d(ch.h_re) * h_br
        d_a = np.atleast_1d(ch.h_ba)
        d_e = np.atleast_1d(ch.h_be)
        acc_a = acc_a + a.conj().T @ a
        acc_e = acc_e + e.conj().T @ e
        acc_ae = acc_ae + e.conj().T @ a
        acc_da = acc_da + np.sum(np.abs(d_a) ** 2)
        acc_de = acc_de + np.sum(np.abs(d_e) ** 2)
        acc_dae = acc_dae + np.sum(d_a * np.conj(d_e))
        noise_variance = ch.noise_variance
        done += k
    n = float(n_samples)
    R_A = acc_a / n
    R_E = acc_e / n
    # enforce exact Hermitian symmetry lost to summation order
    R_A = 0.5 * (R_A + R_A.conj().T)
    R_E = 0.5 * (R_E + R_E.conj().T)
    return CorrelationModel(
        R_A=R_A, R_E=R_E, R_AE=acc_ae / n,
        Rd_A=acc_da / n, Rd_E=acc_de / n, Rd_AE=acc_dae / n,
        noise_variance=noise_variance,
    )


def correlation_value(model: CorrelationModel, v, which: str = AUTO_A):
    """``v^H R v + R^D`` for the auto (A or E) or cross (A,E) pair."""
    coeffs = as_coefficients(v)
    if coeffs.shape[-1] != model.n_elements:
        raise ValueError(
            f"phase vector has {coeffs.shape[-1]} elements, model has "
            f"{model.n_elements}"
        )
    if which == AUTO_A:
        mat, direct = model.R_A, model.Rd_A
    elif which == AUTO_E:
        mat, direct = model.R_E, model.Rd_E
    elif which == CROSS_AE:
        mat, direct = model.R_AE, model.Rd_AE
    else:
        raise ValueError(f"unknown correlation pair {which!r}")
    value = np.conj(coeffs) @ mat @ coeffs + direct
    if which == CROSS_AE:
        return complex(value)
    return max(float(np.real(value)), 0.0)
