"""The secure-transmission game between Alice (RIS phases) and Eve (kappa).

Mixed-strategy machinery works on finite games stored as two payoff
matrices of shape ``(n_alice_actions, 2)``; column ``k`` is Eve's behavior
kappa = k (0 sleeping, 1 eavesdropping).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .channel import PhaseShiftVector, as_coefficients, quantize_phase_vector
from .correlation import CorrelationModel
from .rates import (
    RateConfig,
    data_rate,
    key_rate_unified,
    leak_rate_eve,
)

_SIMPLEX_TOL = 1e-12


@dataclass(frozen=True)
class GameConfig:
    w_d: float = 0.5
    w_k: float = 0.5
    eaves_cost_CE: float = 0.5
    rate_config: RateConfig = field(default_factory=RateConfig)

    def __post_init__(self):
        if not (0.0 <= self.w_d <= 1.0 and 0.0 <= self.w_k <= 1.0):
            raise ValueError("weights must lie in [0, 1]")
        if abs(self.w_d + self.w_k - 1.0) > 1e-9:
            raise ValueError(f"w_d + w_k must equal 1, got {self.w_d + self.w_k}")
        if self.eaves_cost_CE < 0:
            raise ValueError("eaves_cost_CE must be nonnegative")


def _check_dist(p, name):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError(f"{name} must be a nonempty vector")
    if np.any(p < -_SIMPLEX_TOL) or abs(p.sum() - 1.0) > _SIMPLEX_TOL * p.size:
        raise ValueError(f"{name} is not a probability vector")
    return p


@dataclass(frozen=True)
class MixedProfile:
    alice_dist: np.ndarray
    eve_dist: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alice_dist", _check_dist(self.alice_dist, "alice_dist"))
        eve = _check_dist(self.eve_dist, "eve_dist")
        if eve.size != 2:
            raise ValueError("eve_dist must be a distribution over kappa in {0, 1}")
        object.__setattr__(self, "eve_dist", eve)

    @classmethod
    def pure(cls, n_actions: int, action: int, kappa: int) -> "MixedProfile":
        a = np.zeros(n_actions)
        a[action] = 1.0
        e = np.zeros(2)
        e[kappa] = 1.0
        return cls(a, e)

    def distance(self, other: "MixedProfile") -> float:
        return float(max(np.max(np.abs(self.alice_dist - other.alice_dist)),
                         np.max(np.abs(self.eve_dist - other.eve_dist))))


def utility_alice(model, v, kappa: int, cfg: GameConfig) -> float:
    rc = cfg.rate_config
    return (cfg.w_d * data_rate(model, v, rc)
            + cfg.w_k * key_rate_unified(model, v, kappa, rc))


def utility_eve(model, v, kappa: int, cfg: GameConfig) -> float:
    if kappa not in (0, 1):
        raise ValueError("kappa must be 0 or 1")
    if kappa == 0:
        return 0.0
    return leak_rate_eve(model, v, cfg.rate_config) - cfg.eaves_cost_CE


def best_response_eve(model, v, cfg: GameConfig) -> int:
    """Eavesdrop only when the leak strictly beats the cost; ties sleep."""
    return int(leak_rate_eve(model, v, cfg.rate_config) > cfg.eaves_cost_CE)


@dataclass(frozen=True)
class FiniteGame:
    """Bimatrix game: ``u_alice[i, k]`` and ``u_eve[i, k]``."""

    u_alice: np.ndarray
    u_eve: np.ndarray

    def __post_init__(self):
        ua = np.asarray(self.u_alice, dtype=float)
        ue = np.asarray(self.u_eve, dtype=float)
        if ua.ndim != 2 or ua.shape != ue.shape or ua.shape[1] != 2:
            raise ValueError("payoff matrices must both have shape (m, 2)")
        object.__setattr__(self, "u_alice", ua)
        object.__setattr__(self, "u_eve", ue)

    @property
    def n_actions(self) -> int:
        return self.u_alice.shape[0]

    @classmethod
    def from_st_game(cls, actions, model, cfg: GameConfig) -> "FiniteGame":
        ua = [[utility_alice(model, v, k, cfg) for k in (0, 1)] for v in actions]
        ue = [[utility_eve(model, v, k, cfg) for k in (0, 1)] for v in actions]
        return cls(np.array(ua), np.array(ue))


def _as_game(game_or_actions, model=None, cfg=None) -> FiniteGame:
    if isinstance(game_or_actions, FiniteGame):
        return game_or_actions
    return FiniteGame.from_st_game(game_or_actions, model, cfg)


def _check_profile(game: FiniteGame, profile: MixedProfile):
    if profile.alice_dist.size != game.n_actions:
        raise ValueError(
            f"profile covers {profile.alice_dist.size} actions, game has "
            f"{game.n_actions}"
        )


def expected_utilities(game, profile: MixedProfile, model=None, cfg=None):
    """(u_A_bar, u_E_bar) under the product of the two marginals."""
    game = _as_game(game, model, cfg)
    _check_profile(game, profile)
    pa, pe = profile.alice_dist, profile.eve_dist
    return float(pa @ game.u_alice @ pe), float(pa @ game.u_eve @ pe)


def _deviation_gains(game: FiniteGame, profile: MixedProfile):
    pa, pe = profile.alice_dist, profile.eve_dist
    ua_pure = game.u_alice @ pe          # Alice's pure deviations
    ue_pure = pa @ game.u_eve            # Eve's pure deviations
    ua_bar = pa @ ua_pure
    ue_bar = ue_pure @ pe
    return ua_pure - ua_bar, ue_pure - ue_bar


@dataclass(frozen=True)
class NEReport:
    is_ne: bool
    max_gain: float
    alice_gain: float
    eve_gain: float

    def __bool__(self):
        return self.is_ne


def is_ne(game, profile: MixedProfile, model=None, cfg=None,
          tol: float = 1e-9) -> NEReport:
    """Check that no unilateral pure deviation gains more than ``tol``."""
    game = _as_game(game, model, cfg)
    _check_profile(game, profile)
    ga, ge = _deviation_gains(game, profile)
    alice_gain = max(float(ga.max()), 0.0)
    eve_gain = max(float(ge.max()), 0.0)
    worst = max(alice_gain, eve_gain)
    return NEReport(worst <= tol, worst, alice_gain, eve_gain)


def nash_map_step(game, profile: MixedProfile, model=None, cfg=None) -> MixedProfile:
    """One application of Nash's improvement map.

    Each action's probability is raised by its positive deviation gain and
    the result renormalized.
    """
    game = _as_game(game, model, cfg)
    _check_profile(game, profile)
    ga, ge = _deviation_gains(game, profile)
    phi_a = np.maximum(ga, 0.0)
    phi_e = np.maximum(ge, 0.0)
    pa = (profile.alice_dist + phi_a) / (1.0 + phi_a.sum())
    pe = (profile.eve_dist + phi_e) / (1.0 + phi_e.sum())
    return MixedProfile(pa / pa.sum(), pe / pe.sum())


def nash_map_residual(game, profile: MixedProfile, model=None, cfg=None) -> float:
    return nash_map_step(game, profile, model, cfg).distance(profile)


def support_enumeration(game: FiniteGame, tol: float = 1e-12) -> list[MixedProfile]:
    """All equilibria of a nondegenerate bimatrix game with equal-size supports."""
    A, B = game.u_alice, game.u_eve
    m, n = A.shape
    found = []
    for k in range(1, min(m, n) + 1):
        for sa in itertools.combinations(range(m), k):
            for se in itertools.combinations(range(n), k):
                # Eve's mix q makes Alice indifferent over sa, and vice versa
                q = _indifference(A[np.ix_(sa, se)], k)
                p = _indifference(B[np.ix_(sa, se)].T, k)
                if q is None or p is None:
                    continue
                if np.any(q < -tol) or np.any(p < -tol):
                    continue
                pa = np.zeros(m)
                pa[list(sa)] = p
                pe = np.zeros(n)
                pe[list(se)] = q
                pa = np.clip(pa, 0.0, None)
                pe = np.clip(pe, 0.0, None)
                prof = MixedProfile(pa / pa.sum(), pe / pe.sum())
                if is_ne(game, prof, tol=1e-9):
                    found.append(prof)
    return found


def _indifference(M, k):
    """Solve M @ x = u * 1, sum(x) = 1 for the mixing vector x."""
    lhs = np.zeros((k + 1, k + 1))
    lhs[:k, :k] = M
    lhs[:k, k] = -1.0
    lhs[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    try:
        sol = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError:
        return None
    return sol[:k]


# --------------------------------------------------------------------------
# Static game


def power_iteration(mat: np.ndarray, start: np.ndarray, tol: float = 1e-10,
                    max_iter: int = 10_000):
    """Dominant eigenpair of a Hermitian PSD matrix from a given start vector.

    Returns ``(eigenvalue, unit eigenvector, converged)``; convergence means
    the residual ``||R x - lam x||`` dropped below ``tol`` (relative).
    """
    mat = np.asarray(mat, dtype=complex)
    x = np.asarray(start, dtype=complex)
    x = x / np.linalg.norm(x)
    lam = 0.0
    for _ in range(max_iter):
        y = mat @ x
        lam = float(np.real(np.vdot(x, y)))
        if np.linalg.norm(y - lam * x) <= tol * max(1.0, abs(lam)):
            return lam, x, True
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0, x, True
        x = y / norm
    return lam, x, False


def top_eigenpair(mat: np.ndarray, tol: float = 1e-10, max_iter: int = 10_000):
    """Largest eigenvalue and eigenvector, power iteration with eigh fallback.

    Two starts are used: the all-ones vector (exact for scaled identities) and
    a fixed pseudo-random vector that cannot be orthogonal to the dominant
    eigenspace except on a null set.
    """
    mat = np.asarray(mat, dtype=complex)
    n = mat.shape[0]
    rng = np.random.default_rng(0)
    lam, u, ok = power_iteration(mat, np.ones(n), tol, max_iter)
    lam2, u2, ok2 = power_iteration(
        mat, rng.standard_normal(n) + 1j * rng.standard_normal(n), tol, max_iter)
    if lam2 > lam + 1e-9 * max(1.0, abs(lam)):
        lam, u, ok = lam2, u2, ok2
    converged = ok and ok2
    if not converged:
        w, U = np.linalg.eigh(mat)
        lam, u = float(w[-1]), U[:, -1]
    # Rayleigh quotient keeps lam exact for eigenvectors like ones/sqrt(N) of I
    lam = float(np.real(np.vdot(u, mat @ u)) / np.real(np.vdot(u, u)))
    return lam, u, converged


def quadratic_value(mat, v) -> float:
    coeffs = as_coefficients(v)
    return float(np.real(np.conj(coeffs) @ mat @ coeffs))


@dataclass(frozen=True)
class StaticNESolution:
    relaxed_v: np.ndarray
    projected_v: PhaseShiftVector
    quantized_v: PhaseShiftVector
    relaxed_value: float
    projected_value: float
    quantized_value: float
    leak_rate: float
    ne_certified: bool
    power_iteration_converged: bool


def static_ne_solve(model: CorrelationModel, cfg: GameConfig,
                    n_elements: int | None = None,
                    resolution_bits: int = 0) -> StaticNESolution:
    """Phase configuration maximizing ``v^H R_A v`` and its NE certificate.

    The eigenvector solution ``sqrt(N) * u_max`` is reported together with its
    unit-modulus phase projection and the b-bit quantization of that
    projection. The pair (quantized_v, sleep) is certified as an equilibrium
    when the eavesdropping cost covers Eve's leak at quantized_v.
    """
    n = model.n_elements if n_elements is None else n_elements
    if n != model.n_elements:
        raise ValueError("n_elements disagrees with the correlation model")
    lam, u, converged = top_eigenpair(model.R_A)
    # fix the global phase so the first nonzero entry is real positive
    pivot = u[np.argmax(np.abs(u) > 1e-12)]
    u = u * np.conj(pivot) / abs(pivot)
    relaxed_v = np.sqrt(n) * u
    projected = quantize_phase_vector(np.angle(u), 0)
    quantized = quantize_phase_vector(np.angle(u), resolution_bits)
    leak = leak_rate_eve(model, quantized, cfg.rate_config)
    return StaticNESolution(
        relaxed_v=relaxed_v,
        projected_v=projected,
        quantized_v=quantized,
        relaxed_value=n * lam,
        projected_value=quadratic_value(model.R_A, projected),
        quantized_value=quadratic_value(model.R_A, quantized),
        leak_rate=leak,
        ne_certified=bool(cfg.eaves_cost_CE >= leak),
        power_iteration_converged=converged,
    )
