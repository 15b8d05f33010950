"""Channel realizations, RIS phase configurations and LS probing.

Complex channel gains are numpy ``complex128`` arrays. A :class:`ChannelSet`
may carry a leading batch axis (shape ``(n, N)`` for RIS links and ``(n,)``
for direct links), which is how the Monte-Carlo routines draw many
realizations at once.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

TWO_PI = 2.0 * np.pi
_GRID_TOL = 1e-9


def crandn(rng: np.random.Generator, size=None) -> np.ndarray:
    """Zero-mean circularly-symmetric complex Gaussian with unit variance."""
    re = rng.standard_normal(size)
    im = rng.standard_normal(size)
    return (re + 1j * im) / np.sqrt(2.0)


@dataclass(frozen=True)
class PhaseShiftVector:
    """Unit-modulus reflection coefficients of an N-element RIS.

    ``resolution_bits == 0`` means continuous phases; otherwise every phase
    sits on the grid ``2*pi*p / 2**b``.
    """

    phases: np.ndarray
    resolution_bits: int = 0

    def __post_init__(self):
        phases = np.array(self.phases, dtype=float).reshape(-1)
        if phases.size == 0:
            raise ValueError("phase vector must have at least one element")
        if self.resolution_bits < 0:
            raise ValueError("resolution_bits must be >= 0")
        if np.any(phases < 0.0) or np.any(phases >= TWO_PI):
            raise ValueError("phases must lie in [0, 2*pi)")
        if self.resolution_bits > 0:
            step = TWO_PI / 2**self.resolution_bits
            idx = phases / step
            if np.any(np.abs(idx - np.round(idx)) > _GRID_TOL):
                raise ValueError(
                    f"phases are not on the {self.resolution_bits}-bit grid"
                )
        phases.setflags(write=False)
        object.__setattr__(self, "phases", phases)

    @property
    def n_elements(self) -> int:
        return self.phases.size

    @property
    def amplitudes(self) -> np.ndarray:
        return np.ones(self.n_elements)

    @property
    def coefficients(self) -> np.ndarray:
        """The complex vector v_theta = exp(j*theta)."""
        return np.exp(1j * self.phases)

    @property
    def grid_indices(self) -> np.ndarray:
        if self.resolution_bits == 0:
            raise ValueError("continuous phase vector has no grid indices")
        step = TWO_PI / 2**self.resolution_bits
        return np.round(self.phases / step).astype(int)

    def __eq__(self, other):
        if not isinstance(other, PhaseShiftVector):
            return NotImplemented
        return (self.resolution_bits == other.resolution_bits
                and np.array_equal(self.phases, other.phases))

    def __hash__(self):
        return hash((self.resolution_bits, self.phases.tobytes()))


def as_coefficients(v) -> np.ndarray:
    """Return the complex coefficient vector of ``v`` (PhaseShiftVector or array)."""
    if isinstance(v, PhaseShiftVector):
        return v.coefficients
    return np.asarray(v, dtype=complex)


def quantize_phase_vector(raw, b: int) -> PhaseShiftVector:
    """Snap angles to the nearest point of the b-bit phase grid.

    Ties go to the smaller grid index; ``b == 0`` only wraps into [0, 2*pi).
    """
    if b < 0:
        raise ValueError("resolution bits must be >= 0")
    angles = np.mod(np.asarray(raw, dtype=float).reshape(-1), TWO_PI)
    if b == 0:
        # mod can return exactly 2*pi for tiny negative inputs
        angles[angles >= TWO_PI] = 0.0
        return PhaseShiftVector(angles, 0)
    levels = 2**b
    step = TWO_PI / levels
    p = np.ceil(angles / step - 0.5).astype(int) % levels
    return PhaseShiftVector(p * step, b)


def phase_vector_from_indices(indices, b: int) -> PhaseShiftVector:
    indices = np.asarray(indices, dtype=int)
    return PhaseShiftVector((indices % 2**b) * (TWO_PI / 2**b), b)


@dataclass(frozen=True)
class ChannelDynamics:
    temporal_rho: float = 0.9
    eve_spatial_rho: float = 0.5

    def __post_init__(self):
        for name in ("temporal_rho", "eve_spatial_rho"):
            val = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {val}")


@dataclass(frozen=True)
class ChannelSet:
    """One coherence interval of channel gains for every link.

    Eve's links are built as ``rho_E * legit + sqrt(1 - rho_E**2) * private``;
    the private parts are kept so that temporal evolution can re-apply the
    spatial coupling.
    """

    h_br: np.ndarray
    h_ra: np.ndarray
    h_re: np.ndarray
    h_ba: np.ndarray
    h_be: np.ndarray
    noise_variance: float = 1.0
    eve_spatial_rho: float = 0.5
    eve_private_ris: np.ndarray = field(default=None, repr=False)
    eve_private_direct: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.h_br.shape != self.h_ra.shape or self.h_re.shape != self.h_ra.shape:
            raise ValueError("RIS link vectors must share one shape")
        if self.noise_variance <= 0:
            raise ValueError("noise_variance must be positive")
        if self.eve_private_ris is None or self.eve_private_direct is None:
            # recover Eve's private components from a hand-built set
            rho = self.eve_spatial_rho
            scale = np.sqrt(1.0 - rho**2)
            if scale > 0:
                g_ris = (self.h_re - rho * self.h_ra) / scale
                g_dir = (self.h_be - rho * self.h_ba) / scale
            else:
                g_ris = np.zeros_like(self.h_re)
                g_dir = np.zeros_like(self.h_be)
            object.__setattr__(self, "eve_private_ris", g_ris)
            object.__setattr__(self, "eve_private_direct", g_dir)

    # reciprocal links within one coherence time
    @property
    def h_ar(self):
        return self.h_ra

    @property
    def h_rb(self):
        return self.h_br

    @property
    def h_ab(self):
        return self.h_ba

    @property
    def n_elements(self) -> int:
        return self.h_br.shape[-1]

    def equivalent_alice(self, v):
        """Bob -> RIS -> Alice equivalent channel h_BRA."""
        return equivalent_channel(v, self.h_br, self.h_ra, self.h_ba)

    def equivalent_bob(self, v):
        """Alice -> RIS -> Bob equivalent channel h_ARB (reciprocal)."""
        return equivalent_channel(v, self.h_ar, self.h_rb, self.h_ab)

    def equivalent_eve(self, v):
        """Bob -> RIS -> Eve equivalent channel, Eve's view of Bob's pilot."""
        return equivalent_channel(v, self.h_br, self.h_re, self.h_be)


def _couple(rho_e, legit, private):
    return rho_e * legit + np.sqrt(1.0 - rho_e**2) * private


def sample_channel_set(n_elements: int, eve_spatial_rho: float,
                       rng: np.random.Generator, size: int | None = None,
                       noise_variance: float = 1.0) -> ChannelSet:
    """Draw i.i.d. CN(0, 1) legitimate links and spatially coupled Eve links.

    With ``size`` given, every array gains a leading batch axis of that length.
    """
    if n_elements < 1:
        raise ValueError("n_elements must be >= 1")
    if not 0.0 <= eve_spatial_rho <= 1.0:
        raise ValueError("eve_spatial_rho must lie in [0, 1]")
    vec_shape = (n_elements,) if size is None else (size, n_elements)
    scal_shape = None if size is None else (size,)
    h_br = crandn(rng, vec_shape)
    h_ra = crandn(rng, vec_shape)
    h_ba = crandn(rng, scal_shape)
    g_ris = crandn(rng, vec_shape)
    g_dir = crandn(rng, scal_shape)
    return ChannelSet(
        h_br=h_br, h_ra=h_ra,
        h_re=_couple(eve_spatial_rho, h_ra, g_ris),
        h_ba=h_ba,
        h_be=_couple(eve_spatial_rho, h_ba, g_dir),
        noise_variance=noise_variance,
        eve_spatial_rho=eve_spatial_rho,
        eve_private_ris=g_ris, eve_private_direct=g_dir,
    )


def _gauss_markov(prev, rho, rng):
    if rho == 1.0:
        return prev
    return rho * prev + np.sqrt(1.0 - rho**2) * crandn(rng, np.shape(prev) or None)


def evolve_channel_set(prev: ChannelSet, dyn: ChannelDynamics,
                       rng: np.random.Generator) -> ChannelSet:
    """First-order Gauss-Markov step of every independent channel component."""
    rho = dyn.temporal_rho
    h_br = _gauss_markov(prev.h_br, rho, rng)
    h_ra = _gauss_markov(prev.h_ra, rho, rng)
    h_ba = _gauss_markov(prev.h_ba, rho, rng)
    g_ris = _gauss_markov(prev.eve_private_ris, rho, rng)
    g_dir = _gauss_markov(prev.eve_private_direct, rho, rng)
    rho_e = dyn.eve_spatial_rho
    return replace(
        prev, h_br=h_br, h_ra=h_ra, h_ba=h_ba,
        h_re=_couple(rho_e, h_ra, g_ris), h_be=_couple(rho_e, h_ba, g_dir),
        eve_spatial_rho=rho_e, eve_private_ris=g_ris, eve_private_direct=g_dir,
    )


def equivalent_channel(v, ris_in, ris_out, direct):
    """Cascaded-plus-direct gain ``ris_out^T diag(v) ris_in + direct``.

    Broadcasts over leading batch axes of the channel arrays.
    """
    coeffs = as_coefficients(v)
    ris_in = np.asarray(ris_in)
    ris_out = np.asarray(ris_out)
    if ris_in.shape[-1] != coeffs.shape[-1] or ris_out.shape[-1] != coeffs.shape[-1]:
        raise ValueError(
            f"dimension mismatch: v has {coeffs.shape[-1]} elements, channels "
            f"have {ris_in.shape[-1]} and {ris_out.shape[-1]}"
        )
    return np.sum(coeffs * ris_out * ris_in, axis=-1) + direct


def ls_estimate(equivalent, pilot, noise):
    """Least-squares estimate ``y * conj(x)`` of the equivalent channel."""
    if not np.all(np.isclose(np.abs(pilot), 1.0, rtol=0.0, atol=1e-9)):
        raise ValueError("pilot must have unit modulus")
    return equivalent + noise * np.conj(pilot)
