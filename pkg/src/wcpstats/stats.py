"""Closed-form photon-number statistics of pulsed coherent light.

A strongly attenuated pulsed laser emits coherent states, so the number of
photons per pulse is Poisson distributed and the mean photon number ``mu``
is the single parameter that fixes the whole distribution.  This module
collects the closed-form pieces: the Fock-basis overlap of a coherent
state, the Poisson pmf itself, attenuation planning (choosing a neutral
density filter to hit a target ``mu``), and the multi-photon probability.

All functions are pure and stateless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import gammainc

# CODATA 2018 defined values; both are exact by definition of the SI.
PLANCK_CONSTANT = 6.62607015e-34  # J s
SPEED_OF_LIGHT = 299792458.0  # m / s

# Above this count the pmf is evaluated in log space to avoid overflow.
_DIRECT_EVAL_MAX_N = 20


def _check_mu(mu: float) -> float:
    mu = float(mu)
    if not math.isfinite(mu) or mu < 0.0:
        raise ValueError(f"mean photon number must be finite and >= 0, got {mu!r}")
    return mu


def _check_count(n) -> int:
    if isinstance(n, bool):
        raise ValueError(f"photon count must be an integer, got {n!r}")
    if isinstance(n, float):
        if not n.is_integer():
            raise ValueError(f"photon count must be an integer, got {n!r}")
        n = int(n)
    if not isinstance(n, int):
        raise ValueError(f"photon count must be an integer, got {n!r}")
    if n < 0:
        raise ValueError(f"photon count must be >= 0, got {n}")
    return n


def poisson_pmf(mu: float, n: int) -> float:
    """Probability of exactly ``n`` photons in a pulse of mean ``mu``."""
    mu = _check_mu(mu)
    n = _check_count(n)
    if mu == 0.0:
        return 1.0 if n == 0 else 0.0
    if n <= _DIRECT_EVAL_MAX_N:
        return math.exp(-mu) * mu**n / math.factorial(n)
    return math.exp(n * math.log(mu) - mu - math.lgamma(n + 1))


def coherent_fock_probability(mu: float, n: int) -> float:
    """Fock-state occupation probability of a coherent state.

    Returns ``|<n|alpha>|**2`` for a coherent state with ``|alpha|**2 = mu``,
    evaluated through the state's Fock-basis amplitude.  Numerically
    identical to ``poisson_pmf(mu, n)``; keeping both routes makes the
    coherent-state/Poisson identity an executable check rather than an
    assumption.
    """
    mu = _check_mu(mu)
    n = _check_count(n)
    if mu == 0.0:
        return 1.0 if n == 0 else 0.0
    if n <= _DIRECT_EVAL_MAX_N:
        amplitude = math.exp(-mu / 2.0) * math.sqrt(mu) ** n / math.sqrt(math.factorial(n))
        return amplitude * amplitude
    log_amplitude = -mu / 2.0 + 0.5 * n * math.log(mu) - 0.5 * math.lgamma(n + 1)
    return math.exp(2.0 * log_amplitude)


def multi_photon_probability(mu: float) -> float:
    """Probability that a pulse carries two or more photons.

    Equals ``1 - exp(-mu) * (1 + mu)``, i.e. the Poisson tail mass above
    n = 1.  Evaluated with ``expm1`` so the small-``mu`` limit (~ mu**2 / 2)
    keeps full relative precision.
    """
    mu = _check_mu(mu)
    return -math.expm1(-mu) - mu * math.exp(-mu)


@dataclass(frozen=True)
class AttenuationSpec:
    """Source parameters ahead of the neutral-density attenuation stage.

    average_power is in watts, repetition_rate in hertz, wavelength in
    meters.  optical_density is the base-10 attenuation exponent of the
    filter stack (0 means no attenuation).
    """

    average_power: float
    repetition_rate: float
    wavelength: float
    optical_density: float = 0.0

    def __post_init__(self) -> None:
        for name in ("average_power", "repetition_rate", "wavelength"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")
        if not (math.isfinite(self.optical_density) and self.optical_density >= 0):
            raise ValueError(f"optical_density must be >= 0, got {self.optical_density!r}")

    @property
    def energy_per_pulse(self) -> float:
        """Pulse energy in joules (average power over one trigger period)."""
        return self.average_power / self.repetition_rate

    @property
    def photons_per_pulse(self) -> float:
        """Mean photon number before attenuation: E_pulse * lambda / (h c)."""
        return self.energy_per_pulse * self.wavelength / (PLANCK_CONSTANT * SPEED_OF_LIGHT)


def desired_mean_photon(spec: AttenuationSpec) -> float:
    """Mean photon number per pulse after the neutral-density filter.

    The unattenuated photon number per pulse is scaled by 10**(-OD), which
    is taken as exact: no extra coupling loss is attributed to the filter
    stack.
    """
    return spec.photons_per_pulse * 10.0 ** (-spec.optical_density)


def attenuation_for_target(
    average_power: float,
    repetition_rate: float,
    wavelength: float,
    target_mu: float,
) -> float:
    """Optical density that attenuates the given source down to ``target_mu``.

    Inverse of :func:`desired_mean_photon`.  Raises if the target exceeds
    the unattenuated photon number (the filter cannot amplify).
    """
    if not (math.isfinite(target_mu) and target_mu > 0):
        raise ValueError(f"target mean photon number must be > 0, got {target_mu!r}")
    unattenuated = AttenuationSpec(average_power, repetition_rate, wavelength).photons_per_pulse
    if target_mu > unattenuated:
        raise ValueError(
            f"target mu {target_mu} exceeds the unattenuated value {unattenuated:.6g}; "
            "a neutral density filter can only attenuate"
        )
    return math.log10(unattenuated / target_mu)


@dataclass(frozen=True)
class PhotonNumberDistribution:
    """Tabulated Poisson photon-number distribution with explicit tail mass.

    ``probs[n]`` holds p_n for n = 0 .. n_max and ``tail`` carries the
    remaining mass above n_max, so the stored numbers always account for
    the full distribution and normalization stays testable.
    """

    mu: float
    n_max: int
    probs: tuple[float, ...]
    tail: float

    _NORMALIZATION_TOL = 1e-12

    def __post_init__(self) -> None:
        if not (math.isfinite(self.mu) and self.mu > 0):
            raise ValueError(f"mu must be > 0, got {self.mu!r}")
        if self.n_max < 0 or len(self.probs) != self.n_max + 1:
            raise ValueError("probs must hold exactly n_max + 1 entries")
        if not (0.0 <= self.tail <= 1.0):
            raise ValueError(f"tail mass out of range: {self.tail!r}")
        for n, p in enumerate(self.probs):
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"p_{n} out of range: {p!r}")
            if abs(p - poisson_pmf(self.mu, n)) > self._NORMALIZATION_TOL:
                raise ValueError(f"p_{n} inconsistent with mean {self.mu}")
        total = math.fsum(self.probs) + self.tail
        if abs(total - 1.0) > self._NORMALIZATION_TOL:
            raise ValueError(f"probabilities sum to {total!r}, expected 1")

    @classmethod
    def from_mu(cls, mu: float, n_max: int | None = None) -> "PhotonNumberDistribution":
        mu = _check_mu(mu)
        if mu == 0.0:
            raise ValueError("mu must be > 0 for a tabulated distribution")
        if n_max is None:
            # 64 covers mu <= 2 with tail below 1e-50; wider means grow the table.
            n_max = 64 if mu <= 2.0 else max(64, math.ceil(mu + 15.0 * math.sqrt(mu) + 20.0))
        probs = tuple(poisson_pmf(mu, n) for n in range(n_max + 1))
        tail = float(gammainc(n_max + 1, mu))
        return cls(mu=mu, n_max=n_max, probs=probs, tail=tail)

    def probability(self, n: int) -> float:
        n = _check_count(n)
        if n <= self.n_max:
            return self.probs[n]
        return poisson_pmf(self.mu, n)
