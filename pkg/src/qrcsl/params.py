"""Physical constants, collapse parameters and unit conversion.

Everything else in the package works in units with hbar = c = 1, lengths
measured in the collapse length ``a`` and momenta in ``1/a``. The only
place physical units appear is here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

SPEED_OF_LIGHT = 2.99792458e10          # cm/s
HBAR = 1.054571817e-27                  # erg s
HBAR_C_MEV_CM = 1.973269804e-11         # MeV cm
MEV_TO_ERG = 1.602176634e-6
FINE_STRUCTURE = 1.0 / 137.036
PROTON_MASS_MEV = 938.27208816
SECONDS_PER_DAY = 86400.0

# GRW values of the collapse rate and length
GRW_LAMBDA = 1e-16                      # 1/s
GRW_A = 1e-5                            # cm


def mass_to_inverse_length(mass_mev):
    """Inverse reduced Compton wavelength ``Mc/hbar`` in 1/cm."""
    return mass_mev / HBAR_C_MEV_CM


PROTON_INVERSE_COMPTON = mass_to_inverse_length(PROTON_MASS_MEV)


@dataclass(frozen=True)
class ModelParams:
    """Collapse parameters and the particle mass.

    ``M`` is the mass as an inverse length (1/cm). The dimensionless
    ``mu = M a`` is derived on access, never stored.
    """

    lam: float = GRW_LAMBDA
    a: float = GRW_A
    M: float = PROTON_INVERSE_COMPTON
    alpha_fs: float = FINE_STRUCTURE
    c: float = SPEED_OF_LIGHT

    def __post_init__(self):
        bad = [name for name in ("lam", "a", "M", "alpha_fs", "c")
               if not (math.isfinite(getattr(self, name)) and getattr(self, name) > 0)]
        if bad:
            raise ValueError("parameters must be positive and finite: " + ", ".join(bad))

    @property
    def mu(self):
        return self.M * self.a

    @classmethod
    def from_mu(cls, mu, **kwargs):
        """Parameters whose mass is chosen so that ``M a = mu``."""
        a = kwargs.pop("a", GRW_A)
        return cls(a=a, M=mu / a, **kwargs)

    def with_lambda(self, lam):
        return replace(self, lam=lam)

    def energy_unit_erg(self):
        """``hbar c M`` in erg: the rest energy of the particle."""
        return HBAR * self.c * self.M


@dataclass(frozen=True)
class RateResult:
    """A rate in model units together with its physical conversion.

    ``value_physical == value_dimensionless * conversion_factor`` always
    holds; the factor is recomputed from the parameters, not passed in.
    """

    model: str
    value_dimensionless: float
    mu: float
    units: str
    conversion_factor: float
    details: dict = field(default_factory=dict, compare=False)

    @property
    def value_physical(self):
        return self.value_dimensionless * self.conversion_factor
