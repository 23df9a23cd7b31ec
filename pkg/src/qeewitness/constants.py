"""Physical constants and numerical tolerances used across the package.

Energies are in meV, times in ps, frequencies in rad/ps, temperatures in K.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

HBAR = 0.6582119569  # meV ps
K_B = 0.08617333262  # meV / K

# SI values, only used to reduce the deformation-potential prefactor
HBAR_SI = 1.054571817e-34  # J s
EV_SI = 1.602176634e-19  # J


@dataclass(frozen=True)
class Tolerances:
    hermitian: float = 1e-12
    trace: float = 1e-12
    positivity: float = -1e-10
    model_hermitian: float = 1e-10
    unitary: float = 1e-10
    negativity_zero: float = 1e-10
    negativity_clamp: float = 1e-13
    separability: float = 1e-10
    commuting: float = 1e-10
    witness_nonzero: float = 1e-8
    closed_form_check: float = 1e-10
    branch_probability: float = 1e-14
    quadrature_rel: float = 1e-8

    def override(self, **values: float) -> "Tolerances":
        known = {f.name for f in fields(self)}
        unknown = set(values) - known
        if unknown:
            raise KeyError(f"unknown tolerance(s): {', '.join(sorted(unknown))}")
        return replace(self, **{k: float(v) for k, v in values.items()})

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


TOL = Tolerances()
