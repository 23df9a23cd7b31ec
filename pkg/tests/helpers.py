import numpy as np

from qeewitness.dephasing_model import PureDephasingModel
from qeewitness.operator_core import thermal_state


def rand_herm(rng, d, scale=1.0):
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return scale * 0.5 * (a + a.conj().T)


def rand_density(rng, d, rank=None):
    g = rng.standard_normal((d, rank or d)) + 1j * rng.standard_normal((d, rank or d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def rand_unitary(rng, d):
    q, r = np.linalg.qr(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def rand_model(rng, d, asymmetric=False, scale=1.0, beta=1.0):
    H = rand_herm(rng, d, scale)
    V1 = rand_herm(rng, d, scale)
    V0 = np.zeros((d, d)) if asymmetric else rand_herm(rng, d, scale)
    model = PureDephasingModel(0.3, -0.7, H, V0, V1)
    return model, thermal_state(H, beta)
