"""Shared generators for the test suite."""
import numpy as np

from floquetspec.periodic_ode import OperatorSpec

# exact Wigner-von Neumann potential: -u'' + V u = u has the square-integrable
# solution u = sin(t) / (1 + g^2) with g = 2t - sin(2t)
WVN_G = "(2*t - sin(2*t))"
WVN_POTENTIAL = (f"-32*sin(t)*({WVN_G}^3*cos(t) - 3*{WVN_G}^2*sin(t)^3 + {WVN_G}*cos(t) + sin(t)^3)"
                 f"/(1 + {WVN_G}^2)^2")

_TEMPLATES = ("{c}", "{c}*cos(2*pi*t)", "{c}*sin(2*pi*t)^2", "{c}*cos(4*pi*t + 1)", "{c}*exp(cos(2*pi*t))")


def random_coefficient(rng: np.random.Generator, scale: float = 1.0) -> str:
    c = round(float(rng.uniform(-scale, scale)), 6)
    return rng.choice(_TEMPLATES).format(c=f"({c})")


def random_operator(rng: np.random.Generator, n: int, period: float = 1.0) -> OperatorSpec:
    coeffs = [random_coefficient(rng, 2.0)] + [random_coefficient(rng, 0.5) for _ in range(n - 1)] + ["1"]
    return OperatorSpec.from_strings(coeffs, period)


def random_lambda(rng: np.random.Generator, n: int) -> complex:
    # keep the growth over one period far from the blow-up guard
    r = {1: 3.0, 2: 40.0, 3: 30.0, 4: 60.0}[n]
    return complex(rng.uniform(-r / 4, r), rng.uniform(-r / 8, r / 8))


def rk4_fixed(A, ts_out, steps_per_unit: int):
    """Classical RK4 with a fixed step for dU/dt = A(t) U, U(0) = I; independent oracle."""
    n = A(0.0).shape[0]
    U = np.eye(n, dtype=complex)
    t = 0.0
    out = []
    for target in ts_out:
        m = max(1, int(np.ceil((target - t) * steps_per_unit)))
        h = (target - t) / m
        for _ in range(m):
            k1 = A(t) @ U
            k2 = A(t + h / 2) @ (U + h / 2 * k1)
            k3 = A(t + h / 2) @ (U + h / 2 * k2)
            k4 = A(t + h) @ (U + h * k3)
            U = U + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        t = target
        out.append(U.copy())
    return np.array(out)
