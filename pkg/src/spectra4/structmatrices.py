"""Constant and parameter-dependent 4x4 matrices of the quasi-diagonal transform.

The fundamental system ``M' = (Lambda - 2pJ - qJ1) M`` is conjugated by
``Z(z) U W(t, z)`` into ``Phi' = (i z xi + Q) Phi`` with ``Q = O(z^-3)``.
This module builds every matrix involved and checks the algebraic identities
that make the transform work.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .potentials import OperatorSpec, derivative, evaluate

__all__ = [
    "SpectralParam",
    "IdentityCheck",
    "build_constant",
    "build_lambda",
    "build_z",
    "build_w",
    "build_w_prime",
    "build_xi",
    "build_q0",
    "build_v",
    "verify_identities",
    "quasi_diag_residual",
    "DomainError",
    "CONSTANT_NAMES",
]


class DomainError(ValueError):
    pass


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


_I = 1j
_OMEGA_DIAG = np.array([_I, 1, -1, -_I])

OMEGA = _frozen(np.diag(_OMEGA_DIAG))
U = _frozen(0.5 * np.array([[w**j for w in _OMEGA_DIAG] for j in range(4)]))
J = _frozen([[0, 0, 0, 0], [0, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 0]])
J1 = _frozen([[0, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0], [1, 0, 0, 0]])
A = _frozen(0.25 * np.array([
    [-_I, -1, 1, _I],
    [_I, 1, -1, -_I],
    [_I, 1, -1, -_I],
    [-_I, -1, 1, _I],
]))
A1 = _frozen(0.25 * np.array([
    [-_I, -_I, -_I, -_I],
    [-1, -1, -1, -1],
    [1, 1, 1, 1],
    [_I, _I, _I, _I],
]))
B = _frozen(np.array([
    [0, 1 + _I, 1 - _I, 1],
    [-1 + _I, 0, -1, -1 - _I],
    [-1 - _I, -1, 0, -1 + _I],
    [1, 1 - _I, 1 + _I, 0],
]) / 8)
# entry (3,4) is -2i/16: forced by B + i[B1, omega] = 0
B1 = _frozen(np.array([
    [0, -2, -2, -1],
    [2 * _I, 0, _I, 2 * _I],
    [-2 * _I, -_I, 0, -2 * _I],
    [1, 2, 2, 0],
]) / 16)
B2 = _frozen(np.array([
    [_I, _I, _I, 0],
    [1, 1, 0, 1],
    [-1, 0, -1, -1],
    [0, -_I, -_I, -_I],
]) / 32)
# z^-4 coefficient of W^{-1}(...) - i z xi, per unit 4 p p'.  The last term is
# the pp' part of W^{-2} (the square of the 1/z^2, 1/z^3 corrections) times i z omega.
Q1 = _frozen(
    -_I * A @ B1
    + B @ (B - _I * OMEGA @ B1)
    + _I * B1 @ (A - OMEGA @ B)
    + _I * (B @ B1 + B1 @ B) @ OMEGA
)

_CONSTANTS = {
    "omega": OMEGA,
    "U": U,
    "J": J,
    "J1": J1,
    "A": A,
    "A1": A1,
    "B": B,
    "B1": B1,
    "B2": B2,
    "Q1": Q1,
}
CONSTANT_NAMES = tuple(_CONSTANTS)


def build_constant(name: str) -> np.ndarray:
    try:
        return _CONSTANTS[name]
    except KeyError:
        raise KeyError(f"unknown constant matrix {name!r}; expected one of {CONSTANT_NAMES}") from None


@dataclass(frozen=True)
class SpectralParam:
    """Spectral parameter ``lam`` and its fourth root ``z`` with arg z in (-pi/4, pi/4]."""

    lam: complex
    z: complex

    @classmethod
    def from_lambda(cls, lam: complex) -> "SpectralParam":
        lam = complex(lam)
        # principal branch: Arg lam in (-pi, pi]  =>  arg z in (-pi/4, pi/4]
        return cls(lam, lam ** 0.25 if lam != 0 else 0j)

    @classmethod
    def from_z(cls, z: complex) -> "SpectralParam":
        z = complex(z)
        return cls(z**4, z)

    @property
    def in_sector(self) -> bool:
        """Membership in S = {0 <= arg z < pi/4}."""
        return self.z != 0 and 0.0 <= np.angle(self.z) < np.pi / 4


def _nonzero(z) -> complex:
    z = complex(z)
    if z == 0:
        raise DomainError("z must be nonzero")
    return z


def build_lambda(lam: complex) -> np.ndarray:
    L = np.diag(np.ones(3, dtype=complex), 1)
    L[3, 0] = lam
    return L


def build_z(z: complex) -> np.ndarray:
    iz = _I * complex(z)
    return np.diag([1, iz, iz**2, iz**3])


def build_w(pt: float, ppt: float, z: complex) -> np.ndarray:
    z = _nonzero(z)
    return np.eye(4) - (2 * pt / z**2) * B - (2 * ppt / z**3) * B1


def build_w_prime(ppt: float, pt_dd: float, z: complex) -> np.ndarray:
    """t-derivative of :func:`build_w`, from p' and p''."""
    z = _nonzero(z)
    return -(2 * ppt / z**2) * B - (2 * pt_dd / z**3) * B1


def build_xi(pt: float, z: complex) -> np.ndarray:
    z = _nonzero(z)
    return OMEGA + (pt / (2 * z**2)) * OMEGA.conj().T


def build_q0(pt_dd: float, p_sq: float, qt: float) -> np.ndarray:
    return _I * qt * A1 + 2 * pt_dd * B1 + 4 * _I * p_sq * B2


def build_v(p0: float, z: complex) -> np.ndarray:
    z = _nonzero(z)
    return np.diag(_OMEGA_DIAG + (p0 / (2 * z**2)) * np.conj(_OMEGA_DIAG))


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.residual <= self.tol


def _maxabs(X) -> float:
    return float(np.max(np.abs(X)))


def _zlabel(z) -> str:
    z = complex(z)
    return f"{z.real:g}" if z.imag == 0 else f"{z.real:g}{z.imag:+g}i"


def verify_identities(tol: float = 1e-13, z_samples=(1.0, 2.0, 1 + 1j / 3)) -> list[IdentityCheck]:
    """Max-norm residuals of the algebraic identities behind the transform."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    Ui = np.linalg.inv(U)
    om_star = OMEGA.conj().T
    checks = [
        ("U unitary", _maxabs(U.conj().T @ U - np.eye(4))),
        ("A = U^-1 J U", _maxabs(Ui @ J @ U - A)),
        ("A1 = -U^-1 J1 U", _maxabs(-Ui @ J1 @ U - A1)),
    ]
    for z in z_samples:
        T = build_z(z) @ U
        X = np.linalg.solve(T, build_lambda(complex(z) ** 4) @ T)
        checks.append((f"(ZU)^-1 Lambda ZU = iz omega at z={_zlabel(z)}", _maxabs(X - _I * z * OMEGA)))
    checks += [
        ("[B,omega] + A = omega*/4", _maxabs(B @ OMEGA - OMEGA @ B + A - om_star / 4)),
        ("B + i[B1,omega] = 0", _maxabs(B + _I * (B1 @ OMEGA - OMEGA @ B1))),
        ("B2 = B omega*/4 - A B", _maxabs(B2 - (B @ om_star / 4 - A @ B))),
    ]
    return [IdentityCheck(name, res, tol) for name, res in checks]


def quasi_diag_residual(spec: OperatorSpec, z: complex, samples: int = 64, cond_max: float = 1e12) -> float:
    """sup_t |Q(t,z) - Q0(t)/z^3 - 4 p p' Q1 / z^4| over an equispaced grid.

    ``Q`` is formed exactly from the conjugated equation,
    ``Q = W^-1 (i z omega W - W' + (2ip/z) A W + (iq/z^3) A1 W) - i z xi``,
    so the returned value measures the O(z^-5) remainder.
    """
    z = _nonzero(z)
    t = np.arange(samples) / samples
    p = evaluate(spec.p, t)
    dp = evaluate(derivative(spec.p, 1), t)
    ddp = evaluate(derivative(spec.p, 2), t)
    q = evaluate(spec.q, t)
    worst = 0.0
    for k in range(samples):
        W = build_w(p[k], dp[k], z)
        if np.linalg.cond(W) > cond_max:
            raise DomainError(f"W(t, z) is numerically singular at t={t[k]:g}, z={z}")
        rhs = (
            _I * z * OMEGA @ W
            - build_w_prime(dp[k], ddp[k], z)
            + (2 * _I * p[k] / z) * A @ W
            + (_I * q[k] / z**3) * A1 @ W
        )
        Q_exact = np.linalg.solve(W, rhs) - _I * z * build_xi(p[k], z)
        approx = build_q0(ddp[k], p[k] ** 2, q[k]) / z**3 + (4 * p[k] * dp[k] / z**4) * Q1
        worst = max(worst, _maxabs(Q_exact - approx))
    return worst
