"""Pointwise constitutive laws for total Lagrangian elements.

Saint Venant-Kirchhoff and compressible Mooney-Rivlin hyperelasticity,
Kelvin-Voigt damping on the Green-Lagrange strain rate, material tangents
and von Mises post-processing.  Every function accepts a single 3x3
tensor or a batch ``(..., 3, 3)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvertedElementError, UsageError

SVK = "svk"
MOONEY_RIVLIN = "mooney_rivlin"
_MODEL_CODES = {SVK: 0, MOONEY_RIVLIN: 1}
_I3 = np.eye(3)


@dataclass(frozen=True)
class MaterialParams:
    """Material constants for one body.

    For ``model == "svk"`` give ``E`` and ``nu``; for ``"mooney_rivlin"``
    give ``C10``, ``C01`` and ``kappa`` (or ``D1 = 2/kappa`` through
    :meth:`mooney_rivlin`).  ``eta_damp`` and ``lambda_damp`` are the
    Kelvin-Voigt viscosities in Pa*s.
    """

    model: str = SVK
    E: float = 0.0
    nu: float = 0.0
    C10: float = 0.0
    C01: float = 0.0
    kappa: float = 0.0
    density: float = 1000.0
    eta_damp: float = 0.0
    lambda_damp: float = 0.0

    def __post_init__(self):
        if self.model not in _MODEL_CODES:
            raise UsageError(f"unknown material model '{self.model}'")
        if self.model == SVK:
            if not self.E > 0:
                raise UsageError("SVK needs E > 0")
            if not -1.0 < self.nu < 0.5:
                raise UsageError("SVK needs -1 < nu < 0.5")
        else:
            if self.C10 < 0 or self.C01 < 0 or not self.kappa > 0:
                raise UsageError("Mooney-Rivlin needs C10, C01 >= 0 and kappa > 0")
        if self.eta_damp < 0 or self.lambda_damp < 0:
            raise UsageError("damping coefficients must be non-negative")
        if not self.density > 0:
            raise UsageError("density must be positive")

    @classmethod
    def svk(cls, E, nu, density=1000.0, eta_damp=0.0, lambda_damp=0.0):
        return cls(SVK, E=E, nu=nu, density=density, eta_damp=eta_damp, lambda_damp=lambda_damp)

    @classmethod
    def mooney_rivlin(cls, C10, C01, kappa=None, D1=None, density=1000.0,
                      eta_damp=0.0, lambda_damp=0.0):
        if kappa is None:
            if D1 is None or not D1 > 0:
                raise UsageError("give kappa or a positive D1")
            kappa = 2.0 / D1
        return cls(MOONEY_RIVLIN, C10=C10, C01=C01, kappa=kappa, density=density,
                   eta_damp=eta_damp, lambda_damp=lambda_damp)

    @property
    def lame_lambda(self) -> float:
        if self.model != SVK:
            return 0.0
        return self.E * self.nu / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu))

    @property
    def lame_mu(self) -> float:
        if self.model != SVK:
            return 0.0
        return self.E / (2.0 * (1.0 + self.nu))

    @property
    def code(self) -> int:
        return _MODEL_CODES[self.model]

    @property
    def has_damping(self) -> bool:
        return self.eta_damp > 0 or self.lambda_damp > 0

    def kernel_row(self) -> np.ndarray:
        """Packed constants used by the batched kernels."""
        return np.array([self.lame_lambda, self.lame_mu, self.C10, self.C01, self.kappa,
                         self.eta_damp, self.lambda_damp, float(self.code)])

    def wave_speed(self) -> float:
        """Dilatational wave speed estimate (m/s) for step-size advice."""
        if self.model == SVK:
            M = self.lame_lambda + 2 * self.lame_mu
        else:
            M = self.kappa + 8.0 / 3.0 * (self.C10 + self.C01)
        return float(np.sqrt(M / self.density))


def deformation_gradient(nodal_coords, ref_grads) -> np.ndarray:
    """``F = sum_a x_a (x) grad_X N_a``; works on batches ``(..., 10, 3)``."""
    return np.einsum("...ai,...aj->...ij", np.asarray(nodal_coords), np.asarray(ref_grads))


def _T(A):
    return np.swapaxes(A, -1, -2)


def _green(F):
    return 0.5 * (_T(F) @ F - _I3)


def _lame(params):
    return params.lame_lambda, params.lame_mu


def pk1_svk(F, params: MaterialParams) -> np.ndarray:
    """First Piola-Kirchhoff stress of the SVK law."""
    F = np.asarray(F, dtype=np.float64)
    lam, mu = _lame(params)
    E = _green(F)
    trE = np.trace(E, axis1=-2, axis2=-1)[..., None, None]
    S = lam * trE * _I3 + 2.0 * mu * E
    return F @ S


def pk1_svk_from_grad(H, params: MaterialParams) -> np.ndarray:
    """SVK stress from the displacement gradient ``H = F - I``.

    Same value as :func:`pk1_svk` but the strain ``(H + H^T + H^T H)/2``
    is formed without cancellation against the identity.
    """
    H = np.asarray(H, dtype=np.float64)
    lam, mu = _lame(params)
    E = 0.5 * (H + _T(H) + _T(H) @ H)
    trE = np.trace(E, axis1=-2, axis2=-1)[..., None, None]
    S = lam * trE * _I3 + 2.0 * mu * E
    return S + H @ S


def _check_det(F):
    J = np.linalg.det(F)
    if np.any(~(J > 0.0)):
        raise InvertedElementError(f"deformation gradient with det F = {np.min(J):.3e} <= 0")
    return J


def pk1_mr(F, params: MaterialParams) -> np.ndarray:
    """First Piola-Kirchhoff stress of compressible Mooney-Rivlin."""
    F = np.asarray(F, dtype=np.float64)
    J = _check_det(F)
    G = _T(np.linalg.inv(F))
    C = _T(F) @ F
    I1 = np.trace(C, axis1=-2, axis2=-1)
    I2 = 0.5 * (I1 ** 2 - np.einsum("...ij,...ji->...", C, C))
    a = J ** (-2.0 / 3.0)
    b = a * a
    FC = F @ C
    P = (params.C10 * a)[..., None, None] * (2.0 * F - (2.0 / 3.0) * I1[..., None, None] * G)
    P = P + (params.C01 * b)[..., None, None] * (
        2.0 * I1[..., None, None] * F - 2.0 * FC - (4.0 / 3.0) * I2[..., None, None] * G)
    P = P + (params.kappa * (J - 1.0) * J)[..., None, None] * G
    return P


def pk1(F, params: MaterialParams) -> np.ndarray:
    return pk1_svk(F, params) if params.model == SVK else pk1_mr(F, params)


def pk1_viscous(F, Fdot, params: MaterialParams) -> np.ndarray:
    """Kelvin-Voigt stress ``F (2 eta Edot + lambda tr(Edot) I)``."""
    F = np.asarray(F, dtype=np.float64)
    Fdot = np.asarray(Fdot, dtype=np.float64)
    Ed = 0.5 * (_T(Fdot) @ F + _T(F) @ Fdot)
    tr = np.trace(Ed, axis1=-2, axis2=-1)[..., None, None]
    S = 2.0 * params.eta_damp * Ed + params.lambda_damp * tr * _I3
    return F @ S


def strain_energy(F, params: MaterialParams):
    """Stored energy density in J/m^3."""
    F = np.asarray(F, dtype=np.float64)
    if params.model == SVK:
        lam, mu = _lame(params)
        E = _green(F)
        trE = np.trace(E, axis1=-2, axis2=-1)
        return 0.5 * lam * trE ** 2 + mu * np.einsum("...ij,...ij->...", E, E)
    J = _check_det(F)
    C = _T(F) @ F
    Cb = (J ** (-2.0 / 3.0))[..., None, None] * C
    I1 = np.trace(Cb, axis1=-2, axis2=-1)
    I2 = 0.5 * (I1 ** 2 - np.einsum("...ij,...ji->...", Cb, Cb))
    return params.C10 * (I1 - 3.0) + params.C01 * (I2 - 3.0) + 0.5 * params.kappa * (J - 1.0) ** 2


def tangent_svk(F, params: MaterialParams) -> np.ndarray:
    """``A[i,J,k,L] = dP_iJ / dF_kL`` for SVK."""
    F = np.asarray(F, dtype=np.float64)
    lam, mu = _lame(params)
    E = _green(F)
    trE = np.trace(E, axis1=-2, axis2=-1)[..., None, None]
    S = lam * trE * _I3 + 2.0 * mu * E
    A = np.einsum("ik,...JL->...iJkL", _I3, S)
    A = A + lam * np.einsum("...iJ,...kL->...iJkL", F, F)
    A = A + mu * np.einsum("...iL,...kJ->...iJkL", F, F)
    A = A + mu * np.einsum("...iM,...kM,JL->...iJkL", F, F, _I3)
    return A


def tangent_mr(F, params: MaterialParams) -> np.ndarray:
    """``A[i,J,k,L] = dP_iJ / dF_kL`` for Mooney-Rivlin (analytic)."""
    F = np.asarray(F, dtype=np.float64)
    J = _check_det(F)
    G = _T(np.linalg.inv(F))
    C = _T(F) @ F
    B = F @ _T(F)
    FC = F @ C
    I1 = np.trace(C, axis1=-2, axis2=-1)
    I2 = 0.5 * (I1 ** 2 - np.einsum("...ij,...ji->...", C, C))
    a = J ** (-2.0 / 3.0)
    b = a * a
    s = lambda x: np.asarray(x)[..., None, None, None, None]  # noqa: E731
    s2 = lambda x: np.asarray(x)[..., None, None]  # noqa: E731
    dd = np.einsum("ik,JL->iJkL", _I3, _I3)
    GG_cross = np.einsum("...iL,...kJ->...iJkL", G, G)
    outer = lambda X, Y: np.einsum("...iJ,...kL->...iJkL", X, Y)  # noqa: E731

    T1 = 2.0 * F - (2.0 / 3.0) * s2(I1) * G
    d1 = -(2.0 / 3.0) * outer(T1, G) + 2.0 * dd - (4.0 / 3.0) * outer(G, F) \
        + (2.0 / 3.0) * s(I1) * GG_cross
    A = s(params.C10 * a) * d1

    T2 = 2.0 * s2(I1) * F - 2.0 * FC - (4.0 / 3.0) * s2(I2) * G
    dFC = np.einsum("ik,...LJ->...iJkL", _I3, C) + np.einsum("...iL,...kJ->...iJkL", F, F) \
        + np.einsum("...ik,JL->...iJkL", B, _I3)
    dI2 = 2.0 * (s2(I1) * F - FC)
    d2 = -(4.0 / 3.0) * outer(T2, G) + 4.0 * outer(F, F) + 2.0 * s(I1) * dd - 2.0 * dFC \
        - (4.0 / 3.0) * outer(G, dI2) + (4.0 / 3.0) * s(I2) * GG_cross
    A = A + s(params.C01 * b) * d2

    A = A + s(params.kappa * (2.0 * J * J - J)) * outer(G, G) - s(params.kappa * (J * J - J)) * GG_cross
    return A


def tangent(F, params: MaterialParams) -> np.ndarray:
    return tangent_svk(F, params) if params.model == SVK else tangent_mr(F, params)


def tangent_viscous(F, params: MaterialParams) -> np.ndarray:
    """``dP_vis / dFdot`` (symmetric, positive semidefinite)."""
    F = np.asarray(F, dtype=np.float64)
    eta, lam = params.eta_damp, params.lambda_damp
    B = F @ _T(F)
    return eta * (np.einsum("...ik,JL->...iJkL", B, _I3) + np.einsum("...iL,...kJ->...iJkL", F, F)) \
        + lam * np.einsum("...iJ,...kL->...iJkL", F, F)


def cauchy_von_mises(P, F):
    """Von Mises equivalent of the Cauchy stress ``J^-1 P F^T``."""
    P = np.asarray(P, dtype=np.float64)
    F = np.asarray(F, dtype=np.float64)
    J = _check_det(F)
    sig = (P @ _T(F)) / np.asarray(J)[..., None, None]
    dev = sig - (np.trace(sig, axis1=-2, axis2=-1) / 3.0)[..., None, None] * _I3
    return np.sqrt(1.5 * np.einsum("...ij,...ij->...", dev, dev))
