"""Liouville superoperators: the generator, its exponential, and step oracles.

The Markovian generator acting on density matrices,

    L[rho] = -i [H, rho] + sum_m ( L_m rho L_m^dag
             - 1/2 L_m^dag L_m rho - 1/2 rho L_m^dag L_m ),

is provided in three interchangeable forms:

* ``apply_generator`` evaluates the formula directly,
* ``generator_matrix`` / ``build_propagator`` give the dense matrix acting
  on column-stacked density matrices and its exponential exp(L t), and
* ``component_derivatives`` gives the block-resolved form of the monitored
  decay model (the four coupled system-sized blocks of the joint state).

Evolution is always done with the dense matrix exponential rather than an
ODE stepper, so correspondence tests downstream carry no integrator error.

``vec``/``unvec`` fix the matrixization convention: *column* stacking,
``rho.reshape(-1, order="F")``.  Under it, vec(A rho B) = (B^T kron A) vec(rho).

The two ``step_*_oracle`` functions are first-order short-step expansions
of the exact propagator, one for a mode starting unexcited and one excited.
They deliberately drop higher-order terms; ``step_oracle_error_band`` is the
absolute error budget of that truncation, and tests compare oracle against
exact propagator only to within that band, never exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import hilbert
from .hilbert import BlockState
from .model import LindbladModel, ModelParams


def vec(rho: np.ndarray) -> np.ndarray:
    """Column-stack a matrix into a vector."""
    return np.asarray(rho, dtype=complex).reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise ValueError("unvec: length is not a perfect square")
    return v.reshape(d, d, order="F")


def apply_generator(model: LindbladModel, rho: np.ndarray) -> np.ndarray:
    """Right-hand side L[rho] of the master equation, evaluated directly."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (model.dim, model.dim):
        raise ValueError("rho: dimension does not match the model")
    h = model.h
    out = -1j * (h @ rho - rho @ h)
    for op in model.lindblad_ops:
        opd = op.conj().T
        opdop = opd @ op
        out += op @ rho @ opd - 0.5 * (opdop @ rho + rho @ opdop)
    return out


def generator_matrix(model: LindbladModel) -> np.ndarray:
    """Dense d^2 x d^2 matrix of the generator on column-stacked matrices."""
    d = model.dim
    eye = np.eye(d, dtype=complex)
    h = model.h
    m = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for op in model.lindblad_ops:
        opdop = op.conj().T @ op
        m += np.kron(op.conj(), op)
        m -= 0.5 * np.kron(eye, opdop)
        m -= 0.5 * np.kron(opdop.T, eye)
    return m


@dataclass(frozen=True)
class Superoperator:
    """Dense linear map on column-stacked density matrices."""

    dim: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.dim**2, self.dim**2):
            raise ValueError("superoperator matrix must be dim^2 x dim^2")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (self.dim, self.dim):
            raise ValueError("rho: dimension does not match the superoperator")
        return unvec(self.matrix @ vec(rho))


def build_propagator(model: LindbladModel, t: float) -> Superoperator:
    """exp(L t) as a dense superoperator; trace-preserving by construction."""
    if t < 0:
        raise ValueError("t: propagation time must be non-negative")
    return Superoperator(
        dim=model.dim,
        matrix=hilbert.matrix_exponential(generator_matrix(model), t),
    )


def component_derivatives(params: ModelParams, blocks: BlockState) -> BlockState:
    """Block-resolved generator of the monitored decay model.

    Acts linearly on the four mode-indexed system blocks:

        d rho00 = -i[H0, rho00] - i k a^dag rho10 + i k rho01 a + g1 rho11
        d rho01 = -i[H0, rho01] - i k a^dag rho11 + i k rho00 a^dag - G rho01
        d rho10 = -i[H0, rho10] - i k a rho00 + i k rho11 a - G rho10
        d rho11 = -i[H0, rho11] - i k a rho01 + i k rho10 a^dag - g1 rho11

    Agrees with ``apply_generator`` on the full model after block
    decomposition, for Hermitian and non-Hermitian inputs alike.
    """
    if blocks.d_sys != params.d_sys:
        raise ValueError("blocks: system dimension does not match params")
    k = params.kappa
    g1 = params.gamma1
    big_g = params.G
    h0 = params.h0_matrix
    a = params.lowering_op
    ad = a.conj().T
    r00, r01, r10, r11 = blocks.rho00, blocks.rho01, blocks.rho10, blocks.rho11

    def comm(x):
        return h0 @ x - x @ h0

    d00 = -1j * comm(r00) - 1j * k * (ad @ r10) + 1j * k * (r01 @ a) + g1 * r11
    d01 = -1j * comm(r01) - 1j * k * (ad @ r11) + 1j * k * (r00 @ ad) - big_g * r01
    d10 = -1j * comm(r10) - 1j * k * (a @ r00) + 1j * k * (r11 @ a) - big_g * r10
    d11 = -1j * comm(r11) - 1j * k * (a @ r01) + 1j * k * (r10 @ ad) - g1 * r11
    return BlockState(rho00=d00, rho01=d01, rho10=d10, rho11=d11)


def _h_eff(params: ModelParams) -> np.ndarray:
    return params.h0_matrix - 1j * (params.kappa**2 / params.G) * hilbert.number_op(
        params.d_sys
    )


def step_unexcited_oracle(params: ModelParams, rho00: np.ndarray) -> BlockState:
    """First-order one-step map for a state with the mode unexcited.

    Starting from rho00 (x) |0><0|, after one step dt:

        rho00 -> E rho00 E^dag            with E = exp(-i H_eff dt)
        rho01 -> (i k / G) rho00 a^dag
        rho11 -> (2 k^2 / G) a rho00 a^dag dt

    Higher-order terms are dropped; see ``step_oracle_error_band``.
    """
    rho00 = np.asarray(rho00, dtype=complex)
    d = params.d_sys
    if rho00.shape != (d, d):
        raise ValueError("rho00: shape must be (d_sys, d_sys)")
    k = params.kappa
    big_g = params.G
    a = params.lowering_op
    ad = a.conj().T
    e = hilbert.matrix_exponential(-1j * _h_eff(params), params.dt)
    r00 = e @ rho00 @ e.conj().T
    r01 = (1j * k / big_g) * (rho00 @ ad)
    r11 = (2.0 * k**2 / big_g) * (a @ rho00 @ ad) * params.dt
    return BlockState(rho00=r00, rho01=r01, rho10=r01.conj().T, rho11=r11)


def step_excited_oracle(params: ModelParams, rho11: np.ndarray) -> BlockState:
    """First-order one-step map for a state with the mode excited.

    Starting from rho11 (x) |1><1|, after one step dt:

        rho00 -> g1 dt E rho11 E^dag + (2 k^2 / G) a^dag rho11 a
        rho01 -> -(i k / G) a^dag rho11
        rho11 -> (1 - (g1 + 2 k^2 / G) dt) E rho11 E^dag

    The first rho00 term is detector absorption of the photon; the second
    (kept deliberately, though tiny) is coherent re-absorption by the system.
    """
    rho11 = np.asarray(rho11, dtype=complex)
    d = params.d_sys
    if rho11.shape != (d, d):
        raise ValueError("rho11: shape must be (d_sys, d_sys)")
    k = params.kappa
    big_g = params.G
    g1 = params.gamma1
    a = params.lowering_op
    ad = a.conj().T
    e = hilbert.matrix_exponential(-1j * _h_eff(params), params.dt)
    evolved = e @ rho11 @ e.conj().T
    r00 = g1 * params.dt * evolved + (2.0 * k**2 / big_g) * (ad @ rho11 @ a)
    r01 = (-1j * k / big_g) * (ad @ rho11)
    r11 = (1.0 - (g1 + 2.0 * k**2 / big_g) * params.dt) * evolved
    return BlockState(rho00=r00, rho01=r01, rho10=r01.conj().T, rho11=r11)


def step_oracle_error_band(params: ModelParams) -> float:
    """Absolute per-block error budget of the one-step oracles.

    The dropped terms are of order (G dt) (kappa/G)^2 from the mode
    transients and (gamma1 dt)^2 from the linearized absorption factor.
    """
    return (params.G * params.dt) * (params.kappa / params.G) ** 2 + (
        params.gamma1 * params.dt
    ) ** 2
