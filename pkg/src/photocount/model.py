"""Builders for the monitored-decay model.

The physical picture: a small system (qubit or truncated oscillator) with
free Hamiltonian H0 decays through a single channel into a two-level
"output mode" that stands in for a photodetector.  The detector absorbs
the output-mode excitation at rate gamma1 and dephases it at the much
larger rate gamma2; the system couples to the mode with strength kappa.
The combination G = gamma1/2 + 2*gamma2 damps the output-mode coherences
and sets the decoherence time-scale of everything downstream.

Two descriptions are produced here:

* the *full* Lindblad model on the joint (system x mode) space, with
  Hamiltonian H0 (x) 1 + kappa (a^dag (x) b + a (x) b^dag) and Lindblad
  operators sqrt(gamma1) (1 (x) b) and sqrt(gamma2) (1 (x) sigma_z); and
* the *reduced* model on the system alone, obtained by eliminating the
  fast-damped mode: a single jump operator a at rate 2*kappa^2/G plus the
  non-Hermitian effective Hamiltonian H0 - i (kappa^2/G) a^dag a.

Rate hierarchy gamma2 >> gamma1 >> kappa and projection spacing
1/G << dt << 1/gamma1 are advisory: violations emit ``RegimeWarning``
but never fail, since parameter sweeps deliberately leave the regime.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass

import numpy as np

from . import hilbert


class RegimeWarning(UserWarning):
    """Parameters are outside the weak-coupling / fast-detector regime."""


def _resolve_h0(h0, d_sys: int) -> np.ndarray:
    if h0 is None:
        return np.zeros((d_sys, d_sys), dtype=complex)
    arr = np.asarray(h0, dtype=complex)
    if arr.ndim == 1:
        if arr.shape[0] != d_sys:
            raise ValueError("h0: frequency list length must equal d_sys")
        if np.max(np.abs(arr.imag)) > 0:
            raise ValueError("h0: diagonal frequencies must be real")
        return np.diag(arr.real).astype(complex)
    if arr.ndim == 2:
        if arr.shape != (d_sys, d_sys):
            raise ValueError("h0: explicit matrix must be d_sys x d_sys")
        if not hilbert.is_hermitian(arr, tol=1e-10):
            raise ValueError("h0: explicit matrix must be Hermitian")
        return arr
    raise ValueError("h0: expected None, a frequency list, or a matrix")


def _resolve_initial_state(initial_state, d_sys: int) -> np.ndarray:
    if initial_state is None:
        return hilbert.basis_state(d_sys, 1)  # one quantum of excitation
    if isinstance(initial_state, str):
        if initial_state == "ground":
            return hilbert.basis_state(d_sys, 0)
        if initial_state == "excited":
            return hilbert.basis_state(d_sys, 1)
        raise ValueError(f"initial_state: unknown name {initial_state!r}")
    psi = np.asarray(initial_state, dtype=complex).reshape(-1)
    if psi.shape[0] != d_sys:
        raise ValueError("initial_state: length must equal d_sys")
    norm = float(np.linalg.norm(psi))
    if abs(norm - 1.0) > 1e-8:
        raise ValueError(f"initial_state: must be normalized (norm = {norm:.6g})")
    return psi


@dataclass(frozen=True)
class ModelParams:
    """Physical and discretization parameters of one model instance.

    kappa            system-mode coupling (rad / time), kappa >= 0
    gamma1           output-mode absorption rate (1 / time), > 0
    gamma2           output-mode dephasing rate (1 / time), > 0
    d_sys            system dimension (2 = qubit, n = truncated oscillator)
    h0               system Hamiltonian: None (zero), frequency list, or matrix
    dt               projection spacing / trajectory step (time), > 0
    n_steps          number of projection steps in a history
    initial_state    normalized system ket; None, "ground", "excited", or vector

    All fields are frozen after construction; instances are safe to share.
    """

    kappa: float
    gamma1: float
    gamma2: float
    d_sys: int = 2
    h0: object = None
    dt: float = 0.05
    n_steps: int = 8
    initial_state: object = None

    def __post_init__(self):
        if not np.isfinite(self.kappa) or self.kappa < 0:
            raise ValueError("kappa: must be a finite non-negative real")
        if not np.isfinite(self.gamma1) or self.gamma1 <= 0:
            raise ValueError("gamma1: must be a finite positive real")
        if not np.isfinite(self.gamma2) or self.gamma2 <= 0:
            raise ValueError("gamma2: must be a finite positive real")
        if int(self.d_sys) != self.d_sys or self.d_sys < 2:
            raise ValueError("d_sys: must be an integer >= 2")
        object.__setattr__(self, "d_sys", int(self.d_sys))
        if not np.isfinite(self.dt) or self.dt <= 0:
            raise ValueError("dt: must be a finite positive real")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError("n_steps: must be an integer >= 1")
        object.__setattr__(self, "n_steps", int(self.n_steps))

        h0m = _resolve_h0(self.h0, self.d_sys)
        h0m.setflags(write=False)
        object.__setattr__(self, "_h0_matrix", h0m)
        psi = _resolve_initial_state(self.initial_state, self.d_sys)
        psi.setflags(write=False)
        object.__setattr__(self, "_psi0", psi)

    @property
    def G(self) -> float:
        """Combined output-mode coherence damping rate, gamma1/2 + 2*gamma2."""
        return self.gamma1 / 2.0 + 2.0 * self.gamma2

    @property
    def h0_matrix(self) -> np.ndarray:
        return self._h0_matrix

    @property
    def psi0(self) -> np.ndarray:
        return self._psi0

    @property
    def lowering_op(self) -> np.ndarray:
        return hilbert.lowering(self.d_sys)

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def regime_flags(self) -> list[str]:
        """Advisory messages for parameters outside the intended regime."""
        flags = []
        if self.gamma2 < 10.0 * self.gamma1:
            flags.append(
                f"gamma2 = {self.gamma2:g} is not >> gamma1 = {self.gamma1:g}"
            )
        if self.kappa > 0 and self.gamma1 < 10.0 * self.kappa:
            flags.append(f"gamma1 = {self.gamma1:g} is not >> kappa = {self.kappa:g}")
        if self.dt < 10.0 / self.G:
            flags.append(f"dt = {self.dt:g} is not >> 1/G = {1.0 / self.G:g}")
        if self.dt > 0.1 / self.gamma1:
            flags.append(f"dt = {self.dt:g} is not << 1/gamma1 = {1.0 / self.gamma1:g}")
        n_expect = float(
            np.vdot(self.psi0, hilbert.number_op(self.d_sys) @ self.psi0).real
        )
        if self.kappa * n_expect > 0.1 * self.gamma1:
            flags.append(
                f"kappa*<n> = {self.kappa * n_expect:g} is not << gamma1 = "
                f"{self.gamma1:g} (system too excited)"
            )
        return flags

    def warn_regime(self) -> None:
        for msg in self.regime_flags():
            warnings.warn(msg, RegimeWarning, stacklevel=3)

    def to_dict(self) -> dict:
        h0m = self.h0_matrix
        if np.max(np.abs(h0m)) == 0:
            h0_out: object = "zero"
        elif np.max(np.abs(h0m - np.diag(np.diag(h0m)))) == 0:
            h0_out = [float(x) for x in np.diag(h0m).real]
        else:
            h0_out = [[[float(z.real), float(z.imag)] for z in row] for row in h0m]
        return {
            "kappa": self.kappa,
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
            "d_sys": self.d_sys,
            "h0": h0_out,
            "dt": self.dt,
            "n_steps": self.n_steps,
            "initial_state": [[float(z.real), float(z.imag)] for z in self.psi0],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        h0 = d.get("h0", "zero")
        if h0 == "zero":
            h0 = None
        elif isinstance(h0, list) and h0 and isinstance(h0[0], list) \
                and h0[0] and isinstance(h0[0][0], list):
            h0 = np.array([[complex(re, im) for re, im in row] for row in h0])
        state = d.get("initial_state", None)
        if isinstance(state, list) and state and isinstance(state[0], list):
            state = np.array([complex(re, im) for re, im in state])
        return cls(
            kappa=float(d["kappa"]),
            gamma1=float(d["gamma1"]),
            gamma2=float(d["gamma2"]),
            d_sys=int(d.get("d_sys", 2)),
            h0=h0,
            dt=float(d.get("dt", 0.05)),
            n_steps=int(d.get("n_steps", 8)),
            initial_state=state,
        )


@dataclass(frozen=True)
class LindbladModel:
    """Hamiltonian plus Lindblad operators defining a Markovian generator."""

    h: np.ndarray
    lindblad_ops: tuple
    dim: int

    def __post_init__(self):
        h = np.asarray(self.h, dtype=complex)
        if h.shape != (self.dim, self.dim):
            raise ValueError("h: shape must be (dim, dim)")
        if not hilbert.is_hermitian(h, tol=1e-10):
            raise ValueError("h: must be Hermitian")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)
        ops = []
        for op in self.lindblad_ops:
            op = np.asarray(op, dtype=complex)
            if op.shape != (self.dim, self.dim):
                raise ValueError("lindblad_ops: all operators must match dim")
            op.setflags(write=False)
            ops.append(op)
        object.__setattr__(self, "lindblad_ops", tuple(ops))


def build_total_model(params: ModelParams) -> LindbladModel:
    """Joint (system x mode) Lindblad model of the monitored decay.

    H = H0 (x) 1 + kappa (a^dag (x) b + a (x) b^dag), with mode damping
    sqrt(gamma1) (1 (x) b) and mode dephasing sqrt(gamma2) (1 (x) sigma_z).
    Because sigma_z^2 = 1, the dephasing term of the generic generator
    collapses to gamma2 (sz rho sz - rho).
    """
    params.warn_regime()
    d = params.d_sys
    a = hilbert.lowering(d)
    b = hilbert.lowering(2)
    i_sys = hilbert.identity(d)
    i_mode = hilbert.identity(2)
    h = hilbert.tensor(params.h0_matrix, i_mode) + params.kappa * (
        hilbert.tensor(a.conj().T, b) + hilbert.tensor(a, b.conj().T)
    )
    ops = (
        np.sqrt(params.gamma1) * hilbert.tensor(i_sys, b),
        np.sqrt(params.gamma2) * hilbert.tensor(i_sys, hilbert.pauli_z()),
    )
    return LindbladModel(h=h, lindblad_ops=ops, dim=2 * d)


@dataclass(frozen=True)
class ReducedModel:
    """System-only model after eliminating the fast-damped output mode.

    h_eff   = H0 - i (kappa^2 / G) a^dag a   (non-Hermitian)
    jump_op = a
    rate    = 2 kappa^2 / G, the jump rate per unit excitation
    """

    h_eff: np.ndarray
    jump_op: np.ndarray
    rate: float
    h0: np.ndarray
    dim: int

    def lindblad_model(self) -> LindbladModel:
        """The reduced dynamics as a generic Lindblad model on the system."""
        return LindbladModel(
            h=self.h0,
            lindblad_ops=(np.sqrt(self.rate) * self.jump_op,),
            dim=self.dim,
        )


def build_reduced_model(params: ModelParams) -> ReducedModel:
    params.warn_regime()
    d = params.d_sys
    a = hilbert.lowering(d)
    coeff = params.kappa**2 / params.G
    h_eff = params.h0_matrix - 1j * coeff * hilbert.number_op(d)
    return ReducedModel(
        h_eff=h_eff,
        jump_op=a,
        rate=2.0 * coeff,
        h0=params.h0_matrix.copy(),
        dim=d,
    )


def initial_system_density(params: ModelParams) -> np.ndarray:
    psi = params.psi0
    return np.outer(psi, psi.conj())


def initial_joint_density(params: ModelParams) -> np.ndarray:
    """|psi0><psi0| (x) |0><0| with the mode unexcited."""
    mode_vac = np.zeros((2, 2), dtype=complex)
    mode_vac[0, 0] = 1.0
    return hilbert.tensor(initial_system_density(params), mode_vac)
