"""Quantum-jump (Monte Carlo wave function) unraveling of the reduced model.

A trajectory is deterministic non-unitary evolution under the effective
Hamiltonian H_eff = H0 - i (kappa^2/G) a^dag a, interrupted by jumps
psi -> a psi that represent detected photons.  Time is discretized in steps
of width dt; a jump recorded at step i is applied after the i-th no-jump
segment, i.e. at t_i = i * dt in the product formula below.

Per step, on the renormalized state, the jump probability is

    q = (2 kappa^2 / G) <a^dag a> dt,

a first-order Bernoulli scheme (not waiting-time inversion), which keeps
the bookkeeping identical to the closed-form pattern probability

    P(jumps at t_1..t_N in [0, T]) = (2 dt kappa^2 / G)^N
        || a e^{-i H_eff (t_N - t_{N-1})} ... a e^{-i H_eff t_1} psi ||^2
        evolved through the final segment T - t_N,

implemented in ``trajectory_probability``.  The sampler carries the
unnormalized state with the sqrt(2 dt kappa^2 / G) factor absorbed at each
jump, so a record's ``weight`` *is* that formula evaluated at its own jump
pattern.  If q ever exceeds 0.1 the first-order scheme is invalid (the
system is too excited) and ``OverExcitedError`` is raised.

Randomness contract
-------------------
The generator is Philox, a counter-based PRNG, keyed by an explicit 64-bit
seed; exactly one uniform is consumed per step.  Ensemble member i uses the
key ``seed ^ i``, so each trajectory's stream is independent of execution
order and batch composition.  The batched kernel reduces with row-wise
``einsum`` sums so its arithmetic per trajectory does not depend on how
many trajectories share the batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import hilbert
from .model import ModelParams, build_reduced_model

MAX_STEP_JUMP_PROBABILITY = 0.1


class OverExcitedError(RuntimeError):
    """Per-step jump probability exceeded 0.1: first-order sampling invalid."""


@dataclass(frozen=True)
class TrajectoryRecord:
    """One realized trajectory.

    jump_steps are 1-based step indices, strictly increasing; final_state is
    the unnormalized system ket at the final time and weight = ||final||^2
    is the realized probability of this jump pattern.
    """

    seed: int
    jump_steps: tuple
    final_state: np.ndarray
    weight: float

    def normalized_state(self) -> np.ndarray:
        norm = float(np.linalg.norm(self.final_state))
        if norm == 0.0:
            raise ValueError("cannot normalize a zero-weight trajectory state")
        return self.final_state / norm


@dataclass(frozen=True)
class EnsembleResult:
    records: list
    checkpoint_steps: tuple
    checkpoint_times: tuple
    checkpoint_averages: tuple  # mean of |psi~><psi~| at each checkpoint


def _n_steps_for(params: ModelParams, total_time: float) -> int:
    n = total_time / params.dt
    n_round = int(round(n))
    if n_round < 1 or abs(n - n_round) > 1e-9 * max(1.0, abs(n)):
        raise ValueError("total_time must be a positive integer multiple of dt")
    return n_round


def no_jump_propagator(params: ModelParams, t: float) -> np.ndarray:
    """exp(-i H_eff t) on the system space."""
    h_eff = build_reduced_model(params).h_eff
    return hilbert.matrix_exponential(-1j * h_eff, t)


def evolve_no_jump(h_eff: np.ndarray, psi: np.ndarray, t: float) -> np.ndarray:
    """Propagate an (un)normalized ket through exp(-i H_eff t).

    The norm never increases when the Hermitian part of h_eff is H0 and the
    anti-Hermitian part is negative semidefinite, as built here.
    """
    if t < 0:
        raise ValueError("t: propagation time must be non-negative")
    return hilbert.matrix_exponential(-1j * np.asarray(h_eff, dtype=complex), t) @ psi


def apply_jump(psi: np.ndarray) -> np.ndarray:
    """Photon detection: psi -> a psi (a zero result is legal, weight zero)."""
    psi = np.asarray(psi, dtype=complex)
    return hilbert.lowering(psi.shape[0]) @ psi


def jump_probability(params: ModelParams, psi_normalized: np.ndarray) -> float:
    """Per-step jump probability q = (2 kappa^2/G) <a^dag a> dt."""
    psi = np.asarray(psi_normalized, dtype=complex)
    n_expect = float(np.vdot(psi, hilbert.number_op(psi.shape[0]) @ psi).real)
    return 2.0 * params.kappa**2 / params.G * n_expect * params.dt


def _trajectory_stream(seed: int) -> np.random.Generator:
    if not 0 <= int(seed) < 2**64:
        raise ValueError("seed: must fit in 64 bits")
    return np.random.Generator(np.random.Philox(key=int(seed)))


def _simulate_batch(seeds, params: ModelParams, n_steps: int, checkpoint_steps):
    """Evolve one batch of trajectories in lockstep.

    Returns (records, checkpoint_sums) where checkpoint_sums[k] is the sum
    over the batch of |psi~><psi~| at checkpoint k.  All per-trajectory
    arithmetic is row-wise, so results do not depend on the batch split.
    """
    n_traj = len(seeds)
    d = params.d_sys
    u_dt = no_jump_propagator(params, params.dt)
    a = hilbert.lowering(d)
    rate_dt = 2.0 * params.kappa**2 / params.G * params.dt
    jump_amp = np.sqrt(rate_dt)
    n_diag = np.arange(d, dtype=float)  # <a^dag a> = sum_n n |psi_n|^2

    uniforms = np.empty((n_traj, n_steps), dtype=float)
    for i, s in enumerate(seeds):
        uniforms[i] = _trajectory_stream(s).random(n_steps)

    psi = np.broadcast_to(params.psi0, (n_traj, d)).copy()
    jump_lists = [[] for _ in range(n_traj)]
    cp_sums = [np.zeros((d, d), dtype=complex) for _ in checkpoint_steps]
    cp_index = {step: k for k, step in enumerate(checkpoint_steps)}

    for step in range(1, n_steps + 1):
        psi = np.einsum("ij,bj->bi", u_dt, psi)
        pops = psi.real**2 + psi.imag**2
        norm2 = pops.sum(axis=1)
        na = pops @ n_diag
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(norm2 > 0.0, rate_dt * na / norm2, 0.0)
        q_max = float(q.max()) if n_traj else 0.0
        if q_max > MAX_STEP_JUMP_PROBABILITY:
            raise OverExcitedError(
                f"per-step jump probability {q_max:.3g} > "
                f"{MAX_STEP_JUMP_PROBABILITY} at step {step}"
            )
        hits = np.nonzero(uniforms[:, step - 1] < q)[0]
        if hits.size:
            psi[hits] = jump_amp * np.einsum("ij,bj->bi", a, psi[hits])
            for i in hits:
                jump_lists[i].append(step)
        k = cp_index.get(step)
        if k is not None:
            norms = np.sqrt(np.einsum("bi,bi->b", psi, psi.conj()).real)
            psi_n = psi / norms[:, None]
            cp_sums[k] += np.einsum("bi,bj->ij", psi_n, psi_n.conj())

    records = [
        TrajectoryRecord(
            seed=int(seeds[i]),
            jump_steps=tuple(jump_lists[i]),
            final_state=psi[i].copy(),
            weight=float(np.vdot(psi[i], psi[i]).real),
        )
        for i in range(n_traj)
    ]
    return records, cp_sums


def sample_trajectory(seed: int, params: ModelParams, total_time: float) -> TrajectoryRecord:
    """Sample one trajectory; deterministic function of (seed, params, T)."""
    n_steps = _n_steps_for(params, total_time)
    records, _ = _simulate_batch([int(seed)], params, n_steps, ())
    return records[0]


def sample_ensemble(
    seed: int,
    params: ModelParams,
    total_time: float,
    n_traj: int,
    checkpoints=None,
    batch_size: int = 512,
) -> EnsembleResult:
    """Sample n_traj trajectories with per-trajectory keys ``seed ^ i``.

    ``checkpoints`` is an optional sequence of times (multiples of dt) at
    which the ensemble mean of |psi~><psi~| is accumulated.
    """
    if n_traj < 1:
        raise ValueError("n_traj: must be >= 1")
    n_steps = _n_steps_for(params, total_time)
    if checkpoints is None:
        checkpoint_steps: tuple = ()
    else:
        checkpoint_steps = tuple(
            _n_steps_for(params, float(t)) for t in checkpoints
        )
        if any(s > n_steps for s in checkpoint_steps):
            raise ValueError("checkpoints: beyond total_time")
        if len(set(checkpoint_steps)) != len(checkpoint_steps):
            raise ValueError("checkpoints: duplicate step")
    seeds = [int(seed) ^ i for i in range(n_traj)]
    records: list = []
    cp_sums = [np.zeros((params.d_sys, params.d_sys), complex) for _ in checkpoint_steps]
    for lo in range(0, n_traj, batch_size):
        batch_records, batch_sums = _simulate_batch(
            seeds[lo : lo + batch_size], params, n_steps, checkpoint_steps
        )
        records.extend(batch_records)
        for k in range(len(checkpoint_steps)):
            cp_sums[k] += batch_sums[k]
    averages = tuple(s / n_traj for s in cp_sums)
    times = tuple(s * params.dt for s in checkpoint_steps)
    return EnsembleResult(
        records=records,
        checkpoint_steps=checkpoint_steps,
        checkpoint_times=times,
        checkpoint_averages=averages,
    )


def trajectory_probability(params: ModelParams, jump_steps, total_time: float) -> float:
    """Closed-form probability of one jump pattern (see module docstring).

    Evaluated segment by segment with matrix exponentials, jump k applied at
    t_k = jump_steps[k] * dt.
    """
    n_steps = _n_steps_for(params, total_time)
    steps = [int(s) for s in jump_steps]
    if any(s < 1 or s > n_steps for s in steps):
        raise ValueError("jump_steps: indices must lie in 1..n_steps")
    if any(b <= a for a, b in zip(steps, steps[1:])):
        raise ValueError("jump_steps: must be strictly increasing")
    h_eff = build_reduced_model(params).h_eff
    a = params.lowering_op
    rate_dt = 2.0 * params.kappa**2 / params.G * params.dt
    psi = params.psi0.copy()
    prev = 0
    for s in steps:
        psi = evolve_no_jump(h_eff, psi, (s - prev) * params.dt)
        psi = a @ psi
        prev = s
    psi = evolve_no_jump(h_eff, psi, (n_steps - prev) * params.dt)
    return float(rate_dt ** len(steps) * np.vdot(psi, psi).real)


def ensemble_average(records, weighted: bool = False) -> np.ndarray:
    """Mean of |psi~><psi~| over records.

    Plain average for sampled records (the sampling measure already carries
    the weights); ``weighted=True`` for enumerated records, where each
    projector is weighted by the record weight and the sum normalized.
    """
    records = list(records)
    if not records:
        raise ValueError("ensemble_average: empty record set")
    d = records[0].final_state.shape[0]
    if any(r.final_state.shape[0] != d for r in records):
        raise ValueError("ensemble_average: records have mixed dimensions")
    acc = np.zeros((d, d), dtype=complex)
    if weighted:
        total = 0.0
        for r in records:
            if r.weight == 0.0:
                continue
            psi = r.normalized_state()
            acc += r.weight * np.outer(psi, psi.conj())
            total += r.weight
        if total == 0.0:
            raise ValueError("ensemble_average: all weights are zero")
        return acc / total
    for r in records:
        psi = r.normalized_state()
        acc += np.outer(psi, psi.conj())
    return acc / len(records)


RECORD_FORMAT_VERSION = 1


def write_records(path, records, params: ModelParams, total_time: float) -> None:
    """Line-oriented record file: one trajectory per line.

    Columns (tab-separated): seed, comma-separated jump steps ('-' if none),
    weight with 17 significant digits.  Header lines start with '#'.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# photocount trajectory records v{RECORD_FORMAT_VERSION}\n")
        fh.write(
            "# kappa=%s gamma1=%s gamma2=%s d_sys=%d dt=%s total_time=%s count=%d\n"
            % (
                format(params.kappa, ".17g"),
                format(params.gamma1, ".17g"),
                format(params.gamma2, ".17g"),
                params.d_sys,
                format(params.dt, ".17g"),
                format(total_time, ".17g"),
                len(records),
            )
        )
        fh.write("# columns: seed\tjump_steps\tweight\n")
        for r in records:
            steps = ",".join(str(s) for s in r.jump_steps) if r.jump_steps else "-"
            fh.write(f"{r.seed}\t{steps}\t{format(r.weight, '.17g')}\n")


def read_records(path):
    """Parse a record file back into (seed, jump_steps, weight) tuples."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            seed_s, steps_s, weight_s = line.split("\t")
            steps = () if steps_s == "-" else tuple(int(x) for x in steps_s.split(","))
            out.append((int(seed_s), steps, float(weight_s)))
    return out
