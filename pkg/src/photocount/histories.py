"""Projection histories on the output mode and their decoherence functional.

A history is a length-N bit string (alpha_1 .. alpha_N), alpha_j recording
whether the output mode held a photon (1) or not (0) at the j-th projection.
The projections are P_alpha = 1 (x) |alpha><alpha| on the joint space, and
the decoherence functional on a pair of histories h, h' is

    D[h, h'] = tr{ P_{a_N} e^{L dt}( ... e^{L dt}( P_{a_1} rho_0 P_{a_1'} )
               ... ) P_{a_N'} },

with rho_0 = |psi_0><psi_0| (x) |0><0| and e^{L dt} the exact propagator of
the full model.  Vanishing off-diagonals (h != h') are what licenses reading
the diagonal as classical probabilities; the attained sum-rule precision is

    epsilon = max_{h != h'} |D[h,h']| / sqrt(p(h) p(h')).

Projection placement
--------------------
Two conventions are supported.  The default, ``convention="initial"``,
places the first projection directly on the initial state, giving N
projections separated by N-1 propagation intervals.  The variant
``convention="after_step"`` propagates before every projection (N intervals,
total time N*dt).  They differ by one evolution interval; all entry points
take the flag.

History indexing: bit alpha_1 is the most significant bit of the matrix
index, so index = int("".join(bits), 2).

``full_decoherence_matrix`` fills all 4^N entries by depth-first recursion
over the pair tree, sharing every common prefix: each node carries one
unnormalized joint operator and branches over the four (alpha, alpha')
choices of the next step.  The arithmetic per branch is identical to the
naive per-pair evaluation in ``decoherence_functional``.
"""

from __future__ import annotations

from dataclasses import dataclass

import json

import numpy as np

from . import hilbert
from .liouville import Superoperator, build_propagator
from .model import ModelParams, build_total_model, initial_joint_density

CONVENTIONS = ("initial", "after_step")
DEFAULT_N_CAP = 10
PROBABILITY_FLOOR = 1e-20


def projector(alpha: int, d_sys: int) -> np.ndarray:
    """1 (x) |alpha><alpha| selecting the mode's photon-number sector."""
    if alpha not in (0, 1):
        raise ValueError("alpha: projection outcome must be 0 or 1")
    mode = np.zeros((2, 2), dtype=complex)
    mode[alpha, alpha] = 1.0
    return hilbert.tensor(hilbert.identity(d_sys), mode)


def _project_pair(x: np.ndarray, alpha: int, beta: int) -> np.ndarray:
    """P_alpha x P_beta via block slicing (mode is the fast index)."""
    out = np.zeros_like(x)
    out[alpha::2, beta::2] = x[alpha::2, beta::2]
    return out


def _check_convention(convention: str) -> None:
    if convention not in CONVENTIONS:
        raise ValueError(f"convention: must be one of {CONVENTIONS}")


def _check_bits(bits, n_steps: int) -> list:
    bits = [int(b) for b in bits]
    if len(bits) != n_steps:
        raise ValueError("history length must equal n_steps")
    if any(b not in (0, 1) for b in bits):
        raise ValueError("history bits must be 0 or 1")
    return bits


def bits_to_index(bits) -> int:
    idx = 0
    for b in bits:
        idx = (idx << 1) | int(b)
    return idx


def index_to_bits(index: int, n_steps: int) -> tuple:
    return tuple((index >> (n_steps - 1 - j)) & 1 for j in range(n_steps))


def _propagator(params: ModelParams) -> Superoperator:
    return build_propagator(build_total_model(params), params.dt)


def _pair_branch(params, bits_a, bits_b, convention, prop=None):
    """Final branch operator P..(e^{L dt} .. P rho0 P ..)P.. for one pair."""
    _check_convention(convention)
    n = params.n_steps
    a_bits = _check_bits(bits_a, n)
    b_bits = _check_bits(bits_b, n)
    u = _propagator(params) if prop is None else prop
    x = initial_joint_density(params)
    for j in range(n):
        if j > 0 or convention == "after_step":
            x = u.apply(x)
        x = _project_pair(x, a_bits[j], b_bits[j])
    return x


def decoherence_functional(
    params: ModelParams, bits_a, bits_b, convention: str = "initial"
) -> complex:
    """D[h, h'] for one pair of histories, exact per-pair evaluation."""
    return complex(np.trace(_pair_branch(params, bits_a, bits_b, convention)))


def history_probability(
    params: ModelParams, bits, convention: str = "initial"
) -> float:
    """Diagonal entry p(h) = D[h, h]; cost is N propagator applications."""
    return float(
        np.trace(_pair_branch(params, bits, bits, convention)).real
    )


@dataclass(frozen=True)
class DecoherenceMatrix:
    """All 4^N decoherence-functional entries for N-step histories.

    ``entries[h, h']`` with the bit-string index convention above; row index
    is the unprimed (left) history.
    """

    n_steps: int
    entries: np.ndarray
    params: ModelParams
    convention: str

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        size = 1 << self.n_steps
        if m.shape != (size, size):
            raise ValueError("entries: shape must be 2^N x 2^N")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    def probabilities(self) -> np.ndarray:
        return np.diag(self.entries).real.copy()

    def invariant_summary(self, tol: float = 1e-10) -> dict:
        """Hermiticity / positivity / completeness checks on the matrix."""
        m = self.entries
        herm_dev = float(np.max(np.abs(m - m.conj().T)))
        diag = np.diag(m)
        diag_imag = float(np.max(np.abs(diag.imag)))
        diag_min = float(diag.real.min())
        diag_sum_err = float(abs(diag.real.sum() - 1.0))
        grand = complex(m.sum())
        grand_sum_err = float(abs(grand - 1.0))
        ok = (
            herm_dev <= tol
            and diag_imag <= tol
            and diag_min >= -tol
            and diag_sum_err <= tol
            and grand_sum_err <= tol
        )
        return {
            "hermiticity_dev": herm_dev,
            "diag_imag_max": diag_imag,
            "diag_min": diag_min,
            "diag_sum_err": diag_sum_err,
            "grand_sum_err": grand_sum_err,
            "tol": tol,
            "ok": bool(ok),
        }


def full_decoherence_matrix(
    params: ModelParams, convention: str = "initial", n_cap: int = DEFAULT_N_CAP
) -> DecoherenceMatrix:
    """Fill every pair entry by prefix-sharing depth-first recursion.

    Each tree node holds one unnormalized joint operator; one propagator
    application is shared by the node's four (alpha, alpha') children.
    N is capped (default 10: ~1.4e6 nodes) to keep runs under a minute.
    """
    _check_convention(convention)
    n = params.n_steps
    if n > n_cap:
        raise ValueError(f"n_steps = {n} exceeds the cap {n_cap} for full matrices")
    u = _propagator(params)
    size = 1 << n
    entries = np.zeros((size, size), dtype=complex)

    def descend(x, depth, row, col):
        if depth == n:
            entries[row, col] = np.trace(x)
            return
        y = x if (depth == 0 and convention == "initial") else u.apply(x)
        for alpha in (0, 1):
            for beta in (0, 1):
                descend(
                    _project_pair(y, alpha, beta),
                    depth + 1,
                    (row << 1) | alpha,
                    (col << 1) | beta,
                )

    descend(initial_joint_density(params), 0, 0, 0)
    return DecoherenceMatrix(
        n_steps=n, entries=entries, params=params, convention=convention
    )


@dataclass(frozen=True)
class DecoherenceReport:
    """Attained sum-rule precision of a decoherence matrix.

    attained_epsilon = max over distinct pairs of |D[h,h']| / sqrt(p(h)p(h')),
    restricted to pairs with p(h) p(h') >= floor; pairs below the floor are
    counted separately as trivially decoherent instead of risking 0/0.
    """

    attained_epsilon: float
    worst_pair: tuple
    n_below_floor: int
    floor: float
    epsilon: float
    violating_pairs: tuple

    def to_dict(self) -> dict:
        return {
            "attained_epsilon": self.attained_epsilon,
            "worst_pair": list(self.worst_pair) if self.worst_pair else None,
            "n_below_floor": self.n_below_floor,
            "floor": self.floor,
            "epsilon": self.epsilon,
            "violating_pairs": [list(p) for p in self.violating_pairs],
        }


def decoherence_report(
    dm: DecoherenceMatrix, epsilon: float = 0.0, floor: float = PROBABILITY_FLOOR
) -> DecoherenceReport:
    """Scan all distinct pairs for the attained epsilon and violations.

    A pair violates the criterion when |D[h,h']|^2 >= epsilon^2 p(h) p(h').
    """
    p = dm.probabilities()
    pp = np.outer(p, p)
    mag = np.abs(dm.entries)
    off = ~np.eye(p.size, dtype=bool)
    usable = off & (pp >= floor)
    n_below = int(np.count_nonzero(off & ~usable)) // 2
    if not np.any(usable):
        return DecoherenceReport(0.0, (), n_below, floor, epsilon, ())
    ratios = np.zeros_like(pp)
    ratios[usable] = mag[usable] / np.sqrt(pp[usable])
    worst_flat = int(np.argmax(ratios))
    worst = np.unravel_index(worst_flat, ratios.shape)
    attained = float(ratios[worst])
    violating: tuple = ()
    if epsilon > 0.0:
        rows, cols = np.nonzero(usable & (ratios >= epsilon))
        violating = tuple(
            (int(r), int(c)) for r, c in zip(rows, cols) if r < c
        )
    return DecoherenceReport(
        attained_epsilon=attained,
        worst_pair=(int(worst[0]), int(worst[1])),
        n_below_floor=n_below,
        floor=floor,
        epsilon=epsilon,
        violating_pairs=violating,
    )


@dataclass(frozen=True)
class CoarseGraining:
    """Window-resolved photon classes of the fine-grained diagonal.

    classes maps "no_photon" and "window_k" to summed fine probabilities;
    the window_k class holds histories whose first photon appears in window
    k (steps (k-1)*w+1 .. k*w) and is absorbed (a 0 follows the first run of
    1s) no later than step k*w.  Histories whose first photon survives past
    its window's end, or is never seen absorbed, make up ``leakage``.
    """

    classes: dict
    leakage: float
    window_steps: int

    def total(self) -> float:
        return float(sum(self.classes.values()) + self.leakage)


def coarse_grain_absorption(
    probs, window_steps: int, n_steps: int | None = None
) -> CoarseGraining:
    """Partition fine-history probabilities into absorption-window classes.

    ``probs`` is either a DecoherenceMatrix or the 2^N vector of diagonal
    probabilities (then ``n_steps`` is required).  The window should span at
    least the detector absorption time, window_steps * dt >~ 1/gamma1.
    """
    if isinstance(probs, DecoherenceMatrix):
        n = probs.n_steps
        p = probs.probabilities()
    else:
        if n_steps is None:
            raise ValueError("n_steps: required when passing raw probabilities")
        n = int(n_steps)
        p = np.asarray(probs, dtype=float)
        if p.shape != (1 << n,):
            raise ValueError("probs: length must be 2^n_steps")
    if window_steps < 1:
        raise ValueError("window_steps: must cover at least one step")
    n_windows = (n + window_steps - 1) // window_steps
    classes = {"no_photon": 0.0}
    for k in range(1, n_windows + 1):
        classes[f"window_{k}"] = 0.0
    leakage = 0.0
    for h in range(1 << n):
        prob = float(p[h])
        bits = index_to_bits(h, n)
        if 1 not in bits:
            classes["no_photon"] += prob
            continue
        first = bits.index(1)  # 0-based position of the first photon
        k = first // window_steps + 1
        window_end = k * window_steps  # 1-based last step of window k
        last_one = first
        while last_one + 1 < n and bits[last_one + 1] == 1:
            last_one += 1
        # the witnessing 0 sits at 1-based step last_one + 2, if the string
        # does not end while the mode is still excited
        if last_one + 1 < n and (last_one + 2) <= window_end:
            classes[f"window_{k}"] += prob
        else:
            leakage += prob
    return CoarseGraining(classes=classes, leakage=leakage, window_steps=window_steps)


def _zero_prefix_branch(params, jump_step, convention, prop):
    """Branch operator for bits 0^(s-1) 1 at the detection step s."""
    n = params.n_steps
    if not 1 <= jump_step <= n:
        raise ValueError("jump_step: must lie in 1..n_steps")
    if convention == "initial" and jump_step < 2:
        raise ValueError(
            "jump_step: must be >= 2 under the 'initial' convention "
            "(the mode starts empty, so the first projection cannot detect)"
        )
    x = initial_joint_density(params)
    for j in range(1, jump_step + 1):
        if j > 1 or convention == "after_step":
            x = prop.apply(x)
        x = _project_pair(x, 1 if j == jump_step else 0, 1 if j == jump_step else 0)
    return x


def one_jump_class_probability(
    params: ModelParams,
    jump_step: int,
    window_steps: int,
    convention: str = "initial",
) -> dict:
    """Probability of "first photon at jump_step, absorbed within the window".

    Sums the marginal probabilities of the member histories
    0^(s-1) 1^m 0 (anything after), m = 1..window_steps: outcomes after the
    witnessing 0 are unconstrained, which the trace of the running branch
    operator gives directly (later projections are trace-preserving in sum).
    Requires jump_step + window_steps <= n_steps.
    """
    _check_convention(convention)
    if window_steps < 1:
        raise ValueError("window_steps: must cover at least one step")
    if jump_step + window_steps > params.n_steps:
        raise ValueError("jump_step + window_steps must not exceed n_steps")
    u = _propagator(params)
    y = _zero_prefix_branch(params, jump_step, convention, u)
    detection = float(np.trace(y).real)
    members = []
    for m in range(1, window_steps + 1):
        z = _project_pair(u.apply(y), 0, 0)
        members.append(float(np.trace(z).real))
        if m < window_steps:
            y = _project_pair(u.apply(y), 1, 1)
    return {
        "class_probability": float(np.sum(members)),
        "detection_probability": detection,
        "members": members,
    }


def persistence_probabilities(
    params: ModelParams,
    jump_step: int,
    k_max: int,
    convention: str = "initial",
) -> np.ndarray:
    """Conditional persistence of the registered photon.

    Element k (k = 0..k_max) is the marginal probability that the mode is
    still excited k steps after first registering at ``jump_step``, divided
    by the registration probability.  Requires jump_step + k_max <= n_steps.
    """
    _check_convention(convention)
    if k_max < 0:
        raise ValueError("k_max: must be non-negative")
    if jump_step + k_max > params.n_steps:
        raise ValueError("jump_step + k_max must not exceed n_steps")
    u = _propagator(params)
    y = _zero_prefix_branch(params, jump_step, convention, u)
    traces = [float(np.trace(y).real)]
    for _ in range(k_max):
        y = _project_pair(u.apply(y), 1, 1)
        traces.append(float(np.trace(y).real))
    traces = np.asarray(traces)
    if traces[0] <= 0.0:
        raise ValueError("registration probability is zero; cannot condition")
    return traces / traces[0]


MATRIX_FORMAT = "photocount-decoherence-matrix"
MATRIX_FORMAT_VERSION = 1


def matrix_to_json_dict(dm: DecoherenceMatrix) -> dict:
    """JSON-ready dict: params, N, row-major (re, im) entries, invariants."""
    flat = dm.entries.reshape(-1)
    return {
        "format": MATRIX_FORMAT,
        "version": MATRIX_FORMAT_VERSION,
        "n_steps": dm.n_steps,
        "convention": dm.convention,
        "params": dm.params.to_dict(),
        "entries_re_im": [[float(z.real), float(z.imag)] for z in flat],
        "invariants": dm.invariant_summary(),
    }


def matrix_from_json_dict(d: dict) -> DecoherenceMatrix:
    if d.get("format") != MATRIX_FORMAT:
        raise ValueError("not a decoherence-matrix document")
    n = int(d["n_steps"])
    size = 1 << n
    flat = np.array([complex(re, im) for re, im in d["entries_re_im"]])
    return DecoherenceMatrix(
        n_steps=n,
        entries=flat.reshape(size, size),
        params=ModelParams.from_dict(d["params"]),
        convention=d.get("convention", "initial"),
    )


def write_matrix_json(path, dm: DecoherenceMatrix) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(matrix_to_json_dict(dm), fh, indent=1)


def read_matrix_json(path) -> DecoherenceMatrix:
    with open(path, "r", encoding="utf-8") as fh:
        return matrix_from_json_dict(json.load(fh))
