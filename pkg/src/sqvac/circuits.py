"""Qubit-oscillator circuits and the codeword preparation protocols built from them.

Joint states are ordered qubit-major: ``[|0> (x) mode, |1> (x) mode]``. Joint
operators are dense ``2N x 2N`` matrices in the same ordering, so
``np.kron(qubit_gate, mode_gate)`` produces them directly.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .codewords import CodeSpec, CodewordPair, Family, _psi_closed_form, build_pair
from .errors import UnreachableBranchError, ValidationError
from .fockspace import DEFAULT_TOLERANCES, FockOperator, FockVector, fidelity, suggest_cutoff
from .gaussian import SqueezeParams, rotation_unitary, squeeze_unitary

__all__ = [
    "JointState",
    "JointOperator",
    "MeasurementRecord",
    "Mode",
    "RunMetadata",
    "PreparationResult",
    "UNREACHABLE_PROBABILITY",
    "conditional_squeeze",
    "conditional_rotation",
    "hadamard_on_qubit",
    "phase_gate_on_qubit",
    "measure_qubit_z",
    "preparation_probability",
    "simulated_preparation_probabilities",
    "logical_x",
    "prepare_pow2",
    "prepare_equal_superposition",
    "prepare_even",
]

UNREACHABLE_PROBABILITY = 1e-14


@dataclass(frozen=True, eq=False)
class JointState:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex, copy=True)
        if amps.ndim != 1 or amps.size < 2 or amps.size % 2:
            raise ValidationError("joint amplitudes must be a 1-D vector of even length")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def product(cls, qubit, mode: FockVector) -> "JointState":
        """``qubit (x) mode`` with ``qubit`` a length-2 amplitude vector or a bit."""
        if isinstance(qubit, (int, np.integer)):
            if qubit not in (0, 1):
                raise ValidationError("qubit basis label must be 0 or 1")
            qubit = np.eye(2)[qubit]
        return cls(np.kron(np.asarray(qubit, dtype=complex), mode.amplitudes))

    @property
    def n_max(self) -> int:
        return self.amplitudes.size // 2 - 1

    def block(self, bit: int) -> FockVector:
        """Unnormalized mode component attached to qubit state ``|bit>``."""
        half = self.amplitudes.size // 2
        return FockVector(self.amplitudes[bit * half:(bit + 1) * half])

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True, eq=False)
class JointOperator:
    matrix: np.ndarray
    label: str = ""

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=complex, copy=True)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] % 2:
            raise ValidationError("joint operator must be square with even dimension")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def n_max(self) -> int:
        return self.matrix.shape[0] // 2 - 1

    def block(self, row: int, col: int) -> np.ndarray:
        """Mode operator ``<row| U |col>`` on the qubit."""
        h = self.matrix.shape[0] // 2
        return self.matrix[row * h:(row + 1) * h, col * h:(col + 1) * h]

    def __matmul__(self, other):
        if isinstance(other, JointState):
            if other.amplitudes.size != self.matrix.shape[0]:
                raise ValidationError("joint dimension mismatch")
            return JointState(self.matrix @ other.amplitudes)
        if isinstance(other, JointOperator):
            if other.matrix.shape != self.matrix.shape:
                raise ValidationError("joint dimension mismatch")
            return JointOperator(self.matrix @ other.matrix)
        return NotImplemented


def _block_diag(u0: np.ndarray, u1: np.ndarray, label: str) -> JointOperator:
    h = u0.shape[0]
    out = np.zeros((2 * h, 2 * h), dtype=complex)
    out[:h, :h] = u0
    out[h:, h:] = u1
    return JointOperator(out, label)


def conditional_squeeze(r: float, theta0: float, theta1: float, n_max: int) -> JointOperator:
    """``|0><0| (x) S(r, theta0) + |1><1| (x) S(r, theta1)``."""
    s0 = squeeze_unitary(SqueezeParams(r, theta0), n_max).matrix
    s1 = squeeze_unitary(SqueezeParams(r, theta1), n_max).matrix
    return _block_diag(s0, s1, f"CS({r:g};{theta0:g},{theta1:g})")


def conditional_rotation(theta: float, phi: float, n_max: int) -> JointOperator:
    """``|0><0| (x) I + e^{i phi} |1><1| (x) R(theta)``.

    Built directly and also as ``(phase gate (x) I) CR(theta)``; the two must agree
    entrywise, which checks that the phased gate factors as a qubit phase gate
    followed by the plain conditional rotation.
    """
    rot = rotation_unitary(theta, n_max).matrix
    eye = np.eye(n_max + 1)
    direct = _block_diag(eye, np.exp(1j * phi) * rot, f"CR({theta:g},{phi:g})")
    factored = phase_gate_on_qubit(phi, n_max) @ _block_diag(eye, rot, "")
    if np.max(np.abs(direct.matrix - factored.matrix)) > 1e-14:
        raise RuntimeError("phased conditional rotation does not factor into phase gate and CR")
    return direct


def hadamard_on_qubit(n_max: int) -> JointOperator:
    h = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)
    return JointOperator(np.kron(h, np.eye(n_max + 1)), "H")


def phase_gate_on_qubit(phi: float, n_max: int) -> JointOperator:
    """``e^{i phi |1><1|}`` on the qubit."""
    return JointOperator(np.kron(np.diag([1.0, np.exp(1j * phi)]), np.eye(n_max + 1)), f"P({phi:g})")


@dataclass(frozen=True, eq=False)
class MeasurementRecord:
    outcome: int
    probability: float
    post_state: FockVector
    probabilities: tuple[float, float] = (math.nan, math.nan)


def measure_qubit_z(state: JointState, select: int | None = None,
                    rng: np.random.Generator | None = None) -> MeasurementRecord:
    """Z-basis measurement of the qubit.

    With ``select`` the outcome is forced (post-selection); otherwise it is drawn
    from ``rng`` against the exact block probabilities.
    """
    norm2 = state.norm() ** 2
    if abs(norm2 - 1.0) > 10 * DEFAULT_TOLERANCES.norm_tol:
        raise ValidationError(f"joint state is not normalized (norm^2 = {norm2!r})")
    b0, b1 = state.block(0), state.block(1)
    p0 = float(np.sum(b0.probabilities()))
    p1 = float(np.sum(b1.probabilities()))
    if select is None:
        if rng is None:
            raise ValidationError("either select an outcome or pass a random generator")
        outcome = 0 if rng.random() < p0 / (p0 + p1) else 1
    else:
        if select not in (0, 1):
            raise ValidationError(f"measurement outcome must be 0 or 1, got {select!r}")
        outcome = int(select)
    p = p0 if outcome == 0 else p1
    if p < UNREACHABLE_PROBABILITY:
        raise UnreachableBranchError(f"outcome {outcome} has probability {p:.3g}")
    block = b0 if outcome == 0 else b1
    return MeasurementRecord(outcome, p, block.normalized(), (p0, p1))


def preparation_probability(L: int, r: float) -> float:
    """Probability of heralding logical ``L`` in the H / conditional-squeeze / H circuit."""
    if L not in (0, 1):
        raise ValidationError(f"logical outcome must be 0 or 1, got {L!r}")
    if not r >= 0:
        raise ValidationError(f"r must be >= 0, got {r}")
    sign = 1.0 if L == 0 else -1.0
    return 0.5 + sign / (2.0 * math.cosh(r) * math.sqrt(math.tanh(r) ** 2 + 1.0))


def simulated_preparation_probabilities(r: float, n_max: int | None = None) -> tuple[float, float]:
    """Outcome probabilities of H, CS(r; 0, pi/2), H on ``|0> (x) |vac>``, from block norms."""
    n_max = n_max or suggest_cutoff(r)
    psi = JointState.product(0, FockVector.vacuum(n_max))
    h = hadamard_on_qubit(n_max)
    cs = conditional_squeeze(r, 0.0, math.pi / 2, n_max)
    out = h @ (cs @ (h @ psi))
    return (float(np.sum(out.block(0).probabilities())),
            float(np.sum(out.block(1).probabilities())))


def _logical_x_from_states(zero: FockVector, one: FockVector) -> FockOperator:
    overlap = abs(zero.inner(one))
    if overlap > 1e-8:
        raise ValidationError(f"codewords are not orthogonal (|<0|1>| = {overlap:.3g})")
    z = zero.amplitudes / zero.norm()
    o = one.amplitudes / one.norm()
    pz = np.outer(z, z.conj())
    po = np.outer(o, o.conj())
    swap = np.outer(z, o.conj()) + np.outer(o, z.conj())
    return FockOperator(np.eye(zero.dim) - pz - po + swap, "X_L")


def logical_x(pair: CodewordPair) -> FockOperator:
    """``|0_L><1_L| + |1_L><0_L|`` plus the identity on the orthogonal complement."""
    return _logical_x_from_states(pair.zero_L, pair.one_L)


class Mode(str, enum.Enum):
    POSTSELECT = "postselect"
    FEEDFORWARD = "feedforward"


@dataclass
class RunMetadata:
    algorithm: str
    params: dict
    seed: int | None
    iterations: list = field(default_factory=list)
    cumulative_probability: float = 1.0
    fidelity: float = math.nan

    @property
    def outcomes(self) -> list[int]:
        return [it["outcome"] for it in self.iterations]

    @property
    def probabilities(self) -> list[float]:
        return [it["probability"] for it in self.iterations]

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "params": self.params,
            "seed": self.seed,
            "outcomes": self.outcomes,
            "probabilities": self.probabilities,
            "iterations": self.iterations,
            "cumulative_probability": self.cumulative_probability,
            "fidelity": self.fidelity,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


class PreparationResult(NamedTuple):
    state: FockVector
    metadata: RunMetadata
    trace: list  # mode state after each iteration


def _interferometer_round(mode: FockVector, theta: float, phi: float) -> JointState:
    """``(H (x) I) CR(theta, phi) (H (x) I)`` on a fresh ``|0>`` qubit and the mode."""
    n_max = mode.n_max
    h = hadamard_on_qubit(n_max)
    cr = conditional_rotation(theta, phi, n_max)
    return h @ (cr @ (h @ JointState.product(0, mode)))


def _round(state: FockVector, theta: float, phi: float, want: int, mode: Mode,
           rng: np.random.Generator, forced: int | None, meta: RunMetadata, j: int) -> FockVector:
    joint = _interferometer_round(state, theta, phi)
    if mode is Mode.POSTSELECT:
        rec = measure_qubit_z(joint, select=want)
        meta.cumulative_probability *= rec.probability
        out = rec.post_state
        corrected = False
    else:
        rec = measure_qubit_z(joint, select=forced, rng=None if forced is not None else rng)
        out = rec.post_state
        corrected = rec.outcome != want
        if corrected:
            zero = joint.block(0).normalized()
            one = joint.block(1).normalized()
            out = (_logical_x_from_states(zero, one) @ out).with_phase_convention()
    meta.iterations.append({
        "iteration": j, "theta": theta, "phi": phi,
        "p0": rec.probabilities[0], "p1": rec.probabilities[1],
        "outcome": rec.outcome, "probability": rec.probability, "corrected": corrected,
    })
    return out.with_phase_convention()


def _initial_state(r: float, n_max: int) -> FockVector:
    return squeeze_unitary(SqueezeParams(r, 0.0), n_max) @ FockVector.vacuum(n_max)


def _resolve_cutoff(r: float, n_max: int | None) -> int:
    if not (math.isfinite(r) and r >= 0):
        raise ValidationError(f"r must be finite and >= 0, got {r}")
    return int(n_max) if n_max is not None else suggest_cutoff(r)


def prepare_pow2(k: int, r: float, target_L: int, mode: Mode = Mode.POSTSELECT,
                 seed: int | None = 0, n_max: int | None = None,
                 forced_outcomes: list[int] | None = None) -> PreparationResult:
    """Prepare a logical state of the ``2^k``-legged code with ``k`` conditional-rotation rounds.

    Round ``j`` uses ``CR(pi / 2^j)`` between Hadamards on a fresh qubit. Outcome 0
    doubles the legs in phase, outcome 1 with alternating signs. ``POSTSELECT``
    keeps outcome 0 (and ``target_L`` in the last round) and reports the joint
    success probability. ``FEEDFORWARD`` samples outcomes from ``seed`` (or takes
    ``forced_outcomes``) and undoes an unwanted outcome with the logical X of the
    current round's code space.
    """
    if int(k) != k or k < 1:
        raise ValidationError(f"k must be an integer >= 1, got {k!r}")
    if target_L not in (0, 1):
        raise ValidationError(f"target logical state must be 0 or 1, got {target_L!r}")
    mode = Mode(mode)
    if forced_outcomes is not None and len(forced_outcomes) != k:
        raise ValidationError(f"forced_outcomes needs {k} entries")
    n_max = _resolve_cutoff(r, n_max)
    meta = RunMetadata("pow2", {"k": int(k), "m": 2 ** int(k), "r": r, "target_L": int(target_L),
                                "mode": mode.value, "n_max": n_max}, seed)
    rng = np.random.default_rng(seed)
    state = _initial_state(r, n_max)
    trace = [state]
    for j in range(1, k + 1):
        want = target_L if j == k else 0
        forced = None if forced_outcomes is None else forced_outcomes[j - 1]
        state = _round(state, math.pi / 2 ** j, 0.0, want, mode, rng, forced, meta, j)
        trace.append(state)
    if mode is Mode.FEEDFORWARD:
        meta.cumulative_probability = 1.0
    target = build_pair(CodeSpec(Family.SQUEEZED, 2 ** k, r, n_max)).codeword(target_L)
    meta.fidelity = fidelity(state, target)
    return PreparationResult(state, meta, trace)


def prepare_equal_superposition(m: int, r: float, seed: int | None = 0,
                                n_max: int | None = None) -> PreparationResult:
    """Prepare the in-phase ``m``-legged superposition ``psi_0`` by phased rotations.

    Runs ``2m - 1`` post-selected rounds with ``theta = pi/m`` and
    ``phi_j = pi - pi j / m``. The product of the heralded branches telescopes to
    the sum of ``R(pi l / m)`` over ``l < 2m`` applied to the squeezed vacuum;
    because squeezed vacua are invariant under ``R(pi)`` this is ``psi_0`` of the
    ``m``-legged code. Any ``m >= 1`` is allowed: odd ``m`` yields the odd-legged
    superposition used as the first stage of :func:`prepare_even`.
    """
    if int(m) != m or m < 1:
        raise ValidationError(f"number of legs must be a positive integer, got {m!r}")
    m = int(m)
    n_max = _resolve_cutoff(r, n_max)
    meta = RunMetadata("equal", {"m": m, "r": r, "n_max": n_max}, seed)
    rng = np.random.default_rng(seed)
    state = _initial_state(r, n_max)
    trace = [state]
    theta = math.pi / m
    for j in range(1, 2 * m):
        phi = math.pi - math.pi * j / m
        state = _round(state, theta, phi, 0, Mode.POSTSELECT, rng, None, meta, j)
        trace.append(state)
    meta.fidelity = fidelity(state, _psi_closed_form(m, 0, r, n_max))
    return PreparationResult(state, meta, trace)


def prepare_even(m: int, r: float, target_L: int, mode: Mode = Mode.POSTSELECT,
                 seed: int | None = 0, n_max: int | None = None,
                 forced_outcome: int | None = None) -> PreparationResult:
    """Prepare a logical state of any even-``m`` code in two stages.

    Stage one builds ``psi_0`` of the ``m/2``-legged code (the bare squeezed
    vacuum, the power-of-two protocol, or the phased-rotation protocol). Stage two
    is one more round with ``CR(pi/m)``, which interleaves the legs and heralds
    ``psi_0`` or ``psi_{m/2}`` of the ``m``-legged code.
    """
    if int(m) != m or m < 2 or m % 2:
        raise ValidationError(f"number of legs must be an even integer >= 2, got {m!r}")
    if target_L not in (0, 1):
        raise ValidationError(f"target logical state must be 0 or 1, got {target_L!r}")
    m = int(m)
    mode = Mode(mode)
    n_max = _resolve_cutoff(r, n_max)
    half = m // 2
    if half == 1:
        vac_sq = _initial_state(r, n_max)
        first = PreparationResult(vac_sq, RunMetadata("none", {}, seed), [vac_sq])
        stage = "squeezed_vacuum"
    elif half & (half - 1) == 0:
        first = prepare_pow2(half.bit_length() - 1, r, 0, mode, seed, n_max)
        stage = "pow2"
    else:
        first = prepare_equal_superposition(half, r, seed, n_max)
        stage = "equal"
    meta = RunMetadata("even", {"m": m, "r": r, "target_L": int(target_L), "mode": mode.value,
                                "n_max": n_max, "first_stage": stage}, seed)
    meta.iterations = list(first.metadata.iterations)
    meta.cumulative_probability = first.metadata.cumulative_probability
    # continue the random stream past the first stage so both stages stay reproducible
    rng = np.random.default_rng(None if seed is None else [seed, 1])
    state = _round(first.state, math.pi / m, 0.0, target_L, mode, rng, forced_outcome,
                   meta, len(meta.iterations) + 1)
    if mode is Mode.FEEDFORWARD:
        meta.cumulative_probability = first.metadata.cumulative_probability
    target = build_pair(CodeSpec(Family.SQUEEZED, m, r, n_max)).codeword(target_L)
    meta.fidelity = fidelity(state, target)
    return PreparationResult(state, meta, list(first.trace) + [state])
