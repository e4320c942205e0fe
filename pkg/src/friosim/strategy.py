"""Minimum-error and fixed-inconclusive-rate measurement strategies.

Builds the N-outcome minimum-error POVM for symmetric qubit states, the
composite (N+1)-outcome measurement obtained by chaining state separation
with that POVM, and the closed-form error/correct/inconclusive rates,
including the optimal error rate as a function of the prescribed
inconclusive rate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .separation import coupling_unitary, separation_map, success_probability
from .states import uniform_states

__all__ = [
    "Povm",
    "FrioProbabilities",
    "me_povm",
    "me_error_rate",
    "frio_povm",
    "frio_probabilities",
    "q_mc",
    "pe_min",
]

INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class Povm:
    """Ordered list of 2x2 measurement operators with outcome labels.

    Construction only checks shapes; operator positivity and completeness
    are the province of :func:`friosim.oracle.verify_povm`, which must be
    able to inspect deliberately invalid candidates.
    """

    elements: tuple[np.ndarray, ...]
    labels: tuple[object, ...]

    def __post_init__(self):
        if len(self.elements) != len(self.labels):
            raise ValueError("one label per element required")
        if not self.elements:
            raise ValueError("POVM needs at least one element")
        frozen = []
        for e in self.elements:
            a = np.array(e, dtype=complex)
            if a.shape != (2, 2):
                raise ValueError(f"POVM elements must be 2x2, got {a.shape}")
            a.setflags(write=False)
            frozen.append(a)
        object.__setattr__(self, "elements", tuple(frozen))
        object.__setattr__(self, "labels", tuple(self.labels))

    def __len__(self) -> int:
        return len(self.elements)

    def element(self, label) -> np.ndarray:
        return self.elements[self.labels.index(label)]


@dataclass(frozen=True)
class FrioProbabilities:
    """Average error/correct/inconclusive rates; they sum to one."""

    p_error: float
    p_correct: float
    q_inconclusive: float

    def __post_init__(self):
        total = self.p_error + self.p_correct + self.q_inconclusive
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"rates sum to {total}, expected 1")


def me_povm(n: int) -> Povm:
    """Minimum-error POVM for n symmetric qubit states: (2/n)|u_k><u_k|."""
    elements = []
    for u in uniform_states(n):
        v = u.vector
        elements.append((2.0 / n) * np.outer(v, v.conj()))
    return Povm(elements=tuple(elements), labels=tuple(range(n)))


def me_error_rate(n: int, theta_out: float) -> float:
    """Minimum average error for n symmetric states on the theta' parallel."""
    if n < 2:
        raise ValueError(f"need at least 2 states, got n={n}")
    if not 0.0 <= theta_out <= math.pi / 4 + 1e-15:
        raise ValueError(f"theta_out={theta_out} outside [0, pi/4]")
    return 1.0 - (1.0 + math.sin(2.0 * theta_out)) / n


def frio_povm(n: int, theta: float, theta_out: float) -> Povm:
    """Composite (n+1)-outcome POVM: separation chained with the ME POVM.

    Detection operators are A_j = (Pi_j^ME)^{1/2} <v|U(theta')|v> for the
    conclusive outcomes and A_? = <h|U(theta')|v> for the inconclusive one;
    the returned elements are A^dag A.  Built with fiducial phase zero.
    """
    sep = separation_map(theta, theta_out)
    u4 = coupling_unitary(sep).u
    # <v|U|v> and <h|U|v> are 2x2 operators on the system qubit.
    m_vv = u4[1::2, 1::2]
    m_hv = u4[0::2, 1::2]

    elements = []
    for u in uniform_states(n):
        v = u.vector
        # rank-1 square root: (2/n)^{1/2} |u_k><u_k| avoids an eigendecomposition
        root = math.sqrt(2.0 / n) * np.outer(v, v.conj())
        a = root @ m_vv
        elements.append(a.conj().T @ a)
    a_inc = m_hv
    elements.append(a_inc.conj().T @ a_inc)
    labels = tuple(range(n)) + (INCONCLUSIVE,)
    return Povm(elements=tuple(elements), labels=labels)


def frio_probabilities(n: int, theta: float, theta_out: float) -> FrioProbabilities:
    """Closed-form rates of the two-step strategy at separation angle theta'."""
    if n < 2:
        raise ValueError(f"need at least 2 states, got n={n}")
    p_s = success_probability(theta, theta_out)
    p_e_beta = me_error_rate(n, theta_out)
    return FrioProbabilities(
        p_error=p_s * p_e_beta,
        p_correct=p_s * (1.0 - p_e_beta),
        q_inconclusive=1.0 - p_s,
    )


def q_mc(theta: float) -> float:
    """Critical inconclusive rate cos(2*theta) of the maximal separation."""
    if not 0.0 <= theta <= math.pi / 4 + 1e-15:
        raise ValueError(f"theta={theta} outside [0, pi/4]")
    return math.cos(2.0 * theta)


def pe_min(n: int, q: float, q_mc: float) -> float:
    """Minimum average error at fixed inconclusive rate q.

    Valid for 0 <= q <= q_mc < 1, where q_mc is the critical rate of the
    ensemble (see :func:`q_mc`).  q beyond q_mc is a domain error rather
    than a clamp: the formula is not derived there and silent clamping
    would hide caller bugs.
    """
    if n < 2:
        raise ValueError(f"need at least 2 states, got n={n}")
    if not 0.0 <= q_mc < 1.0:
        raise ValueError(f"q_mc={q_mc} outside [0, 1)")
    if q < 0.0 or q > q_mc:
        raise ValueError(f"q={q} outside [0, q_mc={q_mc}]")
    qbar = 1.0 - q
    rad = max(qbar * qbar - (q - q_mc) ** 2, 0.0)
    return ((n - 1) * qbar - math.sqrt(rad)) / n
