"""Brute-force verification that the two-step strategy is optimal.

Searches families of (N+1)-outcome measurements at a fixed inconclusive
rate and compares the best error rate found against the closed-form
optimum.  Two search families are implemented:

* "covariant": inconclusive element diagonal in the computational basis
  with the remaining weight distributed over sandwiched minimum-error
  operators (n = 2, 3); for n = 2 the conclusive split additionally gets
  one free projective direction.
* "unconstrained" (n = 2): the inconclusive element ranges over all
  positive operators below the identity satisfying the rate constraint,
  parameterized by a Bloch vector and weight; the conclusive split of the
  remainder is optimized exactly over projective two-outcome
  measurements.  This covers every three-outcome qubit measurement with
  the prescribed inconclusive rate.

The searched grids only ever contain valid measurements (completeness is
enforced by construction, positivity by feasibility bounds); the winning
candidate is additionally materialized and re-checked operator-wise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .states import SymmetricEnsemble, symmetric_ensemble
from .strategy import INCONCLUSIVE, Povm, me_povm, pe_min, q_mc

__all__ = [
    "GridSpec",
    "PovmValidity",
    "OracleReport",
    "verify_povm",
    "brute_force_pe",
    "povm_rates",
    "covariant_povm",
    "covariant_direction_povm",
    "unconstrained_povm",
]

_PAULI = (
    np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
)


@dataclass(frozen=True)
class GridSpec:
    """Two-level grid refinement: `points` per free parameter, refined
    `refinements` times in a +-2-spacing window around the incumbent."""

    points: int = 201
    refinements: int = 1

    def __post_init__(self):
        if self.points < 3:
            raise ValueError("need at least 3 grid points per axis")
        if self.refinements < 0:
            raise ValueError("refinements must be >= 0")


@dataclass(frozen=True)
class PovmValidity:
    completeness_deviation: float
    min_eigenvalue: float
    n_elements: int

    def ok(self, completeness_tol: float = 1e-10, eigenvalue_tol: float = -1e-10) -> bool:
        return (
            self.completeness_deviation <= completeness_tol
            and self.min_eigenvalue >= eigenvalue_tol
        )


@dataclass(frozen=True)
class OracleReport:
    n: int
    theta: float
    q_target: float
    pe_bruteforce: float
    pe_formula: float
    gap: float
    search_resolution: dict
    pe_by_method: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.pe_bruteforce < self.pe_formula - 1e-6:
            raise ValueError(
                f"search undercut the claimed optimum by {self.pe_formula - self.pe_bruteforce:.3e}; "
                "either the formula or the search is wrong"
            )

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "theta_rad": self.theta,
            "q_target": self.q_target,
            "pe_bruteforce": self.pe_bruteforce,
            "pe_formula": self.pe_formula,
            "gap": self.gap,
            "search_resolution": self.search_resolution,
            "pe_by_method": dict(self.pe_by_method),
        }


def verify_povm(p: Povm) -> PovmValidity:
    """Completeness and positivity report; always reports, never raises."""
    total = np.zeros((2, 2), dtype=complex)
    min_eig = np.inf
    for e in p.elements:
        herm = 0.5 * (e + e.conj().T)
        min_eig = min(min_eig, float(np.linalg.eigvalsh(herm).min()))
        total = total + e
    dev = float(np.linalg.norm(total - np.eye(2), ord=2))
    return PovmValidity(
        completeness_deviation=dev,
        min_eigenvalue=min_eig,
        n_elements=len(p.elements),
    )


def _covariant_b(theta, q, a):
    return (q - a * math.cos(theta) ** 2) / math.sin(theta) ** 2


def _sandwich_root(a: float, b: float) -> np.ndarray:
    return np.diag([math.sqrt(1.0 - min(max(a, 0.0), 1.0)),
                    math.sqrt(1.0 - min(max(b, 0.0), 1.0))]).astype(complex)


def covariant_povm(n: int, theta: float, q: float, a: float) -> Povm:
    """Materialize a covariant candidate at weight parameter a."""
    b = _covariant_b(theta, q, a)
    root = _sandwich_root(a, b)
    elements = [root @ e @ root for e in me_povm(n).elements]
    elements.append(np.diag([a, max(b, 0.0)]).astype(complex))
    return Povm(elements=tuple(elements), labels=tuple(range(n)) + (INCONCLUSIVE,))


def covariant_direction_povm(theta: float, q: float, a: float, pol: float, azi: float) -> Povm:
    """Materialize an n=2 covariant candidate with a free conclusive direction."""
    b = _covariant_b(theta, q, a)
    root = _sandwich_root(a, b)
    w = np.array([math.cos(pol / 2.0), np.exp(1j * azi) * math.sin(pol / 2.0)])
    e0 = np.outer(w, w.conj())
    p0 = root @ e0 @ root
    p1 = root @ (np.eye(2) - e0) @ root
    p_inc = np.diag([a, max(b, 0.0)]).astype(complex)
    return Povm(elements=(p0, p1, p_inc), labels=(0, 1, INCONCLUSIVE))


def _bloch_op(weight: float, vec: np.ndarray) -> np.ndarray:
    m = weight * 0.5 * np.eye(2, dtype=complex)
    for comp, s in zip(vec, _PAULI):
        m = m + weight * 0.5 * comp * s
    return m


def unconstrained_povm(theta: float, q: float, r: float, mu: float, nu: float) -> Povm:
    """Materialize an n=2 unconstrained candidate at Bloch parameters (r, mu, nu)."""
    cos2t = math.cos(2.0 * theta)
    sin2t = math.sin(2.0 * theta)
    u = np.array([math.sin(mu) * math.cos(nu), math.sin(mu) * math.sin(nu), math.cos(mu)])
    m = r * u
    c = 2.0 * q / (1.0 + m[2] * cos2t)
    pi_inc = _bloch_op(c, m)
    g = np.eye(2, dtype=complex) - pi_inc
    evals, evecs = np.linalg.eigh(g)
    if evals.min() < -1e-12:
        raise ValueError("infeasible candidate: I - Pi_? is not positive")
    root = (evecs * np.sqrt(np.clip(evals, 0.0, None))) @ evecs.conj().T

    b0 = np.array([sin2t, 0.0, cos2t])
    b1 = np.array([-sin2t, 0.0, cos2t])
    t_ops = [root @ _bloch_op(1.0, bv) @ root for bv in (b0, b1)]
    t_vecs = [np.array([float(np.trace(t @ s).real) * 0.5 for s in _PAULI]) for t in t_ops]
    t0s = [float(np.trace(t).real) * 0.5 for t in t_ops]
    d = t_vecs[0] - t_vecs[1]
    dn = float(np.linalg.norm(d))
    pc_proj = 0.5 * (t0s[0] + t0s[1] + dn)
    # exact conclusive split: best of the projective direction and the two
    # trivial splits (all weight on one outcome)
    if pc_proj >= t0s[0] and pc_proj >= t0s[1] and dn > 0:
        e0 = _bloch_op(1.0, d / dn)
    elif t0s[0] >= t0s[1]:
        e0 = np.eye(2, dtype=complex)
    else:
        e0 = np.zeros((2, 2), dtype=complex)
    p0 = root @ e0 @ root
    p1 = g - p0
    return Povm(elements=(p0, p1, pi_inc), labels=(0, 1, INCONCLUSIVE))


def povm_rates(povm: Povm, ensemble: SymmetricEnsemble) -> tuple[float, float, float]:
    """(P_e, P_c, Q) of a measurement on an ensemble, by the Born rule."""
    pe = pc = qq = 0.0
    eta = ensemble.prior
    for j in range(ensemble.n):
        v = ensemble.state(j).vector
        for label, el in zip(povm.labels, povm.elements):
            p = float(np.real(v.conj() @ el @ v))
            if label == INCONCLUSIVE:
                qq += eta * p
            elif label == j:
                pc += eta * p
            else:
                pe += eta * p
    return pe, pc, qq


def _refined_scan(scan, grids_bounds, spec: GridSpec, backend):
    """Run `scan` over linspace grids, then shrink around the incumbent."""
    bounds = [tuple(bb) for bb in grids_bounds]
    hard = list(bounds)
    best = None
    for _ in range(spec.refinements + 1):
        grids = [np.linspace(lo, hi, spec.points) for lo, hi in bounds]
        out = scan(*grids, backend=backend)
        best = out
        if not math.isfinite(out[0]):
            break
        new_bounds = []
        for (lo, hi), (hlo, hhi), center in zip(bounds, hard, out[1:]):
            spacing = (hi - lo) / (spec.points - 1)
            new_bounds.append(
                (max(hlo, center - 2.0 * spacing), min(hhi, center + 2.0 * spacing))
            )
        bounds = new_bounds
    return best


def brute_force_pe(
    n: int,
    theta: float,
    q_target: float,
    resolution: GridSpec | None = None,
    methods: tuple[str, ...] | None = None,
    backend: str | None = None,
) -> OracleReport:
    """Minimum error rate found by grid search at the target inconclusive rate.

    Supports n in {2, 3}.  The reported gap is the difference between the
    best searched strategy and the closed-form optimum; it can only be
    non-negative up to numerical tolerance if the closed form is truly
    optimal, which is the regression this oracle provides.
    """
    if n not in (2, 3):
        raise ValueError(f"brute-force search supports n in {{2, 3}}, got {n}")
    if not 0.0 < theta <= math.pi / 4 + 1e-15:
        raise ValueError(f"theta={theta} outside (0, pi/4]")
    qmc = q_mc(theta)
    if not 0.0 <= q_target <= qmc:
        raise ValueError(f"q_target={q_target} outside [0, q_mc={qmc}]")
    spec = resolution or GridSpec()
    if methods is None:
        methods = ("covariant", "unconstrained") if n == 2 else ("covariant",)

    ensemble = symmetric_ensemble(n, theta)
    pe_by_method: dict[str, float] = {}
    resolution_info: dict[str, object] = {
        "points_per_axis": spec.points,
        "refinements": spec.refinements,
        "methods": list(methods),
    }

    for method in methods:
        if method == "covariant" and n == 2:
            out = _refined_scan(
                lambda ag, pg, zg, backend: _kernels.covariant_direction_scan(
                    theta, q_target, ag, pg, zg, backend=backend
                ),
                [(0.0, 1.0), (0.0, math.pi), (0.0, 2.0 * math.pi)],
                spec,
                backend,
            )
            incumbent = covariant_direction_povm(theta, q_target, *out[1:])
        elif method == "covariant":
            out = _refined_scan(
                lambda ag, backend: _kernels.covariant_scan(
                    n, theta, q_target, ag, backend=backend
                ),
                [(0.0, 1.0)],
                spec,
                backend,
            )
            incumbent = covariant_povm(n, theta, q_target, out[1])
        elif method == "unconstrained":
            if n != 2:
                raise ValueError("unconstrained search is implemented for n=2 only")
            out = _refined_scan(
                lambda rg, mg, ng, backend: _kernels.unconstrained_scan(
                    theta, q_target, rg, mg, ng, backend=backend
                ),
                [(0.0, 1.0), (0.0, math.pi), (0.0, 2.0 * math.pi)],
                spec,
                backend,
            )
            incumbent = unconstrained_povm(theta, q_target, *out[1:])
        else:
            raise ValueError(f"unknown search method {method!r}")

        if not math.isfinite(out[0]):
            raise RuntimeError(f"{method} search found no feasible candidate")
        validity = verify_povm(incumbent)
        if not validity.ok(completeness_tol=1e-9, eigenvalue_tol=-1e-9):
            raise RuntimeError(
                f"winning {method} candidate failed the operator check: {validity}"
            )
        pe_born, _, q_born = povm_rates(incumbent, ensemble)
        if abs(q_born - q_target) > 1e-9:
            raise RuntimeError(
                f"winning {method} candidate misses the rate constraint: {q_born} vs {q_target}"
            )
        if abs(pe_born - out[0]) > 1e-9:
            raise RuntimeError(
                f"kernel/matrix mismatch for {method}: {out[0]} vs {pe_born}"
            )
        pe_by_method[method] = float(out[0])

    pe_formula = pe_min(n, q_target, qmc)
    pe_bruteforce = min(pe_by_method.values())
    return OracleReport(
        n=n,
        theta=theta,
        q_target=q_target,
        pe_bruteforce=pe_bruteforce,
        pe_formula=pe_formula,
        gap=pe_bruteforce - pe_formula,
        search_resolution=resolution_info,
        pe_by_method=pe_by_method,
    )
