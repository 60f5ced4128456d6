"""The measurement-based circuit ``U(t2) R(theta) M_pm U(t1)`` acting on probe (x) qubit."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dicke import (
    DickeSpace,
    HermitianPropagator,
    QubitSpace,
    build_collective_operators,
    embed,
    jx_eigenbasis,
)
from .evolution import ProtocolConfig, evolution, operator_functions


@dataclass
class BranchOutput:
    """One measurement outcome of the ancilla.

    ``state`` is unnormalized: a vector for pure inputs, a density matrix for mixed
    ones.  ``derivative`` holds d(state)/d(theta) from the generator route.
    """

    outcome: int
    state: np.ndarray
    probability: float
    derivative: Optional[np.ndarray] = None
    normalized: bool = False

    @property
    def mixed(self) -> bool:
        return self.state.ndim == 2

    def normalized_state(self) -> np.ndarray:
        if self.probability <= 0:
            raise ZeroDivisionError("branch has zero probability")
        if self.mixed:
            return self.state / self.probability
        return self.state / np.sqrt(self.probability)


def opt_phases(config: ProtocolConfig) -> np.ndarray:
    """Diagonal of ``exp(-i [Omega(Jz) - A(Jz)] t1)`` in basis order."""
    fns = operator_functions(config)
    m = config.space.m_values
    return np.exp(-1j * (fns.Omega(m) - fns.A(m)) * config.t1)


def opt_basis(config: ProtocolConfig) -> np.ndarray:
    """Columns are ``|j, m>_opt`` for m = j ... -j."""
    return opt_phases(config)[:, None] * jx_eigenbasis(config.space)


def j_opt_operator(config: ProtocolConfig) -> np.ndarray:
    """``J_opt = P Jx P^dag`` with ``P`` the phase operator of :func:`opt_phases`."""
    p = opt_phases(config)
    jx = build_collective_operators(config.space).jx
    return p[:, None] * jx * p.conj()[None, :]


def prepare_polarized(config: ProtocolConfig, sign: int = -1) -> np.ndarray:
    """``|j, sign*j>_opt``."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    basis = opt_basis(config)
    return basis[:, 0] if sign > 0 else basis[:, -1]


def prepare_superposition(config: ProtocolConfig, m, a_m: float, b_m: float, phi_m: float) -> np.ndarray:
    """``a_m |j,m>_opt + b_m exp(-i phi_m) |j,-m>_opt`` with real ``a_m^2 + b_m^2 = 1``."""
    if not np.isclose(a_m**2 + b_m**2, 1.0, atol=1e-12):
        raise ValueError("a_m^2 + b_m^2 must equal 1")
    space = config.space
    basis = opt_basis(config)
    return a_m * basis[:, space.index(m)] + b_m * np.exp(-1j * phi_m) * basis[:, space.index(-m)]


def thermal_populations(space: DickeSpace, beta: float) -> np.ndarray:
    """``exp(-m beta)/Z`` in basis order m = j ... -j."""
    if not np.isfinite(beta):
        raise ValueError("beta must be finite")
    x = -space.m_values * beta
    w = np.exp(x - x.max())
    return w / w.sum()


def prepare_thermal(config: ProtocolConfig, beta: float) -> np.ndarray:
    basis = opt_basis(config)
    p = thermal_populations(config.space, beta)
    rho = (basis * p[None, :]) @ basis.conj().T
    return (rho + rho.conj().T) / 2


def encoding_generator(space: DickeSpace, delta: float = 0.0) -> np.ndarray:
    """``Jx cos(delta) + Jy sin(delta)``."""
    return build_collective_operators(space).along(delta)


def encoding_operator(config: ProtocolConfig, theta: Optional[float] = None) -> np.ndarray:
    theta = config.theta if theta is None else theta
    return HermitianPropagator(encoding_generator(config.space, config.delta))(theta)


def _qubit_input(qubit) -> np.ndarray:
    if isinstance(qubit, str):
        return {"+": QubitSpace.plus, "-": QubitSpace.minus}[qubit]
    if isinstance(qubit, (int, np.integer)):
        return QubitSpace.sign_state(int(qubit))
    return np.asarray(qubit, dtype=complex)


class Circuit:
    """Precomputed circuit for one configuration and input; evaluate at any theta.

    ``probe`` is a probe vector or density matrix; ``qubit`` is ``'+'``, ``'-'``,
    a 2-vector or a 2x2 density matrix.  The density-matrix path is used as soon
    as either factor is mixed.
    """

    def __init__(self, config: ProtocolConfig, probe, qubit="+", encoding: bool = True):
        self.config = config
        self.space = config.space
        probe = np.asarray(probe, dtype=complex)
        qubit = _qubit_input(qubit)
        self.mixed = probe.ndim == 2 or qubit.ndim == 2
        if self.mixed:
            if probe.ndim == 1:
                probe = np.outer(probe, probe.conj())
            if qubit.ndim == 1:
                qubit = np.outer(qubit, qubit.conj())
        if probe.shape[0] != self.space.dim:
            raise ValueError(f"probe dimension {probe.shape[0]} != {self.space.dim}")
        self.input = embed(probe, qubit)

        self.U1 = evolution(config, config.t1)
        self.U2 = evolution(config, config.t2) if config.t2 else None
        generator = encoding_generator(self.space, config.delta) if encoding else np.zeros(
            (self.space.dim, self.space.dim), dtype=complex
        )
        self._rotation = HermitianPropagator(generator)
        self.generator = generator

        self._measured = {}
        self.probabilities = {}
        for sign in (1, -1):
            proj = embed(np.eye(self.space.dim), QubitSpace.projector(sign))
            if self.mixed:
                k = proj @ self.U1
                s = k @ self.input @ k.conj().T
                p = float(np.real(np.trace(s)))
            else:
                s = proj @ (self.U1 @ self.input)
                p = float(np.real(np.vdot(s, s)))
            self._measured[sign] = s
            self.probabilities[sign] = p

    def _encode(self, theta: float):
        R = self._rotation(theta)
        RI = embed(R, QubitSpace.identity)
        GI = embed(self.generator, QubitSpace.identity)
        return RI, GI

    def branch(self, outcome: int, theta: Optional[float] = None) -> BranchOutput:
        theta = self.config.theta if theta is None else theta
        RI, GI = self._encode(theta)
        s = self._measured[outcome]
        if self.mixed:
            st = RI @ s @ RI.conj().T
            d = -1j * (GI @ st - st @ GI)
            if self.U2 is not None:
                st = self.U2 @ st @ self.U2.conj().T
                d = self.U2 @ d @ self.U2.conj().T
        else:
            st = RI @ s
            d = -1j * (GI @ st)
            if self.U2 is not None:
                st = self.U2 @ st
                d = self.U2 @ d
        return BranchOutput(outcome, st, self.probabilities[outcome], d)

    def branches(self, theta: Optional[float] = None) -> list[BranchOutput]:
        return [self.branch(1, theta), self.branch(-1, theta)]

    def output(self, theta: Optional[float] = None):
        """Unconditional output ``rho(theta)`` and its theta-derivative."""
        rho = 0
        drho = 0
        for b in self.branches(theta):
            if b.mixed:
                rho = rho + b.state
                drho = drho + b.derivative
            else:
                rho = rho + np.outer(b.state, b.state.conj())
                drho = drho + np.outer(b.derivative, b.state.conj()) + np.outer(
                    b.state, b.derivative.conj()
                )
        return rho, drho


def run_branch(config: ProtocolConfig, probe, qubit="+", outcome: int = 1) -> BranchOutput:
    return Circuit(config, probe, qubit).branch(outcome)


def run_full(config: ProtocolConfig, probe, qubit="+"):
    """Both branches plus the unconditional mixture ``rho(theta)`` at ``config.theta``."""
    c = Circuit(config, probe, qubit)
    branches = c.branches()
    rho, _ = c.output()
    return branches, rho


def probe_factor(branch: BranchOutput) -> np.ndarray:
    """Probe part of a pure branch whose qubit factor is the measured ``|+/->``."""
    if branch.mixed:
        raise ValueError("probe_factor needs a pure branch")
    q = QubitSpace.sign_state(branch.outcome)
    return branch.state.reshape(-1, 2) @ q.conj()


def ghz_state(space: DickeSpace, phi: float, sign: int = 1) -> np.ndarray:
    basis = jx_eigenbasis(space)
    top, bottom = basis[:, 0], basis[:, -1]
    first, second = (top, bottom) if sign > 0 else (bottom, top)
    return (first + np.exp(-1j * phi) * second) / np.sqrt(2)


def ghz_fidelity(state: np.ndarray, phi: float = 0.0, sign: int = 1, maximize: bool = False) -> float:
    """Overlap ``|<GHZ|psi>|^2`` of a probe state with the two-extremal-component GHZ state.

    With ``maximize=True`` the free local phase ``phi`` is optimized away, which
    also removes the dependence on ``sign``.
    """
    state = np.asarray(state, dtype=complex)
    state = state / np.linalg.norm(state)
    space = DickeSpace(state.shape[0] - 1)
    if maximize:
        basis = jx_eigenbasis(space)
        a = abs(np.vdot(basis[:, 0], state))
        b = abs(np.vdot(basis[:, -1], state))
        return float((a + b) ** 2 / 2)
    return float(abs(np.vdot(ghz_state(space, phi, sign), state)) ** 2)


def state_fidelity(rho_or_psi: np.ndarray, psi: np.ndarray) -> float:
    psi = np.asarray(psi, dtype=complex)
    if np.ndim(rho_or_psi) == 1:
        return float(abs(np.vdot(psi, rho_or_psi)) ** 2)
    return float(np.real(np.vdot(psi, rho_or_psi @ psi)))


def branch_probabilities(config: ProtocolConfig, probe, qubit="+") -> Sequence[float]:
    c = Circuit(config, probe, qubit)
    return c.probabilities[1], c.probabilities[-1]
