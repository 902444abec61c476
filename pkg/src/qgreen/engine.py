"""Batched execution of bound circuit templates.

Each batch column is one independent circuit variant (a perturbation-vector
sign pattern, and under noise one trajectory).  Columns only differ in the
per-slot angle signs and in the sampled noise Paulis, so the compiled op
stream is shared and the slot ops consume a per-column sign matrix.

Determinism: for a fixed (template, psi0, signs, seed) the outputs are
bit-reproducible.  The column chunk size is a fixed function of the register
dimension, and random draws happen in a fixed order (per chunk: noise codes,
then one measurement uniform per column).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .circuits import CircuitTemplate
from .pauli import PauliString, parity
from .statevec import Gate, RngStream, gate_matrix_on_support, measurement_basis_change

_CHUNK_AMPLITUDES = 1 << 22  # complex entries per chunk, ~64 MiB


@dataclass
class _Op:
    kind: str  # '1q' | '2q' | 'string' | 'slot' | 'noise'
    q0: int = 0
    q1: int = 0
    mat: Optional[np.ndarray] = None
    xmask: int = 0
    zmask: int = 0
    c0: complex = 1.0
    cth: float = 1.0
    sth: float = 0.0
    slot: int = -1
    noise_index: int = -1


def _string_params(p: PauliString) -> tuple[int, int, complex]:
    return p.x_mask(), p.z_mask(), complex(p.phase * (1j) ** p.y_count())


def _rotation_op(gate: Gate) -> _Op:
    xm, zm, c0 = _string_params(gate.pauli)
    return _Op("string", xmask=xm, zmask=zm, c0=c0,
               cth=float(np.cos(gate.angle / 2)), sth=float(np.sin(gate.angle / 2)))


class CompiledTemplate:
    """Flattened op stream for a template at a fixed slot magnitude."""

    def __init__(self, template: CircuitTemplate, slot_magnitude: float):
        self.template = template
        self.n_qubits = template.n_qubits
        self.dim = 1 << template.n_qubits
        self.slot_magnitude = float(slot_magnitude)
        noisy = template.noise is not None and template.noise.gamma > 0
        self.gamma = template.noise.gamma if noisy else 0.0
        self.ops: list[_Op] = []
        self.n_noise_events = 0

        by_step: dict[int, list[int]] = {}
        for k, slot in enumerate(template.slots):
            by_step.setdefault(slot.step_index, []).append(k)
        step_ops = [self._compile_gate(g, noisy) for g in template.step_gates]
        # slot gate applies exp(+i(theta/2)G); the engine's standard-rotation
        # kernel realizes it as a gate angle of -theta (source-coupling sign)
        cth = float(np.cos(self.slot_magnitude / 2))
        sth = float(np.sin(self.slot_magnitude / 2))
        for step in range(template.n_steps):
            for k in by_step.get(step, ()):
                gen = template.slots[k].generator
                xm, zm, c0 = _string_params(gen)
                self.ops.append(_Op("slot", xmask=xm, zmask=zm, c0=c0,
                                    cth=cth, sth=sth, slot=k))
                if noisy and len(gen.support) >= 2:
                    self._add_noise_event(min(gen.support), max(gen.support))
            for op_list in step_ops:
                for op in op_list:
                    if op.kind == "noise":
                        self._add_noise_event(op.q0, op.q1)
                    else:
                        self.ops.append(op)
        self.measure_ops = [
            self._compile_gate(g, noisy=False)[0]
            for g in measurement_basis_change(list(template.observables))
        ]
        self.obs_masks = []
        for obs in template.observables:
            mask = 0
            for q in obs.support:
                mask |= 1 << q
            self.obs_masks.append(mask)

    def _add_noise_event(self, qa: int, qb: int) -> None:
        self.ops.append(_Op("noise", q0=qa, q1=qb, noise_index=self.n_noise_events))
        self.n_noise_events += 1

    def _compile_gate(self, gate: Gate, noisy: bool) -> list[_Op]:
        ops: list[_Op] = []
        if gate.kind == "fixed1q":
            ops.append(_Op("1q", q0=gate.support[0],
                           mat=np.ascontiguousarray(gate.matrix)))
        elif gate.kind == "rotation":
            if gate.pauli.weight == 0:
                return []
            ops.append(_rotation_op(gate))
        elif gate.kind in ("cnot", "block"):
            U, sup = gate_matrix_on_support(gate)
            if len(sup) == 1:
                ops.append(_Op("1q", q0=sup[0], mat=np.ascontiguousarray(U)))
            elif len(sup) == 2:
                ops.append(_Op("2q", q0=sup[0], q1=sup[1],
                               mat=np.ascontiguousarray(U)))
            else:
                raise ValueError("blocks wider than two qubits are not supported")
        else:
            raise ValueError(f"unknown gate kind {gate.kind}")
        if noisy and gate.is_two_qubit_block():
            qa, qb = gate.noise_pair()
            ops.append(_Op("noise", q0=qa, q1=qb))
        return ops

    # -- execution ----------------------------------------------------------

    def chunk_columns(self) -> int:
        return max(1, _CHUNK_AMPLITUDES // self.dim)

    def run(self, psi0: np.ndarray, slot_signs: np.ndarray, mode: str,
            rng: RngStream | None) -> np.ndarray:
        """Evolve one column per row of `slot_signs` and measure.

        slot_signs: (B, n_slots) int8 array of +-1 (column slot angle is
        sign * slot_magnitude).  Returns (n_obs, B): exact expectations for
        mode='exact', +-1 single-shot outcomes for mode='sample'.
        """
        slot_signs = np.ascontiguousarray(slot_signs, dtype=np.int8)
        B = slot_signs.shape[0]
        if slot_signs.shape != (B, self.template.n_slots):
            raise ValueError("slot sign matrix has wrong shape")
        if mode not in ("exact", "sample"):
            raise ValueError(f"unknown mode {mode!r}")
        if (mode == "sample" or self.gamma > 0) and rng is None:
            raise ValueError("sampling and noisy runs need an rng")
        n_obs = len(self.template.observables)
        out = np.empty((n_obs, B), dtype=float)
        chunk = self.chunk_columns()
        for lo in range(0, B, chunk):
            hi = min(B, lo + chunk)
            out[:, lo:hi] = self._run_chunk(psi0, slot_signs[lo:hi], mode, rng)
        return out

    def _run_chunk(self, psi0: np.ndarray, signs: np.ndarray, mode: str,
                   rng: RngStream | None) -> np.ndarray:
        B = signs.shape[0]
        states = np.empty((self.dim, B), dtype=np.complex128)
        states[:] = np.asarray(psi0, dtype=np.complex128).reshape(-1)[:, None]
        codes = None
        if self.gamma > 0 and self.n_noise_events:
            u = rng.generator.random((B, self.n_noise_events))
            pick = rng.generator.integers(1, 16, size=(B, self.n_noise_events))
            codes = np.where(u < 15.0 * self.gamma / 16.0, pick, -1).astype(np.int8)
            codes = np.ascontiguousarray(codes.T)  # (events, B)
        for op in self.ops:
            self._apply(states, op, signs, codes)
        if mode == "exact":
            return self._expectations(states)
        for op in self.measure_ops:
            self._apply(states, op, signs, codes)
        uniforms = rng.generator.random(B)
        idx = np.empty(B, dtype=np.int64)
        kernels.sample_indices(states, uniforms, idx)
        n_obs = len(self.obs_masks)
        res = np.empty((n_obs, B), dtype=float)
        for i, mask in enumerate(self.obs_masks):
            res[i] = 1.0 - 2.0 * parity(idx & mask)
        return res

    def _apply(self, states, op: _Op, signs, codes) -> None:
        if op.kind == "1q":
            kernels.apply_1q(states, op.mat, op.q0)
        elif op.kind == "2q":
            kernels.apply_2q(states, op.mat, op.q0, op.q1)
        elif op.kind == "string":
            kernels.apply_string_rotation(states, op.cth, op.sth, op.xmask,
                                          op.zmask, op.c0, kernels.PARITY16)
        elif op.kind == "slot":
            # slot angle theta = sign * magnitude; gate angle is -theta
            kernels.apply_string_rotation_signed(
                states, op.cth, op.sth,
                np.ascontiguousarray(-signs[:, op.slot]),
                op.xmask, op.zmask, op.c0, kernels.PARITY16,
            )
        elif op.kind == "noise":
            if codes is not None:
                kernels.apply_pauli_pair_coded(
                    states, op.q0, op.q1,
                    np.ascontiguousarray(codes[op.noise_index]),
                )
        else:
            raise ValueError(op.kind)

    def _expectations(self, states) -> np.ndarray:
        B = states.shape[1]
        n_obs = len(self.template.observables)
        res = np.empty((n_obs, B), dtype=float)
        buf = np.empty(B, dtype=float)
        for i, obs in enumerate(self.template.observables):
            xm, zm, c0 = _string_params(obs)
            kernels.expect_string(states, xm, zm, c0, kernels.PARITY16, buf)
            res[i] = buf
        return res


def run_template(template: CircuitTemplate, psi0: np.ndarray,
                 slot_signs: np.ndarray, slot_magnitude: float, mode: str,
                 rng: RngStream | None = None) -> np.ndarray:
    """Compile and run in one call; see CompiledTemplate.run."""
    return CompiledTemplate(template, slot_magnitude).run(psi0, slot_signs, mode, rng)
