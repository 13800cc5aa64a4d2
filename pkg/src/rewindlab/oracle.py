"""Ground-truth fidelity by direct quantum simulation.

Two routes:

* :func:`exact_twirl_fidelity` replaces every Haar gate by its exact
  first/second unitary moment and contracts the resulting network
  deterministically.  A gate that is later rewound appears four times in
  <psi|P|psi> (U, U^dag, U*, U^T), so its average is the second moment; a
  gate applied only once appears twice and averages to the first moment.
* :func:`mc_average_fidelity` samples explicit Haar unitaries and runs the
  protocol, giving an estimate with a standard error.

The twirl works on a four-copy vector with per-qudit copy blocks
(c1, c2, c3, c4) = (rho-ket, rho-bra, proj-ket, proj-bra).  The rho block
starts as |0><0|, the projector block as vec(|0><0|) on recycled qudits and
vec(I) elsewhere; the final contraction pairs c1-c4 and c2-c3 on every
qudit.  Each rewound gate contributes

    sum_{sigma,tau} Wg(sigma tau^-1, d) |sigma>><<tau|      (d = q^2)

applied jointly to all four copies of its two qudits, which is the Haar
average of U x U* x U x U*.  Non-rewound gates contribute the first moment
(1/d)|Phi>><<Phi| on the (c1, c2) copies alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from rewindlab.circuits import GateLayout, RecycleTarget
from rewindlab.errors import TooLargeError
from rewindlab.parallel import map_chunks
from rewindlab.result import FidelityResult

if TYPE_CHECKING:
    from rewindlab.noise import KrausChannel

# Memory cap for the folded vector: q^(4n) elements (q=2 up to n=6,
# q=3 up to n=4 by default).
DEFAULT_MAX_ELEMENTS = 1 << 26


def weingarten_pair(d: int) -> tuple[float, float]:
    """Second-moment Weingarten weights (identity, transposition) at dimension d.

    The transposition weight is negative, -1/(d(d^2-1)); only with that sign
    is the averaged twirl unital.
    """
    return 1.0 / (d * d - 1.0), -1.0 / (d * (d * d - 1.0))


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """One Haar-distributed unitary: complex Ginibre, QR, R-phase fix."""
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    qm, r = np.linalg.qr(z)
    diag = np.diagonal(r)
    return qm * (diag / np.abs(diag))


def _haar_batch(dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((count, dim, dim)) + 1j * rng.standard_normal((count, dim, dim))
    qm, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=1, axis2=2)
    return qm * (diag / np.abs(diag))[:, None, :]


@dataclass(frozen=True)
class SeededRng:
    """Master seed with deterministic per-chunk substreams.

    Samples are processed in fixed-size chunks; chunk c draws from the
    generator seeded by SeedSequence(master, spawn_key=(c,)), so estimates
    are bit-identical for a given seed regardless of scheduling.
    """

    master: int
    chunk: int = 4096

    def chunk_rng(self, index: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.master, spawn_key=(index,)))


# -- exact twirl ---------------------------------------------------------


def _pair_vectors(q: int, dtype) -> tuple[np.ndarray, np.ndarray]:
    """Per-qudit four-copy pairing tensors for the two permutations."""
    eye = np.eye(q, dtype=dtype)
    one = np.einsum("ij,kl->ijkl", eye, eye)  # pairs (c1,c2)(c3,c4)
    s = np.einsum("il,jk->ijkl", eye, eye)  # pairs (c1,c4)(c2,c3)
    return one, s


def _axes(qudit: int, copies: tuple[int, ...]) -> list[int]:
    return [4 * (qudit - 1) + c for c in copies]


def _apply_second_moment(v: np.ndarray, q: int, a: int, b: int, wg: tuple[float, float]) -> np.ndarray:
    one, s = _pair_vectors(q, v.dtype)
    ax_a, ax_b = _axes(a, (0, 1, 2, 3)), _axes(b, (0, 1, 2, 3))

    def contract(tau_a, tau_b):
        tmp = np.tensordot(v, tau_a, axes=(ax_a, [0, 1, 2, 3]))
        shifted = [x - 4 for x in ax_b]  # qudit a's axes (a < b) are gone
        return np.tensordot(tmp, tau_b, axes=(shifted, [0, 1, 2, 3]))

    r_one = contract(one, one)
    r_s = contract(s, s)
    wg_e, wg_t = wg
    c_one = wg_e * r_one + wg_t * r_s
    c_s = wg_t * r_one + wg_e * r_s

    out = np.zeros_like(v)
    for tau_q, rest in ((one, c_one), (s, c_s)):
        pair8 = np.multiply.outer(tau_q, tau_q)
        block = np.multiply.outer(pair8, rest)
        out += np.moveaxis(block, range(8), ax_a + ax_b)
    return out


def _apply_first_moment(v: np.ndarray, q: int, a: int, b: int) -> np.ndarray:
    phi = np.eye(q, dtype=v.dtype)  # |Phi> on (c1, c2) of one qudit
    ax_a, ax_b = _axes(a, (0, 1)), _axes(b, (0, 1))
    tmp = np.tensordot(v, phi, axes=(ax_a, [0, 1]))
    shifted = [x - 2 for x in ax_b]
    rest = np.tensordot(tmp, phi, axes=(shifted, [0, 1]))
    block = np.multiply.outer(np.multiply.outer(phi, phi), rest) / q**2
    return np.moveaxis(block, range(4), ax_a + ax_b)


def _apply_superop(v: np.ndarray, q: int, sup: np.ndarray, axes: list[int]) -> np.ndarray:
    """Apply a superoperator tensor over the given copy axes.

    ``sup`` has 2k legs ordered (outputs..., inputs...) with k = len(axes).
    """
    k = len(axes)
    tmp = np.tensordot(v, sup, axes=(axes, list(range(k, 2 * k))))
    return np.moveaxis(tmp, range(v.ndim - k, v.ndim), axes)


def _channel_superops(channel: "KrausChannel"):
    """(rho-side, proj-side) superoperator tensors for one channel.

    rho side: rho -> sum_k E rho E^dag; proj side is the adjoint channel
    O -> sum_k E^dag O E.  Tensors are returned with legs
    (ket_out, bra_out, ket_in, bra_in), each leg of dimension q^arity, and
    are real whenever possible (e.g. Pauli channels) so the noiseless
    float64 path can be kept.
    """
    dim = channel.dim
    sup = np.zeros((dim, dim, dim, dim), dtype=complex)
    adj = np.zeros((dim, dim, dim, dim), dtype=complex)
    for e in channel.operators:
        sup += np.einsum("ik,jl->ijkl", e, e.conj())
        ed = e.conj().T
        adj += np.einsum("ik,jl->ijkl", ed, ed.conj())

    def tighten(t):
        return t.real if np.abs(t.imag).max() < 1e-14 else t

    return tighten(sup), tighten(adj)


def _initial_vector(n: int, q: int, targeted: frozenset[int], dtype) -> np.ndarray:
    v = np.ones((), dtype=dtype)
    zero2 = np.zeros((q, q), dtype=dtype)
    zero2[0, 0] = 1.0
    phi = np.eye(q, dtype=dtype)
    for i in range(1, n + 1):
        proj = zero2 if i in targeted else phi
        block = np.multiply.outer(zero2, proj)
        v = np.multiply.outer(v, block)
    return v


def _final_contraction(v: np.ndarray, n: int, q: int):
    s_cap = np.einsum("il,jk->ijkl", np.eye(q, dtype=v.dtype), np.eye(q, dtype=v.dtype))
    for _ in range(n):
        v = np.tensordot(v, s_cap, axes=([0, 1, 2, 3], [0, 1, 2, 3]))
    return v


def exact_twirl_fidelity(
    layout: GateLayout,
    target: RecycleTarget,
    channel: "KrausChannel | None" = None,
    max_elements: int = DEFAULT_MAX_ELEMENTS,
) -> FidelityResult:
    """Haar-averaged fidelity by exact moment contraction (no sampling)."""
    n, q = layout.n, layout.q
    if q ** (4 * n) > max_elements:
        raise TooLargeError(f"folded vector q^(4n) = {q}^{4 * n} exceeds cap {max_elements}")
    targeted = target.qudits(n)
    if not targeted <= layout.idle:
        from rewindlab.errors import TargetNotIdleError

        raise TargetNotIdleError(f"target {sorted(targeted)} not idle")

    noisy = channel is not None
    dtype = np.float64
    rho_sup = adj_sup = None
    if noisy:
        rho_sup, adj_sup = _channel_superops(channel)
        if np.iscomplexobj(rho_sup) or np.iscomplexobj(adj_sup):
            dtype = np.complex128
        legs = (q,) * (4 * channel.arity)
        rho_sup = rho_sup.reshape(legs).astype(dtype, copy=False)
        adj_sup = adj_sup.reshape(legs).astype(dtype, copy=False)

    v = _initial_vector(n, q, targeted, dtype)
    wg = weingarten_pair(q * q)
    rewound = layout.rewound_ids

    def apply_channel(vec, sup, gate, copies):
        # ``copies`` = (ket, bra) copy indices: (0, 1) rho side, (2, 3) proj side.
        ket, bra = copies
        if channel.arity == 2:
            a, b = gate
            axes = _axes(a, (ket,)) + _axes(b, (ket,)) + _axes(a, (bra,)) + _axes(b, (bra,))
            return _apply_superop(vec, q, sup, axes)
        for w in gate:
            vec = _apply_superop(vec, q, sup, _axes(w, (ket, bra)))
        return vec

    for slot in layout.forward_slots:
        a, b = slot.qudits
        if slot.gate_id in rewound:
            # The partner slot's channel acts below this node on the
            # projector-side copies (adjoint channel), the forward slot's
            # channel above it on the rho-side copies.
            if noisy:
                v = apply_channel(v, adj_sup, (a, b), (2, 3))
            v = _apply_second_moment(v, q, a, b, wg)
            if noisy:
                v = apply_channel(v, rho_sup, (a, b), (0, 1))
        else:
            v = _apply_first_moment(v, q, a, b)
            if noisy:
                v = apply_channel(v, rho_sup, (a, b), (0, 1))

    value = _final_contraction(v, n, q)
    value = complex(value)
    if abs(value.imag) > 1e-10:
        raise ArithmeticError(f"twirl contraction returned complex value {value}")
    return FidelityResult(value=float(value.real), method="twirl")


# -- Monte Carlo ---------------------------------------------------------


def _run_pure_batch(layout: GateLayout, targeted: frozenset[int], rng: np.random.Generator, count: int) -> np.ndarray:
    """Fidelities of ``count`` independent Haar draws (noiseless protocol)."""
    n, q = layout.n, layout.q
    d = q * q
    gate_ids = sorted({s.gate_id for s in layout.slots})
    gates = {gid: _haar_batch(d, count, rng) for gid in gate_ids}

    psi = np.zeros((count, q**n), dtype=complex)
    psi[:, 0] = 1.0
    for slot in layout.slots:
        a = slot.qudits[0]  # acts on (a, a+1), adjacent by construction
        g = gates[slot.gate_id]
        if slot.dagger:
            g = g.conj().transpose(0, 2, 1)
        pre, post = q ** (a - 1), q ** (n - a - 1)
        psi = psi.reshape(count, pre, d, post)
        psi = np.einsum("bij,bpjq->bpiq", g, psi).reshape(count, q**n)

    norms = np.abs(np.einsum("bi,bi->b", psi.conj(), psi))
    if np.max(np.abs(norms - 1.0)) > 1e-9:
        raise ArithmeticError("statevector norm drifted beyond 1e-9")

    shaped = psi.reshape((count,) + (q,) * n)
    idx: list[object] = [slice(None)] * (n + 1)
    for t in targeted:
        idx[t] = 0
    proj = shaped[tuple(idx)].reshape(count, -1)
    return np.einsum("bi,bi->b", proj.conj(), proj).real


def _run_density_batch(
    layout: GateLayout,
    targeted: frozenset[int],
    channel: "KrausChannel",
    rng: np.random.Generator,
    count: int,
) -> np.ndarray:
    """Noisy protocol: per-sample density-matrix evolution at q^(2n)."""
    n, q = layout.n, layout.q
    d = q * q
    dim = q**n
    gate_ids = sorted({s.gate_id for s in layout.slots})
    gates = {gid: _haar_batch(d, count, rng) for gid in gate_ids}

    def embed(mat: np.ndarray, first: int, width: int) -> np.ndarray:
        return np.kron(np.eye(q ** (first - 1)), np.kron(mat, np.eye(q ** (n - first - width + 1))))

    # Dense Kraus sets per gate position, built once.
    slot_kraus: list[list[np.ndarray]] = []
    for slot in layout.slots:
        a = slot.qudits[0]
        if channel.arity == 2:
            slot_kraus.append([embed(e, a, 2) for e in channel.operators])
        else:
            ops = [embed(e, a, 1) for e in channel.operators]
            ops_b = [embed(e, a + 1, 1) for e in channel.operators]
            slot_kraus.append([eb @ ea for ea in ops for eb in ops_b])

    mask = np.ones((q,) * n)
    for t in targeted:
        sel: list[object] = [slice(None)] * n
        sel[t - 1] = slice(1, q)
        mask[tuple(sel)] = 0.0
    pdiag = mask.reshape(dim)

    out = np.empty(count)
    rho0 = np.zeros((dim, dim), dtype=complex)
    rho0[0, 0] = 1.0
    for b in range(count):
        rho = rho0.copy()
        for slot_i, slot in enumerate(layout.slots):
            g = gates[slot.gate_id][b]
            if slot.dagger:
                g = g.conj().T
            gfull = embed(g, slot.qudits[0], 2)
            rho = gfull @ rho @ gfull.conj().T
            rho = sum(e @ rho @ e.conj().T for e in slot_kraus[slot_i])
        out[b] = np.real(np.sum(pdiag * np.diagonal(rho)))
    return out


def mc_average_fidelity(
    layout: GateLayout,
    target: RecycleTarget,
    channel: "KrausChannel | None" = None,
    samples: int = 10_000,
    rng: SeededRng | int = 0,
    max_density_dim: int = 1 << 10,
) -> FidelityResult:
    """Monte-Carlo estimate of the averaged fidelity.

    Noiseless runs use batched pure-state simulation; with a channel each
    sample evolves a density matrix, capped at ``max_density_dim``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if isinstance(rng, int):
        rng = SeededRng(rng)
    targeted = target.qudits(layout.n)
    if channel is not None and layout.q ** layout.n > max_density_dim:
        raise TooLargeError("density-matrix simulation exceeds dimension cap")

    plan = []
    pos = 0
    while pos < samples:
        count = min(rng.chunk, samples - pos)
        plan.append((len(plan), count))
        pos += count

    def run_chunk(job):
        index, count = job
        gen = rng.chunk_rng(index)
        if channel is None:
            return _run_pure_batch(layout, targeted, gen, count)
        return _run_density_batch(layout, targeted, channel, gen, count)

    values = np.concatenate(map_chunks(run_chunk, plan))
    mean = float(np.mean(values))
    stderr = float(np.std(values, ddof=1) / np.sqrt(samples)) if samples > 1 else float("nan")
    return FidelityResult(value=mean, method="mc", stderr=stderr)
