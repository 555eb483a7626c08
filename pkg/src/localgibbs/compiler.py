"""Variational compilation of gadget unitaries onto a CZ-ladder template.

Template convention (the circuit diagram fixes only the gate counts, so the
exact sequence is pinned down here once and used everywhere):

* qubit 0 is the gadget ancilla (most significant bit), qubits 1..k-1 are the
  support sites in ascending order; the ancilla couples to the middle system
  qubit;
* available CZ edges are the system chain (1,2), (2,3), ... plus the ancilla
  edge; each module applies three CZ gates cycling through that edge list in
  an alternating order, every CZ preceded by a layer of parameterized
  single-qubit gates on all k qubits;
* one final single-qubit layer closes the circuit.

A module therefore contributes two-qubit depth 3, and a depth-m template has
(3m + 1) single-qubit layers, i.e. 3k(3m + 1) parameters.

The loss is the squared Frobenius norm restricted to the ancilla-|0> input
columns (the only block that survives preparation and discard), and the
optimizer is plain bias-corrected Adam with analytic gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "u_gate",
    "u_gate_derivatives",
    "TemplateCircuit",
    "ladder_template",
    "template_unitary",
    "template_gates",
    "compilation_loss",
    "compilation_loss_phase_aligned",
    "AdamConfig",
    "AdamState",
    "adam_step",
    "compile_gadget",
    "CompileResult",
    "loss_and_gradient",
]


def u_gate(theta, phi, lam):
    """The parameterized single-qubit gate.

    [[cos(t/2),            -e^{i lam} sin(t/2)      ],
     [e^{i phi} sin(t/2),   e^{i (phi+lam)} cos(t/2)]]
    """
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    return np.array(
        [
            [c, -np.exp(1j * lam) * s],
            [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
        ],
        dtype=complex,
    )


def u_gate_derivatives(theta, phi, lam):
    """Analytic partials of u_gate with respect to (theta, phi, lam)."""
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    ephi, elam, eboth = np.exp(1j * phi), np.exp(1j * lam), np.exp(1j * (phi + lam))
    d_theta = 0.5 * np.array([[-s, -elam * c], [ephi * c, -eboth * s]], dtype=complex)
    d_phi = 1j * np.array([[0.0, 0.0], [ephi * s, eboth * c]], dtype=complex)
    d_lam = 1j * np.array([[0.0, -elam * s], [0.0, eboth * c]], dtype=complex)
    return d_theta, d_phi, d_lam


@dataclass(frozen=True)
class TemplateCircuit:
    """CZ-ladder template: k qubits, m modules, 3 CZ edges per module."""

    qubits: int
    modules: int
    cz_pattern: tuple  # per module: tuple of 3 edges (q1, q2)

    def __post_init__(self):
        if self.modules < 1:
            raise ValueError("at least one module required")
        if len(self.cz_pattern) != self.modules:
            raise ValueError("one 3-edge tuple per module required")
        for edges in self.cz_pattern:
            if len(edges) != 3:
                raise ValueError("each module carries exactly three CZ gates")
            for q1, q2 in edges:
                if not (0 <= q1 < self.qubits and 0 <= q2 < self.qubits and q1 != q2):
                    raise ValueError(f"bad CZ edge ({q1}, {q2})")

    @property
    def dim(self):
        return 2 ** self.qubits

    @property
    def n_layers(self):
        return 3 * self.modules + 1

    @property
    def n_params(self):
        return 3 * self.qubits * self.n_layers

    @property
    def two_qubit_depth(self):
        return 3 * self.modules

    def elements(self):
        """Circuit elements in application order: ('u', layer) / ('cz', edge)."""
        layer = 0
        for edges in self.cz_pattern:
            for edge in edges:
                yield ("u", layer)
                layer += 1
                yield ("cz", edge)
        yield ("u", layer)


def ladder_template(k, modules):
    """Template on the T-shaped gadget connectivity.

    Edges are the system chain plus the ancilla leg; modules cycle through
    them with the ancilla edge slotted between the system edges.
    """
    if k < 2:
        raise ValueError("a gadget template needs at least two qubits")
    chain = [(q, q + 1) for q in range(1, k - 1)]
    center = 1 + (k - 2) // 2
    anc = (0, center)
    if chain:
        mid = (len(chain) + 1) // 2
        edges = chain[:mid] + [anc] + chain[mid:]
    else:
        edges = [anc]
    pattern = []
    pos = 0
    for _ in range(modules):
        pattern.append(tuple(edges[(pos + i) % len(edges)] for i in range(3)))
        pos = (pos + 3) % len(edges)
    return TemplateCircuit(k, modules, tuple(pattern))


def _cz_diag(edge, k):
    q1, q2 = edge
    idx = np.arange(2 ** k)
    b1 = (idx >> (k - 1 - q1)) & 1
    b2 = (idx >> (k - 1 - q2)) & 1
    return np.where((b1 & b2) == 1, -1.0, 1.0).astype(complex)


def _layer_matrices(tpl, thetas):
    """Batched single-qubit layer unitaries.

    thetas: (R, n_params); returns list over layers of (R, d, d) arrays plus
    the per-layer per-qubit gate parameters for derivative evaluation.
    """
    r = thetas.shape[0]
    k = tpl.qubits
    layers = []
    for layer in range(tpl.n_layers):
        mats = None
        for q in range(k):
            base = 3 * (layer * k + q)
            th, ph, lm = thetas[:, base], thetas[:, base + 1], thetas[:, base + 2]
            c, s = np.cos(th / 2.0), np.sin(th / 2.0)
            g = np.empty((r, 2, 2), dtype=complex)
            g[:, 0, 0] = c
            g[:, 0, 1] = -np.exp(1j * lm) * s
            g[:, 1, 0] = np.exp(1j * ph) * s
            g[:, 1, 1] = np.exp(1j * (ph + lm)) * c
            mats = g if mats is None else _kron_batch(mats, g)
        layers.append(mats)
    return layers


def _kron_batch(a, b):
    r, da, _ = a.shape
    _, db, _ = b.shape
    out = np.einsum("rij,rkl->rikjl", a, b)
    return out.reshape(r, da * db, da * db)


def template_unitary(tpl: TemplateCircuit, theta):
    """The full template unitary V(theta)."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (tpl.n_params,):
        raise ValueError(f"expected {tpl.n_params} parameters, got {theta.shape}")
    layers = _layer_matrices(tpl, theta[None, :])
    v = np.eye(tpl.dim, dtype=complex)
    for kind, payload in tpl.elements():
        if kind == "u":
            v = layers[payload][0] @ v
        else:
            v = _cz_diag(payload, tpl.qubits)[:, None] * v
    return v


def template_gates(tpl: TemplateCircuit, theta):
    """Flat 1- and 2-qubit gate sequence in application order, for the noisy
    circuit simulator: ('u', qubit, (theta, phi, lam)) and ('cz', edge)."""
    theta = np.asarray(theta, dtype=float)
    gates = []
    for kind, payload in tpl.elements():
        if kind == "u":
            for q in range(tpl.qubits):
                base = 3 * (payload * tpl.qubits + q)
                gates.append(("u", q, tuple(theta[base : base + 3])))
        else:
            gates.append(("cz", payload))
    return gates


def compilation_loss(u_target, v):
    """sum_i sum_{j <= d/2} |U_ij - V_ij|^2: squared Frobenius norm on the
    ancilla-|0> input columns (ancilla = most significant qubit)."""
    u_target = np.asarray(u_target)
    v = np.asarray(v)
    if u_target.shape != v.shape:
        raise ValueError("dimension mismatch")
    h = max(1, u_target.shape[1] // 2)
    d = u_target[:, :h] - v[:, :h]
    return float(np.sum(np.abs(d) ** 2))


def compilation_loss_phase_aligned(u_target, v):
    """Diagnostic variant minimizing over a global phase analytically."""
    u_target = np.asarray(u_target)
    v = np.asarray(v)
    h = max(1, u_target.shape[1] // 2)
    a, b = u_target[:, :h], v[:, :h]
    overlap = np.vdot(a, b)
    return float(np.sum(np.abs(a) ** 2) + np.sum(np.abs(b) ** 2) - 2.0 * np.abs(overlap))


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.99
    beta2: float = 0.99
    epsilon: float = 1e-3
    iterations: int = 8000
    restarts: int = 50


@dataclass(frozen=True)
class AdamState:
    params: np.ndarray
    m: np.ndarray
    v: np.ndarray
    t: int
    config: AdamConfig

    @classmethod
    def init(cls, params, config=None):
        params = np.asarray(params, dtype=float)
        return cls(params, np.zeros_like(params), np.zeros_like(params), 0, config or AdamConfig())


def adam_step(state: AdamState, gradient):
    """One bias-corrected Adam update; epsilon sits outside the square root."""
    g = np.asarray(gradient, dtype=float)
    cfg = state.config
    t = state.t + 1
    m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * g
    v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * g ** 2
    mhat = m / (1.0 - cfg.beta1 ** t)
    vhat = v / (1.0 - cfg.beta2 ** t)
    params = state.params - cfg.learning_rate * mhat / (np.sqrt(vhat) + cfg.epsilon)
    return replace(state, params=params, m=m, v=v, t=t)


def _loss_and_grad_batch(tpl: TemplateCircuit, thetas, u_target):
    """Loss and analytic gradient for a batch of parameter vectors.

    Reverse-mode accumulation through the element product, on the d x d/2
    column slab that the loss touches.
    """
    rbatch = thetas.shape[0]
    k = tpl.qubits
    d = tpl.dim
    h = max(1, d // 2)
    layers = _layer_matrices(tpl, thetas)
    elements = list(tpl.elements())

    target = u_target[:, :h]
    slab = np.broadcast_to(np.eye(d, dtype=complex)[:, :h], (rbatch, d, h)).copy()
    prefixes = [slab]
    for kind, payload in elements:
        if kind == "u":
            slab = np.matmul(layers[payload], slab)
        else:
            slab = _cz_diag(payload, k)[None, :, None] * slab
        prefixes.append(slab)
    m_res = prefixes[-1] - target[None, :, :]
    loss = np.sum(np.abs(m_res) ** 2, axis=(1, 2))

    grad = np.zeros_like(thetas)
    back = m_res
    # Walk elements in reverse; `back` holds S_j^+ M for the element about to
    # be visited, and prefixes[j] is the slab entering that element.  For a
    # u-layer the whole-layer cotangent K[d, e] = sum_c conj(back)[d, c] A[e, c]
    # is contracted against each single-qubit derivative without ever building
    # the d x d derivative matrices.
    for j in range(len(elements) - 1, -1, -1):
        kind, payload = elements[j]
        a_prev = prefixes[j]
        if kind == "cz":
            back = _cz_diag(payload, k)[None, :, None] * back
            continue
        layer = payload
        qmats = []
        for q in range(k):
            base = 3 * (layer * k + q)
            th, ph, lm = thetas[:, base], thetas[:, base + 1], thetas[:, base + 2]
            c, s = np.cos(th / 2.0), np.sin(th / 2.0)
            g = np.empty((rbatch, 2, 2), dtype=complex)
            g[:, 0, 0] = c
            g[:, 0, 1] = -np.exp(1j * lm) * s
            g[:, 1, 0] = np.exp(1j * ph) * s
            g[:, 1, 1] = np.exp(1j * (ph + lm)) * c
            qmats.append(g)
        kmat = np.einsum("rdc,rec->rde", back.conj(), a_prev)
        for q in range(k):
            dl, dr = 2 ** q, 2 ** (k - q - 1)
            kv = kmat.reshape(rbatch, dl, 2, dr, dl, 2, dr)
            left = None
            for qq in range(q):
                left = qmats[qq] if left is None else _kron_batch(left, qmats[qq])
            right = None
            for qq in range(q + 1, k):
                right = qmats[qq] if right is None else _kron_batch(right, qmats[qq])
            t = _contract_cotangent(kv, left, right)
            base = 3 * (layer * k + q)
            th, ph, lm = thetas[:, base], thetas[:, base + 1], thetas[:, base + 2]
            c, s = np.cos(th / 2.0), np.sin(th / 2.0)
            ephi, elam = np.exp(1j * ph), np.exp(1j * lm)
            eboth = ephi * elam
            du = np.zeros((3, rbatch, 2, 2), dtype=complex)
            du[0, :, 0, 0] = -0.5 * s
            du[0, :, 0, 1] = -0.5 * elam * c
            du[0, :, 1, 0] = 0.5 * ephi * c
            du[0, :, 1, 1] = -0.5 * eboth * s
            du[1, :, 1, 0] = 1j * ephi * s
            du[1, :, 1, 1] = 1j * eboth * c
            du[2, :, 0, 1] = -1j * elam * s
            du[2, :, 1, 1] = 1j * eboth * c
            contrib = np.einsum("prab,rab->pr", du, t)
            grad[:, base : base + 3] = 2.0 * contrib.real.T
        back = np.matmul(layers[layer].conj().transpose(0, 2, 1), back)
    return loss, grad


def _contract_cotangent(kv, left, right):
    """sum_{i,j,m,l} L[i,j] R[m,l] K[(i,a,m),(j,b,l)] -> T[a, b] (batched)."""
    if left is not None and right is not None:
        k1 = np.einsum("rij,riamjbl->rambl", left, kv)
        return np.einsum("rml,rambl->rab", right, k1)
    if left is not None:
        return np.einsum("rij,riajb->rab", left, kv[:, :, :, 0, :, :, 0])
    if right is not None:
        return np.einsum("rml,rambl->rab", right, kv[:, 0, :, :, 0, :, :])
    return kv[:, 0, :, 0, 0, :, 0]


def loss_and_gradient(tpl, theta, u_target):
    """Single-theta wrapper around the batched loss/gradient evaluation."""
    theta = np.asarray(theta, dtype=float)
    loss, grad = _loss_and_grad_batch(tpl, theta[None, :], np.asarray(u_target, dtype=complex))
    return float(loss[0]), grad[0]


@dataclass
class CompileResult:
    best_theta: np.ndarray
    best_loss: float
    best_restart: int
    loss_traces: np.ndarray  # (restarts, iterations)
    failed_restarts: tuple = ()


def compile_gadget(u_target, tpl: TemplateCircuit, config: AdamConfig = None, seed=0):
    """Multi-restart Adam minimization of the compilation loss.

    Restarts start from independent uniform [0, 2pi) parameter vectors drawn
    from a Philox stream keyed by the seed, run batched, and the global
    minimum wins.  A restart whose loss turns non-finite is dropped from the
    competition but leaves its trace in place.
    """
    config = config or AdamConfig()
    u_target = np.asarray(u_target, dtype=complex)
    if u_target.shape != (tpl.dim, tpl.dim):
        raise ValueError("target dimension does not match the template")
    rng = np.random.Generator(np.random.Philox(key=[int(seed) & (2 ** 64 - 1), 0xC0DE]))
    thetas = rng.uniform(0.0, 2.0 * np.pi, size=(config.restarts, tpl.n_params))
    m = np.zeros_like(thetas)
    v = np.zeros_like(thetas)
    traces = np.full((config.restarts, config.iterations), np.nan)
    alive = np.ones(config.restarts, dtype=bool)
    for it in range(1, config.iterations + 1):
        loss, grad = _loss_and_grad_batch(tpl, thetas, u_target)
        bad = ~np.isfinite(loss)
        if bad.any():
            alive &= ~bad
            grad[bad] = 0.0
        traces[:, it - 1] = loss
        m = config.beta1 * m + (1.0 - config.beta1) * grad
        v = config.beta2 * v + (1.0 - config.beta2) * grad ** 2
        mhat = m / (1.0 - config.beta1 ** it)
        vhat = v / (1.0 - config.beta2 ** it)
        thetas = thetas - config.learning_rate * mhat / (np.sqrt(vhat) + config.epsilon)
    final_loss, _ = _loss_and_grad_batch(tpl, thetas, u_target)
    final_loss = np.where(alive, final_loss, np.inf)
    best = int(np.argmin(final_loss))
    return CompileResult(
        best_theta=thetas[best].copy(),
        best_loss=float(final_loss[best]),
        best_restart=best,
        loss_traces=traces,
        failed_restarts=tuple(np.flatnonzero(~alive)),
    )
