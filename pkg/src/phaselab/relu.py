"""Explicit feed-forward ReLU networks and compilers onto them.

The IR is a list of structured-sparse affine layers, each with a per-unit
ReLU mask (an all-False mask is a purely affine layer). Structured sparsity
keeps parameter accounting linear under block composition. Compilers:
piecewise-linear -> network (exact), coordinatewise block composition,
hypercube vertex identifier, switch gates, boolean circuit -> network, and
the two assembled score networks for the lattice-mixture family.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .circuits import BooleanCircuit, OneWayCandidate
from .instance import InstanceParams, phase_of_bit
from .piecewise import PiecewiseLinear, build_good_interval, clamp_tails
from .scores import DiscreteGaussianSpec, dg_smoothed_score, two_point_score


@dataclass(frozen=True)
class Layer:
    w: sp.csr_matrix  # (out, in)
    b: np.ndarray  # (out,)
    relu: np.ndarray  # bool mask (out,); False entries stay affine

    def __post_init__(self):
        if self.w.shape[0] != self.b.shape[0] or self.b.shape != self.relu.shape:
            raise ValueError("layer shape mismatch")
        if not (np.all(np.isfinite(self.w.data)) and np.all(np.isfinite(self.b))):
            raise ValueError("layer weights must be finite")


@dataclass(frozen=True)
class ReluNetwork:
    layers: tuple[Layer, ...]

    def __post_init__(self):
        if not self.layers:
            raise ValueError("network needs at least one layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if b.w.shape[1] != a.w.shape[0]:
                raise ValueError("layer dimensions do not chain")

    @property
    def input_dim(self) -> int:
        return self.layers[0].w.shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].w.shape[0]

    @property
    def depth(self) -> int:
        return len(self.layers)


@dataclass(frozen=True)
class ParamReport:
    param_count: int
    max_abs_weight: float
    depth: int


def _layer(w, b, relu=None) -> Layer:
    w = sp.csr_matrix(w)
    b = np.asarray(b, dtype=float)
    if relu is None:
        mask = np.zeros(w.shape[0], dtype=bool)
    elif isinstance(relu, bool):
        mask = np.full(w.shape[0], relu)
    else:
        mask = np.asarray(relu, dtype=bool)
    return Layer(w, b, mask)


def eval_net(net: ReluNetwork, x) -> np.ndarray:
    """Forward evaluation on (n, inputDim) or (inputDim,) inputs."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    z = x[None, :] if single else x
    if z.shape[1] != net.input_dim:
        raise ValueError("input dimension mismatch")
    width = max(max(l.w.shape) for l in net.layers)
    chunk = max(1, int(2**22) // width)
    outs = []
    for lo in range(0, z.shape[0], chunk):
        h = z[lo : lo + chunk]
        for l in net.layers:
            h = (l.w @ h.T).T + l.b
            if l.relu.any():
                h[:, l.relu] = np.maximum(h[:, l.relu], 0.0)
        outs.append(h)
    out = np.concatenate(outs, axis=0)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite activation in network evaluation")
    return out[0] if single else out


def report(net: ReluNetwork) -> ParamReport:
    count = sum(l.w.nnz + l.b.size for l in net.layers)
    max_abs = max(
        max(np.abs(l.w.data).max() if l.w.nnz else 0.0, np.abs(l.b).max() if l.b.size else 0.0)
        for l in net.layers
    )
    return ParamReport(int(count), float(max_abs), net.depth)


def identity_net(dim: int, depth: int = 1) -> ReluNetwork:
    return ReluNetwork(tuple(_layer(sp.eye(dim), np.zeros(dim)) for _ in range(depth)))


def chain(*nets: ReluNetwork) -> ReluNetwork:
    """Sequential composition (output of each feeds the next)."""
    layers: list[Layer] = []
    for n in nets:
        layers.extend(n.layers)
    return ReluNetwork(tuple(layers))


def compile_piecewise(l: PiecewiseLinear) -> ReluNetwork:
    """Exact one-hidden-layer network computing l.

    g(x) = a1*x + b1 + sum_k c_k*ReLU(x - t_k) with c_k the slope increments
    at the transition points t_k; the linear term rides on ReLU(x) - ReLU(-x).
    """
    bp = l.breakpoints
    slopes = l.slopes()
    a1 = slopes[0]
    c = slopes[1:] - slopes[:-1]  # one increment per breakpoint
    b1 = l.values[0] - a1 * bp[0]

    keep = c != 0.0
    ck, tk = c[keep], bp[keep]
    w1 = np.concatenate(([1.0, -1.0], np.ones(ck.size)))[:, None]
    bias1 = np.concatenate(([0.0, 0.0], -tk))
    w2 = np.concatenate(([a1, -a1], ck))[None, :]
    net = ReluNetwork(
        (
            _layer(w1, bias1, relu=True),
            _layer(w2, np.array([b1])),
        )
    )
    bound = max(
        1.0, abs(a1), abs(b1),
        float(np.abs(ck).max()) if ck.size else 0.0,
        float(np.abs(tk).max()) if tk.size else 0.0,
    )
    assert report(net).max_abs_weight <= bound + 1e-12
    return net


def compose_coordinatewise(nets: list[ReluNetwork]) -> ReluNetwork:
    """Block-diagonal composition: output = (nets[0](x_block0), nets[1](x_block1), ...).

    Nets of unequal depth are padded with identity affine layers at the end.
    """
    if not nets:
        raise ValueError("need at least one network")
    depth = max(n.depth for n in nets)
    padded = [
        n if n.depth == depth else chain(n, identity_net(n.output_dim, depth - n.depth))
        for n in nets
    ]
    layers = []
    for i in range(depth):
        ws = [n.layers[i].w for n in padded]
        bs = np.concatenate([n.layers[i].b for n in padded])
        masks = np.concatenate([n.layers[i].relu for n in padded])
        layers.append(Layer(sp.block_diag(ws, format="csr"), bs, masks))
    return ReluNetwork(tuple(layers))


def vertex_identifier(d: int, alpha: float) -> ReluNetwork:
    """Per-coordinate clamp(x_i/alpha, -1, 1); equals sign(x_i) when |x_i| > alpha."""
    if not (0 < alpha < 1):
        raise ValueError("alpha must lie in (0, 1)")
    # clamp(x/a,-1,1) = (ReLU(x+a) - ReLU(x-a))/a - 1
    rows, cols, vals = [], [], []
    for i in range(d):
        rows += [2 * i, 2 * i + 1]
        cols += [i, i]
        vals += [1.0, 1.0]
    w1 = sp.coo_matrix((vals, (rows, cols)), shape=(2 * d, d)).tocsr()
    b1 = np.tile([alpha, -alpha], d)
    rows, cols, vals = [], [], []
    for i in range(d):
        rows += [i, i]
        cols += [2 * i, 2 * i + 1]
        vals += [1.0 / alpha, -1.0 / alpha]
    w2 = sp.coo_matrix((vals, (rows, cols)), shape=(d, 2 * d)).tocsr()
    net = ReluNetwork((_layer(w1, b1, relu=True), _layer(w2, -np.ones(d))))
    assert report(net).max_abs_weight <= 2.0 / alpha + 1.0
    return net


def switch_net(dims: int, T: float) -> ReluNetwork:
    """On (x, y) with |x_i| <= T and y in {-1,+1}: outputs x if y=+1 else 0.

    output_i = ReLU(x_i - 2T + 2T*y) - ReLU(-x_i - 2T + 2T*y).
    """
    if T <= 0:
        raise ValueError("T must be positive")
    rows, cols, vals = [], [], []
    for i in range(dims):
        rows += [2 * i, 2 * i, 2 * i + 1, 2 * i + 1]
        cols += [i, dims, i, dims]
        vals += [1.0, 2.0 * T, -1.0, 2.0 * T]
    w1 = sp.coo_matrix((vals, (rows, cols)), shape=(2 * dims, dims + 1)).tocsr()
    b1 = np.full(2 * dims, -2.0 * T)
    rows, cols, vals = [], [], []
    for i in range(dims):
        rows += [i, i]
        cols += [2 * i, 2 * i + 1]
        vals += [1.0, -1.0]
    w2 = sp.coo_matrix((vals, (rows, cols)), shape=(dims, 2 * dims)).tocsr()
    return ReluNetwork((_layer(w1, b1, relu=True), _layer(w2, np.zeros(dims))))


def circuit_to_relu(c: BooleanCircuit | OneWayCandidate) -> ReluNetwork:
    """Exact network computing the circuit on {-1,+1}^n inputs.

    Interior wires use {0,1} with 1 = True (input translation b = (1-x)/2,
    output translation x = 1 - 2b). Gates per level: AND = ReLU(sum - (k-1)),
    OR = ReLU(1 - ReLU(1 - sum)), NOT = ReLU(1 - y); earlier wires pass
    through ReLU identity rows (safe: all interior values are in {0,1}).
    """
    if isinstance(c, OneWayCandidate):
        c = c.circuit
    n = c.n_inputs
    layers = [_layer(sp.eye(n) * -0.5, np.full(n, 0.5))]  # +-1 -> {0,1}

    level = [0] * n + [0] * len(c.gates)
    for k, g in enumerate(c.gates):
        level[n + k] = 1 + max(level[r] for r in g.inputs)
    n_levels = max(level) if c.gates else 0

    wire_pos = {i: i for i in range(n)}  # reference -> position in current bundle
    width = n
    for lv in range(1, n_levels + 1):
        gates_here = [(k, g) for k, g in enumerate(c.gates) if level[n + k] == lv]
        ors = [(k, g) for k, g in gates_here if g.kind == "OR"]
        # sublayer A: passthrough + inner ReLU(1 - sum y_i) for OR gates
        wa = sp.lil_matrix((width + len(ors), width))
        ba = np.zeros(width + len(ors))
        for p in range(width):
            wa[p, p] = 1.0
        t_pos = {}
        for t, (k, g) in enumerate(ors):
            row = width + t
            for r in set(g.inputs):  # repeated references carry no extra logic
                wa[row, wire_pos[r]] = -1.0
            ba[row] = 1.0
            t_pos[k] = row
        layers.append(_layer(wa.tocsr(), ba, relu=True))
        # sublayer B: passthrough + gate outputs, drop the inner OR units
        wb = sp.lil_matrix((width + len(gates_here), width + len(ors)))
        bb = np.zeros(width + len(gates_here))
        for p in range(width):
            wb[p, p] = 1.0
        for t, (k, g) in enumerate(gates_here):
            row = width + t
            if g.kind == "AND":
                refs = set(g.inputs)
                for r in refs:
                    wb[row, wire_pos[r]] = 1.0
                bb[row] = 1.0 - len(refs)
            elif g.kind == "OR":
                wb[row, t_pos[k]] = -1.0
                bb[row] = 1.0
            else:  # NOT
                wb[row, wire_pos[g.inputs[0]]] = -1.0
                bb[row] = 1.0
            wire_pos[n + k] = row
        layers.append(_layer(wb.tocsr(), bb, relu=True))
        width += len(gates_here)

    wout = sp.lil_matrix((len(c.outputs), width))
    for j, r in enumerate(c.outputs):
        wout[j, wire_pos[r]] = -2.0
    layers.append(_layer(wout.tocsr(), np.ones(len(c.outputs))))  # {0,1} -> +-1
    return ReluNetwork(tuple(layers))


# --- score-network assembly -------------------------------------------------

# Clamp radius cap for per-coordinate compiled scores inside assembled nets.
# The family's tails are sub-Gaussian, so mass beyond 12 standard deviations
# is < 1e-30 and the capped clamp adds no measurable error while keeping
# hidden-layer width manageable.
_CLAMP_CAP_SDS = 12.0


def _build_clamped_score(score, kappa: float, sigma: float, m2: float, mu: float = 0.0) -> PiecewiseLinear:
    """Three-stage piecewise approximation with the capped clamp radius."""
    gamma = sigma * np.sqrt(kappa)
    delta = kappa**2
    threshold = np.log(1.0 / delta) / sigma
    radius = min(m2 / np.sqrt(delta), _CLAMP_CAP_SDS * m2)
    l2 = build_good_interval(score, gamma, threshold, mu - radius - 2 * gamma, mu + radius + 2 * gamma)
    delta_eff = (m2 / radius) ** 2
    return clamp_tails(l2, mu, m2, max(delta, delta_eff))


def _linear_pl(slope: float, radius: float) -> PiecewiseLinear:
    """A globally linear function through the origin as a 2-piece object."""
    bp = np.array([-radius, radius])
    return PiecewiseLinear(bp, slope * bp, slope, slope)


def assemble_score_net_small_sigma(
    params: InstanceParams,
    f: BooleanCircuit | OneWayCandidate,
    sigma: float,
    kappa: float,
    alpha: float = 0.5,
) -> ReluNetwork:
    """Orthant-surrogate network: vertex identification, circuit evaluation of
    the phase bits, re-centered Gaussian scores on the first block, and
    switch-combined phase scores on the tail block."""
    if not (0 < kappa <= 0.25):
        raise ValueError("kappa must lie in (0, 1/4]")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    d, dp, D = params.d, params.d_prime, params.dim
    v = 1.0 + sigma**2

    # per-coordinate pieces
    phase_nets = {}
    phase_pls = {}
    for b in (1, -1):
        spec = DiscreteGaussianSpec(params.eps, phase_of_bit(b, params.eps), sigma)
        pl = _build_clamped_score(
            lambda t, spec=spec: dg_smoothed_score(spec, t), kappa, sigma, np.sqrt(v)
        )
        phase_pls[b] = pl
        phase_nets[b] = compile_piecewise(pl)
    gauss_net = compile_piecewise(_linear_pl(-1.0 / v, _CLAMP_CAP_SDS * np.sqrt(v)))
    T = float(np.ceil(max(np.abs(phase_pls[1].values).max(), np.abs(phase_pls[-1].values).max()))) + 1.0

    # stage 1: r = clamp(x_head/alpha, -1, 1), bundle [x; r; r]
    vid = vertex_identifier(d, alpha)
    s1a_w = sp.vstack([sp.eye(D), _pad_cols(vid.layers[0].w, D)], format="csr")
    s1a_b = np.concatenate([np.zeros(D), vid.layers[0].b])
    s1a_m = np.concatenate([np.zeros(D, bool), vid.layers[0].relu])
    s1b_w = sp.lil_matrix((D + 2 * d, D + 2 * d))
    for p in range(D):
        s1b_w[p, p] = 1.0
    w2 = vid.layers[1].w
    for copy in range(2):
        base = D + copy * d
        blk = w2.tocoo()
        for i, j, val in zip(blk.row, blk.col, blk.data):
            s1b_w[base + i, D + j] = val
    s1b_b = np.concatenate([np.zeros(D), vid.layers[1].b, vid.layers[1].b])
    stage1 = ReluNetwork(
        (
            Layer(s1a_w, s1a_b, s1a_m),
            _layer(s1b_w.tocsr(), s1b_b),
        )
    )

    # stage 2: [x; r; r] -> [x; r; c]
    stage2 = compose_coordinatewise([identity_net(D + d), circuit_to_relu(f)])

    # stage 3: [x; r; c] -> [u; xt; xt; c], u = x_head - R*r
    w3 = sp.lil_matrix((d + 3 * dp, D + d + dp))
    for i in range(d):
        w3[i, i] = 1.0
        w3[i, D + i] = -params.R
    for j in range(dp):
        w3[d + j, d + j] = 1.0
        w3[d + dp + j, d + j] = 1.0
        w3[d + 2 * dp + j, D + d + j] = 1.0
    stage3 = ReluNetwork((_layer(w3.tocsr(), np.zeros(d + 3 * dp)),))

    # stage 4: per-coordinate score nets; bundle [g; p+; p-; c]
    stage4 = compose_coordinatewise(
        [gauss_net] * d + [phase_nets[1]] * dp + [phase_nets[-1]] * dp + [identity_net(dp)]
    )

    # stage 5: out_head = g; out_tail_j = switch(p+_j, c_j) + switch(p-_j, -c_j)
    w5a = sp.lil_matrix((d + 4 * dp, d + 3 * dp))
    b5a = np.zeros(d + 4 * dp)
    m5a = np.zeros(d + 4 * dp, bool)
    for i in range(d):
        w5a[i, i] = 1.0
    for j in range(dp):
        r0 = d + 4 * j
        pj, mj, cj = d + j, d + dp + j, d + 2 * dp + j
        w5a[r0 + 0, pj], w5a[r0 + 0, cj], b5a[r0 + 0] = 1.0, 2.0 * T, -2.0 * T
        w5a[r0 + 1, pj], w5a[r0 + 1, cj], b5a[r0 + 1] = -1.0, 2.0 * T, -2.0 * T
        w5a[r0 + 2, mj], w5a[r0 + 2, cj], b5a[r0 + 2] = 1.0, -2.0 * T, -2.0 * T
        w5a[r0 + 3, mj], w5a[r0 + 3, cj], b5a[r0 + 3] = -1.0, -2.0 * T, -2.0 * T
        m5a[r0 : r0 + 4] = True
    w5b = sp.lil_matrix((D, d + 4 * dp))
    for i in range(d):
        w5b[i, i] = 1.0
    for j in range(dp):
        r0 = d + 4 * j
        w5b[d + j, r0 + 0] = 1.0
        w5b[d + j, r0 + 1] = -1.0
        w5b[d + j, r0 + 2] = 1.0
        w5b[d + j, r0 + 3] = -1.0
    stage5 = ReluNetwork((Layer(sp.csr_matrix(w5a), b5a, m5a), _layer(w5b.tocsr(), np.zeros(D))))

    return chain(stage1, stage2, stage3, stage4, stage5)


def _pad_cols(w: sp.spmatrix, total_cols: int) -> sp.csr_matrix:
    """Widen a block that reads the first columns of a larger bundle."""
    extra = total_cols - w.shape[1]
    return sp.hstack([w, sp.csr_matrix((w.shape[0], extra))], format="csr")


def assemble_score_net_large_sigma(
    params: InstanceParams, sigma: float, kappa: float
) -> ReluNetwork:
    """Product network: compiled two-point-mixture score per head coordinate,
    exact linear score -x/(1+sigma^2) per tail coordinate."""
    if not (0 < kappa <= 0.25):
        raise ValueError("kappa must lie in (0, 1/4]")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    v = 1.0 + sigma**2
    m2_head = np.sqrt(params.R**2 + v)
    head_pl = _build_clamped_score(
        lambda t: two_point_score(params.R, sigma, t), kappa, sigma, m2_head
    )
    head_net = compile_piecewise(head_pl)
    tail_net = compile_piecewise(_linear_pl(-1.0 / v, _CLAMP_CAP_SDS * np.sqrt(v)))
    return compose_coordinatewise([head_net] * params.d + [tail_net] * params.d_prime)


# --- text serialization ------------------------------------------------------


def network_to_text(net: ReluNetwork) -> str:
    """Self-describing text format: sparse triplets in row-major order."""
    lines = [f"# relu-network v1\nlayers {net.depth}"]
    for l in net.layers:
        coo = l.w.tocoo()
        order = np.lexsort((coo.col, coo.row))
        lines.append(f"layer {l.w.shape[0]} {l.w.shape[1]} {l.w.nnz}")
        for i, j, val in zip(coo.row[order], coo.col[order], coo.data[order]):
            lines.append(f"{i} {j} {val:.17g}")
        lines.append("bias " + " ".join(f"{v:.17g}" for v in l.b))
        lines.append("relu " + "".join("1" if m else "0" for m in l.relu))
    return "\n".join(lines) + "\n"


def network_from_text(text: str) -> ReluNetwork:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    it = iter(lines)
    head = next(it).split()
    if head[0] != "layers":
        raise ValueError("not a relu-network file")
    layers = []
    for _ in range(int(head[1])):
        tag, rows, cols, nnz = next(it).split()
        if tag != "layer":
            raise ValueError("malformed layer header")
        rows, cols, nnz = int(rows), int(cols), int(nnz)
        ri, ci, vi = [], [], []
        for _ in range(nnz):
            i, j, val = next(it).split()
            ri.append(int(i)), ci.append(int(j)), vi.append(float(val))
        w = sp.coo_matrix((vi, (ri, ci)), shape=(rows, cols)).tocsr()
        btoks = next(it).split()
        if btoks[0] != "bias":
            raise ValueError("malformed bias line")
        b = np.array([float(t) for t in btoks[1:]])
        mline = next(it).split()
        mask = np.array([ch == "1" for ch in mline[1]]) if len(mline) > 1 else np.zeros(rows, bool)
        layers.append(Layer(w, b, mask))
    return ReluNetwork(tuple(layers))
