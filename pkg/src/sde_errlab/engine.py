"""Streaming Monte Carlo engine.

Paths are processed in fixed-size chunks; inside a chunk, time advances in
blocks of fine steps for all paths at once, so memory stays at
O(paths x block) however fine the grid.  The per-element arithmetic is the
same as in :mod:`sde_errlab.scheme`, :mod:`sde_errlab.reference` and
:mod:`sde_errlab.limitlaw`, so every per-path output is bit-identical to the
whole-trajectory functions and independent of chunking and worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import repeat
from multiprocessing import get_context

import numpy as np

from .limitlaw import limit_noise_scale
from .model import Model
from .path import STREAM_B, STREAM_W, BrownianStream, coarsen_array
from .reference import ReferenceStepper
from .scheme import Scheme, check_state, check_symmetrizable, continuous_value, make_anchor

WORKERS_ENV = "SDE_ERRLAB_WORKERS"
DEFAULT_CHUNK = 1000


@dataclass(frozen=True)
class SimulationPlan:
    model: Model
    x0: float
    T: float
    n_fine: int
    seed: int
    ns: tuple[int, ...] = ()
    schemes: tuple[str, ...] = ()
    track_sup: bool = False
    track_z: bool = False
    limit: bool = False
    checkpoints: tuple[int, ...] = ()  # fine-grid indices at which U is recorded
    w_stream: int = STREAM_W
    b_stream: int = STREAM_B
    block: int = field(default=0)
    # > 1: also run the reference on the grid coarsened by this factor (self-consistency check)
    aux_ref_factor: int = 1

    def __post_init__(self):
        for n in self.ns:
            if self.n_fine % n:
                raise ValueError(f"n={n} does not divide the fine grid of {self.n_fine} steps")
        if any(not 0 <= c <= self.n_fine for c in self.checkpoints):
            raise ValueError("checkpoint outside the fine grid")
        if self.block == 0:
            r_max = self.n_fine // min(self.ns) if self.ns else 1
            object.__setattr__(self, "block", max(r_max, min(self.n_fine, 2048)))
        if self.n_fine % self.block:
            raise ValueError(f"block {self.block} does not divide {self.n_fine}")
        if self.block % self.aux_ref_factor:
            raise ValueError("aux_ref_factor must divide the block length")
        for sch in self.schemes:
            if Scheme(sch) is Scheme.SYMMETRIZED_EULER:
                if not self.x0 > 0:
                    raise ValueError("symmetrized Euler needs x0 > 0")
                check_symmetrizable(self.model)


def simulate_chunk(plan: SimulationPlan, path_indices) -> dict[str, np.ndarray]:
    """Per-path outputs for one chunk of path indices, keyed by name."""
    model = plan.model
    idx = list(path_indices)
    P = len(idx)
    T, n_fine = plan.T, plan.n_fine
    hf = T / n_fine
    w_stream = BrownianStream(plan.seed, [plan.w_stream + i for i in idx], T, n_fine)
    b_blocks = None
    if plan.limit:
        b_blocks = BrownianStream(plan.seed, [plan.b_stream + i for i in idx], T, n_fine).blocks(plan.block)
    ref = ReferenceStepper(model, plan.x0, P, T, n_fine)
    ref_max = np.full(P, abs(plan.x0))
    aux = None
    if plan.aux_ref_factor > 1:
        aux = ReferenceStepper(model, plan.x0, P, T, n_fine // plan.aux_ref_factor)

    runs = []
    for sch in plan.schemes:
        for n in plan.ns:
            runs.append({"scheme": Scheme(sch), "n": n, "r": n_fine // n, "x": np.full(P, float(plan.x0)),
                         "sup": np.zeros(P), "k": 0})
    z = {n: np.zeros((3, P)) for n in plan.ns} if plan.track_z else {}

    ckpts = sorted(set(plan.checkpoints))
    ckpt_pos = {ck: c for c, ck in enumerate(ckpts)}
    U = np.zeros(P)
    u_abs_max = np.zeros(P)
    u_at = np.zeros((len(ckpts), P))
    umax_at = np.zeros((len(ckpts), P))
    c_scale = limit_noise_scale(T)

    k0 = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for dw in w_stream.blocks(plan.block):
            L = dw.shape[0]
            xs = ref.advance(dw)  # (L + 1, P)
            np.fmax(ref_max, np.max(np.abs(xs), axis=0), out=ref_max)
            if aux is not None:
                aux.advance(coarsen_array(dw, plan.aux_ref_factor, axis=0))

            for run in runs:
                _advance_scheme(model, run, dw, xs, hf, T, plan.track_sup)

            for n, acc in z.items():
                _accumulate_z(acc, dw, n, n_fine // n, hf, T)

            if plan.limit:
                U = _advance_limit(model, U, xs, dw, next(b_blocks), hf, c_scale, k0, ckpt_pos,
                                   u_abs_max, u_at, umax_at)
            k0 += L

    out = {"ref_T": ref.x.copy(), "ref_max": ref_max}
    if aux is not None:
        out["ref_coarse_T"] = aux.x.copy()
    for run in runs:
        key = f"{run['scheme'].value}:{run['n']}"
        out[f"{key}:terminal"] = run["x"]
        if plan.track_sup:
            out[f"{key}:sup"] = np.maximum(run["sup"], np.abs(run["x"] - ref.x))
    for n, acc in z.items():
        root_n = np.sqrt(n)
        out[f"z12:{n}"] = root_n * acc[0]
        out[f"z21:{n}"] = root_n * hf * acc[1]
        out[f"z22:{n}"] = root_n / 2.0 * acc[2]
    if plan.limit:
        out["U_T"] = U
        out["U_ckpt"] = u_at.T.copy()
        out["Umax_ckpt"] = umax_at.T.copy()
    return out


def _advance_scheme(model, run, dw, xs, hf, T, track_sup):
    scheme, n, r = run["scheme"], run["n"], run["r"]
    h = T / n
    dws = coarsen_array(dw, r, axis=0)
    dt = (np.arange(r) * hf)[:, None]
    since = np.zeros((r,) + dw.shape[1:])
    x, sup = run["x"], run["sup"]
    for j in range(dws.shape[0]):
        a = make_anchor(model, x, scheme)
        if track_sup:
            seg = dw[j * r:(j + 1) * r]
            np.cumsum(seg[:-1], axis=0, out=since[1:])
            vals = continuous_value(scheme, a, dt, since)
            np.maximum(sup, np.max(np.abs(vals - xs[j * r:(j + 1) * r]), axis=0), out=sup)
        x = continuous_value(scheme, a, h, dws[j])
        run["k"] += 1
        check_state(model, scheme, run["k"], x)
    run["x"] = x


def _advance_limit(model, U, xs, dw, dB, hf, c, k0, ckpt_pos, u_abs_max, u_at, umax_at):
    # coefficients depend only on the reference, so evaluate them for the whole block;
    # the per-step arithmetic matches limit_step term by term
    X = xs[:-1]
    dmu = model.drift_deriv(X)
    sp = model.diffusion_deriv(X)
    noise = c * (model.diffusion(X) * sp) * dB
    L = dw.shape[0]
    ublk = np.empty_like(dw)
    for j in range(L):
        U = U + dmu[j] * U * hf + sp[j] * U * dw[j] + noise[j]
        ublk[j] = U
    absblk = np.abs(ublk)
    for ck, c_idx in ckpt_pos.items():
        j = ck - k0 - 1
        if 0 <= j < L:
            u_at[c_idx] = ublk[j]
            umax_at[c_idx] = np.maximum(u_abs_max, absblk[: j + 1].max(axis=0))
    np.maximum(u_abs_max, absblk.max(axis=0), out=u_abs_max)
    return U


def _accumulate_z(acc, dw, n, r, hf, T):
    steps = dw.shape[0] // r
    seg = dw.reshape((steps, r) + dw.shape[1:])
    since = np.zeros_like(seg)
    np.cumsum(seg[:, :-1], axis=1, out=since[:, 1:])
    ds = (np.arange(r) * hf)[None, :, None]
    dws = coarsen_array(dw, r, axis=0)
    acc[0] += np.sum(ds * seg, axis=(0, 1))
    acc[1] += np.sum(since, axis=(0, 1))
    acc[2] += np.sum(dws * dws - T / n, axis=0)


def resolve_workers(workers: int | None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run(plan: SimulationPlan, paths: int, workers: int | None = 1, chunk: int = DEFAULT_CHUNK,
        first_index: int = 0) -> dict[str, np.ndarray]:
    """Simulate ``paths`` paths and return per-path outputs in path-index order."""
    if paths < 1:
        raise ValueError("need at least one path")
    bounds = [range(s, min(s + chunk, paths)) for s in range(0, paths, chunk)]
    bounds = [range(first_index + b.start, first_index + b.stop) for b in bounds]
    workers = resolve_workers(workers)
    if workers == 1 or len(bounds) == 1:
        parts = [simulate_chunk(plan, b) for b in bounds]
    else:
        with ProcessPoolExecutor(max_workers=workers, mp_context=get_context("fork")) as ex:
            parts = list(ex.map(simulate_chunk, repeat(plan), bounds))
    return {key: np.concatenate([p[key] for p in parts], axis=0) for key in parts[0]}
