"""Numeric multiply phase: micro kernels and batched plan execution.

Work is counted in 4x4x4 micro products; one full 16x16x16 block product is
64 of them.  At fine4 granularity each micro product is gated by the float64
product of the stored 4x4 sub-block norms against tau; at coarse16 every
micro product of a planned block runs.

Accumulation order is fixed for reproducibility: tasks accumulate into
their product leaf in plan order, k sub-blocks ascend within a task, and
the micro kernel adds rank-1 contributions in ascending k.  The batched
executor reproduces that order bit for bit (it only vectorizes across
distinct product leaves), so results match a sequential block_multiply_16
loop exactly and are identical run to run.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .core import LeafBlock, QuadtreeMatrix
from .symbolic import MultiplyPlan, build_plan

GRANULARITIES = ("fine4", "coarse16")

# Modeled flops of one 4x4x4 micro product: m*(k*(1+2n)-n) at m=k=n=4.
MICRO_FLOPS = 128


@dataclass
class MultiplyConfig:
    tau: float = 0.0
    granularity: str = "fine4"
    alpha: float = 1.0
    beta: float = 0.0

    def __post_init__(self):
        if self.granularity not in GRANULARITIES:
            raise ValueError(
                f"granularity must be one of {GRANULARITIES}, got {self.granularity!r}"
            )
        if np.isnan(self.tau) or self.tau < 0:
            raise ValueError(f"tau must be nonnegative, got {self.tau}")
        if not (np.isfinite(self.alpha) and np.isfinite(self.beta)):
            raise ValueError("alpha and beta must be finite")


@dataclass
class ExecCounters:
    """Work counters of one numeric pass."""

    products4: int = 0
    skipped4: int = 0
    seconds: float = 0.0

    @property
    def complexity(self) -> int:
        # complexity unit == one 4x4x4 product
        return self.products4

    @property
    def flops(self) -> int:
        return self.products4 * MICRO_FLOPS

    def merge(self, other: ExecCounters) -> ExecCounters:
        return ExecCounters(
            self.products4 + other.products4,
            self.skipped4 + other.skipped4,
            self.seconds + other.seconds,
        )


def micro_kernel_4(a4: np.ndarray, b4: np.ndarray, c4: np.ndarray) -> np.ndarray:
    """c4 += a4 b4 as rank-1 updates in ascending k, element precision of c4."""
    if a4.shape != (4, 4) or b4.shape != (4, 4) or c4.shape != (4, 4):
        raise ValueError("micro kernel operands must be 4x4")
    for k in range(4):
        c4 += a4[:, k, np.newaxis] * b4[k, np.newaxis, :]
    return c4


def block_multiply_16(
    a: LeafBlock, b: LeafBlock, c: LeafBlock, cfg: MultiplyConfig
) -> ExecCounters:
    """Accumulate one block product into c.values.

    fine4 skips micro products whose sub-norm product is below cfg.tau and
    leaves the skipped region of c untouched; coarse16 runs all of them.
    c norms are not refreshed here, the caller recomputes them once per pass.
    """
    nb = a.values.shape[0]
    if b.values.shape[0] != nb or c.values.shape[0] != nb:
        raise ValueError("block sizes of a, b, c differ")
    if nb % 4:
        raise ValueError(f"numeric phase needs 4 | n_b, got n_b = {nb}")
    s = nb // 4
    counters = ExecCounters()
    a4 = a.values.reshape(s, 4, s, 4).transpose(0, 2, 1, 3)  # [p, r, ii, kk]
    b4 = b.values.reshape(s, 4, s, 4).transpose(0, 2, 1, 3)  # [r, q, kk, jj]
    c4 = c.values.reshape(s, 4, s, 4).transpose(0, 2, 1, 3)  # [p, q, ii, jj]
    fine = cfg.granularity == "fine4"
    for r in range(s):
        if fine:
            pn = (
                a.subnorms[:, r].astype(np.float64)[:, None]
                * b.subnorms[r, :].astype(np.float64)[None, :]
            )
            mask = pn >= cfg.tau
            nexec = int(mask.sum())
            counters.products4 += nexec
            counters.skipped4 += mask.size - nexec
            if nexec == 0:
                continue
            mf = None if nexec == mask.size else mask.astype(np.float32)[:, :, None, None]
        else:
            counters.products4 += s * s
            mf = None
        for k in range(4):
            prod = a4[:, r, :, k][:, None, :, None] * b4[r, :, k, :][None, :, None, :]
            if mf is not None:
                prod *= mf
            c4 += prod
    return counters


def _gather_slots(keys: np.ndarray, packed_keys: np.ndarray, side: str) -> np.ndarray:
    if packed_keys.size == 0:
        raise ValueError(f"plan references leaves but {side} has none (stale handles)")
    slots = np.searchsorted(packed_keys, keys)
    slots_c = np.minimum(slots, packed_keys.size - 1)
    if not np.array_equal(packed_keys[slots_c], keys):
        raise ValueError(f"plan references leaves not stored in {side} (stale handles)")
    return slots_c


def execute_plan(
    plan: MultiplyPlan,
    a: QuadtreeMatrix,
    b: QuadtreeMatrix,
    c: QuadtreeMatrix | None,
    cfg: MultiplyConfig,
) -> tuple[QuadtreeMatrix, ExecCounters]:
    """Run the numeric phase: C = alpha * (planned products) + beta * C.

    C leaves are allocated on demand and zero initialized; C norms are
    recomputed once after the pass.  With alpha = 0 the product pass is
    skipped outright (counters stay zero) and C = beta * C_before exactly.
    """
    return _execute(plan, a, b, c, cfg, dense_kernel=False)


def _execute(plan, a, b, c, cfg, dense_kernel):
    t0 = time.perf_counter()
    if plan.tau != cfg.tau:
        raise ValueError(f"plan built for tau={plan.tau}, config has tau={cfg.tau}")
    if a.n_b != b.n_b:
        raise ValueError(f"block sizes differ: {a.n_b} vs {b.n_b}")
    if a.n != b.m:
        raise ValueError(f"inner dimensions differ: {a.m}x{a.n} times {b.m}x{b.n}")
    nb = a.n_b
    if nb % 4:
        raise ValueError(f"numeric phase needs 4 | n_b, got n_b = {nb}")
    if c is None:
        c = QuadtreeMatrix(a.m, b.n, nb)
    elif (c.m, c.n) != (a.m, b.n) or c.n_b != nb:
        raise ValueError(
            f"accumulator is {c.m}x{c.n} (n_b={c.n_b}), "
            f"product needs {a.m}x{b.n} (n_b={nb})"
        )
    counters = ExecCounters()
    produced = (
        _run_batched(plan.tasks, a, b, cfg, counters, dense_kernel)
        if plan.tasks and cfg.alpha != 0
        else {}
    )
    _compose(c, produced, cfg.alpha, cfg.beta)
    c.compute_norms()
    counters.seconds = time.perf_counter() - t0
    return c, counters


def _run_batched(tasks, a, b, cfg, counters, dense_kernel):
    """Accumulate all tasks into per-c_key float32 blocks.

    Tasks are grouped by c_key (stable, so plan order survives inside each
    group) and walked by in-group position; each pass updates at most one
    task per group, which keeps every leaf's accumulation strictly in plan
    order while the arithmetic runs batched across groups.
    """
    nb = a.n_b
    s = nb // 4
    T = len(tasks)
    akeys = np.fromiter((t.a for t in tasks), np.uint64, T)
    bkeys = np.fromiter((t.b for t in tasks), np.uint64, T)
    ckeys = np.fromiter((t.c_key for t in tasks), np.uint64, T)
    ka, va, sa = a.packed_leaves()
    kb, vb, sb = b.packed_leaves()
    a_slot = _gather_slots(akeys, ka, "A")
    b_slot = _gather_slots(bkeys, kb, "B")

    order = np.argsort(ckeys, kind="stable")
    ck_s = ckeys[order]
    as_s = a_slot[order]
    bs_s = b_slot[order]
    new_group = np.r_[True, ck_s[1:] != ck_s[:-1]]
    starts = np.flatnonzero(new_group)
    group_keys = ck_s[starts]
    gid = np.cumsum(new_group) - 1
    pos_in_group = np.arange(T, dtype=np.int64) - starts[gid]
    n_pass = int(pos_in_group.max()) + 1

    fine = (not dense_kernel) and cfg.granularity == "fine4"
    tau = cfg.tau
    acc = np.zeros((starts.size, s, s, 4, 4), np.float32)  # [g, p, q, ii, jj]
    for sl in range(n_pass):
        sel = np.flatnonzero(pos_in_group == sl)
        rows = gid[sel]
        g = sel.size
        av = va[as_s[sel]]
        bv = vb[bs_s[sel]]
        local = acc[rows]
        if dense_kernel:
            res = np.matmul(av, bv)
            local += res.reshape(g, s, 4, s, 4).transpose(0, 1, 3, 2, 4)
            counters.products4 += g * s * s * s
            acc[rows] = local
            continue
        av4 = av.reshape(g, s, 4, s, 4).transpose(0, 1, 3, 2, 4)  # [g,p,r,ii,kk]
        bv4 = bv.reshape(g, s, 4, s, 4).transpose(0, 1, 3, 2, 4)  # [g,r,q,kk,jj]
        if fine:
            an = sa[as_s[sel]].astype(np.float64)  # [g, p, r]
            bn = sb[bs_s[sel]].astype(np.float64)  # [g, r, q]
        for r in range(s):
            if fine:
                pn = an[:, :, r][:, :, None] * bn[:, r, :][:, None, :]  # [g, p, q]
                mask = pn >= tau
                nexec = int(mask.sum())
                counters.products4 += nexec
                counters.skipped4 += mask.size - nexec
                if nexec == 0:
                    continue
                mf = (
                    None
                    if nexec == mask.size
                    else mask.astype(np.float32)[:, :, :, None, None]
                )
            else:
                counters.products4 += g * s * s
                mf = None
            for k in range(4):
                prod = (
                    av4[:, :, r, :, k][:, :, None, :, None]
                    * bv4[:, r, :, k, :][:, None, :, None, :]
                )
                if mf is not None:
                    prod *= mf
                local += prod
        acc[rows] = local

    produced = {}
    for gi, key in enumerate(group_keys.tolist()):
        produced[int(key)] = acc[gi].transpose(0, 2, 1, 3).reshape(nb, nb)
    return produced


def _compose(c: QuadtreeMatrix, produced: dict, alpha: float, beta: float) -> None:
    """C leaves := alpha * produced + beta * old, exact scaling in float32."""
    alpha32 = np.float32(alpha)
    beta32 = np.float32(beta)
    if beta == 0:
        c.clear()
        for key in sorted(produced):
            c.put_leaf(key, alpha32 * produced[key] if alpha != 1 else produced[key])
        return
    for key, node in c.leaf_items():
        scaled = node.leaf.values * beta32 if beta != 1 else node.leaf.values
        block = produced.pop(key, None)
        if block is not None:
            scaled = (alpha32 * block if alpha != 1 else block) + scaled
        node.leaf.values = np.ascontiguousarray(scaled)
    for key in sorted(produced):
        c.put_leaf(key, alpha32 * produced[key] if alpha != 1 else produced[key])


def execute_plan_dense_leaf(
    plan: MultiplyPlan,
    a: QuadtreeMatrix,
    b: QuadtreeMatrix,
    c: QuadtreeMatrix | None,
    alpha: float = 1.0,
    beta: float = 0.0,
) -> tuple[QuadtreeMatrix, ExecCounters]:
    """Execute a plan with unconditional dense leaf products (library
    matmul kernel), the benchmark foil for the gated micro kernels.
    products4 reports equivalent 4x4x4 units, 64 per block product."""
    cfg = MultiplyConfig(tau=plan.tau, granularity="coarse16", alpha=alpha, beta=beta)
    return _execute(plan, a, b, c, cfg, dense_kernel=True)


def multiply(
    a: QuadtreeMatrix,
    b: QuadtreeMatrix,
    cfg: MultiplyConfig | None = None,
    c: QuadtreeMatrix | None = None,
) -> tuple[QuadtreeMatrix, MultiplyPlan, ExecCounters]:
    """Symbolic plus numeric phases in one call."""
    if cfg is None:
        cfg = MultiplyConfig()
    plan = build_plan(a, b, cfg.tau)
    out, counters = execute_plan(plan, a, b, c, cfg)
    return out, plan, counters
