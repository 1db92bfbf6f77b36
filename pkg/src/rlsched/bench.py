"""Benchmark comparing the compiled kernels against the pure NumPy fallback.

Measures the two real hot paths (single-observation forward during rollout,
batched forward+backward during updates) at compact- and image-sized inputs,
plus a short end-to-end training run per backend.
"""

from __future__ import annotations

import time
from contextlib import contextmanager

import numpy as np

from . import _purepy, backend, nets
from .env import EnvConfig, SchedulingEnv
from .ppo import PPOConfig, train
from .scenarios import get_scenario


@contextmanager
def backend_override(enabled: bool):
    """Temporarily force the compiled backend on or off (dispatch is per call)."""
    previous = backend.COMPILED_ENABLED
    backend.COMPILED_ENABLED = enabled and backend.HAVE_COMPILED
    try:
        yield
    finally:
        backend.COMPILED_ENABLED = previous


def _time_usec(fn, iters: int) -> float:
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(iters):
        fn()
    return (time.perf_counter() - t0) / iters * 1e6


def bench_kernels(iters: int = 2000) -> list[dict]:
    rows = []
    cases = [("compact-sized (121)", 121, 400), ("image-sized (2220)", 2220, 40)]
    for label, dim, batch_iters in cases:
        params = nets.init_policy(dim, 11, W=10, H=20, seed=0)
        rng = np.random.default_rng(0)
        x = rng.standard_normal(dim)
        X = np.ascontiguousarray(rng.standard_normal((50, dim)))
        dlogits = np.ascontiguousarray(rng.standard_normal((50, 11)))
        dvalues = np.ascontiguousarray(rng.standard_normal(50))

        def pure_act():
            _purepy.act_forward(params.trunk, params.heads, x)

        def pure_fwd_bwd():
            logits, values, acts = _purepy.mlp_forward(params.trunk, params.heads, X)
            _purepy.mlp_backward(params.trunk, params.heads, acts, dlogits, dvalues)

        rows.append({"kernel": f"forward x1 {label}", "backend": "pure",
                     "usec": _time_usec(pure_act, iters)})
        rows.append({"kernel": f"fwd+bwd x50 {label}", "backend": "pure",
                     "usec": _time_usec(pure_fwd_bwd, batch_iters)})
        if backend.HAVE_COMPILED:
            k = backend._kernels
            a = params.arrays
            xc = np.ascontiguousarray(x)

            def comp_act():
                k.act2(*a[:8], xc)

            def comp_fwd_bwd():
                _, _, H1, H2 = k.forward2(*a[:8], X)
                k.backward2(a[0], a[2], a[4], a[6], X, H1, H2, dlogits, dvalues)

            rows.append({"kernel": f"forward x1 {label}", "backend": "compiled",
                         "usec": _time_usec(comp_act, iters)})
            rows.append({"kernel": f"fwd+bwd x50 {label}", "backend": "compiled",
                         "usec": _time_usec(comp_fwd_bwd, batch_iters)})
    return rows


def bench_training(steps: int = 2000) -> list[dict]:
    """End-to-end agent steps per second for both backends on scenario 1."""
    rows = []
    modes = [("pure", False)] + ([("compiled", True)] if backend.HAVE_COMPILED else [])
    for label, enabled in modes:
        with backend_override(enabled):
            factory = lambda: SchedulingEnv(EnvConfig(
                scenario=get_scenario(1), transitions="sparse", reward_scope="window"))
            t0 = time.perf_counter()
            train(factory, PPOConfig(total_steps=steps), seed=0)
            dt = time.perf_counter() - t0
        rows.append({"backend": label, "steps": steps, "seconds": dt,
                     "steps_per_sec": steps / dt})
    return rows


def format_table(rows: list[dict]) -> str:
    if not rows:
        return "(no rows)"
    cols = list(rows[0])
    widths = {c: max(len(c), *(len(_fmt(r[c])) for r in rows)) for c in cols}
    lines = ["  ".join(c.ljust(widths[c]) for c in cols)]
    lines += ["  ".join(_fmt(r[c]).ljust(widths[c]) for c in cols) for r in rows]
    return "\n".join(lines)


def _fmt(v) -> str:
    return f"{v:.2f}" if isinstance(v, float) else str(v)


def main(iters: int = 2000, steps: int = 2000) -> None:
    print(f"active backend: {backend.active_backend()} "
          f"(compiled available: {backend.HAVE_COMPILED})")
    print(format_table(bench_kernels(iters)))
    print()
    print(format_table(bench_training(steps)))


if __name__ == "__main__":
    main()
