"""Vectorized, grid-seeded Newton iteration used for pre-images and critical points."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .kernel import evaluate_batch
from .rules import dedupe_points
from .sphere import INF

MAX_STEPS = 60
STEP_TOL = 1e-12
BAIL = 1e6
RESIDUAL_TOL = 1e-8
GRID = 64


@dataclass
class NewtonOutcome:
    """Converged roots (deduplicated, canonical order) and per-seed bookkeeping."""

    roots: list
    seeds: int
    converged: int
    failed: int  # seeds that hit the step budget, diverged or stalled


def newton_batch(fmap, seeds, target, tree=None, dtree=None):
    """Run Newton for ``tree(z) = target`` from every seed at once.

    ``target`` may be :data:`INF`, in which case Newton is applied to
    ``1/tree`` (the update becomes z + f/f').  Returns ``(z, ok)`` where
    ``ok`` marks seeds whose final residual passes the tolerance.
    """
    tree = fmap.expression if tree is None else tree
    dtree = tree.diff() if dtree is None else dtree
    z = np.array(seeds, dtype=complex).ravel()
    n = z.size
    alive = np.ones(n, dtype=bool)
    done = np.zeros(n, dtype=bool)
    to_inf = target is INF
    t = 0j if to_inf else complex(target)
    with np.errstate(all="ignore"):
        for _ in range(MAX_STEPS):
            idx = np.flatnonzero(alive & ~done)
            if idx.size == 0:
                break
            w = z[idx]
            fv, fs = evaluate_batch(fmap, w, tree)
            dv, ds = evaluate_batch(fmap, w, dtree)
            if to_inf:
                landed = fs == ex.POLE
                done[idx[landed]] = True
                step = -fv / dv
            else:
                step = (fv - t) / dv
            good = (fs == ex.FINITE) & (ds == ex.FINITE) & np.isfinite(step)
            if to_inf:
                good &= ~landed
                alive[idx[~good & ~landed]] = False
            else:
                alive[idx[~good]] = False
            g_idx = idx[good]
            znew = w[good] - step[good]
            z[g_idx] = znew
            bail = ~(np.abs(znew) <= BAIL)
            alive[g_idx[bail]] = False
            small = np.abs(step[good]) <= STEP_TOL * np.maximum(1.0, np.abs(znew))
            done[g_idx[small & ~bail]] = True
        ok = alive.copy()
        if ok.any():
            fv, fs = evaluate_batch(fmap, z[ok], tree)
            if to_inf:
                res_ok = (fs == ex.POLE) | ((fs == ex.FINITE) & (np.abs(fv) >= 1.0 / RESIDUAL_TOL))
            else:
                res_ok = (fs == ex.FINITE) & (np.abs(fv - t) <= RESIDUAL_TOL * max(1.0, abs(t)))
            idx = np.flatnonzero(ok)
            ok[idx[~res_ok]] = False
    return z, ok


def _snap(z):
    # drop round-off sized real/imaginary parts so real roots come out real
    scale = 1e-14 * np.maximum(1.0, np.abs(z))
    re = np.where(np.abs(z.real) <= scale, 0.0, z.real)
    im = np.where(np.abs(z.imag) <= scale, 0.0, z.imag)
    return re + 1j * im


def solve(fmap, window, target, grid=GRID, tree=None, dtree=None) -> NewtonOutcome:
    """Roots of ``tree(z) = target`` inside ``window`` from a ``grid x grid`` seed lattice."""
    seeds = window.grid(grid, grid)
    z, ok = newton_batch(fmap, seeds, target, tree, dtree)
    inside = ok & window.contains_array(z)
    roots = dedupe_points(_snap(z[inside]))
    return NewtonOutcome(roots, int(seeds.size), int(ok.sum()), int((~ok).sum()))
