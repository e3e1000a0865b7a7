"""Brute-force reference solver for small models.

Enumerates every 0/1 assignment of the image and slot variables.  Target
indicators follow from coverage (a target counts whenever some chosen image
sees it, which is optimal because rewards are non-negative).  Buffer levels
follow the storage recursion and battery levels take the largest value the
energy rows allow, so each enumerated point is checked against every model
row and bound exactly as written.
"""

from __future__ import annotations

import math
import time

import numpy as np

from ..model import PlanModel
from .core import INFEASIBLE, OPTIMAL, Solution, finish

DEFAULT_BINARY_LIMIT = 20


class TooLargeError(ValueError):
    pass


def solve_exhaustive(model: PlanModel, binary_limit: int = DEFAULT_BINARY_LIMIT, *,
                     chunk: int = 1 << 14, tol: float = 1e-7) -> Solution:
    t0 = time.perf_counter()
    st = model.structure
    arr = model.arrays()
    if np.any(arr.c < 0):
        raise ValueError("exhaustive solver assumes non-negative objective coefficients")
    w_vars = sorted(st.image_var.values())
    z_vars = sorted(st.slot_var.values())
    dec = np.array(w_vars + z_vars, dtype=np.int64)
    k = dec.size
    if k > binary_limit:
        raise TooLargeError(f"{k} image/slot binaries exceed the exhaustive limit of {binary_limit}")
    A = arr.A.toarray()
    n = model.n_vars
    total = 1 << k
    best_val = -math.inf
    best = None
    lo_scale = 1.0 + np.maximum(np.abs(np.where(np.isfinite(arr.row_lo), arr.row_lo, 0)),
                                np.abs(np.where(np.isfinite(arr.row_hi), arr.row_hi, 0)))
    shifts = np.arange(k, dtype=np.int64)
    target_cols = [(j, np.array(st.target_images[m], dtype=np.int64)) for m, j in st.target_var.items()]
    for start in range(0, total, chunk):
        codes = np.arange(start, min(total, start + chunk), dtype=np.int64)
        X = np.zeros((codes.size, n))
        if k:
            X[:, dec] = (codes[:, None] >> shifts) & 1
        for j, imgs in target_cols:
            if imgs.size:
                X[:, j] = X[:, imgs].max(axis=1)
        for sat in st.satellites:
            if not sat.cycles:
                continue
            sa = np.full(codes.size, float(sat.buffer_initial))
            ea = np.full(codes.size, float(sat.battery_initial))
            for ct in sat.cycles:
                sc = X[:, list(ct.images)].sum(axis=1) if ct.images else np.zeros(codes.size)
                spv = X[:, list(ct.slots)].sum(axis=1) if ct.slots else np.zeros(codes.size)
                C = ct.energy_per_image * sc + ct.energy_per_slot * spv
                enet = ct.net_generation - C
                sa_n = sa + sc - spv
                ea_n = np.minimum(np.minimum(ea + enet, sat.battery_capacity + ct.drop_tail - C),
                                  sat.battery_capacity)
                X[:, ct.sa] = sa
                X[:, ct.ea] = ea
                X[:, ct.sc] = sc
                X[:, ct.sp] = spv
                X[:, ct.enet] = enet
                X[:, ct.sa_next] = sa_n
                X[:, ct.ea_next] = ea_n
                sa, ea = sa_n, ea_n
        act = X @ A.T
        ok = np.all((act >= arr.row_lo - tol * lo_scale) & (act <= arr.row_hi + tol * lo_scale), axis=1)
        ok &= np.all((X >= arr.lb - tol * (1 + np.abs(arr.lb))) & (X <= arr.ub + tol * (1 + np.abs(arr.ub))), axis=1)
        if not ok.any():
            continue
        obj = X @ arr.c
        obj[~ok] = -math.inf
        i = int(np.argmax(obj))
        if obj[i] > best_val + 1e-12:
            best_val = float(obj[i])
            best = X[i].copy()
    if best is None:
        return finish(model, INFEASIBLE, None, -math.inf, t0, total,
                      message="no assignment satisfies the model", solver="exhaustive")
    return finish(model, OPTIMAL, best, best_val, t0, total, solver="exhaustive")
