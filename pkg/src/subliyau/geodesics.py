"""Carnot-Caratheodory distances by direct transcription.

A horizontal path on ``[0, 1]`` is driven by piecewise-constant controls
``u_k = (u_k1, u_k2)`` on ``K`` equal cells; its endpoint from ``e`` is

    E(u) = prod_k exp(dt (u_k1 X + u_k2 Y)),   dt = 1/K,

and its length is ``sum_k dt |u_k|``.  We minimize the energy
``sum_k dt |u_k|^2`` plus a quadratic endpoint penalty, raising the penalty
weight tenfold over four stages, with a batched Levenberg-Marquardt solver
that handles many pairs and starts at once.  A final minimum-norm Newton
projection puts the endpoint on the target.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .groups import get_model

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(6)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS


class NoConvergenceError(RuntimeError):
    pass


@dataclass
class PathConfig:
    cells: int = 24
    starts: int = 8
    penalty: float = 1e2
    stages: int = 4
    growth: float = 10.0
    max_iter: int = 150
    tol: float = 1e-6
    seed: int = 0


@dataclass
class HorizontalPath:
    controls: np.ndarray
    endpoint: np.ndarray
    residual: float
    model_name: str

    @property
    def cells(self):
        return len(self.controls)

    @property
    def length(self):
        return float(np.sum(np.linalg.norm(self.controls, axis=1)) / self.cells)

    def states(self):
        model = get_model(self.model_name)
        dt = 1.0 / self.cells
        g = model.identity()
        out = [g]
        for u in self.controls:
            g = g @ model.exp(np.array([dt * u[0], dt * u[1], 0.0]))
            out.append(g)
        return np.array(out)

    def write_csv(self, path):
        states = self.states()
        n = states.shape[-1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "u1", "u2"] + [f"g{i}{j}" for i in range(n) for j in range(n)])
            for k, g in enumerate(states):
                u = self.controls[min(k, self.cells - 1)]
                w.writerow([f"{k / self.cells:.17g}", f"{u[0]:.17g}", f"{u[1]:.17g}"] + [f"{v:.17g}" for v in g.ravel()])


def _cell_exps(model, U, dt):
    coeffs = np.zeros(U.shape[:-1] + (3,))
    coeffs[..., :2] = dt * U
    return model.exp(coeffs)


def _endpoint(model, U, dt):
    M = _cell_exps(model, U, dt)
    E = M[:, 0]
    for k in range(1, M.shape[1]):
        E = E @ M[:, k]
    return E


def _jacobian(model, U, dt):
    """Endpoint and ``dE/du`` with shape ``(B, n*n, 2K)``."""
    B, K, _ = U.shape
    n = model.size
    coeffs = np.zeros((B, K, len(_GL_NODES), 3))
    coeffs[..., :2] = dt * _GL_NODES[None, None, :, None] * U[:, :, None, :]
    partial = model.exp(coeffs)  # exp(s dt A_k) at Gauss nodes
    M = _cell_exps(model, U, dt)
    # d exp(dt A)[dt B] = dt int_0^1 exp(s dt A) B exp((1-s) dt A) ds; nodes are symmetric
    rev = partial[:, :, ::-1]
    basis = model.basis[:2]
    D = dt * np.tensordot(_GL_WEIGHTS, (partial[:, :, :, None] @ basis) @ rev[:, :, :, None], axes=(0, 2))
    prefix = np.empty((B, K, n, n))
    suffix = np.empty((B, K, n, n))
    prefix[:, 0] = np.eye(n)
    for k in range(1, K):
        prefix[:, k] = prefix[:, k - 1] @ M[:, k - 1]
    suffix[:, K - 1] = np.eye(n)
    for k in range(K - 2, -1, -1):
        suffix[:, k] = M[:, k + 1] @ suffix[:, k + 1]
    E = prefix[:, K - 1] @ M[:, K - 1]
    dE = prefix[:, :, None] @ D @ suffix[:, :, None]
    return E, dE.reshape(B, 2 * K, n * n).transpose(0, 2, 1)


def _initial_controls(rng, targets, model, cfg: PathConfig):
    B = targets.shape[0]
    K = cfg.cells
    tau = (np.arange(K) + 0.5) / K
    scale = 1.0 + np.linalg.norm(targets - model.identity(), axis=(-2, -1))
    U = np.empty((B, cfg.starts, K, 2))
    freqs = [0, 0, 1, -1, 1, -1, 2, -2]
    for s in range(cfg.starts):
        om = freqs[s % len(freqs)]
        phase = rng.uniform(0, 2 * np.pi, size=B)
        r = scale * rng.uniform(0.5, 1.5, size=B)
        ang = 2 * np.pi * om * tau[None, :] + phase[:, None]
        U[:, s, :, 0] = r[:, None] * np.cos(ang)
        U[:, s, :, 1] = r[:, None] * np.sin(ang)
    U += 0.1 * scale[:, None, None, None] * rng.standard_normal(U.shape)
    return U


def _lm_stage(model, U, G, mu, dt, cfg: PathConfig):
    B, K, _ = U.shape
    nvar = 2 * K

    def cost(U, E):
        return dt * np.sum(U * U, axis=(1, 2)) + mu * np.sum((E - G) ** 2, axis=(1, 2))

    lam = np.full(B, 1e-3)
    E, J = _jacobian(model, U, dt)
    c = cost(U, E)
    eye = np.eye(nvar)
    done = np.zeros(B, dtype=bool)
    for _ in range(cfg.max_iter):
        r = (E - G).reshape(B, -1)
        u = U.reshape(B, nvar)
        Jt = J.transpose(0, 2, 1)
        grad = dt * u + mu * (Jt @ r[..., None])[..., 0]
        H = dt * eye + mu * (Jt @ J)
        diag = np.einsum("bii->bi", H)
        step = -np.linalg.solve(H + lam[:, None, None] * diag[:, :, None] * eye, grad[..., None])[..., 0]
        U_new = U + step.reshape(B, K, 2)
        E_new = _endpoint(model, U_new, dt)
        c_new = cost(U_new, E_new)
        ok = c_new < c
        U = np.where(ok[:, None, None], U_new, U)
        lam = np.where(ok, lam / 3.0, lam * 4.0)
        lam = np.clip(lam, 1e-12, 1e12)
        gain = np.where(ok, (c - c_new) / np.maximum(c, 1e-300), 0.0)
        c = np.where(ok, c_new, c)
        done |= (ok & (gain < cfg.tol)) | (lam >= 1e12)
        if done.all():
            break
        E, J = _jacobian(model, U, dt)
    return U


def _project(model, U, G, dt, iters=4):
    """Minimum-norm Newton corrections onto ``E(u) = G``."""
    B, K, _ = U.shape
    for _ in range(iters):
        E, J = _jacobian(model, U, dt)
        r = (E - G).reshape(B, -1)
        step = -(np.linalg.pinv(J, rcond=1e-10) @ r[..., None])[..., 0]
        U = U + step.reshape(B, K, 2)
    return U


def solve_paths(model, targets, cfg: PathConfig = PathConfig(), tol=1e-6):
    """Shortest found horizontal paths from ``e`` to each target.

    Returns ``(lengths, paths, converged)``; all starts for all targets are
    solved as one batch and the best converged start per target is kept.
    """
    model = get_model(model)
    targets = np.asarray(targets, dtype=float).reshape(-1, model.size, model.size)
    P = targets.shape[0]
    rng = np.random.default_rng(cfg.seed)
    U = _initial_controls(rng, targets, model, cfg).reshape(P * cfg.starts, cfg.cells, 2)
    G = np.repeat(targets, cfg.starts, axis=0)
    dt = 1.0 / cfg.cells
    mu = cfg.penalty
    for _ in range(cfg.stages):
        U = _lm_stage(model, U, G, mu, dt, cfg)
        mu *= cfg.growth
    U = _project(model, U, G, dt)
    E = _endpoint(model, U, dt)
    resid = np.linalg.norm(E - G, axis=(1, 2)).reshape(P, cfg.starts)
    lengths = (np.sum(np.linalg.norm(U, axis=2), axis=1) * dt).reshape(P, cfg.starts)
    score = np.where(resid <= tol, lengths, np.inf)
    best = np.argmin(score, axis=1)
    converged = np.isfinite(score[np.arange(P), best])
    U = U.reshape(P, cfg.starts, cfg.cells, 2)
    E = E.reshape(P, cfg.starts, model.size, model.size)
    paths = [
        HorizontalPath(U[p, best[p]], E[p, best[p]], float(resid[p, best[p]]), model.name) for p in range(P)
    ]
    return lengths[np.arange(P), best], paths, converged


def cc_distance(x, y, model, cfg: PathConfig = PathConfig(), tol=1e-6):
    """Upper bound on ``d(x, y)`` from the best horizontal path found."""
    model = get_model(model)
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    target = model.inverse(x) @ y
    if np.allclose(target, model.identity(), atol=1e-14, rtol=0):
        return 0.0, HorizontalPath(np.zeros((cfg.cells, 2)), model.identity(), 0.0, model.name)
    lengths, paths, ok = solve_paths(model, target[None], cfg, tol)
    if not ok[0]:
        raise NoConvergenceError(f"no start reached the target (residual {paths[0].residual:.3g})")
    return float(lengths[0]), paths[0]


@dataclass
class DiameterReport:
    max_distance: float
    distances: np.ndarray
    converged: np.ndarray
    cells: int

    def to_dict(self):
        d = self.distances
        return {
            "max_distance": self.max_distance,
            "mean": float(d.mean()),
            "quantiles": {q: float(np.quantile(d, float(q))) for q in ("0.1", "0.5", "0.9")},
            "n_pairs": int(d.size),
            "all_converged": bool(self.converged.all()),
            "cells": self.cells,
        }


def diameter_probe(model="su2", n_pairs=100, cfg: PathConfig = PathConfig(), seed=0, tol=1e-6) -> DiameterReport:
    """Distances between Haar-sampled pairs; every pair must converge."""
    from .spectral import haar_sample_su2

    model = get_model(model)
    if model.rho <= 0:
        raise ValueError("finite diameter is probed on rho > 0 models")
    x = haar_sample_su2(seed, n_pairs)
    y = haar_sample_su2(seed + 1, n_pairs)
    targets = model.inverse(x) @ y
    lengths, _, ok = solve_paths(model, targets, cfg, tol)
    if not ok.all():
        raise NoConvergenceError(f"{int((~ok).sum())} of {n_pairs} pairs did not converge")
    return DiameterReport(float(lengths.max()), lengths, ok, cfg.cells)


def lipschitz_gap(f, x, y, distance, gamma_sup):
    """``f(x) - f(y) - sqrt(gamma_sup) d(x, y)``; non-positive when consistent."""
    return float(f(x) - f(y) - math.sqrt(gamma_sup) * distance)
