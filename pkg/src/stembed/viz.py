"""Exact t-SNE projection of speaker embeddings and SVG scatter output."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DegenerateInputError(Exception):
    """Raised when duplicate points make the affinity calibration ill-posed."""


@dataclass
class ProjectionResult:
    coords: np.ndarray          # (N, 2)
    groups: list                # group label per point
    speaker_ids: list
    kl_divergence: float
    iterations: int


def _squared_distances(X):
    sq = np.sum(X**2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.fill_diagonal(d2, 0.0)
    return np.maximum(d2, 0.0)


def _calibrate_affinities(d2, perplexity, tol=1e-5, max_steps=50):
    """Per-point precision bisection so each row's entropy matches log(perplexity)."""
    n = d2.shape[0]
    target = np.log(perplexity)
    P = np.zeros((n, n))
    for i in range(n):
        di = np.delete(d2[i], i)
        beta, beta_lo, beta_hi = 1.0, 0.0, np.inf
        for _ in range(max_steps):
            w = np.exp(-di * beta)
            sw = w.sum()
            if sw <= 0:
                entropy = 0.0
                p = np.zeros_like(w)
            else:
                p = w / sw
                entropy = beta * (di * p).sum() + np.log(sw)
            if abs(entropy - target) < tol:
                break
            if entropy > target:
                beta_lo = beta
                beta = beta * 2.0 if beta_hi == np.inf else (beta + beta_hi) / 2.0
            else:
                beta_hi = beta
                beta = beta / 2.0 if beta_lo == 0.0 else (beta + beta_lo) / 2.0
        P[i, np.arange(n) != i] = p
    return P


def _kl(P, Q):
    mask = P > 0
    return float(np.sum(P[mask] * np.log(P[mask] / Q[mask])))


def tsne_project(points, perplexity=30.0, seed=0, iters=1000,
                 groups=None, speaker_ids=None) -> ProjectionResult:
    """Exact O(N^2) t-SNE to 2-D.

    Pinned schedule: early exaggeration x12 for the first 250 iterations,
    momentum 0.5 then 0.8 after iteration 250, learning rate 200, Gaussian
    init with sigma 1e-4, gradient descent with momentum only.
    """
    X = np.asarray(points, dtype=np.float64)
    n = X.shape[0]
    if n < 5:
        raise ValueError(f"need at least 5 points, got {n}")
    if perplexity >= (n - 1) / 3.0:
        raise ValueError(f"perplexity {perplexity} infeasible for N={n}; need < (N-1)/3")
    d2 = _squared_distances(X)
    off_diag = d2[~np.eye(n, dtype=bool)]
    if np.min(off_diag) <= 0.0:
        raise DegenerateInputError("duplicate input points: zero pairwise distance")

    P = _calibrate_affinities(d2, perplexity)
    P = (P + P.T) / (2.0 * n)
    P = np.maximum(P, 1e-300)

    rng = np.random.default_rng(seed)
    Y = rng.normal(scale=1e-4, size=(n, 2))
    velocity = np.zeros_like(Y)
    exaggeration = 12.0
    learning_rate = 200.0
    kl = np.inf
    for it in range(iters):
        Peff = P * exaggeration if it < 250 else P
        momentum = 0.5 if it < 250 else 0.8
        yd2 = _squared_distances(Y)
        num = 1.0 / (1.0 + yd2)
        np.fill_diagonal(num, 0.0)
        Q = num / num.sum()
        Q = np.maximum(Q, 1e-300)
        W = (Peff - Q) * num
        grad = 4.0 * (np.diag(W.sum(axis=1)) - W) @ Y
        velocity = momentum * velocity - learning_rate * grad
        Y = Y + velocity
        Y = Y - Y.mean(axis=0)
    yd2 = _squared_distances(Y)
    num = 1.0 / (1.0 + yd2)
    np.fill_diagonal(num, 0.0)
    Q = np.maximum(num / num.sum(), 1e-300)
    kl = _kl(P, Q)
    groups = list(groups) if groups is not None else [""] * n
    speaker_ids = list(speaker_ids) if speaker_ids is not None else [str(i) for i in range(n)]
    return ProjectionResult(Y, groups, speaker_ids, kl, iters)


# ---------------------------------------------------------------------------
# SVG scatter output

_PALETTE = ["#d62728", "#2ca02c", "#1f77b4", "#ff7f0e", "#9467bd",
            "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]


def emit_plot(result: ProjectionResult, path, title="t-SNE projection"):
    """Write a self-contained SVG scatter plot plus a TSV coordinate sidecar.

    One circle marker per point, colored by group, with a legend and axes.
    The sidecar (same path with a .tsv suffix) has columns speaker_id, x, y,
    group.
    """
    coords = result.coords
    width, height, margin = 640, 480, 50
    xmin, ymin = coords.min(axis=0)
    xmax, ymax = coords.max(axis=0)
    xspan = (xmax - xmin) or 1.0
    yspan = (ymax - ymin) or 1.0

    def sx(x):
        return margin + (x - xmin) / xspan * (width - 2 * margin)

    def sy(y):
        return height - margin - (y - ymin) / yspan * (height - 2 * margin)

    group_order = list(dict.fromkeys(result.groups))
    color = {g: _PALETTE[i % len(_PALETTE)] for i, g in enumerate(group_order)}
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" '
        f'y2="{height - margin}" stroke="black"/>',
    ]
    for (x, y), g in zip(coords, result.groups):
        lines.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="4" '
                     f'fill="{color[g]}" fill-opacity="0.7"/>')
    for i, g in enumerate(group_order):
        ly = margin + 18 * i
        lines.append(f'<rect x="{width - margin - 110}" y="{ly - 9}" width="10" '
                     f'height="10" fill="{color[g]}" class="legend"/>')
        lines.append(f'<text x="{width - margin - 95}" y="{ly}" font-size="12" '
                     f'class="legend">{g or "(all)"}</text>')
    lines.append("</svg>")
    path = str(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    sidecar = path + ".tsv" if not path.endswith(".svg") else path[:-4] + ".tsv"
    with open(sidecar, "w", encoding="utf-8") as fh:
        fh.write("speaker_id\tx\ty\tgroup\n")
        for sid, (x, y), g in zip(result.speaker_ids, coords, result.groups):
            fh.write(f"{sid}\t{float(x)!r}\t{float(y)!r}\t{g}\n")
    return sidecar
