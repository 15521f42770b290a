"""Discretization and eigenvalue-perturbation checks with their closed-form bounds.

Each check returns rows ``{check, family, n, measured, bound, passed}``:

* ``graphon-discretization``: ``||W - W_n|| <= sqrt(A1 / n)``;
* ``signal-discretization``: ``||X - X_n|| <= A3 / sqrt(3 n)``;
* ``eigenvalue-perturbation``: ``max_i |lam_i(W1) - lam_i(W2)| <= ||W1 - W2||``.
"""

from __future__ import annotations

import csv
import math

import numpy as np

from .graphon import (
    Graphon,
    GraphonSignal,
    graphon_l2_distance,
    induce_graphon,
    induce_signal,
    l2_distance,
    sample_graph,
    sample_signal,
    step_graphon,
)
from .spectral import decompose_graphon

SLACK = 1e-6
PERTURBATION_SLACK = 1e-8
COLUMNS = ("check", "family", "n", "measured", "bound", "passed")


def _row(check, family, n, measured, bound, slack):
    return {"check": check, "family": family, "n": n, "measured": float(measured),
            "bound": float(bound), "passed": bool(measured <= bound + slack)}


def graphon_discretization(W: Graphon, sizes, A1=None, slack=SLACK) -> list:
    """Induced-graphon distance at every size against ``sqrt(A1 / n)``.

    ``A1`` defaults to the family's analytic Lipschitz constant; pass a value
    to test a different (possibly wrong) constant.
    """
    a1 = W.lipschitz if A1 is None else float(A1)
    if a1 is None:
        raise ValueError(f"graphon {W.name!r} has no Lipschitz constant")
    rows = []
    for n in sizes:
        d = graphon_l2_distance(W, induce_graphon(sample_graph(W, n)))
        rows.append(_row("graphon-discretization", W.name, n, d, math.sqrt(a1 / n), slack))
    return rows


def signal_discretization(X: GraphonSignal, sizes, A3=None, slack=SLACK) -> list:
    a3 = X.lipschitz if A3 is None else float(A3)
    if a3 is None:
        raise ValueError("signal has no Lipschitz constant")
    rows = []
    for n in sizes:
        d = l2_distance(X, induce_signal(sample_signal(X, n)))
        rows.append(_row("signal-discretization", getattr(X, "name", "custom"), n, d,
                         a3 / math.sqrt(3 * n), slack))
    return rows


def random_step_graphon(rng, n: int) -> Graphon:
    a = rng.random((n, n))
    return step_graphon(np.triu(a) + np.triu(a, 1).T)


def eigenvalue_perturbation(rng, pairs: int, max_n: int = 64, slack=PERTURBATION_SLACK) -> list:
    """Random step-graphon pairs of independent sizes up to ``max_n``.

    Every eigenvalue index of both signs is compared; missing indices read
    as zero eigenvalues.
    """
    rows = []
    for p in range(pairs):
        n1, n2 = rng.integers(1, max_n + 1, size=2)
        W1 = random_step_graphon(rng, int(n1))
        # half the pairs are small perturbations of the first graphon
        if p % 2:
            noise = rng.normal(scale=rng.choice([1e-3, 1e-2, 1e-1]), size=W1.matrix.shape)
            W2 = step_graphon(np.clip(W1.matrix + (noise + noise.T) / 2, 0, 1))
        else:
            W2 = random_step_graphon(rng, int(n2))
        s1, s2 = decompose_graphon(W1), decompose_graphon(W2)
        k = max(len(s1), len(s2))
        p1, m1 = s1.top(k)
        p2, m2 = s2.top(k)
        diff = max(np.max(np.abs(p1 - p2)), np.max(np.abs(m1 - m2)))
        dist = graphon_l2_distance(W1, W2)
        rows.append(_row("eigenvalue-perturbation", f"step-pair-{p}",
                         f"{W1.n}x{W2.n}", diff, dist, slack))
    return rows


def write_rows(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=COLUMNS)
        writer.writeheader()
        for r in rows:
            writer.writerow({**r, "measured": f"{r['measured']:.17g}",
                             "bound": f"{r['bound']:.17g}", "passed": str(r["passed"]).lower()})
