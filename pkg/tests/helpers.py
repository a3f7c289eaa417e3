"""Shared test fixtures: randomized discrimination problems with known verdicts."""

import numpy as np

from mschain.discriminate import DiscriminationProblem


def random_discrimination_problem(rng):
    """A random problem plus whether it is feasible by construction.

    Feasible instances draw each group's states from its own orthogonal column
    subspace of a random unitary; infeasible instances require a balanced
    superposition of two states to take an eigenvalue distinct from both.
    """
    dim = int(rng.integers(4, 9))
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, _ = np.linalg.qr(a)
    if rng.random() < 0.5:
        n_groups = int(rng.integers(2, 4))
        avail = list(rng.permutation(dim))
        states, groups = [], []
        for gi in range(n_groups):
            if len(states) >= 4:
                break
            spare = len(avail) - (n_groups - gi - 1)
            span_size = int(rng.integers(1, min(2, spare) + 1))
            span = q[:, [avail.pop() for _ in range(span_size)]]
            n_members = min(int(rng.integers(1, 3)), 4 - len(states))
            members = []
            for _ in range(n_members):
                c = rng.normal(size=span.shape[1]) + 1j * rng.normal(size=span.shape[1])
                members.append(span @ (c / np.linalg.norm(c)))
            groups.append(tuple(range(len(states), len(states) + len(members))))
            states.extend(members)
        return DiscriminationProblem(dim, tuple(states), tuple(groups)), True
    s1, s2 = q[:, 0], q[:, 1]
    mix = rng.uniform(0.35, 0.65)
    s0 = np.sqrt(mix) * s1 + np.sqrt(1 - mix) * np.exp(1j * rng.uniform(0, 2 * np.pi)) * s2
    return DiscriminationProblem(dim, (s0, s1, s2), ((0,), (1,), (2,))), False
