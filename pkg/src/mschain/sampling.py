"""Seeded Monte Carlo realization of the stochastic restriction map.

Randomness comes from a counter-based scheme: the uniform draw for trial k is
a pure function of (seed, k), computed with the SplitMix64 finalizer. Streams
are therefore bit-identical for a given scenario and seed no matter how the
trials are scheduled, and per-trial draws can be generated in any order or in
parallel without shared generator state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2 as chi2_dist

from .chain import (
    BRANCH_PROB_FLOOR,
    Gemenge,
    MSState,
    POINTER_EIGENVALUES,
    Scenario,
    factorize_branch,
    full_chain,
    pointer_branch_amplitudes,
    scenario_digest,
)
from .errors import UsageError, ValidationError

# SplitMix64: golden-ratio increment and the two finalizer multipliers.
SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
SPLITMIX_MULT_1 = 0xBF58476D1CE4E5B9
SPLITMIX_MULT_2 = 0x94D049BB133111EB
_U64 = np.uint64


def _finalize(state: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = state.copy()
        z ^= z >> _U64(30)
        z *= _U64(SPLITMIX_MULT_1)
        z ^= z >> _U64(27)
        z *= _U64(SPLITMIX_MULT_2)
        z ^= z >> _U64(31)
    return z


def trial_uniforms(seed: int, indices) -> np.ndarray:
    """Uniform [0, 1) draws for the given trial indices under one seed.

    Draw k is output k of the SplitMix64 stream seeded with `seed`:
    the finalizer applied to seed + (k+1)*gamma, keeping the top 53 bits.
    Each draw is a pure function of (seed, k), so streams are reproducible
    independent of evaluation order or parallelism.
    """
    idx = np.asarray(indices, dtype=np.uint64)
    with np.errstate(over="ignore"):
        state = _U64(seed % 2**64) + (idx + _U64(1)) * _U64(SPLITMIX_GAMMA)
    bits = _finalize(state)
    return (bits >> _U64(11)).astype(np.float64) * 2.0**-53


def trial_uniform(seed: int, index: int) -> float:
    return float(trial_uniforms(seed, [index])[0])


@dataclass(frozen=True)
class InformationPattern:
    """The real parameters an information system assigns to one recognized outcome."""

    values: tuple[float, ...]

    def __post_init__(self):
        if not self.values:
            raise ValidationError("information pattern must be nonempty")
        if not all(np.isfinite(v) for v in self.values):
            raise ValidationError("information pattern entries must be finite")


def ip_distance(j1: InformationPattern, j2: InformationPattern) -> float:
    """L1 distance between two information patterns of equal length."""
    if len(j1.values) != len(j2.values):
        raise UsageError("information patterns have different lengths")
    return float(sum(abs(a - b) for a, b in zip(j1.values, j2.values)))


@dataclass(frozen=True)
class OutcomeStream:
    """Reproducible record of sampled outcomes for one scenario and seed.

    `q_values` holds the pointer eigenvalue recognized in each trial;
    `branches` holds the sampled gemenge branch index, or -1 throughout when
    the input was a pure state.
    """

    seed: int
    q_values: np.ndarray
    branches: np.ndarray
    scenario_digest: str

    @property
    def trials(self) -> int:
        return int(self.q_values.shape[0])

    def patterns(self):
        for q in self.q_values:
            yield InformationPattern((float(q),))


@dataclass(frozen=True)
class OutcomeStat:
    value: float
    count: int
    frequency: float
    expected: float
    z_score: float


@dataclass(frozen=True)
class FrequencyReport:
    """Empirical outcome statistics against the Born expectations."""

    stats: tuple[OutcomeStat, ...]
    trials: int
    chi_square: float
    p_value: float
    degenerate: bool

    def __post_init__(self):
        if sum(s.count for s in self.stats) != self.trials:
            raise ValidationError("outcome counts must sum to the trial count")


@dataclass(frozen=True)
class StreamComparison:
    chi_square: float
    p_value: float
    verdict: str  # "indistinguishable" | "distinct"
    alpha: float


def stochastic_restriction(state: MSState, rng_draw: float) -> InformationPattern:
    """One-event restriction of a chain state to a recognized pointer outcome.

    Returns the first pointer eigenvalue when the draw falls below the first
    branch weight, the second otherwise.
    """
    a1, _ = pointer_branch_amplitudes(state)
    q = POINTER_EIGENVALUES[0] if rng_draw < abs(a1) ** 2 else POINTER_EIGENVALUES[1]
    return InformationPattern((q,))


def _branch_pointer_value(state: MSState) -> float:
    factors = factorize_branch(state)
    if "O" not in factors:
        raise UsageError("branch layout has no observer factor")
    o_vec = factors["O"]
    for idx, q in enumerate(POINTER_EIGENVALUES):
        basis = np.zeros(2, dtype=complex)
        basis[idx] = 1.0
        if abs(np.vdot(basis, o_vec)) ** 2 > 1.0 - 1e-10:
            return q
    raise UsageError("branch observer state is not a pointer basis state")


def sample_gemenge(w: Gemenge, rng_draw: float) -> tuple[int, InformationPattern]:
    """Sample one branch by cumulative probability; its restriction is deterministic."""
    cumulative = 0.0
    for index, (state, p) in enumerate(w.branches):
        cumulative += p
        if rng_draw < cumulative or index == len(w.branches) - 1:
            if not isinstance(state, MSState):
                raise UsageError("gemenge sampling needs branches with factor layouts")
            return index, InformationPattern((_branch_pointer_value(state),))
    raise AssertionError("unreachable")


def run_trials(scenario: Scenario) -> tuple[OutcomeStream, FrequencyReport]:
    """Build the chain once, then sample `scenario.trials` outcomes.

    Pure and gemenge inputs go through the same threshold rule on the same
    per-trial uniforms; only the branch bookkeeping differs.
    """
    model = full_chain(scenario)
    if isinstance(model, MSState):
        a1, _ = pointer_branch_amplitudes(model)
        cells = [(abs(a1) ** 2, POINTER_EIGENVALUES[0], -1),
                 (1.0 - abs(a1) ** 2, POINTER_EIGENVALUES[1], -1)]
    else:
        cells = [(p, _branch_pointer_value(state), i)
                 for i, (state, p) in enumerate(model.branches)]
    # numerically empty cells are unreachable; drop them like gemenge branches
    total = sum(p for p, _, _ in cells if p >= BRANCH_PROB_FLOOR)
    cells = [(p / total, q, b) for p, q, b in cells if p >= BRANCH_PROB_FLOOR]

    edges = np.cumsum([p for p, _, _ in cells])
    draws = trial_uniforms(scenario.seed, np.arange(scenario.trials))
    chosen = np.searchsorted(edges, draws, side="right")
    chosen = np.minimum(chosen, len(cells) - 1)

    q_values = np.array([q for _, q, _ in cells])[chosen]
    branches = np.array([b for _, _, b in cells], dtype=np.int64)[chosen]
    stream = OutcomeStream(scenario.seed, q_values, branches, scenario_digest(scenario))

    expected = {q: 0.0 for _, q, _ in cells}
    for p, q, _ in cells:
        expected[q] += p
    report = _frequency_report(q_values, expected, scenario.trials)
    return stream, report


def _frequency_report(q_values: np.ndarray, expected: dict[float, float],
                      trials: int) -> FrequencyReport:
    values = sorted(set(expected) | set(np.unique(q_values).tolist()), reverse=True)
    stats = []
    chi_square = 0.0
    live_cells = 0
    degenerate = False
    impossible = False
    for v in values:
        count = int(np.sum(q_values == v))
        freq = count / trials
        p = expected.get(v, 0.0)
        if p > 0.0:
            live_cells += 1
            chi_square += (count - trials * p) ** 2 / (trials * p)
            spread = p * (1.0 - p) / trials
            z = (freq - p) / np.sqrt(spread) if spread > 0.0 else 0.0
        else:
            degenerate = True
            z = 0.0
            if count > 0:
                impossible = True
        stats.append(OutcomeStat(float(v), count, freq, p, float(z)))
    dof = live_cells - 1
    if impossible:
        p_value = 0.0
        chi_square = float("inf")
    elif dof < 1:
        degenerate = True
        p_value = 1.0
        chi_square = 0.0
    else:
        p_value = float(chi2_dist.sf(chi_square, dof))
    return FrequencyReport(tuple(stats), trials, float(chi_square), p_value, degenerate)


def compare_streams(s1: OutcomeStream, s2: OutcomeStream,
                    alpha: float = 0.01) -> StreamComparison:
    """Two-sample chi-square test on the outcome counts of two streams."""
    if s1.trials == 0 or s2.trials == 0:
        raise ValidationError("streams must be nonempty")
    values = sorted(set(np.unique(s1.q_values)) | set(np.unique(s2.q_values)), reverse=True)
    counts = np.zeros((2, len(values)))
    for row, stream in enumerate((s1, s2)):
        for k, v in enumerate(values):
            counts[row, k] = np.sum(stream.q_values == v)
    col_totals = counts.sum(axis=0)
    row_totals = counts.sum(axis=1)
    total = counts.sum()
    dof = len(values) - 1
    if dof < 1:
        return StreamComparison(0.0, 1.0, "indistinguishable", alpha)
    expected = np.outer(row_totals, col_totals) / total
    chi_square = float(((counts - expected) ** 2 / expected).sum())
    p_value = float(chi2_dist.sf(chi_square, dof))
    verdict = "indistinguishable" if p_value >= alpha else "distinct"
    return StreamComparison(chi_square, p_value, verdict, alpha)


def stream_to_csv(stream: OutcomeStream) -> str:
    """Serialize a stream as CSV with columns trial, outcome_q, branch."""
    lines = ["trial,outcome_q,branch"]
    for k in range(stream.trials):
        lines.append(f"{k},{stream.q_values[k]:.12g},{int(stream.branches[k])}")
    return "\n".join(lines) + "\n"
