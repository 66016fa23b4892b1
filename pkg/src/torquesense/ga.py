"""Real-coded genetic algorithm for scalar hyperparameter tuning.

Defaults follow the encoder-filter tuning recipe: population 120 over
50 generations, 60 parents picked by 4-tournament, two-point crossover,
20% per-gene uniform mutation and top-10% elitism.  The same optimizer
is reused for any small fitness landscape (the filter Q search needs
only two genes).
"""

from dataclasses import dataclass, field

import numpy as np

from .kf import filter_trace


@dataclass
class GaConfig:
    """Search settings; bounds is a list of (low, high) per gene."""
    bounds: list
    population_size: int = 120
    generations: int = 50
    parents_mating: int = 60
    tournament_k: int = 4
    crossover: str = "two_point"  # or "none" to copy one parent
    mutation_rate: float = 0.20
    elitism_fraction: float = 0.10
    seed: int = 0

    def __post_init__(self):
        if self.parents_mating > self.population_size:
            raise ValueError("parents_mating must not exceed population_size")
        for name in ("mutation_rate", "elitism_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        for lo, hi in self.bounds:
            if not lo < hi:
                raise ValueError(f"empty gene bounds ({lo}, {hi})")
        if self.crossover not in ("two_point", "none"):
            raise ValueError(f"unknown crossover kind {self.crossover!r}")


def _score(fitness, genes, seed, generation, index):
    """Evaluate one candidate with a reproducible per-candidate RNG."""
    rng = np.random.default_rng((seed, generation, index))
    try:
        value = fitness(genes, rng)
    except TypeError:
        value = fitness(genes)
    value = float(value)
    return -np.inf if np.isnan(value) else value


def _two_point_crossover(a, b, rng):
    n = len(a)
    if n < 2:
        return a.copy()
    i, j = sorted(rng.choice(n + 1, size=2, replace=False))
    child = a.copy()
    child[i:j] = b[i:j]
    return child


def optimize(config, fitness):
    """Maximize `fitness` over the gene box; returns (best, history).

    `fitness` is called as fitness(genes, rng) (or fitness(genes) if it
    takes one argument) and must be deterministic given those inputs;
    NaN scores are treated as -inf.  `history` is a list of per-
    generation dicts with best/mean fitness and the best genes so far.
    """
    rng = np.random.default_rng(config.seed)
    lo = np.array([b[0] for b in config.bounds])
    hi = np.array([b[1] for b in config.bounds])
    n_genes = len(config.bounds)
    pop = rng.uniform(lo, hi, size=(config.population_size, n_genes))
    n_elite = max(1, int(round(config.elitism_fraction * config.population_size)))

    history = []
    best_genes = None
    best_fit = -np.inf
    for gen in range(config.generations):
        scores = np.array([_score(fitness, pop[i], config.seed, gen, i)
                           for i in range(len(pop))])
        order = np.argsort(scores)[::-1]
        if scores[order[0]] > best_fit:
            best_fit = scores[order[0]]
            best_genes = pop[order[0]].copy()
        finite = scores[np.isfinite(scores)]
        history.append({"generation": gen,
                        "best": float(best_fit),
                        "generation_best": float(scores[order[0]]),
                        "mean": float(finite.mean()) if len(finite) else -np.inf,
                        "best_genes": best_genes.copy()})
        if gen == config.generations - 1:
            break

        # k-tournament parent selection
        parents = np.empty((config.parents_mating, n_genes))
        for p in range(config.parents_mating):
            entrants = rng.integers(0, len(pop), size=config.tournament_k)
            parents[p] = pop[entrants[np.argmax(scores[entrants])]]

        children = []
        n_children = config.population_size - n_elite
        for c in range(n_children):
            a = parents[rng.integers(len(parents))]
            b = parents[rng.integers(len(parents))]
            if config.crossover == "two_point":
                child = _two_point_crossover(a, b, rng)
            else:
                child = a.copy()
            mask = rng.random(n_genes) < config.mutation_rate
            if mask.any():
                child[mask] = rng.uniform(lo[mask], hi[mask])
            children.append(child)

        elite = pop[order[:n_elite]].copy()
        pop = np.vstack([elite] + children) if children else elite
    return best_genes, history


DEFAULT_FITNESS_WEIGHTS = (1.0, 0.1, 10.0, 1.0)


def kf_fitness(genes, trace, dt, lsb, weights=DEFAULT_FITNESS_WEIGHTS,
               min_samples=100):
    """Score a (q_accel, q_jerk) candidate on an encoder position trace.

    Score = -(w1*jerk term + w2*accel term + w3*position-alignment term
    + w4*velocity/position integration-inconsistency term); larger is
    better.  Each term is dimensionless: jerk and acceleration are
    measured relative to what plain finite differencing of the trace
    produces, alignment relative to the quantization variance, so the
    default weights behave the same across signal scales.  The jerk and
    acceleration terms are the smoothness target; alignment keeps the
    estimate pinned to the measured positions.
    """
    z = np.asarray(trace, dtype=float)
    if len(z) < min_samples:
        raise ValueError(f"trace too short: {len(z)} < {min_samples} samples")
    q_accel, q_jerk = float(genes[0]), float(genes[1])
    if q_accel < 0.0 or q_jerk < 0.0:
        return -np.inf
    x, v, a = filter_trace(z, dt, lsb, q_accel, q_jerk)
    # smoothness measured on the velocity estimate so that a filter
    # tracking the quantization staircase cannot hide velocity noise in
    # an over-smoothed acceleration state
    jerk = np.diff(v, 2) / dt ** 2
    accel = np.diff(v) / dt
    align = x - z
    integ = np.diff(x) / dt - v[1:]
    # finite-difference baselines for scale normalization
    fd_acc = np.diff(z, 2) / dt ** 2
    fd_jerk = np.diff(z, 3) / dt ** 3
    eps = 1e-30
    jerk_ref = np.mean(fd_jerk ** 2) + eps
    acc_ref = np.mean(fd_acc ** 2) + eps
    align_ref = lsb * lsb / 12.0 + eps
    integ_ref = np.mean(v ** 2) + eps
    w1, w2, w3, w4 = weights
    # alignment is penalized only beyond the quantization floor: the
    # truth-tracking estimate necessarily differs from the measured
    # staircase by the quantization error itself
    align_excess = max(0.0, np.mean(align ** 2) / align_ref - 1.0)
    cost = (w1 * np.mean(jerk ** 2) / jerk_ref
            + w2 * np.mean(accel ** 2) / acc_ref
            + w3 * align_excess
            + w4 * np.mean(integ ** 2) / integ_ref)
    return -cost


def tune_kf(trace, dt, lsb, config=None, weights=DEFAULT_FITNESS_WEIGHTS):
    """GA-tune (q_accel, q_jerk) for one encoder channel.

    The densities span many decades, so the genes are log10 of the
    densities; default bounds cover 1e-4..1e4 and 1e-2..1e8.
    """
    if config is None:
        config = GaConfig(bounds=[(-4.0, 4.0), (-2.0, 8.0)])
    best, history = optimize(
        config, lambda g: kf_fitness(10.0 ** np.asarray(g), trace, dt, lsb, weights))
    return {"q_accel": float(10.0 ** best[0]), "q_jerk": float(10.0 ** best[1])}, history
