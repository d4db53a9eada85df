from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .interfaces import Encoding, ILog
from .profile import Profile
from .utils import HydroMissionException, InfeasibleError, StepSizeError, derive_rng, spawn_seed


class RateModel(Enum):
    r'''
    Migration rate model

    Attributes
    ----------
        RANK_LINEAR
            Emigration linearly spaced from E (best) to 0 (worst), immigration ``I (1 - mu / E)``
        CONSTANT
            Every habitat shares the configured (lambda, mu)
    '''
    RANK_LINEAR = "rank_linear"
    CONSTANT = "constant"

    def __str__(self) -> str:
        return self.value

    @staticmethod
    def from_str(str: str) -> RateModel:
        for model in RateModel:
            if model.value == str:
                return model
        raise ValueError("The string provided is not a valid RateModel")


@dataclass
class BboConfig():
    r'''
    BBO parameters

    Properties
    ----------
        n_pop : int
            Habitat count
        iter_max : int
            Generations
        immigration_max, emigration_max : float
            Maximum rates I and E
        m_max : float
            Maximum mutation rate, in (0, 1]
        s_max : int
            Maximum species count, ``n_pop - 1`` when left to None
        elites : int
            Best habitats carried unchanged to the next generation
        rate_model : str
            ``rank_linear`` or ``constant``
        mu : float
            Emigration of the constant model
        lam : float
            Immigration of the constant model, ``1 - mu`` when left to None
        mutation_scale : float
            Gaussian mutation std as a fraction of each variable's range
    '''
    n_pop: int = 100
    iter_max: int = 100
    immigration_max: float = 1.0
    emigration_max: float = 1.0
    m_max: float = 0.1
    s_max: Optional[int] = None
    elites: int = 2
    rate_model: str = "rank_linear"
    mu: float = 0.2
    lam: Optional[float] = None
    mutation_scale: float = 0.1

    def __post_init__(self):
        if self.n_pop < 1 or (self.n_pop < 2 and self.elites != 0):
            raise HydroMissionException("n_pop must be at least 2 (1 is only allowed with elites = 0)", "BBO")
        if self.iter_max < 1:
            raise HydroMissionException("iter_max must be at least 1", "BBO")
        if not 0 < self.m_max <= 1:
            raise HydroMissionException("m_max must lie in (0, 1]", "BBO")
        if self.elites < 0 or self.elites >= self.n_pop:
            raise HydroMissionException("elites must be non negative and smaller than n_pop", "BBO")
        if self.immigration_max < 0 or self.emigration_max < 0:
            raise HydroMissionException("rates must be non negative", "BBO")
        RateModel.from_str(self.rate_model)
        if self.lam is None:
            self.lam = 1.0 - self.mu
        if not 0 <= self.mu <= self.emigration_max or not 0 <= self.lam <= self.immigration_max:
            raise HydroMissionException("constant rates must lie within [0, I] and [0, E]", "BBO")
        if self.s_max is None:
            self.s_max = max(self.n_pop - 1, 1)
        if self.s_max < 1:
            raise HydroMissionException("s_max must be at least 1", "BBO")

    @property
    def model(self) -> RateModel:
        return RateModel.from_str(self.rate_model)


@dataclass
class Habitat():
    r'''
    One candidate solution

    Properties
    ----------
        siv : Any
            Encoding specific variables
        cost : float
            Lower is better
        violation : float
            Penalty part of the cost
        immigration, emigration : float
            Rates assigned at the last generation
    '''
    siv: Any
    cost: float
    violation: float = 0.0
    immigration: float = 0.0
    emigration: float = 0.0

    @property
    def hsi(self) -> float:
        return -self.cost


@dataclass
class SpeciesDistribution():
    r'''
    Probability of every species count 0..S_max
    '''
    p: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        if self.p.ndim != 1 or self.p.size < 2:
            raise HydroMissionException("a species distribution needs at least two counts", "SPECIES")
        if np.any(self.p < 0) or abs(self.p.sum() - 1.0) > 1e-9:
            raise HydroMissionException("species probabilities must be non negative and sum to 1", "SPECIES")

    @property
    def s_max(self) -> int:
        return self.p.size - 1


@dataclass
class GenerationRecord():
    r'''
    ``best_cost`` is the best seen up to this generation, the other values describe the generation itself
    '''
    iteration: int
    best_cost: float
    mean_cost: float
    mean_violation: float
    evaluations: int

    def to_dict(self) -> dict:
        return {'iteration': self.iteration, 'best_cost': self.best_cost, 'mean_cost': self.mean_cost,
                'mean_violation': self.mean_violation, 'evaluations': self.evaluations}


@dataclass
class BboResult():
    best: Habitat
    history: list[GenerationRecord] = field(default_factory=list)
    population: list[Habitat] = field(default_factory=list)
    evaluations: int = 0

    @property
    def best_costs(self) -> list[float]:
        return [record.best_cost for record in self.history]


def species_step(d: SpeciesDistribution, lam: Sequence[float], mu: Sequence[float], dt: float) -> SpeciesDistribution:
    r'''
    One forward Euler step of the species count birth-death equations

    ``dP_s/dt = -(lam_s + mu_s) P_s + mu_{s+1} P_{s+1} + lam_{s-1} P_{s-1}``, the
    outer terms being absent at ``s = 0`` and ``s = S_max``.

    Raises
    ------
        StepSizeError
            When an entry would turn negative, the caller must halve ``dt``
    '''
    p = d.p
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if lam.shape != p.shape or mu.shape != p.shape:
        raise HydroMissionException("one immigration and one emigration rate per species count are required", "SPECIES")
    derivative = -(lam + mu) * p
    derivative[:-1] += mu[1:] * p[1:]
    derivative[1:] += lam[:-1] * p[:-1]
    stepped = p + dt * derivative
    if np.any(stepped < 0):
        raise StepSizeError(dt)
    return SpeciesDistribution(stepped / stepped.sum())


def stationary_distribution(s_max: int, immigration_max: float = 1.0, emigration_max: float = 1.0) -> np.ndarray:
    r'''
    Stationary species distribution of the linear rate model

    With ``lam_s = I (1 - s / S_max)`` and ``mu_s = E s / S_max`` the chain is
    stationary on a binomial law of ``S_max`` trials with success ``I / (I + E)``.
    '''
    if immigration_max + emigration_max == 0:
        return np.full(s_max + 1, 1.0 / (s_max + 1))
    return stats.binom.pmf(np.arange(s_max + 1), s_max, immigration_max / (immigration_max + emigration_max))


def mutation_rate(p_s: float, m_max: float, p_max: float) -> float:
    r'''
    Mutation rate ``m_max (1 - P_s / P_max)``, clamped to [0, m_max]

    Improbable species counts mutate most. A degenerate ``P_max = 0`` gives ``m_max``.
    '''
    if p_max <= 0:
        return m_max
    return float(min(max(m_max * (1.0 - p_s / p_max), 0.0), m_max))


def assign_rates(n_pop: int, config: BboConfig) -> tuple[np.ndarray, np.ndarray]:
    r'''
    Immigration and emigration of a population sorted from best to worst

    Returns
    -------
        (lam, mu) arrays of length ``n_pop``
    '''
    if n_pop < 1:
        raise HydroMissionException("cannot assign rates to an empty population", "BBO")
    if config.model == RateModel.CONSTANT:
        return np.full(n_pop, float(config.lam)), np.full(n_pop, float(config.mu))
    mu = config.emigration_max * np.linspace(1.0, 0.0, n_pop) if n_pop > 1 else np.array([config.emigration_max])
    if config.emigration_max > 0:
        lam = config.immigration_max * (1.0 - mu / config.emigration_max)
    else:
        lam = np.full(n_pop, config.immigration_max)
    return lam, mu


def migrate(population: Sequence[Any], rates: tuple[np.ndarray, np.ndarray], encoding: Encoding,
            rngs: Sequence[np.random.Generator], elites: int = 0) -> list[Any]:
    r'''
    Migration phase of one generation

    Every non elite habitat ``i`` immigrates with probability ``lam_i``: a donor
    ``j != i`` is drawn with probability proportional to ``mu_j`` and one random
    SIV of ``i`` is replaced by the donor's. Donors are read from the population
    before migration. A migrant the encoding cannot repair is dropped.

    Parameters
    ----------
        population : sequence
            Solutions sorted from best to worst
        rates : (lam, mu)
        encoding : Encoding
        rngs : sequence of np.random.Generator
            One stream per habitat
        elites : int
            Count of leading habitats exempt from migration
    '''
    lam, mu = rates
    n = len(population)
    migrated = list(population)
    for i in range(elites, n):
        rng = rngs[i]
        if rng.random() >= lam[i]:
            continue
        weights = np.array(mu, dtype=float)
        weights[i] = 0.0
        total = weights.sum()
        if total <= 0:
            continue
        donor = int(rng.choice(n, p=weights / total))
        index = int(rng.integers(encoding.size(population[i])))
        candidate = encoding.repair(encoding.exchange_siv(population[i], population[donor], index, rng))
        if candidate is not None:
            migrated[i] = candidate
    return migrated


class BiogeographyOptimizer(ILog):
    r'''
    Biogeography based optimizer

    Each generation assigns rates by rank, migrates, mutates with a rate inverse to
    the stationary probability of the habitat's species count (its rank), repairs,
    evaluates and keeps the ``elites`` best habitats untouched.

    - Log header : BBO

    Parameters
    ----------
        encoding : Encoding
            The problem
        config : BboConfig
        profile : Profile, optional
            Worker count and log settings
        context : Any, optional
            Passed to every cost evaluation (a world snapshot for instance)
    '''
    def __init__(self, encoding: Encoding, config: BboConfig, profile: Profile = None, context: Any = None, **kwargs):
        ILog.__init__(self, header="BBO", profile=profile, **kwargs)
        self.encoding = encoding
        self.config = config
        self.profile = profile
        self.context = context
        self.evaluations = 0

        distribution = stationary_distribution(config.s_max, config.immigration_max, config.emigration_max)
        self.mutation_rates = self.__rank_mutation_rates__(distribution)

    def __rank_mutation_rates__(self, distribution: np.ndarray) -> np.ndarray:
        n = self.config.n_pop
        p_max = float(distribution.max())
        rates = np.empty(n)
        for rank in range(n):
            species = self.config.s_max if n == 1 else int(round(self.config.s_max * (n - 1 - rank) / (n - 1)))
            rates[rank] = mutation_rate(float(distribution[species]), self.config.m_max, p_max)
        return rates

    def __evaluate__(self, solutions: Sequence[Any]) -> list[tuple[float, float]]:
        workers = self.profile.get_workers() if self.profile is not None else 1
        self.evaluations += len(solutions)
        if workers > 1 and len(solutions) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                return list(pool.map(lambda s: self.encoding.evaluate(s, self.context), solutions))
        return [self.encoding.evaluate(s, self.context) for s in solutions]

    def __sorted__(self, habitats: list[Habitat]) -> list[Habitat]:
        order = np.argsort([h.cost for h in habitats], kind='stable')
        return [habitats[i] for i in order]

    def __record__(self, iteration: int, habitats: list[Habitat], best: Habitat) -> GenerationRecord:
        costs = np.array([h.cost for h in habitats])
        violations = np.array([h.violation for h in habitats])
        return GenerationRecord(iteration, float(best.cost), float(costs.mean()), float(violations.mean()), self.evaluations)

    def initial_population(self, master: int, initial: Optional[Sequence[Any]] = None) -> list[Any]:
        r'''
        Given solutions (repaired, truncated to ``n_pop``) completed by random feasible ones
        '''
        solutions = []
        for solution in list(initial or [])[:self.config.n_pop]:
            repaired = self.encoding.repair(solution)
            if repaired is not None:
                solutions.append(repaired)
        index = len(solutions)
        while len(solutions) < self.config.n_pop:
            solutions.append(self.encoding.random_feasible(derive_rng(master, 0, index)))
            index += 1
        return solutions

    def run(self, rng: np.random.Generator, initial: Optional[Sequence[Any]] = None) -> BboResult:
        r'''
        Optimize

        Parameters
        ----------
            rng : np.random.Generator
                Source of the master seed, all other streams derive from it
            initial : sequence, optional
                Warm start solutions placed first in the initial population

        Returns
        -------
            :class:`BboResult` with the best habitat ever seen and one history record per generation

        Raises
        ------
            InfeasibleError
                When no initial habitat satisfies the feasibility criteria
        '''
        config = self.config
        master = spawn_seed(rng)
        self.evaluations = 0

        solutions = self.initial_population(master, initial)
        reasons = [self.encoding.infeasibility(s) for s in solutions]
        if all(reason is not None for reason in reasons):
            raise InfeasibleError(f"every initial habitat is infeasible: {reasons[0]}", criteria=[reasons[0]], header=self.header)

        scores = self.__evaluate__(solutions)
        habitats = self.__sorted__([Habitat(s, c, v) for s, (c, v) in zip(solutions, scores)])
        best = habitats[0]
        history = []

        for iteration in range(1, config.iter_max + 1):
            lam, mu = assign_rates(len(habitats), config)
            for habitat, l, m in zip(habitats, lam, mu):
                habitat.immigration, habitat.emigration = float(l), float(m)
            rngs = [derive_rng(master, iteration, i) for i in range(len(habitats))]

            migrated = migrate([h.siv for h in habitats], (lam, mu), self.encoding, rngs, config.elites)
            changed = []
            for i in range(config.elites, len(habitats)):
                mutant = self.encoding.repair(self.encoding.mutate(migrated[i], float(self.mutation_rates[i]), rngs[i]))
                migrated[i] = mutant if mutant is not None else migrated[i]
                changed.append(i)

            scores = self.__evaluate__([migrated[i] for i in changed])
            for i, (cost, violation) in zip(changed, scores):
                habitats[i] = Habitat(migrated[i], cost, violation)
            habitats = self.__sorted__(habitats)
            if habitats[0].cost < best.cost:
                best = habitats[0]

            record = self.__record__(iteration, habitats, best)
            history.append(record)
            self.debug(f"generation {iteration}: best {record.best_cost:.4f} mean {record.mean_cost:.4f} violation {record.mean_violation:.4f}")

        return BboResult(best, history, habitats, self.evaluations)


def run(encoding: Encoding, config: BboConfig, rng: np.random.Generator, initial: Optional[Sequence[Any]] = None,
        context: Any = None, profile: Profile = None) -> BboResult:
    r'''
    Functional front end of :class:`BiogeographyOptimizer`
    '''
    return BiogeographyOptimizer(encoding, config, profile, context).run(rng, initial)


class BoundedEncoding(Encoding):
    r'''
    Continuous variables inside a box

    Parameters
    ----------
        lower, upper : array like
            Bounds of every variable
        objective : Callable[[np.ndarray, Any], float]
            Cost of a solution, the second argument is the optimizer context
        mutation_scale : float
            Gaussian mutation std as a fraction of each variable's range
    '''
    def __init__(self, lower, upper, objective: Callable[[np.ndarray, Any], float] = None, mutation_scale: float = 0.1):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        if self.lower.shape != self.upper.shape or np.any(self.upper < self.lower):
            raise HydroMissionException("bounds must have the same shape with lower <= upper", "BBO")
        self.objective = objective
        self.sigma = mutation_scale * (self.upper - self.lower)

    def random_feasible(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lower, self.upper)

    def cost(self, solution: np.ndarray, context: Any = None) -> float:
        return float(self.objective(solution, context))

    def exchange_siv(self, receiver: np.ndarray, donor: np.ndarray, index: int, rng: np.random.Generator) -> np.ndarray:
        child = np.array(receiver, dtype=float)
        child[index] = donor[index]
        return child

    def mutate(self, solution: np.ndarray, rate: float, rng: np.random.Generator) -> np.ndarray:
        mask = rng.random(solution.shape) < rate
        noise = rng.normal(0.0, 1.0, solution.shape) * self.sigma
        return np.where(mask, solution + noise, solution)

    def repair(self, solution: np.ndarray) -> np.ndarray:
        return np.clip(solution, self.lower, self.upper)
