from __future__ import annotations
from enum import Enum

import numpy as np


class bcolors:
    HEADER = '\033[95m'
    OKBLUE = '\033[94m'
    OKCYAN = '\033[96m'
    OKGREEN = '\033[92m'
    WARNING = '\033[93m'
    FAIL = '\033[91m'
    ENDC = '\033[0m'
    BOLD = '\033[1m'
    UNDERLINE = '\033[4m'


class HydroMissionException(Exception):
    def __init__(self, message="There was an error", header="MAIN", *args: object) -> None:
        super().__init__(message, *args)
        self.header = header
        self.message = message

    def __str__(self) -> str:
        return f"{bcolors.FAIL} [ERROR] [{self.header}] {self.message}{bcolors.ENDC}"


class StepSizeError(HydroMissionException):
    r'''
    Raised by :func:`hydromission.bbo.species_step` when the forward Euler step
    would produce a negative probability. The caller should halve ``dt``.
    '''
    def __init__(self, dt: float, message: str = None) -> None:
        self.dt = dt
        super().__init__(message or f"dt={dt} produces a negative species probability, halve it", "SPECIES")


class InfeasibleError(HydroMissionException):
    r'''
    Raised when no sequence fits the available time.

    Properties
    ----------
        time_gap : float
            Shortest achievable time minus the budget (seconds), ``inf`` when the
            destination is unreachable
        criteria : list
            The validity criteria violated by the best candidate found
    '''
    def __init__(self, message: str, time_gap: float = float('inf'), criteria: list = None, header="MISSION PLANNER") -> None:
        super().__init__(message, header)
        self.time_gap = time_gap
        self.criteria = criteria or []


class ConfigError(HydroMissionException):
    def __init__(self, message: str, path: str = None, line: int = None) -> None:
        self.path = path
        self.line = line
        location = ''
        if path is not None:
            location = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(location + message, "SCENARIO")


class TerrainClass(Enum):
    r'''
    Class of a terrain cell

    Attributes
    ----------
        COAST : int
            Impassable land or coastal section
        UNCERTAIN : int
            Risky section, carries a risk scalar in (0, 0.35]
        WATER : int
            Free water
    '''
    COAST = 0
    UNCERTAIN = 1
    WATER = 2

    @staticmethod
    def from_str(str: str) -> TerrainClass:
        for terrain_class in TerrainClass:
            if terrain_class.name.lower() == str:
                return terrain_class
        raise HydroMissionException("The string wasn't in the correct format", "TERRAIN_CLASS")


class ObstacleKind(Enum):
    r'''
    The three obstacle categories

    Attributes
    ----------
        STATIC : str
            Never moves
        AFLOAT : str
            Drifts with the current
        SELF_MOTIVATED : str
            Drifts with the current and moves with its own velocity
    '''
    STATIC = "static"
    AFLOAT = "afloat"
    SELF_MOTIVATED = "self_motivated"

    def __str__(self) -> str:
        return self.value

    @staticmethod
    def from_str(str: str) -> ObstacleKind:
        for kind in ObstacleKind:
            if kind.value == str:
                return kind
        raise ValueError("The string provided is not a valid ObstacleKind")


class MissionOutcome(Enum):
    SUCCESS = "success"
    FAILURE = "failure"
    INFEASIBLE = "infeasible"

    def __eq__(self, __o: object) -> bool:
        if isinstance(__o, MissionOutcome):
            return self.value == __o.value
        elif isinstance(__o, str):
            return self.value == __o
        return super().__eq__(__o)

    def __hash__(self) -> int:
        return hash(self.value)

    def __str__(self) -> str:
        return self.value

    @staticmethod
    def from_str(str: str) -> MissionOutcome:
        for outcome in MissionOutcome:
            if outcome.value == str:
                return outcome
        raise ValueError("The string provided is not a valid MissionOutcome")


class ReplanDecision(Enum):
    CONTINUE = "continue"
    REPLAN_MISSION = "replan_mission"

    def __str__(self) -> str:
        return self.value


def derive_rng(*keys: int) -> np.random.Generator:
    r'''
    Independent random stream identified by integer keys

    Streams derived from the same keys are identical, so work spread over
    threads draws the same numbers as a serial loop.

    Parameters
    ----------
        *keys : int
            Non negative integers, typically (master seed, generation, index)
    '''
    return np.random.default_rng([int(k) for k in keys])


def spawn_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**63 - 1))
