import time
from typing import Callable

from .interfaces import ILog
from .utils import HydroMissionException


class Stopwatch():
    r'''
    Measures the compute time charged to planners

    Two modes are available:

    - ``virtual`` charges ``evaluations * eval_seconds``, so identical runs report identical times
    - ``wall`` reads the clock (``time.perf_counter`` unless another callable is given)
    '''
    MODES = ('virtual', 'wall')

    def __init__(self, mode: str = 'virtual', eval_seconds: float = 1e-4, clock: Callable[[], float] = time.perf_counter) -> None:
        if mode not in Stopwatch.MODES:
            raise HydroMissionException(f"Unknown timing mode '{mode}', expected one of {Stopwatch.MODES}", "PROFILE")
        if eval_seconds < 0:
            raise HydroMissionException("eval_seconds must be non negative", "PROFILE")
        self.mode = mode
        self.eval_seconds = eval_seconds
        self.clock = clock

    def start(self) -> float:
        return self.clock() if self.mode == 'wall' else 0.0

    def elapsed(self, started: float, evaluations: int = 1) -> float:
        r'''
        Parameters
        ----------
        started : float
            The value returned by :meth:`start`
        evaluations : int
            Cost evaluations performed since ``started`` (virtual mode only)

        Returns
        -------
            Seconds charged for the measured work
        '''
        if self.mode == 'wall':
            return self.clock() - started
        return evaluations * self.eval_seconds


class Profile(ILog):
    r'''
    The profile class holds the run-wide settings and diffuses them to every object built with it

    - Exemple : Passing verbose=True will activate the verbose to all planners using this profile instance.

    Parameters
    ----------
    seed : int
        Master seed of the run
    workers : int, optional
        Threads used to evaluate habitat costs (default : 1, serial)
    stopwatch : Stopwatch, optional
        Compute time measurement (default : virtual timing)
    '''
    def __init__(self, seed: int = 0, workers: int = 1, stopwatch: Stopwatch = None, **kwargs) -> None:
        super().__init__(header='PROFILE', profile=None, **kwargs)
        if workers < 1:
            self.error('workers must be at least 1')
        self.seed = seed
        self.workers = workers
        self.stopwatch = stopwatch if stopwatch is not None else Stopwatch()

        self.debug('Profile class created')

    ## GETTERS
    def get_seed(self) -> int:
        return self.seed

    def get_workers(self) -> int:
        return self.workers

    def get_stopwatch(self) -> Stopwatch:
        return self.stopwatch

    def with_seed(self, seed: int) -> 'Profile':
        r'''
        Returns
        -------
            A copy of this profile using another master seed
        '''
        return Profile(seed, self.workers, self.stopwatch, **self.log_kwargs())
