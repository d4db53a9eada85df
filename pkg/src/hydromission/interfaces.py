from __future__ import annotations
import sys
from typing import TYPE_CHECKING, Any, Optional
if TYPE_CHECKING:
    import numpy as np
    from .profile import Profile


from .utils import bcolors, HydroMissionException


def __cli_flag__(*flags: str) -> bool:
    return any(flag in sys.argv for flag in flags)


class ILog():
    r'''
        Coloured ``[HEADER] message`` logging shared by every component

        Verbosity is resolved from the lowest to the highest priority: the profile,
        the ``verbose`` keyword, then ``-v`` / ``--verbose`` on the command line.
        Warnings follow the same chain with ``warning`` and ``--no-warning``.
        Warnings go to stderr so the exported tables stay alone on stdout.
    '''
    def __init__(self, header: str, profile: Optional[Profile], **kwargs):
        self.header = header

        self.verbose = kwargs.get('verbose', profile.get_verbose() if profile is not None else False)
        if __cli_flag__('-v', '--verbose'):
            self.verbose = True

        self.displaying_warning = kwargs.get('warning', profile.__displaying_warning__() if profile is not None else True)
        if __cli_flag__('--no-warning'):
            self.displaying_warning = False

    def set_verbose(self, verbose: bool):
        self.verbose = verbose

    def get_verbose(self) -> bool:
        return self.verbose

    def __displaying_warning__(self) -> bool:
        return self.displaying_warning

    def log_kwargs(self) -> dict:
        r'''
            Log settings to hand to the components this one creates
        '''
        return {'verbose': self.verbose, 'warning': self.displaying_warning}

    def __emit__(self, colour: str, msg, stream=None):
        print(f"{colour}[{self.header}] {msg}{bcolors.ENDC}", file=stream or sys.stdout)

    def info(self, msg):
        self.__emit__(bcolors.OKGREEN, msg)

    def bold(self, msg):
        self.__emit__(bcolors.BOLD, msg)

    def debug(self, msg):
        if self.verbose:
            self.__emit__(bcolors.OKBLUE, msg)

    def warning(self, msg):
        if self.displaying_warning:
            self.__emit__(bcolors.WARNING, msg, sys.stderr)

    def error(self, msg):
        raise HydroMissionException(header=self.header, message=str(msg))


class IPlanner(ILog):
    def __init__(self, header: str, profile: Profile, **kwargs) -> None:
        r'''
            Internal function to create a planner interface

            Parameters
            ----------
            header : str
                The log header of the planner
            profile : Profile
                The run-wide profile (seed, verbosity, stopwatch, workers)
            **kwargs : dict, optional
                verbose, warning : bool
                    Override the profile log settings
        '''
        ILog.__init__(self, header=header, profile=profile, **kwargs)
        self.profile = profile
        self.evaluations = 0

    def perform(self, *args, **kwargs) -> Any:
        r'''
            Plan once with the planner's default entry point, overridden by every planner
        '''
        raise NotImplementedError


class Encoding():
    r'''
        Contract a problem supplies to the BBO engine

        A solution is any object the encoding understands (a float vector for
        continuous problems, a priority vector for task sequences). The engine
        only moves SIVs between solutions through :meth:`exchange_siv` and never
        inspects them otherwise.
    '''

    def random_feasible(self, rng: np.random.Generator) -> Any:
        raise NotImplementedError

    def size(self, solution: Any) -> int:
        return len(solution)

    def cost(self, solution: Any, context: Any = None) -> float:
        raise NotImplementedError

    def violation(self, solution: Any, context: Any = None) -> float:
        r'''
            Penalty part of the cost, 0 for a solution meeting every constraint
        '''
        return 0.0

    def evaluate(self, solution: Any, context: Any = None) -> tuple[float, float]:
        r'''
            Returns
            -------
            (cost, violation) of a solution, override when both come from one computation
        '''
        return self.cost(solution, context), self.violation(solution, context)

    def exchange_siv(self, receiver: Any, donor: Any, index: int, rng: np.random.Generator) -> Any:
        raise NotImplementedError

    def mutate(self, solution: Any, rate: float, rng: np.random.Generator) -> Any:
        raise NotImplementedError

    def repair(self, solution: Any) -> Optional[Any]:
        r'''
            Map a solution back into the feasible set

            Returns
            -------
            The repaired solution, or None when it cannot be repaired
        '''
        return solution

    def infeasibility(self, solution: Any) -> Optional[str]:
        r'''
            Name of the first feasibility criterion the solution violates, None if feasible
        '''
        return None
