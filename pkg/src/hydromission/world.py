from __future__ import annotations

from typing import Iterable

import numpy as np

from .env import TerrainGrid, VortexField, WorldSnapshot, evolve_field
from .interfaces import ILog
from .obstacles import Obstacle, sense_obstacles, step_obstacles
from .profile import Profile
from .utils import derive_rng


FIELD_STREAM = 1
SENSING_STREAM = 2


class World(ILog):
    r'''
    The simulated operating field: terrain, evolving current and true obstacles

    Each call to :meth:`advance` is one world step, it draws one recursive update
    of every vortex and moves the obstacles by the elapsed time. Planners only ever
    see immutable :class:`WorldSnapshot` views.

    - Log header : WORLD

    Parameters
    ----------
        terrain : TerrainGrid
        field : VortexField
        obstacles : iterable of Obstacle
        seed : int
            Seed of the field evolution and sensing streams
        profile : Profile, optional
    '''
    def __init__(self, terrain: TerrainGrid, field: VortexField, obstacles: Iterable[Obstacle] = (), seed: int = 0,
                 profile: Profile = None, **kwargs) -> None:
        ILog.__init__(self, header="WORLD", profile=profile, **kwargs)
        self._terrain = terrain
        self._field = field
        self._obstacles = tuple(obstacles)
        self._field_rng = derive_rng(seed, FIELD_STREAM)
        self._sensing_rng = derive_rng(seed, SENSING_STREAM)
        self._time = 0.0
        self._steps = 0
        self.log = [self.log_entry()]

    @property
    def terrain(self) -> TerrainGrid:
        return self._terrain

    @property
    def field(self) -> VortexField:
        return self._field

    @property
    def obstacles(self) -> tuple[Obstacle, ...]:
        return self._obstacles

    @property
    def time(self) -> float:
        return self._time

    @property
    def steps(self) -> int:
        return self._steps

    def advance(self, dt: float) -> WorldSnapshot:
        r'''
        One world step lasting ``dt`` seconds

        Returns
        -------
            The snapshot after the step
        '''
        if dt < 0:
            self.error(f"cannot go back in time (dt = {dt})")
        self._field = self.next_field()
        if dt > 0 and self._obstacles:
            self._obstacles = step_obstacles(self._obstacles, self._field, dt, terrain=self._terrain)
        self._time += dt
        self._steps += 1
        self.log.append(self.log_entry())
        self.debug(f"step {self._steps} at t = {self._time:.1f} s")
        return self.snapshot()

    def next_field(self) -> VortexField:
        return evolve_field(self._field, self._field_rng)

    def replace_field(self, field: VortexField) -> None:
        r'''
        Swap the current field, for scripted perturbations
        '''
        self._field = field

    def snapshot(self) -> WorldSnapshot:
        return WorldSnapshot(self._time, self._terrain, self._field, self._obstacles, self._steps)

    def observe(self, vehicle_pos, sensor_range: float, noise_scale: float = 1.0) -> WorldSnapshot:
        r'''
        Snapshot holding the obstacles as the vehicle's sonar reports them
        '''
        sensed = sense_obstacles(self._obstacles, np.asarray(vehicle_pos, dtype=float), sensor_range, self._sensing_rng, noise_scale)
        return self.snapshot().with_obstacles(sensed)

    def log_entry(self) -> dict:
        return {
            'time': self._time,
            'step': self._steps,
            'field': self._field.to_dict(),
            'obstacles': {'type': 'FeatureCollection', 'features': [o.geojson_feature for o in self._obstacles]},
        }
