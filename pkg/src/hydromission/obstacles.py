from __future__ import annotations
from typing import TYPE_CHECKING, Iterable, Optional

import numpy as np
from shapely import Point
from shapely.geometry import mapping

from .utils import HydroMissionException, ObstacleKind

if TYPE_CHECKING:
    from .env import TerrainGrid, VortexField


DEFAULT_GROWTH = 0.01


class Obstacle():
    r'''
        Represent an obstacle of the operating field, it's a generic class, use the
        specific classes (or :class:`ObstacleFactory`) to get the motion model of a kind

        Properties
        ----------
            id : str
                The id of the obstacle
            kind : ObstacleKind
                The obstacle category
            position : np.ndarray
                Center (x, y, z) in meters
            radius : float
                Nominal radius (half of the diameter), strictly positive
            uncertainty : float
                Uncertainty ratio, drives the sensing noise and the boundary growth
            velocity : np.ndarray
                Intrinsic velocity (m/s), zero for static and afloat obstacles
            age : float
                Seconds elapsed since the obstacle was first observed
            growth : float
                Boundary growth rate g (1/s)
            out_of_bounds : bool
                Set once the obstacle has left the terrain, such obstacles never collide
    '''
    kind = ObstacleKind.STATIC

    def __init__(self, id: str, position, radius: float, uncertainty: float = 0.0, velocity=(0.0, 0.0, 0.0),
                 age: float = 0.0, growth: float = DEFAULT_GROWTH, out_of_bounds: bool = False):
        if radius <= 0:
            raise HydroMissionException(f"Obstacle {id} radius must be positive", "OBSTACLES")
        if uncertainty < 0:
            raise HydroMissionException(f"Obstacle {id} uncertainty must be non negative", "OBSTACLES")
        self._id = id
        self._position = np.asarray(position, dtype=float).reshape(3)
        self._radius = float(radius)
        self._uncertainty = float(uncertainty)
        self._velocity = np.asarray(velocity, dtype=float).reshape(3)
        self._age = float(age)
        self._growth = float(growth)
        self._out_of_bounds = bool(out_of_bounds)
        self._position.setflags(write=False)
        self._velocity.setflags(write=False)
        self.check_velocity()

    @property
    def id(self) -> str:
        return self._id

    @property
    def position(self) -> np.ndarray:
        return self._position

    @property
    def radius(self) -> float:
        return self._radius

    @property
    def uncertainty(self) -> float:
        return self._uncertainty

    @property
    def velocity(self) -> np.ndarray:
        return self._velocity

    @property
    def age(self) -> float:
        return self._age

    @property
    def growth(self) -> float:
        return self._growth

    @property
    def out_of_bounds(self) -> bool:
        return self._out_of_bounds

    @property
    def effective_radius(self) -> float:
        r'''
        Collision boundary ``radius + growth * uncertainty * age``
        '''
        return self._radius + self._growth * self._uncertainty * self._age

    @property
    def footprint(self):
        r'''
        Horizontal collision disc as a shapely polygon
        '''
        return Point(self._position[0], self._position[1]).buffer(self.effective_radius)

    @property
    def geojson_feature(self) -> dict:
        return {
            "type": "Feature",
            "properties": {"id": self.id, "kind": str(self.kind), "depth": float(self._position[2]),
                           "effective_radius": self.effective_radius, "out_of_bounds": self.out_of_bounds},
            "geometry": mapping(self.footprint),
        }

    def check_velocity(self):
        if np.any(self._velocity != 0.0):
            raise HydroMissionException(f"{self.kind} obstacle {self.id} cannot carry an intrinsic velocity", "OBSTACLES")

    def displacement(self, current: np.ndarray, dt: float) -> np.ndarray:
        r'''
        Displacement over ``dt`` given the current at the obstacle
        '''
        return np.zeros(3)

    def evolve(self, position, elapsed: float, out_of_bounds: bool) -> Obstacle:
        return type(self)(self.id, position, self.radius, self.uncertainty, self.velocity,
                          self.age + elapsed, self.growth, out_of_bounds)

    def to_dict(self) -> dict:
        return {'id': self.id, 'kind': str(self.kind), 'position': self.position.tolist(), 'radius': self.radius,
                'uncertainty': self.uncertainty, 'velocity': self.velocity.tolist(), 'age': self.age,
                'growth': self.growth, 'out_of_bounds': self.out_of_bounds}

    def __str__(self) -> str:
        x, y, z = self._position
        return f'{self.kind} {self.id} : ({x:.1f}, {y:.1f}, {z:.1f}) r={self.effective_radius:.1f}'


class StaticObstacle(Obstacle):
    kind = ObstacleKind.STATIC


class AfloatObstacle(Obstacle):
    r'''
        Obstacle drifting with the current
    '''
    kind = ObstacleKind.AFLOAT

    def displacement(self, current: np.ndarray, dt: float) -> np.ndarray:
        return current * dt


class SelfMotivatedObstacle(Obstacle):
    r'''
        Obstacle drifting with the current and moving with its own velocity
    '''
    kind = ObstacleKind.SELF_MOTIVATED

    def check_velocity(self):
        pass

    def displacement(self, current: np.ndarray, dt: float) -> np.ndarray:
        return (current + self.velocity) * dt


class ObstacleFactory():
    def create_obstacle(self, kind: str, id: str, position, radius: float, **kwargs) -> Obstacle:
        kind = ObstacleKind.from_str(kind) if isinstance(kind, str) else kind
        if kind == ObstacleKind.AFLOAT:
            return AfloatObstacle(id, position, radius, **kwargs)
        elif kind == ObstacleKind.SELF_MOTIVATED:
            return SelfMotivatedObstacle(id, position, radius, **kwargs)
        else:
            return StaticObstacle(id, position, radius, **kwargs)

    def from_dict(self, raw: dict) -> Obstacle:
        raw = dict(raw)
        return self.create_obstacle(raw.pop('kind'), raw.pop('id'), raw.pop('position'), raw.pop('radius'), **raw)


def step_obstacles(obstacles: Iterable[Obstacle], field: VortexField, dt: float, rng: Optional[np.random.Generator] = None,
                   terrain: Optional[TerrainGrid] = None) -> tuple[Obstacle, ...]:
    r'''
        Advance every obstacle by ``dt`` seconds

        Parameters
        ----------
        obstacles : iterable of Obstacle
        field : VortexField
            Current advecting afloat and self motivated obstacles
        dt : float
            Time step, strictly positive
        rng : np.random.Generator, optional
            Unused by the deterministic motion models, kept for stochastic ones
        terrain : TerrainGrid, optional
            When given, obstacles leaving its extent are flagged out of bounds

        Returns
        -------
            The moved obstacles, in the input order
    '''
    if dt <= 0:
        raise HydroMissionException(f"dt must be positive, got {dt}", "OBSTACLES")
    obstacles = tuple(obstacles)
    if not obstacles:
        return ()
    positions = np.array([o.position for o in obstacles])
    currents = field.velocity(positions)
    moved = []
    for obstacle, current in zip(obstacles, currents):
        if obstacle.kind == ObstacleKind.STATIC:
            moved.append(obstacle.evolve(obstacle.position, dt, obstacle.out_of_bounds))
            continue
        position = obstacle.position + obstacle.displacement(current, dt)
        out_of_bounds = obstacle.out_of_bounds
        if terrain is not None and not terrain.contains(position.reshape(1, 3))[0]:
            out_of_bounds = True
        moved.append(obstacle.evolve(position, dt, out_of_bounds))
    return tuple(moved)


def sense_obstacles(obstacles: Iterable[Obstacle], vehicle_pos, sensor_range: float, rng: np.random.Generator,
                    noise_scale: float = 1.0) -> tuple[Obstacle, ...]:
    r'''
        Sonar observation of the obstacles around the vehicle

        Obstacles farther than ``sensor_range`` are omitted. Observed positions are
        perturbed on each axis by zero mean Gaussian noise of standard deviation
        ``noise_scale * uncertainty``.
    '''
    if sensor_range <= 0:
        raise HydroMissionException(f"sensor_range must be positive, got {sensor_range}", "OBSTACLES")
    vehicle_pos = np.asarray(vehicle_pos, dtype=float).reshape(3)
    observed = []
    for obstacle in obstacles:
        if np.linalg.norm(obstacle.position - vehicle_pos) > sensor_range:
            continue
        noise = rng.normal(0.0, 1.0, 3) * noise_scale * obstacle.uncertainty
        observed.append(obstacle.evolve(obstacle.position + noise, 0.0, obstacle.out_of_bounds))
    return tuple(observed)


def collision_mask(obstacles: Iterable[Obstacle], points: np.ndarray, clearance: float = 0.0) -> np.ndarray:
    r'''
        Boolean mask of the points lying inside the effective radius (plus ``clearance``) of any in-bounds obstacle
    '''
    points = np.atleast_2d(points)
    hit = np.zeros(points.shape[0], dtype=bool)
    for obstacle in obstacles:
        if obstacle.out_of_bounds:
            continue
        hit |= np.linalg.norm(points - obstacle.position, axis=1) < obstacle.effective_radius + clearance
    return hit
