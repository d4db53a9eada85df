from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage
from scipy.cluster.vq import kmeans2
from shapely import Polygon, box, intersects_xy

from .interfaces import ILog
from .utils import ConfigError, HydroMissionException, TerrainClass



UNCERTAIN_RISK_MAX = 0.35
DEFAULT_CELL_SIZE = 10.0
DEFAULT_DEPTH_EXTENT = 1000.0


# ----------------------------------------------------------------------------
# Terrain
# ----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TerrainGrid():
    r'''
    Clustered occupancy grid of the operating field

    Row ``r`` and column ``c`` cover ``y in [r*cell_size, (r+1)*cell_size)`` and
    ``x in [c*cell_size, (c+1)*cell_size)``. Depth ``z`` grows downwards from 0 to
    ``depth_extent``.

    Properties
    ----------
        classes : np.ndarray
            (height, width) array of :class:`TerrainClass` values
        risk : np.ndarray
            (height, width) risk scalar, 0 for water, (0, 0.35] for uncertain cells
        cell_size : float
            Meters per pixel
        depth_extent : float
            Vertical extent in meters
        degenerate : bool
            Set when the source image held a single intensity
    '''
    classes: np.ndarray
    risk: np.ndarray
    cell_size: float = DEFAULT_CELL_SIZE
    depth_extent: float = DEFAULT_DEPTH_EXTENT
    degenerate: bool = False

    def __post_init__(self):
        if self.classes.shape != self.risk.shape or self.classes.ndim != 2 or self.classes.size == 0:
            raise HydroMissionException("classes and risk must be the same non empty 2D shape", "TERRAIN")
        if self.cell_size <= 0 or self.depth_extent <= 0:
            raise HydroMissionException("cell_size and depth_extent must be positive", "TERRAIN")
        self.classes.setflags(write=False)
        self.risk.setflags(write=False)

    @property
    def height(self) -> int:
        return self.classes.shape[0]

    @property
    def width(self) -> int:
        return self.classes.shape[1]

    @property
    def extent_x(self) -> float:
        return self.width * self.cell_size

    @property
    def extent_y(self) -> float:
        return self.height * self.cell_size

    @property
    def extent(self) -> Polygon:
        r'''
        The horizontal extent as a shapely box
        '''
        return box(0.0, 0.0, self.extent_x, self.extent_y)

    def contains(self, points: np.ndarray) -> np.ndarray:
        r'''
        Parameters
        ----------
            points : np.ndarray
                (N, 3) positions

        Returns
        -------
            Boolean mask of the positions lying inside the 3D extent
        '''
        points = np.atleast_2d(points)
        inside = intersects_xy(self.extent, points[:, 0], points[:, 1])
        depth_ok = (points[:, 2] >= 0.0) & (points[:, 2] <= self.depth_extent)
        return inside & depth_ok

    def _cells(self, points: np.ndarray):
        points = np.atleast_2d(points)
        cols = np.floor(points[:, 0] / self.cell_size).astype(int)
        rows = np.floor(points[:, 1] / self.cell_size).astype(int)
        inside = self.contains(points)
        return np.clip(rows, 0, self.height - 1), np.clip(cols, 0, self.width - 1), inside

    def classify(self, points: np.ndarray) -> np.ndarray:
        r'''
        Class codes at positions, positions outside the extent count as coast
        '''
        rows, cols, inside = self._cells(points)
        codes = self.classes[rows, cols].copy()
        codes[~inside] = TerrainClass.COAST.value
        return codes

    def risk_at(self, points: np.ndarray) -> np.ndarray:
        rows, cols, inside = self._cells(points)
        risk = self.risk[rows, cols].copy()
        risk[~inside] = 0.0
        return risk

    def class_at(self, point) -> TerrainClass:
        return TerrainClass(int(self.classify(np.asarray(point, dtype=float).reshape(1, 3))[0]))

    def is_water(self, point) -> bool:
        return self.class_at(point) == TerrainClass.WATER

    def fractions(self) -> dict[TerrainClass, float]:
        total = self.classes.size
        return {c: float(np.count_nonzero(self.classes == c.value)) / total for c in TerrainClass}

    def window(self, col: int, row: int, width: int, height: int) -> TerrainGrid:
        r'''
        Sub grid starting at pixel (col, row), coordinates restart at 0
        '''
        if col < 0 or row < 0 or col + width > self.width or row + height > self.height or width <= 0 or height <= 0:
            raise HydroMissionException("window outside the terrain", "TERRAIN")
        return TerrainGrid(self.classes[row:row + height, col:col + width].copy(),
                           self.risk[row:row + height, col:col + width].copy(),
                           self.cell_size, self.depth_extent, self.degenerate)

    @staticmethod
    def open_water(width: int, height: int, cell_size: float = DEFAULT_CELL_SIZE, depth_extent: float = DEFAULT_DEPTH_EXTENT) -> TerrainGrid:
        return TerrainGrid(np.full((height, width), TerrainClass.WATER.value, dtype=np.int8),
                           np.zeros((height, width)), cell_size, depth_extent)


def cluster_map(gray_image: np.ndarray, k: int = 3, cell_size: float = DEFAULT_CELL_SIZE, depth_extent: float = DEFAULT_DEPTH_EXTENT,
                **kwargs) -> TerrainGrid:
    r'''
    Classify a grayscale map into coast, uncertain and water cells with k-means

    Centroids are seeded at 1/6, 1/2 and 5/6 of the intensity range, so the result
    only depends on the image. Clusters are ranked by mean intensity: darkest is
    coast, middle is uncertain, lightest is water. A cluster left empty collapses,
    leaving the darkest remaining cluster as coast and the lightest as water.

    Parameters
    ----------
        gray_image : np.ndarray
            2D intensity grid
        k : int
            Class count, must be 3
        cell_size : float
            Meters per pixel
        depth_extent : float
            Vertical extent of the terrain in meters
        **kwargs : dict, optional
            verbose, warning : bool

    Returns
    -------
        The clustered :class:`TerrainGrid`. Uncertain cells get a risk growing
        linearly with darkness inside (0, 0.35].
    '''
    if k != 3:
        raise HydroMissionException(f"k-means terrain clustering needs k = 3, got {k}", "TERRAIN")
    gray = np.asarray(gray_image, dtype=float)
    if gray.ndim != 2 or gray.size == 0:
        raise HydroMissionException("the map image must be a non empty 2D grid", "TERRAIN")

    if gray.min() == gray.max():
        ILog("TERRAIN", None, **kwargs).warning(f"uniform {gray.shape[1]}x{gray.shape[0]} map, every cell is water")
        return replace(TerrainGrid.open_water(gray.shape[1], gray.shape[0], cell_size, depth_extent), degenerate=True)

    data = gray.reshape(-1, 1)
    low, high = float(gray.min()), float(gray.max())
    seeds = (low + (high - low) * np.array([1 / 6, 1 / 2, 5 / 6])).reshape(-1, 1)
    with warnings.catch_warnings():
        warnings.simplefilter('ignore')
        centroids, labels = kmeans2(data, seeds, iter=50, minit='matrix', missing='warn')

    present = np.unique(labels)
    means = {int(c): float(data[labels == c].mean()) for c in present}
    ranked = sorted(means, key=means.get)

    classes = np.empty(labels.shape, dtype=np.int8)
    risk = np.zeros(labels.shape)
    if len(ranked) == 1:
        classes[:] = TerrainClass.WATER.value
    else:
        classes[labels == ranked[0]] = TerrainClass.COAST.value
        classes[labels == ranked[-1]] = TerrainClass.WATER.value
        if len(ranked) == 3:
            mid = labels == ranked[1]
            classes[mid] = TerrainClass.UNCERTAIN.value
            low = 0.5 * (means[ranked[0]] + means[ranked[1]])
            high = 0.5 * (means[ranked[1]] + means[ranked[2]])
            values = data[mid, 0]
            risk[mid] = np.clip(UNCERTAIN_RISK_MAX * (high - values) / max(high - low, 1e-9), 1e-3, UNCERTAIN_RISK_MAX)

    return TerrainGrid(classes.reshape(gray.shape), risk.reshape(gray.shape), cell_size, depth_extent)


def synthetic_map(kind: str = 'archipelago', size: int = 1000, seed: int = 0, land_fraction: float = 0.2,
                  rim_fraction: float = 0.08, clear: Sequence[tuple[float, float, float]] = ()) -> tuple[np.ndarray, np.ndarray]:
    r'''
    Procedural grayscale map standing in for a licensed chart

    Parameters
    ----------
        kind : str
            ``open`` (all water) or ``archipelago`` (smoothed noise islands with a shallow rim)
        size : int
            Pixels per side
        seed : int
            Noise seed
        land_fraction, rim_fraction : float
            Target fractions of land and uncertain rim pixels
        clear : sequence of (col, row, radius_px)
            Discs forced to water (start and destination neighbourhoods)

    Returns
    -------
        (gray, coast_mask): uint8 image and the boolean land mask it was drawn from
    '''
    rng = np.random.default_rng(seed)
    if kind == 'open':
        return np.full((size, size), 220, dtype=np.uint8), np.zeros((size, size), dtype=bool)
    if kind != 'archipelago':
        raise HydroMissionException(f"Unknown synthetic map kind '{kind}'", "TERRAIN")

    height = ndimage.gaussian_filter(rng.normal(size=(size, size)), sigma=max(size / 40.0, 1.0), mode='wrap')
    rows, cols = np.mgrid[0:size, 0:size]
    for col, row, radius in clear:
        height[(cols - col) ** 2 + (rows - row) ** 2 <= radius ** 2] = -np.inf
    land_level = np.quantile(height[np.isfinite(height)], 1.0 - land_fraction)
    rim_level = np.quantile(height[np.isfinite(height)], 1.0 - land_fraction - rim_fraction)
    coast = height > land_level
    rim = (height > rim_level) & ~coast

    gray = rng.normal(220.0, 6.0, (size, size))
    gray[rim] = rng.normal(130.0, 6.0, int(rim.sum()))
    gray[coast] = rng.normal(40.0, 6.0, int(coast.sum()))
    return np.clip(gray, 0, 255).astype(np.uint8), coast


def read_pgm(path) -> np.ndarray:
    r'''
    Read a binary (P5) portable graymap with 8 bit samples
    '''
    raw = Path(path).read_bytes()
    tokens = []
    position = 0
    while len(tokens) < 4:
        while position < len(raw) and chr(raw[position]).isspace():
            position += 1
        if position < len(raw) and raw[position:position + 1] == b'#':
            while position < len(raw) and raw[position:position + 1] not in (b'\n', b'\r'):
                position += 1
            continue
        start = position
        while position < len(raw) and not chr(raw[position]).isspace():
            position += 1
        if start == position:
            raise HydroMissionException(f"Truncated PGM header in {path}", "TERRAIN")
        tokens.append(raw[start:position])
    if tokens[0] != b'P5':
        raise HydroMissionException(f"{path} is not a binary PGM (P5) file", "TERRAIN")
    width, height, maxval = (int(t) for t in tokens[1:])
    if maxval > 255:
        raise HydroMissionException(f"{path} uses 16 bit samples, only 8 bit maps are supported", "TERRAIN")
    if len(raw) - (position + 1) < width * height:
        raise ConfigError(f"truncated PGM body, expected {width * height} pixels", str(path))
    pixels = np.frombuffer(raw, dtype=np.uint8, count=width * height, offset=position + 1)
    return pixels.reshape(height, width).copy()


def write_pgm(path, gray: np.ndarray) -> None:
    gray = np.asarray(gray, dtype=np.uint8)
    header = f"P5\n{gray.shape[1]} {gray.shape[0]}\n255\n".encode('ascii')
    Path(path).write_bytes(header + gray.tobytes())


def read_raw_grid(path) -> tuple[np.ndarray, float]:
    r'''
    Read a ``.npy`` intensity grid and its JSON sidecar header

    The sidecar shares the grid's stem (``map.npy`` -> ``map.json``) and declares
    ``width``, ``height`` and ``cell_size``.
    '''
    path = Path(path)
    sidecar = json.loads(path.with_suffix('.json').read_text())
    grid = np.load(path)
    if grid.shape != (sidecar['height'], sidecar['width']):
        raise HydroMissionException(f"{path} shape {grid.shape} does not match its header", "TERRAIN")
    return grid, float(sidecar['cell_size'])


# ----------------------------------------------------------------------------
# Current field
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class VortexParams():
    r'''
    One vortex of a current layer

    Properties
    ----------
        center : tuple[float, float]
            Vortex center (m)
        strength : float
            Circulation strength
        radius : float
            Core radius ell (m), strictly positive
        gamma : float
            Vertical current scale
        layer : int
            Depth layer index
        update_rate : float
            Current update rate applied by :func:`evolve_field`
        sigma_sx, sigma_sy, sigma_radius, sigma_strength : float
            Standard deviations of the recursive Gaussian updates
    '''
    center: tuple[float, float]
    strength: float
    radius: float
    gamma: float = 0.1
    layer: int = 0
    update_rate: float = 0.0
    sigma_sx: float = 0.0
    sigma_sy: float = 0.0
    sigma_radius: float = 0.0
    sigma_strength: float = 0.0

    def __post_init__(self):
        if self.radius <= 0:
            raise HydroMissionException(f"vortex radius must be positive, got {self.radius}", "FIELD")
        object.__setattr__(self, 'center', (float(self.center[0]), float(self.center[1])))

    @property
    def covariance(self) -> np.ndarray:
        return np.diag([self.radius, self.radius])

    def to_dict(self) -> dict:
        return {'center': list(self.center), 'strength': self.strength, 'radius': self.radius, 'gamma': self.gamma,
                'layer': self.layer, 'update_rate': self.update_rate, 'sigma_sx': self.sigma_sx,
                'sigma_sy': self.sigma_sy, 'sigma_radius': self.sigma_radius, 'sigma_strength': self.sigma_strength}


@dataclass(frozen=True)
class VortexField():
    r'''
    Layered current model: one vortex set per depth band

    Properties
    ----------
        layers : tuple[tuple[VortexParams, ...], ...]
            Vortices of every layer, shallowest first
        depth_extent : float
            Depth covered by all layers (m), split in equal bands
        epsilon : float
            Radius of the ball around a vortex center where horizontal current is 0
        radius_floor : float
            Smallest radius the recursive updates may reach
    '''
    layers: tuple
    depth_extent: float = DEFAULT_DEPTH_EXTENT
    epsilon: float = 1.0
    radius_floor: float = 10.0

    def __post_init__(self):
        if len(self.layers) == 0:
            raise HydroMissionException("a current field needs at least one layer", "FIELD")
        object.__setattr__(self, 'layers', tuple(tuple(layer) for layer in self.layers))

    @property
    def band(self) -> float:
        return self.depth_extent / len(self.layers)

    def layer_index(self, z: np.ndarray) -> np.ndarray:
        return np.clip(np.floor(np.asarray(z, dtype=float) / self.band).astype(int), 0, len(self.layers) - 1)

    def velocity(self, points: np.ndarray) -> np.ndarray:
        r'''
        Current velocity (u_c, v_c, w_c) at many positions

        Each vortex contributes a Lamb-Oseen tangential velocity

        ``u_c = -I (y - y0) (1 - exp(-r^2 / l^2)) / (2 pi r^2)``
        ``v_c =  I (x - x0) (1 - exp(-r^2 / l^2)) / (2 pi r^2)``

        and a vertical Gaussian bump ``w_c = gamma I exp(-r^2 / (2 l)) / sqrt(det(2 pi diag(l, l)))``.
        Contributions of the vortices of the layer owning each depth add up.

        Parameters
        ----------
            points : np.ndarray
                (N, 3) positions

        Returns
        -------
            (N, 3) velocity array (m/s)
        '''
        points = np.atleast_2d(np.asarray(points, dtype=float))
        result = np.zeros((points.shape[0], 3))
        indices = self.layer_index(points[:, 2])
        for index, layer in enumerate(self.layers):
            selected = indices == index
            if not selected.any() or not layer:
                continue
            x = points[selected, 0]
            y = points[selected, 1]
            for vortex in layer:
                dx = x - vortex.center[0]
                dy = y - vortex.center[1]
                r2 = dx * dx + dy * dy
                regular = r2 >= self.epsilon ** 2
                factor = np.zeros_like(r2)
                factor[regular] = vortex.strength * (1.0 - np.exp(-r2[regular] / vortex.radius ** 2)) / (2.0 * math.pi * r2[regular])
                result[selected, 0] += -factor * dy
                result[selected, 1] += factor * dx
                result[selected, 2] += vortex.gamma * vortex.strength * np.exp(-r2 / (2.0 * vortex.radius)) / (2.0 * math.pi * vortex.radius)
        return result

    def to_dict(self) -> dict:
        return {'depth_extent': self.depth_extent, 'epsilon': self.epsilon, 'radius_floor': self.radius_floor,
                'layers': [[v.to_dict() for v in layer] for layer in self.layers]}


@dataclass(frozen=True)
class CurrentSample():
    r'''
    Current at one position

    Properties
    ----------
        u, v, w : float
            Velocity components (m/s)
        magnitude : float
            |V_c|
        psi : float
            Horizontal direction atan2(v, u)
        theta : float
            Vertical direction asin(w / |V_c|), 0 for a null current
    '''
    u: float
    v: float
    w: float
    magnitude: float
    psi: float
    theta: float

    @staticmethod
    def from_velocity(u: float, v: float, w: float) -> CurrentSample:
        magnitude = math.sqrt(u * u + v * v + w * w)
        if magnitude == 0.0:
            return CurrentSample(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        return CurrentSample(float(u), float(v), float(w), magnitude, math.atan2(v, u), math.asin(max(-1.0, min(1.0, w / magnitude))))


def current_directions(velocity: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    r'''
    Vectorised (|V_c|, psi_c, theta_c) of an (N, 3) velocity array
    '''
    magnitude = np.linalg.norm(velocity, axis=1)
    psi = np.where(magnitude > 0, np.arctan2(velocity[:, 1], velocity[:, 0]), 0.0)
    ratio = np.divide(velocity[:, 2], magnitude, out=np.zeros_like(magnitude), where=magnitude > 0)
    theta = np.arcsin(np.clip(ratio, -1.0, 1.0))
    return magnitude, psi, theta


def sample_current(field: VortexField, p, t: float = 0.0) -> CurrentSample:
    r'''
    Current at one position

    Parameters
    ----------
        field : VortexField
            The layered field, already evolved to time ``t``
        p : sequence of 3 floats
            Position (m)
        t : float
            Time of the sample (s). Field parameters are advanced by
            :func:`evolve_field`, so ``t`` is carried for traceability only.
    '''
    u, v, w = field.velocity(np.asarray(p, dtype=float).reshape(1, 3))[0]
    return CurrentSample.from_velocity(u, v, w)


def evolve_field(field: VortexField, rng: np.random.Generator) -> VortexField:
    r'''
    One world step of the recursive Gaussian update of every vortex

    ``S_t = S_{t-1} + U (X_sx, X_sy)``, ``l_t = max(l_{t-1} + U X_l, floor)``,
    ``I_t = I_{t-1} + U X_I`` with ``X ~ N(0, sigma)`` and ``U`` the vortex update rate.
    '''
    layers = []
    for layer in field.layers:
        evolved = []
        for vortex in layer:
            noise = rng.normal(0.0, 1.0, 4) * np.array([vortex.sigma_sx, vortex.sigma_sy, vortex.sigma_radius, vortex.sigma_strength])
            rate = vortex.update_rate
            evolved.append(replace(
                vortex,
                center=(vortex.center[0] + rate * noise[0], vortex.center[1] + rate * noise[1]),
                radius=max(vortex.radius + rate * noise[2], field.radius_floor),
                strength=vortex.strength + rate * noise[3],
            ))
        layers.append(tuple(evolved))
    return replace(field, layers=tuple(layers))


def current_raster(field: VortexField, depth: float, extent_x: float, extent_y: float, step: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    r'''
    Current magnitude on a regular horizontal grid at one depth

    Returns
    -------
        (xs, ys, magnitude) where magnitude has shape (len(ys), len(xs))
    '''
    xs = np.arange(step / 2.0, extent_x, step)
    ys = np.arange(step / 2.0, extent_y, step)
    grid_x, grid_y = np.meshgrid(xs, ys)
    points = np.column_stack([grid_x.ravel(), grid_y.ravel(), np.full(grid_x.size, depth)])
    magnitude = np.linalg.norm(field.velocity(points), axis=1).reshape(grid_x.shape)
    return xs, ys, magnitude


@dataclass(frozen=True, eq=False)
class WorldSnapshot():
    r'''
    Immutable view of the world every planner evaluation of one call sees

    Properties
    ----------
        time : float
            Simulated time (s)
        terrain : TerrainGrid
        field : VortexField
        obstacles : tuple[Obstacle, ...]
        seed_state : int
            Opaque marker of the generator state the snapshot was taken at
    '''
    time: float
    terrain: TerrainGrid
    field: VortexField
    obstacles: tuple = ()
    seed_state: int = 0

    def with_obstacles(self, obstacles) -> WorldSnapshot:
        return replace(self, obstacles=tuple(obstacles))

    def with_field(self, field: VortexField) -> WorldSnapshot:
        return replace(self, field=field)
