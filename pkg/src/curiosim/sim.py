"""Differential-drive robot with eight infra-red range sensors.

An episode runs a controller for a fixed number of steps from the arena
start pose and logs the 10-dimensional sensori-motor stream (8 sensor
activations then the 2 motor commands rescaled to [0, 1]), the per-cell
visit counts, the trajectory, the end point and the maximum distance from
the start. Episodes are deterministic given (arena, genotype, config);
optional sensor/motor noise must be fed an explicit RNG.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import engine
from .arena import PatrolGrid, is_free
from .controller import N_HIDDEN, N_INPUTS

STREAM_DIM = 10

# front-dense fan plus rear: 0, +-pi/6, +-pi/2, +-5pi/6, pi
DEFAULT_SENSOR_ANGLES = (
    0.0,
    math.pi / 6,
    -math.pi / 6,
    math.pi / 2,
    -math.pi / 2,
    5 * math.pi / 6,
    -5 * math.pi / 6,
    math.pi,
)


@dataclass
class RobotState:
    x: float
    y: float
    heading: float


@dataclass
class EpisodeConfig:
    """Episode step budget and the physical constants of the robot.

    Defaults are tuned to the shipped arenas (cell_size 1): a full-speed
    robot covers half a cell per step, the sensors see four cells ahead.
    """

    steps: int = 2000
    dt: float = 0.1
    max_speed: float = 5.0
    axle: float = 1.0
    sensor_range: float = 4.0
    sensor_angles: tuple = DEFAULT_SENSOR_ANGLES
    noise_std: float = 0.0  # sensor/motor Gaussian noise, off by default

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if len(self.sensor_angles) != 8:
            raise ValueError("exactly 8 sensor angles required")


@dataclass
class EpisodeResult:
    stream: np.ndarray  # (steps, 10) float64 in [0, 1]
    patrol: PatrolGrid
    end_point: tuple
    max_distance_from_start: float
    trajectory: np.ndarray = field(repr=False, default=None)  # (steps, 3) x, y, heading


def sense(arena, state, cfg):
    """Eight activations in [0, 1]: 1 touching a wall, 0 nothing in range."""
    if not is_free(arena, (state.x, state.y)):
        raise ValueError("robot position is not in free space")
    out = np.empty(8)
    for i, rel in enumerate(cfg.sensor_angles):
        d = engine.raycast(
            arena.cells, arena.cell_size, state.x, state.y, state.heading + rel, cfg.sensor_range
        )
        out[i] = 1.0 - d / cfg.sensor_range
    return out


def step(arena, state, motors, cfg):
    """One differential-drive update; blocks in place against walls.

    The new heading always applies; the position only moves if the target
    point is free.
    """
    m0, m1 = motors
    v = (m0 + m1) / 2.0 * cfg.max_speed
    omega = (m1 - m0) / cfg.axle * cfg.max_speed
    heading = state.heading + omega * cfg.dt
    nx = state.x + math.cos(heading) * v * cfg.dt
    ny = state.y + math.sin(heading) * v * cfg.dt
    if is_free(arena, (nx, ny)):
        return RobotState(x=nx, y=ny, heading=heading)
    return RobotState(x=state.x, y=state.y, heading=heading)


def run_episode(arena, genotype, cfg, rng=None):
    """Run the controller for cfg.steps steps from the arena start pose.

    rng is only consulted when cfg.noise_std > 0; the default episode is
    bit-for-bit deterministic.
    """
    if cfg.noise_std > 0.0:
        if rng is None:
            raise ValueError("noise_std > 0 requires an rng")
        sensor_noise = rng.standard_normal((cfg.steps, 8)) * cfg.noise_std
        motor_noise = rng.standard_normal((cfg.steps, 2)) * cfg.noise_std
    else:
        sensor_noise = np.zeros((cfg.steps, 8))
        motor_noise = np.zeros((cfg.steps, 2))

    w_hidden = np.ascontiguousarray(genotype.hidden_matrix(), dtype=np.float64)
    w_out = np.ascontiguousarray(genotype.output_matrix(), dtype=np.float64)
    if w_hidden.shape != (N_HIDDEN, N_INPUTS + 1):
        raise ValueError("malformed genotype")
    x0, y0, h0 = arena.start_pose

    stream, visits, traj, max_dist = engine.episode(
        arena.cells,
        arena.cell_size,
        x0,
        y0,
        h0,
        w_hidden,
        w_out,
        cfg.steps,
        cfg.dt,
        cfg.max_speed,
        cfg.axle,
        np.asarray(cfg.sensor_angles, dtype=np.float64),
        cfg.sensor_range,
        sensor_noise,
        motor_noise,
    )

    patrol = arena.new_patrol_grid()
    patrol.counts += visits
    return EpisodeResult(
        stream=stream,
        patrol=patrol,
        end_point=(traj[-1, 0], traj[-1, 1]),
        max_distance_from_start=max_dist,
        trajectory=traj,
    )


def write_trajectory_csv(path, result):
    """Dump `t,x,y,heading,s0..s7,m0,m1` rows, one per step.

    x, y, heading are the pose after the step; the sensors are the readings
    that produced the step's motor commands, in [0, 1]; motors are the raw
    commands in [-1, 1].
    """
    header = "t,x,y,heading," + ",".join(f"s{i}" for i in range(8)) + ",m0,m1"
    lines = [header]
    for t in range(result.stream.shape[0]):
        sensors = result.stream[t, :8]
        m0 = 2.0 * result.stream[t, 8] - 1.0
        m1 = 2.0 * result.stream[t, 9] - 1.0
        x, y, heading = result.trajectory[t]
        cols = [str(t + 1), repr(float(x)), repr(float(y)), repr(float(heading))]
        cols += [repr(float(s)) for s in sensors]
        cols += [repr(float(m0)), repr(float(m1))]
        lines.append(",".join(cols))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
