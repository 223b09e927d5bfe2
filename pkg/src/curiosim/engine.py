"""Hot inner loops, jitted with numba when available.

Every kernel here is a plain Python function; `_jit` compiles it in nopython
mode (no fastmath, so float semantics match the interpreted fallback exactly).
If numba is missing the raw functions are used as-is, which keeps the full
test suite runnable, just slowly.

Grid convention used throughout: cells[row, col] with row = floor(y / cell_size),
col = floor(x / cell_size); cell value 1 is a wall, 0 is free space. Points on
a cell boundary belong to the higher-index cell.
"""

import math

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True

    def _jit(fn):
        return njit(cache=True)(fn)

except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def _jit(fn):
        return fn


def _raycast(cells, cell_size, ox, oy, angle, max_range):
    """Distance from (ox, oy) along `angle` to the first wall-cell boundary.

    Exact DDA cell walk; returns max_range if nothing is hit. The origin is
    assumed to lie inside the grid in a free cell (callers check). Ties where
    the ray crosses a cell corner step in x first, so a diagonal gap between
    two wall cells does not let the ray through when the x-side cell is solid.
    """
    height, width = cells.shape
    dx = math.cos(angle)
    dy = math.sin(angle)
    col = int(math.floor(ox / cell_size))
    row = int(math.floor(oy / cell_size))

    if dx > 0.0:
        step_x = 1
        tmax_x = ((col + 1) * cell_size - ox) / dx
        tdelta_x = cell_size / dx
    elif dx < 0.0:
        step_x = -1
        tmax_x = (col * cell_size - ox) / dx
        tdelta_x = -cell_size / dx
    else:
        step_x = 0
        tmax_x = math.inf
        tdelta_x = math.inf

    if dy > 0.0:
        step_y = 1
        tmax_y = ((row + 1) * cell_size - oy) / dy
        tdelta_y = cell_size / dy
    elif dy < 0.0:
        step_y = -1
        tmax_y = (row * cell_size - oy) / dy
        tdelta_y = -cell_size / dy
    else:
        step_y = 0
        tmax_y = math.inf
        tdelta_y = math.inf

    while True:
        if tmax_x <= tmax_y:
            t = tmax_x
            tmax_x += tdelta_x
            col += step_x
        else:
            t = tmax_y
            tmax_y += tdelta_y
            row += step_y
        if t > max_range:
            return max_range
        if col < 0 or col >= width or row < 0 or row >= height:
            # off the grid counts as a wall
            return t
        if cells[row, col] == 1:
            return t


def _episode(
    cells,
    cell_size,
    x0,
    y0,
    heading0,
    w_hidden,
    w_out,
    steps,
    dt,
    max_speed,
    axle,
    sensor_angles,
    sensor_range,
    sensor_noise,
    motor_noise,
):
    """Run one full episode; the fused sense/act/step/log loop.

    w_hidden is (n_hidden, 9): 8 input weights + bias per hidden unit.
    w_out is (2, n_hidden + 1): hidden weights + bias per motor.
    sensor_noise (steps, 8) and motor_noise (steps, 2) are added before
    clipping; pass zero arrays for the deterministic default.

    Returns (stream, visits, trajectory, max_distance):
      stream     (steps, 10) float64, all components in [0, 1]
      visits     (H, W) int32 per-cell visit counts (post-step positions)
      trajectory (steps, 3) float64 rows (x, y, heading) after each step
      max_distance  float, max Euclidean distance from the start position
    """
    height, width = cells.shape
    n_hidden = w_hidden.shape[0]

    stream = np.empty((steps, 10))
    traj = np.empty((steps, 3))
    visits = np.zeros((height, width), dtype=np.int32)
    activ = np.empty(8)
    hidden = np.empty(n_hidden)

    x = x0
    y = y0
    heading = heading0
    max_dist = 0.0

    for t in range(steps):
        # sense: linear infra-red model, 1 touching .. 0 out of range
        for i in range(8):
            d = _raycast_k(cells, cell_size, x, y, heading + sensor_angles[i], sensor_range)
            a = 1.0 - d / sensor_range
            a += sensor_noise[t, i]
            if a < 0.0:
                a = 0.0
            elif a > 1.0:
                a = 1.0
            activ[i] = a

        # controller: 8-n_hidden-2 perceptron, tanh everywhere
        for j in range(n_hidden):
            s = 0.0
            for i in range(8):
                s += w_hidden[j, i] * activ[i]
            s += w_hidden[j, 8]
            hidden[j] = math.tanh(s)
        m0 = 0.0
        m1 = 0.0
        for j in range(n_hidden):
            m0 += w_out[0, j] * hidden[j]
            m1 += w_out[1, j] * hidden[j]
        m0 = math.tanh(m0 + w_out[0, n_hidden])
        m1 = math.tanh(m1 + w_out[1, n_hidden])
        m0 += motor_noise[t, 0]
        m1 += motor_noise[t, 1]
        if m0 < -1.0:
            m0 = -1.0
        elif m0 > 1.0:
            m0 = 1.0
        if m1 < -1.0:
            m1 = -1.0
        elif m1 > 1.0:
            m1 = 1.0

        for i in range(8):
            stream[t, i] = activ[i]
        stream[t, 8] = (m0 + 1.0) / 2.0
        stream[t, 9] = (m1 + 1.0) / 2.0

        # differential drive; blocked moves keep position but turn anyway
        v = (m0 + m1) / 2.0 * max_speed
        omega = (m1 - m0) / axle * max_speed
        heading = heading + omega * dt
        nx = x + math.cos(heading) * v * dt
        ny = y + math.sin(heading) * v * dt
        ncol = int(math.floor(nx / cell_size))
        nrow = int(math.floor(ny / cell_size))
        if 0 <= ncol < width and 0 <= nrow < height and cells[nrow, ncol] == 0:
            x = nx
            y = ny

        visits[int(math.floor(y / cell_size)), int(math.floor(x / cell_size))] += 1
        traj[t, 0] = x
        traj[t, 1] = y
        traj[t, 2] = heading
        dist = math.hypot(x - x0, y - y0)
        if dist > max_dist:
            max_dist = dist

    return stream, visits, traj, max_dist


def _epsilon_means(points, epsilon, seed_centers, seed_counts):
    """Single-pass fixed-radius clustering of `points`, in order.

    Starts from the seed clusters (pass empty arrays for a fresh build).
    A point farther than epsilon from every existing center founds a new
    cluster at the point itself; centers never move. Nearest-center ties go
    to the lowest index. Distances are compared squared, which is equivalent
    for the Euclidean metric.

    Returns (centers, counts) trimmed to the final cluster count.
    """
    n, dim = points.shape
    p0 = seed_centers.shape[0]
    centers = np.empty((p0 + n, dim))
    counts = np.zeros(p0 + n, dtype=np.int64)
    for j in range(p0):
        for k in range(dim):
            centers[j, k] = seed_centers[j, k]
        counts[j] = seed_counts[j]
    p = p0
    eps2 = epsilon * epsilon

    for t in range(n):
        best = -1
        best_d2 = math.inf
        for j in range(p):
            s = 0.0
            for k in range(dim):
                diff = points[t, k] - centers[j, k]
                s += diff * diff
                if s >= best_d2:
                    break
            if s < best_d2:
                best_d2 = s
                best = j
        if best < 0 or best_d2 > eps2:
            for k in range(dim):
                centers[p, k] = points[t, k]
            counts[p] = 1
            p += 1
        else:
            counts[best] += 1

    return centers[:p].copy(), counts[:p].copy()


# interpreted originals, kept for fallback and equivalence testing
raycast_py = _raycast
episode_py = _episode
epsilon_means_py = _epsilon_means

_raycast_k = _jit(_raycast)
raycast = _raycast_k
episode = _jit(_episode)
epsilon_means = _jit(_epsilon_means)
