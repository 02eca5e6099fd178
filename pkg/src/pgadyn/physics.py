"""Deterministic 2D rigid-body simulator: circles and rectangles in a
gravity box with impulse-based collision resolution.

Integration is semi-implicit Euler at a fixed substep dt; one frame is a
fixed number of substeps. Contacts are resolved with normal impulses
(restitution), a Coulomb friction clamp and a Baumgarte-style positional
correction. All arithmetic is double precision and pure, so identical
seeds and configs give bit-identical episodes.
"""

import math
from dataclasses import dataclass, field

import numpy as np


class SimulationDiverged(RuntimeError):
    """A body reached a non-finite state."""


@dataclass(frozen=True)
class Circle:
    radius: float

    @property
    def extent(self):
        return self.radius

    def mass_inertia(self, density):
        m = density * math.pi * self.radius**2
        return m, 0.5 * m * self.radius**2


@dataclass(frozen=True)
class Rect:
    half_w: float
    half_h: float

    @property
    def extent(self):
        return math.hypot(self.half_w, self.half_h)

    def mass_inertia(self, density):
        w, h = 2.0 * self.half_w, 2.0 * self.half_h
        m = density * w * h
        return m, m * (w * w + h * h) / 12.0


@dataclass
class Body:
    shape: object
    pos: np.ndarray
    vel: np.ndarray
    angle: float = 0.0
    omega: float = 0.0
    density: float = 1.0

    def __post_init__(self):
        self.pos = np.asarray(self.pos, dtype=np.float64)
        self.vel = np.asarray(self.vel, dtype=np.float64)
        self.mass, self.inertia = self.shape.mass_inertia(self.density)
        if self.mass <= 0.0 or self.inertia <= 0.0:
            raise ValueError("mass and inertia must be positive")
        self.inv_mass = 1.0 / self.mass
        self.inv_inertia = 1.0 / self.inertia

    def copy(self):
        return Body(self.shape, self.pos.copy(), self.vel.copy(), self.angle, self.omega, self.density)


@dataclass(frozen=True)
class WorldConfig:
    gravity: float = 9.8  # m/s^2, downward (-y)
    dt: float = 1.0 / 480.0
    substeps: int = 8
    restitution_objects: float = 1.0
    restitution_walls: float = 0.9
    friction: float = 1.0
    linear_damping: float = 0.999  # multiplicative per substep
    angular_damping: float = 0.999
    arena: tuple = (0.0, 0.0, 4.0, 4.0)  # xmin, ymin, xmax, ymax
    baumgarte: float = 0.2
    slop: float = 5e-4
    solver_iterations: int = 1
    # below this closing speed collisions are treated as inelastic to keep
    # gravity-driven resting contact from pumping energy
    restitution_threshold: float = 0.05


@dataclass
class World:
    bodies: list
    config: WorldConfig = field(default_factory=WorldConfig)

    def copy(self):
        return World([b.copy() for b in self.bodies], self.config)


@dataclass
class Contact:
    index_a: int  # body index
    index_b: int  # body index, or -1 for a wall contact
    point: np.ndarray
    normal: np.ndarray  # from a to b (or into the wall)
    penetration: float


def _rot(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def rect_vertices(body):
    r = _rot(body.angle)
    hw, hh = body.shape.half_w, body.shape.half_h
    local = np.array([[hw, hh], [-hw, hh], [-hw, -hh], [hw, -hh]])
    return body.pos + local @ r.T


def _circle_circle(a, b):
    d = b.pos - a.pos
    dist = math.hypot(*d)
    rsum = a.shape.radius + b.shape.radius
    if dist >= rsum or dist == 0.0:
        return []
    n = d / dist
    point = a.pos + n * (a.shape.radius - 0.5 * (rsum - dist))
    return [(point, n, rsum - dist)]


def _circle_rect(circle, rect):
    # closest point on the box to the circle center, in box frame
    r = _rot(rect.angle)
    local = r.T @ (circle.pos - rect.pos)
    h = np.array([rect.shape.half_w, rect.shape.half_h])
    clamped = np.clip(local, -h, h)
    delta = local - clamped
    dist = math.hypot(*delta)
    radius = circle.shape.radius
    if dist > 0.0:
        if dist >= radius:
            return []
        n_local = delta / dist
        pen = radius - dist
        point_local = clamped
    else:
        # center inside the box: push out along the shallowest face
        overlap = h - np.abs(local)
        axis = int(np.argmin(overlap))
        sign = 1.0 if local[axis] >= 0.0 else -1.0
        n_local = np.zeros(2)
        n_local[axis] = sign
        pen = overlap[axis] + radius
        point_local = local.copy()
        point_local[axis] = sign * h[axis]
    # normal from circle to rect
    n_world = -(r @ n_local)
    point = rect.pos + r @ point_local
    return [(point, n_world, pen)]


def _clip_segment(v, normal, offset):
    """Clip a 2-point segment to the half-plane normal . x <= offset."""
    out = []
    d0 = normal @ v[0] - offset
    d1 = normal @ v[1] - offset
    if d0 <= 0.0:
        out.append(v[0])
    if d1 <= 0.0:
        out.append(v[1])
    if d0 * d1 < 0.0:
        t = d0 / (d0 - d1)
        out.append(v[0] + t * (v[1] - v[0]))
    return out[:2]


def _incident_edge(h, pos, rot, normal):
    """Edge of the box most anti-parallel to the reference normal."""
    n = -(rot.T @ normal)
    abs_n = np.abs(n)
    hw, hh = h
    if abs_n[0] > abs_n[1]:
        if n[0] >= 0.0:
            v = np.array([[hw, -hh], [hw, hh]])
        else:
            v = np.array([[-hw, hh], [-hw, -hh]])
    else:
        if n[1] >= 0.0:
            v = np.array([[hw, hh], [-hw, hh]])
        else:
            v = np.array([[-hw, -hh], [hw, -hh]])
    return pos + v @ rot.T


def _rect_rect(a, b):
    """SAT with a clipped contact manifold (up to 2 points), after Box2D-lite."""
    ha = np.array([a.shape.half_w, a.shape.half_h])
    hb = np.array([b.shape.half_w, b.shape.half_h])
    rot_a, rot_b = _rot(a.angle), _rot(b.angle)
    dp = b.pos - a.pos
    da = rot_a.T @ dp
    db = rot_b.T @ dp
    c = rot_a.T @ rot_b
    abs_c = np.abs(c) + 1e-12
    face_a = np.abs(da) - ha - abs_c @ hb
    face_b = np.abs(db) - hb - abs_c.T @ ha
    if face_a.max() > 0.0 or face_b.max() > 0.0:
        return []

    rel_tol, abs_tol = 0.95, 0.01
    # best axis: 0,1 = A faces; 2,3 = B faces
    axis, separation = 0, face_a[0]
    normal = rot_a[:, 0] if da[0] > 0.0 else -rot_a[:, 0]
    if face_a[1] > rel_tol * separation + abs_tol * ha[1]:
        axis, separation = 1, face_a[1]
        normal = rot_a[:, 1] if da[1] > 0.0 else -rot_a[:, 1]
    if face_b[0] > rel_tol * separation + abs_tol * hb[0]:
        axis, separation = 2, face_b[0]
        normal = rot_b[:, 0] if db[0] > 0.0 else -rot_b[:, 0]
    if face_b[1] > rel_tol * separation + abs_tol * hb[1]:
        axis, separation = 3, face_b[1]
        normal = rot_b[:, 1] if db[1] > 0.0 else -rot_b[:, 1]

    if axis < 2:  # reference face on A
        front_normal = normal
        ref_pos, ref_rot, ref_h = a.pos, rot_a, ha
        inc = _incident_edge(hb, b.pos, rot_b, front_normal)
        ref_axis = axis
    else:  # reference face on B, normal still points from A to B
        front_normal = -normal
        ref_pos, ref_rot, ref_h = b.pos, rot_b, hb
        inc = _incident_edge(ha, a.pos, rot_a, front_normal)
        ref_axis = axis - 2

    side_normal = ref_rot[:, 1 - ref_axis]
    front = front_normal @ ref_pos + ref_h[ref_axis]
    side = side_normal @ ref_pos
    clipped = _clip_segment(inc, -side_normal, -(side - ref_h[1 - ref_axis]))
    if len(clipped) < 2:
        return []
    clipped = _clip_segment(np.array(clipped), side_normal, side + ref_h[1 - ref_axis])
    contacts = []
    for p in clipped:
        sep = front_normal @ p - front
        if sep <= 0.0:
            contacts.append((p - sep * front_normal, normal, -sep))
    return contacts


def _body_body(a, b):
    ca, cb = isinstance(a.shape, Circle), isinstance(b.shape, Circle)
    if ca and cb:
        return _circle_circle(a, b)
    if ca and not cb:
        return _circle_rect(a, b)
    if not ca and cb:
        # flip so the normal still points from a to b
        return [(p, -n, pen) for (p, n, pen) in _circle_rect(b, a)]
    return _rect_rect(a, b)


def _body_wall(body, arena):
    """Contacts against the four static walls; normal points into the wall."""
    xmin, ymin, xmax, ymax = arena
    walls = [
        (np.array([-1.0, 0.0]), -xmin),  # left:  -x <= -xmin
        (np.array([1.0, 0.0]), xmax),    # right:  x <= xmax
        (np.array([0.0, -1.0]), -ymin),  # floor
        (np.array([0.0, 1.0]), ymax),    # ceiling
    ]
    out = []
    if isinstance(body.shape, Circle):
        r = body.shape.radius
        for n, offset in walls:
            dist = offset - n @ body.pos
            if dist < r:
                out.append((body.pos + n * dist, n, r - dist))
    else:
        for v in rect_vertices(body):
            for n, offset in walls:
                pen = n @ v - offset
                if pen > 0.0:
                    out.append((v, n, pen))
    return out


def detect_contacts(bodies, arena):
    """All body-body and body-wall contacts at the current positions."""
    contacts = []
    for i in range(len(bodies)):
        for j in range(i + 1, len(bodies)):
            for point, normal, pen in _body_body(bodies[i], bodies[j]):
                contacts.append(Contact(i, j, point, normal, pen))
        for point, normal, pen in _body_wall(bodies[i], arena):
            contacts.append(Contact(i, -1, point, normal, pen))
    return contacts


def _cross(r, v):
    return r[0] * v[1] - r[1] * v[0]


def _resolve(bodies, contacts, cfg):
    for _ in range(cfg.solver_iterations):
        for c in contacts:
            a = bodies[c.index_a]
            b = bodies[c.index_b] if c.index_b >= 0 else None
            e = cfg.restitution_objects if b is not None else cfg.restitution_walls
            n = c.normal
            ra = c.point - a.pos
            va = a.vel + np.array([-a.omega * ra[1], a.omega * ra[0]])
            if b is not None:
                rb = c.point - b.pos
                vb = b.vel + np.array([-b.omega * rb[1], b.omega * rb[0]])
                rel = vb - va
                inv_mass = a.inv_mass + b.inv_mass
            else:
                rb = None
                rel = -va
                inv_mass = a.inv_mass
            vn = rel @ n
            if vn >= 0.0:
                continue
            if -vn < cfg.restitution_threshold:
                e = 0.0
            kn = inv_mass + a.inv_inertia * _cross(ra, n) ** 2
            if b is not None:
                kn += b.inv_inertia * _cross(rb, n) ** 2
            jn = -(1.0 + e) * vn / kn
            impulse = jn * n
            a.vel -= impulse * a.inv_mass
            a.omega -= a.inv_inertia * _cross(ra, impulse)
            if b is not None:
                b.vel += impulse * b.inv_mass
                b.omega += b.inv_inertia * _cross(rb, impulse)

            # Coulomb friction: tangential impulse clamped to mu * |jn|
            t = np.array([-n[1], n[0]])
            va = a.vel + np.array([-a.omega * ra[1], a.omega * ra[0]])
            if b is not None:
                vb = b.vel + np.array([-b.omega * rb[1], b.omega * rb[0]])
                rel = vb - va
            else:
                rel = -va
            vt = rel @ t
            kt = inv_mass + a.inv_inertia * _cross(ra, t) ** 2
            if b is not None:
                kt += b.inv_inertia * _cross(rb, t) ** 2
            jt = -vt / kt
            limit = cfg.friction * jn
            jt = min(max(jt, -limit), limit)
            f_impulse = jt * t
            a.vel -= f_impulse * a.inv_mass
            a.omega -= a.inv_inertia * _cross(ra, f_impulse)
            if b is not None:
                b.vel += f_impulse * b.inv_mass
                b.omega += b.inv_inertia * _cross(rb, f_impulse)


def _correct_positions(bodies, contacts, cfg):
    for c in contacts:
        depth = c.penetration - cfg.slop
        if depth <= 0.0:
            continue
        a = bodies[c.index_a]
        b = bodies[c.index_b] if c.index_b >= 0 else None
        inv_mass = a.inv_mass + (b.inv_mass if b is not None else 0.0)
        push = cfg.baumgarte * depth / inv_mass * c.normal
        a.pos -= push * a.inv_mass
        if b is not None:
            b.pos += push * b.inv_mass


def _check_finite(bodies):
    for k, body in enumerate(bodies):
        if not (np.all(np.isfinite(body.pos)) and np.all(np.isfinite(body.vel))
                and math.isfinite(body.angle) and math.isfinite(body.omega)):
            raise SimulationDiverged(f"body {k} reached a non-finite state")


def step(world):
    """Advance one frame (cfg.substeps substeps); returns (world', contacts).

    The returned contact list is the union over substeps and feeds frame
    labeling. The input world is not mutated.
    """
    cfg = world.config
    new = world.copy()
    bodies = new.bodies
    _check_finite(bodies)
    seen = []
    for _ in range(cfg.substeps):
        for body in bodies:
            body.vel[1] -= cfg.gravity * cfg.dt
            body.vel *= cfg.linear_damping
            body.omega *= cfg.angular_damping
        contacts = detect_contacts(bodies, cfg.arena)
        _resolve(bodies, contacts, cfg)
        for body in bodies:
            body.pos += body.vel * cfg.dt
            body.angle += body.omega * cfg.dt
        _correct_positions(bodies, contacts, cfg)
        seen.extend(contacts)
    _check_finite(bodies)
    return new, seen


LABEL_WALL = 1  # bit0
LABEL_OBJECT = 2  # bit1


def classify_frame(contacts):
    """Bit flags for the frame: bit0 object-wall, bit1 object-object.

    A frame may carry both; zero means free motion.
    """
    label = 0
    for c in contacts:
        if c.index_b < 0:
            label |= LABEL_WALL
        else:
            label |= LABEL_OBJECT
    return label


def state_array(world):
    """(K, 6) array of (x, y, vx, vy, angle, omega) in body order."""
    out = np.empty((len(world.bodies), 6))
    for i, b in enumerate(world.bodies):
        out[i] = (b.pos[0], b.pos[1], b.vel[0], b.vel[1], b.angle, b.omega)
    return out


def world_from_states(states, shapes, config):
    bodies = [
        Body(shape, s[0:2].copy(), s[2:4].copy(), float(s[4]), float(s[5]))
        for shape, s in zip(shapes, states)
    ]
    return World(bodies, config)


@dataclass
class Episode:
    states: np.ndarray  # (T, K, 6)
    labels: np.ndarray  # (T,) uint8 bit flags
    shapes: list


def _wrap_angle(a):
    return math.atan2(math.sin(a), math.cos(a))


def sample_initial_world(rng, shapes, config, max_attempts=1000):
    """Uniform random initial states with overlap rejection.

    Positions keep one shape-extent margin to the walls; velocity
    components are uniform in [-1, 1], angles uniform in (-pi, pi],
    angular velocities uniform in [-1, 1].
    """
    xmin, ymin, xmax, ymax = config.arena
    bodies = []
    attempts = 0
    for shape in shapes:
        m = shape.extent
        while True:
            attempts += 1
            if attempts > max_attempts:
                raise RuntimeError(
                    "could not place bodies without overlap; "
                    "use fewer or smaller bodies"
                )
            pos = np.array([
                rng.uniform(xmin + m, xmax - m),
                rng.uniform(ymin + m, ymax - m),
            ])
            candidate = Body(
                shape,
                pos,
                rng.uniform(-1.0, 1.0, size=2),
                _wrap_angle(rng.uniform(-math.pi, math.pi)),
                rng.uniform(-1.0, 1.0),
            )
            if all(not _body_body(candidate, other) for other in bodies):
                bodies.append(candidate)
                break
    return World(bodies, config)


def sample_episode(rng, shapes, config, frames=128, max_attempts=1000):
    """Simulate one episode of the given length; frame 0 is the sampled
    initial state (label free), later frames are labeled from the contacts
    of the step that produced them."""
    world = sample_initial_world(rng, shapes, config, max_attempts)
    k = len(shapes)
    states = np.empty((frames, k, 6))
    labels = np.zeros(frames, dtype=np.uint8)
    states[0] = state_array(world) if k else np.empty((0, 6))
    for t in range(1, frames):
        world, contacts = step(world)
        states[t] = state_array(world)
        labels[t] = classify_frame(contacts)
    return Episode(states, labels, list(shapes))
