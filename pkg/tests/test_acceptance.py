"""End-to-end acceptance checks. Each test prints one pass/fail line."""

import math
import os
import time

import numpy as np
import pytest

from conftest import check_grad, check_param_grad
from pgadyn import dataset as D
from pgadyn import ga
from pgadyn import layers as L
from pgadyn import metrics as MT
from pgadyn import model as M
from pgadyn import physics as P
from pgadyn import tensor as T
from pgadyn import training as TR
from pgadyn.attention import MultiHeadGAAttention, build_block_causal_mask

TREND_BUDGET_S = float(os.environ.get("PGADYN_TREND_BUDGET_S", "300"))


def report(capfd, name, ok, detail=""):
    with capfd.disabled():
        tag = "PASS" if ok else "FAIL"
        suffix = f" ({detail})" if detail else ""
        print(f"[{tag}] {name}{suffix}")
    assert ok, f"{name}{': ' + detail if detail else ''}"


def random_mv(rng):
    return ga.Multivector(rng.normal(size=8))


def test_algebra_suite(capfd):
    t0 = time.monotonic()
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(1000):
        a, b, c = (random_mv(rng) for _ in range(3))
        lhs = ga.geometric_product(a, ga.geometric_product(b, c))
        rhs = ga.geometric_product(ga.geometric_product(a, b), c)
        worst = max(worst, np.max(np.abs(lhs.coeffs - rhs.coeffs)))
    assoc_ok = worst < 1e-12

    anti_ok = True
    for i in (1, 2, 3):
        for j in (1, 2, 3):
            if i != j:
                ij = ga.geometric_product(ga.Multivector.blade(i), ga.Multivector.blade(j))
                ji = ga.geometric_product(ga.Multivector.blade(j), ga.Multivector.blade(i))
                anti_ok &= np.allclose(ij.coeffs, -ji.coeffs, atol=1e-15)

    invol_worst = 0.0
    for _ in range(1000):
        x = random_mv(rng)
        gg = ga.grade_involution(ga.grade_involution(x))
        rr = ga.reverse(ga.reverse(x))
        com = ga.reverse(ga.grade_involution(x)).coeffs - ga.grade_involution(ga.reverse(x)).coeffs
        invol_worst = max(
            invol_worst,
            np.max(np.abs(gg.coeffs - x.coeffs)),
            np.max(np.abs(rr.coeffs - x.coeffs)),
            np.max(np.abs(com)),
        )
    invol_ok = invol_worst < 1e-15

    comp_worst = 0.0
    inner_worst = 0.0
    for _ in range(1000):
        a, b = rng.uniform(-np.pi, np.pi, size=2)
        x = random_mv(rng)
        y = random_mv(rng)
        two = ga.twisted_adjoint(ga.rotor_from_angle(a), ga.twisted_adjoint(ga.rotor_from_angle(b), x))
        one = ga.twisted_adjoint(ga.rotor_from_angle(a + b), x)
        comp_worst = max(comp_worst, np.max(np.abs(two.coeffs - one.coeffs)))
        r = ga.rotor_from_angle(a)
        inner_worst = max(
            inner_worst,
            abs(
                ga.pga_inner(ga.twisted_adjoint(r, x), ga.twisted_adjoint(r, y))
                - ga.pga_inner(x, y)
            ),
        )
    comp_ok = comp_worst < 1e-10
    inner_ok = inner_worst < 1e-10
    elapsed = time.monotonic() - t0
    ok = assoc_ok and anti_ok and invol_ok and comp_ok and inner_ok and elapsed < 10.0
    report(capfd, "algebra suite", ok, f"worst assoc {worst:.1e}, {elapsed:.1f}s")


def test_rotation_exactness(capfd):
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(100):
        theta = rng.uniform(-np.pi, np.pi)
        x, y = rng.normal(size=2)
        v = ga.Multivector.zero()
        v.coeffs[1], v.coeffs[2] = x, y
        out = ga.twisted_adjoint(ga.rotor_from_angle(theta), v)
        c, s = math.cos(theta), math.sin(theta)
        want = np.zeros(8)
        want[1], want[2] = c * x - s * y, s * x + c * y
        worst = max(worst, np.max(np.abs(out.coeffs - want)))
    report(capfd, "rotation exactness", worst < 1e-12, f"worst {worst:.1e}")


def test_equivariance_dichotomy(capfd):
    rng = np.random.default_rng(2)
    store = T.ParamStore()
    e_lin = L.CliffordLinear(store, "lin", 4, 4, "e", rng)
    e_att = MultiHeadGAAttention(store, "att", 4, 2, "e", rng)
    mask = build_block_causal_mask(2, 2)
    e_worst = 0.0
    for _ in range(100):
        g = ga.random_versor(rng)
        x = rng.normal(size=(4, 4, 8))
        e_worst = max(e_worst, L.equivariance_gap(e_lin, g, x))
        lhs = e_att(T.tensor(L.apply_versor(g, x)), mask).data
        rhs = L.apply_versor(g, e_att(T.tensor(x), mask).data)
        e_worst = max(e_worst, float(np.max(np.abs(lhs - rhs))))
    e_ok = e_worst < 1e-6

    witnesses = {}
    for mode in ("s", "s-ad"):
        store2 = T.ParamStore()
        lin = L.CliffordLinear(store2, "lin", 4, 4, mode, rng)
        if mode == "s-ad":
            lin.w.data += rng.normal(0.0, 0.4, size=lin.w.data.shape)
        witnesses[mode] = L.max_equivariance_violation(lin, rng, trials=50)
    s_ok = all(w > 1e-3 for w in witnesses.values())
    report(
        capfd, "equivariance dichotomy", e_ok and s_ok,
        f"e gap {e_worst:.1e}, witnesses s {witnesses['s']:.1e} "
        f"s-ad {witnesses['s-ad']:.1e}",
    )


def test_gradient_suite(capfd):
    t0 = time.monotonic()
    rng = np.random.default_rng(3)

    ok = True
    x = rng.normal(size=(3, 4))
    y = rng.normal(size=(3, 4))
    for fn in (
        lambda v: T.tsum(T.mul(v, v)),
        lambda v: T.tsum(T.add(v, y)),
        lambda v: T.tsum(T.relu(v)),
        lambda v: T.tsum(T.mul(T.sigmoid(v), T.sigmoid(v))),
        lambda v: T.tsum(T.mul(T.scale(v, 1.7), y)),
        lambda v: T.tsum(T.einsum("ij,kj->ik", v, T.tensor(y))),
        lambda v: T.tsum(T.mul(T.reshape(v, (4, 3)), T.reshape(v, (4, 3)))),
        lambda v: T.tsum(T.mul(T.transpose(v, (1, 0)), T.transpose(v, (1, 0)))),
        lambda v: T.tsum(T.mul(v[1:], v[1:])),
        lambda v: T.tmean(T.mul(v, v)),
        lambda v: T.l2_loss(v, y),
        lambda v: T.tsum(T.mul(T.concat([v, v], axis=0), T.concat([v, v], axis=0))),
    ):
        try:
            check_grad(fn, x)
        except AssertionError:
            ok = False
    mask = np.tril(np.ones((4, 4), dtype=bool))
    scores = rng.normal(size=(2, 4, 4))
    probe = rng.normal(size=(2, 4, 4))
    try:
        check_grad(lambda v: T.tsum(T.mul(T.softmax_masked(v, mask), probe)), scores)
    except AssertionError:
        ok = False

    # every variant's teacher-forced loss
    w = rng.normal(size=(2, 3, 2, 6)) * 0.5
    for variant in M.VARIANTS:
        m = M.build_variant(
            M.ModelConfig(variant=variant, objects=2, blocks=1, heads=2, mv_channels=4)
        )
        names = sorted(m.store.params)
        for name in (names[0], names[-1]):
            try:
                check_param_grad(lambda: M.teacher_forcing_loss(m, w), m.store.params[name])
            except AssertionError:
                ok = False
    elapsed = time.monotonic() - t0
    report(capfd, "gradient suite", ok and elapsed < 60.0, f"{elapsed:.1f}s")


def test_block_causality(capfd):
    rng = np.random.default_rng(4)
    base = rng.normal(size=(1, 4, 3, 6))
    pert = base.copy()
    pert[:, 2:] += rng.normal(size=(1, 2, 3, 6))
    ok = True
    for variant in M.VARIANTS:
        m = M.build_variant(M.ModelConfig(variant=variant, objects=3, seq_len=4))
        a = m.forward(base).data
        b = m.forward(pert).data
        if not np.array_equal(a[:, :2], b[:, :2]):
            ok = False
    report(capfd, "block causality", ok, "S=4 K=3, exact zero, all variants")


def test_simulator_physics(capfd):
    free = P.WorldConfig(gravity=0.0, linear_damping=1.0, angular_damping=1.0,
                         friction=0.0)
    rng = np.random.default_rng(5)
    cons_ok = True
    for _ in range(5):
        a = P.Body(P.Circle(0.3), [1.4, 2.0], rng.uniform(-1, 1, 2) + [0.8, 0.0])
        b = P.Body(P.Circle(0.2), [2.4, 2.1], rng.uniform(-1, 1, 2) - [0.8, 0.0])
        world = P.World([a, b], free)
        p0 = sum((x.mass * x.vel for x in world.bodies), np.zeros(2))
        e0 = sum(0.5 * x.mass * (x.vel @ x.vel) + 0.5 * x.inertia * x.omega**2
                 for x in world.bodies)
        for _ in range(40):
            world, _ = P.step(world)
        p1 = sum((x.mass * x.vel for x in world.bodies), np.zeros(2))
        e1 = sum(0.5 * x.mass * (x.vel @ x.vel) + 0.5 * x.inertia * x.omega**2
                 for x in world.bodies)
        cons_ok &= bool(np.all(np.abs(p1 - p0) <= 1e-6 * max(1.0, np.max(np.abs(p0)))))
        cons_ok &= abs(e1 - e0) <= 1e-3 * e0

    world = P.World([P.Body(P.Circle(0.25), [2.0, 1.5], [0.0, -2.0])],
                    P.WorldConfig(gravity=0.0, linear_damping=1.0, angular_damping=1.0))
    for _ in range(120):
        world, _ = P.step(world)
    ratio = world.bodies[0].vel[1] / 2.0
    rebound_ok = abs(ratio - 0.9) <= 0.02 * 0.9

    shapes = [P.Circle(0.25)] * 4
    cfg = P.WorldConfig()
    ep = P.sample_episode(np.random.default_rng(6), shapes, cfg, frames=128)
    xmin, ymin, xmax, ymax = cfg.arena
    r = 0.25
    contain_ok = bool(
        np.all(ep.states[:, :, 0] - r >= xmin - 1e-3)
        and np.all(ep.states[:, :, 0] + r <= xmax + 1e-3)
        and np.all(ep.states[:, :, 1] - r >= ymin - 1e-3)
        and np.all(ep.states[:, :, 1] + r <= ymax + 1e-3)
    )
    ep2 = P.sample_episode(np.random.default_rng(6), shapes, cfg, frames=128)
    det_ok = np.array_equal(ep.states, ep2.states)
    ok = cons_ok and rebound_ok and contain_ok and det_ok
    report(capfd, "simulator physics", ok, f"rebound ratio {ratio:.4f}")


def test_metric_self_consistency(capfd):
    shapes = [P.Circle(0.25)] * 2
    cfg = P.WorldConfig()
    ep = P.sample_episode(np.random.default_rng(7), shapes, cfg, frames=16)
    euler = MT.euler_rmse(ep.states, shapes, cfg, 14)
    euler_ok = euler <= 1e-9

    rng = np.random.default_rng(8)
    preds = rng.normal(size=(12, 2, 6))
    targets = rng.normal(size=(12, 2, 6))
    labels = rng.integers(0, 4, size=12).astype(np.uint8)
    sq = MT.frame_sq_errors(preds, targets)
    out = MT.rmse_by_frame_type(preds, targets, labels)
    mass = 0.0
    for kind, mask in (
        ("free", labels == 0),
        ("object_wall", (labels & P.LABEL_WALL) != 0),
        ("object_object", (labels & P.LABEL_OBJECT) != 0),
    ):
        if out[kind] is not None:
            mass += out[kind] ** 2 * int(np.count_nonzero(mask)) * 2 * 7
    both = labels == (P.LABEL_WALL | P.LABEL_OBJECT)
    recombine_ok = abs(mass - (np.sum(sq) + np.sum(sq[both]))) <= 1e-10

    t3 = np.zeros((3, 1, 6))
    p3 = np.zeros((3, 1, 6))
    p3[1, 0, 0] = 0.2
    hand = MT.rollout_rmse(p3, t3, 2)
    hand_ok = hand == math.sqrt(0.04 / (2 * 7))
    ok = euler_ok and recombine_ok and hand_ok
    report(capfd, "metric self-consistency", ok, f"euler {euler:.1e}")


def test_overfit_sanity(capfd):
    t0 = time.monotonic()
    shapes = [P.Circle(0.25)] * 2
    ep = P.sample_episode(np.random.default_rng(9), shapes, P.WorldConfig(), frames=128)
    m = M.build_variant(
        M.ModelConfig(variant="s", objects=2, blocks=2, heads=4, mv_channels=8, seq_len=2)
    )
    history = TR.train(
        m, [ep],
        TR.TrainConfig(epochs=500, lr=3e-3, final_lr=1e-4, batch=8, seed=9),
    )
    loss = history[-1]["loss"]
    elapsed = time.monotonic() - t0
    report(
        capfd, "overfit sanity", loss < 1e-3 and elapsed < 600.0,
        f"loss {loss:.2e} in {elapsed:.0f}s",
    )


def test_trend_check(capfd):
    shapes = [P.Circle(0.25)] * 4
    cfg = P.WorldConfig()
    episodes = [
        P.sample_episode(np.random.default_rng(1000 + i), shapes, cfg, frames=128)
        for i in range(100)
    ]
    train_eps, val_eps = D.split(episodes, 0.1, seed=0)

    def run(variant, seed):
        m = M.build_variant(
            M.ModelConfig(variant=variant, objects=4, blocks=2, heads=4,
                          mv_channels=8, seq_len=2, seed=seed)
        )
        TR.train(
            m, train_eps,
            TR.TrainConfig(epochs=10**6, batch=32, seed=seed,
                           time_budget_s=TREND_BUDGET_S),
        )
        rows = MT.evaluate_rollouts(m, val_eps, cfg, horizon=10, per_type=True)
        return {r["frame_type"]: r["rmse"] for r in rows}

    wins = 0
    details = []
    for seed in (0, 1, 2):
        s_wall = run("s", seed)["object_wall"]
        b_wall = run("transformer", seed)["object_wall"]
        wins += s_wall <= b_wall
        details.append(f"seed {seed}: s {s_wall:.4f} vs tf {b_wall:.4f}")
    report(capfd, "trend check", wins >= 2, f"{wins}/3 seeds; " + "; ".join(details))


def test_parameter_matching(capfd):
    ok = True
    details = []
    for objects in (2, 4):
        cfg = M.ModelConfig(variant="s", objects=objects)
        target = M.clifford_param_count(cfg)
        m = M.build_variant(M.ModelConfig(variant="transformer", objects=objects))
        err = abs(m.store.count() - target) / target
        details.append(f"K={objects}: {err:.2%}")
        ok &= err <= 0.02
    report(capfd, "parameter matching", ok, ", ".join(details))
