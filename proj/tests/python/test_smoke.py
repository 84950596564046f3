"""Smoke tests for the _gagrasp extension module."""

import math

import pytest

import _gagrasp as ga


def test_blade_products():
    e1 = ga.Multivector.blade(2)
    e2 = ga.Multivector.blade(3)
    e12 = ga.geometric_product(e1, e2)
    assert e12.coeffs()[8] == 1.0  # e12 slot
    e0 = ga.Multivector.blade(1)
    zero = ga.geometric_product(e0, e0)
    assert all(c == 0.0 for c in zero.coeffs())


def test_rotor_moves_point():
    u = ga.Versor.rotor([0.0, 0.0, 1.0], math.pi / 2)
    p = ga.extract_point(u(ga.embed_point([1.0, 0.0, 0.0])))
    assert abs(p[0]) < 1e-12 and abs(p[1] - 1.0) < 1e-12


def test_motor_matches_matrix():
    r6d = ga.rot6d_encode([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    u = ga.motor_from_pose(r6d, [0.1, 0.2, 0.3])
    p = ga.extract_point(u(ga.embed_point([1.0, 0.0, 0.0])))
    assert abs(p[0] - 0.1) < 1e-9
    assert abs(p[1] - 1.2) < 1e-9
    assert abs(p[2] - 0.3) < 1e-9


def test_versor_rejects_nonunit():
    with pytest.raises(Exception):
        ga.Versor(ga.Multivector.scalar(2.0))


def test_hand_and_losses():
    hand = ga.toy_hand(2, 2)
    assert hand.joint_count() == 4
    lo, hi = hand.joint_lower(), hand.joint_upper()
    mid = [(a + b) / 2 for a, b in zip(lo, hi)]
    assert ga.range_loss(mid, lo, hi) == 0.0
    assert ga.limit_loss(mid, lo, hi) == 0.0
    assert ga.limit_loss([2.0, 0.0, 0.0, 0.0], lo, hi) > 0.0

    g = ga.Grasp()
    g.q = [0.0] * 4
    spheres = ga.forward_kinematics(hand, g)
    assert len(spheres) == hand.sphere_count()


def test_success_eval_free_object_fails():
    import random

    rng = random.Random(5)
    pts = []
    for _ in range(24):
        v = [rng.gauss(0, 1) for _ in range(3)]
        n = math.sqrt(sum(x * x for x in v))
        pts.append([0.01 * x / n for x in v])
    ctx = ga.PhysContext()
    ctx.hand = ga.toy_hand(2, 2)
    ctx.obj_points = pts
    g = ga.Grasp()
    g.p = [0.0, 0.0, -0.5]
    g.q = [0.0] * 4
    ok, disp = ga.success_eval(g, pts, ctx.hand, ctx)
    assert not ok
    assert all(d > 0.02 for d in disp)


def test_sampler_is_seed_deterministic():
    cfg = ga.EquiNetConfig()
    cfg.blocks = 1
    cfg.channels = 4
    cfg.heads = 2
    cfg.downsample_m = 6
    cfg.downsample_k = 3
    cfg.joint_dim = 4
    model = ga.Denoiser(cfg, 3)
    sched = ga.DiffusionSchedule.linear(10)
    cloud = [[0.01, 0.0, 0.0], [0.0, 0.01, 0.0], [0.0, 0.0, 0.01], [-0.01, 0.0, 0.0]]
    a = ga.sample(sched, model, cloud, 9)
    b = ga.sample(sched, model, cloud, 9)
    c = ga.sample(sched, model, cloud, 10)
    assert a.flat() == b.flat()
    assert a.flat() != c.flat()
    assert len(a.q) == 4


def test_config_round_trip():
    cfg = ga.RunConfig()
    cfg.seed = 11
    back = ga.RunConfig.from_text(cfg.to_text())
    assert back.seed == 11
    with pytest.raises(Exception):
        ga.RunConfig.from_text("bogus_key = 1\n")
