"""Acceptance criteria, one test per criterion.

Each test records a ``PASS``/``FAIL`` line in ``RESULTS``; ``conftest.py``
prints them after the run. Criteria 5-8 need the public WN18RR and FB15K237
releases under ``$SPHEREKG_DATA`` (or ``$SPHEREKG_WN18RR`` /
``$SPHEREKG_FB15K237``) and fail when the data is missing.
"""

import math
import os
import time

import numpy as np
import pytest

import gradcheck
import oracles
from spherekg import checkpoint
from spherekg.cli import main
from spherekg.expressiveness import EXPECTED_2D_FAILURES, PATTERNS, expressiveness_suite
from spherekg.kg import load_dataset, occurrence_counts
from spherekg.model import BACKWARD, FORWARD, ModelConfig, SphereModel
from spherekg.retrieval import DEFAULT_LS, evaluate, radius_occurrence
from spherekg.rotations import Angle2D, HouseholderKD, Quat3D, apply, apply_inverse, to_matrix
from spherekg.training import fit

RESULTS = {}

DATA_DIRS = {
    "WN18RR": ("SPHEREKG_WN18RR", ("WN18RR", "wn18rr", "WN18RR/text")),
    "FB15K237": ("SPHEREKG_FB15K237", ("FB15K237", "FB15k-237", "fb15k-237", "fb15k237", "FB15k-237/text")),
}

# desk-scale recipe: one SpherE-2D model per query direction
DESK = dict(k=2, n_blocks=100, gamma=0.25, p_norm=2, adv_temperature=1.0, learning_rate=0.01, neg_count=32,
            batch_size=512, steps=7000, seed=0, log_every=500)
HEAD_SLACK = dict(alpha=0.1, beta=0.0)
TAIL_SLACK = dict(alpha=0.0, beta=0.1)


def record(n, ok, detail):
    RESULTS[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'} | {detail}"
    print(RESULTS[n])
    return ok


def find_dataset(name):
    env, subdirs = DATA_DIRS[name]
    if os.environ.get(env):
        return os.environ[env]
    root = os.environ.get("SPHEREKG_DATA")
    if not root:
        return None
    for sub in subdirs:
        path = os.path.join(root, sub)
        if any(os.path.exists(os.path.join(path, f"train.{ext}")) for ext in ("txt", "tsv")):
            return path
    return None


def missing(n, name):
    env, _ = DATA_DIRS[name]
    record(n, False, f"{name} not found (set SPHEREKG_DATA or {env})")
    pytest.fail(f"{name} release not available")


def test_criterion_1_gradients():
    worst, count, seconds = gradcheck.run(n_models=100)
    ok = worst < 1e-5 and seconds < 60 and count > 0
    record(1, ok, f"100 models, {count} partials, worst rel err {worst:.2e} (< 1e-5), {seconds:.1f}s (< 60s)")
    assert ok


def test_criterion_2_direction_equivalence():
    draws, worst, disagree = 0, 0.0, 0
    for i in range(1000):
        rng = np.random.default_rng(10_000 + i)
        k = (2, 3, 4, 5, 8)[i % 5]
        m = SphereModel.initialize(ModelConfig(k=k, n_blocks=2, p_norm=2), 8, 2, rng)
        m.centers = rng.normal(size=m.centers.shape) * rng.uniform(0.1, 5)
        m.radii = rng.uniform(-0.5, 2.0, 8)
        if k != 2:
            m.rel_params = rng.normal(size=m.rel_params.shape)
            m.renormalize()
        h, r, t = rng.integers(0, 8, 10), rng.integers(0, 2, 10), rng.integers(0, 8, 10)
        fwd = m.center_distances(h, r, t, FORWARD)
        bwd = m.center_distances(h, r, t, BACKWARD)
        worst = max(worst, float(np.max(np.abs(fwd - bwd))))
        reach = m.radii[h] + m.radii[t]
        disagree += int(np.sum((fwd <= reach) != (bwd <= reach)))
        for j in range(10):
            disagree += m.is_retrieved(h[j], r[j], t[j], FORWARD) != m.is_retrieved(h[j], r[j], t[j], BACKWARD)
        draws += 10
    ok = draws >= 10_000 and worst < 1e-9 and disagree == 0
    record(2, ok, f"{draws} draws, max |fwd-bwd| {worst:.1e} (< 1e-9), {disagree} retrieval disagreements")
    assert ok


def test_criterion_3_rotation_oracles():
    rng = np.random.default_rng(3)
    err_apply = err_inv = err_round = err_det = 0.0
    n = 0
    for k in (2, 3, 4, 5, 6, 8, 10):
        for _ in range(200):
            if k == 2:
                p = Angle2D(rng.uniform(-2 * math.pi, 2 * math.pi))
                M = oracles.angle_matrix(p.theta)
            elif k == 3:
                p = Quat3D(tuple(rng.normal(size=4)))
                M = oracles.quat_matrix(np.array(p.q))
            else:
                p = HouseholderKD(tuple(map(tuple, rng.normal(size=(2, k)))))
                M = oracles.householder_matrix(p.normals)
            v = rng.normal(size=k) * rng.uniform(0.1, 10)
            err_apply = max(err_apply, np.max(np.abs(apply(p, v) - M @ v)))
            err_inv = max(err_inv, np.max(np.abs(apply_inverse(p, v) - M.T @ v)))
            err_round = max(err_round, np.max(np.abs(apply_inverse(p, apply(p, v)) - v)))
            err_det = max(err_det, abs(np.linalg.det(to_matrix(p)) - 1.0))
            n += 1
    ok = max(err_apply, err_inv, err_round) < 1e-9 and err_det < 1e-6
    record(3, ok, f"{n} rotations: apply {err_apply:.1e}, inverse {err_inv:.1e}, round trip {err_round:.1e} "
                  f"(< 1e-9), |det-1| {err_det:.1e} (< 1e-6)")
    assert ok


def test_criterion_4_expressiveness():
    start = time.perf_counter()
    failed, notes = [], []
    for k in (3, 2):
        for pattern in PATTERNS:
            res = expressiveness_suite(k, pattern, max_steps=5000)
            print(f"  k={k} {pattern:15s} passed={res.passed} f1={res.f1:.3f} "
                  f"forbidden={res.forbidden_retrieved} steps={res.steps}")
            if k == 2 and pattern in EXPECTED_2D_FAILURES:
                notes.append(f"2D {pattern} {'pass' if res.passed else 'fail'} (recorded)")
            elif not res.passed:
                failed.append(f"{k}D {pattern}")
    seconds = time.perf_counter() - start
    ok = not failed and seconds < 300
    record(4, ok, f"failed: {failed or 'none'}; {'; '.join(notes)}; {seconds:.0f}s (< 300s)")
    assert ok


@pytest.fixture(scope="module")
def wn18rr_run(tmp_path_factory):
    path = find_dataset("WN18RR")
    if path is None:
        return None
    kg = load_dataset(path)
    models = {}
    start = time.perf_counter()
    for name, slack in (("head", HEAD_SLACK), ("tail", TAIL_SLACK)):
        cfg = ModelConfig(**DESK, **slack).validate()
        rng = np.random.default_rng(cfg.seed)
        model = SphereModel.initialize(cfg, kg.n_entities, kg.n_relations, rng)
        fit(model, kg, cfg, rng)
        models[name] = model
        out = tmp_path_factory.mktemp("desk") / f"wn18rr_{name}.ckpt"
        checkpoint.save(str(out), model, kg.vocab.digest())
    modes = [None, *DEFAULT_LS]
    reports = evaluate(models["tail"], kg, modes, head_model=models["head"])
    return dict(kg=kg, models=models, reports=reports, seconds=time.perf_counter() - start)


def test_criterion_5_head_f1_ordering(wn18rr_run):
    if wn18rr_run is None:
        missing(5, "WN18RR")
    sphere, *tops = wn18rr_run["reports"]
    best = max(tops, key=lambda r: r.head_f1)
    seconds = wn18rr_run["seconds"]
    ok = all(sphere.head_f1 > r.head_f1 for r in tops) and seconds < 3600
    record(5, ok, f"sphere head F1 {sphere.head_f1:.3f} vs best {best.mode} {best.head_f1:.3f}; "
                  f"training+eval {seconds / 60:.0f} min (< 60)")
    assert ok


def test_criterion_6_nn_f1(wn18rr_run):
    if wn18rr_run is None:
        missing(6, "WN18RR")
    sphere, *tops = wn18rr_run["reports"]
    best = max(tops, key=lambda r: r.nn_f1)
    ok = sphere.nn_queries > 0 and sphere.nn_f1 > best.nn_f1
    record(6, ok, f"sphere n-to-n F1 {sphere.nn_f1:.3f} vs best {best.mode} {best.nn_f1:.3f} "
                  f"over {sphere.nn_queries} queries")
    assert ok


def test_criterion_7_radius_occurrence(wn18rr_run):
    if wn18rr_run is None:
        missing(7, "WN18RR")
    kg, model = wn18rr_run["kg"], wn18rr_run["models"]["head"]
    stats = radius_occurrence(model, kg)
    counts = np.asarray(occurrence_counts(kg))
    seen = counts > 0
    singleton = float(model.radii[counts == 1].mean()) if np.any(counts == 1) else float("nan")
    overall = float(model.radii[seen].mean())
    ok = stats.spearman > 0.5 and singleton < overall
    record(7, ok, f"spearman {stats.spearman:.3f} (> 0.5); singleton mean radius {singleton:.4f} "
                  f"vs overall {overall:.4f}")
    assert ok


def test_criterion_8_fb15k237_counts():
    path = find_dataset("FB15K237")
    wn = find_dataset("WN18RR")
    if wn is not None:
        kg = load_dataset(wn)
        print(f"  WN18RR: |E|={kg.n_entities} |R|={kg.n_relations} train={len(kg.train)} "
              f"valid={len(kg.valid)} test={len(kg.test)}")
    if path is None:
        missing(8, "FB15K237")
    kg = load_dataset(path)
    got = (kg.n_entities, kg.n_relations, len(kg.train))
    ok = got == (14_541, 237, 272_115)
    record(8, ok, f"|E|={got[0]} |R|={got[1]} |train|={got[2]} (expected 14541 / 237 / 272115); "
                  f"valid={len(kg.valid)} test={len(kg.test)}")
    assert ok


def test_criterion_9_determinism(toy_dir, tmp_path, capsys):
    fast = ["--set", "steps=50", "--set", "n_blocks=8", "--set", "batch_size=4", "--set", "neg_count=4"]
    outs = []
    for run in ("a", "b"):
        ckpt = tmp_path / f"{run}.ckpt"
        assert main(["train", "--data", str(toy_dir), "--out", str(ckpt), "--seed", "11", *fast]) == 0
        metrics = tmp_path / f"{run}.csv"
        assert main(["eval", str(ckpt), "--data", str(toy_dir), "--out", str(metrics)]) == 0
        outs.append((ckpt.read_bytes(), metrics.read_bytes()))
    (ca, ma), (cb, mb) = outs
    ok = ca == cb and ma == mb and len(ma) > 0
    record(9, ok, f"checkpoints identical: {ca == cb} ({len(ca)} bytes); eval output identical: {ma == mb}")
    assert ok
