"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

The summary lines are collected in ``RESULTS`` and printed at the end of the
session by the hook in ``conftest.py``.
"""
import functools
import math
import time

import numpy as np
import pytest
from threadpoolctl import threadpool_limits

from tacnet.checkpoint import load_checkpoint, save_checkpoint
from tacnet.config import TOY_GRADCHECK, TOY_SWAP, TacConfig
from tacnet.harness import SyntheticPairSpec, ToyTrainConfig, eval_swap, gen_pairs, train_toy
from tacnet.harness.heatmap import decode_pgm, emit_heatmap
from tacnet.harness.training import probe_init
from tacnet.metrics import extract_entities, temporal_f1
from tacnet.nn.ops import conv1x1_channels
from tacnet.tac import tac_forward, tac_init, tfm_params
from tacnet.tfm import prefix_scale, tfm_block
from tacnet.verify import tac_gradcheck

from test_tfm import closed_form_single_token, controlled_pair

RESULTS: list[str] = []

SWAP_EPOCHS = 20


def criterion(number, title):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                detail = fn(*args, **kwargs)
            except BaseException as e:
                RESULTS.append(f"FAIL  [{number:>2}] {title}: {type(e).__name__}: {str(e).splitlines()[0] if str(e) else ''}")
                raise
            RESULTS.append(f"PASS  [{number:>2}] {title}" + (f": {detail}" if detail else ""))
            print(RESULTS[-1])
        return wrapper
    return deco


@criterion(1, "gradient check on the toy config")
def test_c01_gradient_soundness():
    assert TOY_GRADCHECK == TacConfig(layers=12, grid=3, enc_dim=8, llm_dim=16, heads=2, depth=1, seed=7)
    with threadpool_limits(1):
        t = time.perf_counter()
        reports = [tac_gradcheck(TOY_GRADCHECK, h=1e-5, tol=1e-4, bias_scale=b) for b in (0.0, 0.5)]
        elapsed = time.perf_counter() - t
    for rep in reports:
        assert "tfm.prefix.b_prior" in rep.per_param
        assert rep.passed, "\n".join(rep.lines())
    assert elapsed < 60, f"{elapsed:.1f}s"
    worst = max(r.max_error for r in reports)
    return f"{len(reports[0].per_param)} params, worst rel err {worst:.2e}, {elapsed:.1f}s"


@criterion(2, "default-scale shape contract")
def test_c02_default_scale_shape():
    cfg = TacConfig()
    rng = np.random.default_rng(0)
    curr = rng.standard_normal((12, 1369, 768))
    prior = curr + 0.1 * rng.standard_normal(curr.shape)
    params = tac_init(cfg)
    with threadpool_limits(1):
        t = time.perf_counter()
        z = tac_forward(curr, prior, params, cfg)
        elapsed = time.perf_counter() - t
    assert z.shape == (1369, 4096)
    assert np.all(np.isfinite(z))
    assert elapsed < 30, f"{elapsed:.1f}s"
    return f"Z {z.shape}, forward {elapsed:.1f}s single-thread"


@criterion(3, "prefix-scale closed forms")
def test_c03_prefix_closed_forms():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((1369, 16))
    assert abs(prefix_scale(x, x.copy(), 4096) - 1.0) < 1e-12
    a, b = np.zeros((4, 4)), np.zeros((4, 4))
    a[0, 1], b[2, 3] = 0.8, 3.0
    assert abs(prefix_scale(a, b, 4096) - 1 / 256) < 1e-12
    assert abs(prefix_scale(x, -x, 4096)) < 1e-12
    scales = [prefix_scale(*controlled_pair(c), 4096) for c in np.linspace(-1, 1, 101)]
    assert all(s1 >= s0 for s0, s1 in zip(scales, scales[1:]))
    assert scales[0] < 1e-12 and abs(scales[-1] - 1) < 1e-12


@criterion(4, "temporal entity F1 worked example")
def test_c04_f1_worked_example():
    gt = "Compare with prior scan, pleural effusion has worsened."
    c1 = "The pleural effusion has progressively worsened since previous scan."
    c2 = "The pleural effusion is noted again on the current scan."
    ents = extract_entities(gt)
    s1 = temporal_f1(ents, extract_entities(c1))
    s2 = temporal_f1(ents, extract_entities(c2))
    s0 = temporal_f1(set(), set())
    assert s1.f1 == 1.0
    assert s2.f1 < 1e-9 and f"{s2.f1:.2f}" == "0.00"
    assert s0.f1 == 1.0
    return f"F1 = {s1.f1}, {s2.f1:.1e}, {s0.f1}"


def naive_conv(x, k):
    cout, cin = k.shape
    _, n, d = x.shape
    out = np.zeros((cout, n, d))
    for c in range(cout):
        for t in range(n):
            for f in range(d):
                out[c, t, f] = sum(k[c, i] * x[i, t, f] for i in range(cin))
    return out


@criterion(5, "oracle equivalence (conv loop, one-token block)")
def test_c05_oracles():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(50):
        cin, cout = int(rng.integers(1, 13)), int(rng.integers(1, 13))
        n, d = int(rng.integers(1, 8)), int(rng.integers(1, 8))
        x, k = rng.standard_normal((cin, n, d)), rng.standard_normal((cout, cin))
        worst = max(worst, float(np.max(np.abs(conv1x1_channels(x, k) - naive_conv(x, k)))))
    assert worst <= 1e-12
    cfg = TacConfig(layers=4, grid=1, enc_dim=8, llm_dim=8, heads=2, depth=1, seed=9)
    store = tac_init(cfg)
    for name in store:
        store[name] = store[name] + 0.2 * rng.standard_normal(store[name].shape)
    bp = tfm_params(store, cfg).blocks[0]
    a, p = rng.standard_normal((2, 1, 8))
    block_err = float(np.max(np.abs(tfm_block(a, p, bp, 2) - closed_form_single_token(a, p, bp))))
    assert block_err <= 1e-10
    return f"conv max abs err {worst:.1e}, block max abs err {block_err:.1e}"


@criterion(6, "dummy-prior identity (bitwise)")
def test_c06_dummy_prior_identity():
    cfg = TacConfig(layers=12, grid=3, enc_dim=16, llm_dim=24, heads=4, depth=2, seed=6)
    params = tac_init(cfg)
    rng = np.random.default_rng(6)
    params["tfm.prefix.b_prior"] = rng.standard_normal(cfg.enc_dim)
    for _ in range(20):
        x = rng.standard_normal((cfg.layers, cfg.n_tokens, cfg.enc_dim)) * rng.uniform(0.1, 10)
        assert tac_forward(x, None, params, cfg).tobytes() == tac_forward(x, x, params, cfg).tobytes()


SWAP_SPEC = SyntheticPairSpec(config=TOY_SWAP, n_train=1500, n_test=300,
                              delta_scale=1.0, noise_scale=0.1, seed=0)


def swap_run():
    train, test = gen_pairs(SWAP_SPEC)
    params = tac_init(TOY_SWAP)
    cfg = ToyTrainConfig(epochs=SWAP_EPOCHS, batch_size=50, lr=1e-3, seed=0)
    with threadpool_limits(1):
        t = time.perf_counter()
        res = train_toy(train, params, TOY_SWAP, cfg)
        report = eval_swap(test, res.tac, res.probe, TOY_SWAP)
        elapsed = time.perf_counter() - t
        baseline = eval_swap(test, params, probe_init(TOY_SWAP.llm_dim, 0), TOY_SWAP)
    return res, report, baseline, elapsed


@pytest.fixture(scope="module")
def swap_result():
    return swap_run()


@criterion(7, "temporal-swap property")
def test_c07_temporal_swap(swap_result):
    res, report, baseline, elapsed = swap_result
    assert TOY_SWAP.grid == 4 and TOY_SWAP.enc_dim == 32 and TOY_SWAP.llm_dim == 64
    assert TOY_SWAP.heads == 4 and TOY_SWAP.depth == 2
    assert report.n_pairs == 300 and report.n_nonstable == 200
    assert res.epochs_run <= 300
    assert all(math.isfinite(v) for v in res.loss_curve)
    assert res.loss_curve[-1] <= res.loss_curve[0]
    assert report.accuracy >= 0.95, report.lines()
    assert report.flip_rate >= 0.90, report.lines()
    assert abs(baseline.flip_rate - baseline.chance_flip_rate) <= 0.10, baseline.lines()
    assert elapsed < 600, f"{elapsed:.0f}s"
    return (f"acc {report.accuracy:.4f}, flip {report.flip_rate:.4f}; untrained flip "
            f"{baseline.flip_rate:.3f} vs chance {baseline.chance_flip_rate:.3f}; "
            f"{res.epochs_run} epochs, {elapsed:.0f}s")


@criterion(8, "determinism of the swap run")
def test_c08_determinism(swap_result, tmp_path):
    res1, rep1, base1, _ = swap_result
    res2, rep2, base2, _ = swap_run()
    save_checkpoint(res1.tac, TOY_SWAP, tmp_path / "a")
    save_checkpoint(res2.tac, TOY_SWAP, tmp_path / "b")
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()
    assert res1.probe.equals(res2.probe)
    assert res1.loss_curve == res2.loss_curve
    assert rep1.lines() == rep2.lines() and base1.lines() == base2.lines()
    assert np.array_equal(rep1.swapped_predictions, rep2.swapped_predictions)


@criterion(9, "checkpoint round-trip over random configs")
def test_c09_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(9)
    for i in range(10):
        heads = int(rng.integers(1, 4))
        cfg = TacConfig(
            layers=int(rng.choice([1, 2, 4, 6, 9, 12])),
            grid=int(rng.integers(1, 4)),
            enc_dim=heads * int(rng.integers(1, 5)),
            llm_dim=int(rng.integers(1, 20)),
            se_reduction=int(rng.integers(1, 5)),
            heads=heads,
            depth=int(rng.integers(1, 4)),
            seed=int(rng.integers(0, 2**63)),
        )
        params = tac_init(cfg)
        params["tfm.prefix.b_prior"] = rng.standard_normal(cfg.enc_dim)
        x = rng.standard_normal((cfg.layers, cfg.n_tokens, cfg.enc_dim))
        y = x + rng.standard_normal(x.shape)
        before = tac_forward(x, y, params, cfg)
        path = tmp_path / f"c{i}.tac"
        save_checkpoint(params, cfg, path)
        loaded, cfg2 = load_checkpoint(path, cfg)
        assert cfg2 == cfg
        assert tac_forward(x, y, loaded, cfg2).tobytes() == before.tobytes()


@criterion(10, "heatmap contract")
def test_c10_heatmap(tmp_path):
    rng = np.random.default_rng(10)
    for tok in (0, 684, 1368, int(rng.integers(0, 1369))):
        feats = np.zeros((1369, 8))
        feats[tok] = 1.0
        path = tmp_path / f"h{tok}.pgm"
        emit_heatmap(feats, 37, 14, 2.0, path)
        data = path.read_bytes()
        header = b"P5\n518 518\n255\n"
        assert data.startswith(header) and len(data) == len(header) + 518 * 518
        img = decode_pgm(data)
        r, c = np.unravel_index(np.argmax(img), img.shape)
        assert (r // 14, c // 14) == divmod(tok, 37)


def test_swap_antisymmetry_and_train_accuracy(swap_result):
    res, report, _, _ = swap_result
    _, test = gen_pairs(SWAP_SPEC)
    swapped = eval_swap(test.swapped(), res.tac, res.probe, TOY_SWAP)
    assert abs(swapped.accuracy - report.accuracy) <= 0.02
    assert res.train_accuracy >= 0.95
