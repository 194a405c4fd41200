import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hsicompress.autograd import Tensor, check_gradients
from hsicompress.autograd import functional as F
from hsicompress.data import PreprocessConfig, SyntheticConfig, make_synthetic_scene, prepare
from hsicompress.distill import (METHODS, DistillConfig, MultiBranchModel, attention_transfer_loss,
                                 camkd_loss, camkd_weights, correlation_congruence_loss,
                                 cskd_loss, ddgsd_loss, distill, dml_losses, fitnets_stage1,
                                 gate_weights, kd_term, okddip_attention, okddip_loss, one_loss,
                                 partner_indices, pskd_alpha, pskd_loss, pskd_target, rbf_kernel,
                                 save_student, simkd_model, soft_target_loss, tfkd_loss,
                                 tfkd_virtual_teacher)
from hsicompress.distill.trainers import train_simkd
from hsicompress.models import (ArchSpec, ModelGraph, TrainConfig, build_model, evaluate,
                                load_checkpoint, train)
from kd_cases import grad_cases, grad_errors, zero_cases


# -- config -----------------------------------------------------------------

def test_config_validation_and_sidecar(tmp_path):
    cfg = DistillConfig(method="dml", T=2.0, train=TrainConfig(epochs=3))
    path = tmp_path / "cfg.json"
    cfg.save_json(path)
    back = DistillConfig.load_json(path)
    assert back == cfg and isinstance(back.train, TrainConfig)
    with pytest.raises(ValueError, match="unknown distillation method"):
        DistillConfig(method="nope")
    with pytest.raises(ValueError, match="temperature"):
        DistillConfig(T=0)
    with pytest.raises(ValueError, match="alpha"):
        DistillConfig(alpha=1.5)
    with pytest.raises(ValueError, match="peers"):
        DistillConfig(method="okddip", peers=2)
    with pytest.raises(ValueError, match="unknown DistillConfig keys"):
        DistillConfig.from_dict({"method": "soft", "bogus": 1})
    assert len(METHODS) == 14
    assert DistillConfig().cc_weight(10) == pytest.approx(2.0)


# -- zero cases and gradients ---------------------------------------------------

@pytest.mark.parametrize("method", METHODS)
def test_zero_case(method):
    assert zero_cases()[method] == 0.0


@pytest.mark.parametrize("method", METHODS)
def test_loss_gradients(method):
    assert max(grad_errors(grad_cases()[method])) < 1e-3


def test_full_pipeline_gradient_through_toy_model():
    spec = ArchSpec(in_channels=2, f1=2, f2=3, kernels=(3, 3), hidden=4, classes=3, patch=7)
    student = build_model(spec, seed=1).astype(np.float64)
    teacher = build_model(spec, seed=2).astype(np.float64).eval()
    x = np.random.default_rng(0).normal(size=(2, 2, 7, 7))
    y = np.array([0, 2])
    z_t = teacher(x).data
    errs = check_gradients(lambda: soft_target_loss(student(x), z_t, y).total,
                           [student["conv1"].weight, student["fc2"].weight])
    assert max(errs) < 1e-3


# -- response based ---------------------------------------------------------

def test_soft_target_kl_example():
    z_t = Tensor(np.array([[0.0, np.log(3.0)]]))
    z_s = Tensor(np.zeros((1, 2)))
    expected = 0.25 * np.log(0.25 / 0.5) + 0.75 * np.log(0.75 / 0.5)
    assert kd_term(z_s, z_t, 1.0).item() == pytest.approx(expected, abs=1e-6)
    assert expected == pytest.approx(0.1308, abs=1e-4)


def test_soft_target_shape_mismatch():
    with pytest.raises(ValueError, match="differ"):
        soft_target_loss(Tensor(np.zeros((2, 3))), np.zeros((2, 4)), [0, 1])


def test_teacher_receives_no_gradient():
    spec = ArchSpec(in_channels=2, f1=2, f2=3, kernels=(3, 3), hidden=4, classes=3, patch=7)
    student, teacher = build_model(spec, 0), build_model(spec, 1)
    x = np.random.default_rng(0).normal(size=(4, 2, 7, 7)).astype(np.float32)
    soft_target_loss(student(x), teacher(x), [0, 1, 2, 0]).total.backward()
    assert all(p.grad is None for p in teacher.parameters())
    assert student["conv1"].weight.grad is not None


def test_kd_gradient_is_order_one_in_temperature():
    z_s = np.array([[1.0, -0.5, 0.3, 2.0]])
    z_t = np.array([[0.2, 1.5, -1.0, 0.4]])
    norms = []
    for T in (1, 2, 4, 8):
        zs = Tensor(z_s.copy(), requires_grad=True)
        kd_term(zs, z_t, T).backward()
        norms.append(np.linalg.norm(zs.grad))
    assert max(norms) / min(norms) < 4.0


# -- feature based ------------------------------------------------------------

def test_attention_scale_invariance_and_hand_value():
    rng = np.random.default_rng(0)
    a = Tensor(rng.normal(size=(2, 3, 4, 4)))
    assert attention_transfer_loss([a], [a.data * 2.5]).item() == pytest.approx(0.0, abs=1e-12)
    # one channel, 2x2 maps: Q_s = (1, 0, 0, 0), Q_t = (0, 0, 0, 1) after normalisation
    s = Tensor(np.array([[[[1.0, 0.0], [0.0, 0.0]]]]))
    t = np.array([[[[0.0, 0.0], [0.0, 3.0]]]])
    assert attention_transfer_loss([s], [t]).item() == pytest.approx(np.sqrt(2.0))
    # Q_s = (1, 4, 0, 0)/sqrt(17), Q_t = (1, 1, 1, 1)/2
    s = Tensor(np.array([[[[1.0, 2.0], [0.0, 0.0]]]]))
    t = np.ones((1, 1, 2, 2))
    qs = np.array([1, 4, 0, 0]) / np.sqrt(17)
    assert attention_transfer_loss([s], [t]).item() == pytest.approx(np.linalg.norm(qs - 0.5))


def test_attention_zero_map_is_skipped():
    s = Tensor(np.zeros((1, 2, 3, 3)))
    with pytest.warns(RuntimeWarning, match="all-zero"):
        assert attention_transfer_loss([s], [np.ones((1, 2, 3, 3))]).item() == 0.0


def test_cc_kernel_diagonal_and_closed_form():
    rng = np.random.default_rng(1)
    k = rbf_kernel(Tensor(rng.normal(size=(5, 3))), 0.7).data
    np.testing.assert_array_equal(np.diag(k), np.ones(5))
    # teacher rows coincide; student rows are orthogonal unit vectors (distance sqrt 2)
    f_t = np.array([[1.0, 0.0], [1.0, 0.0]])
    f_s = Tensor(np.array([[1.0, 0.0], [0.0, 1.0]]))
    delta, d2 = 1.0, 2.0
    expected = 0.25 * 2 * (1 - np.exp(-d2 / (2 * delta ** 2))) ** 2
    assert correlation_congruence_loss(f_s, f_t, delta).item() == pytest.approx(expected)
    with pytest.raises(ValueError, match=">= 2"):
        correlation_congruence_loss(Tensor(np.ones((1, 2))), np.ones((1, 2)))


def test_simkd_aligned_features_reproduce_teacher():
    spec = ArchSpec(in_channels=2, f1=3, f2=4, kernels=(3, 3), hidden=5, classes=3, patch=7)
    teacher = build_model(spec, 3).eval()
    comp = simkd_model(spec, teacher)
    for layer in teacher.layers:
        for k, t in layer.params().items():
            comp[layer.name].params()[k].data = t.data.copy()
        for k, b in layer.buffers().items():
            setattr(comp[layer.name], k, b.copy())
    comp["proj"].weight.data = np.eye(5, dtype=np.float32)
    comp["proj"].bias.data = np.zeros(5, np.float32)
    x = np.random.default_rng(0).normal(size=(6, 2, 7, 7)).astype(np.float32)
    comp.eval()
    np.testing.assert_allclose(comp(x).data, teacher(x).data, atol=1e-6)
    assert not comp["fc2"].weight.requires_grad


def test_camkd_weights_and_degenerate_single_teacher():
    y = np.array([0])
    z = [np.log([[np.exp(-c), 1 - np.exp(-c)]]) for c in (0.1, 1.0)]
    w = camkd_weights(z, y)
    np.testing.assert_allclose(w, [[0.711, 0.289]], atol=1e-3)
    rng = np.random.default_rng(2)
    z_s, z_t = Tensor(rng.normal(size=(3, 4))), rng.normal(size=(3, 4))
    one = camkd_loss(z_s, [z_t], [0, 1, 2], 4.0)
    assert one.kd.item() == pytest.approx(kd_term(z_s, z_t, 4.0).item())


@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3), st.integers(0, 2))
def test_camkd_teacher_matching_label_gets_largest_weight(logits, label):
    good = np.full((1, 3), -5.0)
    good[0, label] = 5.0
    other = np.array([logits])
    w = camkd_weights([good, other], np.array([label]))
    assert w[0, 0] >= w[0, 1]


# -- online ------------------------------------------------------------------

def test_dml_identical_peers_and_minimum_peers():
    z = np.random.default_rng(0).normal(size=(4, 3))
    parts = dml_losses([Tensor(z), Tensor(z.copy())], [0, 1, 2, 0])
    assert all(p.kd.item() == 0.0 for p in parts)
    with pytest.raises(ValueError, match="at least 2"):
        dml_losses([Tensor(z)], [0, 1, 2, 0])


def test_one_single_branch_and_gate_normalisation():
    rng = np.random.default_rng(0)
    z = Tensor(rng.normal(size=(5, 3)))
    assert one_loss([z], Tensor(rng.normal(size=(5, 1))), [0, 1, 2, 0, 1]).kd.item() == 0.0
    g = gate_weights(Tensor(rng.normal(size=(5, 4)))).data
    np.testing.assert_allclose(g.sum(axis=1), 1.0)


def test_clilr_trunk_gradient_is_sum_of_head_gradients():
    spec = ArchSpec(in_channels=2, f1=2, f2=3, kernels=(3, 3), hidden=4, classes=3, patch=7)
    model = MultiBranchModel(spec, 2, seed=0).astype(np.float64)
    x = np.random.default_rng(1).normal(size=(3, 2, 7, 7))
    y = np.array([0, 1, 2])
    w = model.trunk["conv1"].weight

    def head_loss(i):
        return F.cross_entropy(model(x).logits[i], y)

    grads = []
    for i in range(2):
        w.grad = None
        head_loss(i).backward()
        grads.append(w.grad.copy())
    w.grad = None
    (head_loss(0) + head_loss(1)).backward()
    np.testing.assert_allclose(w.grad, grads[0] + grads[1], atol=1e-10)
    assert max(check_gradients(lambda: head_loss(0) + head_loss(1), [w])) < 1e-3


def test_okddip_attention_rows_and_identical_peers():
    rng = np.random.default_rng(0)
    feats = [Tensor(rng.normal(size=(4, 6))) for _ in range(3)]
    wq, wk = Tensor(rng.normal(size=(6, 2))), Tensor(rng.normal(size=(6, 2)))
    a = okddip_attention(feats, wq, wk).data
    np.testing.assert_allclose(a.sum(axis=-1), 1.0)
    z = rng.normal(size=(4, 3))
    peers = [Tensor(z.copy()) for _ in range(2)]
    lead = Tensor(z.copy())
    assert okddip_loss(peers, feats[:2], lead, [0, 1, 2, 0], wq, wk).kd.item() == 0.0
    with pytest.raises(ValueError, match="2 peers"):
        okddip_loss(peers[:1], feats[:1], lead, [0, 1, 2, 0], wq, wk)


# -- self --------------------------------------------------------------------

@given(st.integers(2, 30), st.floats(0.0, 1.0))
def test_tfkd_virtual_teacher_sums_to_one(K, frac):
    a = 1.0 / K + (1 - 1.0 / K) * max(frac, 1e-6)
    pd = tfkd_virtual_teacher(np.arange(K) % K, K, a)
    np.testing.assert_allclose(pd.sum(axis=1), 1.0)


def test_tfkd_examples():
    pd = tfkd_virtual_teacher([3], 16, 0.9)
    assert pd[0, 3] == 0.9
    assert pd[0, 0] == pytest.approx(0.1 / 15) and pd[0, 0] == pytest.approx(0.006667, abs=1e-6)
    np.testing.assert_array_equal(tfkd_virtual_teacher([1], 3, 1.0), [[0.0, 1.0, 0.0]])
    with pytest.raises(ValueError, match="1/K"):
        tfkd_virtual_teacher([0], 4, 0.2)
    z = Tensor(np.random.default_rng(0).normal(size=(2, 4)))
    assert tfkd_loss(z, [0, 1]).kd.item() > 0


def test_cskd_partner_and_singleton():
    labels = np.array([0, 0, 1, 2, 2, 2])
    rng = np.random.default_rng(0)
    for _ in range(20):
        p = partner_indices(labels, np.arange(6), rng)
        assert p[2] == -1
        for i in (0, 1, 3, 4, 5):
            assert p[i] != i and labels[p[i]] == labels[i]
    z = Tensor(np.random.default_rng(1).normal(size=(3, 3)))
    zp = np.random.default_rng(2).normal(size=(3, 3))
    masked = cskd_loss(z, zp, [0, 1, 2], np.zeros(3, bool))
    assert masked.kd.item() == 0.0
    assert masked.total.item() == pytest.approx(F.cross_entropy(z, [0, 1, 2]).item())


def test_pskd_target_and_schedule():
    np.testing.assert_allclose(pskd_target(np.array([1.0, 0.0]), np.array([0.6, 0.4]), 0.5),
                               [0.8, 0.2])
    assert pskd_alpha(0.8, 1, 10) == 0.0
    assert pskd_alpha(0.8, 5, 10) == pytest.approx(0.4)
    rng = np.random.default_rng(0)
    p = F.softmax_t(Tensor(rng.normal(size=(4, 3)))).data
    for a in (0.0, 0.3, 1.0):
        np.testing.assert_allclose(pskd_target(np.eye(3)[[0, 1, 2, 0]], p, a).sum(axis=1), 1.0)
    z = Tensor(rng.normal(size=(4, 3)))
    assert pskd_loss(z, [0, 1, 2, 0], p, 0.0).total.item() == F.cross_entropy(z, [0, 1, 2, 0]).item()
    soft = pskd_loss(z, [0, 1, 2, 0], p, 0.3).total.item()
    target = pskd_target(np.eye(3)[[0, 1, 2, 0]], p, 0.3)
    assert soft == pytest.approx(F.soft_cross_entropy(z, target).item())


def test_ddgsd_symmetry():
    rng = np.random.default_rng(0)
    z1, z2 = Tensor(rng.normal(size=(3, 4))), Tensor(rng.normal(size=(3, 4)))
    f1, f2 = Tensor(rng.normal(size=(3, 2, 3, 3))), Tensor(rng.normal(size=(3, 2, 3, 3)))
    a = ddgsd_loss(z1, z2, f1, f2, [0, 1, 2]).total.item()
    b = ddgsd_loss(z2, z1, f2, f1, [0, 1, 2]).total.item()
    assert a == pytest.approx(b, rel=1e-12)


# -- trainers ----------------------------------------------------------------

@pytest.fixture(scope="module")
def kd_setup():
    ds = make_synthetic_scene(SyntheticConfig(bands=24, height=36, width=36, classes=4, seed=3))
    prep = prepare(ds, PreprocessConfig(pca_components=6, patch_size=9, split="random",
                                        train_fraction=0.5))
    arch = ArchSpec(in_channels=6, patch=9, classes=prep.classes, kernels=(3, 3))
    teachers = []
    for s in (1, 2):
        t = build_model(arch, s)
        train(t, prep.train, TrainConfig(epochs=3, batch_size=64), seed=s)
        teachers.append(t)
    return prep, arch, teachers


@pytest.mark.parametrize("method", METHODS)
def test_every_trainer_runs(kd_setup, method):
    prep, arch, teachers = kd_setup
    cfg = DistillConfig(method=method, train=TrainConfig(epochs=2, batch_size=64, patience=0),
                        hint_epochs=1)
    res = distill(cfg, prep.train, arch=arch, teacher=teachers[0], teachers=teachers,
                  eval_set=prep.test)
    assert isinstance(res.student, ModelGraph)
    assert res.student["conv1"].cout == 15 and res.student["fc1"].dout == 30
    assert all(np.isfinite(res.history.losses))
    assert 0 <= evaluate(res.student, prep.test).top1 <= 100


def test_offline_needs_teacher(kd_setup):
    prep, arch, _ = kd_setup
    with pytest.raises(ValueError, match="pretrained teacher"):
        distill(DistillConfig(method="soft"), prep.train, arch=arch)
    with pytest.raises(ValueError, match="architecture"):
        distill(DistillConfig(method="dml"), prep.train)


def test_fitnets_stage1_decreases(kd_setup):
    prep, arch, teachers = kd_setup
    student = build_model(arch.with_widths(15, 30, 30), 0)
    cfg = DistillConfig(method="fitnets", hint_epochs=5,
                        train=TrainConfig(epochs=1, batch_size=64, patience=0))
    hist, _ = fitnets_stage1(student, teachers[0], prep.train, cfg)
    assert all(b < a for a, b in zip(hist.losses, hist.losses[1:]))


def test_fitnets_rejects_spatial_mismatch(kd_setup):
    prep, arch, teachers = kd_setup
    student = build_model(ArchSpec(in_channels=6, patch=9, classes=prep.classes,
                                   kernels=(3, 5), f1=15, f2=30, hidden=30), 0)
    with pytest.raises(ValueError, match="spatially"):
        fitnets_stage1(student, teachers[0], prep.train, DistillConfig(method="fitnets"))


def test_simkd_alignment_decreases(kd_setup):
    prep, arch, teachers = kd_setup
    comp = simkd_model(arch.with_widths(15, 30, 30), teachers[0])
    cfg = DistillConfig(method="simkd", train=TrainConfig(epochs=5, batch_size=64, patience=0))
    hist, _ = train_simkd(comp, teachers[0], prep.train, cfg)
    assert all(b < a for a, b in zip(hist.losses, hist.losses[1:]))
    np.testing.assert_array_equal(comp["fc2"].weight.data, teachers[0]["fc2"].weight.data)


def test_trainer_is_deterministic(kd_setup):
    prep, arch, teachers = kd_setup
    cfg = DistillConfig(method="cskd", train=TrainConfig(epochs=2, batch_size=64, patience=0))
    a = distill(cfg, prep.train, arch=arch, seed=4)
    b = distill(cfg, prep.train, arch=arch, seed=4)
    assert a.history.losses == b.history.losses


def test_save_student_with_sidecar(kd_setup, tmp_path):
    prep, arch, teachers = kd_setup
    cfg = DistillConfig(method="tfkd", train=TrainConfig(epochs=1, batch_size=64, patience=0))
    res = distill(cfg, prep.train, arch=arch)
    sidecar = save_student(res, tmp_path / "student.ckpt")
    assert json.loads(sidecar.read_text())["method"] == "tfkd"
    back = load_checkpoint(tmp_path / "student.ckpt")
    x = prep.test.inputs(np.arange(8))
    np.testing.assert_array_equal(back(x).data, res.student(x).data)
