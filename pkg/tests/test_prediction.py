import numpy as np
import pytest

from fluorgen import tensor as T
from fluorgen.chem import DatasetRecord, parse_smiles
from fluorgen.errors import ContractError
from fluorgen.prediction import (
    AGP,
    LSP,
    BiasNetConfig,
    PredictorConfig,
    PropertyVector,
    SyntheticOracle,
    calibrate,
    multitask_loss,
    stokes_error_rate,
    train_bias_net,
    train_predictor,
)
from fluorgen.tensor import Tensor

CFG = PredictorConfig(hidden=16, depth=2, head_hidden=24)


@pytest.fixture(scope="module")
def agp():
    return AGP(CFG, seed=0)


@pytest.fixture(scope="module")
def lsp():
    return LSP(CFG, latent_p=4, latent_h=8, seed=1)


def test_agp_attention_is_distribution(agp):
    mol = parse_smiles("CN(C)c1ccc(C=O)cc1")
    sol = parse_smiles("O")
    _, weights = agp.predict(mol, sol)
    assert weights.shape[0] == 4
    assert np.all(weights >= 0)
    assert np.abs(weights.sum(axis=-1) - 1.0).max() < 1e-9


def test_agp_single_atom_inputs(agp):
    _, weights = agp.predict(parse_smiles("C"), parse_smiles("O"))
    assert weights.shape == (4, 2)


def test_agp_zero_query_uniform():
    model = AGP(CFG, seed=2)
    model.store["agp.queries"].data[...] = 0.0
    mol, sol = parse_smiles("CCO"), parse_smiles("O")
    _, weights = model.predict(mol, sol)
    n = mol.n_atoms + sol.n_atoms
    assert np.allclose(weights, 1.0 / n)


def test_lsp_gradient_matches_finite_differences(lsp):
    sol = parse_smiles("O")
    rng = np.random.default_rng(0)
    weights = Tensor(rng.normal(size=(1, 4)))

    def f(x):
        preds = lsp.predict_latent(T.reshape(x, (1, 4, 8)), [sol])
        return T.sum_(preds * weights)

    assert T.check_gradients(f, rng.normal(size=(4, 8))) < 1e-4


def test_lsp_solvent_mean_pooling(lsp):
    x = np.random.default_rng(1).normal(size=(4, 8))
    # a single-atom solvent IS its own mean; identical atoms pool to the same row
    p1 = lsp.predict(x, parse_smiles("O"))
    p2 = lsp.predict(x, parse_smiles("O"))
    assert np.array_equal(p1, p2)
    assert p1.shape == (4,)
    assert 0.0 <= p1[3] <= 1.0


def test_lsp_distinguishes_latents(lsp):
    rng = np.random.default_rng(2)
    sol = parse_smiles("O")
    a = lsp.predict(rng.normal(size=(4, 8)), sol)
    b = lsp.predict(rng.normal(size=(4, 8)), sol)
    assert not np.allclose(a, b)


def test_lsp_latent_shape_contract(lsp):
    with pytest.raises(ContractError):
        lsp.predict(np.zeros((3, 8)), parse_smiles("O"))


def test_multitask_loss_examples():
    assert multitask_loss(Tensor([[1.0, 2.0, 0.0, 0.0]]),
                          np.array([[1.0, 2.0, 9.0, 9.0]]),
                          np.array([[1, 1, 0, 0]])).item() == 0.0
    assert multitask_loss(Tensor([[0.5, 0, 0, 0]]), np.zeros((1, 4)),
                          np.array([[1, 0, 0, 0]])).item() == pytest.approx(0.25)
    assert multitask_loss(Tensor([[0.1, 0.3, 0, 0]]), np.zeros((1, 4)),
                          np.array([[1, 1, 0, 0]])).item() == pytest.approx(0.05)


def test_multitask_loss_ignores_absent_labels():
    pred = Tensor([[0.4, 0.6, 0.1, 0.9]])
    mask = np.array([[1, 0, 1, 0]])
    a = multitask_loss(pred, np.array([[0.5, 0.0, 0.2, 0.0]]), mask).item()
    b = multitask_loss(pred, np.array([[0.5, 77.0, 0.2, -3.0]]), mask).item()
    assert a == b
    with pytest.raises(ContractError):
        multitask_loss(pred, np.zeros((1, 4)), np.zeros((1, 4)))


def test_stokes_error_rate_examples():
    pv = PropertyVector
    same = [pv(abs_nm=400, emi_nm=450)] * 3
    assert stokes_error_rate(same, same) == 0.0
    assert stokes_error_rate([pv(abs_nm=400, emi_nm=410)], [pv(abs_nm=400, emi_nm=395)]) == 1.0
    truths = [pv(abs_nm=400, emi_nm=450), pv(abs_nm=400, emi_nm=450), pv(abs_nm=400, emi_nm=395)]
    assert stokes_error_rate(same, truths) == pytest.approx(1 / 3)


def test_stokes_sign_zero_counts_positive():
    pv = PropertyVector
    # zero predicted shift vs positive true shift: signs agree (+1)
    assert stokes_error_rate([pv(abs_nm=400, emi_nm=400)], [pv(abs_nm=400, emi_nm=450)]) == 0.0


def test_stokes_error_rate_permutation_invariant():
    rng = np.random.default_rng(3)
    pv = PropertyVector
    preds = [pv(abs_nm=400, emi_nm=float(400 + rng.normal() * 30)) for _ in range(12)]
    truths = [pv(abs_nm=400, emi_nm=float(400 + rng.normal() * 30)) for _ in range(12)]
    base = stokes_error_rate(preds, truths)
    perm = rng.permutation(12)
    assert stokes_error_rate([preds[i] for i in perm], [truths[i] for i in perm]) == base
    with pytest.raises(ContractError):
        stokes_error_rate([], [])


def test_calibrate_examples():
    assert calibrate(123.0, 1.0, 0.0) == 123.0
    assert calibrate(500.0, 0.8, 40.0) == 440.0
    # composition stays affine with the product of scales
    w1, b1, w2, b2 = 0.9, 10.0, 1.2, -5.0
    x = 432.1
    assert calibrate(calibrate(x, w1, b1), w2, b2) == pytest.approx(w2 * w1 * x + (w2 * b1 + b2))


def test_property_vector_contracts():
    with pytest.raises(ContractError):
        PropertyVector(abs_nm=-5.0)
    with pytest.raises(ContractError):
        PropertyVector(plqy=1.5)
    pv = PropertyVector(abs_nm=400.0, loge=4.0)
    assert pv.mask().tolist() == [1.0, 0.0, 1.0, 0.0]


def test_oracle_deterministic_and_smooth():
    oracle = SyntheticOracle(seed=5, bias="cluster")
    mol = parse_smiles("Nc1ccc2ccccc2c1")
    r1 = oracle.raw(mol, 78.0)
    r2 = oracle.raw(mol, 78.0)
    assert np.array_equal(r1, r2)
    truth = oracle.true_properties(mol, 78.0)
    assert 300 < truth[0] < 700 and truth[1] > truth[0] and 0 <= truth[3] <= 1


def _calibration_pairs(oracle, smiles_list, eps=78.0):
    pairs = []
    water = parse_smiles("O")
    for s in smiles_list:
        mol = parse_smiles(s)
        pairs.append((mol, water, oracle.raw(mol, eps)[:2], oracle.true_properties(mol, eps)[:2]))
    return pairs


def test_bias_net_zero_bias_keeps_identity():
    from toydata import TOY_CORPUS

    oracle = SyntheticOracle(seed=1, bias="zero", noise_nm=2.0)
    pairs = _calibration_pairs(oracle, TOY_CORPUS[:24])
    model = train_bias_net(pairs[:16], BiasNetConfig(hidden=16, sol_hidden=8, depth=2, head_hidden=16),
                           steps=150, batch_size=8, seed=0)
    test = pairs[16:]
    raw = np.array([p[2] for p in test])
    true = np.array([p[3] for p in test])
    cal = model.calibrate_batch([p[0] for p in test], [p[1] for p in test], raw).data
    w, b = model.factors([p[0] for p in test], [p[1] for p in test])
    assert np.abs(w.data - 1.0).mean() < 0.15
    raw_rmse = np.sqrt(np.mean((raw - true) ** 2))
    cal_rmse = np.sqrt(np.mean((cal - true) ** 2))
    assert cal_rmse <= raw_rmse + 2.0


def test_bias_net_corrects_global_affine():
    from toydata import TOY_CORPUS

    oracle = SyntheticOracle(seed=2, bias="affine", affine=(1.1, 30.0), noise_nm=5.0)
    pairs = _calibration_pairs(oracle, TOY_CORPUS[:32])
    model = train_bias_net(pairs[:24], BiasNetConfig(hidden=16, sol_hidden=8, depth=2, head_hidden=16),
                           steps=250, batch_size=12, seed=0)
    test = pairs[24:]
    raw = np.array([p[2] for p in test])
    true = np.array([p[3] for p in test])
    cal = model.calibrate_batch([p[0] for p in test], [p[1] for p in test], raw).data
    raw_rmse = np.sqrt(np.mean((raw - true) ** 2))
    cal_rmse = np.sqrt(np.mean((cal - true) ** 2))
    assert cal_rmse < 0.5 * raw_rmse


def test_bias_net_needs_ten_pairs():
    with pytest.raises(ContractError):
        train_bias_net([])


def test_train_predictor_agp_learns_constant_shift():
    records = [DatasetRecord(smiles=s, solvent_smiles="O", abs_nm=450.0, emi_nm=500.0)
               for s in ["CCO", "CCN", "CCC", "c1ccccc1", "Cc1ccccc1", "CCc1ccccc1"]]
    model = train_predictor(records, "agp", config=CFG, steps=120, batch_size=4, lr=3e-3, seed=0)
    preds, _ = model.predict(parse_smiles("CCO"), parse_smiles("O"))
    # normalized targets: (450-200)/900 = 0.2778, (500-200)/900 = 0.3333
    assert abs(preds[0] - 0.2778) < 0.08
    assert abs(preds[1] - 0.3333) < 0.08
