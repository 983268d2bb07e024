import json

import numpy as np
import pytest

from decodetools import code_geometry
from decodetools import conv3d_net
from decodetools import persist


def _small_net(name='six_layer', seed=0):
    return conv3d_net.build_architecture(name, scale=0.06, seed=seed,
                                         dtype=np.float64)


def test_parameter_counts():
    six = conv3d_net.build_architecture('six_layer')
    assert six.parameter_count() == 221660
    assert len(six.weighted_layers) == 6
    eleven = conv3d_net.build_architecture('eleven_layer')
    assert eleven.parameter_count() == 268460
    assert len(eleven.weighted_layers) == 11


@pytest.mark.parametrize('name', conv3d_net.ARCHITECTURES)
def test_receptive_field(name):
    assert _small_net(name).receptive_field == (9, 9, 9)


def test_unknown_architecture():
    with pytest.raises(ValueError):
        conv3d_net.build_architecture('resnet')


def test_identity_kernel():
    rng = np.random.default_rng(0)
    x = rng.random((2, 4, 3, 5, 3))
    kernel = np.zeros((3, 3, 3, 3, 3))
    kernel[1, 1, 1] = np.eye(3)
    assert np.allclose(conv3d_net.conv3d_same(x, kernel), x)


def test_shifted_kernel_pads_with_zeros():
    x = np.zeros((3, 3, 3, 1))
    x[0, 0, 0, 0] = 1.0
    kernel = np.zeros((3, 3, 3, 1, 1))
    kernel[2, 1, 1, 0, 0] = 1.0
    out = conv3d_net.conv3d_same(x, kernel)
    assert out.shape == (3, 3, 3, 1)
    assert np.argwhere(out[..., 0]).tolist() == []
    x[1, 0, 0, 0] = 1.0
    assert np.argwhere(conv3d_net.conv3d_same(x, kernel)[..., 0]).tolist() == [[0, 0, 0]]


def test_shape_errors():
    with pytest.raises(conv3d_net.ShapeError):
        conv3d_net.conv3d_same(np.zeros((1, 3, 3, 3, 2)), np.zeros((2, 3, 3, 2, 1)))
    with pytest.raises(conv3d_net.ShapeError):
        conv3d_net.conv3d_same(np.zeros((1, 3, 3, 3, 2)), np.zeros((3, 3, 3, 4, 1)))
    with pytest.raises(conv3d_net.ShapeError):
        _small_net().forward(np.zeros((1, 3, 3, 3, 4)))


def test_any_volume_size():
    net = _small_net()
    assert net.forward(np.zeros((2, 5, 5, 7, 5))).shape == (2, 5, 5, 7, 2)
    out = net.forward(np.zeros((3, 3, 3, 5)))
    assert out.shape == (3, 3, 3, 2)
    assert ((out > 0) & (out < 1)).all()


@pytest.mark.parametrize('name', conv3d_net.ARCHITECTURES)
def test_gradients_match_finite_differences(name):
    net = _small_net(name, seed=3)
    rng = np.random.default_rng(5)
    inputs = rng.random((2, 3, 3, 3, 5))
    targets = (rng.random((2, 3, 3, 3, 2)) < 0.3).astype(np.float64)
    _, grads = net.loss_and_grads(inputs, targets)

    def loss():
        logits, _ = net.logits(inputs, train=True)
        return conv3d_net.bce_with_logits(logits, targets)

    checked = 0
    for i, param_name in net.trainable():
        param = net.params[i][param_name]
        flat = param.reshape(-1)
        for k in rng.choice(flat.size, size=min(3, flat.size), replace=False):
            saved = flat[k]
            flat[k] = saved + 1e-6
            up = loss()
            flat[k] = saved - 1e-6
            down = loss()
            flat[k] = saved
            numeric = (up - down) / 2e-6
            assert grads[i][param_name].reshape(-1)[k] == pytest.approx(
                numeric, rel=1e-4, abs=1e-8)
            checked += 1
    assert checked > 10


def _memorize(epochs):
    rng = np.random.default_rng(8)
    inputs = (rng.random((10, 3, 3, 3, 5)) < 0.3).astype(np.float32)
    targets = (rng.random((10, 3, 3, 3, 2)) < 0.2).astype(np.float32)
    net = conv3d_net.build_architecture('six_layer', scale=0.3, seed=1)
    net, history = conv3d_net.train(net, (inputs, targets), epochs=epochs,
                                    batch_size=10, learning_rate=1e-2)
    return net, history, inputs, targets


def test_training_reduces_loss():
    _, history, _, _ = _memorize(60)
    assert len(history) == 60
    assert history[-1] < 0.75 * history[0]


@pytest.mark.slow
def test_memorizes_small_set():
    net, history, inputs, targets = _memorize(400)
    assert history[-1] < history[0] / 10
    predicted = conv3d_net.predict_corrections(net, inputs)
    assert np.array_equal(predicted, targets.astype(np.uint8))


def test_zero_epochs_keeps_weights():
    net = _small_net()
    before = net.params[0]['weight'].copy()
    _, history = conv3d_net.train(
        net, (np.zeros((2, 3, 3, 3, 5)), np.zeros((2, 3, 3, 3, 2))), epochs=0)
    assert history == []
    assert np.array_equal(net.params[0]['weight'], before)
    with pytest.raises(ValueError):
        conv3d_net.train(net, (np.zeros((0, 3, 3, 3, 5)),
                               np.zeros((0, 3, 3, 3, 2))))


def test_training_set(d3):
    inputs, targets = conv3d_net.make_training_set(d3, 3, 0.02, 12, seed=4,
                                                   chunk_size=5)
    assert inputs.shape == (12, 3, 3, 3, 5)
    assert targets.shape == (12, 3, 3, 3, 2)
    again, _ = conv3d_net.make_training_set(d3, 3, 0.02, 12, seed=4,
                                            chunk_size=5)
    assert np.array_equal(inputs, again)


def test_weights_round_trip(tmp_path):
    net = _small_net('eleven_layer', seed=9)
    path = str(tmp_path / 'net.bin')
    digest = conv3d_net.save_weights(net, path)
    manifest = json.loads((tmp_path / 'net.bin.json').read_text())
    assert manifest['sha256'] == digest == persist.file_digest(path)
    assert manifest['receptive_field'] == [9, 9, 9]
    loaded = conv3d_net.load_weights(path)
    assert loaded.name == 'eleven_layer'
    assert loaded.parameter_count() == net.parameter_count()
    x = np.random.default_rng(2).random((1, 3, 3, 3, 5))
    assert np.array_equal(loaded.forward(x), net.forward(x))


def test_weights_format_is_checked(tmp_path):
    path = str(tmp_path / 'other.bin')
    persist.write_blob(path, 'shots', {}, [('a', np.zeros(3))])
    with pytest.raises(persist.BlobFormatError):
        conv3d_net.load_weights(path)


def test_translation_covariance_in_the_bulk():
    net = _small_net(seed=4)
    volume = np.zeros((1, 13, 13, 13, 5))
    volume[..., 2:4] = 1.0
    first = volume.copy()
    first[0, 6, 6, 6, 0] = 1.0
    second = volume.copy()
    second[0, 7, 6, 6, 0] = 1.0
    a = net.forward(first)[0]
    b = net.forward(second)[0]
    assert np.allclose(a[4:8, 4:9, 4:9], b[5:9, 4:9, 4:9])


@pytest.mark.slow
def test_network_beats_the_uninformed_baseline():
    layout = code_geometry.build_layout(5, 5)
    inputs, targets = conv3d_net.make_training_set(layout, 7, 5e-3, 3000,
                                                   seed=0)
    held_in, held_out = inputs[:2500], inputs[2500:]
    net = conv3d_net.build_architecture('six_layer', scale=0.25, seed=0)
    net, _ = conv3d_net.train(net, (held_in, targets[:2500]), epochs=3,
                              batch_size=50)
    out = np.clip(net.forward(held_out), 1e-7, 1 - 1e-7)
    truth = targets[2500:]
    bce = -np.mean(truth * np.log(out) + (1 - truth) * np.log(1 - out))
    assert bce < np.log(2)
