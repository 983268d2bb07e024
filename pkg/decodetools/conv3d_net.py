"""Fully-convolutional 3D networks written directly on numpy.

Tensors are laid out (batch, dx, dz, dm, channels). Every convolution pads
with zeros to a 'same' output, so a network trained on one volume applies
unchanged to any other volume size.

A network is a flat list of LayerSpec entries. Activation 0 is the network
input and activation i+1 is the output of layer i; a skip_add layer adds
activation `skip_from` to its input.
"""
import collections
import logging

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from traitlets import Float, Integer, validate, TraitError
from traitlets.config import Configurable

from decodetools import noise_sampler
from decodetools import persist
from decodetools import syndrome_codec

_LOG = logging.getLogger(__name__)

WEIGHTS_FORMAT = 'convnet'
BN_EPSILON = 1e-5
BN_MOMENTUM = 0.9
DECISION_THRESHOLD = 0.5

ARCHITECTURES = ('six_layer', 'eleven_layer')


class ShapeError(ValueError):
  pass


class DivergenceError(RuntimeError):
  pass


LayerSpec = collections.namedtuple(
    'LayerSpec',
    ['kind', 'kernel', 'in_channels', 'out_channels', 'skip_from'])


def _spec(kind, channels, out_channels=None, kernel=(1, 1, 1), skip_from=None):
  out_channels = channels if out_channels is None else out_channels
  return LayerSpec(kind, tuple(kernel), channels, out_channels, skip_from)


def conv3d_same(inputs, kernel, bias=None):
  """Zero-padded 'same' 3D cross-correlation.

  Args:
    inputs: (N, X, Y, T, Cin) or (X, Y, T, Cin).
    kernel: (k1, k2, k3, Cin, Cout) with odd k's.
    bias: optional (Cout,).

  Returns:
    array of shape (..., X, Y, T, Cout).

  Raises:
    ShapeError: on even kernel sizes or a channel mismatch.
  """
  inputs = np.asarray(inputs)
  kernel = np.asarray(kernel)
  single = inputs.ndim == 4
  if single:
    inputs = inputs[None]
  if inputs.ndim != 5 or kernel.ndim != 5:
    raise ShapeError('expected 5-d input and kernel, got %r and %r'
                     % (inputs.shape, kernel.shape))
  window = kernel.shape[:3]
  if any(k % 2 == 0 for k in window):
    raise ShapeError('kernel sizes must be odd, got %r' % (window,))
  if kernel.shape[3] != inputs.shape[-1]:
    raise ShapeError('kernel expects %d channels, input has %d'
                     % (kernel.shape[3], inputs.shape[-1]))
  out = np.tensordot(_windows(inputs, window), kernel,
                     axes=([4, 5, 6, 7], [3, 0, 1, 2]))
  if bias is not None:
    out = out + bias
  return out[0] if single else out


def _windows(inputs, window):
  pad = [(0, 0)] + [(k // 2, k // 2) for k in window] + [(0, 0)]
  padded = np.pad(inputs, pad)
  return sliding_window_view(padded, window, axis=(1, 2, 3))


class Conv3DLayer(object):
  params = ('weight', 'bias')

  def init_params(self, spec, rng, dtype):
    fan_in = spec.in_channels * int(np.prod(spec.kernel))
    bound = 1.0 / np.sqrt(fan_in)
    shape = spec.kernel + (spec.in_channels, spec.out_channels)
    return {
        'weight': rng.uniform(-bound, bound, shape).astype(dtype),
        'bias': rng.uniform(-bound, bound, spec.out_channels).astype(dtype),
    }

  def forward(self, x, params, train):
    windows = _windows(x, params['weight'].shape[:3])
    out = np.tensordot(windows, params['weight'],
                       axes=([4, 5, 6, 7], [3, 0, 1, 2])) + params['bias']
    return out, windows

  def backward(self, grad, windows, params):
    weight = params['weight']
    grad_weight = np.tensordot(windows, grad, axes=([0, 1, 2, 3],
                                                    [0, 1, 2, 3]))
    grads = {
        'weight': grad_weight.transpose(1, 2, 3, 0, 4),
        'bias': grad.sum(axis=(0, 1, 2, 3)),
    }
    flipped = weight[::-1, ::-1, ::-1].transpose(0, 1, 2, 4, 3)
    return conv3d_same(grad, flipped), grads


class PointwiseLayer(object):
  params = ('weight', 'bias')

  def init_params(self, spec, rng, dtype):
    bound = 1.0 / np.sqrt(spec.in_channels)
    return {
        'weight': rng.uniform(-bound, bound, (spec.in_channels,
                                              spec.out_channels)).astype(dtype),
        'bias': rng.uniform(-bound, bound, spec.out_channels).astype(dtype),
    }

  def forward(self, x, params, train):
    return np.tensordot(x, params['weight'], axes=([4], [0])) + params['bias'], x

  def backward(self, grad, x, params):
    grads = {
        'weight': np.tensordot(x, grad, axes=([0, 1, 2, 3], [0, 1, 2, 3])),
        'bias': grad.sum(axis=(0, 1, 2, 3)),
    }
    return np.tensordot(grad, params['weight'], axes=([4], [1])), grads


class BatchNormLayer(object):
  """Per-channel normalization over batch and all volume positions."""
  params = ('gamma', 'beta', 'mean', 'var')
  trainable = ('gamma', 'beta')

  def init_params(self, spec, rng, dtype):
    c = spec.out_channels
    return {
        'gamma': np.ones(c, dtype=dtype),
        'beta': np.zeros(c, dtype=dtype),
        'mean': np.zeros(c, dtype=dtype),
        'var': np.ones(c, dtype=dtype),
    }

  def forward(self, x, params, train):
    axes = (0, 1, 2, 3)
    if train:
      mean = x.mean(axis=axes)
      var = x.var(axis=axes)
      params['mean'][...] = (BN_MOMENTUM * params['mean']
                             + (1 - BN_MOMENTUM) * mean)
      params['var'][...] = (BN_MOMENTUM * params['var']
                            + (1 - BN_MOMENTUM) * var)
    else:
      mean, var = params['mean'], params['var']
    inv_std = 1.0 / np.sqrt(var + BN_EPSILON)
    normed = (x - mean) * inv_std
    return params['gamma'] * normed + params['beta'], (normed, inv_std)

  def backward(self, grad, cache, params):
    normed, inv_std = cache
    axes = (0, 1, 2, 3)
    count = normed.size // normed.shape[-1]
    grads = {
        'gamma': (grad * normed).sum(axis=axes),
        'beta': grad.sum(axis=axes),
    }
    g = grad * params['gamma']
    grad_x = inv_std / count * (
        count * g - g.sum(axis=axes) - normed * (g * normed).sum(axis=axes))
    return grad_x, grads


class ReluLayer(object):
  params = ()

  def init_params(self, spec, rng, dtype):
    return {}

  def forward(self, x, params, train):
    mask = x > 0
    return x * mask, mask

  def backward(self, grad, mask, params):
    return grad * mask, {}


class SkipAddLayer(object):
  params = ()

  def init_params(self, spec, rng, dtype):
    return {}

  def forward(self, x, params, train, skip=None):
    if skip.shape != x.shape:
      raise ShapeError('skip-add shapes differ: %r vs %r'
                       % (skip.shape, x.shape))
    return x + skip, None

  def backward(self, grad, cache, params):
    return grad, {}


class SigmoidLayer(object):
  params = ()

  def init_params(self, spec, rng, dtype):
    return {}

  def forward(self, x, params, train):
    out = sigmoid(x)
    return out, out

  def backward(self, grad, out, params):
    return grad * out * (1 - out), {}


_LAYERS = {
    'conv3d': Conv3DLayer(),
    'pointwise': PointwiseLayer(),
    'batchnorm': BatchNormLayer(),
    'relu': ReluLayer(),
    'skip_add': SkipAddLayer(),
    'sigmoid': SigmoidLayer(),
}


def sigmoid(z):
  return 0.5 * (1.0 + np.tanh(0.5 * z))


def bce_with_logits(logits, targets):
  """Mean binary cross-entropy of sigmoid(logits) against targets."""
  return float(np.mean(np.maximum(logits, 0) - logits * targets
                       + np.log1p(np.exp(-np.abs(logits)))))


class ConvNet(object):
  """Layer specs plus their parameter tensors.

  The trailing sigmoid is applied by forward(); training works on the
  logits before it.
  """

  def __init__(self, name, specs, params, scale=1.0, dtype=np.float32):
    if not specs or specs[-1].kind != 'sigmoid':
      raise ShapeError('a network must end with a sigmoid layer')
    self.name = name
    self.specs = list(specs)
    self.params = params
    self.scale = scale
    self.dtype = np.dtype(dtype)

  @property
  def in_channels(self):
    return self.specs[0].in_channels

  @property
  def receptive_field(self):
    """Per-axis receptive field of the composed convolutions."""
    field = np.ones(3, dtype=int)
    for spec in self.specs:
      if spec.kind in ('conv3d', 'pointwise'):
        field += np.array(spec.kernel) - 1
    return tuple(int(f) for f in field)

  @property
  def weighted_layers(self):
    return [s for s in self.specs if s.kind in ('conv3d', 'pointwise')]

  def parameter_count(self):
    """Counts weights, biases and all four normalization vectors."""
    return int(sum(a.size for layer in self.params for a in layer.values()))

  def logits(self, inputs, train=False):
    """Runs every layer except the final sigmoid.

    Returns:
      (logits, caches) where caches feed backward().
    """
    x = np.asarray(inputs, dtype=self.dtype)
    if x.shape[-1] != self.in_channels:
      raise ShapeError('network expects %d input channels, got %d'
                       % (self.in_channels, x.shape[-1]))
    activations = [x]
    caches = []
    for spec, params in zip(self.specs[:-1], self.params[:-1]):
      layer = _LAYERS[spec.kind]
      if spec.kind == 'skip_add':
        out, cache = layer.forward(x, params, train,
                                   skip=activations[spec.skip_from])
      else:
        out, cache = layer.forward(x, params, train)
      x = out.astype(self.dtype, copy=False)
      activations.append(x)
      caches.append(cache)
    return x, caches

  def forward(self, inputs, mode='infer'):
    """Network output in (0, 1).

    Args:
      inputs: (N, dx, dz, dm, C) or a single (dx, dz, dm, C) volume.
      mode: 'train' uses batch statistics, 'infer' running statistics.

    Raises:
      DivergenceError: if the output is not finite.
    """
    if mode not in ('train', 'infer'):
      raise ValueError('mode must be train or infer, got %r' % (mode,))
    inputs = np.asarray(inputs)
    single = inputs.ndim == 4
    z, _ = self.logits(inputs[None] if single else inputs,
                       train=(mode == 'train'))
    out = sigmoid(z)
    if not np.all(np.isfinite(out)):
      raise DivergenceError('non-finite network output')
    return out[0] if single else out

  def backward(self, caches, grad_logits):
    """Gradients of every trainable parameter given d(loss)/d(logits)."""
    n = len(caches)
    grad_acts = [None] * (n + 1)
    grad_acts[n] = grad_logits
    grads = [dict() for _ in self.specs]
    for i in range(n - 1, -1, -1):
      spec = self.specs[i]
      layer = _LAYERS[spec.kind]
      g = grad_acts[i + 1]
      grad_in, grads[i] = layer.backward(g, caches[i], self.params[i])
      grad_acts[i] = grad_in if grad_acts[i] is None else grad_acts[i] + grad_in
      if spec.kind == 'skip_add':
        j = spec.skip_from
        grad_acts[j] = g if grad_acts[j] is None else grad_acts[j] + g
    return grads

  def loss_and_grads(self, inputs, targets):
    z, caches = self.logits(inputs, train=True)
    loss = bce_with_logits(z, targets)
    grad = (sigmoid(z) - targets) / z.size
    return loss, self.backward(caches, grad.astype(self.dtype))

  def trainable(self):
    """Yields (layer index, param name) of every trainable tensor."""
    for i, spec in enumerate(self.specs):
      layer = _LAYERS[spec.kind]
      for name in getattr(layer, 'trainable', layer.params):
        yield i, name


def _scaled(filters, scale):
  return max(1, int(round(filters * scale)))


def _block(specs, kind, c_in, c_out, kernel=(1, 1, 1)):
  specs.append(_spec(kind, c_in, c_out, kernel=kernel))
  specs.append(_spec('batchnorm', c_out))


def architecture_specs(name, scale=1.0, in_channels=5):
  """Layer specs of a named architecture.

  six_layer: 4 conv(3x3x3) x 50, pointwise x 200, pointwise x 2.
  eleven_layer: 4 conv(3x3x3) x 50, 6 pointwise x 100 with residual adds
  around the 100->100 layers, pointwise x 2. Every weighted layer is
  followed by batch normalization; scale shrinks all hidden widths.

  Raises:
    ValueError: for an unknown name.
  """
  if name not in ARCHITECTURES:
    raise ValueError('unknown architecture %r, expected one of %r'
                     % (name, ARCHITECTURES))
  conv = _scaled(50, scale)
  specs = []
  c_in = in_channels
  for _ in range(4):
    _block(specs, 'conv3d', c_in, conv, kernel=(3, 3, 3))
    specs.append(_spec('relu', conv))
    c_in = conv
  if name == 'six_layer':
    hidden = _scaled(200, scale)
    _block(specs, 'pointwise', c_in, hidden)
    specs.append(_spec('relu', hidden))
  else:
    hidden = _scaled(100, scale)
    _block(specs, 'pointwise', c_in, hidden)
    specs.append(_spec('relu', hidden))
    for _ in range(5):
      block_input = len(specs)
      _block(specs, 'pointwise', hidden, hidden)
      specs.append(_spec('skip_add', hidden, skip_from=block_input))
      specs.append(_spec('relu', hidden))
  _block(specs, 'pointwise', hidden, 2)
  specs.append(_spec('sigmoid', 2))
  return specs


def build_network(name, specs, scale=1.0, seed=0, dtype=np.float32):
  rng = np.random.default_rng(seed)
  params = [_LAYERS[s.kind].init_params(s, rng, dtype) for s in specs]
  return ConvNet(name, specs, params, scale=scale, dtype=dtype)


def build_architecture(name, scale=1.0, seed=0, dtype=np.float32):
  """Builds a freshly initialized six_layer or eleven_layer network."""
  return build_network(name, architecture_specs(name, scale), scale=scale,
                       seed=seed, dtype=dtype)


class Adam(object):
  """Adaptive moment estimation over a network's trainable tensors."""

  def __init__(self, net, learning_rate=1e-3, beta1=0.9, beta2=0.999,
               epsilon=1e-8):
    self.net = net
    self.learning_rate = learning_rate
    self.beta1 = beta1
    self.beta2 = beta2
    self.epsilon = epsilon
    self.step_count = 0
    self._m = {}
    self._v = {}

  def step(self, grads):
    self.step_count += 1
    t = self.step_count
    for i, name in self.net.trainable():
      g = grads[i][name]
      key = (i, name)
      m = self._m.get(key, 0.0) * self.beta1 + (1 - self.beta1) * g
      v = self._v.get(key, 0.0) * self.beta2 + (1 - self.beta2) * g * g
      self._m[key], self._v[key] = m, v
      m_hat = m / (1 - self.beta1 ** t)
      v_hat = v / (1 - self.beta2 ** t)
      param = self.net.params[i][name]
      param -= (self.learning_rate * m_hat
                / (np.sqrt(v_hat) + self.epsilon)).astype(param.dtype)


class TrainingConfig(Configurable):
  """Hyperparameters of network training."""

  epochs = Integer(10, help='Passes over the training set.').tag(config=True)
  batch_size = Integer(32, help='Samples per weight update.').tag(config=True)
  learning_rate = Float(1e-3, help='Adam step size.').tag(config=True)
  beta1 = Float(0.9, help='Adam first-moment decay.').tag(config=True)
  beta2 = Float(0.999, help='Adam second-moment decay.').tag(config=True)
  seed = Integer(0, help='Seed of the data order.').tag(config=True)

  @validate('epochs')
  def _valid_epochs(self, proposal):
    if proposal['value'] < 0:
      raise TraitError('epochs must be >= 0')
    return proposal['value']

  @validate('batch_size')
  def _valid_batch(self, proposal):
    if proposal['value'] < 1:
      raise TraitError('batch_size must be >= 1')
    return proposal['value']

  @validate('learning_rate')
  def _valid_rate(self, proposal):
    if proposal['value'] <= 0:
      raise TraitError('learning_rate must be > 0')
    return proposal['value']


def train(net, dataset, epochs=10, batch_size=32, learning_rate=1e-3,
          beta1=0.9, beta2=0.999, seed=0):
  """Trains a network with binary cross-entropy and Adam.

  Args:
    net: ConvNet, updated in place.
    dataset: (inputs, targets) arrays of shapes (N, dx, dz, dm, C) and
      (N, dx, dz, dm, 2).
    epochs: passes over the data; 0 leaves the network untouched.
    batch_size: samples per update.
    learning_rate, beta1, beta2: Adam parameters.
    seed: seed of the per-epoch data order.

  Returns:
    (net, history) with the mean batch loss of every epoch.

  Raises:
    ValueError: on an empty dataset.
    DivergenceError: if the loss stops being finite.
  """
  inputs, targets = dataset
  inputs = np.asarray(inputs, dtype=net.dtype)
  targets = np.asarray(targets, dtype=net.dtype)
  if not len(inputs):
    raise ValueError('training set is empty')
  rng = np.random.default_rng(seed)
  optimizer = Adam(net, learning_rate, beta1, beta2)
  history = []
  for epoch in range(epochs):
    order = rng.permutation(len(inputs))
    losses = []
    for start in range(0, len(order), batch_size):
      batch = order[start:start + batch_size]
      loss, grads = net.loss_and_grads(inputs[batch], targets[batch])
      if not np.isfinite(loss):
        raise DivergenceError('loss diverged in epoch %d' % (epoch + 1))
      optimizer.step(grads)
      losses.append(loss)
    history.append(float(np.mean(losses)))
    _LOG.info('epoch %d/%d: bce %.6f', epoch + 1, epochs, history[-1])
  return net, history


def predict_corrections(net, inputs, batch_size=256):
  """Thresholds network outputs: 1 iff the output exceeds 0.5."""
  inputs = np.asarray(inputs)
  if inputs.ndim == 4:
    return (net.forward(inputs) > DECISION_THRESHOLD).astype(np.uint8)
  outputs = [net.forward(inputs[i:i + batch_size]) > DECISION_THRESHOLD
             for i in range(0, len(inputs), batch_size)]
  return np.concatenate(outputs).astype(np.uint8)


def make_training_set(layout, dm, p, samples, seed,
                      chunk_size=noise_sampler.DEFAULT_CHUNK_SIZE,
                      hadamard=False):
  """Samples shots and turns them into (inputs, canonical targets)."""
  noise = noise_sampler.NoiseParams(p)
  circuit = noise_sampler.ExtractionCircuit(layout, hadamard=hadamard)
  inputs, targets = [], []
  for chunk, start in enumerate(range(0, samples, chunk_size)):
    shots = min(chunk_size, samples - start)
    errors, syndromes = noise_sampler.propagate(
        circuit, dm,
        noise_sampler.RandomFaults(noise, noise_sampler.chunk_rng(seed, chunk)),
        shots)
    inputs.append(syndrome_codec.build_input(syndromes, layout))
    targets.append(syndrome_codec.build_target(errors, layout))
  return np.concatenate(inputs), np.concatenate(targets)


def _tensor_items(net):
  for i, params in enumerate(net.params):
    for name in _LAYERS[net.specs[i].kind].params:
      yield 'layer%d.%s' % (i, name), params[name]


def save_weights(net, path):
  """Writes a versioned weights blob and its JSON manifest.

  Returns:
    sha256 hex digest of the weights blob.
  """
  header = {
      'architecture': net.name,
      'scale': net.scale,
      'dtype': net.dtype.name,
      'specs': [list(s[:1]) + [list(s.kernel)] + list(s[2:]) for s in net.specs],
  }
  persist.write_blob(path, WEIGHTS_FORMAT, header, list(_tensor_items(net)))
  digest = persist.file_digest(path)
  persist.write_manifest(persist.manifest_path(path), {
      'architecture': net.name,
      'scale': net.scale,
      'layers': [s.kind for s in net.specs],
      'receptive_field': list(net.receptive_field),
      'parameter_count': net.parameter_count(),
      'sha256': digest,
  })
  _LOG.info('wrote %s weights to %s', net.name, path)
  return digest


def load_weights(path):
  """Reads a network written by save_weights."""
  header, tensors = persist.read_blob(path, WEIGHTS_FORMAT)
  specs = [LayerSpec(kind, tuple(kernel), c_in, c_out, skip)
           for kind, kernel, c_in, c_out, skip in header['specs']]
  params = [dict() for _ in specs]
  for key, value in tensors.items():
    layer, name = key.split('.', 1)
    params[int(layer[len('layer'):])][name] = value
  return ConvNet(header['architecture'], specs, params,
                 scale=header['scale'], dtype=header['dtype'])
