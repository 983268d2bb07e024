# coding: utf-8
"""decodelab: experiments with local neural and global matching decoders.
"""

from __future__ import print_function

import csv
import logging
import os

import numpy as np

from tornado.log import LogFormatter

from traitlets import (
    Bool, Dict, Enum, Float, Integer, List, TraitError, Unicode, default,
)
from traitlets.config.application import Application, catch_config_error

from decodetools import bench_harness
from decodetools import code_geometry
from decodetools import conv3d_net
from decodetools import homology_canon
from decodetools import latency_model
from decodetools import noise_sampler
from decodetools import persist
from decodetools import plots
from decodetools import syndrome_codec

#-----------------------------------------------------------------------------
# Module globals
#-----------------------------------------------------------------------------
pjoin = os.path.join

here = os.path.dirname(__file__)
RESOURCES = pjoin(here, 'resources')

MICROSECOND = 1e-6

# The default rate polynomial: 11-layer network followed by vertical cleanup.
DEFAULT_U = 0.0008198
DEFAULT_B = 107.803

_examples = """
decodelab simulate --dx=5 --dm=5 --p=0.001 --shots=1000 --output=shots.dclb
decodelab train --dx=5 --dm=7 --p=0.005 --samples=10000 --output=net.dclb
decodelab decode --dx=5 --dm=5 --p=0.001 --p=0.002 --local=oracle --sparsifier=cleanup
decodelab fit --input=results.csv
decodelab latency --c=2 --j-max=8
decodelab compare --p=0.001 --weights=a.dclb --weights=b.dclb
decodelab decode --config=experiment.json
"""

LIBRARY_ERRORS = (
    TraitError, IOError,
    code_geometry.LayoutError,
    noise_sampler.UnknownLocationError,
    syndrome_codec.EncodingError,
    homology_canon.CanonicalizationError,
    conv3d_net.ShapeError,
    conv3d_net.DivergenceError,
    bench_harness.FitError,
    latency_model.BufferDivergenceError,
    latency_model.WindowPlanError,
    latency_model.SuperthresholdError,
    persist.BlobFormatError,
)

experiment_aliases = {
    'dx': 'ExperimentConfig.dx',
    'dz': 'ExperimentConfig.dz',
    'dm': 'ExperimentConfig.dm',
    'p': 'ExperimentConfig.p',
    'shots': 'ExperimentConfig.shots',
    'seed': 'ExperimentConfig.seed',
    'workers': 'ExperimentConfig.workers',
    'chunk-size': 'ExperimentConfig.chunk_size',
    'local': 'ExperimentConfig.local_decoder',
    'weights': 'ExperimentConfig.weights',
    'sparsifier': 'ExperimentConfig.sparsifier',
    'sheet-size': 'ExperimentConfig.sheet_size',
    'direction': 'ExperimentConfig.cleanup_direction',
    'global': 'ExperimentConfig.global_decoder',
    'csv': 'ExperimentConfig.output_csv',
    'manifest': 'ExperimentConfig.output_manifest',
    'svg': 'ExperimentConfig.output_svg',
}

experiment_flags = {
    'hadamard': (
        {'ExperimentConfig': {'hadamard': True}},
        "Use the Hadamard-rotated X-ancilla circuit."
    ),
}


def _aliases(app, extra=None):
    aliases = {
        'config': app + '.config_file',
        'log-level': 'Application.log_level',
    }
    aliases.update(extra or {})
    return aliases

#-----------------------------------------------------------------------------
# Base application
#-----------------------------------------------------------------------------

class DecodeLabBase(Application):
    """Logging, config files and error reporting shared by all commands."""

    _log_formatter_cls = LogFormatter

    @default('log_level')
    def _log_level_default(self):
        return logging.INFO

    @default('log_datefmt')
    def _log_datefmt_default(self):
        """Exclude date from default date format"""
        return "%H:%M:%S"

    @default('log_format')
    def _log_format_default(self):
        return (u"%(color)s[%(levelname)1.1s %(asctime)s.%(msecs).03d "
                u"%(name)s]%(end_color)s %(message)s")

    config_file = Unicode(u'', config=True,
        help="JSON config file; command-line options override its values."
    )

    def init_logging(self):
        # Library loggers are children of the app log so they share its
        # handler, formatter and level.
        self.log.propagate = False
        logger = logging.getLogger('decodetools')
        logger.propagate = True
        logger.parent = self.log
        logger.setLevel(self.log.level)

    def init_config_file(self):
        if not self.config_file:
            return
        path = os.path.abspath(self.config_file)
        if not os.path.isfile(path):
            self.log.critical("config file %s not found", path)
            self.exit(1)
        self.load_config_file(os.path.basename(path),
                              path=os.path.dirname(path))

    @catch_config_error
    def initialize(self, argv=None):
        super(DecodeLabBase, self).initialize(argv)
        if self.subapp is not None:
            return
        self.init_config_file()
        self.init_logging()

    def run(self):
        raise NotImplementedError

    def start(self):
        if self.subapp is not None:
            return self.subapp.start()
        try:
            self.run()
        except LIBRARY_ERRORS as e:
            self.log.critical("%s failed: %s", self.name, e)
            self.exit(1)

#-----------------------------------------------------------------------------
# Subcommands
#-----------------------------------------------------------------------------

class SimulateApp(DecodeLabBase):

    name = 'decodelab-simulate'
    description = "Sample shot batches and write them as a blob."

    classes = [bench_harness.ExperimentConfig]
    aliases = Dict(_aliases('SimulateApp', dict(
        experiment_aliases, output='SimulateApp.output')))
    flags = Dict(experiment_flags)

    output = Unicode(u'shots.dclb', config=True,
        help="Shot blob to write; a JSON sidecar is written next to it."
    )

    def run(self):
        config = bench_harness.ExperimentConfig(parent=self)
        layout = code_geometry.build_layout(config.dx, config.dz)
        for p in config.p:
            noise = noise_sampler.NoiseParams(p)
            circuit = noise_sampler.ExtractionCircuit(
                layout, hadamard=config.hadamard)
            batches = []
            for chunk, start in enumerate(
                    range(0, config.shots, config.chunk_size)):
                size = min(config.chunk_size, config.shots - start)
                batches.append(noise_sampler.sample_batch(
                    layout, config.dm, noise, size,
                    noise_sampler.chunk_rng(config.seed, chunk),
                    circuit=circuit))
            errors = noise_sampler.ErrorVolume(
                np.concatenate([e.x_errors for e, _ in batches]),
                np.concatenate([e.z_errors for e, _ in batches]))
            syndromes = noise_sampler.SyndromeVolume(
                np.concatenate([s.raw_x for _, s in batches]),
                np.concatenate([s.raw_z for _, s in batches]))
            path = self.output
            if len(config.p) > 1:
                base, ext = os.path.splitext(self.output)
                path = '%s_p%g%s' % (base, p, ext)
            persist.save_shots(path, errors, syndromes, dict(
                dx=config.dx, dz=config.dz, dm=config.dm, p=p,
                seed=config.seed, hadamard=config.hadamard))
            self.log.info("wrote %d shots at p=%g to %s", config.shots, p,
                          path)


class TrainApp(DecodeLabBase):

    name = 'decodelab-train'
    description = "Train a local decoder network on sampled shots."

    classes = [conv3d_net.TrainingConfig]
    aliases = Dict(_aliases('TrainApp', {
        'dx': 'TrainApp.dx', 'dz': 'TrainApp.dz', 'dm': 'TrainApp.dm',
        'p': 'TrainApp.p', 'samples': 'TrainApp.samples',
        'data-seed': 'TrainApp.data_seed',
        'architecture': 'TrainApp.architecture', 'scale': 'TrainApp.scale',
        'dataset': 'TrainApp.dataset', 'output': 'TrainApp.output',
        'epochs': 'TrainingConfig.epochs',
        'batch-size': 'TrainingConfig.batch_size',
        'lr': 'TrainingConfig.learning_rate',
        'seed': 'TrainingConfig.seed',
    }))

    dx = Integer(5, config=True, help="X distance of the training volume.")
    dz = Integer(5, config=True, help="Z distance of the training volume.")
    dm = Integer(7, config=True, help="Rounds of the training volume.")
    p = Float(5e-3, config=True, help="Training error rate.")
    samples = Integer(10000, config=True, help="Training samples.")
    data_seed = Integer(0, config=True, help="Seed of the sampled shots.")
    architecture = Enum(conv3d_net.ARCHITECTURES, 'six_layer', config=True,
        help="Network architecture."
    )
    scale = Float(1.0, config=True, help="Width multiplier of hidden layers.")
    dataset = Unicode(u'', config=True,
        help="Tensor blob to train on; sampled when empty. A freshly sampled "
             "set is written here when the path does not exist yet."
    )
    output = Unicode(u'net.dclb', config=True, help="Weights file to write.")

    def _training_set(self, layout):
        if self.dataset and os.path.exists(self.dataset):
            meta, inputs, targets = persist.load_tensors(self.dataset)
            self.log.info("loaded %d samples from %s", len(inputs),
                          self.dataset)
            return inputs, targets
        inputs, targets = conv3d_net.make_training_set(
            layout, self.dm, self.p, self.samples, self.data_seed)
        if self.dataset:
            persist.save_tensors(self.dataset, inputs, targets, dict(
                dx=self.dx, dz=self.dz, dm=self.dm, p=self.p,
                seed=self.data_seed,
                channels=syndrome_codec.CHANNEL_ORDER_TAG))
            self.log.info("wrote training set to %s", self.dataset)
        return inputs, targets

    def run(self):
        settings = conv3d_net.TrainingConfig(parent=self)
        layout = code_geometry.build_layout(self.dx, self.dz)
        dataset = self._training_set(layout)
        net = conv3d_net.build_architecture(
            self.architecture, self.scale, seed=settings.seed)
        self.log.info("training %s (%d parameters) on %d samples",
                      net.name, net.parameter_count(), len(dataset[0]))
        net, history = conv3d_net.train(
            net, dataset, settings.epochs, settings.batch_size,
            settings.learning_rate, settings.beta1, settings.beta2,
            settings.seed)
        digest = conv3d_net.save_weights(net, self.output)
        self.log.info("weights sha256 %s", digest)


class InferApp(DecodeLabBase):

    name = 'decodelab-infer'
    description = "Run a trained network on a shot blob."

    aliases = Dict(_aliases('InferApp', {
        'weights': 'InferApp.weights', 'input': 'InferApp.input',
        'output': 'InferApp.output',
    }))

    weights = Unicode(u'net.dclb', config=True, help="Weights file.")
    input = Unicode(u'shots.dclb', config=True, help="Shot blob to decode.")
    output = Unicode(u'', config=True,
        help="Tensor blob for the thresholded corrections."
    )

    def run(self):
        net = conv3d_net.load_weights(self.weights)
        meta, x_errors, z_errors, raw_x, raw_z = persist.load_shots(self.input)
        layout = code_geometry.build_layout(meta['dx'], meta['dz'])
        errors = noise_sampler.ErrorVolume(x_errors, z_errors)
        inputs = syndrome_codec.build_input(
            noise_sampler.SyndromeVolume(raw_x, raw_z), layout,
            dtype=net.dtype)
        targets = syndrome_codec.build_target(errors, layout, dtype=net.dtype)
        outputs = np.concatenate([net.forward(inputs[i:i + 256])
                                  for i in range(0, len(inputs), 256)])
        clipped = np.clip(outputs, 1e-7, 1 - 1e-7)
        bce = -np.mean(targets * np.log(clipped)
                       + (1 - targets) * np.log(1 - clipped))
        corrections = (outputs > conv3d_net.DECISION_THRESHOLD).astype(
            np.uint8)
        accuracy = np.mean(corrections == targets)
        print("samples %d  bce %.6f  bit accuracy %.6f"
              % (len(inputs), bce, accuracy))
        if self.output:
            persist.save_tensors(self.output, corrections, None, dict(
                meta, weights_sha256=persist.file_digest(self.weights)))
            self.log.info("wrote corrections to %s", self.output)


class DecodeApp(DecodeLabBase):

    name = 'decodelab-decode'
    description = "Run the decoding pipeline and report logical error rates."

    classes = [bench_harness.ExperimentConfig]
    aliases = Dict(_aliases('DecodeApp', experiment_aliases))
    flags = Dict(experiment_flags)

    def run(self):
        config = bench_harness.ExperimentConfig(parent=self)
        result = bench_harness.run_experiment(config)
        for point in result.points:
            print("p=%-8g X %.3e [%.3e, %.3e]  Z %.3e [%.3e, %.3e]  "
                  "A_syn %.2f -> %.2f -> %.2f"
                  % ((point.p, point.x_rate) + point.x_ci + (point.z_rate,)
                     + point.z_ci + (point.a_raw, point.a_local,
                                     point.a_sparse)))
        report = bench_harness.complexity_report(result)
        for entry in report['points']:
            self.log.debug("p=%g stage seconds %s", entry['p'],
                           entry['seconds'])
        if config.output_csv:
            bench_harness.write_csv(result, config.output_csv)
        if config.output_manifest:
            bench_harness.write_run_manifest(result, config.output_manifest)
        if config.output_svg:
            plots.render_chart(plots.error_rate_chart([result]),
                               config.output_svg, RESOURCES)


class FitApp(DecodeLabBase):

    name = 'decodelab-fit'
    description = "Fit the logical error rate polynomial to CSV results."

    aliases = Dict(_aliases('FitApp', {
        'input': 'FitApp.inputs', 'pipeline': 'FitApp.pipeline',
        'output': 'FitApp.output',
    }))

    inputs = List(Unicode(), [u'results.csv'], config=True,
        help="CSV result files."
    )
    pipeline = Unicode(u'', config=True,
        help="Only fit rows of this pipeline; all rows when empty."
    )
    output = Unicode(u'', config=True, help="JSON file for the fit.")

    def run(self):
        points = []
        for path in self.inputs:
            for row in bench_harness.read_csv(path):
                if self.pipeline and row['pipeline'] != self.pipeline:
                    continue
                points.append((int(row['dx']), int(row['dm']),
                               float(row['p']), float(row['x_rate'])))
        fit = bench_harness.fit_polynomial(points)
        print("p_L = %.6g * d * dm * (%.6g p)^((d-1)/2)" % (fit.u, fit.b))
        if self.output:
            persist.write_manifest(self.output, {
                'u': fit.u, 'b': fit.b, 'points': len(points),
                'residuals': [float(r) for r in fit.residuals],
            })


class LatencyApp(DecodeLabBase):

    name = 'decodelab-latency'
    description = """
        Buffer times of a decoder feeding lattice surgery, and the distance
        needed for a target logical error rate. Times are in microseconds.
    """

    aliases = Dict(_aliases('LatencyApp', {
        't-s': 'LatencyApp.t_s', 't-l': 'LatencyApp.t_l', 'c': 'LatencyApp.c',
        'r1': 'LatencyApp.r1', 'r2': 'LatencyApp.r2',
        'j-max': 'LatencyApp.j_max', 'windows': 'LatencyApp.windows',
        'poly': 'LatencyApp.decode_poly',
        'p': 'LatencyApp.p', 'delta': 'LatencyApp.delta',
        'u': 'LatencyApp.u', 'b': 'LatencyApp.b',
        'dm': 'LatencyApp.dm_values',
        'csv': 'LatencyApp.output_csv', 'svg': 'LatencyApp.output_svg',
    }))
    flags = Dict({
        'continuous': (
            {'LatencyApp': {'exact': False}},
            "Do not round waiting times up to whole syndrome rounds."
        ),
    })

    t_s = Float(1.4, config=True, help="Microseconds per syndrome round.")
    t_l = Float(20.0, config=True, help="Inbound latency in microseconds.")
    c = Float(1.0, config=True, help="Decode microseconds per round.")
    r1 = Integer(17, config=True, help="Rounds of the first buffer.")
    r2 = Integer(16, config=True, help="Rounds of the surgery measurement.")
    decode_poly = List(Float(), [], config=True,
        help="Decode-time polynomial in rounds (microseconds), highest power "
             "first."
    )
    j_max = Integer(10, config=True, help="Last step of the buffer series.")
    exact = Bool(True, config=True,
        help="Round waiting times up to whole syndrome rounds."
    )
    windows = List(Integer(), [], config=True,
        help="Sliding-window sizes; they must add up to r1 + r2."
    )
    p = Float(1e-3, config=True, help="Physical error rate.")
    delta = List(Float(), [1e-9, 1e-12, 1e-15], config=True,
        help="Target logical error rates of the distance curves."
    )
    u = Float(DEFAULT_U, config=True, help="Rate polynomial prefactor.")
    b = Float(DEFAULT_B, config=True, help="Rate polynomial base.")
    dm_values = List(Integer(), [10, 100, 1000, 10000, 100000], config=True,
        help="Rounds at which to evaluate the distance."
    )
    output_csv = Unicode(u'', config=True, help="CSV of the buffer series.")
    output_svg = Unicode(u'', config=True,
        help="SVG of the buffer series; the distance curves go next to it."
    )

    def latency_config(self, **overrides):
        values = dict(
            t_s=self.t_s * MICROSECOND, t_l=self.t_l * MICROSECOND,
            c=self.c * MICROSECOND, r1=self.r1, r2=self.r2,
            decode_poly=[a * MICROSECOND for a in self.decode_poly])
        values.update(overrides)
        return latency_model.LatencyConfig(**values)

    def run(self):
        cfg = self.latency_config()
        series = latency_model.buffer_time_series(cfg, self.j_max, self.exact)
        for j, seconds in series:
            shown = ('%.3f us' % (seconds / MICROSECOND)
                     if seconds is not None else 'diverged')
            print("j=%-3d T_b=%s" % (j, shown))
        if self.windows:
            seconds = latency_model.sliding_window_buffer(cfg, self.windows)
            print("windows %s: T_b1=%.3f us"
                  % (list(self.windows), seconds / MICROSECOND))
        poly = latency_model.RatePolynomial(self.u, self.b)
        curves = []
        for delta in self.delta:
            distances = latency_model.distance_curve(
                self.dm_values, self.p, delta, poly)
            curves.append(('delta=%g' % delta,
                           list(zip(self.dm_values, distances))))
            print("delta=%g: %s" % (delta, ', '.join(
                'dm=%d d=%d' % pair for pair in curves[-1][1])))
        if self.output_csv:
            persist.MakeDirectoryIfNotExist(os.path.dirname(self.output_csv))
            with open(self.output_csv, 'w', newline='') as f:
                writer = csv.writer(f, lineterminator='\n')
                writer.writerow(['j', 'buffer_us'])
                for j, seconds in series:
                    writer.writerow([j, '' if seconds is None
                                     else seconds / MICROSECOND])
        if self.output_svg:
            plots.render_chart(
                plots.buffer_chart([('c=%g us' % self.c, series)]),
                self.output_svg, RESOURCES)
            base, ext = os.path.splitext(self.output_svg)
            plots.render_chart(plots.distance_chart(curves),
                               base + '_distance' + ext, RESOURCES)


class CompareApp(DecodeLabBase):

    name = 'decodelab-compare'
    description = "Compare trained networks as local decoders per error rate."

    classes = [bench_harness.ExperimentConfig]
    aliases = Dict(_aliases('CompareApp', dict(
        experiment_aliases, weights='CompareApp.weights')))
    flags = Dict(experiment_flags)

    weights = List(Unicode(), [], config=True, help="Weights files to compare.")

    def run(self):
        config = bench_harness.ExperimentConfig(parent=self)
        comparison = bench_harness.compare_models(config, list(self.weights))
        for row in comparison.rows:
            rates = '  '.join('%s X %.3e Z %.3e' % (os.path.basename(m), x, z)
                              for m, (x, z) in zip(comparison.models,
                                                   row['rates']))
            print("p=%-8g %s  best %s" % (row['p'], rates, row['best']))

#-----------------------------------------------------------------------------
# DecodeLabApp
#-----------------------------------------------------------------------------

class DecodeLabApp(DecodeLabBase):

    name = 'decodelab'
    description = """
        Monte Carlo experiments with a local neural-network decoder in front
        of a global matching decoder on the rotated surface code.
    """
    examples = _examples

    aliases = Dict(_aliases('DecodeLabApp'))

    subcommands = Dict(dict(
        simulate=(SimulateApp, SimulateApp.description),
        train=(TrainApp, TrainApp.description),
        infer=(InferApp, InferApp.description),
        decode=(DecodeApp, DecodeApp.description),
        fit=(FitApp, FitApp.description),
        latency=(LatencyApp, "Buffer times and distance curves."),
        compare=(CompareApp, CompareApp.description),
    ))

    def start(self):
        if self.subapp is None:
            self.print_help()
            self.log.critical("a subcommand is required")
            self.exit(1)
        return self.subapp.start()

#-----------------------------------------------------------------------------
# Main entry point
#-----------------------------------------------------------------------------

launch_new_instance = DecodeLabApp.launch_instance
