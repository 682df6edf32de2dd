"""Command-line entry point.

Subcommands: fbk, svd, train-embed, extract, smooth, concat, tsne, toy-adapt,
pipeline. Every subcommand takes --config, --seed and --out. Exit codes:
0 success, 1 validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from stembed import embednet, pipeline, smoothing, viz
from stembed.archive import read_archive, write_archive
from stembed.frontend import ManifestError, parse_manifest
from stembed.pipeline import ConfigError, PipelineConfig

_VALIDATION_ERRORS = (ConfigError, ManifestError, ValueError,
                      embednet.ConfigurationError, embednet.DataError,
                      smoothing.DataError, FileNotFoundError,
                      viz.DegenerateInputError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def _build_parser():
    parser = _Parser(prog="stembed",
                     description="Spectro-temporal subspace embedding toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "fbk": "compute log-mel filter-bank archives",
        "svd": "compute SVD basis-feature archives",
        "train-embed": "train the bottleneck embedding classifier",
        "extract": "extract utterance-level bottleneck embeddings",
        "smooth": "smooth utterance embeddings to speaker level",
        "concat": "append speaker embeddings to acoustic feature archives",
        "tsne": "project speaker embeddings to 2-D and plot",
        "toy-adapt": "run the synthetic adaptation experiment",
        "pipeline": "run the full extraction pipeline",
    }
    for name, help_text in commands.items():
        p = sub.add_parser(name, help=help_text, parents=[], add_help=True)
        p.add_argument("--config", required=(name != "toy-adapt"),
                       help="key=value pipeline config file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--out", required=True, help="output directory")
    return parser


def _load_cfg(args):
    if args.config is None:
        cfg = PipelineConfig()
    else:
        cfg = PipelineConfig.from_file(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _cmd_fbk(cfg, out):
    manifest = parse_manifest(cfg.manifest)
    specs = pipeline.compute_fbk(manifest, cfg)
    write_archive(os.path.join(out, "fbk.ark"),
                  {u: s.values.T for u, s in specs.items()},
                  "fbk", cfg.channels, cfg.influencing_hash())


def _cmd_svd(cfg, out):
    manifest = parse_manifest(cfg.manifest)
    feats = pipeline.compute_features(pipeline.compute_fbk(manifest, cfg), cfg)
    dim = next(iter(feats.values())).dim
    write_archive(os.path.join(out, "features.ark"),
                  {u: f.vector for u, f in feats.items()},
                  pipeline._kind_tag(cfg.feature_kind), dim, cfg.influencing_hash())


def _train(cfg):
    manifest = parse_manifest(cfg.manifest)
    feats = pipeline.compute_features(pipeline.compute_fbk(manifest, cfg), cfg)
    net, log = pipeline.train_network(manifest, feats, cfg)
    return manifest, feats, net, log


def _cmd_train_embed(cfg, out):
    _, _, net, log = _train(cfg)
    net.save(os.path.join(out, "embednet.npz"))
    embednet.write_training_log(log, os.path.join(out, "train.log"))


def _cmd_extract(cfg, out):
    manifest = parse_manifest(cfg.manifest)
    feats = pipeline.compute_features(pipeline.compute_fbk(manifest, cfg), cfg)
    if cfg.model_path:
        net = embednet.EmbeddingNetwork.load(cfg.model_path)
    else:
        net, _ = pipeline.train_network(manifest, feats, cfg)
    embeddings = pipeline.extract_embeddings(net, feats)
    write_archive(os.path.join(out, "embeddings.ark"), embeddings,
                  "embedding", embednet.BOTTLENECK_DIM, cfg.influencing_hash())


def _cmd_smooth(cfg, out):
    manifest = parse_manifest(cfg.manifest)
    if not cfg.input_archive:
        raise ConfigError("smooth requires input_archive= (utterance embedding archive)")
    entries, header = read_archive(cfg.input_archive)
    embeddings = {u: m[0] for u, m in entries.items()}
    speakers = pipeline.smooth_embeddings(manifest, embeddings, cfg)
    dim = speakers[0].vector.size
    write_archive(os.path.join(out, "speakers.ark"),
                  {s.speaker_id: s.vector for s in speakers},
                  f"speaker-{cfg.smoothing}", dim, cfg.influencing_hash())


def _cmd_concat(cfg, out):
    if not cfg.acoustic_archive or not cfg.speaker_archive:
        raise ConfigError("concat requires acoustic_archive= and speaker_archive=")
    manifest = parse_manifest(cfg.manifest)
    spk_of = {e.utterance_id: e.speaker_id for e in manifest.entries}
    acoustic, a_header = read_archive(cfg.acoustic_archive)
    speakers, _ = read_archive(cfg.speaker_archive)
    adapted = {}
    for utt, mat in acoustic.items():
        speaker = spk_of.get(utt)
        if speaker is None or speaker not in speakers:
            raise ManifestError(f"no speaker embedding for utterance {utt!r}")
        adapted[utt] = pipeline.concat_aux(mat, speakers[speaker][0])
    dim = next(iter(adapted.values())).shape[1]
    write_archive(os.path.join(out, "adapted.ark"), adapted,
                  a_header.get("kind", "fbk") + "+aux", dim, cfg.influencing_hash())


def _cmd_tsne(cfg, out):
    if not cfg.input_archive:
        raise ConfigError("tsne requires input_archive= (speaker embedding archive)")
    entries, _ = read_archive(cfg.input_archive)
    ids = list(entries)
    points = np.stack([entries[k][0] for k in ids])
    groups = [""] * len(ids)
    if cfg.manifest:
        manifest = parse_manifest(cfg.manifest)
        by_spk = {}
        for e in manifest.entries:
            by_spk[e.speaker_id] = e.age_label or e.severity_label or ""
        groups = [by_spk.get(s, "") for s in ids]
    result = viz.tsne_project(points, perplexity=cfg.tsne_perplexity,
                              seed=cfg.seed, iters=cfg.tsne_iters,
                              groups=groups, speaker_ids=ids)
    viz.emit_plot(result, os.path.join(out, "tsne.svg"))


def _cmd_toy_adapt(cfg, out):
    report = pipeline.toy_adaptation_experiment(seed=cfg.seed)
    with open(os.path.join(out, "toy_report.txt"), "w", encoding="utf-8") as fh:
        fh.write(pipeline.format_toy_report(report))


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        cfg = _load_cfg(args)
        os.makedirs(args.out, exist_ok=True)
        handler = {
            "fbk": _cmd_fbk,
            "svd": _cmd_svd,
            "train-embed": _cmd_train_embed,
            "extract": _cmd_extract,
            "smooth": _cmd_smooth,
            "concat": _cmd_concat,
            "tsne": _cmd_tsne,
            "toy-adapt": _cmd_toy_adapt,
            "pipeline": lambda c, o: pipeline.run_extract(c, o),
        }[args.command]
        handler(cfg, args.out)
    except _VALIDATION_ERRORS as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except Exception as exc:  # runtime failure
        sys.stderr.write(f"runtime failure: {type(exc).__name__}: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
