"""Command line front end.

Every subcommand reads one JSON config file; flags override single fields.
Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from . import pipeline, vae
from .encodings import EncodingId
from .errors import DataError, NumericError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


def _config(ctx) -> pipeline.ExperimentConfig:
    opts = ctx.obj
    doc = {}
    if opts.get("config"):
        try:
            doc = json.loads(Path(opts["config"]).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise DataError("config must be a JSON object")
    for name in ("corpus_dir", "encoding_id", "segment_length", "split_ratio", "seed",
                 "output_dir", "workers"):
        if opts.get(name) is not None:
            doc[name] = opts[name]
    train = dict(doc.get("train", {}))
    for name in ("epochs", "batch_size", "hidden_dim", "latent_dim"):
        if opts.get(name) is not None:
            train[name] = opts[name]
    doc["train"] = train
    try:
        return pipeline.ExperimentConfig.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise click.UsageError(f"bad config: {exc}") from exc


@click.group()
@click.option("--config", "config", type=click.Path(exists=True, dir_okay=False), help="JSON config file.")
@click.option("--corpus-dir", type=click.Path(file_okay=False))
@click.option("--encoding", "encoding_id", type=click.Choice([e.value for e in EncodingId]))
@click.option("--segment-length", type=int)
@click.option("--split-ratio", type=float)
@click.option("--seed", type=int)
@click.option("--output-dir", type=click.Path(file_okay=False))
@click.option("--workers", type=int)
@click.option("--epochs", type=int)
@click.option("--batch-size", type=int)
@click.option("--hidden-dim", type=int)
@click.option("--latent-dim", type=int)
@click.option("-v", "--verbose", is_flag=True)
@click.pass_context
def cli(ctx, verbose, **opts):
    """Encode chorales, train a VAE and measure key structure in its latent space."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")
    ctx.obj = opts


@cli.command()
@click.pass_context
def ingest(ctx):
    """Parse the corpus and write the train/test split."""
    cfg = _config(ctx)
    pieces = pipeline.load_corpus(cfg.corpus_dir, cfg.resolution)
    train, test = pipeline.split_dataset(pieces, cfg.split_ratio, cfg.seed)
    out = pipeline.Paths(cfg.output_dir)
    out.root.mkdir(parents=True, exist_ok=True)
    out.split.write_text(json.dumps({"train": [p.piece_id for p in train],
                                     "test": [p.piece_id for p in test]}, indent=1) + "\n")
    click.echo(f"{len(pieces)} pieces: {len(train)} train, {len(test)} test -> {out.split}")


def _split(cfg):
    pieces = {p.piece_id: p for p in pipeline.load_corpus(cfg.corpus_dir, cfg.resolution)}
    out = pipeline.Paths(cfg.output_dir)
    if out.split.exists():
        doc = json.loads(out.split.read_text())
        try:
            return [pieces[i] for i in doc["train"]], [pieces[i] for i in doc["test"]]
        except KeyError as exc:
            raise DataError(f"split file names an unknown piece {exc}") from exc
    return pipeline.split_dataset(list(pieces.values()), cfg.split_ratio, cfg.seed)


@cli.command()
@click.pass_context
def encode(ctx):
    """Encode all 12 transpositions of the training pieces into the tensor cache."""
    cfg = _config(ctx)
    train, _ = _split(cfg)
    out = pipeline.Paths(cfg.output_dir)
    out.root.mkdir(parents=True, exist_ok=True)
    cache = pipeline.build_cache(train, cfg.encoding_id, cfg.segment_length, cfg.workers)
    cache.save(out.cache)
    click.echo(f"{len(cache.entries)} entries -> {out.cache}")


@cli.command()
@click.pass_context
def train(ctx):
    """Train the VAE on the tensor cache and write a checkpoint."""
    cfg = _config(ctx)
    out = pipeline.Paths(cfg.output_dir)
    if not out.cache.exists():
        raise DataError(f"no tensor cache at {out.cache}; run 'encode' first")
    cache = pipeline.TensorCache.load(out.cache)
    if cache.encoding_id != cfg.encoding_id:
        raise DataError(f"cache holds {cache.encoding_id.value}, config asks for {cfg.encoding_id.value}")
    params, history = pipeline.train_from_cache(cache, cfg.train)
    vae.save_checkpoint(out.checkpoint, params, cfg.encoding_id)
    pipeline.write_history(history, out.history)
    last = history[-1].total if history else float("nan")
    click.echo(f"{len(history)} epochs, final loss {last:.6g} -> {out.checkpoint}")


def _load_params(cfg):
    out = pipeline.Paths(cfg.output_dir)
    if not out.checkpoint.exists():
        raise DataError(f"no checkpoint at {out.checkpoint}; run 'train' first")
    params, enc = vae.load_checkpoint(out.checkpoint)
    if enc != cfg.encoding_id:
        raise DataError(f"checkpoint is for {enc.value}, config asks for {cfg.encoding_id.value}")
    return params


@cli.command("eval")
@click.option("--no-plots", is_flag=True, help="Skip the SVG scatter plots.")
@click.pass_context
def eval_(ctx, no_plots):
    """Embed the test pieces' transpositions and write metrics CSVs."""
    cfg = _config(ctx)
    _, test = _split(cfg)
    params = _load_params(cfg)
    reports, points = pipeline.evaluate(test, params, cfg.encoding_id, cfg.segment_length, cfg.workers)
    recon = pipeline.test_reconstruction(test, params, cfg.encoding_id, cfg.segment_length)
    out = pipeline.Paths(cfg.output_dir)
    pipeline.write_outputs(out, reports, points, recon, cfg.encoding_id, plot=not no_plots)
    for r in reports:
        click.echo(f"{r.piece_id}: tau={r.tau:+.3f} dunn={r.dunn:.4g} db={r.davies_bouldin:.4g}")
    click.echo(f"metrics -> {out.metrics}")


@cli.command()
@click.pass_context
def plot(ctx):
    """Redraw scatter plots from saved latent points."""
    from .plot import render_scatter

    cfg = _config(ctx)
    out = pipeline.Paths(cfg.output_dir)
    if not out.points.exists():
        raise DataError(f"no latent points at {out.points}; run 'eval' first")
    points = pipeline.points_from_json(json.loads(out.points.read_text()))
    out.plots.mkdir(parents=True, exist_ok=True)
    by_piece: dict = {}
    for p in points:
        by_piece.setdefault(p.piece_id, []).append(p)
    for pid in sorted(by_piece):
        render_scatter(by_piece[pid], out.plots / f"{pid}.svg", title=pid)
    click.echo(f"{len(by_piece)} plots -> {out.plots}")


@cli.command()
@click.option("--no-plots", is_flag=True)
@click.pass_context
def run(ctx, no_plots):
    """ingest, encode, train and eval in one go."""
    cfg = _config(ctx)
    result = pipeline.run_experiment(cfg, plot=not no_plots)
    acc, mse, kl, n = result.reconstruction
    click.echo(f"test reconstruction over {n} segments: accuracy={acc:.2f}% mse={mse:.4g} kl={kl:.4g}")
    click.echo(f"outputs -> {cfg.output_dir}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="tonalvae", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        return EXIT_DATA
    except NumericError as exc:
        click.echo(f"numeric error: {exc}", err=True)
        return EXIT_NUMERIC
    except OSError as exc:
        click.echo(f"data error: {exc}", err=True)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
