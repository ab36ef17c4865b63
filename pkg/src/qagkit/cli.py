"""Command-line interface: dataset tooling, evaluation, generation, search, serving."""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .dataset import (
    DatasetError,
    EmptyInput,
    group_by_paragraph,
    load_dataset,
    pairs_per_paragraph,
)
from .gridsearch import CommandTrainer, SearchSpace, run_search
from .metrics import BASE_METRIC_NAMES, get_base_metric
from .pipeline import http_backend, generate_qa, generate_question, stub_backend
from .qaaligned import corpus_qaaligned
from .types import DecodingParams, Paragraph, SUPPORTED_LANGUAGES


@click.group()
def main():
    """Question-answer generation toolkit."""


@main.group()
def dataset():
    """Validate and inspect QG-Bench-format datasets."""


@dataset.command("validate")
@click.argument("path", type=click.Path())
@click.option("--split", default="train", show_default=True)
@click.option("--lenient", is_flag=True, help="Skip invalid lines instead of failing.")
def dataset_validate(path: str, split: str, lenient: bool):
    """Validate every record of a dataset split."""
    try:
        loaded = load_dataset(path, split=split, lenient=lenient)
    except (DatasetError, FileNotFoundError) as exc:
        raise click.ClickException(str(exc))
    click.echo(f"{split}: {len(loaded.records)} valid records")
    if loaded.skipped:
        click.echo(f"{split}: {loaded.skipped} invalid lines skipped")


@dataset.command("stats")
@click.argument("path", type=click.Path())
@click.option("--split", default="test", show_default=True)
@click.option("--lang", default="en", type=click.Choice(SUPPORTED_LANGUAGES))
def dataset_stats(path: str, split: str, lang: str):
    """Report paragraph-group statistics for a split."""
    try:
        loaded = load_dataset(path, split=split)
        groups = group_by_paragraph(loaded, language=lang)
        mean_pairs = pairs_per_paragraph(groups)
    except (DatasetError, FileNotFoundError, EmptyInput) as exc:
        raise click.ClickException(str(exc))
    click.echo(f"records: {len(loaded.records)}")
    click.echo(f"paragraphs: {len(groups)}")
    click.echo(f"pairs per paragraph: {mean_pairs:.1f}")


@main.command("eval")
@click.option("--gold", "gold_path", required=True, type=click.Path())
@click.option("--pred", "pred_path", required=True, type=click.Path())
@click.option("--metric", default="exact_match", type=click.Choice(BASE_METRIC_NAMES), show_default=True)
@click.option("--split", default="test", show_default=True)
@click.option("--lang", default="en", type=click.Choice(SUPPORTED_LANGUAGES))
@click.option("--per-paragraph-tsv", type=click.Path(), default=None,
              help="Also write per-paragraph scores as TSV.")
def eval_command(gold_path, pred_path, metric, split, lang, per_paragraph_tsv):
    """Score predicted QA pairs against gold pairs with the aligned F1."""
    try:
        gold = group_by_paragraph(load_dataset(gold_path, split=split), language=lang)
        pred = group_by_paragraph(load_dataset(pred_path, split=split), language=lang)
    except (DatasetError, FileNotFoundError) as exc:
        raise click.ClickException(str(exc))
    s = get_base_metric(metric, language=lang)
    score = corpus_qaaligned(
        [g for _, g in gold], [g for _, g in pred], s, metric_name=metric
    )
    click.echo(f"F1: {score.f1:.4f}")
    click.echo(f"Precision: {score.precision:.4f}")
    click.echo(f"Recall: {score.recall:.4f}")
    if per_paragraph_tsv:
        with open(per_paragraph_tsv, "w", encoding="utf-8") as fh:
            fh.write("context_id\tf1\tprecision\trecall\n")
            for cid, f1, p, r in score.per_paragraph or ():
                fh.write(f"{cid}\t{f1:.4f}\t{p:.4f}\t{r:.4f}\n")
        click.echo(f"per-paragraph scores written to {per_paragraph_tsv}")


@main.command("generate")
@click.option("--text", default=None, help="Paragraph text on the command line.")
@click.option("--file", "file_path", type=click.Path(), default=None, help="Read the paragraph from a file.")
@click.option("--lang", default="en", type=click.Choice(SUPPORTED_LANGUAGES))
@click.option("--ae-endpoint", default=None)
@click.option("--qg-endpoint", default=None)
@click.option("--answer", default=None, help="Pin the answer and generate a single question.")
@click.option("--beam", default=4, show_default=True)
@click.option("--top-p", default=0.95, show_default=True)
@click.option("--stub", is_flag=True, help="Use the deterministic stub backends.")
def generate_command(text, file_path, lang, ae_endpoint, qg_endpoint, answer, beam, top_p, stub):
    """Generate question-answer pairs for a paragraph."""
    if (text is None) == (file_path is None):
        raise click.UsageError("provide exactly one of --text or --file")
    if file_path is not None:
        text = Path(file_path).read_text(encoding="utf-8")
    if stub:
        ae, qg = stub_backend("ae", lang), stub_backend("qg", lang)
    else:
        if not ae_endpoint or not qg_endpoint:
            raise click.UsageError("--ae-endpoint and --qg-endpoint are required without --stub")
        ae, qg = http_backend(ae_endpoint, language=lang), http_backend(qg_endpoint, language=lang)
    try:
        params = DecodingParams(beam_size=beam, top_p=top_p)
        paragraph = Paragraph(text=text, language=lang)
        if answer is not None:
            from .metrics import lexical_overlap_score

            question = generate_question(paragraph, answer, qg, params)
            rows = [{"question": question, "answer": answer,
                     "overlap": lexical_overlap_score(question, paragraph.text)}]
        else:
            result = generate_qa(paragraph, ae, qg, params)
            rows = [
                {"question": pair.question, "answer": pair.answer, "overlap": diag.overlap_score}
                for pair, diag in zip(result.pairs, result.diagnostics)
            ]
    except Exception as exc:
        raise click.ClickException(str(exc))
    click.echo(json.dumps(rows, ensure_ascii=False, indent=2))


@main.command("search")
@click.option("--space", "space_path", required=True, type=click.Path())
@click.option("--trainer-cmd", required=True, help="Command template invoked per train/evaluate call.")
@click.option("--epochs", default=10, show_default=True)
@click.option("--epoch-partial", default=2, show_default=True)
@click.option("--n-max-config", default=3, show_default=True)
@click.option("--extension-cap", default=10, show_default=True)
@click.option("--dir", "search_dir", required=True, type=click.Path())
@click.option("--workers", default=1, show_default=True)
def search_command(space_path, trainer_cmd, epochs, epoch_partial, n_max_config,
                   extension_cap, search_dir, workers):
    """Run (or resume) a two-stage hyperparameter search."""
    axes = json.loads(Path(space_path).read_text(encoding="utf-8"))
    space = SearchSpace.from_dict(axes)
    trainer = CommandTrainer(trainer_cmd, workdir=Path(search_dir) / "checkpoints")
    try:
        result = run_search(
            space, trainer, epochs=epochs, epoch_partial=epoch_partial,
            n_max_config=n_max_config, extension_cap=extension_cap,
            search_dir=search_dir, workers=workers,
        )
    except Exception as exc:
        raise click.ClickException(str(exc))
    click.echo(f"best config: {json.dumps(result.best_trial.config)}")
    click.echo(f"best score: {result.best_score}")
    click.echo(f"best checkpoint: {result.best_checkpoint}")


@main.command("serve")
@click.option("--config", default=None, type=click.Path(), help="Model registry (TOML or JSON).")
@click.option("--host", default="0.0.0.0", show_default=True)
@click.option("--port", default=8080, show_default=True)
@click.option("--max-concurrent", default=64, show_default=True)
def serve_command(config, host, port, max_concurrent):
    """Serve the REST API (QAGKIT_CONFIG / QAGKIT_PORT env vars take precedence)."""
    from .service import serve

    serve(config=config, host=host, port=port, max_concurrent_requests=max_concurrent)


if __name__ == "__main__":
    sys.exit(main())
