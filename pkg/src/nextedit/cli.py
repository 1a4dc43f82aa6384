"""Command-line interface.

  nextedit represent      enriched labelling of a unified diff (stdin)
  nextedit mine           mine commits from a local git checkout
  nextedit build-dataset  locator / generator / invoker benchmark files
  nextedit locate         rank windows for a session
  nextedit generate       candidates for a labelled target
  nextedit invoker-eval   invoker metrics on a benchmark file
  nextedit simulate       commit-replay simulation over mined commits
  nextedit serve          JSON-RPC endpoint for editor clients
"""
from __future__ import annotations

import json
import sys
from pathlib import Path
from random import Random

import click

from .core import EditSession, Project
from .enrich import enrich, render_enriched, short_labels
from .errors import NextEditError
from .generator import GenerationQuery, generate as generate_candidates
from .invoker import InvokerSample, build_invoker_benchmark, evaluate_invoker
from .locator import CloneLocatorBackend, LocatorQuery, predict_labels, select_prior_edits, slice_windows
from .mining import (
    GitRepo,
    MiningFilters,
    build_generator_dataset,
    build_locator_dataset,
    mine_commits,
    split_records,
    write_jsonl,
    write_manifest,
)
from .pipeline import EngineConfig
from .serve import EngineServer
from .simulate import SimConfig, aggregate, simulate_commit
from .textdiff import parse_unified_diff


@click.group()
def main():
    """Project-wide next-edit prediction engine."""


@main.command()
@click.option("--language", default="python", show_default=True)
@click.option("--json", "as_json", is_flag=True, help="emit JSON instead of the text encoding")
def represent(language: str, as_json: bool):
    """Read a unified diff on stdin, emit the enriched labelling per hunk."""
    hunks = parse_unified_diff(sys.stdin.read())
    for h in hunks:
        e = enrich(h, language)
        if as_json:
            click.echo(
                json.dumps(
                    {
                        "file": h.file,
                        "old_start": h.old_start,
                        "inline": list(e.inline_labels),
                        "inter": list(e.inter_labels),
                        "short": short_labels(e.inline_labels) + "/" + short_labels(e.inter_labels),
                    }
                )
            )
        else:
            click.echo(render_enriched(e), nl=False)


@main.command()
@click.option("--repo", "repos", multiple=True, required=True, type=click.Path(exists=True))
@click.option("--language", default="python", show_default=True)
@click.option("--min-hunks", default=2, show_default=True)
@click.option("--max-hunks", default=50, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def mine(repos, language, min_hunks, max_hunks, out):
    """Mine commit records from local git checkouts into JSON Lines."""
    filters = MiningFilters(min_hunks=min_hunks, max_hunks=max_hunks)
    records = []
    for repo in repos:
        records.extend(mine_commits(repo, language, filters))
    write_jsonl(out, records)
    click.echo(f"mined {len(records)} commits from {len(repos)} repos -> {out}")


@main.command("build-dataset")
@click.option("--records", "records_path", type=click.Path(exists=True), required=True)
@click.option("--task", type=click.Choice(["locator", "generator", "invoker"]), required=True)
@click.option("--out-dir", type=click.Path(), required=True)
@click.option("--seed", default=0, show_default=True)
def build_dataset(records_path, task, out_dir, seed):
    """Split mined records by project and build per-task benchmark files."""
    from .mining import CommitRecord

    records = [
        CommitRecord.from_json(json.loads(line))
        for line in Path(records_path).read_text().splitlines()
        if line.strip()
    ]
    splits = split_records(records, seed=seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(out / "manifest.json", splits, seed, MiningFilters())
    for name, recs in splits.items():
        if task == "locator":
            rows = build_locator_dataset(recs)
        elif task == "generator":
            rows = build_generator_dataset(recs)
        else:
            rng = Random(seed)
            rows = []
            for record in recs:
                project = Project(files=dict(record.pre_files), language=record.language)
                rows.extend(build_invoker_benchmark(record, project, rng=rng))
        write_jsonl(out / f"{task}.{name}.jsonl", rows)
        click.echo(f"{name}: {len(rows)} samples")


@main.command()
@click.option("--project-dir", type=click.Path(exists=True), required=True)
@click.option("--session", "session_path", type=click.Path(exists=True), required=True)
@click.option("--language", default="python", show_default=True)
@click.option("--backend", default="clone_baseline", show_default=True)
@click.option("--window-size", default=20, show_default=True)
@click.option("--stride", default=10, show_default=True)
def locate(project_dir, session_path, language, backend, window_size, stride):
    """Rank edit-labelled windows for a session (JSON per window)."""
    if backend != "clone_baseline":
        raise click.UsageError("only the clone_baseline backend ships built in")
    project = _load_project(project_dir, language)
    session = EditSession.from_jsonl(Path(session_path).read_text(), project_root=project_dir)
    locator = CloneLocatorBackend()
    rows = []
    for window in slice_windows(project, window_size, stride):
        priors = select_prior_edits(window, session, k=3)
        labels = predict_labels(LocatorQuery(window=window, priors=tuple(priors)), locator)
        if labels.has_edit():
            rows.append(
                {
                    "file": window.file,
                    "span": list(window.span),
                    "inline": list(labels.inline),
                    "inter": list(labels.inter),
                    "score": labels.window_score(),
                }
            )
    rows.sort(key=lambda r: -r["score"])
    click.echo(json.dumps(rows, indent=2))


@main.command("generate")
@click.option("--target", "target_path", type=click.Path(exists=True), required=True,
              help="file with the pre-edit target lines")
@click.option("--session", "session_path", type=click.Path(exists=True), required=True)
@click.option("--language", default="python", show_default=True)
@click.option("--k", default=10, show_default=True)
def generate_cmd(target_path, session_path, language, k):
    """Candidates for a target region from the session's prior edits."""
    target = tuple(Path(target_path).read_text().splitlines())
    session = EditSession.from_jsonl(Path(session_path).read_text())
    query = GenerationQuery(target_lines=target, priors=session.prior_edits, language=language)
    for cand in generate_candidates(query, k=k):
        click.echo(json.dumps({"rank": cand.rank, "score": cand.score, "post_code": list(cand.post_code)}))


@main.command("invoker-eval")
@click.option("--samples", "samples_path", type=click.Path(exists=True), required=True)
@click.option("--backend", type=click.Choice(["heuristic", "blind", "random"]), default="heuristic",
              show_default=True)
@click.option("--seed", default=0, show_default=True)
def invoker_eval(samples_path, backend, seed):
    """Macro precision/recall/F1 of an invoker backend on a benchmark file."""
    from .textdiff import Hunk

    samples = []
    for line in Path(samples_path).read_text().splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        samples.append(
            InvokerSample(
                target_hunk=Hunk.from_json(obj["target_hunk"]),
                background_hunks=tuple(Hunk.from_json(h) for h in obj["background_hunks"]),
                label=frozenset(obj["label"]),
                language=obj["language"],
                project_files={p: tuple(ls) for p, ls in obj.get("project_files", {}).items()},
            )
        )
    click.echo(json.dumps(evaluate_invoker(samples, backend=backend, seed=seed), indent=2))


@main.command("invoker-bench")
@click.option("--records", "records_path", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--samples-per-commit", default=1, show_default=True)
def invoker_bench(records_path, out, seed, samples_per_commit):
    """Synthesize invoker samples from mined records (partial-commit replay)."""
    from .mining import CommitRecord

    rng = Random(seed)
    rows = []
    for line in Path(records_path).read_text().splitlines():
        if not line.strip():
            continue
        record = CommitRecord.from_json(json.loads(line))
        project = Project(files=dict(record.pre_files), language=record.language)
        rows.extend(
            build_invoker_benchmark(record, project, rng=rng, samples_per_commit=samples_per_commit)
        )
    write_jsonl(out, rows)
    click.echo(f"{len(rows)} invoker samples -> {out}")


@main.command()
@click.option("--repo", "repos", multiple=True, required=True, type=click.Path(exists=True))
@click.option("--commits", default="", help="comma-separated commit ids; default: all minable")
@click.option("--language", default="python", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--backend-locator", type=click.Choice(["clone", "ccd"]), default="clone",
              show_default=True, help="ccd = unranked clone detector, invoker off")
@click.option("--backend-generator", type=click.Choice(["template"]), default="template",
              show_default=True)
@click.option("--no-invoker", is_flag=True, help="blindly skip composition detection")
@click.option("--timed/--untimed", default=True, show_default=True,
              help="--untimed zeroes latency so reports are byte-stable")
@click.option("--out", type=click.Path(), required=True)
@click.option("--trace", type=click.Path(), default=None, help="per-step JSONL trace")
def simulate(repos, commits, language, seed, backend_locator, backend_generator,
             no_invoker, timed, out, trace):
    """Replay commits and report MR@K, latency, BLEU bands, acceptance@K."""
    import time

    ccd = backend_locator == "ccd"
    engine = EngineConfig(invoker_mode="off" if (ccd or no_invoker) else "heuristic")
    config = SimConfig(
        engine=engine,
        seed=seed,
        ccd_only=ccd,
        timer=time.perf_counter if timed else None,
    )
    wanted = {c.strip() for c in commits.split(",") if c.strip()}
    reports = []
    for repo in repos:
        shas = [s for s in GitRepo(repo).commits() if not wanted or s in wanted]
        for sha in shas:
            try:
                reports.append(simulate_commit(repo, sha, language, config))
            except (NextEditError, ValueError) as exc:
                click.echo(f"skip {sha[:10]}: {exc}", err=True)
    if not reports:
        raise click.ClickException("no commit could be simulated")
    report = aggregate(reports)
    Path(out).write_bytes(report.to_bytes() + b"\n")
    if trace:
        with open(trace, "w", encoding="utf-8") as fh:
            for c in reports:
                for s in c.steps:
                    fh.write(json.dumps({"commit": c.commit_id, **s.to_json()}) + "\n")
    click.echo(json.dumps({k: v for k, v in report.to_json().items() if k != "commits"}, indent=2))


@main.command()
@click.option("--stdio", "transport", flag_value="stdio", default=True)
@click.option("--port", type=int, default=None, help="serve one TCP connection instead of stdio")
def serve(transport, port):
    """Serve the engine over newline-delimited JSON-RPC."""
    server = EngineServer()
    if port is not None:
        server.serve_socket(port=port)
    else:
        server.serve_stdio()


def _load_project(root: str, language: str) -> Project:
    from .core import LANGUAGE_EXTENSIONS

    texts = {}
    base = Path(root)
    for path in base.rglob("*"):
        if path.is_file() and path.suffix in LANGUAGE_EXTENSIONS[language]:
            texts[path.relative_to(base).as_posix()] = path.read_text(encoding="utf-8")
    return Project.from_texts(texts, language=language)


if __name__ == "__main__":
    main()
