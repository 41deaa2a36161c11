"""Command-line entry point.

stdout carries data only; diagnostics go to stderr as JSON lines. Exit
codes: 0 success, 1 input error, 2 backend error.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path
from typing import Iterator, TextIO

import click

from . import compose as compose_mod
from .config import Config, ConfigError, load_config
from .evaluate import METRICS, EvalError, evaluate
from .mixtures import MixtureEntry, MixtureSpec, RecordError, TaskRecord, build_manifest, compute_weights, read_records, sample_mixture
from .patching import compute_grid, fixed_grid
from .render import render_svg
from .schema import PixelBox, SchemaError, parse_schema, serialize_schema
from .taskgen import TEMPLATES, FileStubBackend, GenerationItem, GenerationStats, HttpBackend, generate_dataset

EXIT_INPUT = 1
EXIT_BACKEND = 2


def diag(**fields) -> None:
    click.echo(json.dumps(fields, ensure_ascii=False, sort_keys=True), err=True)


class _JsonLogFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        return json.dumps({"level": record.levelname.lower(), "logger": record.name,
                           "message": record.getMessage()}, ensure_ascii=False)


def _setup_logging() -> None:
    root = logging.getLogger("screentk")
    if not any(getattr(h, "_screentk", False) for h in root.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(_JsonLogFormatter())
        handler._screentk = True
        root.addHandler(handler)
        root.setLevel(logging.INFO)
        root.propagate = False
    # CliRunner swaps sys.stderr per invocation
    for h in root.handlers:
        if getattr(h, "_screentk", False):
            h.setStream(sys.stderr)


def _jsonl(stream: TextIO, source: str) -> Iterator[tuple[int, dict | None, str | None]]:
    """(line number, object or None, error or None) for each non-blank line."""
    for lineno, line in enumerate(stream, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            yield lineno, None, f"malformed JSON: {e}"
            continue
        if not isinstance(obj, dict):
            yield lineno, None, "line is not a JSON object"
            continue
        yield lineno, obj, None


class _Group(click.Group):
    """Maps click usage errors to exit code 1 (2 is reserved for backends)."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            return super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        except click.ClickException as e:
            e.show()
            sys.exit(EXIT_INPUT)
        except click.Abort:
            sys.exit(EXIT_INPUT)


@click.group(cls=_Group)
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON config file.")
@click.option("--seed", type=int, help="Seed for every random choice.")
@click.option("--backend-url", help="Completion endpoint (overrides config and environment).")
@click.option("--order", type=click.Choice(["yxyx", "xyxy"]), help="Box coordinate order in schema text.")
@click.pass_context
def cli(ctx, config_path, seed, backend_url, order):
    """Screen schema, patching, task generation, mixture and evaluation tools."""
    _setup_logging()
    try:
        ctx.obj = load_config(config_path, seed=seed, backend_url=backend_url, coord_order=order)
    except (ConfigError, OSError, TypeError) as e:
        diag(error="config", message=str(e))
        sys.exit(EXIT_INPUT)


# -- schema -----------------------------------------------------------------


@cli.group()
def schema():
    """Validate, format or render schema text files."""


def _read_schema(path: str, cfg: Config):
    text = sys.stdin.read() if path == "-" else Path(path).read_text(encoding="utf-8")
    return parse_schema(text, order=cfg.coord_order)


@schema.command("validate")
@click.argument("files", nargs=-1, required=True)
@click.pass_obj
def schema_validate(cfg: Config, files):
    """Exit 0 if every file parses; report the first error of each bad file."""
    bad = 0
    for path in files:
        try:
            _read_schema(path, cfg)
        except SchemaError as e:
            diag(file=path, **e.to_dict())
            bad += 1
        except OSError as e:
            diag(file=path, kind="io", offset=None, message=str(e))
            bad += 1
    sys.exit(EXIT_INPUT if bad else 0)


@schema.command("fmt")
@click.argument("file")
@click.pass_obj
def schema_fmt(cfg: Config, file):
    """Print the canonical form of a schema."""
    try:
        s = _read_schema(file, cfg)
    except (SchemaError, OSError) as e:
        diag(file=file, **(e.to_dict() if isinstance(e, SchemaError) else {"kind": "io", "message": str(e)}))
        sys.exit(EXIT_INPUT)
    click.echo(serialize_schema(s, order=cfg.coord_order))


@schema.command("render")
@click.argument("file")
@click.option("--width", type=click.IntRange(min=1), default=1000, show_default=True)
@click.option("--height", type=click.IntRange(min=1), default=1000, show_default=True)
@click.pass_obj
def schema_render(cfg: Config, file, width, height):
    """Write an SVG overlay of the schema boxes."""
    try:
        s = _read_schema(file, cfg)
    except (SchemaError, OSError) as e:
        diag(file=file, **(e.to_dict() if isinstance(e, SchemaError) else {"kind": "io", "message": str(e)}))
        sys.exit(EXIT_INPUT)
    click.echo(render_svg(s, width, height), nl=False)


# -- compose ----------------------------------------------------------------


def _pixel_box(values) -> PixelBox:
    ymin, xmin, ymax, xmax = (float(v) for v in values)
    return PixelBox(ymin, xmin, ymax, xmax)


def _compose_line(obj: dict):
    width, height = obj["width"], obj["height"]
    dets = [compose_mod.Detection(d["class"], _pixel_box(d["box"]), float(d.get("score", 1.0)))
            for d in obj.get("detections", [])]
    words = [compose_mod.OcrWord(w["text"], _pixel_box(w["box"])) for w in obj.get("ocr_words", [])]
    caps = [compose_mod.CaptionAnnotation(c["text"], _pixel_box(c["box"])) for c in obj.get("captions", [])]
    return compose_mod.compose_schema(dets, words, caps, width, height)


@cli.command()
@click.argument("input", type=click.File("r", encoding="utf-8"), default="-")
@click.pass_obj
def compose(cfg: Config, input):
    """Annotation JSONL -> schema JSONL, one line per image."""
    failed = 0
    for lineno, obj, err in _jsonl(input, input.name):
        if err is None:
            try:
                s = _compose_line(obj)
            except (KeyError, TypeError, ValueError) as e:
                err = f"{type(e).__name__}: {e}"
        if err is not None:
            diag(line=lineno, error="compose", message=err)
            failed += 1
            continue
        click.echo(json.dumps({
            "image_ref": obj.get("image_ref"),
            "width": obj["width"],
            "height": obj["height"],
            "schema": serialize_schema(s, order=cfg.coord_order),
        }, ensure_ascii=False))
    sys.exit(EXIT_INPUT if failed else 0)


# -- patch ------------------------------------------------------------------


@cli.command()
@click.argument("input", type=click.File("r", encoding="utf-8"), default="-")
@click.option("--fixed", is_flag=True, help="Fixed square grid instead of the aspect-preserving one.")
def patch(input, fixed):
    """Dims JSONL {width,height,patch,budget} -> grid JSONL."""
    failed = 0
    for lineno, obj, err in _jsonl(input, input.name):
        if err is None:
            try:
                if fixed:
                    g = fixed_grid(int(obj["patch"]), int(obj["budget"]))
                else:
                    g = compute_grid(int(obj["width"]), int(obj["height"]), int(obj["patch"]), int(obj["budget"]))
            except (KeyError, TypeError, ValueError) as e:
                err = f"{type(e).__name__}: {e}"
        if err is not None:
            diag(line=lineno, error="patch", message=err)
            failed += 1
            continue
        click.echo(json.dumps(g.to_dict()))
    sys.exit(EXIT_INPUT if failed else 0)


# -- generate ---------------------------------------------------------------


def _generation_items(paths, cfg: Config, failures: list) -> Iterator[GenerationItem]:
    for path in paths:
        p = Path(path)
        if p.suffix == ".jsonl":
            with open(p, encoding="utf-8") as fh:
                for lineno, obj, err in _jsonl(fh, path):
                    if err is None:
                        try:
                            schema_obj = parse_schema(obj["schema"], order=cfg.coord_order) if "schema" in obj else None
                            yield GenerationItem(str(obj["image_ref"]), schema_obj, dict(obj.get("params", {})))
                            continue
                        except (KeyError, TypeError, ValueError) as e:
                            err = f"{type(e).__name__}: {e}"
                    diag(file=path, line=lineno, error="input", message=err)
                    failures.append(path)
        else:
            try:
                s = parse_schema(p.read_text(encoding="utf-8"), order=cfg.coord_order)
            except (SchemaError, OSError) as e:
                diag(file=path, error="input", message=str(e))
                failures.append(path)
                continue
            yield GenerationItem(p.name, s)


@cli.command()
@click.argument("inputs", nargs=-1, required=True)
@click.option("--template", "template_name", type=click.Choice(sorted(TEMPLATES)), required=True)
@click.option("--stub", type=click.Path(exists=True, dir_okay=False), help="File of canned responses keyed by request hash.")
@click.option("--num-samples", type=click.IntRange(min=1), help="Value for the navigation template.")
@click.option("--stats", "stats_path", type=click.Path(dir_okay=False), help="Also write stats JSON here.")
@click.pass_obj
def generate(cfg: Config, inputs, template_name, stub, num_samples, stats_path):
    """Schemas (text files or JSONL) -> TaskRecord JSONL via an LLM backend."""
    if stub:
        backend = FileStubBackend(stub)
    elif cfg.backend_url:
        backend = HttpBackend(cfg.backend_url, timeout=cfg.timeout)
    else:
        diag(error="config", message="no backend: pass --stub, --backend-url or set it in config")
        sys.exit(EXIT_INPUT)
    stats = GenerationStats(flag_threshold=cfg.flag_threshold)
    failures: list = []
    records = generate_dataset(
        _generation_items(inputs, cfg, failures),
        TEMPLATES[template_name],
        backend,
        {"num_samples": num_samples or cfg.num_samples},
        stats=stats,
        order=cfg.coord_order,
        max_in_flight=cfg.max_in_flight,
        seed=cfg.seed,
        temperature=cfg.temperature,
        max_tokens=cfg.max_tokens,
        max_attempts=cfg.max_attempts,
        base_delay=cfg.base_delay,
    )
    for rec in records:
        click.echo(rec.to_json())
    diag(event="stats", **stats.to_dict())
    if stats_path:
        Path(stats_path).write_text(json.dumps(stats.to_dict(), indent=2, sort_keys=True) + "\n")
    if stats.backend_failures:
        sys.exit(EXIT_BACKEND)
    sys.exit(EXIT_INPUT if failures else 0)


# -- eval -------------------------------------------------------------------


@cli.command("eval")
@click.argument("input", type=click.File("r", encoding="utf-8"), default="-")
@click.option("--metric", "metric_names", multiple=True, required=True,
              help=f"One of: {', '.join(METRICS)}. Repeatable.")
@click.option("--per-sample", is_flag=True, help="Include per-sample scores.")
@click.option("--ignore-case", is_flag=True, help="Case-fold for exact_match.")
def eval_cmd(input, metric_names, per_sample, ignore_case):
    """Predictions JSONL -> report JSON keyed by metric name."""
    unknown = [m for m in metric_names if m not in METRICS]
    if unknown:
        diag(error="eval", message=f"unknown metric(s) {', '.join(unknown)}; choose from {', '.join(METRICS)}")
        sys.exit(EXIT_INPUT)
    records = []
    for lineno, obj, err in _jsonl(input, input.name):
        if err is not None:
            diag(line=lineno, error="eval", message=err)
            sys.exit(EXIT_INPUT)
        records.append(obj)
    report = {}
    for name in metric_names:
        try:
            report[name] = evaluate(records, name, ignore_case=ignore_case).to_dict(per_sample)
        except (EvalError, SchemaError, ValueError) as e:
            diag(error="eval", metric=name, message=str(e))
            sys.exit(EXIT_INPUT)
    click.echo(json.dumps(report, indent=2, sort_keys=True))


# -- mixture ----------------------------------------------------------------


@cli.command()
@click.argument("spec_file", type=click.Path(exists=True, dir_okay=False))
@click.option("-n", "num_samples", type=click.IntRange(min=0), default=0, show_default=True,
              help="Records to sample to stdout.")
@click.option("--manifest", "manifest_path", type=click.Path(dir_okay=False), help="Write the mixture manifest here.")
@click.pass_obj
def mixture(cfg: Config, spec_file, num_samples, manifest_path):
    """Mixture spec JSON -> manifest + sampled TaskRecord JSONL.

    Task sources are JSONL paths relative to the spec file; a missing size
    defaults to the number of records in the source.
    """
    base = Path(spec_file).parent
    try:
        raw = json.loads(Path(spec_file).read_text(encoding="utf-8"))
        pools: dict[str, list[TaskRecord]] = {}
        entries = []
        for t in raw["tasks"]:
            if t.get("source"):
                pools[t["name"]] = list(read_records(base / t["source"]))
            size = t.get("size", len(pools.get(t["name"], [])))
            entries.append(MixtureEntry(t["name"], int(size), t.get("source")))
        spec = MixtureSpec(entries, float(raw.get("cap", cfg.cap)))
        weights = compute_weights(spec)
        sampled = list(sample_mixture(pools, weights, num_samples, cfg.seed))
        manifest = build_manifest(spec, weights, cfg.seed, num_samples, base)
    except (KeyError, TypeError, ValueError, OSError, RecordError) as e:
        diag(error="mixture", message=f"{type(e).__name__}: {e}")
        sys.exit(EXIT_INPUT)
    for rec in sampled:
        click.echo(rec.to_json())
    if manifest_path:
        Path(manifest_path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def main() -> None:
    cli()


if __name__ == "__main__":
    main()
