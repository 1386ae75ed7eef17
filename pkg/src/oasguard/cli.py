"""Command-line front end: thin client of the pipeline/service layer.

Commands marshal local files into the same payloads the HTTP endpoints
accept, run them in process (or against a remote service with --server),
and write the JSON artifacts under one output directory.  Exit codes:
0 clean, 2 mismatches found, 1 tool or configuration error.
"""

from __future__ import annotations

import json
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import click

from . import TOOL_VERSION, evalkit, harness, ir, mining, pipeline, specmodel, synth
from .config import ConfigError, RunConfig, load_config
from .ir.serialize import canonical_json
from .llm import CacheMiss, ProviderError

_EXIT_TOOL_ERROR = harness.EXIT_TOOL_ERROR


class Session:
    def __init__(self, config: RunConfig, out_dir: Path, server: str | None, verbose: bool):
        self.config = config
        self.out_dir = out_dir
        self.server = server
        self.verbose = verbose
        self._runtime: pipeline.Runtime | None = None

    @property
    def runtime(self) -> pipeline.Runtime:
        if self._runtime is None:
            self._runtime = pipeline.build_runtime(self.config)
        return self._runtime

    def log(self, message: str) -> None:
        if self.verbose:
            click.echo(message, err=True)

    def write(self, name: str, content: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content, encoding="utf-8")
        self.log(f"wrote {path}")
        return path

    def post(self, endpoint: str, payload: dict) -> dict:
        import httpx

        response = httpx.post(f"{self.server}{endpoint}", json=payload, timeout=600.0)
        if response.status_code >= 400:
            raise click.ClickException(f"{endpoint} -> HTTP {response.status_code}: {response.text[:300]}")
        return response.json()


def _stamped_out_dir() -> Path:
    stamp = datetime.now(timezone.utc).strftime("%Y%m%d-%H%M%SZ")
    return Path("out") / stamp


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--config", "config_path", type=click.Path(), default=None, help="YAML or TOML run configuration.")
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Output directory (default: out/<run-stamp>).")
@click.option("--llm-mode", type=click.Choice(["live", "record", "replay"]), default=None, help="Override llm.mode.")
@click.option("--server", default=None, help="Run against a remote service instead of in process.")
@click.option("--verbose", is_flag=True, default=False)
@click.version_option(TOOL_VERSION)
@click.pass_context
def main(ctx, config_path, out_dir, llm_mode, server, verbose):
    """Mine response-body constraints from an OpenAPI document and check them."""
    try:
        config = load_config(config_path) if config_path else RunConfig()
        if llm_mode is not None:
            config = replace(config, llm=replace(config.llm, mode=llm_mode))
        config = config.validate()
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        ctx.exit(_EXIT_TOOL_ERROR)
        return
    resolved_out = Path(out_dir) if out_dir else (
        Path(config.output_dir) if config.output_dir else _stamped_out_dir()
    )
    ctx.obj = Session(config, resolved_out, server, verbose)


def _require(value, flag: str, ctx) -> str:
    if not value:
        click.echo(f"config error: {flag}: required (flag or config file)", err=True)
        ctx.exit(_EXIT_TOOL_ERROR)
    return value


def _load_spec_or_exit(ctx, session: Session, spec_path: str):
    try:
        return specmodel.load_spec(spec_path)
    except specmodel.SpecError as exc:
        click.echo(f"spec error: {exc}", err=True)
        ctx.exit(_EXIT_TOOL_ERROR)


def _spec_document(spec_path: str) -> dict | str:
    text = Path(spec_path).read_text()
    return text


def _run_mine(ctx, session: Session, spec_path: str) -> list[mining.Constraint]:
    if session.server:
        data = session.post("/mine", {
            "document": _spec_document(spec_path),
            "mining_mode": session.config.mining.mode,
        })
        constraints = [mining.constraint_from_dict(c) for c in data["constraints"]]
        report = data["report"]
    else:
        spec = _load_spec_or_exit(ctx, session, spec_path)
        try:
            constraints, report = pipeline.mine_stage(session.runtime, spec)
        except (CacheMiss, ProviderError) as exc:
            click.echo(f"llm error: {exc}", err=True)
            ctx.exit(_EXIT_TOOL_ERROR)
    session.write("constraints.json", mining.constraints_to_json(constraints, TOOL_VERSION))
    session.write("mining_report.json", canonical_json(report))
    return constraints


@main.command()
@click.option("--spec", "spec_path", type=click.Path(), default=None, help="OpenAPI document (YAML or JSON).")
@click.pass_context
def mine(ctx, spec_path):
    """Mine constraints from the spec into constraints.json."""
    session: Session = ctx.obj
    spec_path = _require(spec_path or session.config.spec_path, "--spec", ctx)
    constraints = _run_mine(ctx, session, spec_path)
    click.echo(f"mined {len(constraints)} constraints -> {session.out_dir / 'constraints.json'}")


def _run_gen(ctx, session: Session, spec_path: str, constraints: list[mining.Constraint]):
    if session.server:
        data = session.post("/gen", {
            "document": _spec_document(spec_path),
            "constraints": [mining.constraint_to_dict(c) for c in constraints],
            "verify": session.config.synthesis.verify_examples,
        })
        files = {name: canonical_json(doc) for name, doc in sorted(data["programs"].items())}
        report = data["report"]
    else:
        spec = _load_spec_or_exit(ctx, session, spec_path)
        try:
            results, report = pipeline.gen_stage(session.runtime, spec, constraints)
        except (CacheMiss, ProviderError) as exc:
            click.echo(f"llm error: {exc}", err=True)
            ctx.exit(_EXIT_TOOL_ERROR)
        files = synth.bundle_to_files(results)
    for name, content in sorted(files.items()):
        session.write(f"bundle/{name}", content)
    session.write("synthesis_report.json", canonical_json(report))
    return files


@main.command()
@click.option("--spec", "spec_path", type=click.Path(), default=None)
@click.option("--constraints", "constraints_path", type=click.Path(), required=True)
@click.pass_context
def gen(ctx, spec_path, constraints_path):
    """Compile mined constraints into a validator program bundle."""
    session: Session = ctx.obj
    spec_path = _require(spec_path or session.config.spec_path, "--spec", ctx)
    constraints = mining.constraints_from_json(Path(constraints_path).read_text())
    files = _run_gen(ctx, session, spec_path, constraints)
    click.echo(f"generated {len(files)} programs -> {session.out_dir / 'bundle'}")


def _load_bundle(bundle_dir: Path) -> list[ir.ValidatorProgram]:
    programs = []
    for path in sorted(bundle_dir.glob("*.json")):
        if path.name == "synthesis_report.json":
            continue
        programs.append(ir.parse_program(path.read_text()))
    return programs


def _run_run(ctx, session: Session, programs, spec_path: str | None, traces_path: str):
    try:
        exchanges, stats = harness.load_traces(traces_path)
    except (harness.TraceParseError, OSError) as exc:
        click.echo(f"trace error: {exc}", err=True)
        ctx.exit(_EXIT_TOOL_ERROR)
        return
    if session.server:
        payload = {
            "programs": [ir.program_to_dict(p) for p in programs],
            "exchanges": [
                {
                    "operation": dict(zip(("method", "path"), e.operation.split(" ", 1))),
                    "request": e.request,
                    "status": e.status,
                    "response_body": e.response_body,
                    "captured_at": e.captured_at,
                }
                for e in exchanges
            ],
            "document": _spec_document(spec_path) if spec_path else None,
            "lenient_formats": session.config.harness.lenient_formats,
        }
        data = session.post("/run", payload)
        report = data["report"]
    else:
        spec = _load_spec_or_exit(ctx, session, spec_path) if spec_path else None
        report = pipeline.run_stage(
            session.config, programs, exchanges, spec=spec, trace_stats=stats
        )
    session.write("run_report.json", harness.report_to_json(report))
    session.write("run_report.txt", harness.report_to_text(report))
    return report


@main.command(name="run")
@click.option("--bundle", "bundle_dir", type=click.Path(), required=True)
@click.option("--traces", "traces_path", type=click.Path(), default=None)
@click.option("--spec", "spec_path", type=click.Path(), default=None, help="Used for mismatch root-cause tagging.")
@click.pass_context
def run_cmd(ctx, bundle_dir, traces_path, spec_path):
    """Replay recorded traffic through a program bundle."""
    session: Session = ctx.obj
    traces_path = _require(traces_path or session.config.harness.traces_path, "--traces", ctx)
    spec_path = spec_path or session.config.spec_path
    try:
        programs = _load_bundle(Path(bundle_dir))
    except ir.IrSyntaxError as exc:
        click.echo(f"bundle error: {exc}", err=True)
        ctx.exit(_EXIT_TOOL_ERROR)
        return
    report = _run_run(ctx, session, programs, spec_path, traces_path)
    click.echo(harness.report_to_text(report), nl=False)
    ctx.exit(harness.exit_code_for(report))


@main.command()
@click.option("--constraints", "constraints_path", type=click.Path(), required=True)
@click.option("--ground-truth", "gt_path", type=click.Path(), required=True)
@click.option("--judgments", "judgments_path", type=click.Path(), required=True)
@click.option("--external", "external_path", type=click.Path(), default=None)
@click.pass_context
def eval(ctx, constraints_path, gt_path, judgments_path, external_path):
    """Score mined constraints against a judged ground truth."""
    session: Session = ctx.obj
    constraints = mining.constraints_from_json(Path(constraints_path).read_text())
    gt = evalkit.GroundTruth.from_json(Path(gt_path).read_text())
    judgments = json.loads(Path(judgments_path).read_text())
    external = None
    if external_path:
        external = evalkit.external_invariants_from_json(Path(external_path).read_text())
    if session.server:
        payload = {
            "constraints": [mining.constraint_to_dict(c) for c in constraints],
            "ground_truth": [
                {
                    "operation": e.operation,
                    "variables": list(e.variables),
                    "description": e.description,
                    "category": e.category,
                }
                for e in gt.entries
            ],
            "judgments": judgments,
            "external_invariants": (
                [
                    {"operation": inv.operation, "variables": list(inv.variables), "text": inv.text}
                    for inv in external
                ]
                if external is not None
                else None
            ),
        }
        result = session.post("/eval", payload)
        result.pop("tool_version", None)
        result = {"tool_version": TOOL_VERSION, **{k: v for k, v in result.items() if v is not None}}
    else:
        try:
            result = pipeline.eval_stage(constraints, gt, judgments, external)
        except evalkit.MissingJudgment as exc:
            click.echo(f"judgment error: {exc}", err=True)
            ctx.exit(_EXIT_TOOL_ERROR)
            return
    session.write("metrics.json", canonical_json(result))
    metrics = result["metrics"]
    precision = metrics.get("precision")
    recall = metrics.get("recall")
    click.echo(
        "precision={} recall={}".format(
            f"{precision:.3f}" if precision is not None else "undefined",
            f"{recall:.3f}" if recall is not None else "undefined",
        )
    )


@main.command(name="all")
@click.option("--spec", "spec_path", type=click.Path(), default=None)
@click.option("--traces", "traces_path", type=click.Path(), default=None)
@click.pass_context
def all_cmd(ctx, spec_path, traces_path):
    """Chain mine -> gen -> run and write one summary."""
    session: Session = ctx.obj
    spec_path = _require(spec_path or session.config.spec_path, "--spec", ctx)
    traces_path = _require(traces_path or session.config.harness.traces_path, "--traces", ctx)
    constraints = _run_mine(ctx, session, spec_path)
    files = _run_gen(ctx, session, spec_path, constraints)
    programs = [ir.parse_program(content) for content in files.values()]
    report = _run_run(ctx, session, programs, spec_path, traces_path)
    summary = {
        "tool_version": TOOL_VERSION,
        "constraints": len(constraints),
        "programs": len(files),
        "totals": report["totals"],
        "exit_code": harness.exit_code_for(report),
    }
    session.write("summary.json", canonical_json(summary))
    click.echo(
        f"constraints={summary['constraints']} programs={summary['programs']} "
        f"matched={report['totals']['matched']} mismatched={report['totals']['mismatched']} "
        f"unknown={report['totals']['unknown']}"
    )
    ctx.exit(summary["exit_code"])


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
@click.pass_context
def serve(ctx, host, port):
    """Start the HTTP service for this configuration."""
    import uvicorn

    from .service import create_app

    session: Session = ctx.obj
    uvicorn.run(create_app(session.config), host=host, port=port)


if __name__ == "__main__":
    main()
