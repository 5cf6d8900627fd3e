"""Command-line interface.

Subcommands mirror the service: sketch, encode, generate, restore, ablate,
serve, plus model-training utilities and a topology-map export.  Outputs are
deterministic for a given config and seed (timing goes to stderr, never into
result files).
"""
from __future__ import annotations

import json
import time
from pathlib import Path

import click

from .backbone import Backbone, assign_sse_geometric, extract_curve, parse_pdb_calpha
from .bench import (
    ablation_sweep,
    noise_robustness,
    run_restoration,
    topology_map,
    topology_map_csv,
)
from .denoisers import ToyDenoiser, ToyDenoiserConfig, oracle_denoiser, train_toy_denoiser
from .diffusion import SamplerConfig, make_schedule, sample
from .encoder import (
    TrainingConfig,
    encode_curve,
    generate_synthetic_sse_dataset,
    labels_from_probabilities,
    load_encoder,
    save_encoder,
    train_encoder,
)
from .geometry import Curve
from .metrics import topology_fitness
from .sketcher import sketch_from_curve
from .synthetic import bundle_corpus


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_curve(path: str) -> Curve:
    return Curve.from_json(Path(path).read_text())


def _load_backbone(path: str) -> Backbone:
    p = Path(path)
    if p.suffix.lower() == ".pdb":
        bb = parse_pdb_calpha(p.read_bytes())
        return bb.with_labels(assign_sse_geometric(bb.coords))
    return Backbone.from_json(p.read_text())


def _load_dataset(dataset: str | None, synthetic: int, seed: int) -> list[Backbone]:
    if dataset:
        paths = sorted(Path(dataset).glob("*.pdb")) + sorted(Path(dataset).glob("*.json"))
        if not paths:
            raise click.ClickException(f"no .pdb or .json backbones under {dataset}")
        out = []
        for p in paths:
            bb = _load_backbone(str(p))
            if bb.labels is None or set(bb.labels) == {"L"}:
                bb = bb.with_labels(assign_sse_geometric(bb.coords))
            out.append(Backbone(bb.coords, bb.chain_ids, bb.residue_numbers, bb.labels, id=p.stem))
        return out
    return bundle_corpus(synthetic, seed=seed)


def _resolve_denoiser(spec: str, schedule, target_path: str | None):
    if spec == "oracle":
        if target_path:
            target = _load_backbone(target_path)
            return oracle_denoiser(target)
        return lambda bb: oracle_denoiser(bb)
    if spec.startswith("toy:"):
        return ToyDenoiser.load(spec.split(":", 1)[1]).bind_schedule(schedule)
    raise click.ClickException(f"--denoiser must be 'oracle' or 'toy:PATH', got {spec!r}")


def _sampler_options(fn):
    fn = click.option("--lambda", "guidance", type=float, default=2.0 / 3.0,
                      show_default=True, help="Sketch guidance weight in [0, 1).")(fn)
    fn = click.option("--gamma", type=float, default=0.2, show_default=True)(fn)
    fn = click.option("--eta", type=float, default=0.7, show_default=True)(fn)
    fn = click.option("--phase", default="gated", show_default=True,
                      help="'gated' or 'fixed:T' for a fixed two-phase switch.")(fn)
    fn = click.option("-T", "--steps", type=int, default=50, show_default=True)(fn)
    return fn


def _build_config(guidance, gamma, eta, phase, seed, mode="guided") -> SamplerConfig:
    switch = None
    if phase != "gated":
        if not phase.startswith("fixed:"):
            raise click.ClickException("--phase must be 'gated' or 'fixed:T'")
        switch = int(phase.split(":", 1)[1])
    if guidance == 0.0:
        mode = "unconditional"
    return SamplerConfig(
        guidance=guidance, gate_gamma=gamma, gate_eta=eta,
        fixed_phase_switch=switch, seed=seed, mode=mode,
    )


@click.group()
def main():
    """Curve-conditioned backbone design toolkit."""


@main.command()
@click.option("--curve", "curve_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def sketch(curve_path, seed, out):
    """Realize a labeled curve as an explicit Calpha sketch."""
    curve = _load_curve(curve_path)
    result = sketch_from_curve(curve)
    out = _out_dir(out)
    (out / "sketch.json").write_text(result.to_json())
    click.echo(f"sketch: {len(result)} residues -> {out / 'sketch.json'}")


@main.command()
@click.option("--curve", "curve_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def encode(curve_path, model_path, seed, out):
    """Predict per-point SSE probabilities for a curve."""
    curve = _load_curve(curve_path)
    model = load_encoder(model_path)
    probs = encode_curve(model, curve)
    labels = labels_from_probabilities(probs)
    out = _out_dir(out)
    (out / "probabilities.json").write_text(
        json.dumps({"classes": "HEL", "probabilities": probs.tolist()}, sort_keys=True)
    )
    labeled = Curve(curve.points, labels=labels.sequence, id=curve.id)
    (out / "labeled_curve.json").write_text(labeled.to_json())
    click.echo(f"encode: {labels.sequence}")


@main.command()
@click.option("--curve", "curve_path", required=True, type=click.Path(exists=True))
@click.option("--denoiser", default="oracle", show_default=True)
@click.option("--target", "target_path", type=click.Path(exists=True),
              help="Oracle target backbone (.json or .pdb).")
@_sampler_options
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--dump-coords", is_flag=True, help="Include coordinates in the trajectory export.")
@click.option("--out", required=True, type=click.Path())
def generate(curve_path, denoiser, target_path, guidance, gamma, eta, phase, steps, seed,
             dump_coords, out):
    """Sample a backbone guided by a labeled curve's sketch."""
    curve = _load_curve(curve_path)
    if curve.labels is None:
        raise click.ClickException("generation needs a labeled curve (run encode first)")
    schedule = make_schedule(T=steps)
    den = _resolve_denoiser(denoiser, schedule, target_path)
    if callable(den) and not hasattr(den, "predict_z0"):
        raise click.ClickException("generate with --denoiser oracle needs --target")
    cfg = _build_config(guidance, gamma, eta, phase, seed)
    sketch_obj = sketch_from_curve(curve)
    started = time.monotonic()
    traj = sample(den, sketch_obj, cfg, schedule)
    elapsed = time.monotonic() - started
    final = traj.final
    relabeled = final.with_labels(assign_sse_geometric(final.coords))
    sctf1 = topology_fitness(extract_curve(relabeled, 0.4), curve)
    out = _out_dir(out)
    (out / "backbone.json").write_text(final.to_json())
    (out / "trajectory.jsonl").write_text(traj.export_jsonl(include_coords=dump_coords))
    (out / "metrics.json").write_text(
        json.dumps(
            {"sctf1": sctf1, "phase_switch_step": traj.phase_switch_step, "steps": steps,
             "seed": seed, "lambda": guidance},
            sort_keys=True,
        )
    )
    click.echo(f"generate: {len(final)} residues, scTF_1={sctf1:.4f} "
               f"({elapsed:.2f}s) -> {out}", err=True)


@main.command()
@click.option("--dataset", type=click.Path(exists=True), help="Directory of .pdb/.json backbones.")
@click.option("--synthetic", type=int, default=20, show_default=True,
              help="Synthetic bundle count when no dataset directory is given.")
@click.option("--n-bb", type=int, default=1, show_default=True)
@click.option("--denoiser", default="oracle", show_default=True)
@_sampler_options
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def restore(dataset, synthetic, n_bb, denoiser, guidance, gamma, eta, phase, steps, seed, out):
    """Run the restoration benchmark and write the report."""
    schedule = make_schedule(T=steps)
    backbones = _load_dataset(dataset, synthetic, seed)
    den = _resolve_denoiser(denoiser, schedule, None)
    cfg = _build_config(guidance, gamma, eta, phase, seed)
    report = run_restoration(backbones, cfg, n_bb, den, schedule)
    out = _out_dir(out)
    (out / "report.json").write_text(report.to_json())
    (out / "report.csv").write_text(report.to_csv())
    click.echo(f"restore: {report.aggregates} ({report.elapsed_seconds:.1f}s)", err=True)


@main.command()
@click.option("--dataset", type=click.Path(exists=True))
@click.option("--synthetic", type=int, default=8, show_default=True)
@click.option("--n-bb", type=int, default=1, show_default=True)
@click.option("--denoiser", default="oracle", show_default=True)
@click.option("--lambdas", default="0,0.5,0.6667,0.75", show_default=True)
@click.option("--gammas", default="0.2", show_default=True)
@click.option("--etas", default="0.7", show_default=True)
@click.option("--phases", default="gated", show_default=True,
              help="Comma list of 'gated' and/or 'fixed:T'.")
@click.option("--noise-radii", default="", help="Optional comma list of perturbation radii (A).")
@click.option("-T", "--steps", type=int, default=50, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def ablate(dataset, synthetic, n_bb, denoiser, lambdas, gammas, etas, phases, noise_radii,
           steps, seed, out):
    """Parameter sweeps (guidance, gating, phase timing, optional noise)."""
    schedule = make_schedule(T=steps)
    backbones = _load_dataset(dataset, synthetic, seed)
    den = _resolve_denoiser(denoiser, schedule, None)
    base = SamplerConfig(seed=seed)
    rows = ablation_sweep(
        backbones, base, n_bb, den,
        lambdas=[float(x) for x in lambdas.split(",")],
        gammas=[float(x) for x in gammas.split(",")],
        etas=[float(x) for x in etas.split(",")],
        phases=phases.split(","),
        schedule=schedule,
    )
    out = _out_dir(out)
    (out / "ablation.json").write_text(json.dumps(rows, sort_keys=True, indent=2) + "\n")
    header = "lambda,gamma,eta,phase,mean_sctf1,mean_tm,score,failures"
    lines = [header] + [
        f"{r['lambda']!r},{r['gamma']!r},{r['eta']!r},{r['phase']},"
        f"{r['mean_sctf1']!r},{r['mean_tm']!r},{r['score']!r},{r['failures']}"
        for r in rows
    ]
    (out / "ablation.csv").write_text("\n".join(lines) + "\n")
    if noise_radii:
        radii = [float(x) for x in noise_radii.split(",")]
        noise_rows = noise_robustness(backbones, radii, base, den, n_bb=n_bb, schedule=schedule)
        (out / "noise.json").write_text(json.dumps(noise_rows, sort_keys=True, indent=2) + "\n")
    click.echo(f"ablate: {len(rows)} grid points -> {out}", err=True)


@main.command("topomap")
@click.option("--dataset", type=click.Path(exists=True))
@click.option("--synthetic", type=int, default=12, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def topomap(dataset, synthetic, seed, out):
    """Embed a dataset into the 2D topology space (MDS over 1 - TF)."""
    backbones = _load_dataset(dataset, synthetic, seed)
    ids, coords = topology_map(backbones)
    out = _out_dir(out)
    (out / "topology_map.csv").write_text(topology_map_csv(ids, coords))
    click.echo(f"topomap: {len(ids)} items -> {out / 'topology_map.csv'}", err=True)


@main.command("train-encoder")
@click.option("--n", type=int, default=210, show_default=True)
@click.option("--epochs", type=int, default=40, show_default=True)
@click.option("--lr", type=float, default=1e-3, show_default=True)
@click.option("--mask-fraction", type=float, default=0.1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def train_encoder_cmd(n, epochs, lr, mask_fraction, seed, out):
    """Train the curve SSE encoder on the synthetic corpus."""
    data = generate_synthetic_sse_dataset(n, seed=seed)
    split = max(1, int(0.8 * len(data)))
    model, history = train_encoder(
        data[:split],
        TrainingConfig(learning_rate=lr, epochs=epochs, mask_fraction=mask_fraction, seed=seed),
        holdout=data[split:],
    )
    out_path = Path(out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_encoder(model, out_path)
    acc = history.holdout_accuracy[-1] if history.holdout_accuracy else float("nan")
    click.echo(f"train-encoder: holdout accuracy {acc:.3f} -> {out_path}", err=True)


@main.command("train-denoiser")
@click.option("--n", type=int, default=50, show_default=True)
@click.option("--steps", "train_steps", type=int, default=1500, show_default=True)
@click.option("-T", "--schedule-steps", type=int, default=50, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def train_denoiser_cmd(n, train_steps, schedule_steps, seed, out):
    """Train the toy denoiser on the synthetic corpus."""
    schedule = make_schedule(T=schedule_steps)
    corpus = bundle_corpus(n, seed=seed)
    toy = train_toy_denoiser(corpus, schedule, ToyDenoiserConfig(steps=train_steps, seed=seed))
    out_path = Path(out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    toy.save(out_path)
    click.echo(f"train-denoiser: final loss {toy.loss_history[-1]:.4f} -> {out_path}", err=True)


@main.command()
@click.option("--n", type=int, default=20, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def synth(n, seed, out):
    """Write a synthetic bundle dataset as backbone JSON files."""
    out = _out_dir(out)
    for bb in bundle_corpus(n, seed=seed):
        (out / f"{bb.id}.json").write_text(bb.to_json())
    click.echo(f"synth: {n} backbones -> {out}", err=True)


@main.command()
@click.option("--data-dir", "--out", "data_dir", default=None,
              help="Defaults to $SKETCHFOLD_DATA or ./sketchfold-data.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8008, show_default=True)
@click.option("--workers", type=int, default=1, show_default=True,
              help="Job worker threads (not HTTP workers).")
@click.option("--seed", type=int, default=1234, show_default=True,
              help="Training seed for the lazily built default models.")
def serve(data_dir, host, port, workers, seed):
    """Run the local design service."""
    import uvicorn

    from .service import create_app

    app = create_app(data_dir, workers=workers, model_seed=seed)
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
