"""Command-line interface: extract, decompose, verify, sparsity, report."""

from __future__ import annotations

import json
import sys

import click

from .dataset import load_dataset
from .errors import AndorlensError
from .oracle import OracleConfig, SyntheticOracle, make_oracle
from .pipeline import (
    MATCHING_KS,
    decompose_sample,
    extract_sample,
    load_report,
    sparsity_sweep,
    verify_artifacts,
)
from .sparsify import SparsifyConfig


def _sparsify_options(fn):
    fn = click.option("--max-iters", default=200_000, show_default=True,
                      help="Solver iteration cap.")(fn)
    fn = click.option("--step-size", default=0.01, show_default=True,
                      help="Step scale for the first-order reference solver.")(fn)
    fn = click.option("--convergence-tol", default=1e-9, show_default=True,
                      help="Solver tolerance.")(fn)
    fn = click.option("--noise/--no-noise", "noise_enabled", default=False,
                      show_default=True, help="Co-learn a bounded residual term.")(fn)
    fn = click.option("--noise-bound", default=None, type=float,
                      help="Residual cap; default 2% of the table range.")(fn)
    fn = click.option("--seed", default=0, show_default=True,
                      help="Seed for seeded components.")(fn)
    return fn


def _oracle_options(fn):
    fn = click.option("--backend", type=click.Choice(["synthetic", "replay", "remote"]),
                      default="synthetic", show_default=True)(fn)
    fn = click.option("--endpoint", default="", help="Remote scorer base URL.")(fn)
    fn = click.option("--auth-env", default="",
                      help="Environment variable holding the API credential.")(fn)
    fn = click.option("--parallelism", default=4, show_default=True,
                      help="Max in-flight scoring requests.")(fn)
    fn = click.option("--retries", default=3, show_default=True)(fn)
    fn = click.option("--p-clamp", default=1e-6, show_default=True,
                      help="Probability floor before the log-odds transform.")(fn)
    fn = click.option("--cache", "cache_path", default=None,
                      help="Probability cache file (replay source / remote sink).")(fn)
    fn = click.option("--synthetic-spec", default=None,
                      help="JSON file of planted models keyed by variant id.")(fn)
    fn = click.option("--model-id", default=None,
                      help="Model id for replay caches holding several models.")(fn)
    fn = click.option("--text-masking", is_flag=True, default=False,
                      help="Fidelity-reducing fallback: rewrite masked words "
                           "as placeholders instead of server-side embedding "
                           "masking; outputs are labeled '+textmask'.")(fn)
    return fn


def _tau_option(fn):
    fn = click.option("--tau", default=0.05, show_default=True,
                      help="Salience threshold value.")(fn)
    fn = click.option("--tau-mode", type=click.Choice(["relative", "absolute"]),
                      default="relative", show_default=True)(fn)
    return fn


def _build_sparsify_config(max_iters, step_size, convergence_tol, noise_enabled,
                           noise_bound, seed) -> SparsifyConfig:
    return SparsifyConfig(
        max_iters=max_iters, step_size=step_size, convergence_tol=convergence_tol,
        noise_enabled=noise_enabled, noise_bound=noise_bound, seed=seed,
    )


def _build_oracle(backend, endpoint, auth_env, parallelism, retries, p_clamp,
                  cache_path, synthetic_spec, model_id, text_masking):
    config = OracleConfig(
        backend=backend, endpoint=endpoint, auth_env=auth_env,
        parallelism=parallelism, retries=retries, p_clamp=p_clamp,
        cache_path=cache_path,
    )
    if backend == "synthetic":
        if not synthetic_spec:
            raise click.UsageError("--backend synthetic needs --synthetic-spec")
        return SyntheticOracle.from_json_file(synthetic_spec)
    return make_oracle(config, model_id=model_id, text_masking=text_masking)


@click.group()
def main():
    """Sparse AND-OR interaction extraction and effect decomposition."""


@main.command()
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--sample-id", required=True)
@click.option("--out", "out_dir", default="runs", show_default=True)
@_oracle_options
@_sparsify_options
def extract(dataset_path, sample_id, out_dir, backend, endpoint, auth_env,
            parallelism, retries, p_clamp, cache_path, synthetic_spec, model_id,
            text_masking, max_iters, step_size, convergence_tol, noise_enabled,
            noise_bound, seed):
    """Build value tables and interaction vectors for one sample."""
    samples = {s.sample_id: s for s in load_dataset(dataset_path)}
    if sample_id not in samples:
        raise click.UsageError(
            f"sample {sample_id!r} not in dataset (has: {sorted(samples)})"
        )
    oracle = _build_oracle(backend, endpoint, auth_env, parallelism, retries,
                           p_clamp, cache_path, synthetic_spec, model_id,
                           text_masking)
    config = _build_sparsify_config(max_iters, step_size, convergence_tol,
                                    noise_enabled, noise_bound, seed)
    result = extract_sample(samples[sample_id], oracle, config, out_dir)
    click.echo(
        f"extracted {result.variant_count} variants (n={result.n}) -> {result.root}"
    )


@main.command()
@click.option("--sample-id", required=True)
@click.option("--out", "out_dir", default="runs", show_default=True)
@click.option("--model-id", default=None)
@click.option("--widen-salient/--no-widen-salient", default=False, show_default=True,
              help="Also include masks salient in the question-only extraction.")
@_tau_option
def decompose(sample_id, out_dir, model_id, widen_salient, tau, tau_mode):
    """Decompose extracted interactions into effect records and ratios."""
    report = decompose_sample(
        sample_id, out_dir, model_id=model_id,
        tau_policy=(tau_mode, tau),
        widen_salient_with_question=widen_salient,
    )
    click.echo(f"report -> {out_dir}/{sample_id}/{report.model_id}/report.json")
    click.echo(
        f"salient and={report.salient_count_and} or={report.salient_count_or} "
        f"tau={report.tau:.6g}"
    )
    if report.ratios is not None:
        click.echo(
            f"rho_r={report.ratios.rho_r:.4f} rho_c={report.ratios.rho_c:.4f}"
        )
    else:
        click.echo(f"ratios undefined: {report.ratios_error}")
    click.echo(f"additivity residual {report.additivity_residual:.3e}")
    if report.failed:
        click.echo("REPORT MARKED FAILED", err=True)
        sys.exit(1)


@main.command()
@click.option("--sample-id", required=True)
@click.option("--out", "out_dir", default="runs", show_default=True)
@click.option("--model-id", default=None)
@click.option("--ks", default=",".join(map(str, MATCHING_KS)), show_default=True,
              help="Comma-separated k values for the matching-error curve.")
@click.option("--dataset", "dataset_path", default=None, type=click.Path(exists=True),
              help="With --synthetic-spec: run a fresh synthetic extraction "
                   "into a temporary directory and verify that instead of "
                   "persisted artifacts.")
@click.option("--synthetic-spec", default=None, type=click.Path(exists=True))
@_tau_option
def verify(sample_id, out_dir, model_id, ks, dataset_path, synthetic_spec, tau,
           tau_mode):
    """Run the invariant suite against persisted artifacts or a fresh run."""
    k_list = [int(k) for k in ks.split(",") if k.strip()]
    if (dataset_path is None) != (synthetic_spec is None):
        raise click.UsageError("--dataset and --synthetic-spec go together")
    if dataset_path is not None:
        import tempfile

        samples = {s.sample_id: s for s in load_dataset(dataset_path)}
        if sample_id not in samples:
            raise click.UsageError(
                f"sample {sample_id!r} not in dataset (has: {sorted(samples)})"
            )
        oracle = SyntheticOracle.from_json_file(synthetic_spec)
        with tempfile.TemporaryDirectory() as fresh:
            extract_sample(samples[sample_id], oracle, out_dir=fresh)
            summary = verify_artifacts(
                sample_id, fresh, matching_ks=k_list, tau_policy=(tau_mode, tau)
            )
    else:
        summary = verify_artifacts(
            sample_id, out_dir, model_id=model_id, matching_ks=k_list,
            tau_policy=(tau_mode, tau),
        )
    for line in summary.lines():
        click.echo(line)
    if not summary.all_passed:
        sys.exit(1)


@main.command()
@click.option("--n-list", default="8,10,12", show_default=True,
              help="Comma-separated variable counts.")
@click.option("--out", "out_dir", default=None,
              help="Directory for sorted-strength curves and the sweep summary.")
@click.option("--seed", default=0, show_default=True)
@_tau_option
def sparsity(n_list, out_dir, seed, tau, tau_mode):
    """Salient-interaction census on the smooth synthetic family."""
    ns = [int(x) for x in n_list.split(",") if x.strip()]
    reports = sparsity_sweep(ns, tau_policy=(tau_mode, tau), seed=seed,
                             out_dir=out_dir)
    for r in reports:
        click.echo(
            f"n={r.n}: salient={r.salient_count} (of {1 << (r.n + 1)}) "
            f"tau={r.tau:.6g}"
        )
    kappa = reports[0].fitted_kappa if reports else None
    if kappa is not None:
        click.echo(f"fitted kappa={kappa:.3f}")


@main.command()
@click.option("--sample-id", required=True)
@click.option("--out", "out_dir", default="runs", show_default=True)
@click.option("--model-id", default=None)
@click.option("--json", "as_json", is_flag=True, help="Dump the raw report JSON.")
def report(sample_id, out_dir, model_id, as_json):
    """Print a persisted analysis report."""
    doc = load_report(sample_id, out_dir, model_id=model_id)
    if as_json:
        click.echo(json.dumps(doc, indent=1, sort_keys=True))
        return
    click.echo(f"sample {doc['sample_id']} model {doc['model_id']} n={doc['n']}")
    click.echo(
        f"tau={doc['tau']:.6g} salient and={doc['salient_counts']['and']} "
        f"or={doc['salient_counts']['or']}"
    )
    if doc["ratios"]:
        click.echo(
            f"rho_r={doc['ratios']['rho_r']:.4f} rho_c={doc['ratios']['rho_c']:.4f} "
            f"e_all={doc['ratios']['e_all']:.4f}"
        )
    else:
        click.echo(f"ratios undefined: {doc['ratios_error']}")
    for entry in doc["matching_error"]:
        click.echo(f"matching error k={entry['k']}: {entry['mean_error']:.3e}")
    click.echo(f"additivity residual {doc['additivity_residual']:.3e}")
    click.echo("status: " + ("FAILED" if doc["failed"] else "ok"))
    if doc["failed"]:
        sys.exit(1)


def run_main():
    try:
        main(standalone_mode=True)
    except AndorlensError as exc:  # uniform nonzero exit for domain errors
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    run_main()
