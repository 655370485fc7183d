"""Command-line entry point.

Every run writes a sibling manifest (config, seed, input digests, package
version) next to its primary output so results can be reproduced exactly.
Precedence for settings is flags > config file > defaults.
"""

from __future__ import annotations

import hashlib
import json
import logging
import sys
from pathlib import Path

import click
import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from . import agent as agent_mod
from . import challenge as challenge_mod
from . import corpus, gateway, metaeval, rlcore
from . import reward as reward_mod
from . import verdict as verdict_mod

log = logging.getLogger("remedyr")


def _digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_path: str | Path, command: str, params: dict, inputs: list[str | Path]) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "params": params,
        "inputs": {str(p): _digest(p) for p in inputs if Path(p).is_file()},
    }
    manifest_path = Path(str(out_path) + ".manifest.json")
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _resolve(out_dir: str | None, path: str) -> Path:
    p = Path(path)
    if out_dir and not p.is_absolute():
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        return out / p
    return p


@click.group()
@click.option("--log-level", default="WARNING", show_default=True)
@click.option("--out-dir", default=None, help="Directory for relative output paths.")
@click.pass_context
def main(ctx: click.Context, log_level: str, out_dir: str | None) -> None:
    logging.basicConfig(level=getattr(logging, log_level.upper(), logging.WARNING))
    ctx.ensure_object(dict)
    ctx.obj["out_dir"] = out_dir


@main.group()
def pairs() -> None:
    """Preference-pair construction."""


@pairs.command("build")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--format", "fmt", default="jsonl", type=click.Choice(["jsonl", "tsv"]))
@click.pass_context
def pairs_build(ctx, in_path: str, out_path: str, seed: int, fmt: str) -> None:
    out = _resolve(ctx.obj.get("out_dir"), out_path)
    segments = corpus.load_segments(in_path, corpus.Format(fmt))
    for diag in segments.diagnostics:
        log.warning("rejected %s: %s", diag.location, diag.message)
    pair_set = corpus.build_preference_pairs(segments, seed)
    for diag in pair_set.diagnostics:
        log.warning("%s: %s", diag.location, diag.message)
    corpus.write_pairs(pair_set, out)
    write_manifest(out, "pairs build", {"seed": seed, "format": fmt}, [in_path])
    click.echo(f"wrote {len(pair_set)} pairs to {out}")


@main.group()
def reward() -> None:
    """Shaped reward computation."""


@reward.command("score")
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True))
@click.option("--verdicts", "verdicts_path", required=True, type=click.Path(exists=True))
@click.option("--c", "c", default=5.0, show_default=True, type=float)
@click.option("--beta", default=0.5, show_default=True, type=float)
@click.option("--no-clamp", is_flag=True, help="Allow negative shaped rewards.")
@click.option("--out", "out_path", required=True)
@click.pass_context
def reward_score(ctx, pairs_path, verdicts_path, c, beta, no_clamp, out_path) -> None:
    out = _resolve(ctx.obj.get("out_dir"), out_path)
    config = reward_mod.RewardConfig(c=c, beta=beta, clamp_shaping=not no_clamp)
    pair_set = corpus.read_pairs(pairs_path)
    pairs_by_id = {p.id: p for p in pair_set.pairs}
    n = 0
    with open(verdicts_path, encoding="utf-8") as fh, open(out, "w", encoding="utf-8") as out_fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            pair = pairs_by_id.get(record.get("item_id"))
            if pair is None:
                log.warning("verdict for unknown pair %r skipped", record.get("item_id"))
                continue
            v = verdict_mod.verdict_from_record(record)
            sr = reward_mod.shaped_reward(v, pair, config)
            out_fh.write(json.dumps(reward_mod.reward_to_record(pair.id, sr)) + "\n")
            n += 1
    write_manifest(out, "reward score", {"c": c, "beta": beta, "clamp": not no_clamp},
                   [pairs_path, verdicts_path])
    click.echo(f"scored {n} pairs to {out}")


@main.command("train-toy")
@click.option("--updates", default=300, show_default=True, type=int)
@click.option("--seed", default=1, show_default=True, type=int)
@click.option("--noise", default=0.0, show_default=True, type=float)
@click.option("--beta", default=0.5, show_default=True, type=float)
@click.option("--c", "c", default=5.0, show_default=True, type=float)
@click.option("--batch-size", default=256, show_default=True, type=int)
@click.option("--learning-rate", default=5.0, show_default=True, type=float)
@click.option("--kl-coeff", default=0.01, show_default=True, type=float)
@click.option("--report", "report_path", required=True)
@click.pass_context
def train_toy_cmd(ctx, updates, seed, noise, beta, c, batch_size, learning_rate,
                  kl_coeff, report_path) -> None:
    out = _resolve(ctx.obj.get("out_dir"), report_path)
    env = rlcore.SyntheticPairEnv(noise_sigma=noise, rng_seed=seed)
    config = rlcore.RlConfig(
        updates=updates, rng_seed=seed, batch_size=batch_size,
        learning_rate=learning_rate, kl_coeff=kl_coeff,
    )
    reward_config = reward_mod.RewardConfig(c=c, beta=beta)
    report = rlcore.train_toy(env, config, reward_config)
    with open(out, "w", encoding="utf-8") as fh:
        for row in report.rows:
            fh.write(json.dumps({
                "update": row.update,
                "mean_reward": row.mean_reward,
                "mean_rank_reward": row.mean_rank_reward,
                "kl": row.kl,
                "loss": row.loss,
            }) + "\n")
    write_manifest(out, "train-toy", {
        "updates": updates, "seed": seed, "noise": noise, "beta": beta, "c": c,
        "batch_size": batch_size, "learning_rate": learning_rate, "kl_coeff": kl_coeff,
    }, [])
    final = report.rows[-1]
    click.echo(
        f"final mean_rank_reward={final.mean_rank_reward:.3f} "
        f"mean_reward={final.mean_reward:.3f} kl={final.kl:.4f}"
    )


def read_scores_tsv(path: str | Path, source_label: str) -> metaeval.ScoreMatrix:
    """TSV with a header row of segment ids; one row per system, blanks missing."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = lines[0].split("\t")
    segments = header[1:]
    systems, rows = [], []
    for line in lines[1:]:
        if not line.strip():
            continue
        cells = line.split("\t")
        systems.append(cells[0])
        rows.append([float(c) if c.strip() else None for c in cells[1:]])
    return metaeval.ScoreMatrix.from_rows(systems, segments, rows, source_label)


def write_scores_tsv(matrix: metaeval.ScoreMatrix, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("system\t" + "\t".join(matrix.segments) + "\n")
        for i, system in enumerate(matrix.systems):
            cells = [
                "" if np.isnan(v) else repr(float(v)) for v in matrix.values[i]
            ]
            fh.write(system + "\t" + "\t".join(cells) + "\n")


@main.group(name="metaeval")
def metaeval_group() -> None:
    """Meta-evaluation statistics."""


@metaeval_group.command("run")
@click.option("--human", "human_path", required=True, type=click.Path(exists=True))
@click.option("--metric", "metric_paths", required=True, multiple=True,
              type=click.Path(exists=True))
@click.option("--spa-resamples", default=1000, show_default=True, type=int)
@click.option("--perm-resamples", default=1000, show_default=True, type=int)
@click.option("--alpha", default=0.05, show_default=True, type=float)
@click.option("--seed", default=7, show_default=True, type=int)
@click.option("--report", "report_path", required=True)
@click.pass_context
def metaeval_run(ctx, human_path, metric_paths, spa_resamples, perm_resamples,
                 alpha, seed, report_path) -> None:
    out = _resolve(ctx.obj.get("out_dir"), report_path)
    human = read_scores_tsv(human_path, "human")
    metrics = {p: read_scores_tsv(p, Path(p).stem) for p in metric_paths}
    report: dict = {"metrics": {}}
    for path, matrix in metrics.items():
        acc = metaeval.system_pairwise_accuracy(matrix, human)
        acc_eq, eps_star = metaeval.tie_calibrated_accuracy(matrix, human)
        spa = metaeval.soft_pairwise_accuracy(matrix, human, spa_resamples, seed)
        report["metrics"][matrix.source_label] = {
            "system_acc": acc,
            "seg_acc_eq": acc_eq,
            "epsilon_star": eps_star,
            "spa": spa,
        }
    if len(metric_paths) >= 2:
        report["significance"] = {}
        paths = list(metric_paths)
        for i in range(len(paths)):
            for j in range(i + 1, len(paths)):
                mx, my = metrics[paths[i]], metrics[paths[j]]
                p_value, significant = metaeval.perm_both_test(
                    mx, my, human,
                    statistic=metaeval.PermBothStatistic.SYS_ACC,
                    resamples=perm_resamples, alpha=alpha, rng_seed=seed,
                )
                key = f"{mx.source_label}|{my.source_label}"
                report["significance"][key] = {"p_value": p_value, "significant": significant}
    Path(out).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    write_manifest(out, "metaeval run", {
        "spa_resamples": spa_resamples, "perm_resamples": perm_resamples,
        "alpha": alpha, "seed": seed,
    }, [human_path, *metric_paths])
    click.echo(json.dumps(report["metrics"], indent=2, sort_keys=True))


@main.group(name="challenge")
def challenge_group() -> None:
    """OOD challenge generation and reporting."""


@challenge_group.command("gen")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--cats", required=True, help="Comma-separated category names.")
@click.option("--seed", default=3, show_default=True, type=int)
@click.option("--pool", "pools", multiple=True,
              help="category=path pairs for pool-backed categories.")
@click.option("--out", "out_path", required=True)
@click.pass_context
def challenge_gen(ctx, in_path, cats, seed, pools, out_path) -> None:
    out = _resolve(ctx.obj.get("out_dir"), out_path)
    segments = corpus.load_segments(in_path)
    categories = {challenge_mod.Category(c.strip()) for c in cats.split(",") if c.strip()}
    aux: dict[challenge_mod.Category, list[str]] = {}
    pool_paths = []
    for spec_str in pools:
        name, _, pool_path = spec_str.partition("=")
        texts = [ln for ln in Path(pool_path).read_text(encoding="utf-8").splitlines() if ln]
        aux[challenge_mod.Category(name)] = texts
        pool_paths.append(pool_path)
    items = challenge_mod.generate(segments, categories, aux, seed)
    challenge_mod.write_items(items, out)
    write_manifest(out, "challenge gen", {"cats": sorted(c.value for c in categories),
                                          "seed": seed}, [in_path, *pool_paths])
    click.echo(f"wrote {len(items)} challenge items to {out}")


@challenge_group.command("report")
@click.option("--items", "items_path", required=True, type=click.Path(exists=True))
@click.option("--scores", "scores_path", required=True, type=click.Path(exists=True))
@click.pass_context
def challenge_report(ctx, items_path, scores_path) -> None:
    items = challenge_mod.read_items(items_path)
    scores: dict[str, float] = {}
    with open(scores_path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                record = json.loads(line)
                scores[str(record["id"])] = float(record["score"])
    report = challenge_mod.robustness_report(items, scores)
    for cat in challenge_mod.Category:
        if cat not in report:
            continue
        summary = report[cat]
        status = "PASS" if summary.passed else "FAIL"
        click.echo(
            f"{cat.value:14s} n={summary.count:5d} mean={summary.mean:7.2f} "
            f"median={summary.median:7.2f} frac_below={summary.frac_below_threshold:.2f} "
            f"[{summary.expectation.value}] {status}"
        )
    if not all(s.passed for s in report.values()):
        sys.exit(1)


def load_endpoint_config(path: str | Path) -> gateway.EndpointConfig:
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    section = data.get("endpoint", data)
    return gateway.EndpointConfig(**section)


@main.group(name="eval")
def eval_group() -> None:
    """Live endpoint evaluation."""


@eval_group.command("run")
@click.option("--endpoint", "endpoint_path", required=True, type=click.Path(exists=True))
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--tts", default=1, show_default=True, type=int)
@click.option("--include-ref", is_flag=True)
@click.option("--out", "out_path", required=True)
@click.pass_context
def eval_run(ctx, endpoint_path, in_path, tts, include_ref, out_path) -> None:
    out = _resolve(ctx.obj.get("out_dir"), out_path)
    config = load_endpoint_config(endpoint_path)
    segments = corpus.load_segments(in_path)

    def one(segment: corpus.Segment):
        verdicts, aggregate = gateway.evaluate_segment(config, segment, include_ref, tts)
        return segment.id, verdicts, aggregate

    results = gateway.run_batch(one, list(segments.segments), config.max_concurrency)
    with open(out, "w", encoding="utf-8") as fh:
        for seg_id, verdicts, aggregate in results:
            record = {
                "item_id": seg_id,
                "score": aggregate,
                "passes": [verdict_mod.verdict_to_record(v) for v in verdicts],
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    write_manifest(out, "eval run", {"tts": tts, "include_ref": include_ref,
                                     "model": config.model_name}, [in_path, endpoint_path])
    click.echo(f"evaluated {len(results)} segments to {out}")


@main.group()
def judge() -> None:
    """Faithfulness judging."""


@judge.command("faithfulness")
@click.option("--endpoint", "endpoint_path", required=True, type=click.Path(exists=True))
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True)
@click.pass_context
def judge_faithfulness_cmd(ctx, endpoint_path, in_path, out_path) -> None:
    out = _resolve(ctx.obj.get("out_dir"), out_path)
    config = load_endpoint_config(endpoint_path)
    rows = []
    with open(in_path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rows.append(json.loads(line))

    def one(row: dict):
        v = gateway.judge_faithfulness(
            config, row["src"], row["mt"], row["explanation"], row["lang_pair"]
        )
        return row, v

    results = gateway.run_batch(one, rows, config.max_concurrency)
    by_lang: dict[str, list[int]] = {}
    with open(out, "w", encoding="utf-8") as fh:
        for row, v in results:
            fh.write(json.dumps({
                "id": row.get("id"),
                "lang_pair": row["lang_pair"],
                "faithfulness_score": v.faithfulness_score,
                "brief_reason": v.brief_reason,
            }, ensure_ascii=False) + "\n")
            by_lang.setdefault(row["lang_pair"], []).append(v.faithfulness_score)
    write_manifest(out, "judge faithfulness", {"model": config.model_name},
                   [in_path, endpoint_path])
    for lang_pair, vals in sorted(by_lang.items()):
        click.echo(f"{lang_pair}: mean faithfulness {sum(vals) / len(vals):.2f} (n={len(vals)})")


@main.group(name="agent")
def agent_group() -> None:
    """Evaluate-revise agent."""


def load_agent_config(path: str | Path) -> agent_mod.AgentConfig:
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    feedback = gateway.EndpointConfig(**data["feedback"])
    refinement = gateway.EndpointConfig(**data["refinement"])
    options = data.get("agent", {})
    if "selection" in options:
        options["selection"] = agent_mod.Selection(options["selection"])
    return agent_mod.AgentConfig(
        feedback_endpoint=feedback, refinement_endpoint=refinement, **options
    )


@agent_group.command("run")
@click.option("--cfg", "cfg_path", required=True, type=click.Path(exists=True))
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--self-refine", is_flag=True, help="Run the no-feedback control arm.")
@click.option("--out", "out_path", required=True)
@click.pass_context
def agent_run(ctx, cfg_path, in_path, self_refine, out_path) -> None:
    out = _resolve(ctx.obj.get("out_dir"), out_path)
    config = load_agent_config(cfg_path)
    segments = corpus.load_segments(in_path)
    runner = agent_mod.self_refine_baseline if self_refine else agent_mod.run_loop

    def one(segment: corpus.Segment):
        return runner(config, segment.src, segment.mt, segment.lang_pair, segment.ref)

    transcripts = gateway.run_batch(
        one, list(segments.segments), config.feedback_endpoint.max_concurrency
    )
    agent_mod.write_transcripts(transcripts, out)
    write_manifest(out, "agent run", {"self_refine": self_refine}, [in_path, cfg_path])
    click.echo(f"wrote {len(transcripts)} transcripts to {out}")


if __name__ == "__main__":
    main()
