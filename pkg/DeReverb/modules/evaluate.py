#  Copyright (c) 2025 DeReverb contributors
#  Licensed under the GNU AGPL v3.0: https://www.gnu.org/licenses/agpl-3.0.html
#  Part of the DeReverb project. All rights reserved where applicable.

from pathlib import Path
from typing import Optional, Sequence

import aiofiles

from DeReverb.core import (
    AnalysisConfig,
    ExperimentConfig,
    ManifestRecord,
    ManifestStore,
    MapperWrapper,
    MetricRecord,
    MetricReport,
    SpectralMapper,
    config,
    measure,
    parse_model_id,
    read_wav,
)
from DeReverb.core._errors import DataError
from DeReverb.logger import LOGGER
from DeReverb.modules.utils import render_table, run_limited, write_csv

CLEAN_ROW = "Clean"
REVERB_ROW = "Reverberation"
METRIC_LABELS = {"stoi": "STOI", "sdi": "SDI", "lsd": "LSD (dB)"}


def score_utterance(
    record: ManifestRecord,
    root: Path,
    mappers: dict[str, SpectralMapper],
    analysis: AnalysisConfig,
) -> list[MetricRecord]:
    clean = read_wav(record.clean_path, analysis.sample_rate)
    reverb = read_wav(root / record.reverb_path, analysis.sample_rate)
    uid, t60 = record.utterance_id, record.t60
    rows = [
        measure(clean, clean, uid, t60, CLEAN_ROW, analysis),
        measure(clean, reverb, uid, t60, REVERB_ROW, analysis),
    ]
    for name, mapper in mappers.items():
        rows.append(measure(clean, mapper.dereverb(reverb), uid, t60, name, analysis))
    LOGGER.debug("Scored %s", uid)
    return rows


def _is_matched(t60: float, train_t60: Sequence[float]) -> bool:
    return any(abs(t60 - t) < 1e-9 for t in train_t60)


def format_tables(report: MetricReport, train_t60: Sequence[float]) -> str:
    """Per-metric tables (matched T60 columns, then mismatched, then Avg) and an overall table."""
    table = report.table()
    conditions = report.conditions()
    matched = [t for t in conditions if _is_matched(t, train_t60)]
    mismatched = [t for t in conditions if not _is_matched(t, train_t60)]
    header = ["Model", *[f"{t:g}s" for t in matched], "|", *[f"{t:g}s" for t in mismatched], "Avg"]

    blocks = []
    for metric, label in METRIC_LABELS.items():
        rows = []
        for model, per_condition in table.items():
            rows.append([
                model,
                *[per_condition[t][metric] for t in matched],
                "|",
                *[per_condition[t][metric] for t in mismatched],
                per_condition[-1.0][metric],
            ])
        title = (
            f"{label}: matched T60 {{{', '.join(f'{t:g}' for t in matched)}}} | "
            f"mismatched T60 {{{', '.join(f'{t:g}' for t in mismatched)}}}"
        )
        blocks.append(render_table(title, header, rows))

    overall = [[model, *[per[-1.0][m] for m in METRIC_LABELS]] for model, per in table.items()]
    blocks.append(render_table("Overall averages", ["Model", *METRIC_LABELS.values()], overall))
    return "\n".join(blocks)


async def cmd_evaluate(
    cfg: ExperimentConfig,
    models: Optional[Sequence[str]] = None,
    out: Optional[Path] = None,
) -> MetricReport:
    root = Path(out or cfg.output_dir)
    manifest = await ManifestStore(root).load()
    analysis = manifest.analysis

    mappers: dict[str, SpectralMapper] = {}
    for model_id in models or cfg.roster:
        mid = parse_model_id(model_id)
        artifact = mid.artifact(root)
        if not artifact.exists():
            raise DataError(f"missing artifact for {mid}: {artifact} (run `train --model '{mid}'` first)")
        mappers[str(mid)] = MapperWrapper(artifact, analysis)

    records = manifest.split("test")
    if not records:
        raise DataError(f"no test records in {root}")
    LOGGER.info("Evaluating %d models on %d test utterances", len(mappers), len(records))
    scored = await run_limited(config.WORKERS, score_utterance, [(r, root, mappers, analysis) for r in records])
    report = MetricReport().extend(row for rows in scored for row in rows)

    eval_dir = root / "eval"
    await write_csv(
        eval_dir / "metrics.csv",
        ("utterance_id", "condition", "model", "stoi", "sdi", "lsd"),
        [(r.utterance_id, r.condition, r.model, r.stoi, r.sdi, r.lsd) for r in report.records],
    )
    summary = []
    for model, per_condition in report.table().items():
        for condition, values in per_condition.items():
            label = "avg" if condition < 0 else condition
            summary.append((model, label, values["stoi"], values["sdi"], values["lsd"]))
    await write_csv(eval_dir / "summary.csv", ("model", "condition", "stoi", "sdi", "lsd"), summary)

    text = format_tables(report, manifest.train_t60)
    async with aiofiles.open(eval_dir / "tables.txt", "w", encoding="utf-8") as fh:
        await fh.write(text)
    LOGGER.info("Evaluation tables written to %s\n%s", eval_dir, text)
    return report
