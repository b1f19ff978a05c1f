"""Batch driver: ``stlf ingest|evaluate|forecast|fit --config <path> ...``.

Exit codes: 0 success, 1 configuration error, 2 partial task failures,
3 fatal I/O. All outputs land inside the configured output directory.
"""

from __future__ import annotations

import argparse
import csv
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from stlf import arima, dshw, evaluate, modelio, narxrf, series as series_mod
from stlf.baseline import AveragingModel, avg_forecast, avg_residuals
from stlf.config import DataEntry, RunConfig, load_config
from stlf.errors import ConfigError, InSampleOriginError, StlfError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2
EXIT_IO = 3


def _load_entry(entry: DataEntry, max_gap: int) -> series_mod.HourlySeries:
    if entry.format == "long":
        s = series_mod.load_long_csv(entry.path, entry.timezone)
    else:
        s = series_mod.load_gefcom_wide(entry.load_path, entry.temp_path, entry.zone, entry.station)
    s = series_mod.repair_gaps(s, max_gap=max_gap)
    return series_mod.clamp_floor(s)


def cmd_ingest(cfg: RunConfig) -> int:
    out_dir = cfg.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    failures = []
    for entry in cfg.entries:
        try:
            s = _load_entry(entry, cfg.max_gap)
            rows.append([
                entry.series_id, entry.dataset, len(s),
                len(s.meta.get("repaired_indices", [])),
                s.meta.get("clamped", 0),
                f"{float(np.min(s.values)):.6g}", f"{float(np.max(s.values)):.6g}",
                s.timestamp(0).strftime("%Y-%m-%dT%H:%M:%SZ"),
                s.timestamp(len(s) - 1).strftime("%Y-%m-%dT%H:%M:%SZ"),
            ])
        except (StlfError, OSError) as exc:
            failures.append((entry.series_id, f"{type(exc).__name__}: {exc}"))
    try:
        with (out_dir / "manifest.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["series_id", "dataset", "hours", "repaired_hours",
                             "clamped_values", "min_kwh", "max_kwh", "start", "end"])
            writer.writerows(rows)
    except OSError as exc:
        print(f"fatal: cannot write manifest: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"ingested {len(rows)}/{len(cfg.entries)} series -> {out_dir / 'manifest.csv'}")
    for sid, msg in failures:
        print(f"FAILED {sid}: {msg}", file=sys.stderr)
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_evaluate(cfg: RunConfig) -> int:
    out_dir = cfg.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    failures = []
    for entry in cfg.entries:
        try:
            entries.append(evaluate.SeriesEntry(
                entry.series_id, entry.dataset, _load_entry(entry, cfg.max_gap)
            ))
        except (StlfError, OSError) as exc:
            failures.append((entry.series_id, f"{type(exc).__name__}: {exc}"))
    bench_cfg = evaluate.BenchmarkConfig(
        seed=cfg.seed, train_months=cfg.train_months, n_trees=cfg.n_trees, jobs=cfg.jobs
    )
    reports = evaluate.benchmark(entries, cfg.models, bench_cfg)
    failures.extend((r.series_id, r.error) for r in reports if r.error)

    try:
        evaluate.write_report_csv(reports, out_dir / "report.csv")
        medians = evaluate.median_mape(reports)
        with (out_dir / "median_mape.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["dataset", "model", "horizon", "median_mape"])
            for (dataset, model), mape in sorted(medians.items()):
                for k in range(evaluate.HORIZON):
                    writer.writerow([
                        dataset, model, k + 1,
                        "" if np.isnan(mape[k]) else f"{mape[k]:.6f}",
                    ])
        _write_summary(out_dir / "summary.txt", reports, medians)
    except OSError as exc:
        print(f"fatal: cannot write reports: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {out_dir / 'report.csv'} ({len(reports)} series/window/model tasks)")
    for sid, msg in failures:
        print(f"FAILED {sid}: {msg}", file=sys.stderr)
    return EXIT_PARTIAL if failures else EXIT_OK


def _write_summary(path: Path, reports, medians) -> None:
    with path.open("w") as fh:
        fh.write("median MAPE (%) by dataset/model/horizon\n")
        for (dataset, model), mape in sorted(medians.items()):
            cells = " ".join("  nan" if np.isnan(v) else f"{v:5.2f}" for v in mape)
            fh.write(f"{dataset:>12} {model:>9} | {cells}\n")
        fh.write("\ntraining seconds (sum over windows)\n")
        totals: dict[tuple[str, str], float] = {}
        for r in reports:
            if not r.error:
                key = (r.dataset, r.model)
                totals[key] = totals.get(key, 0.0) + r.train_seconds
        for (dataset, model), secs in sorted(totals.items()):
            fh.write(f"{dataset:>12} {model:>9} | {secs:10.2f}\n")


def _model_path(cfg: RunConfig, series_id: str, model: str) -> Path:
    return cfg.output_dir / "models" / f"{series_id}__{model}.bin"


def _fit_for_save(model: str, s: series_mod.HourlySeries, end_index: int, cfg: RunConfig, seed: int):
    train_hours = cfg.train_months * evaluate.MONTH_HOURS
    if model in ("origdshw", "moddshw"):
        variant = "original" if model == "origdshw" else "modified"
        train = evaluate.slice_series(s, end_index + 1 - train_hours, end_index + 1)
        fitted = dshw.fit(train, variant)
        return dshw.DshwModel(fitted.params, dshw.reclock(fitted.state, end_index))
    if model == "avgarima":
        window = range(end_index + 1 - train_hours, end_index + 1)
        residuals = avg_residuals(AveragingModel(s), window)
        return arima.with_clock(arima.stepwise_select(residuals), end_index)
    if model == "narxrf":
        return narxrf.fit_narx(
            evaluate.slice_series(s, 0, end_index + 1), seed, n_trees=cfg.n_trees, jobs=cfg.jobs
        )
    raise ConfigError(f"model {model!r} has no fitted state to save")


def cmd_fit(cfg: RunConfig, series_id: str | None, origin: str | None) -> int:
    targets = [e for e in cfg.entries if series_id in (None, e.series_id)]
    if not targets:
        print(f"unknown series {series_id!r}", file=sys.stderr)
        return EXIT_CONFIG
    (cfg.output_dir / "models").mkdir(parents=True, exist_ok=True)
    failures = 0
    for entry in targets:
        s = _load_entry(entry, cfg.max_gap)
        end_index = len(s) - 1 if origin is None else s.index_of(_parse_iso(origin))
        if not 0 <= end_index < len(s):
            print(f"origin outside series {entry.series_id}", file=sys.stderr)
            return EXIT_CONFIG
        for model in cfg.models:
            if model == "avg":
                continue  # nothing to persist: forecasts read weekly lags directly
            try:
                fitted = _fit_for_save(model, s, end_index, cfg, cfg.seed)
                path = _model_path(cfg, entry.series_id, model)
                modelio.save_model(path, fitted)
                print(f"saved {path}")
            except StlfError as exc:
                failures += 1
                print(f"FAILED {entry.series_id}/{model}: {exc}", file=sys.stderr)
    return EXIT_PARTIAL if failures else EXIT_OK


def _parse_iso(text: str) -> datetime:
    ts = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts


def _forecast_values(model_name: str, model_obj, s: series_mod.HourlySeries, origin: int) -> np.ndarray:
    if model_name == "avg":
        m = AveragingModel(s)
        return np.array([avg_forecast(m, origin, k) for k in range(1, 25)])
    if model_name in ("origdshw", "moddshw"):
        state, params = model_obj.state, model_obj.params
        if origin < state.clock:
            raise InSampleOriginError(f"origin {origin} precedes training end {state.clock}")
        for t in range(state.clock + 1, origin + 1):
            state = dshw.update(state, params, float(s.values[t]))
        return np.array([dshw.forecast(state, params, k) for k in range(1, 25)])
    if model_name == "avgarima":
        fit = model_obj
        if origin < fit.state.clock:
            raise InSampleOriginError(f"origin {origin} precedes training end {fit.state.clock}")
        avg_model = AveragingModel(s)
        for t in range(fit.state.clock + 1, origin + 1):
            fit = arima.arma_update(fit, float(s.values[t]) - avg_forecast(avg_model, t - 1, 1))
        return np.array([arima.avg_arima_forecast(avg_model, fit, origin, k) for k in range(1, 25)])
    if model_name == "narxrf":
        return np.array([narxrf.narx_forecast(model_obj, s, origin, k) for k in range(1, 25)])
    raise ConfigError(f"unknown model {model_name!r}")


def cmd_forecast(cfg: RunConfig, series_id: str, model_name: str, origin_text: str) -> int:
    entry = next((e for e in cfg.entries if e.series_id == series_id), None)
    if entry is None:
        print(f"unknown series {series_id!r}", file=sys.stderr)
        return EXIT_CONFIG
    if model_name not in cfg.models:
        print(f"model {model_name!r} not in configured models", file=sys.stderr)
        return EXIT_CONFIG
    s = _load_entry(entry, cfg.max_gap)
    origin = s.index_of(_parse_iso(origin_text))
    if not 0 <= origin < len(s):
        print(f"origin {origin_text} outside series", file=sys.stderr)
        return EXIT_CONFIG

    model_obj = None
    if model_name != "avg":
        path = _model_path(cfg, series_id, model_name)
        if path.exists():
            model_obj = modelio.load_model(path)
        elif cfg.fit_on_demand:
            model_obj = _fit_for_save(model_name, s, origin, cfg, cfg.seed)
        else:
            print(f"no saved model at {path} and fit_on_demand is off", file=sys.stderr)
            return EXIT_CONFIG

    try:
        values = _forecast_values(model_name, model_obj, s, origin)
    except StlfError as exc:
        print(f"forecast failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PARTIAL

    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    out_path = cfg.output_dir / f"forecast_{series_id}_{model_name}.csv"
    try:
        with out_path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["horizon", "timestamp", "forecast_kwh"])
            for k in range(1, 25):
                ts = s.timestamp(origin + k) if origin + k < len(s) else (
                    s.timestamp(len(s) - 1) + (origin + k - len(s) + 1) * (s.timestamp(1) - s.timestamp(0))
                )
                writer.writerow([k, ts.strftime("%Y-%m-%dT%H:%M:%SZ"), f"{values[k - 1]:.6f}"])
    except OSError as exc:
        print(f"fatal: cannot write forecast: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {out_path}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="stlf", description="automatic short-term load forecasting batch driver"
    )
    parser.add_argument("command", choices=["ingest", "evaluate", "forecast", "fit"])
    parser.add_argument("--config", required=True)
    parser.add_argument("--series", default=None)
    parser.add_argument("--model", default=None)
    parser.add_argument("--origin", default=None, help="ISO-8601 forecast origin")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--jobs", type=int, default=None)
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None or args.jobs is not None:
        from dataclasses import replace

        cfg = replace(
            cfg,
            seed=cfg.seed if args.seed is None else args.seed,
            jobs=cfg.jobs if args.jobs is None else max(1, args.jobs),
        )

    try:
        if args.command == "ingest":
            return cmd_ingest(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg)
        if args.command == "fit":
            return cmd_fit(cfg, args.series, args.origin)
        if args.command == "forecast":
            if not args.series or not args.model or not args.origin:
                print("forecast needs --series, --model and --origin", file=sys.stderr)
                return EXIT_CONFIG
            return cmd_forecast(cfg, args.series, args.model, args.origin)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"fatal I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
