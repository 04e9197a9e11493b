"""
EEGM2 命令行接口

子命令：synth、pretrain、eval、bench、ablate。每次运行都把解析后的配置写到输出目录的
resolved_config.json；输出目录非空时需要 --force 才会覆盖。
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import typer
from rich.console import Console
from rich.panel import Panel
from rich.progress import Progress, SpinnerColumn, TextColumn
from rich.table import Table

from ..arch.factory import build_variant, load_checkpoint
from ..bench.harness import BenchRecord, bench_variant, loglog_slope, records_frame, write_sweep
from ..config import ArchConfig, LossConfig, RunConfig
from ..data.dataset import SignalBatch, load_windows, subject_split
from ..data.quality import check_stationarity
from ..data.synth import synth_generate
from ..exceptions import EEGM2Error
from ..logging_config import setup_logging
from ..representation.metrics import ProbeReport
from ..representation.probes import probe_evaluate
from ..train.finetune import finetune
from ..train.pretrain import (
    LOSS_CURVE_FILE,
    PretrainResult,
    evaluate_reconstruction,
    mean_predictor_acmse,
    reconstruct,
)

app = typer.Typer(
    name="eegm2",
    help="EEGM2 - 多通道信号自监督重建与表征学习工具",
    add_completion=False,
)
console = Console()
err_console = Console(stderr=True)
logger = logging.getLogger(__name__)

CHECKPOINT_FILE = "checkpoint.ckpt"
RESOLVED_CONFIG_FILE = "resolved_config.json"
EVAL_MODES = ("linear", "light", "fine", "scratch")


def _output_dir(command: str, output: Optional[Path], config: RunConfig) -> Path:
    """--output 优先，其次环境变量 EEGM2_OUTPUT_ROOT/<命令>，最后配置中的 output_dir/<命令>"""
    if output is not None:
        return output
    root = os.getenv("EEGM2_OUTPUT_ROOT")
    return Path(root) / command if root else config.output_dir / command


def _prepare_run(command: str,
                 config_path: Optional[Path],
                 overrides: Dict[str, Any],
                 output: Optional[Path],
                 force: bool,
                 verbose: bool,
                 reuse: bool = False) -> Tuple[RunConfig, Path]:
    """加载配置、检查输出目录、写出解析后的配置并初始化日志"""
    overrides = {**overrides, "force": force or None}
    config = RunConfig.from_file(config_path, overrides)
    out_dir = _output_dir(command, output, config)
    if out_dir.exists() and any(out_dir.iterdir()) and not reuse:
        if not config.force:
            raise EEGM2Error(f"输出目录 {out_dir} 非空，使用 --force 覆盖")
        logger.warning("覆盖已有输出目录 %s", out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config.dump(out_dir / RESOLVED_CONFIG_FILE)
    setup_logging("DEBUG" if verbose else None, out_dir / "logs" / "eegm2.log")
    logger.info("%s: 输出目录 %s", command, out_dir)
    return config, out_dir


def _fail(e: Exception, verbose: bool) -> None:
    err_console.print(f"❌ {type(e).__name__}: {e}", style="bold red")
    if verbose:
        import traceback
        err_console.print(traceback.format_exc())
    raise typer.Exit(1)


def _require_data(config: RunConfig) -> Path:
    if config.data is None:
        raise EEGM2Error("需要通过 --data 或配置文件指定数据集清单")
    return config.data


def _load_splits(config: RunConfig) -> Tuple[SignalBatch, SignalBatch, SignalBatch]:
    batch = load_windows(_require_data(config), config.window_len, config.stride)
    train, val, test = subject_split(batch, config.split, config.seed)
    console.print(
        f"📊 {len(batch)} 个窗口 ([{batch.channels}, {batch.length}])，"
        f"按被试划分为 {len(train)}/{len(val)}/{len(test)}"
    )
    return train, val, test


def _write_json(path: Path, payload: Dict[str, Any]) -> None:
    path.write_text(json.dumps(payload, ensure_ascii=False, indent=2, default=str), encoding="utf-8")


@app.command()
def synth(
    config_file: Optional[Path] = typer.Option(None, "--config", "-c", help="JSON 配置文件"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="输出目录"),
    subjects: Optional[int] = typer.Option(None, "--subjects", help="被试数"),
    windows: Optional[int] = typer.Option(None, "--windows", help="每个被试的窗口数"),
    channels: Optional[int] = typer.Option(None, "--channels", help="通道数"),
    length: Optional[int] = typer.Option(None, "--length", help="窗口长度"),
    fs: Optional[float] = typer.Option(None, "--fs", help="采样率 (Hz)"),
    amplitude: Optional[float] = typer.Option(None, "--amplitude", help="alpha 振荡幅度，0 为无效应对照"),
    seed: Optional[int] = typer.Option(None, "--seed", help="随机种子"),
    check_quality: bool = typer.Option(False, "--check-quality", help="对第一条记录做平稳性检验"),
    force: bool = typer.Option(False, "--force", help="覆盖非空输出目录"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="详细输出"),
):
    """
    生成合成数据集（清单 + 每条记录一个载荷文件）
    """
    console.print(Panel.fit("🧪 合成数据集", style="bold blue"))
    try:
        config, out_dir = _prepare_run("synth", config_file, {
            "synth.n_subjects": subjects, "synth.windows_per_subject": windows,
            "synth.channels": channels, "synth.window_len": length, "synth.fs": fs,
            "synth.alpha_amplitude": amplitude, "synth.seed": seed,
        }, output, force, verbose)
        manifest_path, manifest = synth_generate(config.synth, out_dir)
        table = Table(title="数据集概览")
        table.add_column("项目", style="cyan")
        table.add_column("值", style="magenta")
        table.add_row("名称", manifest.name)
        table.add_row("被试数", str(len(manifest.subjects)))
        table.add_row("记录数", str(len(manifest.records)))
        table.add_row("通道数", str(manifest.channels))
        table.add_row("采样率", f"{manifest.sampling_rate_hz:g} Hz")
        table.add_row("清单", str(manifest_path))
        console.print(table)

        if check_quality and manifest.records:
            from ..diffcore.serialization import load_tensor

            record = manifest.records[0]
            result = check_stationarity(load_tensor(out_dir / record.file))
            console.print(f"📈 {record.file}: {result['overall']['interpretation']}")
        console.print("🎉 数据集生成完成！", style="bold green")
    except typer.Exit:
        raise
    except Exception as e:
        _fail(e, verbose)


def _display_history(result: PretrainResult) -> None:
    table = Table(title="预训练损失")
    for column, style in (("epoch", "cyan"), ("train_loss", "magenta"), ("val_loss", "yellow"),
                          ("acmse", "green"), ("seconds", "blue")):
        table.add_column(column, style=style)
    for record in result.history[-10:]:
        table.add_row(str(record["epoch"]), f"{record['train_loss']:.6f}", f"{record['val_loss']:.6f}",
                      f"{record['acmse']:.6f}", f"{record['seconds']:.2f}")
    console.print(table)


@app.command("pretrain")
def pretrain_cmd(
    data: Optional[Path] = typer.Option(None, "--data", "-d", help="数据集清单"),
    config_file: Optional[Path] = typer.Option(None, "--config", "-c", help="JSON 配置文件"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="输出目录"),
    preset: Optional[str] = typer.Option(None, "--preset", help="结构预设 full/light/tiny"),
    variant: Optional[str] = typer.Option(None, "--variant", help="消融变体 full/s1..s5"),
    epochs: Optional[int] = typer.Option(None, "--epochs", help="epoch 数"),
    batch_size: Optional[int] = typer.Option(None, "--batch-size", help="批大小"),
    max_lr: Optional[float] = typer.Option(None, "--max-lr", help="最大学习率"),
    window: Optional[int] = typer.Option(None, "--window", help="切窗长度"),
    dtype: Optional[str] = typer.Option(None, "--dtype", help="float32/float64"),
    seed: Optional[int] = typer.Option(None, "--seed", help="随机种子"),
    resume: bool = typer.Option(False, "--resume", help="从输出目录中的检查点继续训练"),
    save_plots: bool = typer.Option(False, "--save-plots/--no-save-plots", help="是否保存图表"),
    force: bool = typer.Option(False, "--force", help="覆盖非空输出目录"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="详细输出"),
):
    """
    自监督预训练，输出检查点、指标日志与损失曲线
    """
    console.print(Panel.fit("🧠 EEGM2 预训练", style="bold blue"))
    try:
        config, out_dir = _prepare_run("pretrain", config_file, {
            "data": str(data) if data else None, "preset": preset,
            "variant": variant, "optim.epochs": epochs, "optim.batch_size": batch_size,
            "optim.max_lr": max_lr, "window_len": window, "dtype": dtype, "seed": seed,
        }, output, force, verbose, reuse=resume)
        train, val, test = _load_splits(config)
        checkpoint_path = out_dir / CHECKPOINT_FILE
        if resume:
            model = load_checkpoint(checkpoint_path, dtype=config.dtype, in_channels=train.channels).model
        else:
            arch = ArchConfig.preset(config.preset, in_channels=train.channels, variant=config.variant)
            model = build_variant(arch, seed=config.seed, dtype=config.dtype)
        loss = LossConfig.for_variant(config.variant, config.loss.alpha, config.loss.beta)
        console.print(f"⚙️ EEGM2-{model.config.variant.value} ({config.preset}): "
                      f"{model.num_parameters():,} 个参数")

        with Progress(SpinnerColumn(), TextColumn("[progress.description]{task.description}"),
                      console=console) as progress:
            task = progress.add_task("🏋️ 训练中...", total=None)
            result = _run_pretrain(model, train, val, config, loss, out_dir, checkpoint_path, resume)
            progress.update(task, description="✅ 训练完成")

        _display_history(result)
        held_out = test if len(test) else val
        metrics = evaluate_reconstruction(model, held_out, loss, config.optim.batch_size)
        baseline = mean_predictor_acmse(train, held_out)
        console.print(f"📉 测试集 ACMSE: {metrics['acmse']:.6f} (均值预测基线 {baseline:.6f})")
        _write_json(out_dir / "pretrain_summary.json", {
            "variant": model.config.variant.value,
            "param_count": model.num_parameters(),
            "epochs": result.state.epoch,
            "steps": result.state.step,
            "mean_epoch_seconds": result.mean_epoch_seconds,
            "test_loss": metrics["loss"],
            "test_acmse": metrics["acmse"],
            "mean_predictor_acmse": baseline,
        })

        if save_plots:
            from ..visualization.plotter import SignalPlotter

            plotter = SignalPlotter()
            plotter.plot_loss_curve(pd.read_csv(out_dir / LOSS_CURVE_FILE),
                                    save_path=str(out_dir / "loss_curve.png"))
            x = held_out.x[:1].astype(model.dtype)
            x_hat = reconstruct(model, x)
            plotter.plot_reconstruction(x[0], x_hat[0], fs=held_out.sampling_rate,
                                        save_path=str(out_dir / "reconstruction.png"))
            plotter.plot_spectrum(x[0], x_hat[0], fs=held_out.sampling_rate,
                                  save_path=str(out_dir / "spectrum.png"))
            console.print(f"📊 图表已保存到: {out_dir}")
        console.print(f"💾 检查点: {checkpoint_path}")
        console.print("🎉 预训练完成！", style="bold green")
    except typer.Exit:
        raise
    except Exception as e:
        _fail(e, verbose)


def _run_pretrain(model, train: SignalBatch, val: SignalBatch, config: RunConfig, loss: LossConfig,
                  out_dir: Path, checkpoint_path: Path, resume: bool) -> PretrainResult:
    """用按被试划分的验证集做验证；验证集为空时按记录从训练集留出"""
    from ..train.optim import TrainState
    from ..train.pretrain import Pretrainer, state_path_for

    state = TrainState.load(state_path_for(checkpoint_path)) if resume else None
    trainer = Pretrainer(model, config.optim, loss, seed=config.seed, output_dir=out_dir, state=state)
    return trainer.fit(train, val=val if len(val) else None, checkpoint_path=checkpoint_path,
                       metadata={"preset": config.preset, "data": str(config.data)})


def _display_report(report: ProbeReport) -> None:
    table = Table(title=f"评估结果 ({report.mode})")
    table.add_column("指标", style="cyan")
    table.add_column("均值", style="magenta")
    table.add_column("标准差", style="yellow")
    for key, value in report.summary().items():
        table.add_row(key, f"{value['mean']:.4f}", f"{value['std']:.4f}")
    console.print(table)


@app.command("eval")
def eval_cmd(
    mode: str = typer.Option("light", "--mode", "-m", help="linear / light / fine / scratch"),
    data: Optional[Path] = typer.Option(None, "--data", "-d", help="数据集清单"),
    checkpoint: Optional[Path] = typer.Option(None, "--checkpoint", help="预训练检查点"),
    config_file: Optional[Path] = typer.Option(None, "--config", "-c", help="JSON 配置文件"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="输出目录"),
    preset: Optional[str] = typer.Option(None, "--preset", help="scratch 模式的结构预设"),
    variant: Optional[str] = typer.Option(None, "--variant", help="scratch 模式的消融变体"),
    layer: Optional[str] = typer.Option(None, "--layer", help="探针取特征位置"),
    epochs: Optional[int] = typer.Option(None, "--epochs", help="微调 epoch 数 (<= 5)"),
    window: Optional[int] = typer.Option(None, "--window", help="切窗长度"),
    seed: Optional[int] = typer.Option(None, "--seed", help="数据划分种子"),
    export: bool = typer.Option(False, "--export", help="导出测试集表征 CSV（探针模式）"),
    force: bool = typer.Option(False, "--force", help="覆盖非空输出目录"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="详细输出"),
):
    """
    下游评估：线性探针、非线性探针、微调或从零训练，报告三个种子的均值 ± 标准差
    """
    console.print(Panel.fit(f"🎯 下游评估 ({mode})", style="bold blue"))
    try:
        if mode not in EVAL_MODES:
            raise EEGM2Error(f"未知模式: {mode}，可选 {list(EVAL_MODES)}")
        config, out_dir = _prepare_run("eval", config_file, {
            "data": str(data) if data else None,
            "checkpoint": str(checkpoint) if checkpoint else None,
            "preset": preset, "variant": variant, "probe.layer": layer,
            "finetune.epochs": epochs, "window_len": window, "seed": seed,
        }, output, force, verbose)
        if mode != "scratch":
            if config.checkpoint is None:
                raise EEGM2Error(f"--mode {mode} 需要 --checkpoint")
            if not config.checkpoint.exists():
                raise FileNotFoundError(f"检查点不存在: {config.checkpoint}")
        train, val, test = _load_splits(config)
        train = SignalBatch.concat([train, val]) if len(val) else train

        if mode in ("linear", "light"):
            model = load_checkpoint(config.checkpoint, dtype=config.dtype, in_channels=train.channels).model
            report = probe_evaluate(model, train, test, mode, config.probe)
            if export:
                from ..representation.export import export_representations
                from ..representation.tap import encode

                z = encode(model, test.x, config.probe.layer, config.probe.batch_size)
                ids = [f"{r}#{i}" for i, r in enumerate(test.records)] if test.records is not None else None
                export_representations(z, out_dir / "representations.csv", ids, test.y)
        elif mode == "fine":
            report, _ = finetune(config.checkpoint, train, test, config.finetune, dtype=config.dtype)
        else:
            arch = ArchConfig.preset(config.preset, in_channels=train.channels, variant=config.variant)
            report, _ = finetune(None, train, test, config.finetune, arch=arch, dtype=config.dtype)

        _display_report(report)
        _write_json(out_dir / "eval_report.json", report.to_dict())
        console.print(f"💾 评估报告已保存到: {out_dir / 'eval_report.json'}")
        console.print("🎉 评估完成！", style="bold green")
    except typer.Exit:
        raise
    except Exception as e:
        _fail(e, verbose)


def _parse_list(value: Optional[str], cast=str) -> Optional[List[Any]]:
    if value is None:
        return None
    return [cast(v.strip()) for v in value.split(",") if v.strip()]


@app.command()
def bench(
    variants: Optional[str] = typer.Option(None, "--variants", help="逗号分隔的变体，如 full,light,s5"),
    seq_lens: Optional[str] = typer.Option(None, "--seq-lens", help="逗号分隔的序列长度"),
    config_file: Optional[Path] = typer.Option(None, "--config", "-c", help="JSON 配置文件"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="输出目录"),
    cap_gb: Optional[float] = typer.Option(None, "--cap-gb", help="内存上限 (GiB)"),
    memory_batch: Optional[int] = typer.Option(None, "--memory-batch", help="峰值内存记账的等价批大小"),
    warmup: Optional[int] = typer.Option(None, "--warmup", help="预热次数"),
    runs: Optional[int] = typer.Option(None, "--runs", help="计时次数"),
    seed: Optional[int] = typer.Option(None, "--seed", help="随机种子"),
    save_plots: bool = typer.Option(False, "--save-plots/--no-save-plots", help="是否保存图表"),
    force: bool = typer.Option(False, "--force", help="覆盖非空输出目录"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="详细输出"),
):
    """
    峰值内存与推理速度随序列长度的扫描
    """
    console.print(Panel.fit("⏱️ 推理基准测试", style="bold blue"))
    records: List[BenchRecord] = []
    config: Optional[RunConfig] = None
    out_dir: Optional[Path] = None
    try:
        config, out_dir = _prepare_run("bench", config_file, {
            "bench.variants": _parse_list(variants), "bench.seq_lens": _parse_list(seq_lens, int),
            "bench.cap_bytes": int(cap_gb * 1024 ** 3) if cap_gb else None,
            "bench.memory_batch_size": memory_batch,
            "bench.warmup": warmup, "bench.runs": runs, "seed": seed,
        }, output, force, verbose)
        bench_config = config.bench
        with Progress(SpinnerColumn(), TextColumn("[progress.description]{task.description}"),
                      console=console) as progress:
            for name in bench_config.variants:
                task = progress.add_task(f"📏 {name}...", total=None)
                records.extend(bench_variant(name, bench_config.seq_lens, bench_config, config.seed))
                progress.update(task, description=f"✅ {name} 完成")
        csv_path, _ = write_sweep(records, out_dir, bench_config, config.seed)

        table = Table(title="基准结果")
        for column in ("variant", "seq_len", "peak_mem_bytes", "samples_per_ms", "param_count", "oom"):
            table.add_column(column)
        for r in records:
            table.add_row(r.variant, str(r.seq_len), f"{r.peak_mem_bytes:,}", f"{r.samples_per_ms:.4f}",
                          f"{r.param_count:,}", "⚠️ OOM" if r.oom else "")
        console.print(table)
        for name in bench_config.variants:
            own = [r for r in records if r.variant == name]
            try:
                console.print(f"📈 {name}: 峰值内存对数斜率 {loglog_slope(own, 'peak_mem'):.3f}")
            except ValueError as e:
                console.print(f"📈 {name}: 无法拟合斜率 ({e})", style="yellow")

        if save_plots:
            from ..visualization.plotter import SignalPlotter

            plotter = SignalPlotter()
            frame = records_frame(records)
            plotter.plot_scaling(frame, "peak_mem_bytes", save_path=str(out_dir / "memory_scaling.png"))
            plotter.plot_scaling(frame, "samples_per_ms", save_path=str(out_dir / "speed_scaling.png"))
        console.print(f"💾 结果已保存到: {csv_path}")
        console.print("🎉 基准测试完成！", style="bold green")
    except typer.Exit:
        raise
    except Exception as e:
        if records and config is not None and out_dir is not None:
            write_sweep(records, out_dir, config.bench, config.seed, partial=True)
        _fail(e, verbose)


def _write_ablation(rows: List[Dict[str, Any]], out_dir: Path, requested: List[str],
                    partial: bool = False) -> pd.DataFrame:
    """写出 ablation.csv 与 ablation_metadata.json"""
    frame = pd.DataFrame(rows)
    frame.to_csv(out_dir / "ablation.csv", index=False)
    _write_json(out_dir / "ablation_metadata.json", {
        "requested_variants": list(requested),
        "completed_variants": [row["variant"] for row in rows],
        "partial": partial,
    })
    return frame


@app.command()
def ablate(
    data: Optional[Path] = typer.Option(None, "--data", "-d", help="数据集清单"),
    variants: Optional[str] = typer.Option(None, "--variants", help="逗号分隔的变体，默认 full,s1,s2"),
    config_file: Optional[Path] = typer.Option(None, "--config", "-c", help="JSON 配置文件"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="输出目录"),
    preset: Optional[str] = typer.Option(None, "--preset", help="结构预设"),
    epochs: Optional[int] = typer.Option(None, "--epochs", help="预训练 epoch 数"),
    mode: str = typer.Option("light", "--mode", "-m", help="下游探针 linear / light"),
    window: Optional[int] = typer.Option(None, "--window", help="切窗长度"),
    seed: Optional[int] = typer.Option(None, "--seed", help="随机种子"),
    save_plots: bool = typer.Option(False, "--save-plots/--no-save-plots", help="是否保存图表"),
    force: bool = typer.Option(False, "--force", help="覆盖非空输出目录"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="详细输出"),
):
    """
    在同一数据集上比较各消融变体的重建误差、下游指标与每 epoch 训练耗时
    """
    console.print(Panel.fit("🔬 消融比较", style="bold blue"))
    rows: List[Dict[str, Any]] = []
    config: Optional[RunConfig] = None
    out_dir: Optional[Path] = None
    try:
        if mode not in ("linear", "light"):
            raise EEGM2Error(f"消融只支持探针模式 linear/light，得到 {mode}")
        config, out_dir = _prepare_run("ablate", config_file, {
            "data": str(data) if data else None, "ablate_variants": _parse_list(variants),
            "preset": preset, "optim.epochs": epochs, "window_len": window, "seed": seed,
        }, output, force, verbose)
        train, val, test = _load_splits(config)
        probe_train = SignalBatch.concat([train, val]) if len(val) else train
        for name in config.ablate_variants:
            arch = ArchConfig.preset(config.preset, in_channels=train.channels, variant=name)
            model = build_variant(arch, seed=config.seed, dtype=config.dtype)
            loss = LossConfig.for_variant(arch.variant, config.loss.alpha, config.loss.beta)
            variant_dir = out_dir / arch.variant.value
            console.print(f"⚙️ EEGM2-{arch.variant.value}: {model.num_parameters():,} 个参数")
            result = _run_pretrain(model, train, val, config, loss, variant_dir,
                                   variant_dir / CHECKPOINT_FILE, resume=False)
            recon = evaluate_reconstruction(model, test, loss, config.optim.batch_size)
            report = probe_evaluate(model, probe_train, test, mode, config.probe)
            summary = report.summary()
            rows.append({
                "variant": arch.variant.value,
                "param_count": model.num_parameters(),
                "seconds_per_epoch": result.mean_epoch_seconds,
                "acmse": recon["acmse"],
                "balanced_acc_mean": summary["balanced_acc"]["mean"],
                "balanced_acc_std": summary["balanced_acc"]["std"],
                "auroc_mean": summary["auroc"]["mean"],
                "auroc_std": summary["auroc"]["std"],
            })

        frame = _write_ablation(rows, out_dir, config.ablate_variants)
        table = Table(title="消融结果")
        for column in frame.columns:
            table.add_column(column)
        for row in frame.itertuples(index=False):
            table.add_row(*[f"{v:.4f}" if isinstance(v, (float, np.floating)) else str(v) for v in row])
        console.print(table)
        if save_plots:
            from ..visualization.plotter import SignalPlotter

            SignalPlotter().plot_comparison(
                frame, ["acmse", "balanced_acc_mean", "seconds_per_epoch"],
                save_path=str(out_dir / "ablation.png"),
            )
        console.print(f"💾 消融结果已保存到: {out_dir / 'ablation.csv'}")
        console.print("🎉 消融比较完成！", style="bold green")
    except typer.Exit:
        raise
    except Exception as e:
        if rows and config is not None and out_dir is not None:
            _write_ablation(rows, out_dir, config.ablate_variants, partial=True)
            err_console.print(f"⚠️ 已保存 {len(rows)} 个已完成变体的部分结果", style="yellow")
        _fail(e, verbose)


@app.command()
def version():
    """
    显示版本信息
    """
    from .. import __version__

    console.print(f"EEGM2 toolkit v{__version__}")


def main():
    app()


if __name__ == "__main__":
    main()
