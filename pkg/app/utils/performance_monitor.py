"""
性能监控模块
记录每次运行的耗时、进程CPU时间和内存占用
"""

import time
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Dict, Optional

import psutil
from loguru import logger

from app.utils.helpers import format_duration


@dataclass
class RunMetrics:
    """单次运行的性能指标"""
    run_id: str
    method: str
    start_time: datetime
    end_time: Optional[datetime] = None

    # wall clock and process CPU, seconds
    wall_start: float = 0.0
    wall_seconds: float = 0.0
    cpu_start: float = 0.0
    cpu_seconds: float = 0.0

    # resident set size, MiB
    rss_start_mb: float = 0.0
    rss_end_mb: float = 0.0

    cycles: int = 0
    status: str = "running"  # running, completed, failed
    error_message: str = ""

    @property
    def seconds_per_cycle(self) -> Optional[float]:
        return self.wall_seconds / self.cycles if self.cycles else None


def _process_cpu(process: psutil.Process) -> float:
    times = process.cpu_times()
    return times.user + times.system


def _rss_mb(process: psutil.Process) -> float:
    return process.memory_info().rss / (1024 ** 2)


class PerformanceMonitor:
    """性能监控器"""

    def __init__(self):
        self.metrics: Dict[str, RunMetrics] = {}
        self._process = psutil.Process()

    def start_run(self, run_id: str, method: str = "") -> RunMetrics:
        """开始监控一次运行"""
        metrics = RunMetrics(
            run_id=run_id,
            method=method,
            start_time=datetime.now(timezone.utc),
            wall_start=time.perf_counter(),
            cpu_start=_process_cpu(self._process),
            rss_start_mb=_rss_mb(self._process),
        )
        self.metrics[run_id] = metrics
        logger.debug(f"📊 Monitoring {run_id} ({method}), RSS {metrics.rss_start_mb:.1f} MiB")
        return metrics

    def end_run(self, run_id: str, status: str = "completed", cycles: int = 0,
                error_message: str = "") -> Optional[RunMetrics]:
        """结束监控并记录摘要，记录从活动列表中移除"""
        metrics = self.metrics.pop(run_id, None)
        if metrics is None:
            logger.warning(f"No monitoring record for {run_id}")
            return None

        metrics.end_time = datetime.now(timezone.utc)
        metrics.wall_seconds = time.perf_counter() - metrics.wall_start
        metrics.cpu_seconds = _process_cpu(self._process) - metrics.cpu_start
        metrics.rss_end_mb = _rss_mb(self._process)
        metrics.cycles = cycles
        metrics.status = status
        metrics.error_message = error_message
        self._log_summary(metrics)
        return metrics

    def _log_summary(self, metrics: RunMetrics):
        status_emoji = "✅" if metrics.status == "completed" else "❌" if metrics.status == "failed" else "⚠️"
        logger.info(f"{status_emoji} {metrics.run_id} ({metrics.method}) finished: {metrics.status}")
        wall, cpu = format_duration(metrics.wall_seconds), format_duration(metrics.cpu_seconds)
        logger.info(f"   ⏱️  wall {wall}, process CPU {cpu}")
        logger.info(f"   💾 RSS {metrics.rss_start_mb:.1f} → {metrics.rss_end_mb:.1f} MiB")
        if metrics.cycles:
            logger.info(f"   🔁 {metrics.cycles} cycles, {metrics.seconds_per_cycle:.3g}s per cycle")
        if metrics.error_message:
            logger.info(f"   ❌ {metrics.error_message}")


# 全局性能监控器实例
performance_monitor = PerformanceMonitor()


def get_performance_monitor() -> PerformanceMonitor:
    """获取性能监控器实例"""
    return performance_monitor
