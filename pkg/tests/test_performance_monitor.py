from datetime import timezone

from app.utils.performance_monitor import PerformanceMonitor, get_performance_monitor


class TestPerformanceMonitor:
    def test_run_lifecycle(self):
        monitor = PerformanceMonitor()
        monitor.start_run("r1", "cc")
        assert "r1" in monitor.metrics
        sum(i * i for i in range(10000))
        metrics = monitor.end_run("r1", cycles=50)
        assert metrics.status == "completed"
        assert metrics.wall_seconds > 0
        assert metrics.cpu_seconds >= 0
        assert metrics.rss_end_mb > 0
        assert metrics.seconds_per_cycle == metrics.wall_seconds / 50
        assert "r1" not in monitor.metrics

    def test_timestamps_are_timezone_aware(self):
        monitor = PerformanceMonitor()
        started = monitor.start_run("r4", "gs")
        metrics = monitor.end_run("r4")
        assert started.start_time.tzinfo is timezone.utc
        assert metrics.end_time.tzinfo is timezone.utc
        assert metrics.end_time >= metrics.start_time

    def test_failed_run(self):
        monitor = PerformanceMonitor()
        monitor.start_run("r2", "se")
        metrics = monitor.end_run("r2", status="failed", error_message="boom")
        assert metrics.status == "failed"
        assert metrics.seconds_per_cycle is None

    def test_unknown_run(self):
        assert PerformanceMonitor().end_run("missing") is None

    def test_run_ends_once(self):
        monitor = PerformanceMonitor()
        monitor.start_run("r3")
        assert monitor.end_run("r3") is not None
        assert monitor.end_run("r3") is None


def test_global_monitor_is_shared():
    assert get_performance_monitor() is get_performance_monitor()
