import pytest

from snnkit.bench import (
    DEFAULT_RUNS,
    BenchReport,
    bench_inference,
    compare_reports,
    estimate_memory,
)
from snnkit.model import Network
from snnkit.pruning import profile_spikes, prune_network, select_prunable
from snnkit.tensor import Shape

from conftest import build_bench_frames, build_bench_net, build_dense_net


class TestBench:
    def test_single_run_stats(self, toy_filter_net, toy_drive):
        report = bench_inference(toy_filter_net, toy_drive, runs=1)
        assert report.runs == 1
        assert report.mean_latency_s == report.min_latency_s == report.max_latency_s
        assert report.stddev_latency_s == 0.0
        assert report.mean_latency_s > 0.0

    def test_default_runs_is_500(self):
        assert DEFAULT_RUNS == 500

    def test_stats_ordering(self, toy_filter_net, toy_drive):
        report = bench_inference(toy_filter_net, toy_drive, runs=10)
        assert report.min_latency_s <= report.mean_latency_s <= report.max_latency_s

    def test_invalid_runs(self, toy_filter_net, toy_drive):
        with pytest.raises(ValueError):
            bench_inference(toy_filter_net, toy_drive, runs=0)

    def test_pruned_is_strictly_faster(self):
        net = build_bench_net()
        frames = build_bench_frames()
        profile = profile_spikes(net, [frames])
        pruned = prune_network(net, select_prunable(profile, net, 0))
        a = bench_inference(net, frames, runs=20, label="baseline")
        b = bench_inference(pruned, frames, runs=20, label="pruned")
        assert b.mean_latency_s < a.mean_latency_s
        assert b.mac_total < a.mac_total
        assert b.memory_estimate_bytes < a.memory_estimate_bytes

    def test_per_layer_breakdown(self, toy_filter_net, toy_drive):
        report = bench_inference(toy_filter_net, toy_drive, runs=2, per_layer=True)
        assert len(report.per_layer_time_s) == len(toy_filter_net.layers)
        assert all(v >= 0.0 for v in report.per_layer_time_s)

    def test_json_round_trip(self, toy_filter_net, toy_drive):
        report = bench_inference(toy_filter_net, toy_drive, runs=2, label="x")
        again = BenchReport.from_json(report.to_json())
        assert again == report

    def test_csv_row_matches_header(self, toy_filter_net, toy_drive):
        report = bench_inference(toy_filter_net, toy_drive, runs=1)
        assert len(report.to_csv_row().split(",")) == len(report.CSV_HEADER.split(","))


class TestMemory:
    def test_dense_breakdown(self):
        net = build_dense_net(in_side=10, hidden=128, classes=10)
        est = estimate_memory(net)
        assert est.weights_bytes == 4 * (100 * 128 + 128 + 128 * 10 + 10)
        assert est.state_bytes == 4 * 2 * (128 + 10)
        assert est.frame_bytes == 4 * 1 * 10 * 10
        assert est.total_bytes == est.weights_bytes + est.state_bytes + est.frame_bytes

    def test_empty_network_is_frame_buffer_only(self):
        net = Network(Shape((2, 34, 34)), 1, [])
        est = estimate_memory(net)
        assert est.weights_bytes == 0
        assert est.state_bytes == 0
        assert est.total_bytes == est.frame_bytes == 4 * 2 * 34 * 34

    def test_pruning_never_increases_estimate(self):
        net = build_bench_net()
        frames = build_bench_frames()
        profile = profile_spikes(net, [frames])
        pruned = prune_network(net, select_prunable(profile, net, 0))
        assert estimate_memory(pruned).total_bytes < estimate_memory(net).total_bytes


class TestCompare:
    def test_identical_reports(self, toy_filter_net, toy_drive):
        report = bench_inference(toy_filter_net, toy_drive, runs=1)
        cmp = compare_reports(report, report)
        assert cmp.speedup == 1.0
        assert cmp.mac_ratio == 1.0
        assert cmp.memory_ratio == 1.0

    def test_two_decimal_formatting(self):
        a = BenchReport("a", 1, 2.393, 2.393, 2.393, 0.0, 100, 100)
        b = BenchReport("b", 1, 0.224, 0.224, 0.224, 0.0, 100, 100)
        table = compare_reports(a, b).format_table("python", "native")
        assert "10.68x" in table
