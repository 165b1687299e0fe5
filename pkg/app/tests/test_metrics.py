#!/usr/bin/env python3
"""
Tests for metrics: window aggregation, the power proxy and comparison reports.
"""

import os
import sys
import unittest

# Add parent directory to path for module import
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from metrics import (
    COMPARISON_FIELDS,
    MetricsError,
    ProxyWeights,
    RunSummary,
    SimStats,
    aggregate,
    compare,
    improvement_report,
    markdown_report,
    power_proxy,
    proxy_table,
    saturation_throughput,
)
from simengine import Message
from topology import (
    ClosParams,
    build_baseline,
    build_benes,
    build_butterfly,
    build_clos,
    build_omega,
    meta_flatten,
)


def message(gen, inject, eject, flits=2, path=(0, 1, 2), intra=0):
    return Message(0, 0, 1, flits, gen, inject, eject, list(path), intra)


def stats(throughput=0.2, latency=10.0, window=(0, 100)):
    return SimStats(
        n_messages=10,
        avg_latency=latency,
        max_latency=int(latency) + 5,
        latency_histogram=(),
        throughput=throughput,
        offered_rate=throughput,
        accepted_rate=throughput,
        blocking_rate=0.1,
        avg_hops=5.0,
        avg_stages=5.0,
        avg_intra_hops=0.0,
        window_start=window[0],
        window_end=window[1],
    )


def summary(network, rate=0.2, parent=None, n=32, **kwargs):
    return RunSummary(network, "uniform", rate, 1, stats(**kwargs), n, 2, parent)


class TestAggregate(unittest.TestCase):

    def setUp(self):
        self.messages = [
            message(8, 9, 12),
            message(12, 12, 20, flits=4, path=(0, 1, 1, 2), intra=1),
            message(15, 16, 21),
            message(5, 5, 10),
            message(18, None, None),
        ]

    def test_window_counts_tails_leaving_inside(self):
        result = aggregate(self.messages, (10, 20), 4, attempts=10, denials=3)
        self.assertEqual(result.n_messages, 2)
        self.assertEqual(result.avg_latency, 6.0)
        self.assertEqual(result.max_latency, 8)
        self.assertEqual(result.latency_histogram, ((4, 1), (8, 1)))
        self.assertAlmostEqual(result.throughput, 0.15)
        self.assertAlmostEqual(result.offered_rate, 0.2)
        self.assertAlmostEqual(result.accepted_rate, 0.15)
        self.assertAlmostEqual(result.blocking_rate, 0.3)
        self.assertEqual(result.avg_hops, 3.5)
        self.assertEqual(result.avg_stages, 3.0)
        self.assertEqual(result.avg_intra_hops, 0.5)
        self.assertEqual(result.window, 10)
        self.assertFalse(result.empty)

    def test_empty_window(self):
        result = aggregate(self.messages, (30, 40), 4)
        self.assertTrue(result.empty)
        self.assertEqual(result.n_messages, 0)
        self.assertEqual(result.avg_latency, 0.0)
        self.assertEqual(result.throughput, 0.0)
        self.assertEqual(result.blocking_rate, 0.0)

    def test_invalid_window(self):
        with self.assertRaises(MetricsError):
            aggregate(self.messages, (10, 10), 4)
        with self.assertRaises(MetricsError):
            aggregate(self.messages, (0, 10), 0)

    def test_to_row_rounds_and_drops_histogram(self):
        row = aggregate(self.messages, (10, 13), 3).to_row()
        self.assertNotIn("latency_histogram", row)
        self.assertEqual(row["throughput"], round(2 / 9, 6))
        self.assertEqual(set(row), set(COMPARISON_FIELDS) - {"network", "workload", "rate", "seed"})

    def test_saturation_throughput(self):
        self.assertEqual(saturation_throughput([(0.1, 0.1), (0.3, 0.27), (0.5, 0.25)]), 0.27)
        self.assertEqual(saturation_throughput([]), 0.0)


class TestPowerProxy(unittest.TestCase):

    def test_port_counts_at_32(self):
        expected = {
            "omega": (build_omega(32), 80, 320, 128),
            "benes": (build_benes(32), 144, 576, 256),
            "clos": (build_clos(ClosParams(4, 16, 8)), 32, 576, 256),
            "mf_butterfly": (meta_flatten(build_butterfly(32)), 48, 256, 96),
            "mf_baseline": (meta_flatten(build_baseline(32)), 48, 296, 116),
        }
        for name, (net, routers, ports, channels) in expected.items():
            with self.subTest(network=name):
                report = power_proxy(net)
                self.assertEqual(report.network, name)
                self.assertEqual(report.router_count, routers)
                self.assertEqual(report.total_ports, ports)
                self.assertEqual(report.channel_count, channels)
                self.assertEqual(report.proxy_score, float(ports))

    def test_meta_flattening_lowers_the_proxy(self):
        for build in (build_omega, build_butterfly, build_baseline):
            parent = build(32)
            with self.subTest(network=parent.label):
                self.assertLess(
                    power_proxy(meta_flatten(parent)).proxy_score,
                    power_proxy(parent).proxy_score,
                )

    def test_crosspoints_and_weights(self):
        net = build_clos(ClosParams(4, 16, 8))
        report = power_proxy(net, ProxyWeights(ports=0, crosspoints=1))
        self.assertEqual(report.crosspoints, 8 * 64 + 16 * 64 + 8 * 64)
        self.assertEqual(report.proxy_score, 2048.0)
        channels_only = power_proxy(net, ProxyWeights(ports=0, channels=2))
        self.assertEqual(channels_only.proxy_score, 512.0)

    def test_intra_channels_counted(self):
        self.assertEqual(power_proxy(meta_flatten(build_baseline(32))).intra_channel_count, 52)
        self.assertEqual(power_proxy(build_omega(32)).intra_channel_count, 0)

    def test_invalid_weights(self):
        with self.assertRaises(MetricsError):
            ProxyWeights(ports=-1)
        with self.assertRaises(MetricsError):
            ProxyWeights(ports=0)

    def test_proxy_table_order(self):
        reports = [power_proxy(build_omega(16)), power_proxy(build_benes(16))]
        reports.append(power_proxy(build_butterfly(16)))
        ordered = [r.network for r in proxy_table(reports)]
        self.assertEqual(ordered, ["benes", "butterfly", "omega"])


class TestComparison(unittest.TestCase):

    def test_rows_sorted(self):
        table = compare([summary("omega", 0.3), summary("benes"), summary("omega", 0.1)])
        self.assertEqual(
            [(s.network, s.rate) for s in table.rows],
            [("benes", 0.2), ("omega", 0.1), ("omega", 0.3)],
        )
        self.assertEqual(table.flags, [])

    def test_mismatches_are_flagged(self):
        with self.assertLogs("metrics", level="WARNING"):
            table = compare([summary("omega"), summary("benes", n=16)])
        self.assertEqual(len(table.flags), 1)
        self.assertIn("N 32 differs from 16", table.flags[0])

    def test_empty_compare(self):
        with self.assertRaises(MetricsError):
            compare([])

    def test_csv(self):
        text = compare([summary("omega")]).to_csv()
        header, row = text.splitlines()
        self.assertEqual(header.split(","), COMPARISON_FIELDS)
        self.assertTrue(row.startswith("omega,uniform,0.2,1,10,10.0,"))

    def test_text_is_localized(self):
        table = compare([summary("omega", throughput=0.15)])
        self.assertIn("0.150", table.to_text("en_US"))
        self.assertIn("0,150", table.to_text("de_DE"))
        self.assertIn("10.0%", table.to_text())

    def test_improvement_report(self):
        rows = improvement_report(
            [
                summary("butterfly", throughput=0.2, latency=10.0),
                summary("mf_butterfly", parent="butterfly", throughput=0.3, latency=8.0),
                summary("mf_baseline", parent="baseline", throughput=0.3),
            ]
        )
        self.assertEqual(len(rows), 1)
        row = rows[0]
        self.assertEqual((row["network"], row["parent"]), ("mf_butterfly", "butterfly"))
        self.assertAlmostEqual(row["throughput_gain"], 0.5)
        self.assertAlmostEqual(row["latency_change"], -0.2)

    def test_markdown_report(self):
        summaries = [
            summary("butterfly", throughput=0.2),
            summary("mf_butterfly", parent="butterfly", throughput=0.3),
        ]
        proxies = [power_proxy(meta_flatten(build_butterfly(32)))]
        text = markdown_report(compare(summaries), proxies, improvement_report(summaries))
        self.assertTrue(text.startswith("## MinWeave report"))
        self.assertIn("### Power proxy", text)
        self.assertIn("| mf_butterfly | 48 | 256 |", text)
        self.assertIn("| mf_butterfly | butterfly | uniform | 0.2 | 50.0% |", text)
        self.assertIn("```", text)


if __name__ == "__main__":
    unittest.main()
