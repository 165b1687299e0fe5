#!/usr/bin/env python3
"""
Tests for workload generation, trace files and node histograms.
"""

import os
import sys
import tempfile
import unittest
from pathlib import Path

# Add parent directory to path for module import
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
from scipy import stats

from workload import (
    TraceFormatError,
    TraceRecord,
    WorkloadError,
    WorkloadKind,
    WorkloadSpec,
    gen_uniform,
    generate,
    histogram,
    hotspot_preset,
    load_trace,
    offered_load,
    save_histogram,
    save_trace,
)

HORIZON = 4000


def circular_distance(records, n):
    return np.mean([min((r.dst - r.src) % n, (r.src - r.dst) % n) for r in records])


class TestSyntheticGenerators(unittest.TestCase):

    def test_uniform_offered_load(self):
        spec = WorkloadSpec("uniform", rate=0.2, n_terminals=32, seed=3)
        records = generate(spec, HORIZON)
        self.assertAlmostEqual(offered_load(records, 32, HORIZON), 0.2, delta=0.01)
        self.assertTrue(all(r.n_flits == 2 for r in records))
        self.assertTrue(all(0 <= r.cycle < HORIZON for r in records))

    def test_full_rate_uniform_load(self):
        spec = WorkloadSpec("uniform", rate=1.0, msg_flits=2, n_terminals=32, seed=1)
        records = gen_uniform(spec, 1000)
        self.assertAlmostEqual(offered_load(records, 32, 1000), 1.0, delta=0.05)

    def test_uniform_destinations_are_uniform(self):
        spec = WorkloadSpec("uniform", rate=0.3, n_terminals=16, seed=11)
        hist = histogram(generate(spec, HORIZON), 16)
        _, p_value = stats.chisquare(hist.dst_counts)
        self.assertGreater(p_value, 0.001)
        _, p_value = stats.chisquare(hist.src_counts)
        self.assertGreater(p_value, 0.001)

    def test_records_are_cycle_sorted(self):
        for kind, extra in (
            ("uniform", {}),
            ("normal", {}),
            ("exponential", {}),
            ("hotspot", {"preset": "fft_proxy"}),
        ):
            with self.subTest(kind=kind):
                spec = WorkloadSpec(kind, rate=0.25, n_terminals=32, seed=5, **extra)
                cycles = [r.cycle for r in generate(spec, 5000)]
                self.assertTrue(cycles)
                self.assertEqual(cycles, sorted(cycles))

    def test_same_seed_same_records(self):
        a = WorkloadSpec("exponential", rate=0.1, n_terminals=16, seed=42)
        b = WorkloadSpec("exponential", rate=0.1, n_terminals=16, seed=42)
        c = WorkloadSpec("exponential", rate=0.1, n_terminals=16, seed=43)
        self.assertEqual(generate(a, 2000), generate(b, 2000))
        self.assertNotEqual(generate(a, 2000), generate(c, 2000))

    def test_zero_rate_generates_nothing(self):
        for kind in ("uniform", "normal", "exponential"):
            with self.subTest(kind=kind):
                self.assertEqual(generate(WorkloadSpec(kind, rate=0.0), 1000), [])

    def test_exponential_offered_load_and_gaps(self):
        spec = WorkloadSpec("exponential", rate=0.2, msg_flits=4, n_terminals=32, seed=9)
        records = generate(spec, 10000)
        self.assertAlmostEqual(offered_load(records, 32, 10000), 0.2, delta=0.01)
        node_cycles = [r.cycle for r in records if r.src == 3]
        gaps = np.diff(node_cycles)
        self.assertAlmostEqual(float(np.mean(gaps)), 20.0, delta=3.0)

    def test_normal_destinations_cluster_near_source(self):
        normal = generate(WorkloadSpec("normal", rate=0.2, n_terminals=32, seed=2), HORIZON)
        uniform = generate(WorkloadSpec("uniform", rate=0.2, n_terminals=32, seed=2), HORIZON)
        self.assertLess(circular_distance(normal, 32), 4.5)
        self.assertGreater(circular_distance(uniform, 32), 7.0)

    def test_normal_sigma_default(self):
        self.assertEqual(WorkloadSpec("normal", n_terminals=32).effective_sigma, 4.0)
        self.assertEqual(WorkloadSpec("normal", sigma=2.0).effective_sigma, 2.0)

    def test_narrow_normal_stays_within_three_sigma(self):
        spec = WorkloadSpec("normal", rate=0.2, sigma=2.0, n_terminals=32, seed=13)
        from_ten = [r.dst for r in generate(spec, 20000) if r.src == 10]
        self.assertGreater(len(from_ten), 200)
        near = [d for d in from_ten if min((d - 10) % 32, (10 - d) % 32) <= 6]
        self.assertGreaterEqual(len(near) / len(from_ten), 0.95)


class TestHotspot(unittest.TestCase):

    def test_fft_proxy_hot_nodes(self):
        spec = WorkloadSpec("hotspot", rate=0.3, n_terminals=32, seed=1, preset="fft_proxy")
        hist = histogram(generate(spec, HORIZON), 32)
        self.assertEqual(sorted(hist.hottest("src", 2)), [15, 24])
        self.assertEqual(sorted(hist.hottest("dst", 4)), [0, 1, 2, 3])

    def test_hotspot_matches_weights(self):
        spec = WorkloadSpec(
            "hotspot", rate=0.3, n_terminals=32, seed=4, preset="waterspatial_proxy"
        )
        hist = histogram(generate(spec, HORIZON), 32)
        src_p, dst_p = spec.weights
        for counts, probs in ((hist.src_counts, src_p), (hist.dst_counts, dst_p)):
            expected = np.asarray(probs) * hist.total
            _, p_value = stats.chisquare(counts, expected)
            self.assertGreater(p_value, 0.001)

    def test_hotspot_offered_load(self):
        spec = WorkloadSpec("hotspot", rate=0.2, n_terminals=32, seed=8, preset="waternsq_proxy")
        records = generate(spec, HORIZON)
        self.assertAlmostEqual(offered_load(records, 32, HORIZON), 0.2, delta=0.01)

    def test_preset_scaled_to_other_sizes(self):
        src, dst = hotspot_preset("fft_proxy", 16, factor=4.0)
        self.assertEqual(list(np.flatnonzero(src == 4.0)), [7, 12])
        self.assertEqual(list(np.flatnonzero(dst == 4.0)), [0, 1])

    def test_preset_with_explicit_hot_nodes(self):
        src, dst = hotspot_preset("waterspatial_proxy", 32, factor=3.0, hot_nodes=[1, 2])
        self.assertEqual(list(np.flatnonzero(src == 3.0)), [1, 2])
        self.assertEqual(list(np.flatnonzero(dst == 3.0)), [1, 2])

    def test_preset_errors(self):
        with self.assertRaises(WorkloadError):
            hotspot_preset("nonexistent", 32)
        with self.assertRaises(WorkloadError):
            hotspot_preset("fft_proxy", 32, factor=0)
        with self.assertRaises(WorkloadError):
            hotspot_preset("fft_proxy", 32, hot_nodes=[40])

    def test_explicit_weights(self):
        weights = [1.0] * 8
        weights[5] = 10.0
        spec = WorkloadSpec("hotspot", rate=0.2, n_terminals=8, dst_weights=weights)
        src_p, dst_p = spec.weights
        self.assertAlmostEqual(float(src_p.sum()), 1.0)
        self.assertAlmostEqual(float(dst_p[5]), 10.0 / 17.0)


class TestWorkloadSpec(unittest.TestCase):

    def test_kind_is_parsed(self):
        self.assertEqual(WorkloadSpec("normal").kind, WorkloadKind.NORMAL)

    def test_invalid_parameters(self):
        cases = [
            dict(kind="bursty"),
            dict(kind="uniform", rate=1.5),
            dict(kind="uniform", rate=-0.1),
            dict(kind="uniform", msg_flits=0),
            dict(kind="normal", sigma=0),
            dict(kind="hotspot", rate=0.1),
            dict(kind="hotspot", rate=0.1, n_terminals=8, src_weights=[1, 2]),
            dict(kind="hotspot", rate=0.1, n_terminals=2, src_weights=[1, 0]),
            dict(kind="trace"),
        ]
        for kwargs in cases:
            with self.subTest(**kwargs):
                with self.assertRaises(WorkloadError):
                    WorkloadSpec(**kwargs)

    def test_names(self):
        self.assertEqual(WorkloadSpec("uniform").name, "uniform")
        self.assertEqual(WorkloadSpec("hotspot", preset="fft_proxy").name, "fft_proxy")
        self.assertEqual(WorkloadSpec("trace", trace_path="runs/fft.trace").name, "trace:fft")

    def test_weights_only_for_hotspot(self):
        with self.assertRaises(WorkloadError):
            WorkloadSpec("uniform").weights


class TestTraceFiles(unittest.TestCase):

    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.addCleanup(self.temp_dir.cleanup)
        self.dir = Path(self.temp_dir.name)

    def write(self, name, text):
        path = self.dir / name
        path.write_text(text, encoding="utf-8")
        return path

    def test_load_skips_comments_and_blanks(self):
        path = self.write("a.trace", "# cycle,src,dst,n_flits\n\n0,1,2,3\n 5 , 2 , 0 , 1 \n")
        self.assertEqual(
            load_trace(path, 4), [TraceRecord(0, 1, 2, 3), TraceRecord(5, 2, 0, 1)]
        )

    def test_unsorted_trace_is_sorted_with_warning(self):
        path = self.write("b.trace", "9,0,1,1\n2,1,0,1\n2,3,0,1\n")
        with self.assertLogs("workload", level="WARNING"):
            records = load_trace(path)
        self.assertEqual([(r.cycle, r.src) for r in records], [(2, 1), (2, 3), (9, 0)])

    def test_malformed_lines_report_file_and_line(self):
        cases = {
            "fields.trace": "0,1,2,1\n1,2,3\n",
            "integer.trace": "0,1,2,1\n1,x,3,1\n",
            "negative.trace": "0,1,2,1\n-1,1,3,1\n",
            "flits.trace": "0,1,2,1\n1,1,3,0\n",
            "range.trace": "0,1,2,1\n1,1,8,1\n",
        }
        for name, text in cases.items():
            with self.subTest(file=name):
                path = self.write(name, text)
                with self.assertRaises(TraceFormatError) as ctx:
                    load_trace(path, 8)
                self.assertEqual(ctx.exception.line, 2)
                self.assertTrue(str(ctx.exception).startswith(f"{path}:2: "))

    def test_undecodable_bytes_report_file_and_line(self):
        path = self.dir / "binary.trace"
        path.write_bytes(b"0,1,2,1\n1,\xff\xfe,3,1\n")
        with self.assertRaises(TraceFormatError) as ctx:
            load_trace(path, 8)
        self.assertEqual(ctx.exception.line, 2)
        self.assertTrue(str(ctx.exception).startswith(f"{path}:2: "))

    def test_save_then_load(self):
        records = [TraceRecord(0, 0, 3, 2), TraceRecord(4, 2, 1, 5)]
        path = self.dir / "out" / "c.trace"
        save_trace(records, path)
        self.assertTrue(path.read_text(encoding="utf-8").startswith("# cycle,src,dst,n_flits\n"))
        self.assertEqual(load_trace(path, 4), records)

    def test_trace_workload_ignores_horizon(self):
        path = self.write("d.trace", "0,0,1,1\n100000,1,0,1\n")
        spec = WorkloadSpec("trace", n_terminals=2, trace_path=str(path))
        self.assertEqual(len(generate(spec, 10)), 2)


class TestHistogram(unittest.TestCase):

    def test_counts_and_hottest(self):
        records = [TraceRecord(0, 1, 2, 1), TraceRecord(1, 1, 3, 1), TraceRecord(2, 0, 2, 1)]
        hist = histogram(records, 4)
        self.assertEqual(hist.src_counts, (1, 2, 0, 0))
        self.assertEqual(hist.dst_counts, (0, 0, 2, 1))
        self.assertEqual(hist.total, 3)
        self.assertEqual(hist.hottest("src"), [1])
        self.assertEqual(hist.hottest("dst", 2), [2, 3])

    def test_empty_histogram(self):
        hist = histogram([], 3)
        self.assertEqual(hist.src_counts, (0, 0, 0))
        self.assertEqual(hist.hottest("src", 2), [0, 1])

    def test_save_histogram(self):
        temp_dir = tempfile.TemporaryDirectory()
        self.addCleanup(temp_dir.cleanup)
        path = Path(temp_dir.name) / "h.csv"
        save_histogram(histogram([TraceRecord(0, 1, 0, 1)], 2), path)
        self.assertEqual(
            path.read_text(encoding="utf-8"), "node,src_count,dst_count\n0,0,1\n1,1,0\n"
        )


if __name__ == "__main__":
    unittest.main()
