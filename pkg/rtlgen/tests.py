import json
import re
import tempfile
from io import StringIO
from pathlib import Path

from django.core.management import CommandError, call_command
from django.test import SimpleTestCase

from feedpuf.exceptions import ConfigurationError, UsageError
from pufs.cyclic import parse_taps, sample_feedback
from pufs.models import FeedbackConfig, PufCategory

from .emitter import KEEP, RtlConfig, emit_testbench, emit_verilog
from .serializers import RtlConfigSerializer

GOLDENS = Path(__file__).resolve().parent / "goldens"

REFERENCE_CONFIGS = [
    RtlConfig(PufCategory.ARBITER, 4, 4),
    RtlConfig(PufCategory.ARBITER, 4, 4, parse_taps("0:0:3,1:1:2,2:2:1,3:3:0", 4, 4)),
    RtlConfig(PufCategory.RING_OSCILLATOR, 3, 1),
    RtlConfig(PufCategory.RING_OSCILLATOR, 3, 1, parse_taps("0:1:0", 3, 1)),
    RtlConfig(PufCategory.BUTTERFLY, 4, 2),
    RtlConfig(PufCategory.BUTTERFLY, 4, 2, parse_taps("1:0:2,0:3:3", 4, 2), dont_touch=True),
]

PORT = re.compile(r"^\s+(?:input|output)\s+wire\s+(?:\[\d+:0\]\s+)?(\w+)", re.MULTILINE)


def top_module(text: str) -> str:
    return text.split("endmodule", 1)[0]


class EmitterTests(SimpleTestCase):
    def test_reference_configs_match_goldens(self):
        for cfg in REFERENCE_CONFIGS:
            with self.subTest(cfg.name):
                self.assertEqual(emit_verilog(cfg), (GOLDENS / f"{cfg.name}.v").read_text())

    def test_default_module_names(self):
        self.assertEqual(
            [cfg.name for cfg in REFERENCE_CONFIGS],
            ["apuf_4x4", "cyc_apuf_4x4", "ropuf_3x1", "cyc_ropuf_3x1", "bpuf_4x2", "cyc_bpuf_4x2"],
        )
        self.assertEqual(RtlConfig(PufCategory.ARBITER, 4, 1, module_name="chip").name, "chip")

    def test_structural_counts(self):
        for category in PufCategory:
            for taps in (0, 5):
                fb = sample_feedback(12, 3, taps, 1) if taps else FeedbackConfig.empty()
                text = emit_verilog(RtlConfig(category, 12, 3, fb))
                with self.subTest(category=category, taps=taps):
                    self.assertEqual(text.count("xor fb_xor_"), taps)
                    self.assertEqual(text.count("assign eff_challenge["), 12 - taps if taps else 0)
                    self.assertEqual(text.count("mux_pair stage_"), 36 if category == PufCategory.ARBITER else 0)
                    self.assertEqual(text.count("ro_stage ring_"), 72 if category == PufCategory.RING_OSCILLATOR else 0)
                    self.assertEqual(text.count("butterfly_cell cell_"), 3 if category == PufCategory.BUTTERFLY else 0)
                    self.assertEqual(text.count("module feedback_register"), 1 if taps else 0)

    def test_every_ring_has_an_odd_inversion_count(self):
        for n_c in range(1, 8):
            text = emit_verilog(RtlConfig(PufCategory.RING_OSCILLATOR, n_c, 2))
            gates = re.findall(r"assign ring_[ab]_\d\[0\] = (.*);", text)
            with self.subTest(n_c=n_c):
                self.assertEqual(len(gates), 4)
                for gate in gates:
                    stages_plus_gate = n_c + (1 if gate.startswith("~") else 0)
                    self.assertEqual(stages_plus_gate % 2, 1, gate)
                self.assertEqual(text.count("ro_stage ring_a_0_"), n_c)

    def test_port_contract(self):
        for cfg in REFERENCE_CONFIGS:
            expected = ["challenge", "enable", "clk", "response"] if cfg.cyclic else ["challenge", "enable", "response"]
            self.assertEqual(PORT.findall(top_module(emit_verilog(cfg))), expected)

    def test_cells_are_emitted_once(self):
        text = emit_verilog(RtlConfig(PufCategory.BUTTERFLY, 8, 4, sample_feedback(8, 4, 3, 0)))
        for cell in ("mux_pair", "butterfly_cell", "feedback_register"):
            self.assertEqual(text.count(f"module {cell} "), 1, cell)

    def test_dont_touch_marks_symmetric_paths(self):
        plain = emit_verilog(RtlConfig(PufCategory.ARBITER, 6, 2))
        kept = emit_verilog(RtlConfig(PufCategory.ARBITER, 6, 2, dont_touch=True))
        self.assertNotIn(KEEP, plain)
        self.assertEqual(kept.count(KEEP), 12)
        self.assertEqual(emit_verilog(RtlConfig(PufCategory.RING_OSCILLATOR, 6, 2, dont_touch=True)).count(KEEP), 24)

    def test_emission_is_deterministic(self):
        cfg = RtlConfig(PufCategory.RING_OSCILLATOR, 16, 2, sample_feedback(16, 2, 4, 9))
        self.assertEqual(emit_verilog(cfg), emit_verilog(cfg))

    def test_invalid_configs(self):
        with self.assertRaises(ConfigurationError):
            RtlConfig(PufCategory.ARBITER, 0, 1)
        with self.assertRaises(ConfigurationError):
            RtlConfig(PufCategory.ARBITER, 4, 1, FeedbackConfig(((1, 0, 0),)))
        with self.assertRaises(ConfigurationError):
            RtlConfig(PufCategory.ARBITER, 4, 1, module_name="2fast")

    def test_serializer_round_trip(self):
        cfg = REFERENCE_CONFIGS[-1]
        data = json.loads(json.dumps(RtlConfigSerializer(cfg).data))
        self.assertEqual(data["fb"]["taps"], [[1, 0, 2], [0, 3, 3]])
        serializer = RtlConfigSerializer(data=data)
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertEqual(emit_verilog(serializer.save()), emit_verilog(cfg))

    def test_serializer_rejects_out_of_range_taps(self):
        serializer = RtlConfigSerializer(
            data={"category": "arbiter", "challenge_width": 4, "response_width": 1, "fb": {"taps": [[0, 0, 9]]}}
        )
        self.assertFalse(serializer.is_valid())


class TestbenchTests(SimpleTestCase):
    def test_one_apply_block_per_challenge(self):
        cfg = REFERENCE_CONFIGS[1]
        bench = emit_testbench(cfg, ["1010", [0, 0, 1, 1]], cycles=8)
        self.assertEqual(bench.count("        // challenge "), 2)
        self.assertIn("challenge = 4'b1010;", bench)
        self.assertIn("challenge = 4'b0011;", bench)
        self.assertIn("cycle <= 8;", bench)
        self.assertIn(".clk(clk),", bench)
        self.assertIn("cyc_apuf_4x4 dut (", bench)
        self.assertEqual(bench, emit_testbench(cfg, ["1010", "0011"], cycles=8))

    def test_empty_list_gives_a_stimulus_free_bench(self):
        bench = emit_testbench(REFERENCE_CONFIGS[0], [])
        self.assertNotIn("        // challenge ", bench)
        self.assertNotIn(".clk(clk)", bench)
        self.assertIn("$finish;", bench)

    def test_width_and_cycle_checks(self):
        with self.assertRaises(UsageError):
            emit_testbench(REFERENCE_CONFIGS[0], ["101"])
        with self.assertRaises(UsageError):
            emit_testbench(REFERENCE_CONFIGS[0], ["1010"], cycles=0)


class EmitCommandTests(SimpleTestCase):
    def run_command(self, **kwargs):
        out = StringIO()
        call_command("emit_verilog", stdout=out, **kwargs)
        return out.getvalue()

    def test_flags_reproduce_the_golden(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "cyc.v"
            out = self.run_command(category="apuf", nc=4, n=4, taps="0:0:3,1:1:2,2:2:1,3:3:0", output=str(path))
            self.assertIn("cyc_apuf_4x4", out)
            self.assertEqual(path.read_bytes(), (GOLDENS / "cyc_apuf_4x4.v").read_bytes())

    def test_stdout_and_config(self):
        printed = self.run_command(category="bpuf", nc=4, n=2)
        self.assertEqual(printed, (GOLDENS / "bpuf_4x2.v").read_text())
        with tempfile.TemporaryDirectory() as tmp:
            config = Path(tmp) / "rtl.json"
            config.write_text(
                json.dumps({"category": "ring_oscillator", "challenge_width": 3, "response_width": 1, "fb": {"taps": [[0, 1, 0]]}})
            )
            self.assertEqual(self.run_command(config=str(config)), (GOLDENS / "cyc_ropuf_3x1.v").read_text())

    def test_testbench_with_random_challenges(self):
        with tempfile.TemporaryDirectory() as tmp:
            bench = Path(tmp) / "tb.v"
            self.run_command(
                category="apuf", nc=16, n=1, taps="random:4:1", testbench=str(bench), random=3, cycles=5,
                output=str(Path(tmp) / "dut.v"),
            )
            text = bench.read_text()
            self.assertEqual(text.count("        // challenge "), 3)
            self.assertIn("cycle <= 5;", text)

    def test_exit_codes(self):
        with self.assertRaises(CommandError) as ctx:
            self.run_command(category="apuf", nc=4, challenge=["1010"])
        self.assertEqual(ctx.exception.returncode, 2)
        with self.assertRaises(CommandError) as ctx:
            self.run_command(category="apuf", nc=4, taps="0:0:7")
        self.assertEqual(ctx.exception.returncode, 3)
        with self.assertRaises(CommandError) as ctx:
            self.run_command()
        self.assertEqual(ctx.exception.returncode, 2)
